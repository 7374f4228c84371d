//! Text-file input/output: instance loading, penalty synthesis, roster and
//! LP-text export.
//!
//! All instance files share one syntax: a single header word on the first
//! line, then whitespace-separated integers; `#` starts a comment that runs
//! to the end of the line; blank lines are ignored. Parse errors carry the
//! file name, the 1-based line, and the offending field.
//!
//! The five file kinds are:
//!
//! * `demand` — 3 rows (grade 1..3) of 14 columns (day Su..Sa, night Su..Sa).
//! * `qualifications` — 3 rows of one column per nurse: grade, hours level,
//!   shift preference (0 = indifferent, 1 = prefers days, 2 = prefers
//!   nights). Two optional extra rows carry previous-week data: the position
//!   of the last day off (1–7, 0 = unknown) and the previous-week penalty.
//! * `wishes` — one row of 14 columns per nurse, values 0–4.
//! * `patterns` — 219 rows: index, 14 slot bits, quality 0–4, first and last
//!   day off, weekly hours percent. The grid is checked against the
//!   canonical library; only the quality column carries new information.
//! * `penalties` — per nurse: the nurse index, a range line
//!   `daylo dayhi nightlo nighthi` (`0 0` = empty), then one value per
//!   pattern of the day range followed by the night range, wrapped freely.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use crate::fitness::{
    combine_parts, coverage_shortfall, preference_cost, senior_weekend_excess, FitnessWeights,
};
use crate::model::{
    enumerate_pattern_library, restrict_by_previous_week, Chromosome, DemandTable, IdxRange,
    Instance, ModelError, Nurse, PatternIdx, PatternKind, PatternLibrary, ShiftPattern, GRADES,
    HOURS_LEVELS, PATTERN_COUNT, SLOT_COUNT, WEEK_DAYS,
};

/// Column headers for the seven week positions.
pub const DAY_NAMES: [&str; WEEK_DAYS] = ["Su", "Mo", "Tu", "We", "Th", "Fr", "Sa"];

/// Weekly working time in percent for each hours level 1–7.
pub const LEVEL_PERCENTS: [u16; HOURS_LEVELS] = [100, 80, 60, 50, 40, 20, 0];

/// Errors while reading or writing instance files.
#[derive(Debug, Error)]
pub enum DataError {
    /// Malformed file content; `line` is 1-based.
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },
    /// The underlying read or write failed.
    #[error("{file}: {source}")]
    Io {
        file: String,
        #[source]
        source: io::Error,
    },
    /// The files parsed but describe an invalid instance.
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn parse_err(file: &str, line: usize, message: impl Into<String>) -> DataError {
    DataError::Parse {
        file: file.to_string(),
        line,
        message: message.into(),
    }
}

/// A parsed numeric file: the display name and one entry per non-empty data
/// line, carrying the 1-based line number and its integers.
struct NumericFile {
    file: String,
    rows: Vec<(usize, Vec<i64>)>,
}

/// Reads a whole file as header word plus integer rows.
fn read_numeric(path: &Path, header: &str) -> Result<NumericFile, DataError> {
    let file = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        file: file.clone(),
        source,
    })?;
    parse_numeric(&file, &text, header)
}

/// Parses already-read text; separated from [`read_numeric`] for tests.
fn parse_numeric(file: &str, text: &str, header: &str) -> Result<NumericFile, DataError> {
    let mut rows = Vec::new();
    let mut seen_header = false;
    for (line_no, raw) in text.lines().enumerate() {
        let line_no = line_no + 1;
        let data = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = data.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if !seen_header {
            if tokens != [header] {
                return Err(parse_err(
                    file,
                    line_no,
                    format!("expected header '{header}', found '{}'", data.trim()),
                ));
            }
            seen_header = true;
            continue;
        }
        let mut values = Vec::with_capacity(tokens.len());
        for token in tokens {
            let value: i64 = token.parse().map_err(|_| {
                parse_err(file, line_no, format!("invalid integer '{token}'"))
            })?;
            values.push(value);
        }
        rows.push((line_no, values));
    }
    if !seen_header {
        return Err(parse_err(file, 1, format!("missing header '{header}'")));
    }
    Ok(NumericFile {
        file: file.to_string(),
        rows,
    })
}

/// Checks `value` against an inclusive range, naming the field on failure.
fn in_range(
    file: &str,
    line: usize,
    what: &str,
    value: i64,
    lo: i64,
    hi: i64,
) -> Result<i64, DataError> {
    if (lo..=hi).contains(&value) {
        Ok(value)
    } else {
        Err(parse_err(
            file,
            line,
            format!("{what} is {value}, outside {lo}..={hi}"),
        ))
    }
}

fn expect_row_len(file: &str, row: &(usize, Vec<i64>), want: usize) -> Result<(), DataError> {
    if row.1.len() == want {
        Ok(())
    } else {
        Err(parse_err(
            file,
            row.0,
            format!("expected {want} values on this row, found {}", row.1.len()),
        ))
    }
}

/// Loads a demand table: 3 grade rows of 14 slot columns.
pub fn load_demand(path: &Path) -> Result<DemandTable, DataError> {
    let nf = read_numeric(path, "demand")?;
    if nf.rows.len() != GRADES {
        return Err(parse_err(
            &nf.file,
            nf.rows.last().map_or(1, |r| r.0),
            format!("expected {GRADES} demand rows, found {}", nf.rows.len()),
        ));
    }
    let mut demand = DemandTable::zero();
    for (grade, row) in nf.rows.iter().enumerate() {
        expect_row_len(&nf.file, row, SLOT_COUNT)?;
        for (slot, &value) in row.1.iter().enumerate() {
            let value = in_range(
                &nf.file,
                row.0,
                &format!("demand for grade {} slot {}", grade + 1, slot + 1),
                value,
                0,
                u16::MAX as i64,
            )?;
            demand.required[slot][grade] = value as u16;
        }
    }
    Ok(demand)
}

/// One nurse's row set from a qualifications file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QualificationRow {
    pub grade: u8,
    pub hours_level: u8,
    pub shift_preference: u8,
    pub prev_last_day_off: Option<u8>,
    pub prev_penalty: Option<u8>,
}

/// Loads a qualifications file; the column count defines the nurse count.
pub fn load_qualifications(path: &Path) -> Result<Vec<QualificationRow>, DataError> {
    let nf = read_numeric(path, "qualifications")?;
    if nf.rows.len() != 3 && nf.rows.len() != 5 {
        return Err(parse_err(
            &nf.file,
            nf.rows.last().map_or(1, |r| r.0),
            format!(
                "expected 3 rows (grades, hours levels, shift preferences) or 5 \
                 (plus previous-week day off and penalty), found {}",
                nf.rows.len()
            ),
        ));
    }
    let n = nf.rows[0].1.len();
    if n == 0 {
        return Err(parse_err(&nf.file, nf.rows[0].0, "no nurses in grade row"));
    }
    for row in &nf.rows {
        expect_row_len(&nf.file, row, n)?;
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let grade = in_range(
            &nf.file,
            nf.rows[0].0,
            &format!("grade of nurse {}", i + 1),
            nf.rows[0].1[i],
            1,
            GRADES as i64,
        )? as u8;
        let hours_level = in_range(
            &nf.file,
            nf.rows[1].0,
            &format!("hours level of nurse {}", i + 1),
            nf.rows[1].1[i],
            1,
            HOURS_LEVELS as i64,
        )? as u8;
        let shift_preference = in_range(
            &nf.file,
            nf.rows[2].0,
            &format!("shift preference of nurse {}", i + 1),
            nf.rows[2].1[i],
            0,
            2,
        )? as u8;
        let (prev_last_day_off, prev_penalty) = if nf.rows.len() == 5 {
            let day = in_range(
                &nf.file,
                nf.rows[3].0,
                &format!("previous-week last day off of nurse {}", i + 1),
                nf.rows[3].1[i],
                0,
                WEEK_DAYS as i64,
            )? as u8;
            let penalty = in_range(
                &nf.file,
                nf.rows[4].0,
                &format!("previous-week penalty of nurse {}", i + 1),
                nf.rows[4].1[i],
                0,
                100,
            )? as u8;
            if day == 0 {
                if penalty != 0 {
                    return Err(parse_err(
                        &nf.file,
                        nf.rows[4].0,
                        format!(
                            "nurse {}: previous-week penalty given without a \
                             previous-week day off",
                            i + 1
                        ),
                    ));
                }
                (None, None)
            } else {
                (Some(day), Some(penalty))
            }
        } else {
            (None, None)
        };
        out.push(QualificationRow {
            grade,
            hours_level,
            shift_preference,
            prev_last_day_off,
            prev_penalty,
        });
    }
    Ok(out)
}

/// Loads a wishes file: one 14-column row per nurse, values 0–4.
pub fn load_wishes(path: &Path, nurse_count: usize) -> Result<Vec<[u8; SLOT_COUNT]>, DataError> {
    let nf = read_numeric(path, "wishes")?;
    if nf.rows.len() != nurse_count {
        return Err(parse_err(
            &nf.file,
            nf.rows.last().map_or(1, |r| r.0),
            format!(
                "expected one row per nurse ({nurse_count}), found {}",
                nf.rows.len()
            ),
        ));
    }
    let mut out = Vec::with_capacity(nurse_count);
    for (i, row) in nf.rows.iter().enumerate() {
        expect_row_len(&nf.file, row, SLOT_COUNT)?;
        let mut wishes = [0u8; SLOT_COUNT];
        for (slot, &value) in row.1.iter().enumerate() {
            wishes[slot] = in_range(
                &nf.file,
                row.0,
                &format!("wish of nurse {} for slot {}", i + 1, slot + 1),
                value,
                0,
                4,
            )? as u8;
        }
        out.push(wishes);
    }
    Ok(out)
}

/// Loads a patterns file, checking every row against the canonical library
/// and keeping the quality column.
pub fn load_patterns(path: &Path) -> Result<PatternLibrary, DataError> {
    let nf = read_numeric(path, "patterns")?;
    if nf.rows.len() != PATTERN_COUNT {
        return Err(parse_err(
            &nf.file,
            nf.rows.last().map_or(1, |r| r.0),
            format!("expected {PATTERN_COUNT} pattern rows, found {}", nf.rows.len()),
        ));
    }
    let mut library = enumerate_pattern_library();
    for (i, row) in nf.rows.iter().enumerate() {
        let want_idx = (i + 1) as PatternIdx;
        expect_row_len(&nf.file, row, SLOT_COUNT + 5)?;
        let idx = row.1[0];
        if idx != want_idx as i64 {
            return Err(parse_err(
                &nf.file,
                row.0,
                format!("pattern index {idx} out of order (expected {want_idx})"),
            ));
        }
        let canon = library.get(want_idx);
        for slot in 0..SLOT_COUNT {
            let bit = in_range(
                &nf.file,
                row.0,
                &format!("slot bit {} of pattern {want_idx}", slot + 1),
                row.1[1 + slot],
                0,
                1,
            )?;
            if (bit == 1) != canon.slots[slot] {
                return Err(parse_err(
                    &nf.file,
                    row.0,
                    format!(
                        "pattern {want_idx}: slot grid does not match the \
                         canonical library at slot {}",
                        slot + 1
                    ),
                ));
            }
        }
        let quality = in_range(
            &nf.file,
            row.0,
            &format!("quality of pattern {want_idx}"),
            row.1[1 + SLOT_COUNT],
            0,
            4,
        )? as u8;
        let first = row.1[2 + SLOT_COUNT];
        let last = row.1[3 + SLOT_COUNT];
        if first != canon.first_day_off as i64 || last != canon.last_day_off as i64 {
            return Err(parse_err(
                &nf.file,
                row.0,
                format!(
                    "pattern {want_idx}: days-off bounds {first}/{last} do not \
                     match the canonical {}/{}",
                    canon.first_day_off, canon.last_day_off
                ),
            ));
        }
        let percent = row.1[4 + SLOT_COUNT];
        let want_percent = LEVEL_PERCENTS[(canon.hours_level - 1) as usize] as i64;
        if percent != want_percent {
            return Err(parse_err(
                &nf.file,
                row.0,
                format!(
                    "pattern {want_idx}: weekly hours {percent}% do not match \
                     the canonical {want_percent}%"
                ),
            ));
        }
        library.set_quality(want_idx, quality);
    }
    Ok(library)
}

/// One nurse's block from a penalties file.
#[derive(Debug)]
struct PenaltyBlock {
    day_range: IdxRange,
    night_range: IdxRange,
    day_penalties: Vec<u8>,
    night_penalties: Vec<u8>,
}

/// Token cursor over the flattened rows of a numeric file.
struct Cursor {
    file: String,
    tokens: Vec<(usize, i64)>,
    pos: usize,
}

impl Cursor {
    fn new(nf: NumericFile) -> Cursor {
        let tokens = nf
            .rows
            .iter()
            .flat_map(|(line, values)| values.iter().map(move |&v| (*line, v)))
            .collect();
        Cursor {
            file: nf.file,
            tokens,
            pos: 0,
        }
    }

    fn last_line(&self) -> usize {
        self.tokens.last().map_or(1, |t| t.0)
    }

    fn next(&mut self, what: &str) -> Result<(usize, i64), DataError> {
        match self.tokens.get(self.pos) {
            Some(&t) => {
                self.pos += 1;
                Ok(t)
            }
            None => Err(parse_err(
                &self.file,
                self.last_line(),
                format!("file ends before {what}"),
            )),
        }
    }

    fn next_in_range(&mut self, what: &str, lo: i64, hi: i64) -> Result<(usize, i64), DataError> {
        let (line, value) = self.next(what)?;
        in_range(&self.file, line, what, value, lo, hi)?;
        Ok((line, value))
    }
}

/// Reads one `lo hi` pair: `0 0` means empty, otherwise a 1-based inclusive
/// pattern index range.
fn read_range(cursor: &mut Cursor, what: &str) -> Result<IdxRange, DataError> {
    let (line, lo) = cursor.next_in_range(&format!("{what} lower bound"), 0, PATTERN_COUNT as i64)?;
    let (_, hi) = cursor.next_in_range(&format!("{what} upper bound"), 0, PATTERN_COUNT as i64)?;
    if lo == 0 && hi == 0 {
        return Ok(IdxRange::EMPTY);
    }
    if lo < 1 || hi < lo {
        return Err(parse_err(
            &cursor.file,
            line,
            format!("{what} {lo}..{hi} is not a valid range (use '0 0' for empty)"),
        ));
    }
    Ok(IdxRange::new(lo as PatternIdx, hi as PatternIdx))
}

/// Loads a penalties file: one block per nurse, in nurse order.
fn load_penalty_blocks(path: &Path, nurse_count: usize) -> Result<Vec<PenaltyBlock>, DataError> {
    let nf = read_numeric(path, "penalties")?;
    let mut cursor = Cursor::new(nf);
    let mut blocks = Vec::with_capacity(nurse_count);
    for i in 1..=nurse_count {
        let (line, idx) = cursor.next(&format!("the block of nurse {i}"))?;
        if idx != i as i64 {
            return Err(parse_err(
                &cursor.file,
                line,
                format!("penalty block {idx} out of order (expected nurse {i})"),
            ));
        }
        let day_range = read_range(&mut cursor, &format!("day range of nurse {i}"))?;
        let night_range = read_range(&mut cursor, &format!("night range of nurse {i}"))?;
        let mut read_values = |kind: &str, count: usize| -> Result<Vec<u8>, DataError> {
            let mut values = Vec::with_capacity(count);
            for k in 1..=count {
                let (_, v) = cursor.next_in_range(
                    &format!("{kind} penalty {k} of nurse {i}"),
                    0,
                    100,
                )?;
                values.push(v as u8);
            }
            Ok(values)
        };
        let day_penalties = read_values("day", day_range.len())?;
        let night_penalties = read_values("night", night_range.len())?;
        blocks.push(PenaltyBlock {
            day_range,
            night_range,
            day_penalties,
            night_penalties,
        });
    }
    if cursor.pos != cursor.tokens.len() {
        let (line, value) = cursor.tokens[cursor.pos];
        return Err(parse_err(
            &cursor.file,
            line,
            format!("trailing value {value} after the last penalty block"),
        ));
    }
    Ok(blocks)
}

/// Weights for deriving pattern penalties when no penalties file exists.
///
/// A nurse's penalty for a pattern is
/// `quality_weight * quality + wish_weight * (sum of the nurse's wishes over
/// the pattern's worked slots) + cross_kind_surcharge` (the surcharge applies
/// when a day-preferring nurse gets a night pattern or vice versa), clamped
/// to `clamp_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PenaltySynthesisConfig {
    pub quality_weight: u32,
    pub wish_weight: u32,
    pub cross_kind_surcharge: u32,
    /// Upper bound for every synthesized penalty; at most 100.
    pub clamp_max: u8,
}

impl Default for PenaltySynthesisConfig {
    fn default() -> Self {
        PenaltySynthesisConfig {
            quality_weight: 1,
            wish_weight: 1,
            cross_kind_surcharge: 18,
            clamp_max: 100,
        }
    }
}

/// Derives a nurse's penalty rows from pattern quality, wishes, and shift
/// preference.
///
/// # Panics
/// Panics when `config.clamp_max` exceeds 100 (penalties are capped at 100).
pub fn synthesize_penalties(
    shift_preference: u8,
    wishes: &[u8; SLOT_COUNT],
    day_range: IdxRange,
    night_range: IdxRange,
    library: &PatternLibrary,
    config: &PenaltySynthesisConfig,
) -> (Vec<u8>, Vec<u8>) {
    assert!(
        config.clamp_max <= 100,
        "clamp_max {} exceeds the penalty cap 100",
        config.clamp_max
    );
    let one = |range: IdxRange| -> Vec<u8> {
        range
            .iter()
            .map(|j| {
                let pattern = library.get(j);
                let wish_sum: u32 = (1..=SLOT_COUNT)
                    .filter(|&k| pattern.covers(k))
                    .map(|k| wishes[k - 1] as u32)
                    .sum();
                let cross = match pattern.kind {
                    PatternKind::Day => shift_preference == 2,
                    PatternKind::Night => shift_preference == 1,
                    PatternKind::Empty => false,
                };
                let mut penalty = config.quality_weight * pattern.quality as u32
                    + config.wish_weight * wish_sum;
                if cross {
                    penalty += config.cross_kind_surcharge;
                }
                penalty.min(config.clamp_max as u32) as u8
            })
            .collect()
    };
    (one(day_range), one(night_range))
}

/// A loaded instance plus non-fatal warnings (regenerated library, or a
/// previous-week restriction that had to be abandoned).
#[derive(Debug)]
pub struct LoadOutcome {
    pub instance: Instance,
    pub warnings: Vec<String>,
}

/// Loads a full instance from its component files.
///
/// `patterns` may be absent: the library is then regenerated with all
/// quality scores 0 and a warning is recorded. `penalties` may be absent:
/// penalty rows are then synthesized from quality, wishes, and shift
/// preference using `synth`.
///
/// When a nurse has previous-week data, their legal ranges are restricted to
/// the patterns whose first day off is no later than their last day off of the
/// previous week; if that would empty their alphabet, the unrestricted ranges
/// are kept and a warning is recorded.
pub fn load_instance(
    demand: &Path,
    qualifications: &Path,
    wishes: &Path,
    patterns: Option<&Path>,
    penalties: Option<&Path>,
    synth: &PenaltySynthesisConfig,
) -> Result<LoadOutcome, DataError> {
    let demand = load_demand(demand)?;
    let quals = load_qualifications(qualifications)?;
    let nurse_count = quals.len();
    let wishes = load_wishes(wishes, nurse_count)?;
    let mut warnings = Vec::new();
    let library = match patterns {
        Some(path) => load_patterns(path)?,
        None => {
            warnings.push(
                "no patterns file: regenerated the pattern library with all \
                 quality scores 0"
                    .to_string(),
            );
            enumerate_pattern_library()
        }
    };
    let blocks = match penalties {
        Some(path) => Some(load_penalty_blocks(path, nurse_count)?),
        None => None,
    };

    let mut nurses = Vec::with_capacity(nurse_count);
    for (i, qual) in quals.iter().enumerate() {
        let id = i + 1;
        let (base_day, base_night, mut file_pens) = match &blocks {
            Some(blocks) => {
                let b = &blocks[i];
                (
                    b.day_range,
                    b.night_range,
                    Some((b.day_penalties.clone(), b.night_penalties.clone())),
                )
            }
            None => {
                let (day, night) = library.legal_ranges(qual.hours_level);
                (day, night, None)
            }
        };
        let (mut day_range, mut night_range) = (base_day, base_night);
        if let Some(prev_day) = qual.prev_last_day_off {
            let ((day, night), fell_back) =
                restrict_by_previous_week(prev_day, base_day, base_night, &library);
            if fell_back {
                warnings.push(format!(
                    "nurse {id}: no pattern is compatible with the previous week \
                     (last day off {prev_day}); keeping the unrestricted ranges"
                ));
            } else {
                if let Some((day_pens, night_pens)) = &mut file_pens {
                    *day_pens = slice_suffix(day_pens, base_day, day);
                    *night_pens = slice_suffix(night_pens, base_night, night);
                }
                day_range = day;
                night_range = night;
            }
        }
        let (day_pens, night_pens) = match file_pens {
            Some(pens) => pens,
            None => synthesize_penalties(
                qual.shift_preference,
                &wishes[i],
                day_range,
                night_range,
                &library,
                synth,
            ),
        };
        let mut nurse = Nurse::new(
            id,
            qual.grade,
            qual.hours_level,
            qual.shift_preference,
            wishes[i],
            day_range,
            night_range,
            day_pens,
            night_pens,
        )?;
        nurse.prev_last_day_off = qual.prev_last_day_off;
        nurse.prev_penalty = qual.prev_penalty;
        nurses.push(nurse);
    }
    let instance = Instance::new(nurses, library, demand, None)?;
    Ok(LoadOutcome { instance, warnings })
}

/// Cuts a penalty row down to the values of `kept`, which is a suffix of
/// `base` (the shape produced by the previous-week restriction).
fn slice_suffix(pens: &[u8], base: IdxRange, kept: IdxRange) -> Vec<u8> {
    if kept.is_empty() {
        return Vec::new();
    }
    let offset = (kept.lo - base.lo) as usize;
    pens[offset..].to_vec()
}

// ---------------------------------------------------------------------------
// Writers
// ---------------------------------------------------------------------------

fn write_int_row(out: &mut impl Write, values: impl Iterator<Item = i64>) -> io::Result<()> {
    let row: Vec<String> = values.map(|v| v.to_string()).collect();
    writeln!(out, "{}", row.join(" "))
}

/// Writes a demand table in the 3-row, 14-column format.
pub fn write_demand(demand: &DemandTable, out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "demand")?;
    for grade in 0..GRADES {
        write_int_row(out, (0..SLOT_COUNT).map(|s| demand.required[s][grade] as i64))?;
    }
    Ok(())
}

/// Writes a qualifications file; the previous-week rows appear only when at
/// least one nurse carries previous-week data.
pub fn write_qualifications(nurses: &[Nurse], out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "qualifications")?;
    write_int_row(out, nurses.iter().map(|n| n.grade as i64))?;
    write_int_row(out, nurses.iter().map(|n| n.hours_level as i64))?;
    write_int_row(out, nurses.iter().map(|n| n.shift_preference as i64))?;
    if nurses.iter().any(|n| n.prev_last_day_off.is_some()) {
        write_int_row(
            out,
            nurses.iter().map(|n| n.prev_last_day_off.unwrap_or(0) as i64),
        )?;
        write_int_row(
            out,
            nurses.iter().map(|n| {
                if n.prev_last_day_off.is_some() {
                    n.prev_penalty.unwrap_or(0) as i64
                } else {
                    0
                }
            }),
        )?;
    }
    Ok(())
}

/// Writes a wishes file: one 14-column row per nurse.
pub fn write_wishes(nurses: &[Nurse], out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "wishes")?;
    for nurse in nurses {
        write_int_row(out, nurse.wishes.iter().map(|&w| w as i64))?;
    }
    Ok(())
}

/// Writes the full pattern library, one row per pattern.
pub fn write_patterns(library: &PatternLibrary, out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "patterns")?;
    for pattern in library.iter() {
        let mut row: Vec<i64> = vec![pattern.index as i64];
        row.extend(pattern.slots.iter().map(|&s| s as i64));
        row.push(pattern.quality as i64);
        row.push(pattern.first_day_off as i64);
        row.push(pattern.last_day_off as i64);
        row.push(LEVEL_PERCENTS[(pattern.hours_level - 1) as usize] as i64);
        write_int_row(out, row.into_iter())?;
    }
    Ok(())
}

fn range_pair(range: IdxRange) -> (i64, i64) {
    if range.is_empty() {
        (0, 0)
    } else {
        (range.lo as i64, range.hi as i64)
    }
}

/// Writes a penalties file: per nurse the index, the range line, and the
/// penalty values wrapped at 13 per line.
pub fn write_penalties(nurses: &[Nurse], out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "penalties")?;
    for nurse in nurses {
        writeln!(out, "{}", nurse.id)?;
        let (dlo, dhi) = range_pair(nurse.day_range);
        let (nlo, nhi) = range_pair(nurse.night_range);
        writeln!(out, "{dlo} {dhi} {nlo} {nhi}")?;
        let all: Vec<i64> = nurse
            .day_penalties()
            .iter()
            .chain(nurse.night_penalties())
            .map(|&p| p as i64)
            .collect();
        for chunk in all.chunks(13) {
            write_int_row(out, chunk.iter().copied())?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// LP-text export
// ---------------------------------------------------------------------------

/// Maximum line width for LP text before wrapping.
const LP_WIDTH: usize = 72;

/// Writes `terms` joined by `+`, wrapped at [`LP_WIDTH`], with `tail`
/// appended after the last term (or on its own line if it would overflow).
fn write_sum_row(out: &mut impl Write, terms: &[String], tail: &str) -> io::Result<()> {
    let mut line = terms[0].clone();
    for term in &terms[1..] {
        if line.len() + 3 + term.len() > LP_WIDTH {
            writeln!(out, "{line}")?;
            line = format!("+ {term}");
        } else {
            line.push_str(" + ");
            line.push_str(term);
        }
    }
    if !tail.is_empty() {
        if line.len() + 1 + tail.len() > LP_WIDTH {
            writeln!(out, "{line}")?;
            line = tail.to_string();
        } else {
            line.push(' ');
            line.push_str(tail);
        }
    }
    writeln!(out, "{line}")
}

/// Writes space-joined words wrapped at [`LP_WIDTH`].
fn write_word_row(out: &mut impl Write, words: &[String]) -> io::Result<()> {
    let mut line = words[0].clone();
    for word in &words[1..] {
        if line.len() + 1 + word.len() > LP_WIDTH {
            writeln!(out, "{line}")?;
            line = word.clone();
        } else {
            line.push(' ');
            line.push_str(word);
        }
    }
    writeln!(out, "{line}")
}

fn alphabet_of(nurse: &Nurse) -> impl Iterator<Item = PatternIdx> + '_ {
    nurse.day_range.iter().chain(nurse.night_range.iter())
}

/// Writes the instance as an integer program in LP text.
///
/// Layout: the `minimize` keyword, the objective with explicit coefficients
/// (variable `x<i>,<j>` is nurse `i` wearing pattern `j`); `subject to` with
/// one coverage row per slot and grade with positive demand (slot-major,
/// grades inner; supply counts every variable of a nurse with grade at most
/// the row's grade whose pattern works the slot) and one `= 1` row per
/// nurse; an `integers` section listing every variable; `end`.
///
/// The objective coefficient of `x<i>,<j>` is the nurse's pattern penalty
/// plus their previous-week penalty when one is known, so the LP objective of
/// an assignment equals the roster's preference cost under the default
/// fitness weights.
pub fn export_lp(instance: &Instance, out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "minimize")?;
    writeln!(out)?;
    let mut terms = Vec::new();
    for (i, nurse) in instance.nurses.iter().enumerate() {
        let carry = nurse.prev_carry(0);
        for j in alphabet_of(nurse) {
            let coefficient = nurse.penalty(j) as u32 + carry;
            terms.push(format!("{coefficient} x{},{j}", i + 1));
        }
    }
    write_sum_row(out, &terms, "")?;
    writeln!(out)?;
    writeln!(out, "subject to")?;
    for slot in 1..=SLOT_COUNT {
        for grade in 1..=GRADES as u8 {
            let required = instance.demand.get(slot, grade);
            if required == 0 {
                continue;
            }
            let mut terms: Vec<String> = Vec::new();
            for (i, nurse) in instance.nurses.iter().enumerate() {
                if nurse.grade > grade {
                    continue;
                }
                for j in alphabet_of(nurse) {
                    if instance.patterns.get(j).covers(slot) {
                        terms.push(format!("x{},{j}", i + 1));
                    }
                }
            }
            if terms.is_empty() {
                // No variable can cover this row; a zero-coefficient term
                // keeps the row well-formed and visibly unsatisfiable.
                let first = &instance.nurses[0];
                terms.push(format!("0 x1,{}", alphabet_of(first).next().unwrap()));
            }
            writeln!(out)?;
            write_sum_row(out, &terms, &format!(">= {required}"))?;
        }
    }
    for (i, nurse) in instance.nurses.iter().enumerate() {
        let terms: Vec<String> = alphabet_of(nurse)
            .map(|j| format!("x{},{j}", i + 1))
            .collect();
        writeln!(out)?;
        write_sum_row(out, &terms, "= 1")?;
    }
    writeln!(out)?;
    writeln!(out, "integers")?;
    writeln!(out)?;
    for (i, nurse) in instance.nurses.iter().enumerate() {
        let words: Vec<String> = alphabet_of(nurse)
            .map(|j| format!("x{},{j}", i + 1))
            .collect();
        write_word_row(out, &words)?;
    }
    writeln!(out)?;
    writeln!(out, "end")?;
    Ok(())
}

/// Parses the objective of LP text written by [`export_lp`] back into a map
/// from `(nurse index, pattern index)` to coefficient. A variable without an
/// explicit coefficient counts as 1.
pub fn parse_lp_objective(text: &str) -> Result<BTreeMap<(usize, PatternIdx), u32>, DataError> {
    const FILE: &str = "<lp text>";
    let mut map = BTreeMap::new();
    let mut in_objective = false;
    let mut pending_coefficient: Option<u32> = None;
    for (line_no, raw) in text.lines().enumerate() {
        let line_no = line_no + 1;
        let trimmed = raw.trim();
        if !in_objective {
            if trimmed == "minimize" {
                in_objective = true;
            }
            continue;
        }
        if trimmed == "subject to" {
            if pending_coefficient.is_some() {
                return Err(parse_err(FILE, line_no, "dangling coefficient before 'subject to'"));
            }
            return Ok(map);
        }
        for token in trimmed.split_whitespace() {
            if token == "+" {
                continue;
            }
            if let Some(var) = token.strip_prefix('x') {
                let (i, j) = var.split_once(',').ok_or_else(|| {
                    parse_err(FILE, line_no, format!("malformed variable '{token}'"))
                })?;
                let i: usize = i.parse().map_err(|_| {
                    parse_err(FILE, line_no, format!("malformed nurse index in '{token}'"))
                })?;
                let j: PatternIdx = j.parse().map_err(|_| {
                    parse_err(FILE, line_no, format!("malformed pattern index in '{token}'"))
                })?;
                let coefficient = pending_coefficient.take().unwrap_or(1);
                if map.insert((i, j), coefficient).is_some() {
                    return Err(parse_err(
                        FILE,
                        line_no,
                        format!("variable x{i},{j} appears twice in the objective"),
                    ));
                }
            } else {
                let value: u32 = token.parse().map_err(|_| {
                    parse_err(FILE, line_no, format!("unexpected token '{token}'"))
                })?;
                if pending_coefficient.replace(value).is_some() {
                    return Err(parse_err(
                        FILE,
                        line_no,
                        format!("two coefficients in a row before '{token}'"),
                    ));
                }
            }
        }
    }
    Err(parse_err(
        FILE,
        text.lines().count().max(1),
        if in_objective {
            "objective never closed by 'subject to'"
        } else {
            "missing 'minimize' keyword"
        },
    ))
}

// ---------------------------------------------------------------------------
// Roster output
// ---------------------------------------------------------------------------

fn slot_mark(pattern: &ShiftPattern, slot: usize, mark: char) -> char {
    if pattern.covers(slot) {
        mark
    } else {
        '.'
    }
}

/// Writes a human-readable roster: status, per-nurse week grid with the
/// assigned pattern and its cost, the worked/required coverage table, and
/// the fitness totals.
///
/// # Panics
/// Panics when the chromosome length differs from the nurse count or a gene
/// is not legal for its nurse.
pub fn write_schedule(
    instance: &Instance,
    chromosome: &Chromosome,
    weights: &FitnessWeights,
    out: &mut impl Write,
) -> io::Result<()> {
    assert_eq!(
        chromosome.genes.len(),
        instance.nurse_count(),
        "chromosome length does not match the nurse count"
    );
    let shortfall = coverage_shortfall(chromosome, instance);
    let preference = preference_cost(chromosome, instance, weights);
    let senior = senior_weekend_excess(chromosome, instance).ok();
    let fitness = combine_parts(preference, shortfall, senior.unwrap_or(0), weights);

    writeln!(out, "roster for {} nurses", instance.nurse_count())?;
    if shortfall == 0 {
        writeln!(out, "status: feasible (all demand rows covered)")?;
    } else {
        writeln!(
            out,
            "WARNING: demand shortfall of {shortfall} shift-slots; no feasible \
             roster found"
        )?;
    }
    writeln!(out)?;
    let day_header = DAY_NAMES.map(|d| format!("{d:>2}")).join(" ");
    writeln!(
        out,
        "nurse grade level  {day_header}   {day_header}  pattern  cost"
    )?;
    for (nurse, &gene) in instance.nurses.iter().zip(&chromosome.genes) {
        let pattern = instance.patterns.get(gene);
        let days: Vec<String> = (1..=WEEK_DAYS)
            .map(|k| format!("{:>2}", slot_mark(pattern, k, 'D')))
            .collect();
        let nights: Vec<String> = (1..=WEEK_DAYS)
            .map(|k| format!("{:>2}", slot_mark(pattern, k + WEEK_DAYS, 'N')))
            .collect();
        let cost = nurse.penalty(gene) as u32 + nurse.prev_carry(weights.prev_week_threshold);
        writeln!(
            out,
            "{:>5} {:>5} {:>5}  {}   {}  {:>7} {:>5}",
            nurse.id,
            nurse.grade,
            nurse.hours_level,
            days.join(" "),
            nights.join(" "),
            gene,
            cost
        )?;
    }
    writeln!(out)?;
    writeln!(out, "coverage (worked/required)")?;
    let mut counts = [[0u16; GRADES]; SLOT_COUNT];
    for (nurse, &gene) in instance.nurses.iter().zip(&chromosome.genes) {
        let pattern = instance.patterns.get(gene);
        for slot in 1..=SLOT_COUNT {
            if pattern.covers(slot) {
                counts[slot - 1][(nurse.grade - 1) as usize] += 1;
            }
        }
    }
    let coverage_header = DAY_NAMES.map(|d| format!("{d:>7}")).join("");
    writeln!(out, "         {coverage_header}")?;
    for (kind, offset) in [("day", 0), ("night", WEEK_DAYS)] {
        for grade in 1..=GRADES as u8 {
            let cells: Vec<String> = (1..=WEEK_DAYS)
                .map(|k| {
                    let slot = k + offset;
                    let supply: u16 =
                        (1..=grade).map(|g| counts[slot - 1][(g - 1) as usize]).sum();
                    format!("{:>7}", format!("{supply}/{}", instance.demand.get(slot, grade)))
                })
                .collect();
            writeln!(out, "{kind:<5} Q{grade}  {}", cells.join(""))?;
        }
    }
    writeln!(out)?;
    let senior_text = match senior {
        Some(e) => e.to_string(),
        None => "n/a".to_string(),
    };
    writeln!(
        out,
        "totals: preference cost {preference}, demand shortfall {shortfall}, \
         senior excess {senior_text}, weighted fitness {fitness}"
    )?;
    Ok(())
}
