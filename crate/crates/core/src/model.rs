//! Domain model: shift patterns, nurses, demand, instances, chromosomes.
//!
//! The planning horizon is one week of 14 *slots*: slots 1–7 are the day
//! shifts Sunday–Saturday, slots 8–14 the night shifts Sunday–Saturday. A
//! *shift pattern* marks the worked slots; every pattern is day-only or
//! night-only (or empty). The global library holds all patterns for the
//! seven contracted-hours levels, deduplicated and numbered 1–219; a nurse's
//! legal alphabet is the contiguous day-pattern range plus the contiguous
//! night-pattern range of their hours level (or a sub-range of those, e.g.
//! after a previous-week restriction).

use rand::Rng;
use thiserror::Error;

/// Slots per week: 7 day shifts then 7 night shifts.
pub const SLOT_COUNT: usize = 14;
/// Days per week.
pub const WEEK_DAYS: usize = 7;
/// Number of contracted-hours levels.
pub const HOURS_LEVELS: usize = 7;
/// Day shifts worked per week at hours levels 1–7.
pub const DAY_SHIFTS_PER_LEVEL: [u8; HOURS_LEVELS] = [5, 4, 3, 3, 2, 1, 0];
/// Night shifts worked per week at hours levels 1–7.
pub const NIGHT_SHIFTS_PER_LEVEL: [u8; HOURS_LEVELS] = [4, 3, 3, 2, 2, 1, 0];
/// Total number of distinct patterns in the library.
pub const PATTERN_COUNT: usize = 219;
/// Number of qualification grades (1 = highest).
pub const GRADES: usize = 3;
/// Fresh chromosomes start with this many lives (used by the three-lives
/// substitution scheme).
pub const LIVES_START: u8 = 3;

/// 1-based index into the global pattern library.
pub type PatternIdx = u16;

/// Whether a pattern works day shifts, night shifts, or nothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternKind {
    Day,
    Night,
    Empty,
}

/// One weekly shift pattern from the global library.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShiftPattern {
    /// Global 1-based library index.
    pub index: PatternIdx,
    /// `slots[k-1]` is true when slot `k` (1-based) is worked.
    pub slots: [bool; SLOT_COUNT],
    /// Quality score 0–4 (0 = unrated); informational only.
    pub quality: u8,
    /// First week position (1–7) that is free both day and night.
    pub first_day_off: u8,
    /// Last week position (1–7) that is free both day and night.
    pub last_day_off: u8,
    /// Hours level (1–7) whose enumeration first produced this pattern.
    pub hours_level: u8,
    /// Day, night, or empty.
    pub kind: PatternKind,
}

impl ShiftPattern {
    /// True when 1-based slot `slot` is worked.
    pub fn covers(&self, slot: usize) -> bool {
        self.slots[slot - 1]
    }

    /// Number of worked slots.
    pub fn shift_count(&self) -> u8 {
        self.slots.iter().filter(|&&s| s).count() as u8
    }
}

/// First and last free week position of a fortnightly slot mask.
///
/// A week position `p` (1–7) counts as worked when either its day slot `p`
/// or its night slot `p + 7` is worked. Returns the 1-based positions of the
/// first and the last free day; a fully free week yields `(1, 7)`.
///
/// Patterns in the library are day-only or night-only and work at most five
/// shifts, so at least one position is always free.
pub fn days_off_bounds(slots: &[bool; SLOT_COUNT]) -> (u8, u8) {
    let free = |p: usize| !slots[p - 1] && !slots[p - 1 + WEEK_DAYS];
    let first = (1..=WEEK_DAYS).find(|&p| free(p));
    let last = (1..=WEEK_DAYS).rev().find(|&p| free(p));
    match (first, last) {
        (Some(f), Some(l)) => (f as u8, l as u8),
        // No free position: only possible for masks outside the library.
        _ => (1, WEEK_DAYS as u8),
    }
}

/// A contiguous, inclusive range of pattern indices; `hi < lo` means empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdxRange {
    pub lo: PatternIdx,
    pub hi: PatternIdx,
}

impl IdxRange {
    /// The canonical empty range.
    pub const EMPTY: IdxRange = IdxRange { lo: 1, hi: 0 };

    pub fn new(lo: PatternIdx, hi: PatternIdx) -> Self {
        IdxRange { lo, hi }
    }

    pub fn is_empty(&self) -> bool {
        self.hi < self.lo
    }

    pub fn len(&self) -> usize {
        if self.is_empty() {
            0
        } else {
            (self.hi - self.lo + 1) as usize
        }
    }

    pub fn contains(&self, idx: PatternIdx) -> bool {
        self.lo <= idx && idx <= self.hi
    }

    /// True when `self` lies entirely within `outer` (empty ranges always do).
    pub fn is_subrange_of(&self, outer: &IdxRange) -> bool {
        self.is_empty() || (outer.lo <= self.lo && self.hi <= outer.hi)
    }

    pub fn iter(&self) -> impl Iterator<Item = PatternIdx> {
        self.lo..=self.hi
    }
}

impl std::fmt::Display for IdxRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_empty() {
            write!(f, "(empty)")
        } else {
            write!(f, "{}..{}", self.lo, self.hi)
        }
    }
}

/// The global pattern library plus the per-level legal ranges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternLibrary {
    patterns: Vec<ShiftPattern>,
    day_ranges: [IdxRange; HOURS_LEVELS],
    night_ranges: [IdxRange; HOURS_LEVELS],
}

impl PatternLibrary {
    /// The pattern with 1-based library index `idx`.
    ///
    /// # Panics
    /// Panics when `idx` is 0 or beyond the library; indices are validated
    /// at instance construction, so this indicates a caller bug.
    pub fn get(&self, idx: PatternIdx) -> &ShiftPattern {
        &self.patterns[(idx - 1) as usize]
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ShiftPattern> {
        self.patterns.iter()
    }

    /// The legal `(day, night)` pattern index ranges for an hours level.
    ///
    /// # Panics
    /// Panics when `hours_level` is outside 1–7.
    pub fn legal_ranges(&self, hours_level: u8) -> (IdxRange, IdxRange) {
        assert!(
            (1..=HOURS_LEVELS as u8).contains(&hours_level),
            "hours level {hours_level} outside 1..=7"
        );
        let i = (hours_level - 1) as usize;
        (self.day_ranges[i], self.night_ranges[i])
    }

    /// Overwrites the quality score of pattern `idx`.
    pub fn set_quality(&mut self, idx: PatternIdx, quality: u8) {
        self.patterns[(idx - 1) as usize].quality = quality;
    }
}

/// All 7-bit masks with exactly `count` bits set, in descending numeric
/// order. Bit 6 (the most significant of the 7) is Sunday, bit 0 Saturday.
fn week_masks_descending(count: u8) -> Vec<u8> {
    let mut masks: Vec<u8> = (0u8..128)
        .filter(|m| m.count_ones() == count as u32)
        .collect();
    masks.sort_unstable_by(|a, b| b.cmp(a));
    masks
}

/// Builds the full 219-pattern library.
///
/// For each hours level 1–7, first the day block then the night block is
/// emitted; a block whose (kind, shift count) was already produced by an
/// earlier level is shared rather than duplicated. Within a block, patterns
/// are ordered by descending mask value with Sunday as the most significant
/// bit, so pattern 1 works Sunday–Thursday days and each block ends with the
/// pattern packed against Saturday.
pub fn enumerate_pattern_library() -> PatternLibrary {
    let mut patterns: Vec<ShiftPattern> = Vec::with_capacity(PATTERN_COUNT);
    let mut day_ranges = [IdxRange::EMPTY; HOURS_LEVELS];
    let mut night_ranges = [IdxRange::EMPTY; HOURS_LEVELS];
    // Blocks already emitted, keyed by shift count (day counts 0–5, night 0–4).
    let mut day_done: [Option<IdxRange>; 6] = [None; 6];
    let mut night_done: [Option<IdxRange>; 5] = [None; 5];

    for level in 1..=HOURS_LEVELS as u8 {
        let li = (level - 1) as usize;
        for night in [false, true] {
            let count = if night {
                NIGHT_SHIFTS_PER_LEVEL[li]
            } else {
                DAY_SHIFTS_PER_LEVEL[li]
            };
            let done = if night {
                &mut night_done[count as usize]
            } else {
                &mut day_done[count as usize]
            };
            let range = match *done {
                Some(range) => range,
                None => {
                    let lo = patterns.len() as PatternIdx + 1;
                    for mask in week_masks_descending(count) {
                        let mut slots = [false; SLOT_COUNT];
                        for p in 1..=WEEK_DAYS {
                            if mask >> (WEEK_DAYS - p) & 1 == 1 {
                                slots[p - 1 + if night { WEEK_DAYS } else { 0 }] = true;
                            }
                        }
                        let (first_off, last_off) = days_off_bounds(&slots);
                        let kind = if count == 0 {
                            PatternKind::Empty
                        } else if night {
                            PatternKind::Night
                        } else {
                            PatternKind::Day
                        };
                        patterns.push(ShiftPattern {
                            index: patterns.len() as PatternIdx + 1,
                            slots,
                            quality: 0,
                            first_day_off: first_off,
                            last_day_off: last_off,
                            hours_level: level,
                            kind,
                        });
                    }
                    let range = IdxRange::new(lo, patterns.len() as PatternIdx);
                    *done = Some(range);
                    range
                }
            };
            if night {
                night_ranges[li] = range;
            } else {
                day_ranges[li] = range;
            }
        }
    }

    debug_assert_eq!(patterns.len(), PATTERN_COUNT);
    PatternLibrary {
        patterns,
        day_ranges,
        night_ranges,
    }
}

/// Restricts a nurse's legal ranges so every pattern starts no earlier than
/// their previous week allowed.
///
/// A pattern `j` is compatible with the previous week when its first day off
/// is no later than the previous pattern's last day off `prev_last_day_off`
/// — the nurse must get a free day before their next working stretch begins.
/// Within each library block the first day off never increases with the
/// index, so the surviving indices form a suffix of each range and the
/// result is again a pair of contiguous ranges.
///
/// When the restriction would empty the whole alphabet, the original ranges
/// are kept and the second component of the return value is `true` so the
/// caller can warn.
pub fn restrict_by_previous_week(
    prev_last_day_off: u8,
    day_range: IdxRange,
    night_range: IdxRange,
    library: &PatternLibrary,
) -> ((IdxRange, IdxRange), bool) {
    let restrict_one = |range: IdxRange| -> IdxRange {
        if range.is_empty() {
            return range;
        }
        match range
            .iter()
            .find(|&j| library.get(j).first_day_off <= prev_last_day_off)
        {
            Some(first_ok) => {
                debug_assert!(
                    (first_ok..=range.hi)
                        .all(|j| library.get(j).first_day_off <= prev_last_day_off),
                    "first day off must be non-increasing within a block"
                );
                IdxRange::new(first_ok, range.hi)
            }
            None => IdxRange::EMPTY,
        }
    };
    let day = restrict_one(day_range);
    let night = restrict_one(night_range);
    if day.is_empty() && night.is_empty() {
        ((day_range, night_range), true)
    } else {
        ((day, night), false)
    }
}

/// Validation failures while building model values.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("nurse {id}: grade {grade} outside 1..=3")]
    BadGrade { id: usize, grade: u8 },
    #[error("nurse {id}: hours level {level} outside 1..=7")]
    BadHoursLevel { id: usize, level: u8 },
    #[error("nurse {id}: shift preference {value} outside 0..=2")]
    BadShiftPreference { id: usize, value: u8 },
    #[error("nurse {id}: wish value {value} outside 0..=4")]
    BadWish { id: usize, value: u8 },
    #[error("nurse {id}: penalty {value} above 100")]
    BadPenalty { id: usize, value: u16 },
    #[error("nurse {id}: {kind} penalty row has {got} values but the range {range} holds {want}")]
    PenaltyRowLength {
        id: usize,
        kind: &'static str,
        range: IdxRange,
        got: usize,
        want: usize,
    },
    #[error("nurse {id}: {kind} range {range} is not a sub-range of the level-{level} block {block}")]
    RangeOutsideLevel {
        id: usize,
        kind: &'static str,
        range: IdxRange,
        level: u8,
        block: IdxRange,
    },
    #[error("nurse {id}: legal alphabet is empty")]
    EmptyAlphabet { id: usize },
    #[error("nurse {id}: grade {grade} breaks the grade-1-first contiguous ordering")]
    NotGradeGrouped { id: usize, grade: u8 },
    #[error("senior flag list has {got} entries for {want} nurses")]
    SeniorFlagLength { got: usize, want: usize },
    #[error("instance has no nurses")]
    NoNurses,
    #[error("demand for grade {grade}, slot {slot} is {value}, above the nurse count {nurses}")]
    DemandAboveNurseCount {
        grade: u8,
        slot: usize,
        value: u16,
        nurses: usize,
    },
}

/// One nurse: qualifications, preferences, and their legal pattern alphabet
/// with the penalty of every legal pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Nurse {
    /// 1-based position in the instance (display and file order).
    pub id: usize,
    /// Qualification grade 1–3 (1 = highest).
    pub grade: u8,
    /// Contracted-hours level 1–7.
    pub hours_level: u8,
    /// 0 = none, 1 = prefers days, 2 = prefers nights.
    pub shift_preference: u8,
    /// Per-slot wish strength 0–4 to have that slot off.
    pub wishes: [u8; SLOT_COUNT],
    /// Legal day-pattern range (possibly narrowed; may be empty).
    pub day_range: IdxRange,
    /// Legal night-pattern range (possibly narrowed; may be empty).
    pub night_range: IdxRange,
    /// Last day off of last week's pattern, when known.
    pub prev_last_day_off: Option<u8>,
    /// Penalty of last week's pattern, when known. Counted into this week's
    /// preference cost when at or above the configured threshold.
    pub prev_penalty: Option<u8>,
    /// Penalties aligned with `day_range` then `night_range`.
    day_penalties: Vec<u8>,
    night_penalties: Vec<u8>,
}

impl Nurse {
    /// Builds a nurse, validating every field.
    ///
    /// `day_penalties` / `night_penalties` hold one value per index of the
    /// respective range, in ascending index order.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: usize,
        grade: u8,
        hours_level: u8,
        shift_preference: u8,
        wishes: [u8; SLOT_COUNT],
        day_range: IdxRange,
        night_range: IdxRange,
        day_penalties: Vec<u8>,
        night_penalties: Vec<u8>,
    ) -> Result<Nurse, ModelError> {
        if !(1..=GRADES as u8).contains(&grade) {
            return Err(ModelError::BadGrade { id, grade });
        }
        if !(1..=HOURS_LEVELS as u8).contains(&hours_level) {
            return Err(ModelError::BadHoursLevel {
                id,
                level: hours_level,
            });
        }
        if shift_preference > 2 {
            return Err(ModelError::BadShiftPreference {
                id,
                value: shift_preference,
            });
        }
        if let Some(&w) = wishes.iter().find(|&&w| w > 4) {
            return Err(ModelError::BadWish { id, value: w });
        }
        for (kind, range, row) in [
            ("day", &day_range, &day_penalties),
            ("night", &night_range, &night_penalties),
        ] {
            if row.len() != range.len() {
                return Err(ModelError::PenaltyRowLength {
                    id,
                    kind,
                    range: *range,
                    got: row.len(),
                    want: range.len(),
                });
            }
            if let Some(&p) = row.iter().find(|&&p| p > 100) {
                return Err(ModelError::BadPenalty {
                    id,
                    value: p as u16,
                });
            }
        }
        if day_range.is_empty() && night_range.is_empty() {
            return Err(ModelError::EmptyAlphabet { id });
        }
        Ok(Nurse {
            id,
            grade,
            hours_level,
            shift_preference,
            wishes,
            day_range,
            night_range,
            prev_last_day_off: None,
            prev_penalty: None,
            day_penalties,
            night_penalties,
        })
    }

    /// Number of legal patterns.
    pub fn alphabet_size(&self) -> usize {
        self.day_range.len() + self.night_range.len()
    }

    /// The two legal ranges ordered by ascending library index.
    fn ranges_ascending(&self) -> [IdxRange; 2] {
        if !self.night_range.is_empty()
            && (self.day_range.is_empty() || self.night_range.lo < self.day_range.lo)
        {
            [self.night_range, self.day_range]
        } else {
            [self.day_range, self.night_range]
        }
    }

    /// Iterates the legal alphabet in ascending pattern-index order.
    pub fn alphabet(&self) -> impl Iterator<Item = PatternIdx> + '_ {
        let [a, b] = self.ranges_ascending();
        a.iter().chain(b.iter())
    }

    /// The `k`-th legal pattern (0-based) in ascending index order.
    ///
    /// # Panics
    /// Panics when `k >= alphabet_size()`.
    pub fn nth_legal(&self, k: usize) -> PatternIdx {
        let [a, b] = self.ranges_ascending();
        if k < a.len() {
            a.lo + k as PatternIdx
        } else {
            let k = k - a.len();
            assert!(k < b.len(), "nurse {}: legal index out of range", self.id);
            b.lo + k as PatternIdx
        }
    }

    /// True when pattern `idx` is legal for this nurse.
    pub fn is_legal(&self, idx: PatternIdx) -> bool {
        self.day_range.contains(idx) || self.night_range.contains(idx)
    }

    /// Penalty of legal pattern `idx`.
    ///
    /// # Panics
    /// Panics when `idx` is not legal for this nurse.
    pub fn penalty(&self, idx: PatternIdx) -> u8 {
        if self.day_range.contains(idx) {
            self.day_penalties[(idx - self.day_range.lo) as usize]
        } else if self.night_range.contains(idx) {
            self.night_penalties[(idx - self.night_range.lo) as usize]
        } else {
            panic!("nurse {}: pattern {idx} is not legal", self.id);
        }
    }

    /// Last week's penalty when it is present and at least `threshold`,
    /// else 0. Added to this week's preference cost.
    pub fn prev_carry(&self, threshold: u32) -> u32 {
        match self.prev_penalty {
            Some(p) if p as u32 >= threshold => p as u32,
            _ => 0,
        }
    }

    /// Penalty row for `day_range` (ascending index order).
    pub fn day_penalties(&self) -> &[u8] {
        &self.day_penalties
    }

    /// Penalty row for `night_range` (ascending index order).
    pub fn night_penalties(&self) -> &[u8] {
        &self.night_penalties
    }
}

/// Required nurse count per slot and grade; grade rows are cumulative
/// targets ("at least this many of grade `s` or higher", i.e. numerically
/// lower or equal grade).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemandTable {
    /// `required[k-1][s-1]` is the demand of slot `k` at grade `s`.
    pub required: [[u16; GRADES]; SLOT_COUNT],
}

impl DemandTable {
    /// Demand of 1-based slot `slot` at grade `grade`.
    pub fn get(&self, slot: usize, grade: u8) -> u16 {
        self.required[slot - 1][(grade - 1) as usize]
    }

    /// All-zero demand.
    pub fn zero() -> Self {
        DemandTable {
            required: [[0; GRADES]; SLOT_COUNT],
        }
    }

    /// Sum over all slots and grade rows.
    pub fn total(&self) -> u32 {
        self.required
            .iter()
            .flat_map(|row| row.iter())
            .map(|&r| r as u32)
            .sum()
    }
}

/// A complete problem instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    /// Grouped by grade: all grade-1 nurses first, then grade 2, then 3.
    pub nurses: Vec<Nurse>,
    pub patterns: PatternLibrary,
    pub demand: DemandTable,
    /// Per-nurse "acts as weekend senior" flags; `None` when the weekend
    /// seniority balance term is unused.
    pub senior_flags: Option<Vec<bool>>,
}

impl Instance {
    /// Builds and validates an instance.
    ///
    /// Checks: at least one nurse, nurses grouped by ascending grade, every
    /// legal range a sub-range of the nurse's hours-level block, senior flag
    /// length. Demand may exceed what the roster can cover (the shortfall is
    /// then priced by the fitness), but never the nurse count.
    pub fn new(
        nurses: Vec<Nurse>,
        patterns: PatternLibrary,
        demand: DemandTable,
        senior_flags: Option<Vec<bool>>,
    ) -> Result<Instance, ModelError> {
        if nurses.is_empty() {
            return Err(ModelError::NoNurses);
        }
        let mut prev_grade = 1;
        for nurse in &nurses {
            if nurse.grade < prev_grade {
                return Err(ModelError::NotGradeGrouped {
                    id: nurse.id,
                    grade: nurse.grade,
                });
            }
            prev_grade = nurse.grade;
            let (day_block, night_block) = patterns.legal_ranges(nurse.hours_level);
            for (kind, range, block) in [
                ("day", nurse.day_range, day_block),
                ("night", nurse.night_range, night_block),
            ] {
                if !range.is_subrange_of(&block) {
                    return Err(ModelError::RangeOutsideLevel {
                        id: nurse.id,
                        kind,
                        range,
                        level: nurse.hours_level,
                        block,
                    });
                }
            }
        }
        if let Some(flags) = &senior_flags {
            if flags.len() != nurses.len() {
                return Err(ModelError::SeniorFlagLength {
                    got: flags.len(),
                    want: nurses.len(),
                });
            }
        }
        for slot in 1..=SLOT_COUNT {
            for grade in 1..=GRADES as u8 {
                let value = demand.get(slot, grade);
                if value as usize > nurses.len() {
                    return Err(ModelError::DemandAboveNurseCount {
                        grade,
                        slot,
                        value,
                        nurses: nurses.len(),
                    });
                }
            }
        }
        Ok(Instance {
            nurses,
            patterns,
            demand,
            senior_flags,
        })
    }

    pub fn nurse_count(&self) -> usize {
        self.nurses.len()
    }

    /// Half-open 0-based nurse index ranges per grade 1, 2, 3.
    pub fn grade_blocks(&self) -> [std::ops::Range<usize>; GRADES] {
        let mut bounds = [0usize; GRADES + 1];
        for g in 1..=GRADES as u8 {
            bounds[g as usize] =
                self.nurses.partition_point(|n| n.grade <= g);
        }
        [
            bounds[0]..bounds[1],
            bounds[1]..bounds[2],
            bounds[2]..bounds[3],
        ]
    }

    /// Product of all alphabet sizes, i.e. the number of complete rosters.
    pub fn search_space(&self) -> u128 {
        self.nurses
            .iter()
            .map(|n| n.alphabet_size() as u128)
            .product()
    }
}

/// One candidate roster: a pattern index per nurse, plus cached evaluation
/// parts and the remaining lives for the three-lives substitution scheme.
///
/// Caches are `None` until the chromosome is evaluated and are cleared by
/// every genetic operator that changes the genes; a populated cache always
/// equals a fresh evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chromosome {
    /// `genes[i]` is the pattern index of nurse `i` (0-based nurse order).
    pub genes: Vec<PatternIdx>,
    /// Cached preference cost (penalties plus previous-week carries).
    pub cached_pref: Option<u32>,
    /// Cached total demand shortfall.
    pub cached_shortfall: Option<u32>,
    /// Cached weekend senior excess (0 when the instance has no flags).
    pub cached_senior_excess: Option<u32>,
    /// Cached `(preference, shortfall)` pairs for the seven segment sets.
    pub cached_segments: Option<[(u32, u32); 7]>,
    /// Remaining lives; fresh chromosomes start at [`LIVES_START`].
    pub lives: u8,
}

impl Chromosome {
    pub fn new(genes: Vec<PatternIdx>) -> Self {
        Chromosome {
            genes,
            cached_pref: None,
            cached_shortfall: None,
            cached_senior_excess: None,
            cached_segments: None,
            lives: LIVES_START,
        }
    }

    /// Drops all cached evaluation parts (call after changing genes).
    pub fn clear_caches(&mut self) {
        self.cached_pref = None;
        self.cached_shortfall = None;
        self.cached_senior_excess = None;
        self.cached_segments = None;
    }
}

/// Draws a uniformly random legal pattern for every nurse.
pub fn random_chromosome<R: Rng + ?Sized>(instance: &Instance, rng: &mut R) -> Chromosome {
    let genes = instance
        .nurses
        .iter()
        .map(|n| n.nth_legal(rng.random_range(0..n.alphabet_size())))
        .collect();
    Chromosome::new(genes)
}
