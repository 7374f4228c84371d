//! Seeded instance generators for four ward archetypes and a CSV-producing
//! experiment runner.
//!
//! The generators reproduce the make-up of a real 21-nurse ward: grade,
//! hours-level, and shift-preference marginals are scaled to the requested
//! nurse count by largest remainder, individual attributes are dealt from
//! shuffled pools, wishes are sparse random requests, and penalties are
//! synthesized from them. Every instance is a pure function of
//! `(archetype, nurse count, seed)`.
//!
//! The experiment runner evaluates a grid of instances x configurations,
//! repeating each cell over a shared seed list, and emits one CSV row per
//! run plus an aggregate row per cell. Output is byte-deterministic for a
//! given grid, independent of the worker thread count.

use std::io::{self, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::dataio::{synthesize_penalties, PenaltySynthesisConfig};
use crate::engine::{
    evolve, CrossoverScheme, EngineError, GAConfig, RunStats, SelectionScheme,
    SubstitutionScheme, Termination,
};
use crate::extensions::{OscillationSchedule, SwapIntensity};
use crate::fitness::{Fitness, FitnessWeights};
use crate::model::{
    enumerate_pattern_library, DemandTable, Instance, ModelError, Nurse, SLOT_COUNT, WEEK_DAYS,
};

/// The four ward shapes the generator can produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchetypeKind {
    /// The base ward: day demand 2/2/5, night demand 1/1/1.
    Normal,
    /// One extra nurse but grade-3 day demand raised to 9: barely feasible.
    Restrictive,
    /// Three extra nurses on the base demand: plenty of slack.
    Unrestrictive,
    /// Grade-3 demand varies per day: day cover 7-9, night cover 0-2.
    Fluctuating,
}

impl ArchetypeKind {
    /// Nurse count used when none is given.
    pub fn default_nurse_count(self) -> usize {
        match self {
            ArchetypeKind::Normal | ArchetypeKind::Fluctuating => 21,
            ArchetypeKind::Restrictive => 22,
            ArchetypeKind::Unrestrictive => 24,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ArchetypeKind::Normal => "normal",
            ArchetypeKind::Restrictive => "restrictive",
            ArchetypeKind::Unrestrictive => "unrestrictive",
            ArchetypeKind::Fluctuating => "fluctuating",
        }
    }
}

impl FromStr for ArchetypeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "normal" => Ok(ArchetypeKind::Normal),
            "restrictive" => Ok(ArchetypeKind::Restrictive),
            "unrestrictive" => Ok(ArchetypeKind::Unrestrictive),
            "fluctuating" => Ok(ArchetypeKind::Fluctuating),
            other => Err(format!(
                "unknown archetype '{other}' (expected normal, restrictive, \
                 unrestrictive, or fluctuating)"
            )),
        }
    }
}

impl std::fmt::Display for ArchetypeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A fully-determined generator request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArchetypeSpec {
    pub kind: ArchetypeKind,
    pub nurse_count: usize,
    pub seed: u64,
}

impl ArchetypeSpec {
    /// A spec with the archetype's default nurse count.
    pub fn new(kind: ArchetypeKind, seed: u64) -> ArchetypeSpec {
        ArchetypeSpec {
            kind,
            nurse_count: kind.default_nurse_count(),
            seed,
        }
    }

    pub fn with_nurse_count(mut self, nurse_count: usize) -> ArchetypeSpec {
        self.nurse_count = nurse_count;
        self
    }
}

/// Splits `total` into integer shares proportional to `weights` (largest
/// remainder; ties favour the earlier entry). The weights must not all be 0.
fn largest_remainder(total: usize, weights: &[usize]) -> Vec<usize> {
    let weight_sum: usize = weights.iter().sum();
    assert!(weight_sum > 0, "weights must not all be zero");
    let mut shares: Vec<usize> = weights.iter().map(|&w| total * w / weight_sum).collect();
    let assigned: usize = shares.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(total * weights[i] % weight_sum), i));
    for &i in order.iter().take(total - assigned) {
        shares[i] += 1;
    }
    shares
}

/// Expands `(value, weight)` pairs into a pool of `total` values with
/// largest-remainder counts, in pair order.
fn pool_from_weights(total: usize, pairs: &[(u8, usize)]) -> Vec<u8> {
    let weights: Vec<usize> = pairs.iter().map(|&(_, w)| w).collect();
    let counts = largest_remainder(total, &weights);
    pairs
        .iter()
        .zip(&counts)
        .flat_map(|(&(value, _), &count)| std::iter::repeat_n(value, count))
        .collect()
}

/// Grade mix of the reference ward: 9 grade-1, 5 grade-2, 7 grade-3 of 21.
const GRADE_WEIGHTS: [usize; 3] = [9, 5, 7];
/// Hours-level mix: 12 full-time, then 4/2/1 part-time, 2 on vacation.
const HOURS_WEIGHTS: [(u8, usize); 5] = [(1, 12), (2, 4), (3, 2), (4, 1), (7, 2)];
/// Shift-preference mix: 15 indifferent, 3 prefer days, 3 prefer nights.
const PREFERENCE_WEIGHTS: [(u8, usize); 3] = [(0, 15), (1, 3), (2, 3)];

/// Builds the archetype's demand table, drawing the fluctuating rows from
/// `rng` (day row first, Sunday to Saturday, then the night row).
fn demand_for(kind: ArchetypeKind, rng: &mut ChaCha8Rng) -> DemandTable {
    let mut demand = DemandTable::zero();
    for day in 0..WEEK_DAYS {
        demand.required[day] = [2, 2, 5];
        demand.required[day + WEEK_DAYS] = [1, 1, 1];
    }
    match kind {
        ArchetypeKind::Normal | ArchetypeKind::Unrestrictive => {}
        ArchetypeKind::Restrictive => {
            for day in 0..WEEK_DAYS {
                demand.required[day][2] = 9;
            }
        }
        ArchetypeKind::Fluctuating => {
            for day in 0..WEEK_DAYS {
                demand.required[day][2] = rng.random_range(7..=9);
            }
            for day in 0..WEEK_DAYS {
                demand.required[day + WEEK_DAYS][2] = rng.random_range(0..=2);
            }
        }
    }
    demand
}

/// Generates a seeded instance for an archetype.
///
/// Draw order (one ChaCha8 stream seeded with `spec.seed`): hours-level pool
/// shuffle, preference pool shuffle, wishes nurse-major then slot-major
/// (worked slots are wished free with probability 0.2, strength 1-4), then
/// the fluctuating demand rows. Penalties are synthesized with the default
/// weights over an unrated pattern library; no senior flags are set.
pub fn generate_instance(spec: &ArchetypeSpec) -> Result<Instance, ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.nurse_count;
    let grade_counts = largest_remainder(n, &GRADE_WEIGHTS);
    let mut hours_pool = pool_from_weights(n, &HOURS_WEIGHTS);
    hours_pool.shuffle(&mut rng);
    let mut preference_pool = pool_from_weights(n, &PREFERENCE_WEIGHTS);
    preference_pool.shuffle(&mut rng);
    let mut wishes = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row = [0u8; SLOT_COUNT];
        for slot in &mut row {
            if rng.random::<f64>() >= 0.8 {
                *slot = rng.random_range(1..=4);
            }
        }
        wishes.push(row);
    }
    let demand = demand_for(spec.kind, &mut rng);

    let library = enumerate_pattern_library();
    let synth = PenaltySynthesisConfig::default();
    let mut nurses = Vec::with_capacity(n);
    for i in 0..n {
        let grade = match i {
            _ if i < grade_counts[0] => 1,
            _ if i < grade_counts[0] + grade_counts[1] => 2,
            _ => 3,
        };
        let hours_level = hours_pool[i];
        let shift_preference = preference_pool[i];
        let (day_range, night_range) = library.legal_ranges(hours_level);
        let (day_penalties, night_penalties) = synthesize_penalties(
            shift_preference,
            &wishes[i],
            day_range,
            night_range,
            &library,
            &synth,
        );
        nurses.push(Nurse::new(
            i + 1,
            grade,
            hours_level,
            shift_preference,
            wishes[i],
            day_range,
            night_range,
            day_penalties,
            night_penalties,
        )?);
    }
    Instance::new(nurses, library, demand, None)
}

// ---------------------------------------------------------------------------
// Configuration overrides (shared by the CLI and experiment grids)
// ---------------------------------------------------------------------------

/// Optional overrides on top of the default [`GAConfig`] and
/// [`FitnessWeights`]; unset fields keep the defaults. Doubles as the CLI
/// flag set and as the TOML schema for experiment configurations.
#[derive(Debug, Clone, Default, PartialEq, clap::Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigOverrides {
    /// Population size.
    #[arg(long)]
    pub population: Option<usize>,
    /// Per-child probability of the mutation operator.
    #[arg(long)]
    pub mutation_prob: Option<f64>,
    /// Per-child probability of the reproduction operator.
    #[arg(long)]
    pub reproduction_prob: Option<f64>,
    /// Crossover scheme: "uniform" or "kpoint".
    #[arg(long)]
    pub crossover: Option<String>,
    /// Cut count for k-point crossover (requires --crossover kpoint).
    #[arg(long)]
    pub cuts: Option<usize>,
    /// Parents drawn per child (2-4).
    #[arg(long)]
    pub parents: Option<usize>,
    /// Selection scheme: "rank" or "proportional".
    #[arg(long)]
    pub selection: Option<String>,
    /// Substitution scheme: "total", "best-x", "tournament", "three-lives",
    /// "distance", or "mix".
    #[arg(long)]
    pub substitution: Option<String>,
    /// Percentage kept for the "best-x" substitution scheme.
    #[arg(long)]
    pub best_x: Option<u32>,
    /// Duel probability for the "tournament" substitution scheme.
    #[arg(long)]
    pub tournament_fraction: Option<f64>,
    /// Per-gene replacement probability inside mutation.
    #[arg(long)]
    pub per_gene_mutation_rate: Option<f64>,
    /// Keep the best-ever individual alive (true/false).
    #[arg(long)]
    pub elitism: Option<bool>,
    /// Stop after this many generations.
    #[arg(long)]
    pub max_generations: Option<u32>,
    /// Stop after this many generations without improvement.
    #[arg(long)]
    pub stagnation_limit: Option<u32>,
    /// Stop after this many milliseconds.
    #[arg(long)]
    pub wall_limit_ms: Option<u64>,
    /// Weight of one uncovered demand slot.
    #[arg(long)]
    pub demand_weight: Option<u32>,
    /// Weight of one surplus senior on a weekend shift.
    #[arg(long)]
    pub senior_weight: Option<u32>,
    /// Carry the previous-week penalty only when it is at least this.
    #[arg(long)]
    pub prev_week_threshold: Option<u32>,
    /// Derive mutation rates from shortfall and stagnation (true/false).
    #[arg(long)]
    pub intelligent_mutation: Option<bool>,
    /// Fraction of each child generation re-initialised at random.
    #[arg(long)]
    pub reinit_fraction: Option<f64>,
    /// Local swap pass: "off", "max", or a shortfall threshold.
    #[arg(long)]
    pub swap: Option<String>,
    /// Probability that an eligible chromosome gets the swap pass.
    #[arg(long)]
    pub swap_probability: Option<f64>,
    /// Oscillating demand weights: "weightA:weightB:gensA:gensB".
    #[arg(long)]
    pub oscillate: Option<String>,
    /// Shrink the population every generation (true/false).
    #[arg(long)]
    pub dynamic_population: Option<bool>,
    /// Shrink rate in permille per generation.
    #[arg(long)]
    pub shrink_permille: Option<u32>,
    /// Adapt the demand weight to feasibility each generation (true/false).
    #[arg(long)]
    pub learning_weight: Option<bool>,
    /// Recombine grade segments from segment-ranked donors (true/false).
    #[arg(long)]
    pub segmented_crossover: Option<bool>,
    /// Evolve seven sub-populations with migration (true/false).
    #[arg(long)]
    pub niching: Option<bool>,
    /// Fraction of the population migrated per generation under niching.
    #[arg(long)]
    pub migration_fraction: Option<f64>,
}

impl ConfigOverrides {
    /// Applies the overrides to a base configuration and weight set.
    pub fn apply(
        &self,
        mut config: GAConfig,
        mut weights: FitnessWeights,
    ) -> Result<(GAConfig, FitnessWeights), String> {
        if let Some(v) = self.population {
            config.population_size = v;
        }
        if let Some(v) = self.mutation_prob {
            config.mutation_prob = v;
        }
        if let Some(v) = self.reproduction_prob {
            config.reproduction_prob = v;
        }
        match self.crossover.as_deref() {
            None => {
                if self.cuts.is_some() {
                    return Err("cuts requires crossover 'kpoint'".into());
                }
            }
            Some("uniform") => {
                if self.cuts.is_some() {
                    return Err("cuts requires crossover 'kpoint'".into());
                }
                config.crossover = CrossoverScheme::Uniform;
            }
            Some("kpoint") | Some("k-point") => {
                config.crossover = CrossoverScheme::KPoint(self.cuts.unwrap_or(1));
            }
            Some(other) => {
                return Err(format!(
                    "unknown crossover '{other}' (expected uniform or kpoint)"
                ));
            }
        }
        if let Some(v) = self.parents {
            config.parent_count = v;
        }
        match self.selection.as_deref() {
            None => {}
            Some("rank") => config.selection = SelectionScheme::Rank,
            Some("proportional") => config.selection = SelectionScheme::Proportional,
            Some(other) => {
                return Err(format!(
                    "unknown selection '{other}' (expected rank or proportional)"
                ));
            }
        }
        match self.substitution.as_deref() {
            None => {
                if self.best_x.is_some() {
                    return Err("best_x requires substitution 'best-x'".into());
                }
                if self.tournament_fraction.is_some() {
                    return Err("tournament_fraction requires substitution 'tournament'".into());
                }
            }
            Some("total") => config.substitution = SubstitutionScheme::Total,
            Some("best-x") => {
                config.substitution = SubstitutionScheme::BestXPercent(self.best_x.unwrap_or(20));
            }
            Some("tournament") => {
                config.substitution = SubstitutionScheme::TournamentFraction(
                    self.tournament_fraction.unwrap_or(0.5),
                );
            }
            Some("three-lives") => config.substitution = SubstitutionScheme::ThreeLives,
            Some("distance") => config.substitution = SubstitutionScheme::Distance,
            Some("mix") => config.substitution = SubstitutionScheme::Mix,
            Some(other) => {
                return Err(format!(
                    "unknown substitution '{other}' (expected total, best-x, \
                     tournament, three-lives, distance, or mix)"
                ));
            }
        }
        if let Some(v) = self.per_gene_mutation_rate {
            config.per_gene_mutation_rate = Some(v);
        }
        if let Some(v) = self.elitism {
            config.elitism = v;
        }
        let terminations = [
            self.max_generations.map(Termination::MaxGenerations),
            self.stagnation_limit.map(Termination::StagnationLimit),
            self.wall_limit_ms
                .map(|ms| Termination::WallClockLimit(std::time::Duration::from_millis(ms))),
        ];
        let mut set = terminations.into_iter().flatten();
        if let Some(t) = set.next() {
            if set.next().is_some() {
                return Err(
                    "set at most one of max_generations, stagnation_limit, wall_limit_ms".into(),
                );
            }
            config.termination = t;
        }
        if let Some(v) = self.demand_weight {
            weights.demand_weight = v;
        }
        if let Some(v) = self.senior_weight {
            weights.senior_weight = v;
        }
        if let Some(v) = self.prev_week_threshold {
            weights.prev_week_threshold = v;
        }
        if let Some(v) = self.intelligent_mutation {
            config.extensions.intelligent_mutation = v;
        }
        if let Some(v) = self.reinit_fraction {
            config.extensions.reinit_fraction = v;
        }
        match self.swap.as_deref() {
            None => {}
            Some("off") => config.extensions.swap_intensity = SwapIntensity::Off,
            Some("max") => config.extensions.swap_intensity = SwapIntensity::Max,
            Some(number) => match number.parse::<u32>() {
                Ok(threshold) => {
                    config.extensions.swap_intensity = SwapIntensity::Threshold(threshold);
                }
                Err(_) => {
                    return Err(format!(
                        "unknown swap intensity '{number}' (expected off, max, \
                         or a shortfall threshold)"
                    ));
                }
            },
        }
        if let Some(v) = self.swap_probability {
            config.extensions.swap_probability = v;
        }
        if let Some(text) = &self.oscillate {
            let parts: Vec<&str> = text.split(':').collect();
            let parsed: Option<[u32; 4]> = match parts.as_slice() {
                [a, b, ga, gb] => {
                    match (a.parse(), b.parse(), ga.parse(), gb.parse()) {
                        (Ok(a), Ok(b), Ok(ga), Ok(gb)) => Some([a, b, ga, gb]),
                        _ => None,
                    }
                }
                _ => None,
            };
            let [a, b, gens_a, gens_b] = parsed.ok_or_else(|| {
                format!("malformed oscillation '{text}' (expected weightA:weightB:gensA:gensB)")
            })?;
            config.extensions.oscillation = Some(OscillationSchedule {
                weights_a: FitnessWeights {
                    demand_weight: a,
                    ..weights
                },
                weights_b: FitnessWeights {
                    demand_weight: b,
                    ..weights
                },
                gens_a,
                gens_b,
            });
        }
        if let Some(v) = self.dynamic_population {
            config.extensions.dynamic_population = v;
        }
        if let Some(v) = self.shrink_permille {
            config.extensions.shrink_permille = v;
        }
        if let Some(v) = self.learning_weight {
            config.extensions.learning_weight = v;
        }
        if let Some(v) = self.segmented_crossover {
            config.extensions.segmented_crossover = v;
        }
        if let Some(v) = self.niching {
            config.extensions.niching = v;
        }
        if let Some(v) = self.migration_fraction {
            config.extensions.migration_fraction = v;
        }
        Ok((config, weights))
    }
}

// ---------------------------------------------------------------------------
// Experiment grids
// ---------------------------------------------------------------------------

fn default_repetitions() -> u32 {
    20
}

fn default_base_seed() -> u64 {
    543210
}

/// One instance cell of an experiment grid.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpecToml {
    pub name: String,
    /// Archetype name: normal, restrictive, unrestrictive, fluctuating.
    pub archetype: String,
    /// Generator seed for this instance.
    pub seed: u64,
    /// Nurse count override.
    pub nurse_count: Option<usize>,
}

/// One configuration cell of an experiment grid: a name plus overrides.
#[derive(Debug, Clone, Deserialize)]
pub struct NamedConfig {
    pub name: String,
    #[serde(flatten)]
    pub overrides: ConfigOverrides,
}

/// A whole experiment: instances x configs x repetitions.
///
/// Every cell runs the same `repetitions` seeds, `base_seed + 1` through
/// `base_seed + repetitions`, so columns are comparable across configs.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentGrid {
    #[serde(default = "default_repetitions")]
    pub repetitions: u32,
    #[serde(default = "default_base_seed")]
    pub base_seed: u64,
    #[serde(default)]
    pub instances: Vec<InstanceSpecToml>,
    #[serde(default)]
    pub configs: Vec<NamedConfig>,
}

/// Errors from grid parsing or experiment execution.
#[derive(Debug, Error)]
pub enum HarnessError {
    /// The grid is structurally unusable (empty sections, bad names, bad
    /// overrides).
    #[error("{0}")]
    Grid(String),
    #[error("{file}: {source}")]
    Io {
        file: String,
        #[source]
        source: io::Error,
    },
    #[error("{file}: {source}")]
    Toml {
        file: String,
        #[source]
        source: toml::de::Error,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Reads and parses a TOML experiment grid.
pub fn load_experiment_grid(path: &Path) -> Result<ExperimentGrid, HarnessError> {
    let file = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        file: file.clone(),
        source,
    })?;
    toml::from_str(&text).map_err(|source| HarnessError::Toml { file, source })
}

/// Aggregate statistics over the runs of one grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub mean_best: f64,
    /// Best fitness over all runs of the cell.
    pub best: Fitness,
    /// Share of runs that ended feasible, 0-100.
    pub feasible_percent: f64,
    pub mean_generations: f64,
    pub mean_wall_ms: f64,
}

/// Computes the aggregate row of a cell from its per-run statistics.
pub fn aggregate(stats: &[RunStats]) -> Aggregate {
    assert!(!stats.is_empty(), "cannot aggregate zero runs");
    let n = stats.len() as f64;
    Aggregate {
        mean_best: stats.iter().map(|s| s.best_fitness as f64).sum::<f64>() / n,
        best: stats.iter().map(|s| s.best_fitness).min().unwrap(),
        feasible_percent: stats.iter().filter(|s| s.feasible).count() as f64 * 100.0 / n,
        mean_generations: stats.iter().map(|s| s.generations as f64).sum::<f64>() / n,
        mean_wall_ms: stats.iter().map(|s| s.wall.as_millis() as f64).sum::<f64>() / n,
    }
}

/// Column header of the experiment CSV.
pub const CSV_HEADER: &str = "instance,config,seed,best_fitness,feasible,generations,wall_ms";

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

/// Runs a whole experiment grid and writes the CSV to `out`.
///
/// Per-run rows carry the exact values; after each cell an `aggregate` row
/// follows with the mean best fitness, the feasibility share as a
/// percentage, and mean generations and wall time. `wall_ms` is written as
/// 0 unless `measure` is set, keeping the output byte-deterministic.
/// `threads` worker threads share the run queue; the row order never
/// depends on scheduling.
pub fn run_experiment(
    grid: &ExperimentGrid,
    measure: bool,
    threads: usize,
    out: &mut impl Write,
) -> Result<(), HarnessError> {
    if grid.repetitions == 0 {
        return Err(HarnessError::Grid("repetitions must be at least 1".into()));
    }
    if grid.instances.is_empty() {
        return Err(HarnessError::Grid("experiment grid has no instances".into()));
    }
    if grid.configs.is_empty() {
        return Err(HarnessError::Grid("experiment grid has no configs".into()));
    }

    let mut instances = Vec::with_capacity(grid.instances.len());
    for spec in &grid.instances {
        if !valid_name(&spec.name) {
            return Err(HarnessError::Grid(format!(
                "instance name '{}' may only use letters, digits, '-', '_', '.'",
                spec.name
            )));
        }
        let kind: ArchetypeKind = spec
            .archetype
            .parse()
            .map_err(|e| HarnessError::Grid(format!("instance '{}': {e}", spec.name)))?;
        let mut arch = ArchetypeSpec::new(kind, spec.seed);
        if let Some(n) = spec.nurse_count {
            arch = arch.with_nurse_count(n);
        }
        instances.push((spec.name.clone(), generate_instance(&arch)?));
    }

    let mut configs = Vec::with_capacity(grid.configs.len());
    for cell in &grid.configs {
        if !valid_name(&cell.name) {
            return Err(HarnessError::Grid(format!(
                "config name '{}' may only use letters, digits, '-', '_', '.'",
                cell.name
            )));
        }
        let (config, weights) = cell
            .overrides
            .apply(GAConfig::default(), FitnessWeights::default())
            .map_err(|e| HarnessError::Grid(format!("config '{}': {e}", cell.name)))?;
        configs.push((cell.name.clone(), config, weights));
    }
    // Validate every pairing up front so worker threads cannot fail.
    for (iname, instance) in &instances {
        for (cname, config, _) in &configs {
            config.validate(instance).map_err(|e| {
                HarnessError::Grid(format!("instance '{iname}', config '{cname}': {e}"))
            })?;
        }
    }

    let seeds: Vec<u64> = (1..=grid.repetitions as u64)
        .map(|r| grid.base_seed + r)
        .collect();
    let jobs: Vec<(usize, usize, u64)> = instances
        .iter()
        .enumerate()
        .flat_map(|(ii, _)| {
            configs
                .iter()
                .enumerate()
                .flat_map(|(ci, _)| seeds.iter().map(move |&s| (ii, ci, s)))
                .collect::<Vec<_>>()
        })
        .collect();

    let results: Vec<Mutex<Option<RunStats>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = threads.max(1).min(jobs.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= jobs.len() {
                    break;
                }
                let (ii, ci, seed) = jobs[k];
                let (_, base_config, weights) = &configs[ci];
                let mut config = base_config.clone();
                config.seed = seed;
                let outcome =
                    evolve(&instances[ii].1, &config, weights).expect("config validated above");
                *results[k].lock().unwrap() = Some(outcome.stats);
            });
        }
    });
    let stats: Vec<RunStats> = results
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("every job ran"))
        .collect();

    writeln!(out, "{CSV_HEADER}").map_err(io_to_harness)?;
    let mut k = 0;
    for (iname, _) in &instances {
        for (cname, _, _) in &configs {
            let cell = &stats[k..k + seeds.len()];
            for (seed, run) in seeds.iter().zip(cell) {
                let wall_ms = if measure { run.wall.as_millis() } else { 0 };
                writeln!(
                    out,
                    "{iname},{cname},{seed},{},{},{},{wall_ms}",
                    run.best_fitness, run.feasible, run.generations
                )
                .map_err(io_to_harness)?;
            }
            let agg = aggregate(cell);
            let mean_wall = if measure { agg.mean_wall_ms } else { 0.0 };
            writeln!(
                out,
                "{iname},{cname},aggregate,{:.2},{}%,{:.2},{mean_wall:.2}",
                agg.mean_best,
                agg.feasible_percent.round() as u32,
                agg.mean_generations
            )
            .map_err(io_to_harness)?;
            k += seeds.len();
        }
    }
    Ok(())
}

fn io_to_harness(source: io::Error) -> HarnessError {
    HarnessError::Io {
        file: "<csv output>".to_string(),
        source,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Duration;

    #[test]
    fn largest_remainder_matches_worked_splits() {
        assert_eq!(largest_remainder(21, &GRADE_WEIGHTS), vec![9, 5, 7]);
        assert_eq!(largest_remainder(22, &GRADE_WEIGHTS), vec![10, 5, 7]);
        assert_eq!(largest_remainder(24, &GRADE_WEIGHTS), vec![10, 6, 8]);
        let hours: Vec<usize> = HOURS_WEIGHTS.iter().map(|&(_, w)| w).collect();
        assert_eq!(largest_remainder(21, &hours), vec![12, 4, 2, 1, 2]);
        assert_eq!(largest_remainder(22, &hours), vec![13, 4, 2, 1, 2]);
        // Shares always sum to the total.
        for total in 0..60 {
            let shares = largest_remainder(total, &GRADE_WEIGHTS);
            assert_eq!(shares.iter().sum::<usize>(), total);
        }
    }

    fn histogram(values: impl Iterator<Item = u8>) -> std::collections::BTreeMap<u8, usize> {
        let mut map = std::collections::BTreeMap::new();
        for v in values {
            *map.entry(v).or_insert(0) += 1;
        }
        map
    }

    #[test]
    fn normal_archetype_matches_the_reference_ward_marginals() {
        let spec = ArchetypeSpec::new(ArchetypeKind::Normal, 543211);
        let inst = generate_instance(&spec).unwrap();
        assert_eq!(inst.nurse_count(), 21);
        let grades = histogram(inst.nurses.iter().map(|n| n.grade));
        assert_eq!(grades, [(1, 9), (2, 5), (3, 7)].into_iter().collect());
        let levels = histogram(inst.nurses.iter().map(|n| n.hours_level));
        assert_eq!(
            levels,
            [(1, 12), (2, 4), (3, 2), (4, 1), (7, 2)].into_iter().collect()
        );
        let prefs = histogram(inst.nurses.iter().map(|n| n.shift_preference));
        assert_eq!(prefs, [(0, 15), (1, 3), (2, 3)].into_iter().collect());
        for day in 1..=7 {
            assert_eq!(inst.demand.get(day, 1), 2);
            assert_eq!(inst.demand.get(day, 2), 2);
            assert_eq!(inst.demand.get(day, 3), 5);
            assert_eq!(inst.demand.get(day + 7, 3), 1);
        }
        assert!(inst.senior_flags.is_none());
        // Wishes are sparse: roughly 80% zero.
        let zeros = inst
            .nurses
            .iter()
            .flat_map(|n| n.wishes.iter())
            .filter(|&&w| w == 0)
            .count();
        let total = 21 * SLOT_COUNT;
        assert!(zeros > total * 6 / 10, "{zeros} of {total} wishes are zero");
        assert!(zeros < total, "some wishes must be set");
    }

    #[test]
    fn archetypes_set_their_demand_shapes_and_counts() {
        let restrictive =
            generate_instance(&ArchetypeSpec::new(ArchetypeKind::Restrictive, 1)).unwrap();
        assert_eq!(restrictive.nurse_count(), 22);
        let grades = histogram(restrictive.nurses.iter().map(|n| n.grade));
        assert_eq!(grades, [(1, 10), (2, 5), (3, 7)].into_iter().collect());
        for day in 1..=7 {
            assert_eq!(restrictive.demand.get(day, 3), 9);
        }

        let unrestrictive =
            generate_instance(&ArchetypeSpec::new(ArchetypeKind::Unrestrictive, 1)).unwrap();
        assert_eq!(unrestrictive.nurse_count(), 24);
        let grades = histogram(unrestrictive.nurses.iter().map(|n| n.grade));
        assert_eq!(grades, [(1, 10), (2, 6), (3, 8)].into_iter().collect());
        for day in 1..=7 {
            assert_eq!(unrestrictive.demand.get(day, 3), 5);
        }

        let fluctuating =
            generate_instance(&ArchetypeSpec::new(ArchetypeKind::Fluctuating, 1)).unwrap();
        let day_values: Vec<u16> = (1..=7).map(|d| fluctuating.demand.get(d, 3)).collect();
        let night_values: Vec<u16> = (1..=7).map(|d| fluctuating.demand.get(d + 7, 3)).collect();
        assert!(day_values.iter().all(|&v| (7..=9).contains(&v)), "{day_values:?}");
        assert!(night_values.iter().all(|&v| v <= 2), "{night_values:?}");
        let mut distinct: Vec<u16> = day_values
            .iter()
            .chain(&night_values)
            .copied()
            .collect();
        distinct.sort_unstable();
        distinct.dedup();
        assert!(distinct.len() > 2, "demand should fluctuate: {distinct:?}");
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let a = generate_instance(&ArchetypeSpec::new(ArchetypeKind::Fluctuating, 9)).unwrap();
        let b = generate_instance(&ArchetypeSpec::new(ArchetypeKind::Fluctuating, 9)).unwrap();
        assert_eq!(a, b);
        let c = generate_instance(&ArchetypeSpec::new(ArchetypeKind::Fluctuating, 10)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn synthesized_penalties_follow_preference_and_wishes() {
        let inst = generate_instance(&ArchetypeSpec::new(ArchetypeKind::Normal, 543211)).unwrap();
        for nurse in &inst.nurses {
            // Quality is 0 everywhere, so a zero-wish indifferent nurse has
            // all-zero penalties.
            if nurse.shift_preference == 0 && nurse.wishes.iter().all(|&w| w == 0) {
                assert!(nurse.day_penalties().iter().all(|&p| p == 0));
                assert!(nurse.night_penalties().iter().all(|&p| p == 0));
            }
            // A day-preferring nurse pays at least the surcharge on every
            // real night pattern.
            if nurse.shift_preference == 1 && !nurse.night_range.is_empty() {
                for j in nurse.night_range.iter() {
                    if inst.patterns.get(j).shift_count() > 0 {
                        assert!(nurse.penalty(j) >= 18, "nurse {} pattern {j}", nurse.id);
                    }
                }
            }
        }
    }

    #[test]
    fn custom_nurse_count_that_cannot_meet_demand_errors() {
        let spec = ArchetypeSpec::new(ArchetypeKind::Restrictive, 1).with_nurse_count(5);
        assert!(generate_instance(&spec).is_err());
    }

    #[test]
    fn overrides_map_onto_config_and_weights() {
        let overrides = ConfigOverrides {
            population: Some(120),
            mutation_prob: Some(0.05),
            reproduction_prob: Some(0.1),
            crossover: Some("kpoint".into()),
            cuts: Some(3),
            parents: Some(2),
            selection: Some("proportional".into()),
            substitution: Some("best-x".into()),
            best_x: Some(35),
            per_gene_mutation_rate: Some(0.2),
            elitism: Some(false),
            max_generations: Some(50),
            demand_weight: Some(30),
            senior_weight: Some(2),
            intelligent_mutation: Some(true),
            swap: Some("40".into()),
            oscillate: Some("15:25:4:2".into()),
            shrink_permille: Some(25),
            migration_fraction: Some(0.05),
            ..ConfigOverrides::default()
        };
        let (config, weights) = overrides
            .apply(GAConfig::default(), FitnessWeights::default())
            .unwrap();
        assert_eq!(config.population_size, 120);
        assert_eq!(config.mutation_prob, 0.05);
        assert_eq!(config.crossover, CrossoverScheme::KPoint(3));
        assert_eq!(config.parent_count, 2);
        assert_eq!(config.selection, SelectionScheme::Proportional);
        assert_eq!(config.substitution, SubstitutionScheme::BestXPercent(35));
        assert_eq!(config.per_gene_mutation_rate, Some(0.2));
        assert!(!config.elitism);
        assert_eq!(config.termination, Termination::MaxGenerations(50));
        assert_eq!(weights.demand_weight, 30);
        assert_eq!(weights.senior_weight, 2);
        assert!(config.extensions.intelligent_mutation);
        assert_eq!(
            config.extensions.swap_intensity,
            SwapIntensity::Threshold(40)
        );
        let osc = config.extensions.oscillation.unwrap();
        assert_eq!(osc.weights_a.demand_weight, 15);
        assert_eq!(osc.weights_b.demand_weight, 25);
        assert_eq!(osc.weights_a.senior_weight, 2);
        assert_eq!((osc.gens_a, osc.gens_b), (4, 2));
        assert_eq!(config.extensions.shrink_permille, 25);
        assert_eq!(config.extensions.migration_fraction, 0.05);
    }

    #[test]
    fn overrides_reject_contradictions() {
        let two_terminations = ConfigOverrides {
            max_generations: Some(10),
            stagnation_limit: Some(5),
            ..ConfigOverrides::default()
        };
        let err = two_terminations
            .apply(GAConfig::default(), FitnessWeights::default())
            .unwrap_err();
        assert!(err.contains("at most one"), "{err}");

        let stray_cuts = ConfigOverrides {
            cuts: Some(2),
            ..ConfigOverrides::default()
        };
        assert!(stray_cuts
            .apply(GAConfig::default(), FitnessWeights::default())
            .is_err());

        let bad_swap = ConfigOverrides {
            swap: Some("sometimes".into()),
            ..ConfigOverrides::default()
        };
        assert!(bad_swap
            .apply(GAConfig::default(), FitnessWeights::default())
            .is_err());

        let bad_oscillation = ConfigOverrides {
            oscillate: Some("1:2:3".into()),
            ..ConfigOverrides::default()
        };
        assert!(bad_oscillation
            .apply(GAConfig::default(), FitnessWeights::default())
            .is_err());
    }

    const TINY_GRID: &str = r#"
        repetitions = 2
        base_seed = 543210

        [[instances]]
        name = "mini"
        archetype = "normal"
        seed = 5
        nurse_count = 6

        [[configs]]
        name = "plain"
        population = 24
        max_generations = 3

        [[configs]]
        name = "swapped"
        population = 24
        max_generations = 3
        swap = "max"
        swap_probability = 1.0
    "#;

    #[test]
    fn experiment_grid_parses_with_defaults() {
        let grid: ExperimentGrid = toml::from_str(TINY_GRID).unwrap();
        assert_eq!(grid.repetitions, 2);
        assert_eq!(grid.base_seed, 543210);
        assert_eq!(grid.instances.len(), 1);
        assert_eq!(grid.instances[0].nurse_count, Some(6));
        assert_eq!(grid.configs.len(), 2);
        assert_eq!(grid.configs[1].overrides.swap.as_deref(), Some("max"));

        let defaults: ExperimentGrid =
            toml::from_str("[[instances]]\nname='a'\narchetype='normal'\nseed=1\n[[configs]]\nname='c'\n")
                .unwrap();
        assert_eq!(defaults.repetitions, 20);
        assert_eq!(defaults.base_seed, 543210);

        assert!(toml::from_str::<ExperimentGrid>("unknown_key = 1").is_err());
    }

    #[test]
    fn experiment_csv_is_deterministic_and_recomputable() {
        let grid: ExperimentGrid = toml::from_str(TINY_GRID).unwrap();
        let mut a = Vec::new();
        run_experiment(&grid, false, 1, &mut a).unwrap();
        let mut b = Vec::new();
        run_experiment(&grid, false, 1, &mut b).unwrap();
        assert_eq!(a, b, "same grid, same bytes");
        let mut c = Vec::new();
        run_experiment(&grid, false, 4, &mut c).unwrap();
        assert_eq!(a, c, "thread count must not change the output");

        let text = String::from_utf8(a).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        // 1 instance x 2 configs x (2 runs + 1 aggregate) + header.
        assert_eq!(lines.len(), 1 + 2 * 3);
        // Each cell reuses the same seeds.
        assert!(lines[1].starts_with("mini,plain,543211,"));
        assert!(lines[2].starts_with("mini,plain,543212,"));
        assert!(lines[4].starts_with("mini,swapped,543211,"));
        // wall_ms is 0 without measurement.
        for line in &lines[1..] {
            assert!(line.ends_with(",0") || line.ends_with(",0.00"), "{line}");
        }

        // The aggregate row is recomputable from the two run rows above it.
        let run_best: Vec<f64> = lines[1..3]
            .iter()
            .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
            .collect();
        let mean = (run_best[0] + run_best[1]) / 2.0;
        let agg_cols: Vec<&str> = lines[3].split(',').collect();
        assert_eq!(agg_cols[2], "aggregate");
        assert_eq!(agg_cols[3], format!("{mean:.2}"));
        let feasible_count = lines[1..3]
            .iter()
            .filter(|l| l.split(',').nth(4).unwrap() == "true")
            .count();
        assert_eq!(
            agg_cols[4],
            format!("{}%", (feasible_count as f64 * 50.0).round() as u32)
        );
    }

    #[test]
    fn experiment_rejects_bad_grids() {
        let empty: ExperimentGrid = toml::from_str("").unwrap();
        let mut sink = Vec::new();
        assert!(matches!(
            run_experiment(&empty, false, 1, &mut sink),
            Err(HarnessError::Grid(_))
        ));

        let bad_name: ExperimentGrid = toml::from_str(
            "[[instances]]\nname='has space'\narchetype='normal'\nseed=1\n[[configs]]\nname='c'\n",
        )
        .unwrap();
        let err = run_experiment(&bad_name, false, 1, &mut sink).unwrap_err();
        assert!(err.to_string().contains("has space"), "{err}");

        let bad_archetype: ExperimentGrid = toml::from_str(
            "[[instances]]\nname='a'\narchetype='weird'\nseed=1\n[[configs]]\nname='c'\n",
        )
        .unwrap();
        let err = run_experiment(&bad_archetype, false, 1, &mut sink).unwrap_err();
        assert!(err.to_string().contains("unknown archetype"), "{err}");

        let bad_config: ExperimentGrid = toml::from_str(
            "[[instances]]\nname='a'\narchetype='normal'\nseed=1\nnurse_count=6\n\
             [[configs]]\nname='c'\ncrossover='diagonal'\n",
        )
        .unwrap();
        let err = run_experiment(&bad_config, false, 1, &mut sink).unwrap_err();
        assert!(err.to_string().contains("unknown crossover"), "{err}");
    }

    #[test]
    fn aggregate_computes_means_and_percentages() {
        let run = |best: Fitness, feasible: bool| RunStats {
            best_fitness: best,
            feasible,
            generations: 10,
            wall: Duration::from_millis(4),
            best_per_generation: vec![best],
        };
        let stats: Vec<RunStats> = (0..20).map(|i| run(100 + i, i < 9)).collect();
        let agg = aggregate(&stats);
        assert_eq!(agg.mean_best, (100.0 + 119.0) / 2.0);
        assert_eq!(agg.best, 100);
        assert_eq!(agg.feasible_percent, 45.0);
        assert_eq!(agg.mean_generations, 10.0);
        assert_eq!(agg.mean_wall_ms, 4.0);
    }

    #[test]
    fn archetype_names_round_trip() {
        for kind in [
            ArchetypeKind::Normal,
            ArchetypeKind::Restrictive,
            ArchetypeKind::Unrestrictive,
            ArchetypeKind::Fluctuating,
        ] {
            assert_eq!(kind.name().parse::<ArchetypeKind>().unwrap(), kind);
        }
        assert!("weekly".parse::<ArchetypeKind>().is_err());
    }
}
