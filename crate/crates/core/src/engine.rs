//! The genetic algorithm: configuration, parameter heuristics, selection,
//! crossover, mutation, substitution strategies, elitism, and the main
//! evolution loop.
//!
//! One evolution step breeds as many children as there are members: for
//! each child a first parent is drawn, one uniform number decides between
//! mutation (probability p(M)), reproduction (p(R)), and crossover (the
//! remainder), then the configured substitution strategy decides which of
//! parents and children survive. Everything consumes a single seeded RNG
//! stream, so a run is a pure function of (instance, config, weights).

use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::extensions::{self, ExtensionConfig, SwapIntensity};
use crate::fitness::{fitness_from_caches, total_fitness, Fitness, FitnessWeights};
use crate::model::{random_chromosome, Chromosome, Instance, LIVES_START};

/// How parents are sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionScheme {
    /// Probability proportional to fitness rank (worst = rank 1); immune to
    /// fitness scaling. The default.
    Rank,
    /// Probability proportional to the raw cost magnitude. Kept for
    /// comparison experiments only: under minimization it prefers *worse*
    /// members, exactly reproducing the textbook example it mirrors.
    Proportional,
}

/// How crossover recombines parents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossoverScheme {
    /// `k` uniformly drawn distinct cut positions; segments cycle through
    /// the parents in order.
    KPoint(usize),
    /// Every gene independently copied from a uniformly chosen parent.
    Uniform,
}

/// Which of parents and children form the next generation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SubstitutionScheme {
    /// Children replace parents wholesale.
    Total,
    /// The best `x`% of parents survive (count rounded up); the best
    /// children fill the remaining slots.
    BestXPercent(u32),
    /// Each child duels the parent in its slot with probability `f` (the
    /// strictly better one wins); otherwise it replaces the parent outright.
    TournamentFraction(f64),
    /// Always duel, but a parent is only replaced after losing three duels
    /// (its lives counter reaching 0); the replacing child starts fresh.
    ThreeLives,
    /// Keep the N individuals (among parents and children) farthest from
    /// the population centroid, ties broken by better fitness.
    Distance,
    /// The best 5% of parents survive unconditionally; every other slot
    /// follows `TournamentFraction(0.75)`.
    Mix,
}

/// When the evolution loop stops.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Stop after exactly this many breeding cycles.
    MaxGenerations(u32),
    /// Stop once this much wall time has elapsed (checked between
    /// generations; the generation count then depends on machine speed).
    WallClockLimit(Duration),
    /// Stop once the best-ever fitness has not improved for this many
    /// consecutive generations.
    StagnationLimit(u32),
}

impl Termination {
    pub(crate) fn reached(&self, generation: u32, stagnation: u32, elapsed: Duration) -> bool {
        match *self {
            Termination::MaxGenerations(g) => generation >= g,
            Termination::WallClockLimit(limit) => elapsed >= limit,
            Termination::StagnationLimit(s) => stagnation >= s,
        }
    }
}

/// Full configuration of one GA run.
#[derive(Debug, Clone, PartialEq)]
pub struct GAConfig {
    /// Initial population size N.
    pub population_size: usize,
    /// Per-child probability of the mutation operator, p(M).
    pub mutation_prob: f64,
    /// Per-child probability of the reproduction operator, p(R); crossover
    /// receives the remaining 1 − p(M) − p(R).
    pub reproduction_prob: f64,
    pub crossover: CrossoverScheme,
    /// Parents drawn per child, 2–4.
    pub parent_count: usize,
    pub selection: SelectionScheme,
    pub substitution: SubstitutionScheme,
    /// Per-gene replacement probability inside the mutation operator;
    /// `None` means 1 / nurse count.
    pub per_gene_mutation_rate: Option<f64>,
    /// Keep the best-ever individual alive in every generation.
    pub elitism: bool,
    pub termination: Termination,
    /// RNG seed; the whole run is a pure function of it.
    pub seed: u64,
    pub extensions: ExtensionConfig,
}

impl Default for GAConfig {
    fn default() -> Self {
        GAConfig {
            population_size: 300,
            mutation_prob: 0.01,
            reproduction_prob: 0.02,
            crossover: CrossoverScheme::Uniform,
            parent_count: 4,
            selection: SelectionScheme::Rank,
            substitution: SubstitutionScheme::BestXPercent(20),
            per_gene_mutation_rate: None,
            elitism: true,
            termination: Termination::StagnationLimit(20),
            seed: 543210,
            extensions: ExtensionConfig::default(),
        }
    }
}

/// Engine failures: invalid configurations and operator misuse.
#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("substitution size mismatch: {parents} parents vs {children} children")]
    SizeMismatch { parents: usize, children: usize },
    #[error("k-point crossover needs 1 <= k <= {max} cuts, got {k}")]
    CutCountOutOfRange { k: usize, max: usize },
    #[error("crossover needs 2..=4 parents, got {got}")]
    BadParentCount { got: usize },
    #[error("population of {got} cannot fill 7 non-empty niches")]
    PopulationTooSmallForNiching { got: usize },
    #[error("segment rankings built for {ranked} members, population has {got}")]
    StaleRankings { ranked: usize, got: usize },
}

impl GAConfig {
    /// Checks every field (and the extension combination rules) against the
    /// given instance.
    pub fn validate(&self, instance: &Instance) -> Result<(), EngineError> {
        let fail = |msg: String| Err(EngineError::InvalidConfig(msg));
        if self.population_size == 0 {
            return fail("population_size must be at least 1".into());
        }
        for (name, p) in [
            ("mutation_prob", self.mutation_prob),
            ("reproduction_prob", self.reproduction_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return fail(format!("{name} {p} outside [0,1]"));
            }
        }
        if self.mutation_prob + self.reproduction_prob > 1.0 {
            return fail(format!(
                "p(M) + p(R) = {} exceeds 1",
                self.mutation_prob + self.reproduction_prob
            ));
        }
        if !(2..=4).contains(&self.parent_count) {
            return fail(format!("parent_count {} outside 2..=4", self.parent_count));
        }
        if let CrossoverScheme::KPoint(k) = self.crossover {
            let max = instance.nurse_count().saturating_sub(1);
            if k < 1 || k > max {
                return fail(format!("k-point cut count {k} outside 1..={max}"));
            }
        }
        match self.substitution {
            SubstitutionScheme::BestXPercent(x) if x == 0 || x > 100 => {
                return fail(format!("best-x-percent share {x} outside 1..=100"));
            }
            SubstitutionScheme::TournamentFraction(f) if !(0.0..=1.0).contains(&f) => {
                return fail(format!("tournament fraction {f} outside [0,1]"));
            }
            _ => {}
        }
        if let Some(rate) = self.per_gene_mutation_rate {
            if !(0.0..=1.0).contains(&rate) {
                return fail(format!("per_gene_mutation_rate {rate} outside [0,1]"));
            }
        }
        self.extensions.validate(&self.termination)?;
        if self.extensions.niching {
            extensions::niche_sizes(self.population_size)?;
            if self.selection == SelectionScheme::Proportional {
                return fail("niching uses per-niche rank selection; proportional selection is not supported with it".into());
            }
        }
        Ok(())
    }
}

/// Suggested population size for genome length `L`, failure probability
/// target `p0`, and selection intensity `S`:
///
/// ```text
/// N = 1 + (10.28 − 12.07·S + 7.30·S²) · √L · ln L · (1/√p0 − 1)
/// ```
///
/// rounded to the nearest integer with floor 1. The literature gives
/// S ∈ [0.8, 1.4] without an estimation procedure, so `S` is a caller
/// judgement call.
pub fn population_size_heuristic(l: usize, p0: f64, s: f64) -> Result<usize, EngineError> {
    if l < 1 {
        return Err(EngineError::InvalidConfig("genome length must be >= 1".into()));
    }
    if !(p0 > 0.0 && p0 <= 1.0) {
        return Err(EngineError::InvalidConfig(format!(
            "failure probability {p0} outside (0,1]"
        )));
    }
    if s <= 0.0 {
        return Err(EngineError::InvalidConfig(format!(
            "selection intensity {s} must be positive"
        )));
    }
    let l_f = l as f64;
    let n = 1.0
        + (10.28 - 12.07 * s + 7.30 * s * s)
            * l_f.sqrt()
            * l_f.ln()
            * (1.0 / p0.sqrt() - 1.0);
    Ok((n.round() as i64).max(1) as usize)
}

/// The two standard mutation-rate rules for genome length `L` and
/// population size `N`: `(1/L, 1.75/(N·√L))`, each capped at 1.
pub fn mutation_rate_heuristics(l: usize, n: usize) -> (f64, f64) {
    let rate_a = (1.0 / l as f64).min(1.0);
    let rate_b = (1.75 / (n as f64 * (l as f64).sqrt())).min(1.0);
    (rate_a, rate_b)
}

/// Rank-based parent sampler: members sorted worst to best receive ranks
/// 1..N and are drawn with probability rank / (N(N+1)/2).
///
/// Ties keep their original input order (stable sort), so equal-fitness
/// members still receive distinct, deterministic ranks.
pub struct RankSelector {
    /// Member indices ordered worst (rank 1) to best (rank N).
    order: Vec<usize>,
    /// N(N+1)/2.
    total: u64,
}

impl RankSelector {
    pub fn new(fitnesses: &[Fitness]) -> Self {
        let mut order: Vec<usize> = (0..fitnesses.len()).collect();
        // Stable sort, descending fitness: worst first, ties in input order.
        order.sort_by(|&a, &b| fitnesses[b].cmp(&fitnesses[a]));
        let n = fitnesses.len() as u64;
        RankSelector {
            order,
            total: n * (n + 1) / 2,
        }
    }

    /// Number of members this selector ranks.
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Draws one member index with probability rank/Σranks.
    pub fn select<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        // r falls in rank t's bucket (T(t-1), T(t)] where T(t) = t(t+1)/2,
        // a bucket of width t, giving probability t/total.
        let r = rng.random_range(1..=self.total);
        let mut t = (((8.0 * r as f64 + 1.0).sqrt() - 1.0) / 2.0).ceil() as u64;
        // Guard against float rounding on huge populations.
        while t * (t + 1) / 2 < r {
            t += 1;
        }
        while t > 1 && (t - 1) * t / 2 >= r {
            t -= 1;
        }
        self.order[(t - 1) as usize]
    }

    /// Member indices ordered worst to best.
    pub fn order_worst_first(&self) -> &[usize] {
        &self.order
    }

    /// Index of the best-ranked member.
    pub fn best(&self) -> usize {
        *self.order.last().expect("selector over non-empty population")
    }
}

/// Draws one member index with probability proportional to its raw cost
/// magnitude (all-zero costs fall back to uniform).
///
/// Under minimization this prefers *worse* members; it exists for
/// comparison experiments, not as a sensible default.
pub fn proportional_select<R: Rng + ?Sized>(fitnesses: &[Fitness], rng: &mut R) -> usize {
    let sum: u128 = fitnesses.iter().map(|&f| f as u128).sum();
    if sum == 0 {
        return rng.random_range(0..fitnesses.len());
    }
    let mut r = rng.random_range(0..sum);
    for (i, &f) in fitnesses.iter().enumerate() {
        let f = f as u128;
        if r < f {
            return i;
        }
        r -= f;
    }
    fitnesses.len() - 1
}

fn check_parents(parents: &[&Chromosome]) -> Result<(), EngineError> {
    if !(2..=4).contains(&parents.len()) {
        return Err(EngineError::BadParentCount { got: parents.len() });
    }
    debug_assert!(
        parents.windows(2).all(|w| w[0].genes.len() == w[1].genes.len()),
        "parents must share genome length"
    );
    Ok(())
}

/// K-point crossover: `k` distinct cut positions drawn uniformly from the
/// L−1 gene boundaries; the child's segments cycle through the parents in
/// order (parent 0 first).
pub fn crossover_k_point<R: Rng + ?Sized>(
    parents: &[&Chromosome],
    k: usize,
    rng: &mut R,
) -> Result<Chromosome, EngineError> {
    check_parents(parents)?;
    let len = parents[0].genes.len();
    let max = len.saturating_sub(1);
    if k < 1 || k > max {
        return Err(EngineError::CutCountOutOfRange { k, max });
    }
    // Boundary b means "cut after gene b-1", b in 1..=L-1.
    let mut boundaries: Vec<usize> = rand::seq::index::sample(rng, max, k)
        .into_iter()
        .map(|v| v + 1)
        .collect();
    boundaries.sort_unstable();
    let mut genes = Vec::with_capacity(len);
    let mut source = 0usize;
    let mut next_cut = 0usize;
    for g in 0..len {
        while next_cut < boundaries.len() && boundaries[next_cut] == g {
            source += 1;
            next_cut += 1;
        }
        genes.push(parents[source % parents.len()].genes[g]);
    }
    Ok(Chromosome::new(genes))
}

/// Uniform crossover: each gene copied from a uniformly chosen parent.
pub fn crossover_uniform<R: Rng + ?Sized>(
    parents: &[&Chromosome],
    rng: &mut R,
) -> Result<Chromosome, EngineError> {
    check_parents(parents)?;
    let len = parents[0].genes.len();
    let genes = (0..len)
        .map(|g| parents[rng.random_range(0..parents.len())].genes[g])
        .collect();
    Ok(Chromosome::new(genes))
}

/// Mutation: the child starts as a copy; each gene is independently
/// replaced, with probability `per_gene_rate`, by a uniform draw from that
/// nurse's legal alphabet. Zero replacements (an accidental reproduction)
/// is permitted.
pub fn mutate<R: Rng + ?Sized>(
    parent: &Chromosome,
    instance: &Instance,
    per_gene_rate: f64,
    rng: &mut R,
) -> Chromosome {
    let mut genes = parent.genes.clone();
    for (gene, nurse) in genes.iter_mut().zip(&instance.nurses) {
        if rng.random::<f64>() < per_gene_rate {
            *gene = nurse.nth_legal(rng.random_range(0..nurse.alphabet_size()));
        }
    }
    Chromosome::new(genes)
}

/// Reproduction: an exact copy with evaluation caches carried over; the
/// copy is a fresh child, so its lives counter restarts.
pub fn reproduce(parent: &Chromosome) -> Chromosome {
    let mut child = parent.clone();
    child.lives = LIVES_START;
    child
}

fn ceil_percent(share: u32, n: usize) -> usize {
    (share as usize * n).div_ceil(100).min(n)
}

/// Indices of `fits` sorted best first; ties keep input order.
fn indices_best_first(fits: &[Fitness]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..fits.len()).collect();
    idx.sort_by(|&a, &b| fits[a].cmp(&fits[b]));
    idx
}

/// Applies a substitution strategy, consuming both generations and
/// returning the survivors with their fitness values.
///
/// `elite` is the best-ever individual with its fitness (under the same
/// weights as the supplied fitness values); when every survivor is strictly
/// worse, the elite replaces the worst survivor.
pub fn substitute<R: Rng + ?Sized>(
    mut parents: Vec<Chromosome>,
    parent_fits: Vec<Fitness>,
    children: Vec<Chromosome>,
    child_fits: Vec<Fitness>,
    strategy: &SubstitutionScheme,
    elite: Option<(&Chromosome, Fitness)>,
    rng: &mut R,
) -> Result<(Vec<Chromosome>, Vec<Fitness>), EngineError> {
    let n = parents.len();
    if children.len() != n || parent_fits.len() != n || child_fits.len() != n {
        return Err(EngineError::SizeMismatch {
            parents: n,
            children: children.len(),
        });
    }

    fn tournament<R: Rng + ?Sized>(
        parents: &mut [Chromosome],
        parent_fits: &[Fitness],
        children: Vec<Chromosome>,
        child_fits: &[Fitness],
        fraction: f64,
        protected: &[bool],
        rng: &mut R,
    ) -> (Vec<Chromosome>, Vec<Fitness>) {
        let n = parents.len();
        let mut next = Vec::with_capacity(n);
        let mut fits = Vec::with_capacity(n);
        for (i, child) in children.into_iter().enumerate() {
            if protected.get(i).copied().unwrap_or(false) {
                next.push(std::mem::replace(&mut parents[i], Chromosome::new(vec![])));
                fits.push(parent_fits[i]);
                continue;
            }
            let duel = rng.random::<f64>() < fraction;
            if duel && child_fits[i] >= parent_fits[i] {
                next.push(std::mem::replace(&mut parents[i], Chromosome::new(vec![])));
                fits.push(parent_fits[i]);
            } else {
                next.push(child);
                fits.push(child_fits[i]);
            }
        }
        (next, fits)
    }

    let (mut next, mut fits) = match strategy {
        SubstitutionScheme::Total => (children, child_fits),
        SubstitutionScheme::BestXPercent(x) => {
            let keep = ceil_percent(*x, n);
            let parent_order = indices_best_first(&parent_fits);
            let child_order = indices_best_first(&child_fits);
            let mut next = Vec::with_capacity(n);
            let mut fits = Vec::with_capacity(n);
            let mut parents = parents;
            let mut children = children;
            for &pi in parent_order.iter().take(keep) {
                next.push(std::mem::replace(&mut parents[pi], Chromosome::new(vec![])));
                fits.push(parent_fits[pi]);
            }
            for &ci in child_order.iter().take(n - keep) {
                next.push(std::mem::replace(&mut children[ci], Chromosome::new(vec![])));
                fits.push(child_fits[ci]);
            }
            (next, fits)
        }
        SubstitutionScheme::TournamentFraction(f) => {
            tournament(&mut parents, &parent_fits, children, &child_fits, *f, &[], rng)
        }
        SubstitutionScheme::ThreeLives => {
            let mut next = Vec::with_capacity(n);
            let mut fits = Vec::with_capacity(n);
            for (i, child) in children.into_iter().enumerate() {
                if child_fits[i] < parent_fits[i] {
                    let parent = &mut parents[i];
                    parent.lives = parent.lives.saturating_sub(1);
                    if parent.lives == 0 {
                        next.push(child);
                        fits.push(child_fits[i]);
                    } else {
                        next.push(std::mem::replace(parent, Chromosome::new(vec![])));
                        fits.push(parent_fits[i]);
                    }
                } else {
                    next.push(std::mem::replace(&mut parents[i], Chromosome::new(vec![])));
                    fits.push(parent_fits[i]);
                }
            }
            (next, fits)
        }
        SubstitutionScheme::Distance => {
            let len = parents[0].genes.len();
            let all: Vec<Chromosome> = parents.into_iter().chain(children).collect();
            let all_fits: Vec<Fitness> = parent_fits
                .iter()
                .chain(child_fits.iter())
                .copied()
                .collect();
            // Per-gene centroid over all 2N individuals.
            let mut mean = vec![0.0f64; len];
            for ch in &all {
                for (m, &g) in mean.iter_mut().zip(&ch.genes) {
                    *m += g as f64;
                }
            }
            for m in &mut mean {
                *m /= all.len() as f64;
            }
            let dist = |ch: &Chromosome| -> f64 {
                ch.genes
                    .iter()
                    .zip(&mean)
                    .map(|(&g, &m)| (g as f64 - m).abs())
                    .sum()
            };
            let mut scored: Vec<(usize, f64)> =
                all.iter().map(dist).enumerate().collect();
            // Farthest first; ties by better fitness, then input order.
            scored.sort_by(|&(ia, da), &(ib, db)| {
                db.partial_cmp(&da)
                    .expect("distances are finite")
                    .then(all_fits[ia].cmp(&all_fits[ib]))
                    .then(ia.cmp(&ib))
            });
            let mut all = all;
            let mut next = Vec::with_capacity(n);
            let mut fits = Vec::with_capacity(n);
            for &(i, _) in scored.iter().take(n) {
                next.push(std::mem::replace(&mut all[i], Chromosome::new(vec![])));
                fits.push(all_fits[i]);
            }
            (next, fits)
        }
        SubstitutionScheme::Mix => {
            let keep = ceil_percent(5, n);
            let parent_order = indices_best_first(&parent_fits);
            let mut protected = vec![false; n];
            for &pi in parent_order.iter().take(keep) {
                protected[pi] = true;
            }
            tournament(&mut parents, &parent_fits, children, &child_fits, 0.75, &protected, rng)
        }
    };

    if let Some((elite_ch, elite_fit)) = elite {
        let min = fits.iter().copied().min().expect("non-empty population");
        if min > elite_fit {
            let worst = fits
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
                .map(|(i, _)| i)
                .expect("non-empty population");
            next[worst] = elite_ch.clone();
            fits[worst] = elite_fit;
        }
    }

    Ok((next, fits))
}

/// Per-run statistics of one evolution.
#[derive(Debug, Clone)]
pub struct RunStats {
    /// Fitness of the returned best chromosome under the caller's weights.
    pub best_fitness: Fitness,
    /// True when the best chromosome has zero coverage shortfall.
    pub feasible: bool,
    /// Breeding cycles executed.
    pub generations: u32,
    /// Wall time of the whole run.
    pub wall: Duration,
    /// Best-known fitness after initialization and after every generation,
    /// under the weights active at that time.
    pub best_per_generation: Vec<Fitness>,
}

/// Result of [`evolve`]: the best-ever chromosome plus statistics.
#[derive(Debug, Clone)]
pub struct EvolveOutcome {
    pub best: Chromosome,
    pub stats: RunStats,
}

/// Draws one parent index under the configured selection scheme.
fn select_parent<R: Rng + ?Sized>(
    selection: SelectionScheme,
    selector: &RankSelector,
    fits: &[Fitness],
    rng: &mut R,
) -> usize {
    match selection {
        SelectionScheme::Rank => selector.select(rng),
        SelectionScheme::Proportional => proportional_select(fits, rng),
    }
}

/// The weights the population is currently evaluated under: the oscillation
/// schedule when configured, otherwise the base weights with the (possibly
/// learned) demand weight.
fn active_weights(
    generation: u32,
    config: &GAConfig,
    base: &FitnessWeights,
    learned_demand_weight: u32,
) -> FitnessWeights {
    match &config.extensions.oscillation {
        Some(schedule) => *extensions::oscillating_weights(generation, schedule),
        None => FitnessWeights {
            demand_weight: learned_demand_weight,
            ..*base
        },
    }
}

/// Runs the genetic algorithm to termination and returns the best-ever
/// chromosome (always tracked, whether or not elitism re-inserts it).
///
/// `weights` is the reporting objective: `stats.best_fitness` is computed
/// under it. It is also the evaluation objective, except that the learning
/// extension adjusts the demand weight over time and the oscillation
/// extension replaces it with its own schedule.
pub fn evolve(
    instance: &Instance,
    config: &GAConfig,
    weights: &FitnessWeights,
) -> Result<EvolveOutcome, EngineError> {
    config.validate(instance)?;
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    if config.extensions.niching {
        return extensions::evolve_niched(instance, config, weights, &mut rng, started);
    }

    let genome_len = instance.nurse_count();
    let per_gene_rate = config
        .per_gene_mutation_rate
        .unwrap_or(1.0 / genome_len as f64);

    let mut members: Vec<Chromosome> = (0..config.population_size)
        .map(|_| random_chromosome(instance, &mut rng))
        .collect();
    let mut learned_g = weights.demand_weight;
    let mut active = active_weights(0, config, weights, learned_g);
    let mut fits: Vec<Fitness> = members
        .iter_mut()
        .map(|m| total_fitness(m, instance, &active))
        .collect();

    let best_idx = fits
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.cmp(b.1))
        .map(|(i, _)| i)
        .expect("population non-empty");
    let mut best = members[best_idx].clone();
    let mut generation: u32 = 0;
    let mut stagnation: u32 = 0;
    let mut trace = vec![fits[best_idx]];

    while !config
        .termination
        .reached(generation, stagnation, started.elapsed())
    {
        let n = members.len();
        // Segment rankings for segmented crossover, rebuilt every
        // generation from the current population.
        let seg_rankings = if config.extensions.segmented_crossover {
            Some(extensions::segment_rankings(&mut members, instance, &active))
        } else {
            None
        };
        let selector = RankSelector::new(&fits);

        // Breed n children.
        let mut children: Vec<Chromosome> = Vec::with_capacity(n);
        for _ in 0..n {
            let first = select_parent(config.selection, &selector, &fits, &mut rng);
            let p_mut = if config.extensions.intelligent_mutation {
                extensions::intelligent_mutation_rate(
                    members[first].cached_shortfall.unwrap_or(0),
                    stagnation,
                    config.mutation_prob,
                )
            } else {
                config.mutation_prob
            };
            let op: f64 = rng.random();
            let child = if op < p_mut {
                mutate(&members[first], instance, per_gene_rate, &mut rng)
            } else if op < p_mut + config.reproduction_prob {
                reproduce(&members[first])
            } else if let Some(rankings) = &seg_rankings {
                extensions::segmented_crossover_child(
                    &members,
                    rankings,
                    instance,
                    config.parent_count,
                    &mut rng,
                )?
            } else {
                let mut refs: Vec<&Chromosome> = Vec::with_capacity(config.parent_count);
                refs.push(&members[first]);
                for _ in 1..config.parent_count {
                    refs.push(
                        &members[select_parent(config.selection, &selector, &fits, &mut rng)],
                    );
                }
                match config.crossover {
                    CrossoverScheme::KPoint(k) => crossover_k_point(&refs, k, &mut rng)?,
                    CrossoverScheme::Uniform => crossover_uniform(&refs, &mut rng)?,
                }
            };
            children.push(child);
        }

        // Partial re-initialisation: replace a sample of child slots with
        // fresh random chromosomes.
        let reinit = extensions::ceil_fraction(config.extensions.reinit_fraction, n);
        if reinit > 0 {
            let slots = rand::seq::index::sample(&mut rng, n, reinit);
            for slot in slots {
                children[slot] = random_chromosome(instance, &mut rng);
            }
        }

        let mut child_fits: Vec<Fitness> = children
            .iter_mut()
            .map(|c| total_fitness(c, instance, &active))
            .collect();

        // Local swap optimisation on eligible children.
        if config.extensions.swap_intensity != SwapIntensity::Off {
            for (child, fit) in children.iter_mut().zip(child_fits.iter_mut()) {
                if extensions::local_swap_pass(
                    child,
                    instance,
                    config.extensions.swap_intensity,
                    config.extensions.swap_probability,
                    &mut rng,
                ) {
                    *fit = fitness_from_caches(child, &active);
                }
            }
        }

        let elite_fit = fitness_from_caches(&best, &active);
        let elite = config.elitism.then_some((&best, elite_fit));
        let (next, next_fits) = substitute(
            members,
            fits,
            children,
            child_fits,
            &config.substitution,
            elite,
            &mut rng,
        )?;
        members = next;
        fits = next_fits;
        generation += 1;

        // Dynamic population: shrink by dropping the worst members.
        if config.extensions.dynamic_population {
            let target = extensions::shrink_population(
                members.len(),
                config.population_size,
                config.extensions.shrink_permille,
            );
            if target < members.len() {
                let keep: std::collections::BTreeSet<usize> = indices_best_first(&fits)
                    .into_iter()
                    .take(target)
                    .collect();
                let mut kept_members = Vec::with_capacity(target);
                let mut kept_fits = Vec::with_capacity(target);
                for (i, m) in members.into_iter().enumerate() {
                    if keep.contains(&i) {
                        kept_members.push(m);
                        kept_fits.push(fits[i]);
                    }
                }
                members = kept_members;
                fits = kept_fits;
            }
        }

        // Learning weight: judge this generation's best member.
        if config.extensions.learning_weight {
            let gen_best = fits
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.cmp(b.1))
                .map(|(i, _)| i)
                .expect("population non-empty");
            let gen_best_feasible = members[gen_best].cached_shortfall == Some(0);
            learned_g = extensions::learn_weight(
                learned_g,
                gen_best_feasible,
                weights.demand_weight,
            );
        }

        // Re-derive fitness from caches when the active weights change.
        let new_active = active_weights(generation, config, weights, learned_g);
        if new_active != active {
            active = new_active;
            for (m, f) in members.iter().zip(fits.iter_mut()) {
                *f = fitness_from_caches(m, &active);
            }
        }

        // Best-ever and stagnation bookkeeping (the stored best is
        // re-judged under the active weights, so objective switches
        // re-open the comparison).
        let gen_best = fits
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.cmp(b.1))
            .map(|(i, _)| i)
            .expect("population non-empty");
        let best_fit_now = fitness_from_caches(&best, &active);
        if fits[gen_best] < best_fit_now {
            best = members[gen_best].clone();
            stagnation = 0;
        } else {
            stagnation += 1;
        }
        trace.push(fits[gen_best].min(best_fit_now));
    }

    let feasible = best.cached_shortfall == Some(0);
    let best_fitness = fitness_from_caches(&best, weights);
    Ok(EvolveOutcome {
        stats: RunStats {
            best_fitness,
            feasible,
            generations: generation,
            wall: started.elapsed(),
            best_per_generation: trace,
        },
        best,
    })
}
