//! Optional engine extensions: adaptive mutation, partial
//! re-initialisation, local swap optimisation, oscillating and learning
//! penalty weights, population shrinking, segment-wise crossover, and a
//! seven-niche population model.
//!
//! All extensions are driven by [`ExtensionConfig`] inside the engine
//! configuration; each one defaults to off (the re-initialisation and
//! migration fractions have non-zero defaults but only act when their
//! host features run).

use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::engine::{
    crossover_uniform, mutate, reproduce, substitute, EngineError, EvolveOutcome, GAConfig,
    RankSelector, RunStats, SelectionScheme, Termination,
};
use crate::fitness::{
    combine_parts, evaluate_segments, segment_parts, total_fitness, Fitness, FitnessWeights,
    SegmentSet,
};
use crate::model::{random_chromosome, Chromosome, Instance, PatternIdx};

/// How aggressively the local swap optimiser is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwapIntensity {
    /// Never swap.
    Off,
    /// Swap only chromosomes whose coverage shortfall is at most this value
    /// (0, 1 and 5 are the well-studied settings).
    Threshold(u32),
    /// Swap every chromosome regardless of shortfall.
    Max,
}

/// Two alternating weight settings with their stretch lengths in
/// generations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillationSchedule {
    pub weights_a: FitnessWeights,
    pub weights_b: FitnessWeights,
    /// Generations evaluated under `weights_a` per cycle (>= 1).
    pub gens_a: u32,
    /// Generations evaluated under `weights_b` per cycle (>= 1).
    pub gens_b: u32,
}

/// Switches for all engine extensions.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionConfig {
    /// Derive each child's mutation probability from its first parent's
    /// shortfall and the current stagnation counter.
    pub intelligent_mutation: bool,
    /// Fraction of each child generation replaced by fresh random
    /// chromosomes (count rounded up).
    pub reinit_fraction: f64,
    pub swap_intensity: SwapIntensity,
    /// Probability that an eligible chromosome actually gets the swap pass.
    pub swap_probability: f64,
    /// Alternate between two weight settings on a fixed schedule.
    pub oscillation: Option<OscillationSchedule>,
    /// Shrink the population every generation by dropping the worst
    /// members.
    pub dynamic_population: bool,
    /// Shrink rate in permille per generation (10 = 1%).
    pub shrink_permille: u32,
    /// Adapt the demand weight each generation: down when the generation's
    /// best is feasible, up when it is not.
    pub learning_weight: bool,
    /// Recombine grade segments from segment-wise ranked donors.
    pub segmented_crossover: bool,
    /// Split the population into seven niches, one per grade-segment
    /// objective plus a main niche on the total objective.
    pub niching: bool,
    /// Fraction of the population swapped between random positions per
    /// generation under niching (count rounded up).
    pub migration_fraction: f64,
}

impl Default for ExtensionConfig {
    fn default() -> Self {
        ExtensionConfig {
            intelligent_mutation: false,
            reinit_fraction: 0.01,
            swap_intensity: SwapIntensity::Off,
            swap_probability: 0.10,
            oscillation: None,
            dynamic_population: false,
            shrink_permille: 10,
            learning_weight: false,
            segmented_crossover: false,
            niching: false,
            migration_fraction: 0.01,
        }
    }
}

impl ExtensionConfig {
    pub(crate) fn validate(&self, termination: &Termination) -> Result<(), EngineError> {
        let fail = |msg: String| Err(EngineError::InvalidConfig(msg));
        for (name, f) in [
            ("reinit_fraction", self.reinit_fraction),
            ("swap_probability", self.swap_probability),
            ("migration_fraction", self.migration_fraction),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return fail(format!("{name} {f} outside [0,1]"));
            }
        }
        if self.shrink_permille > 1000 {
            return fail(format!(
                "shrink_permille {} exceeds 1000",
                self.shrink_permille
            ));
        }
        if let Some(s) = &self.oscillation {
            if s.gens_a < 1 || s.gens_b < 1 {
                return fail("oscillation stretches must be at least 1 generation".into());
            }
            if self.learning_weight {
                return fail("oscillation and learning_weight both rewrite the demand weight; enable only one".into());
            }
            if matches!(termination, Termination::StagnationLimit(_)) {
                return fail(
                    "oscillating weights re-judge the best every switch, so stagnation never \
                     settles; use max-generations or wall-clock termination"
                        .into(),
                );
            }
        }
        if self.niching {
            for (flag, on) in [
                ("dynamic_population", self.dynamic_population),
                ("learning_weight", self.learning_weight),
                ("segmented_crossover", self.segmented_crossover),
                ("oscillation", self.oscillation.is_some()),
            ] {
                if on {
                    return fail(format!(
                        "niching fixes niche sizes and objectives; {flag} cannot be combined with it"
                    ));
                }
            }
        }
        Ok(())
    }
}

/// `ceil(fraction * n)`, capped at `n`.
pub(crate) fn ceil_fraction(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64).ceil() as usize).min(n)
}

/// Child mutation probability from the first parent's coverage shortfall
/// and the best-ever stagnation counter:
///
/// ```text
/// p = base/2 + 0.005 * shortfall + 0.0005 * stagnation
/// ```
///
/// clamped to [0, 1]. A perfect parent in a progressing run keeps half the
/// base rate; bad coverage or a stalled search raise it.
pub fn intelligent_mutation_rate(shortfall: u32, stagnation: u32, base_rate: f64) -> f64 {
    (base_rate / 2.0 + 0.005 * shortfall as f64 + 0.0005 * stagnation as f64).clamp(0.0, 1.0)
}

/// The weight setting active in `generation` under an oscillation schedule:
/// the first `gens_a` generations of each cycle use `weights_a`, the rest
/// `weights_b`.
pub fn oscillating_weights(generation: u32, schedule: &OscillationSchedule) -> &FitnessWeights {
    if generation % (schedule.gens_a + schedule.gens_b) < schedule.gens_a {
        &schedule.weights_a
    } else {
        &schedule.weights_b
    }
}

/// Next population size when shrinking: `current` reduced by
/// `permille`/1000 (integer arithmetic, rounding down) but never below a
/// third of the initial size (rounded up) and never above `current`.
pub fn shrink_population(current: usize, initial: usize, permille: u32) -> usize {
    let floor = initial.div_ceil(3);
    let shrunk = current * (1000 - permille as usize) / 1000;
    shrunk.max(floor).min(current)
}

/// One learning step for the demand weight: feasible generations relax it
/// by 1, infeasible ones raise it by 1, clamped to [⌈g0/3⌉, 3·g0] around
/// the initial weight `g0`.
pub fn learn_weight(g: u32, generation_best_feasible: bool, g0: u32) -> u32 {
    let next = if generation_best_feasible {
        g.saturating_sub(1)
    } else {
        g.saturating_add(1)
    };
    next.clamp(g0.div_ceil(3), 3 * g0)
}

/// Nurse index groups that may exchange patterns: equal grade, equal hours
/// level, and equal senior flag (so a swap provably changes neither
/// coverage nor the senior weekend count). Groups are ordered by key and
/// members ascend.
fn swap_classes(instance: &Instance) -> Vec<Vec<usize>> {
    let mut classes: std::collections::BTreeMap<(u8, u8, bool), Vec<usize>> = Default::default();
    for (i, nurse) in instance.nurses.iter().enumerate() {
        let senior = instance
            .senior_flags
            .as_ref()
            .map(|f| f[i])
            .unwrap_or(false);
        classes
            .entry((nurse.grade, nurse.hours_level, senior))
            .or_default()
            .push(i);
    }
    classes.into_values().filter(|v| v.len() >= 2).collect()
}

/// Adds a preference delta to the chromosome's caches after a swap among
/// nurses of grade `grade` (total preference plus every segment containing
/// that grade).
fn apply_pref_delta(chromosome: &mut Chromosome, grade: u8, delta: i64) {
    let pref = chromosome.cached_pref.expect("swap needs an evaluated chromosome");
    chromosome.cached_pref = Some((pref as i64 + delta) as u32);
    if let Some(segments) = &mut chromosome.cached_segments {
        for (si, set) in SegmentSet::ALL_SETS.iter().enumerate() {
            if set.contains(grade) {
                segments[si].0 = (segments[si].0 as i64 + delta) as u32;
            }
        }
    }
}

/// One deterministic improvement pass: every nurse pair in each swap class
/// (ascending, first improvement applied greedily), then every triple with
/// both 3-cycle rotations. A swap is applied only when it strictly lowers
/// the summed pattern penalties and both (or all three) reassigned
/// patterns stay inside the receiving nurses' legal alphabets.
///
/// Requires an evaluated chromosome; the preference caches are updated
/// incrementally, coverage and senior caches are untouched (the swap
/// classes guarantee they cannot change).
pub fn swap_improvement_pass(chromosome: &mut Chromosome, instance: &Instance) -> bool {
    let classes = swap_classes(instance);
    let mut improved = false;

    for class in &classes {
        for a in 0..class.len() {
            for b in a + 1..class.len() {
                let (i1, i2) = (class[a], class[b]);
                let (j1, j2) = (chromosome.genes[i1], chromosome.genes[i2]);
                if j1 == j2 {
                    continue;
                }
                let n1 = &instance.nurses[i1];
                let n2 = &instance.nurses[i2];
                if !n1.is_legal(j2) || !n2.is_legal(j1) {
                    continue;
                }
                let old = n1.penalty(j1) as i64 + n2.penalty(j2) as i64;
                let new = n1.penalty(j2) as i64 + n2.penalty(j1) as i64;
                if new < old {
                    chromosome.genes[i1] = j2;
                    chromosome.genes[i2] = j1;
                    apply_pref_delta(chromosome, n1.grade, new - old);
                    improved = true;
                }
            }
        }
    }

    for class in &classes {
        for a in 0..class.len() {
            for b in a + 1..class.len() {
                for c in b + 1..class.len() {
                    let (i1, i2, i3) = (class[a], class[b], class[c]);
                    let (j1, j2, j3) =
                        (chromosome.genes[i1], chromosome.genes[i2], chromosome.genes[i3]);
                    let n1 = &instance.nurses[i1];
                    let n2 = &instance.nurses[i2];
                    let n3 = &instance.nurses[i3];
                    let old =
                        n1.penalty(j1) as i64 + n2.penalty(j2) as i64 + n3.penalty(j3) as i64;
                    // The two 3-cycles: each nurse takes the next (or
                    // previous) nurse's pattern.
                    for (r1, r2, r3) in [(j2, j3, j1), (j3, j1, j2)] {
                        if !n1.is_legal(r1) || !n2.is_legal(r2) || !n3.is_legal(r3) {
                            continue;
                        }
                        let new =
                            n1.penalty(r1) as i64 + n2.penalty(r2) as i64 + n3.penalty(r3) as i64;
                        if new < old {
                            chromosome.genes[i1] = r1;
                            chromosome.genes[i2] = r2;
                            chromosome.genes[i3] = r3;
                            apply_pref_delta(chromosome, n1.grade, new - old);
                            improved = true;
                            break;
                        }
                    }
                }
            }
        }
    }

    improved
}

/// Gate plus pass: runs [`swap_improvement_pass`] when the chromosome's
/// shortfall is within the intensity's threshold and a coin with
/// `swap_probability` comes up. Returns whether anything changed.
pub fn local_swap_pass<R: Rng + ?Sized>(
    chromosome: &mut Chromosome,
    instance: &Instance,
    intensity: SwapIntensity,
    swap_probability: f64,
    rng: &mut R,
) -> bool {
    let threshold = match intensity {
        SwapIntensity::Off => return false,
        SwapIntensity::Threshold(t) => t,
        SwapIntensity::Max => u32::MAX,
    };
    let shortfall = chromosome
        .cached_shortfall
        .expect("swap needs an evaluated chromosome");
    if shortfall > threshold {
        return false;
    }
    if rng.random::<f64>() >= swap_probability {
        return false;
    }
    swap_improvement_pass(chromosome, instance)
}

/// The four grade-segment pairings used by segmented crossover and the
/// niche model, as indices into [`SegmentSet::ALL_SETS`]: (I)+(II,III),
/// (I,II)+(III), (II)+(I,III), and (I)+(II)+(III). Each pairing partitions
/// the grades, so a child assembled from one donor per set is fully
/// defined.
pub const PAIRINGS: [&[usize]; 4] = [&[0, 5], &[3, 2], &[1, 4], &[0, 1, 2]];

/// Builds one rank selector per grade segment (in [`SegmentSet::ALL_SETS`]
/// order), evaluating segment caches as needed. The senior term is a
/// whole-roster quantity and is excluded from segment objectives.
pub fn segment_rankings(
    members: &mut [Chromosome],
    instance: &Instance,
    weights: &FitnessWeights,
) -> [RankSelector; 7] {
    for m in members.iter_mut() {
        evaluate_segments(m, instance, weights);
    }
    std::array::from_fn(|si| {
        let fits: Vec<Fitness> = members
            .iter()
            .map(|m| {
                let (pref, short) = m.cached_segments.expect("segments just evaluated")[si];
                combine_parts(pref, short, 0, weights)
            })
            .collect();
        RankSelector::new(&fits)
    })
}

/// Produces one child by segment-wise recombination: a coin picks either
/// uniform crossover between parents ranked on the full-roster segment, or
/// one of the four pairings with each segment spliced in from a donor
/// ranked on that segment alone.
pub fn segmented_crossover_child<R: Rng + ?Sized>(
    members: &[Chromosome],
    rankings: &[RankSelector; 7],
    instance: &Instance,
    parent_count: usize,
    rng: &mut R,
) -> Result<Chromosome, EngineError> {
    if rankings[0].len() != members.len() {
        return Err(EngineError::StaleRankings {
            ranked: rankings[0].len(),
            got: members.len(),
        });
    }
    if rng.random::<f64>() < 0.5 {
        let refs: Vec<&Chromosome> = (0..parent_count)
            .map(|_| &members[rankings[6].select(rng)])
            .collect();
        crossover_uniform(&refs, rng)
    } else {
        let pairing = PAIRINGS[rng.random_range(0..PAIRINGS.len())];
        let mut genes = vec![0 as PatternIdx; instance.nurse_count()];
        for &set_idx in pairing {
            let donor = &members[rankings[set_idx].select(rng)];
            let set = SegmentSet::ALL_SETS[set_idx];
            for (i, nurse) in instance.nurses.iter().enumerate() {
                if set.contains(nurse.grade) {
                    genes[i] = donor.genes[i];
                }
            }
        }
        Ok(Chromosome::new(genes))
    }
}

/// Niche sizes for a total population: the main niche takes half (rounded
/// down), the six segment niches split the rest as evenly as possible
/// (earlier niches take the remainder). Errors when any niche would be
/// empty.
pub fn niche_sizes(total: usize) -> Result<[usize; 7], EngineError> {
    let main = total / 2;
    let rest = total - main;
    let base = rest / 6;
    let extra = rest % 6;
    let mut sizes = [0usize; 7];
    for (i, s) in sizes.iter_mut().take(6).enumerate() {
        *s = base + usize::from(i < extra);
    }
    sizes[6] = main;
    if sizes.iter().any(|&s| s == 0) {
        return Err(EngineError::PopulationTooSmallForNiching { got: total });
    }
    Ok(sizes)
}

fn unflatten(sizes: &[usize; 7], flat: usize) -> (usize, usize) {
    let mut offset = flat;
    for (i, &s) in sizes.iter().enumerate() {
        if offset < s {
            return (i, offset);
        }
        offset -= s;
    }
    unreachable!("flat index {flat} outside population");
}

/// Runs the niched variant of the evolution loop. Niches 1–6 select and
/// substitute on their grade-segment objective (in
/// [`SegmentSet::ALL_SETS`] order), the main niche on the total objective;
/// the main niche's crossover recombines segments from the matching niches
/// half the time. Random migration swaps population positions every
/// generation, and the best-ever roster is tracked in the main niche only.
///
/// Each member is scored under its own niche's objective only — that is
/// what makes the model cheap: a segment evaluation touches just the
/// grades of its set, and nobody outside the main niche pays for a full
/// evaluation. A member's score travels with it and is recomputed only
/// when migration moves it into a niche with a different objective.
/// (Consequently segment-niche members carry no total-fitness caches:
/// intelligent mutation treats their shortfall as 0, and a configured swap
/// pass evaluates the children it touches in full first.)
///
/// Called through [`crate::engine::evolve`] when niching is enabled; the
/// RNG arrives mid-stream from there.
pub fn evolve_niched(
    instance: &Instance,
    config: &GAConfig,
    weights: &FitnessWeights,
    rng: &mut ChaCha8Rng,
    started: Instant,
) -> Result<EvolveOutcome, EngineError> {
    debug_assert_eq!(config.selection, SelectionScheme::Rank);
    let sizes = niche_sizes(config.population_size)?;
    let total = config.population_size;
    let genome_len = instance.nurse_count();
    let per_gene_rate = config
        .per_gene_mutation_rate
        .unwrap_or(1.0 / genome_len as f64);

    // Fitness of a member under the objective of niche `niche_idx`,
    // filling the total-fitness caches only in the main niche.
    let eval_in_niche = |niche_idx: usize, m: &mut Chromosome| -> Fitness {
        if niche_idx < 6 {
            let (pref, short) = segment_parts(m, instance, weights, SegmentSet::ALL_SETS[niche_idx]);
            combine_parts(pref, short, 0, weights)
        } else {
            total_fitness(m, instance, weights)
        }
    };

    let mut niches: Vec<Vec<Chromosome>> = sizes
        .iter()
        .map(|&s| (0..s).map(|_| random_chromosome(instance, rng)).collect())
        .collect();
    // Niche-objective fitness of every member, kept aligned with `niches`
    // across substitution and migration.
    let mut niche_fits: Vec<Vec<Fitness>> = niches
        .iter_mut()
        .enumerate()
        .map(|(i, niche)| niche.iter_mut().map(|m| eval_in_niche(i, m)).collect())
        .collect();

    let (mut best, mut best_fit) = niches[6]
        .iter()
        .zip(&niche_fits[6])
        .min_by(|a, b| a.1.cmp(b.1))
        .map(|(m, &f)| (m.clone(), f))
        .expect("main niche non-empty");
    let mut generation: u32 = 0;
    let mut stagnation: u32 = 0;
    let mut trace = vec![best_fit];

    while !config
        .termination
        .reached(generation, stagnation, started.elapsed())
    {
        let selectors: Vec<RankSelector> =
            niche_fits.iter().map(|f| RankSelector::new(f)).collect();

        // All children are bred from the pre-step niche snapshots.
        let mut children: Vec<Vec<Chromosome>> = Vec::with_capacity(7);
        for i in 0..7 {
            let mut kids = Vec::with_capacity(sizes[i]);
            for _ in 0..sizes[i] {
                let first = selectors[i].select(rng);
                let member = &niches[i][first];
                let p_mut = if config.extensions.intelligent_mutation {
                    intelligent_mutation_rate(
                        member.cached_shortfall.unwrap_or(0),
                        stagnation,
                        config.mutation_prob,
                    )
                } else {
                    config.mutation_prob
                };
                let op: f64 = rng.random();
                let child = if op < p_mut {
                    mutate(member, instance, per_gene_rate, rng)
                } else if op < p_mut + config.reproduction_prob {
                    reproduce(member)
                } else if i < 6 || rng.random::<f64>() < 0.5 {
                    // Plain uniform crossover within the own niche.
                    let mut refs: Vec<&Chromosome> = Vec::with_capacity(config.parent_count);
                    refs.push(member);
                    for _ in 1..config.parent_count {
                        refs.push(&niches[i][selectors[i].select(rng)]);
                    }
                    crossover_uniform(&refs, rng)?
                } else {
                    // Main niche: splice segments from the matching niches.
                    let pairing = PAIRINGS[rng.random_range(0..PAIRINGS.len())];
                    let mut genes = vec![0 as PatternIdx; genome_len];
                    for &set_idx in pairing {
                        let donor =
                            &niches[set_idx][selectors[set_idx].select(rng)];
                        let set = SegmentSet::ALL_SETS[set_idx];
                        for (gi, nurse) in instance.nurses.iter().enumerate() {
                            if set.contains(nurse.grade) {
                                genes[gi] = donor.genes[gi];
                            }
                        }
                    }
                    Chromosome::new(genes)
                };
                kids.push(child);
            }
            children.push(kids);
        }

        // Partial re-initialisation across all child slots.
        let reinit = ceil_fraction(config.extensions.reinit_fraction, total);
        if reinit > 0 {
            let slots = rand::seq::index::sample(rng, total, reinit);
            for flat in slots {
                let (ni, off) = unflatten(&sizes, flat);
                children[ni][off] = random_chromosome(instance, rng);
            }
        }

        if config.extensions.swap_intensity != SwapIntensity::Off {
            for kids in &mut children {
                for c in kids.iter_mut() {
                    let _ = total_fitness(c, instance, weights);
                    let _ = local_swap_pass(
                        c,
                        instance,
                        config.extensions.swap_intensity,
                        config.extensions.swap_probability,
                        rng,
                    );
                }
            }
        }

        let elite_pair = (best.clone(), best_fit);
        for (i, mut kids) in children.into_iter().enumerate() {
            let parents = std::mem::take(&mut niches[i]);
            let parent_fits = std::mem::take(&mut niche_fits[i]);
            let kid_fits: Vec<Fitness> =
                kids.iter_mut().map(|c| eval_in_niche(i, c)).collect();
            let elite = (i == 6 && config.elitism).then_some((&elite_pair.0, elite_pair.1));
            let (next, next_fits) = substitute(
                parents,
                parent_fits,
                kids,
                kid_fits,
                &config.substitution,
                elite,
                rng,
            )?;
            niches[i] = next;
            niche_fits[i] = next_fits;
        }

        // Migration: swap members between uniformly chosen distinct
        // positions of the whole population.
        let swaps = ceil_fraction(config.extensions.migration_fraction, total);
        for _ in 0..swaps {
            let a = rng.random_range(0..total);
            let b_raw = rng.random_range(0..total - 1);
            let b = if b_raw >= a { b_raw + 1 } else { b_raw };
            let (na, oa) = unflatten(&sizes, a);
            let (nb, ob) = unflatten(&sizes, b);
            if na == nb {
                niches[na].swap(oa, ob);
                niche_fits[na].swap(oa, ob);
            } else {
                let (lo, hi) = (na.min(nb), na.max(nb));
                let (lo_off, hi_off) = if na < nb { (oa, ob) } else { (ob, oa) };
                let (left, right) = niches.split_at_mut(hi);
                std::mem::swap(&mut left[lo][lo_off], &mut right[0][hi_off]);
                // The movers now sit under different objectives.
                niche_fits[na][oa] = eval_in_niche(na, &mut niches[na][oa]);
                niche_fits[nb][ob] = eval_in_niche(nb, &mut niches[nb][ob]);
            }
        }

        generation += 1;

        let (gen_best_idx, &gen_best_fit) = niche_fits[6]
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.cmp(b.1))
            .expect("main niche non-empty");
        if gen_best_fit < best_fit {
            best = niches[6][gen_best_idx].clone();
            best_fit = gen_best_fit;
            stagnation = 0;
        } else {
            stagnation += 1;
        }
        trace.push(best_fit);
    }

    let feasible = best.cached_shortfall == Some(0);
    Ok(EvolveOutcome {
        stats: RunStats {
            best_fitness: best_fit,
            feasible,
            generations: generation,
            wall: started.elapsed(),
            best_per_generation: trace,
        },
        best,
    })
}
