//! Roster evaluation: preference cost, demand shortfall, weighted total,
//! weekend-senior excess, and per-grade-segment views.
//!
//! The genetic algorithm minimises
//!
//! ```text
//! fitness = preference cost
//!         + demand_weight * total shortfall
//!         + senior_weight * weekend senior excess
//! ```
//!
//! Shortfall is counted cumulatively over the three grade rows: for each
//! slot and each grade `s`, supply is the number of assigned nurses of grade
//! `s` or better (numerically <= s) covering the slot, capped at the demand
//! of that row; the row's shortfall is demand minus capped supply. Because a
//! grade-1 nurse counts into all three rows, one missing senior can cost up
//! to three shortfall units for the same slot.

use thiserror::Error;

use crate::model::{Chromosome, Instance, GRADES, SLOT_COUNT};

/// Fitness values are non-negative; smaller is better.
pub type Fitness = u64;

/// Weights combining the evaluation parts into one fitness value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FitnessWeights {
    /// Cost per unit of demand shortfall.
    pub demand_weight: u32,
    /// Cost per unit of weekend senior excess; 0 disables the term (it is
    /// also skipped when the instance has no senior flags).
    pub senior_weight: u32,
    /// A previous-week penalty is carried into the preference cost only
    /// when it is at least this threshold; 0 carries every known penalty.
    pub prev_week_threshold: u32,
}

impl Default for FitnessWeights {
    fn default() -> Self {
        FitnessWeights {
            demand_weight: 20,
            senior_weight: 0,
            prev_week_threshold: 0,
        }
    }
}

/// A set of grades, used to evaluate rosters on grade segments.
///
/// The seven non-empty sets are indexed in the fixed order
/// `{1} {2} {3} {1,2} {1,3} {2,3} {1,2,3}` (see [`SegmentSet::ALL_SETS`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentSet(u8);

impl SegmentSet {
    pub const G1: SegmentSet = SegmentSet(0b001);
    pub const G2: SegmentSet = SegmentSet(0b010);
    pub const G3: SegmentSet = SegmentSet(0b100);
    pub const G12: SegmentSet = SegmentSet(0b011);
    pub const G13: SegmentSet = SegmentSet(0b101);
    pub const G23: SegmentSet = SegmentSet(0b110);
    pub const FULL: SegmentSet = SegmentSet(0b111);

    /// The seven segment sets in canonical order.
    pub const ALL_SETS: [SegmentSet; 7] = [
        SegmentSet::G1,
        SegmentSet::G2,
        SegmentSet::G3,
        SegmentSet::G12,
        SegmentSet::G13,
        SegmentSet::G23,
        SegmentSet::FULL,
    ];

    /// True when grade 1–3 belongs to the set.
    pub fn contains(&self, grade: u8) -> bool {
        self.0 >> (grade - 1) & 1 == 1
    }

    /// Position of this set within [`SegmentSet::ALL_SETS`].
    pub fn canonical_index(&self) -> usize {
        Self::ALL_SETS
            .iter()
            .position(|s| s == self)
            .expect("segment sets are always one of the seven canonical sets")
    }
}

impl std::fmt::Display for SegmentSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let grades: Vec<String> = (1..=3)
            .filter(|&g| self.contains(g))
            .map(|g| g.to_string())
            .collect();
        write!(f, "{{{}}}", grades.join(","))
    }
}

/// The instance has no senior flags, so the weekend senior term is undefined.
#[derive(Debug, Error, PartialEq, Eq)]
#[error("instance carries no senior flags")]
pub struct MissingSeniorFlags;

/// Per-slot, per-grade assigned-nurse counts for one roster, restricted to
/// nurses whose grade lies in `set`.
fn slot_counts(genes: &[u16], instance: &Instance, set: SegmentSet) -> [[u32; GRADES]; SLOT_COUNT] {
    let mut counts = [[0u32; GRADES]; SLOT_COUNT];
    for (nurse, &gene) in instance.nurses.iter().zip(genes) {
        if !set.contains(nurse.grade) {
            continue;
        }
        let pattern = instance.patterns.get(gene);
        for (slot0, worked) in pattern.slots.iter().enumerate() {
            if *worked {
                counts[slot0][(nurse.grade - 1) as usize] += 1;
            }
        }
    }
    counts
}

/// Demand shortfall of a roster, restricted to the grade rows and nurses of
/// `set`: for each slot and each grade row `s` in the set, supply is the
/// number of in-set nurses with grade <= s covering the slot; the row adds
/// `demand - min(supply, demand)`.
fn shortfall_for_set(genes: &[u16], instance: &Instance, set: SegmentSet) -> u32 {
    let counts = slot_counts(genes, instance, set);
    let mut shortfall = 0u32;
    for grade in 1..=GRADES as u8 {
        if !set.contains(grade) {
            continue;
        }
        for slot in 1..=SLOT_COUNT {
            let supply: u32 = (1..=grade).map(|g| counts[slot - 1][(g - 1) as usize]).sum();
            let required = instance.demand.get(slot, grade) as u32;
            shortfall += required - supply.min(required);
        }
    }
    shortfall
}

/// Preference cost restricted to nurses whose grade lies in `set`.
fn preference_for_set(
    genes: &[u16],
    instance: &Instance,
    threshold: u32,
    set: SegmentSet,
) -> u32 {
    instance
        .nurses
        .iter()
        .zip(genes)
        .filter(|(nurse, _)| set.contains(nurse.grade))
        .map(|(nurse, &gene)| nurse.penalty(gene) as u32 + nurse.prev_carry(threshold))
        .sum()
}

/// Total demand shortfall of a roster over all slots and grade rows.
pub fn coverage_shortfall(chromosome: &Chromosome, instance: &Instance) -> u32 {
    shortfall_for_set(&chromosome.genes, instance, SegmentSet::FULL)
}

/// Sum of the penalties of all assigned patterns, plus each nurse's
/// previous-week penalty when that is known and at least
/// `weights.prev_week_threshold`.
pub fn preference_cost(
    chromosome: &Chromosome,
    instance: &Instance,
    weights: &FitnessWeights,
) -> u32 {
    preference_for_set(
        &chromosome.genes,
        instance,
        weights.prev_week_threshold,
        SegmentSet::FULL,
    )
}

/// Number of surplus flagged seniors working each weekend shift: one senior
/// per Sunday slot (day 1, night 8) and per Saturday slot (day 7, night 14)
/// is desired, every further one counts 1.
pub fn senior_weekend_excess(
    chromosome: &Chromosome,
    instance: &Instance,
) -> Result<u32, MissingSeniorFlags> {
    let flags = instance.senior_flags.as_ref().ok_or(MissingSeniorFlags)?;
    let mut excess = 0u32;
    for slot in [1usize, 8, 7, 14] {
        let working = instance
            .nurses
            .iter()
            .zip(&chromosome.genes)
            .zip(flags)
            .filter(|((_, &gene), &flag)| flag && instance.patterns.get(gene).covers(slot))
            .count() as u32;
        excess += working.saturating_sub(1);
    }
    Ok(excess)
}

/// Combines already-computed parts into a fitness value.
pub fn combine_parts(
    preference: u32,
    shortfall: u32,
    senior_excess: u32,
    weights: &FitnessWeights,
) -> Fitness {
    preference as Fitness
        + weights.demand_weight as Fitness * shortfall as Fitness
        + weights.senior_weight as Fitness * senior_excess as Fitness
}

/// Evaluates a chromosome, filling its part caches, and returns the fitness.
///
/// Parts already cached are trusted (operators clear caches on any gene
/// change), so re-weighting a cached chromosome costs no re-evaluation. The
/// senior part is 0 when the instance has no flags.
pub fn total_fitness(
    chromosome: &mut Chromosome,
    instance: &Instance,
    weights: &FitnessWeights,
) -> Fitness {
    let pref = match chromosome.cached_pref {
        Some(p) => p,
        None => {
            let p = preference_cost(chromosome, instance, weights);
            chromosome.cached_pref = Some(p);
            p
        }
    };
    let shortfall = match chromosome.cached_shortfall {
        Some(s) => s,
        None => {
            let s = coverage_shortfall(chromosome, instance);
            chromosome.cached_shortfall = Some(s);
            s
        }
    };
    let senior = match chromosome.cached_senior_excess {
        Some(s) => s,
        None => {
            let s = senior_weekend_excess(chromosome, instance).unwrap_or(0);
            chromosome.cached_senior_excess = Some(s);
            s
        }
    };
    combine_parts(pref, shortfall, senior, weights)
}

/// Fitness from a chromosome's caches without recomputation.
///
/// # Panics
/// Panics when the part caches are unpopulated.
pub fn fitness_from_caches(chromosome: &Chromosome, weights: &FitnessWeights) -> Fitness {
    combine_parts(
        chromosome.cached_pref.expect("preference cache populated"),
        chromosome.cached_shortfall.expect("shortfall cache populated"),
        chromosome
            .cached_senior_excess
            .expect("senior cache populated"),
        weights,
    )
}

/// `(preference, shortfall)` of a roster restricted to one segment set:
/// only in-set nurses contribute penalties and supply, and only the demand
/// rows of in-set grades are counted.
pub fn segment_parts(
    chromosome: &Chromosome,
    instance: &Instance,
    weights: &FitnessWeights,
    set: SegmentSet,
) -> (u32, u32) {
    (
        preference_for_set(
            &chromosome.genes,
            instance,
            weights.prev_week_threshold,
            set,
        ),
        shortfall_for_set(&chromosome.genes, instance, set),
    )
}

/// Segment fitness: in-set preference cost plus `demand_weight` times the
/// in-set shortfall. The senior term never contributes. For the full set
/// this equals [`total_fitness`] with `senior_weight = 0`.
pub fn segment_fitness(
    chromosome: &Chromosome,
    instance: &Instance,
    weights: &FitnessWeights,
    set: SegmentSet,
) -> Fitness {
    let (pref, shortfall) = segment_parts(chromosome, instance, weights, set);
    combine_parts(pref, shortfall, 0, weights)
}

/// Evaluates and caches the `(preference, shortfall)` pairs of all seven
/// segment sets.
pub fn evaluate_segments(
    chromosome: &mut Chromosome,
    instance: &Instance,
    weights: &FitnessWeights,
) -> [(u32, u32); 7] {
    if let Some(cached) = chromosome.cached_segments {
        return cached;
    }
    let mut parts = [(0u32, 0u32); 7];
    for (i, set) in SegmentSet::ALL_SETS.iter().enumerate() {
        parts[i] = segment_parts(chromosome, instance, weights, *set);
    }
    chromosome.cached_segments = Some(parts);
    parts
}
