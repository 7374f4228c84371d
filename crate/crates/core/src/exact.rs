//! Exhaustive reference solver and an independent feasibility check.
//!
//! Both functions exist to validate the genetic algorithm on small
//! instances: [`brute_force_solve`] enumerates every complete roster and
//! keeps the true optimum, and [`check_feasible`] recounts cover per slot
//! and grade directly from the definition, sharing no code with the fitness
//! module.

use thiserror::Error;

use crate::fitness::{
    combine_parts, coverage_shortfall, preference_cost, Fitness, FitnessWeights,
};
use crate::model::{Chromosome, Instance, GRADES, SLOT_COUNT};

/// Default cap on the number of rosters [`brute_force_solve`] enumerates.
pub const DEFAULT_ENUM_LIMIT: u64 = 10_000_000;

/// Result of an exhaustive enumeration.
#[derive(Debug, Clone)]
pub struct OracleResult {
    /// A fitness-minimal roster (first one in nurse-major lexicographic
    /// enumeration order, which makes ties deterministic).
    pub optimum: Chromosome,
    /// Fitness of `optimum` under the weights given to the solver.
    pub optimum_fitness: Fitness,
    /// The preference-cost-minimal roster among those with zero shortfall,
    /// with its preference cost; `None` when no roster covers the demand.
    pub feasible_optimum: Option<(Chromosome, u32)>,
    /// Number of complete rosters enumerated.
    pub enumerated: u64,
}

/// Why the oracle refused to run.
#[derive(Debug, Error)]
pub enum OracleError {
    #[error("search space holds {space} rosters, above the limit {limit}")]
    SpaceTooLarge { space: u128, limit: u64 },
}

/// Enumerates every complete roster of `instance` and returns the fitness
/// optimum plus the feasible preference optimum.
///
/// Enumeration is nurse-major: the last nurse's alphabet cycles fastest,
/// alphabets in ascending pattern-index order. Strictly-better comparisons
/// keep the first optimum encountered, so the reported rosters are the
/// lexicographically smallest gene vectors among the optima.
///
/// Refuses instances whose search space exceeds `limit` (pass
/// [`DEFAULT_ENUM_LIMIT`] for the standard cap).
pub fn brute_force_solve(
    instance: &Instance,
    weights: &FitnessWeights,
    limit: u64,
) -> Result<OracleResult, OracleError> {
    let space = instance.search_space();
    if space > limit as u128 {
        return Err(OracleError::SpaceTooLarge { space, limit });
    }

    let n = instance.nurse_count();
    let sizes: Vec<usize> = instance.nurses.iter().map(|nu| nu.alphabet_size()).collect();
    // Odometer over alphabet positions; genes derived per evaluation.
    let mut positions = vec![0usize; n];
    let mut genes: Vec<u16> = instance
        .nurses
        .iter()
        .map(|nu| nu.nth_legal(0))
        .collect();

    let mut best_genes = genes.clone();
    let mut best_fit = Fitness::MAX;
    let mut best_feasible: Option<(Vec<u16>, u32)> = None;
    let mut enumerated = 0u64;

    loop {
        let scratch = Chromosome::new(genes.clone());
        let pref = preference_cost(&scratch, instance, weights);
        let shortfall = coverage_shortfall(&scratch, instance);
        let senior = crate::fitness::senior_weekend_excess(&scratch, instance).unwrap_or(0);
        let fit = combine_parts(pref, shortfall, senior, weights);
        enumerated += 1;

        if fit < best_fit {
            best_fit = fit;
            best_genes.copy_from_slice(&genes);
        }
        if shortfall == 0 {
            let better = match &best_feasible {
                Some((_, p)) => pref < *p,
                None => true,
            };
            if better {
                best_feasible = Some((genes.clone(), pref));
            }
        }

        // Advance the odometer (nurse-major: last position fastest).
        let mut i = n;
        loop {
            if i == 0 {
                let mut optimum = Chromosome::new(best_genes);
                let _ = crate::fitness::total_fitness(&mut optimum, instance, weights);
                return Ok(OracleResult {
                    optimum,
                    optimum_fitness: best_fit,
                    feasible_optimum: best_feasible
                        .map(|(g, p)| (Chromosome::new(g), p)),
                    enumerated,
                });
            }
            i -= 1;
            positions[i] += 1;
            if positions[i] < sizes[i] {
                genes[i] = instance.nurses[i].nth_legal(positions[i]);
                break;
            }
            positions[i] = 0;
            genes[i] = instance.nurses[i].nth_legal(0);
        }
    }
}

/// A slot/grade row of the feasibility report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlackEntry {
    /// 1-based slot (1–7 days, 8–14 nights).
    pub slot: u8,
    /// Grade row 1–3.
    pub grade: u8,
    /// Assigned cover minus demand; negative means the row is violated.
    pub slack: i64,
}

/// Recounts cover per (slot, grade) straight from the definition and
/// reports whether every demand row is met.
///
/// For each grade row `s` and slot `k`, the supply is the number of nurses
/// with grade <= `s` whose assigned pattern covers `k`; the entry's slack is
/// supply minus demand. The roster is feasible when no slack is negative.
/// This deliberately shares no code with the fitness module, so the two can
/// check each other.
pub fn check_feasible(chromosome: &Chromosome, instance: &Instance) -> (bool, Vec<SlackEntry>) {
    let mut entries = Vec::with_capacity(GRADES * SLOT_COUNT);
    let mut feasible = true;
    for grade in 1..=GRADES as u8 {
        for slot in 1..=SLOT_COUNT {
            let supply = instance
                .nurses
                .iter()
                .zip(&chromosome.genes)
                .filter(|(nurse, &gene)| {
                    nurse.grade <= grade && instance.patterns.get(gene).covers(slot)
                })
                .count() as i64;
            let slack = supply - instance.demand.get(slot, grade) as i64;
            if slack < 0 {
                feasible = false;
            }
            entries.push(SlackEntry {
                slot: slot as u8,
                grade,
                slack,
            });
        }
    }
    (feasible, entries)
}
