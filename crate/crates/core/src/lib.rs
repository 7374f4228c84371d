//! Weekly ward rostering with a penalty-based genetic algorithm.
//!
//! A ward roster assigns every nurse one *shift pattern* for the week: a
//! fixed choice of day shifts or night shifts (never both), drawn from a
//! global library of 219 patterns. Each nurse works a contracted number of
//! shifts, so only a contiguous day-pattern range and a contiguous
//! night-pattern range of the library are legal for them. Each legal pattern
//! carries a penalty expressing how much they dislike it; the ward demands a
//! minimum number of nurses per shift and per qualification grade, where a
//! higher grade may stand in for a lower one but not vice versa.
//!
//! The optimisation problem is the integer program
//!
//! ```text
//! minimise    sum of chosen pattern penalties
//! subject to  one pattern per nurse
//!             grade-cumulative cover >= demand   (every shift, every grade)
//! ```
//!
//! solved here by a genetic algorithm over the direct encoding "one pattern
//! index per nurse", with infeasibility priced into the fitness instead of
//! being repaired.
//!
//! # Crate layout
//!
//! * [`model`] — patterns, nurses, demand, instances, chromosomes.
//! * [`fitness`] — penalty sum, demand shortfall, weighted total, per-grade
//!   segment views.
//! * [`engine`] — the GA: selection, crossover, mutation, substitution
//!   schemes, the evolution loop.
//! * [`extensions`] — optional operators: intelligent mutation, partial
//!   re-initialisation, local pattern swaps, oscillating weights, shrinking
//!   populations, learning weights, grade-segmented crossover, niching with
//!   migration.
//! * [`exact`] — exhaustive reference solver and an independent feasibility
//!   check, used to validate the GA on small instances.
//! * [`dataio`] — text formats for instances and penalties, roster printing,
//!   LP export.
//! * [`harness`] — instance generators for four ward archetypes and a
//!   CSV-producing experiment runner.
//!
//! # Example
//!
//! ```
//! use rosterga::harness::{generate_instance, ArchetypeKind, ArchetypeSpec};
//! use rosterga::engine::{evolve, GAConfig};
//! use rosterga::fitness::FitnessWeights;
//!
//! let instance = generate_instance(&ArchetypeSpec::new(ArchetypeKind::Normal, 7)).unwrap();
//! let mut config = GAConfig::default();
//! config.population_size = 60;
//! config.seed = 543211;
//! let outcome = evolve(&instance, &config, &FitnessWeights::default()).unwrap();
//! println!(
//!     "best fitness {} after {} generations",
//!     outcome.stats.best_fitness, outcome.stats.generations
//! );
//! ```

pub mod dataio;
pub mod engine;
pub mod exact;
pub mod extensions;
pub mod fitness;
pub mod harness;
pub mod model;

pub use fitness::{Fitness, FitnessWeights};
pub use model::{Chromosome, DemandTable, Instance, Nurse, PatternLibrary, ShiftPattern};
