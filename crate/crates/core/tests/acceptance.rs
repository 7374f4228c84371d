//! The acceptance gate: eleven numbered criteria, one test per criterion, so
//! the harness prints one pass/fail line for each. Everything runs at fixed
//! seeds; a criterion that passes once passes always.
//!
//! The criteria share a process-wide mutex: they run one at a time (several
//! compare wall-clock times) and pool every elitism run's best-per-generation
//! trace for the monotonicity tally of criterion 8.

use std::process::{Command, Stdio};
use std::sync::{Mutex, MutexGuard, PoisonError};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rosterga::dataio::{export_lp, parse_lp_objective};
use rosterga::engine::{
    evolve, mutation_rate_heuristics, proportional_select, GAConfig, RunStats, Termination,
};
use rosterga::exact::brute_force_solve;
use rosterga::extensions::{
    intelligent_mutation_rate, learn_weight, local_swap_pass, shrink_population, SwapIntensity,
};
use rosterga::fitness::{preference_cost, total_fitness, Fitness, FitnessWeights};
use rosterga::harness::{generate_instance, ArchetypeKind, ArchetypeSpec};
use rosterga::model::{
    enumerate_pattern_library, random_chromosome, Chromosome, DemandTable, Instance, Nurse,
    PatternLibrary,
};

/// Serializes the criteria and pools elitism traces for criterion 8.
static TRACES: Mutex<Vec<Vec<Fitness>>> = Mutex::new(Vec::new());

fn lock() -> MutexGuard<'static, Vec<Vec<Fitness>>> {
    TRACES.lock().unwrap_or_else(PoisonError::into_inner)
}

fn assert_monotone(trace: &[Fitness]) {
    for pair in trace.windows(2) {
        assert!(
            pair[1] <= pair[0],
            "elitism let the best-ever fitness rise: {} -> {}",
            pair[0],
            pair[1]
        );
    }
}

/// Runs the engine, checks the elitism contract on the spot, and records the
/// trace for criterion 8's tally.
fn run_recorded(
    instance: &Instance,
    config: &GAConfig,
    weights: &FitnessWeights,
    traces: &mut Vec<Vec<Fitness>>,
) -> RunStats {
    let outcome = evolve(instance, config, weights).expect("valid configuration");
    if config.elitism {
        assert_monotone(&outcome.stats.best_per_generation);
        traces.push(outcome.stats.best_per_generation.clone());
    }
    outcome.stats
}

/// A small random instance: 3-5 nurses on restricted-hours levels, demand on
/// the first 2-7 days only (remaining columns zero), uniform random
/// penalties. Draws are retried until the search space fits `space_cap`.
fn toy_instance(library: &PatternLibrary, rng: &mut ChaCha8Rng, space_cap: u128) -> Instance {
    loop {
        let nurse_count: usize = rng.random_range(3..=5);
        let active_days: usize = rng.random_range(2..=7);
        let mut grades: Vec<u8> = (0..nurse_count).map(|_| rng.random_range(1..=3)).collect();
        grades.sort_unstable();
        let mut nurses = Vec::with_capacity(nurse_count);
        for (i, &grade) in grades.iter().enumerate() {
            let level = [4u8, 5, 6, 7][rng.random_range(0..4usize)];
            let (day_range, night_range) = library.legal_ranges(level);
            let day_penalties = (0..day_range.len()).map(|_| rng.random_range(0..=20)).collect();
            let night_penalties =
                (0..night_range.len()).map(|_| rng.random_range(0..=20)).collect();
            nurses.push(
                Nurse::new(
                    i + 1,
                    grade,
                    level,
                    0,
                    [0; 14],
                    day_range,
                    night_range,
                    day_penalties,
                    night_penalties,
                )
                .unwrap(),
            );
        }
        let mut demand = DemandTable::zero();
        for day in 0..active_days {
            for half in [0, 7] {
                let r3 = rng.random_range(0..=3u16.min(nurse_count as u16));
                let r2 = rng.random_range(0..=r3);
                let r1 = rng.random_range(0..=r2);
                demand.required[half + day] = [r1, r2, r3];
            }
        }
        let instance = Instance::new(nurses, library.clone(), demand, None).unwrap();
        if instance.search_space() <= space_cap {
            return instance;
        }
    }
}

/// The fluctuating ward shared by criteria 5-7: 17 nurses at generator seed
/// 4 put the plain GA in the low-feasibility regime (demand close to the
/// weekly shift supply) that the lift and timing comparisons assume.
fn fluctuating_instance() -> Instance {
    let spec = ArchetypeSpec::new(ArchetypeKind::Fluctuating, 4).with_nurse_count(17);
    generate_instance(&spec).unwrap()
}

/// One 20-run arm at population 300 on `instance`; returns the feasible-run
/// count and the wall time of each run.
fn arm(
    instance: &Instance,
    segmented: bool,
    niching: bool,
    traces: &mut Vec<Vec<Fitness>>,
) -> (u32, Vec<Duration>) {
    let weights = FitnessWeights::default();
    let mut feasible = 0;
    let mut walls = Vec::new();
    for s in 1..=20u64 {
        let mut config = GAConfig {
            population_size: 300,
            seed: 9000 + s,
            ..GAConfig::default()
        };
        config.extensions.segmented_crossover = segmented;
        config.extensions.niching = niching;
        let stats = run_recorded(instance, &config, &weights, traces);
        feasible += u32::from(stats.feasible);
        walls.push(stats.wall);
    }
    (feasible, walls)
}

fn mean_wall(walls: &[Duration]) -> Duration {
    walls.iter().sum::<Duration>() / walls.len() as u32
}

#[test]
fn c01_pattern_library_counts() {
    let _guard = lock();
    let started = Instant::now();
    let library = enumerate_pattern_library();
    let (day, night) = library.legal_ranges(1);
    assert_eq!(day.len(), 21, "full-time day patterns");
    assert_eq!(night.len(), 35, "full-time night patterns");
    assert_eq!(library.len(), 219, "library size");
    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    println!("criterion 1: PASS — full-time 21 day / 35 night patterns, library 219, in {elapsed:?}");
}

#[test]
fn c02_mutation_rate_heuristics_worked_example() {
    let _guard = lock();
    let (per_chromosome, per_gene) = mutation_rate_heuristics(20, 1000);
    assert_eq!(per_chromosome, 0.05);
    let rounded = (per_gene * 10_000.0).round() / 10_000.0;
    assert_eq!(rounded, 0.0004, "per-gene rate {per_gene} rounds to {rounded}");
    println!("criterion 2: PASS — heuristics(20, 1000) = (0.05, {per_gene:.6} ~ 0.0004)");
}

#[test]
fn c03_proportional_selection_worked_example() {
    let _guard = lock();
    let costs: Vec<Fitness> = vec![48, 123, 55, 99];
    let total: Fitness = costs.iter().sum();
    let expected_pct = [15u32, 38, 17, 30];
    for (&cost, pct) in costs.iter().zip(expected_pct) {
        let exact = 100.0 * cost as f64 / total as f64;
        assert_eq!(exact.round() as u32, pct, "{cost}/{total} should round to {pct}%");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xC3);
    let draws = 200_000u32;
    let mut counts = [0u32; 4];
    for _ in 0..draws {
        counts[proportional_select(&costs, &mut rng)] += 1;
    }
    let mut shares = [0f64; 4];
    for i in 0..4 {
        shares[i] = 100.0 * counts[i] as f64 / draws as f64;
        let exact = 100.0 * costs[i] as f64 / total as f64;
        assert!(
            (shares[i] - exact).abs() < 1.0,
            "observed share {:.2}% off the exact {exact:.2}%",
            shares[i]
        );
    }
    println!(
        "criterion 3: PASS — shares {:.1}/{:.1}/{:.1}/{:.1}% round to 15/38/17/30%",
        shares[0], shares[1], shares[2], shares[3]
    );
}

#[test]
fn c04_ga_matches_the_exhaustive_oracle() {
    let mut traces = lock();
    let started = Instant::now();
    let library = enumerate_pattern_library();
    let weights = FitnessWeights::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC4);
    let mut hits = 0u32;
    let mut total = 0u32;
    let mut worst = 5u32;
    for k in 0..50u64 {
        let instance = toy_instance(&library, &mut rng, 1_000_000);
        let oracle = brute_force_solve(&instance, &weights, 1_000_000).unwrap();
        let mut instance_hits = 0u32;
        for s in 0..5u64 {
            let config = GAConfig {
                population_size: 200,
                termination: Termination::StagnationLimit(20),
                seed: 1000 * (k + 1) + s,
                ..GAConfig::default()
            };
            let stats = run_recorded(&instance, &config, &weights, &mut traces);
            assert!(
                stats.best_fitness >= oracle.optimum_fitness,
                "GA fitness {} beat the exhaustive optimum {}",
                stats.best_fitness,
                oracle.optimum_fitness
            );
            instance_hits += u32::from(stats.best_fitness == oracle.optimum_fitness);
            total += 1;
        }
        hits += instance_hits;
        worst = worst.min(instance_hits);
    }
    let elapsed = started.elapsed();
    assert!(hits * 10 >= total * 9, "optimum hit in {hits}/{total} runs, below 90%");
    assert!(elapsed <= Duration::from_secs(60), "took {elapsed:?}, budget 60 s");
    println!(
        "criterion 4: PASS — optimum hit in {hits}/{total} runs (worst instance {worst}/5) in {elapsed:?}"
    );
}

#[test]
fn c05_segmented_crossover_lifts_feasibility() {
    let mut traces = lock();
    let started = Instant::now();
    let instance = fluctuating_instance();
    let (plain, _) = arm(&instance, false, false, &mut traces);
    let (segmented, _) = arm(&instance, true, false, &mut traces);
    let elapsed = started.elapsed();
    assert!(segmented > 0, "segmented crossover never reached feasibility");
    assert!(
        segmented >= 3 * plain,
        "segmented feasibility {}% is not 3x the plain {}%",
        segmented * 5,
        plain * 5
    );
    assert!(elapsed <= Duration::from_secs(300), "took {elapsed:?}, budget 5 min");
    println!(
        "criterion 5: PASS — feasibility plain {}% vs segmented {}% over 20 runs each, in {elapsed:?}",
        plain * 5,
        segmented * 5
    );
}

#[test]
fn c06_niching_halves_segmented_wall_time() {
    let mut traces = lock();
    let instance = fluctuating_instance();
    let (_, segmented_walls) = arm(&instance, true, false, &mut traces);
    let (_, niched_walls) = arm(&instance, false, true, &mut traces);
    let segmented = mean_wall(&segmented_walls);
    let niched = mean_wall(&niched_walls);
    assert!(
        niched * 2 <= segmented,
        "mean niched wall {niched:?} is not half the segmented {segmented:?}"
    );
    println!(
        "criterion 6: PASS — mean wall niched {niched:?} vs segmented {segmented:?} at population 300"
    );
}

#[test]
fn c07_local_swap_never_hurts() {
    let mut traces = lock();
    let weights = FitnessWeights::default();
    let library = enumerate_pattern_library();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC7);
    let mut improved = 0u32;
    for _ in 0..50 {
        let instance = toy_instance(&library, &mut rng, u128::MAX);
        for _ in 0..200 {
            let mut chromosome = random_chromosome(&instance, &mut rng);
            let before = total_fitness(&mut chromosome, &instance, &weights);
            let shortfall = chromosome.cached_shortfall.unwrap();
            improved += u32::from(local_swap_pass(
                &mut chromosome,
                &instance,
                SwapIntensity::Max,
                1.0,
                &mut rng,
            ));
            let cached_after = total_fitness(&mut chromosome, &instance, &weights);
            let mut fresh = Chromosome::new(chromosome.genes.clone());
            let after = total_fitness(&mut fresh, &instance, &weights);
            assert_eq!(cached_after, after, "swap pass left stale caches behind");
            assert!(after <= before, "swap pass raised fitness {before} -> {after}");
            assert_eq!(
                fresh.cached_shortfall.unwrap(),
                shortfall,
                "swap pass changed the coverage shortfall"
            );
        }
    }

    // Directional arm: on the fluctuating ward, runs with the max-intensity
    // swap must not end worse on average than runs without it.
    let instance = fluctuating_instance();
    let mut means = [0u64; 2];
    for (slot, swap) in [(0, false), (1, true)] {
        for s in 1..=10u64 {
            let mut config = GAConfig {
                population_size: 300,
                seed: 5500 + s,
                ..GAConfig::default()
            };
            if swap {
                config.extensions.swap_intensity = SwapIntensity::Max;
            }
            means[slot] += run_recorded(&instance, &config, &weights, &mut traces).best_fitness;
        }
    }
    let (without, with) = (means[0] as f64 / 10.0, means[1] as f64 / 10.0);
    assert!(
        with <= without,
        "mean best fitness with swap {with} worse than without {without}"
    );
    println!(
        "criterion 7: PASS — 10000 fuzzed passes never hurt ({improved} improved); fluctuating mean {with} with swap vs {without} without"
    );
}

#[test]
fn c08_elitism_is_monotone_in_every_run() {
    let mut traces = lock();
    let weights = FitnessWeights::default();
    let instance = generate_instance(&ArchetypeSpec::new(ArchetypeKind::Normal, 77)).unwrap();
    for s in 1..=10u64 {
        let config = GAConfig {
            seed: 800 + s,
            ..GAConfig::default()
        };
        run_recorded(&instance, &config, &weights, &mut traces);
    }
    for trace in traces.iter() {
        assert_monotone(trace);
    }
    let steps: usize = traces.iter().map(|t| t.len().saturating_sub(1)).sum();
    println!(
        "criterion 8: PASS — {} elitism traces, {steps} generation steps, all non-increasing",
        traces.len()
    );
}

#[test]
fn c09_lp_export_prices_every_assignment_like_the_fitness() {
    let _guard = lock();
    let library = enumerate_pattern_library();
    let weights = FitnessWeights::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC9);
    let mut assignments = 0u64;
    for _ in 0..20 {
        let mut instance = toy_instance(&library, &mut rng, 50_000);
        // Previous-week carries must price into the objective too.
        for nurse in instance.nurses.iter_mut() {
            if rng.random::<f64>() < 0.5 {
                nurse.prev_penalty = Some(rng.random_range(0..=20));
            }
        }
        let mut buf = Vec::new();
        export_lp(&instance, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let pos = |kw: &str| text.find(kw).unwrap_or_else(|| panic!("missing '{kw}'"));
        assert!(pos("minimize") < pos("subject to"));
        assert!(pos("subject to") < pos("integers"));
        assert!(pos("integers") < pos("end"));
        let objective = parse_lp_objective(&text).unwrap();

        let sizes: Vec<usize> = instance.nurses.iter().map(|n| n.alphabet_size()).collect();
        let mut counters = vec![0usize; sizes.len()];
        'space: loop {
            let genes: Vec<_> = counters
                .iter()
                .zip(&instance.nurses)
                .map(|(&k, nurse)| nurse.nth_legal(k))
                .collect();
            let lp_value: u32 = genes
                .iter()
                .enumerate()
                .map(|(i, &j)| objective[&(i + 1, j)])
                .sum();
            let chromosome = Chromosome::new(genes);
            assert_eq!(
                lp_value,
                preference_cost(&chromosome, &instance, &weights),
                "LP objective disagrees with the preference cost"
            );
            assignments += 1;
            let mut pos = 0;
            loop {
                counters[pos] += 1;
                if counters[pos] < sizes[pos] {
                    break;
                }
                counters[pos] = 0;
                pos += 1;
                if pos == sizes.len() {
                    break 'space;
                }
            }
        }
    }
    println!(
        "criterion 9: PASS — {assignments} enumerated assignments across 20 instances price identically; keywords in order"
    );
}

#[test]
fn c10_cli_outputs_are_byte_deterministic() {
    let _guard = lock();
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name);
    let bin = || {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_rosterga"));
        cmd.stderr(Stdio::null());
        cmd
    };

    let status = bin()
        .args(["generate", "--archetype", "normal", "--seed", "11", "--output-dir"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success(), "generate failed");

    let solve = |target: &str| {
        let status = bin()
            .arg("solve")
            .arg("--demand")
            .arg(path("demand.txt"))
            .arg("--qualifications")
            .arg(path("qualifications.txt"))
            .arg("--wishes")
            .arg(path("wishes.txt"))
            .arg("--patterns")
            .arg(path("patterns.txt"))
            .arg("--penalties")
            .arg(path("penalties.txt"))
            .args(["--seed", "401", "--output"])
            .arg(path(target))
            .status()
            .unwrap();
        status.code()
    };
    let first = solve("roster_a.txt");
    let second = solve("roster_b.txt");
    assert_eq!(first, second, "solve exit codes differ between identical runs");
    assert!(matches!(first, Some(0) | Some(3)), "unexpected solve exit {first:?}");
    let roster_a = std::fs::read(path("roster_a.txt")).unwrap();
    let roster_b = std::fs::read(path("roster_b.txt")).unwrap();
    assert!(!roster_a.is_empty());
    assert_eq!(roster_a, roster_b, "roster bytes differ");

    let export = |target: &str| {
        let status = bin()
            .args(["export-lp", "--archetype", "fluctuating", "--instance-seed", "7", "--output"])
            .arg(path(target))
            .status()
            .unwrap();
        assert!(status.success(), "export-lp failed");
    };
    export("prog_a.lp");
    export("prog_b.lp");
    let lp_a = std::fs::read(path("prog_a.lp")).unwrap();
    assert!(!lp_a.is_empty());
    assert_eq!(lp_a, std::fs::read(path("prog_b.lp")).unwrap(), "LP bytes differ");

    std::fs::write(
        path("grid.toml"),
        r#"
repetitions = 3
base_seed = 900

[[instances]]
name = "mini"
archetype = "normal"
seed = 5

[[configs]]
name = "plain"
population = 30
max_generations = 4

[[configs]]
name = "swapped"
population = 30
max_generations = 4
swap = "max"
"#,
    )
    .unwrap();
    let experiment = |target: &str, threads: &str| {
        let status = bin()
            .arg("experiment")
            .arg("--grid")
            .arg(path("grid.toml"))
            .arg("--output")
            .arg(path(target))
            .env("ROSTERGA_THREADS", threads)
            .status()
            .unwrap();
        assert!(status.success(), "experiment failed");
    };
    experiment("runs_a.csv", "1");
    experiment("runs_b.csv", "4");
    let csv_a = std::fs::read(path("runs_a.csv")).unwrap();
    assert!(!csv_a.is_empty());
    assert_eq!(
        csv_a,
        std::fs::read(path("runs_b.csv")).unwrap(),
        "CSV bytes differ across thread counts"
    );
    println!("criterion 10: PASS — roster, LP, and CSV are byte-identical across repeated runs");
}

#[test]
fn c11_bounds_suite() {
    let _guard = lock();
    let mut rng = ChaCha8Rng::seed_from_u64(0xCB);
    for g0 in [1u32, 2, 3, 7, 20, 100] {
        let floor = g0.div_ceil(3);
        let cap = 3 * g0;
        let mut g = g0;
        for _ in 0..10_000 {
            g = learn_weight(g, rng.random::<f64>() < 0.5, g0);
            assert!((floor..=cap).contains(&g), "weight {g} left [{floor}, {cap}]");
        }
        for _ in 0..=cap {
            g = learn_weight(g, true, g0);
        }
        assert_eq!(g, floor, "a long feasible streak must settle on the floor");
        for _ in 0..=3 * cap {
            g = learn_weight(g, false, g0);
        }
        assert_eq!(g, cap, "a long infeasible streak must settle on the cap");
    }

    assert_eq!(shrink_population(1200, 1200, 10), 1188);
    for initial in [9usize, 10, 300, 1200] {
        let floor = initial.div_ceil(3);
        let mut current = initial;
        for _ in 0..5_000 {
            current = shrink_population(current, initial, 10);
            assert!(current >= floor, "population {current} fell below floor {floor}");
        }
        assert_eq!(current, floor, "shrinking must converge on the floor");
        assert_eq!(shrink_population(initial, initial, 1000), floor);
    }

    assert_eq!(intelligent_mutation_rate(0, 0, 0.01), 0.005);
    assert_eq!(intelligent_mutation_rate(1_000_000, 0, 0.01), 1.0);
    assert!(intelligent_mutation_rate(0, 0, 0.0) == 0.0);
    println!(
        "criterion 11: PASS — learning weight clamped, shrink floor respected, half-base mutation rate 0.005 exact"
    );
}
