//! Acceptance gate: one test per shipped guarantee, exact where the math is
//! exact and desk-scale empirical where the guarantee is asymptotic. Each
//! test prints a single summary line; run with `--nocapture` to see them on
//! success.

mod common;

use std::time::Instant;

use odmp_core::analysis::{compute_metrics, loglog_slope, offline_bruteforce, unevenness};
use odmp_core::dual_learner::{
    estimate_dual_optimum, run_online, run_online_boxed, RunTrace, StepSchedule,
};
use odmp_core::goalset::GoalSpec;
use odmp_core::input_models::{
    batched_order, named_partition, uniform_permutation, Partition, PartitionKind,
};
use odmp_core::instances::{
    gen_assortment_visibility, gen_fair_knapsack, AssortmentVisibilityConfig, FairKnapsackConfig,
    Instance,
};
use odmp_core::oracles::{
    assignment_solve, assortment_exhaustive, assortment_solve, knapsack_exhaustive,
    knapsack_solve, AssignmentStep, AssortmentStep, KnapsackStep, LocalOracle,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const DESK_SEEDS: u64 = 20;

/// Reward-gap constant for the micro-instance sandwich; calibrated once on
/// the frozen case generator (observed max 0.217) and kept fixed. Failures
/// against it are reported, not gating.
const SANDWICH_C: f64 = 0.5;

fn desk_instance(seed: u64, horizon: usize) -> Instance {
    // rho = 10 keeps the fairness constraint active enough that the
    // box-restricted contrast in criterion 9 stays visible at T = 2000.
    gen_fair_knapsack(&FairKnapsackConfig {
        items: 20,
        stakeholders: 5,
        horizon,
        rho: 10.0,
        seed,
    })
    .expect("desk instance")
}

fn desk_trace(inst: &Instance, gamma: f64) -> RunTrace {
    run_online(
        &inst.steps,
        &inst.goal,
        &StepSchedule::diminishing(gamma),
        inst.constants,
    )
    .expect("desk run")
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn final_goalvio(trace: &RunTrace, goal: &GoalSpec) -> f64 {
    let total = trace.cumulative_impact();
    let t = trace.len() as f64;
    let avg: Vec<f64> = total.iter().map(|y| y / t).collect();
    goal.distance_to_goal(&avg)
}

#[test]
fn c01_price_norms_never_exceed_the_guarantee() {
    let started = Instant::now();
    let mut worst_ratio = 0.0f64;
    for seed in 0..DESK_SEEDS {
        let inst = desk_instance(seed, 2000);
        let trace = desk_trace(&inst, 1.0);
        let check = trace.price_norm_check().expect("bound premise holds");
        assert_eq!(
            check.violations, 0,
            "seed {seed}: max price norm {} exceeds bound {}",
            check.max_norm, check.bound
        );
        worst_ratio = worst_ratio.max(check.max_norm / check.bound);
    }
    let secs = started.elapsed().as_secs_f64();
    println!(
        "criterion 1: PASS - price norm within bound on {DESK_SEEDS} runs, \
         worst max/bound {worst_ratio:.2e}, {secs:.1}s"
    );
    assert!(secs < 120.0, "runtime budget exceeded: {secs:.1}s");
}

#[test]
fn c02_goal_violation_decays_at_root_t_rate() {
    let started = Instant::now();
    let horizon = 2000usize;
    for gamma in [0.1, 1.0] {
        let mut mean_series = vec![0.0f64; horizon];
        let mut ts = Vec::new();
        for seed in 0..DESK_SEEDS {
            let inst = desk_instance(seed, horizon);
            let series = compute_metrics(&desk_trace(&inst, gamma));
            if ts.is_empty() {
                ts = series.t.clone();
            }
            for (acc, v) in mean_series.iter_mut().zip(&series.goalvio_avg) {
                *acc += v / DESK_SEEDS as f64;
            }
        }
        let slope = loglog_slope(&ts, &mean_series, horizon / 10..=horizon).unwrap();
        assert!(
            slope <= -0.4,
            "gamma {gamma}: violation slope {slope:.3} too shallow"
        );
        println!(
            "criterion 2: PASS - gamma {gamma}: goal violation log-log slope {slope:.3} <= -0.4"
        );
    }
    let secs = started.elapsed().as_secs_f64();
    println!("criterion 2: runtime {secs:.1}s");
    assert!(secs < 300.0, "runtime budget exceeded: {secs:.1}s");
}

#[test]
fn c03_gamma_tradeoff_is_monotone() {
    let gammas = [0.01, 0.1, 1.0, 10.0, 100.0];
    let mut vio = Vec::new();
    let mut rew = Vec::new();
    for &gamma in &gammas {
        let mut vios = Vec::new();
        let mut rews = Vec::new();
        for seed in 0..DESK_SEEDS {
            let inst = desk_instance(seed, 2000);
            let series = compute_metrics(&desk_trace(&inst, gamma));
            vios.push(series.final_goalvio_avg().unwrap());
            rews.push(series.final_reward_avg().unwrap());
        }
        vio.push(mean(&vios));
        rew.push(mean(&rews));
    }
    // Violation decreasing over 0.01..10. Ties within the 1e-6 tolerance are
    // accepted because the violation saturates at exactly zero once gamma is
    // large enough to finish the transient before T; the decrease itself
    // must still be real across the grid.
    for i in 0..3 {
        assert!(
            vio[i + 1] <= vio[i] + 1e-6,
            "goal violation increased: gamma {} -> {}: {} vs {}",
            gammas[i],
            gammas[i + 1],
            vio[i],
            vio[i + 1]
        );
    }
    assert!(
        vio[0] - vio[3] > 1e-6,
        "no visible gamma tradeoff: {} vs {}",
        vio[0],
        vio[3]
    );
    // Reward nonincreasing over 0.1..100.
    for i in 1..4 {
        assert!(
            rew[i + 1] <= rew[i] + 1e-6,
            "reward increased: gamma {} -> {}: {} vs {}",
            gammas[i],
            gammas[i + 1],
            rew[i],
            rew[i + 1]
        );
    }
    println!(
        "criterion 3: PASS - goalvio {:?} decreasing, reward {:?} nonincreasing",
        vio.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>(),
        rew[1..].iter().map(|r| format!("{r:.1}")).collect::<Vec<_>>()
    );
}

#[test]
fn c04_oracles_match_exhaustive_enumeration() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(41);

    for case in 0..1000 {
        let n = rng.random_range(1..=15);
        let m = rng.random_range(1..=4);
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..10.0)).collect();
        let capacity = rng.random_range(0.0..weights.iter().sum::<f64>() * 0.8);
        let utility: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..n).map(|_| rng.random_range(0.0..5.0)).collect())
            .collect();
        let profit: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
        let step = KnapsackStep {
            weights,
            capacity,
            utility,
            profit,
        };
        let p: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
        let fast = knapsack_solve(&step, &p);
        let slow = knapsack_exhaustive(&step, &p).unwrap();
        let obj = |d: &odmp_core::oracles::LocalDecision| {
            d.reward - p.iter().zip(&d.impact).map(|(a, b)| a * b).sum::<f64>()
        };
        assert!(
            (obj(&fast) - obj(&slow)).abs() <= 1e-9,
            "knapsack case {case}: {} vs {}",
            obj(&fast),
            obj(&slow)
        );
    }

    for case in 0..1000 {
        let m = rng.random_range(1..=4);
        let n_t = rng.random_range(1..=4);
        let profit: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..n_t).map(|_| rng.random_range(0.0..10.0)).collect())
            .collect();
        let workload: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..n_t).map(|_| rng.random_range(0.0..10.0)).collect())
            .collect();
        let step = AssignmentStep { profit, workload };
        let p: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
        let fast = assignment_solve(&step, &p);
        let fast_obj =
            fast.reward - p.iter().zip(&fast.impact).map(|(a, b)| a * b).sum::<f64>();
        let oracle = LocalOracle::Assignment(step);
        let mut best = f64::NEG_INFINITY;
        oracle.for_each_decision(&mut |d| {
            let v = d.reward - p.iter().zip(&d.impact).map(|(a, b)| a * b).sum::<f64>();
            if v > best {
                best = v;
            }
        });
        assert!(
            (fast_obj - best).abs() <= 1e-9,
            "assignment case {case}: {fast_obj} vs {best}"
        );
    }

    for case in 0..500 {
        let m = rng.random_range(1..=12);
        let s = rng.random_range(1..=4.min(m));
        let step = AssortmentStep {
            revenue: (0..m).map(|_| rng.random_range(1.0..10.0)).collect(),
            pref: (0..m).map(|_| rng.random_range(0.05..3.0)).collect(),
            cardinality: s,
            type_id: 0,
        };
        let p: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fast = assortment_solve(&step, &p).unwrap();
        let slow = assortment_exhaustive(&step, &p).unwrap();
        let obj = |d: &odmp_core::oracles::LocalDecision| {
            d.reward - p.iter().zip(&d.impact).map(|(a, b)| a * b).sum::<f64>()
        };
        assert!(
            (obj(&fast) - obj(&slow)).abs() <= 1e-9,
            "assortment case {case}: {} vs {}",
            obj(&fast),
            obj(&slow)
        );
    }

    let secs = started.elapsed().as_secs_f64();
    println!("criterion 4: PASS - 1000 knapsack, 1000 assignment, 500 assortment exact, {secs:.1}s");
    assert!(secs < 180.0, "runtime budget exceeded: {secs:.1}s");
}

#[test]
fn c05_unevenness_scalings_match_the_table() {
    let started = Instant::now();
    let m = 4usize;
    let sched = StepSchedule::diminishing(1.0);
    let horizons = [128usize, 512, 2048, 8192];

    let exponent = |kind: PartitionKind, k: Option<usize>| -> f64 {
        let totals: Vec<f64> = horizons
            .iter()
            .map(|&t| {
                let part = named_partition(kind, t, k).unwrap();
                unevenness(&part, &sched, m).unwrap().total
            })
            .collect();
        loglog_slope(&horizons, &totals, 128..=8192).unwrap()
    };

    let half = exponent(PartitionKind::HalfHalf, None);
    assert!(
        (1.35..=1.65).contains(&half),
        "half-half exponent {half:.3} outside [1.35, 1.65]"
    );
    let week = exponent(PartitionKind::WeekdayWeekend, None);
    assert!(
        (0.35..=0.65).contains(&week),
        "weekday-weekend exponent {week:.3} outside [0.35, 0.65]"
    );
    let periodic = exponent(PartitionKind::KPeriodic, Some(8));
    assert!(
        (0.35..=0.65).contains(&periodic),
        "8-periodic exponent {periodic:.3} outside [0.35, 0.65]"
    );

    let secs = started.elapsed().as_secs_f64();
    println!(
        "criterion 5: PASS - exponents half-half {half:.3}, weekday-weekend {week:.3}, \
         8-periodic {periodic:.3}, {secs:.1}s"
    );
    assert!(secs < 60.0, "runtime budget exceeded: {secs:.1}s");
}

#[test]
fn c06_monotone_coupling_matches_the_transport_lp() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for case in 0..200 {
        let t_total = rng.random_range(2..=6);
        let group_size = rng.random_range(1..=4.min(t_total));
        let mut all: Vec<usize> = (1..=t_total).collect();
        for i in (1..all.len()).rev() {
            let j = rng.random_range(0..=i);
            all.swap(i, j);
        }
        let mut group: Vec<usize> = all[..group_size].to_vec();
        group.sort_unstable();
        let mut rest: Vec<usize> = all[group_size..].to_vec();
        rest.sort_unstable();

        let mut groups = vec![group.clone()];
        if !rest.is_empty() {
            groups.push(rest);
        }
        let labels: Vec<String> = (0..groups.len()).map(|g| format!("g{g}")).collect();
        let partition = Partition::new(groups, labels).unwrap();

        let gamma = rng.random_range(0.3..3.0);
        let m = rng.random_range(1..=4);
        let sched = if rng.random_range(0..2) == 0 {
            StepSchedule::diminishing(gamma)
        } else {
            StepSchedule::constant(gamma, t_total)
        };

        let report = unevenness(&partition, &sched, m).unwrap();
        let src_pos: Vec<f64> = group.iter().map(|&t| report.positions[t - 1]).collect();
        let src_mass = vec![1.0 / group.len() as f64; group.len()];
        let dst_mass = vec![1.0 / t_total as f64; t_total];
        let lp = common::transport_min_cost(&src_pos, &src_mass, &report.positions, &dst_mass);
        let delta = (report.group_w[0] - lp).abs();
        assert!(
            delta <= 1e-9,
            "case {case}: coupling {} vs LP {lp}",
            report.group_w[0]
        );
        worst = worst.max(delta);
    }
    println!("criterion 6: PASS - 200 tiny cases, worst |delta| {worst:.2e}");
}

#[test]
fn c07_duality_sandwich_on_micro_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut soft_hits = 0usize;
    let mut worst_c = 0.0f64;
    let cases = 50usize;
    for case in 0..cases {
        let t_total = rng.random_range(2..=6);
        let n = rng.random_range(1..=4);
        let m = rng.random_range(1..=3);
        let steps: Vec<LocalOracle> = (0..t_total)
            .map(|_| {
                let weights: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..5.0)).collect();
                let capacity = rng.random_range(1.0..weights.iter().sum::<f64>() + 1.0);
                let utility: Vec<Vec<f64>> = (0..m)
                    .map(|_| (0..n).map(|_| rng.random_range(0.0..3.0)).collect())
                    .collect();
                let profit: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..5.0)).collect();
                LocalOracle::Knapsack(KnapsackStep {
                    weights,
                    capacity,
                    utility,
                    profit,
                })
            })
            .collect();
        let goal = GoalSpec::max_min_gap(rng.random_range(1.0..5.0), m, true);

        let z_star = offline_bruteforce(&steps, &goal, None).unwrap().z_star;
        let (_, zf_upper) = estimate_dual_optimum(&steps, &goal, 120, 0).unwrap();
        assert!(
            z_star <= zf_upper + 1e-9,
            "case {case}: weak duality broken: z* {z_star} > zF {zf_upper}"
        );

        let trace = run_online(&steps, &goal, &StepSchedule::diminishing(1.0), None).unwrap();
        let scale = ((m * t_total) as f64).sqrt();
        let c_here = (z_star - trace.total_reward()) / scale;
        worst_c = worst_c.max(c_here);
        if trace.total_reward() >= z_star - SANDWICH_C * scale {
            soft_hits += 1;
        }
    }
    println!(
        "criterion 7: PASS - weak duality exact on {cases} micro-instances (hard); \
         reward sandwich hit {soft_hits}/{cases} at c={SANDWICH_C} (soft, observed max c {worst_c:.3})"
    );
}

#[test]
fn c08_batched_arrivals_cost_reward_not_feasibility() {
    let started = Instant::now();
    let inst = gen_assortment_visibility(&AssortmentVisibilityConfig::default()).unwrap();
    // Revenues here are an order of magnitude above the per-step impact
    // scale, so the dual prices need a step scale above 1 to reach their
    // working range within the horizon.
    let sched = StepSchedule::diminishing(2.0);
    let t_total = inst.horizon();

    let type_ids: Vec<usize> = inst
        .steps
        .iter()
        .map(|s| match s {
            LocalOracle::Assortment(a) => a.type_id,
            _ => unreachable!("assortment instance"),
        })
        .collect();
    let partition = Partition::from_keys(&type_ids).unwrap();

    let run_order = |steps: &[LocalOracle]| -> (f64, f64) {
        let trace = run_online(steps, &inst.goal, &sched, inst.constants).unwrap();
        let series = compute_metrics(&trace);
        (
            series.final_reward_avg().unwrap(),
            series.final_goalvio_avg().unwrap(),
        )
    };

    let (nat_reward, nat_vio) = run_order(&inst.steps);

    let batched_steps = batched_order(&partition).apply(&inst.steps).unwrap();
    let (bat_reward, bat_vio) = run_order(&batched_steps);

    let mut stoch_rewards = Vec::new();
    let mut stoch_vios = Vec::new();
    for seed in 0..DESK_SEEDS {
        let order = uniform_permutation(t_total, seed);
        let steps = order.apply(&inst.steps).unwrap();
        let (r, v) = run_order(&steps);
        stoch_rewards.push(r);
        stoch_vios.push(v);
    }
    let stoch_reward = mean(&stoch_rewards);
    let stoch_vio = mean(&stoch_vios);

    assert!(
        bat_reward <= stoch_reward + 1e-9,
        "batched reward {bat_reward} above stochastic mean {stoch_reward}"
    );
    assert!(
        bat_vio <= 2.0 * stoch_vio + 1e-12,
        "batched goal violation {bat_vio} above 2x stochastic mean {stoch_vio}"
    );
    assert!(
        nat_vio <= 2.0 * stoch_vio + 1e-12,
        "natural-order goal violation {nat_vio} above 2x stochastic mean {stoch_vio}"
    );

    let secs = started.elapsed().as_secs_f64();
    println!(
        "criterion 8: PASS - reward batched {bat_reward:.4} <= stochastic {stoch_reward:.4} \
         (natural {nat_reward:.4}); goalvio batched {bat_vio:.6} / natural {nat_vio:.6} \
         <= 2x stochastic {stoch_vio:.6}, {secs:.1}s"
    );
    assert!(secs < 600.0, "runtime budget exceeded: {secs:.1}s");
}

#[test]
fn c09_box_restriction_degrades_goal_tracking() {
    let sched = StepSchedule::diminishing(1.0);
    let mut standard = Vec::new();
    let mut boxed = Vec::new();
    for seed in 0..DESK_SEEDS {
        let inst = desk_instance(seed, 2000);
        let m = inst.m();
        let trace = run_online(&inst.steps, &inst.goal, &sched, inst.constants).unwrap();
        standard.push(final_goalvio(&trace, &inst.goal));

        let lower = vec![-1000.0; m];
        let upper = vec![20000.0; m];
        let trace =
            run_online_boxed(&inst.steps, &inst.goal, &lower, &upper, &sched, None).unwrap();
        boxed.push(final_goalvio(&trace, &inst.goal));
    }
    let mean_standard = mean(&standard);
    let mean_boxed = mean(&boxed);
    assert!(
        mean_boxed > mean_standard,
        "box-restricted mean violation {mean_boxed} not above standard {mean_standard}"
    );
    println!(
        "criterion 9: PASS - mean goal violation boxed {mean_boxed:.4} > standard {mean_standard:.4} \
         (margin {:.4})",
        mean_boxed - mean_standard
    );
}

#[test]
fn c10_relative_reward_gap_shrinks_with_horizon() {
    let mut gaps = Vec::new();
    for &horizon in &[500usize, 2000] {
        let mut per_seed = Vec::new();
        for seed in 0..DESK_SEEDS {
            let inst = desk_instance(seed, horizon);
            let trace = desk_trace(&inst, 1.0);
            let (_, zf_upper) = estimate_dual_optimum(&inst.steps, &inst.goal, 60, 0).unwrap();
            per_seed.push(zf_upper / horizon as f64 - trace.total_reward() / horizon as f64);
        }
        gaps.push(mean(&per_seed));
    }
    assert!(
        gaps[1] <= gaps[0],
        "per-step optimality gap grew with horizon: T=500 {} vs T=2000 {}",
        gaps[0],
        gaps[1]
    );
    println!(
        "criterion 10: PASS - mean per-step gap to the dual bound {:.3} at T=500 -> {:.3} at T=2000",
        gaps[0], gaps[1]
    );
}
