//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use herdwatch_core::changepoint::ChangeProcess;
use herdwatch_core::reproduce::{
    dataset_threshold, width_non_increasing, width_vanishes, Target, JUMP_FACTOR, RHO_SENSITIVITY,
    SWEEP_ALPHAS, THRESHOLD_WINDOW,
};
use herdwatch_core::social::DEFAULT_REGION_GRID;
use herdwatch_core::{
    agent_decision, cvar_discrete, expected_change_time, learning_region_sweep, monte_carlo,
    partition_scan, ph_pmf, replay, sample_chain, simulate_episode, solve, stopping_set_analysis,
    value_discontinuities, Action, Belief, DiscreteCostDistribution, FixedRule, ObserverAction,
    SolverConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn run(id: u32, name: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    let in_time = elapsed <= limit;
    let passed = out.passed && in_time;
    println!(
        "criterion {id} [{}] {name}: {} ({:.2} s, limit {} s)",
        if passed { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    passed
}

/// Grid scan followed by ternary search on the convex objective.
fn grid_oracle(d: &DiscreteCostDistribution, alpha: f64) -> f64 {
    let atoms = d.atoms();
    let (lo, hi) = (atoms[0].0, atoms[atoms.len() - 1].0);
    if hi == lo {
        return d.cvar_objective(lo, alpha);
    }
    let n = 10_000;
    let step = (hi - lo) / n as f64;
    let z = |i: usize| lo + i as f64 * step;
    let best = (0..=n)
        .min_by(|&a, &b| {
            d.cvar_objective(z(a), alpha)
                .total_cmp(&d.cvar_objective(z(b), alpha))
        })
        .unwrap();
    let (mut a, mut b) = (z(best.saturating_sub(1)), z((best + 1).min(n)));
    for _ in 0..200 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if d.cvar_objective(m1, alpha) <= d.cvar_objective(m2, alpha) {
            b = m2;
        } else {
            a = m1;
        }
    }
    d.cvar_objective(0.5 * (a + b), alpha)
        .min(d.cvar_objective(z(best), alpha))
}

fn criterion_cvar() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    let mut off_atom = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=10);
        let probs = common::probability_vector(&mut rng, n);
        // Round some costs so duplicate atoms occur.
        let atoms: Vec<(f64, f64)> = probs
            .into_iter()
            .map(|p| {
                let v: f64 = rng.random_range(-10.0..10.0);
                (if rng.random_bool(0.3) { v.round() } else { v }, p)
            })
            .collect();
        let alpha = rng.random_range(0.01..=1.0);
        let d = DiscreteCostDistribution::with_tolerance(atoms, 1e-9).unwrap();
        let c = cvar_discrete(&d, alpha).unwrap();
        worst = worst.max((c.value - grid_oracle(&d, alpha)).abs());
        if !d.atoms().iter().any(|&(v, _)| v == c.z_star) {
            off_atom += 1;
        }
    }
    Outcome {
        passed: worst <= 1e-6 && off_atom == 0,
        detail: format!("max |atom scan - grid| = {worst:.2e}, z_star off-atom {off_atom}/1000"),
    }
}

fn criterion_risk_neutral() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut mismatches = 0;
    let mut checked = 0;
    while checked < 10_000 {
        let x = rng.random_range(2..=5);
        let y = rng.random_range(2..=5);
        let model = common::random_model(&mut rng, x, y, 1.0);
        let pi = common::random_belief(&mut rng, x);
        let obs = rng.random_range(0..y);
        // Hand-rolled posterior and expected costs.
        let b = model.observation_matrix();
        let p = model.transition_matrix();
        let c = model.cost_matrix();
        let predicted: Vec<f64> = (0..x)
            .map(|j| (0..x).map(|i| p[(i, j)] * pi.get(i)).sum())
            .collect();
        let joint: Vec<f64> = (0..x).map(|j| predicted[j] * b[(j, obs)]).collect();
        let norm: f64 = joint.iter().sum();
        let expected = |a: usize| (0..x).map(|j| joint[j] / norm * c[(j, a)]).sum::<f64>();
        let oracle = if expected(0) <= expected(1) {
            Action::Buy
        } else {
            Action::Sell
        };
        if agent_decision(&model, &pi, obs).unwrap() != oracle {
            mismatches += 1;
        }
        checked += 1;
    }
    Outcome {
        passed: mismatches == 0,
        detail: format!("{mismatches} mismatches in {checked} triples"),
    }
}

fn criterion_partition_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut violations = 0;
    let mut max_seen = [0usize; 5];
    for i in 0..200 {
        let y = 2 + i % 3;
        let model = common::certified_model(&mut rng, y);
        let table = partition_scan(&model, 10_000).unwrap();
        let k = table.distinct_profiles();
        max_seen[y] = max_seen[y].max(k);
        if k > y + 1 {
            violations += 1;
        }
    }
    Outcome {
        passed: violations == 0,
        detail: format!(
            "{violations}/200 models exceed Y+1; max profiles seen Y=2:{} Y=3:{} Y=4:{}",
            max_seen[2], max_seen[3], max_seen[4]
        ),
    }
}

fn criterion_region_figures() -> Outcome {
    let fig1 = Target::Fig1.config().agent_model().unwrap();
    let fig2 = Target::Fig2.config().agent_model().unwrap();
    let rows1 = learning_region_sweep(&fig1, &SWEEP_ALPHAS, DEFAULT_REGION_GRID).unwrap();
    let rows2 = learning_region_sweep(&fig2, &SWEEP_ALPHAS, DEFAULT_REGION_GRID).unwrap();
    let mono = width_non_increasing(&rows1);
    let vanishes = width_vanishes(&rows2, 0.5);
    let fmt = |rows: &[herdwatch_core::RegionRow]| {
        rows.iter()
            .map(|r| format!("{:.3}", r.width))
            .collect::<Vec<_>>()
            .join(",")
    };
    Outcome {
        passed: mono && vanishes,
        detail: format!(
            "fig1 non-increasing={mono} widths[{}]; fig2 vanishes={vanishes} widths[{}]",
            fmt(&rows1),
            fmt(&rows2)
        ),
    }
}

fn criterion_nonconvex() -> Outcome {
    let cfg = Target::Fig3.config();
    let model = cfg.agent_model().unwrap();
    let obs = cfg.require_observer().unwrap();
    let policy = solve(&model, &obs, &SolverConfig::default()).unwrap();
    let report = stopping_set_analysis(&policy);
    let jumps = value_discontinuities(&policy, JUMP_FACTOR);
    Outcome {
        passed: report.intervals.len() >= 2 && !jumps.is_empty(),
        detail: format!(
            "stop intervals {:?}, jumps above {JUMP_FACTOR}x: {}",
            report
                .intervals
                .iter()
                .map(|(a, b)| format!("[{a:.4},{b:.4}]"))
                .collect::<Vec<_>>(),
            jumps.len()
        ),
    }
}

fn criterion_dataset_thresholds() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for target in [Target::Skype, Target::Ipod] {
        let published = target.published_threshold().unwrap();
        let (report, _) = dataset_threshold(target, 0.9).unwrap();
        let upper = report.upper_threshold();
        let hit = upper.is_some_and(|u| (u - published).abs() <= THRESHOLD_WINDOW);
        ok &= hit;
        let mut part = format!(
            "{target} upper={:.4} (published {published})",
            upper.unwrap_or(f64::NAN)
        );
        if !hit {
            let sens: Vec<String> = RHO_SENSITIVITY
                .iter()
                .map(|&rho| {
                    let (r, _) = dataset_threshold(target, rho).unwrap();
                    format!("rho {rho}: {:.4}", r.upper_threshold().unwrap_or(f64::NAN))
                })
                .collect();
            part += &format!(" sensitivity [{}]", sens.join(", "));
        }
        parts.push(part);
    }
    Outcome {
        passed: ok,
        detail: parts.join("; "),
    }
}

fn criterion_dp_consistency() -> Outcome {
    let mut worst_residual: f64 = 0.0;
    let mut worst_shift: f64 = 0.0;
    let mut above_stop = 0;
    let mut count_mismatch = Vec::new();
    for target in [Target::Fig3, Target::Skype, Target::Ipod] {
        let cfg = target.config();
        let model = cfg.agent_model().unwrap();
        let obs = cfg.require_observer().unwrap();
        let fine = solve(&model, &obs, &SolverConfig::default()).unwrap();
        let coarse = solve(
            &model,
            &obs,
            &SolverConfig {
                grid_points: 1001,
                ..Default::default()
            },
        )
        .unwrap();
        worst_residual =
            worst_residual.max(fine.bellman_residuals().into_iter().fold(0.0, f64::max));
        let f = obs.false_alarm_weights();
        above_stop += fine
            .grid
            .iter()
            .zip(&fine.values)
            .filter(|(p, v)| **v > f[0] * (1.0 - **p) + f[1] * **p + 1e-12)
            .count();
        let tf = stopping_set_analysis(&fine).thresholds;
        let tc = stopping_set_analysis(&coarse).thresholds;
        if tf.len() != tc.len() {
            count_mismatch.push(target.name());
        } else {
            for (a, b) in tf.iter().zip(&tc) {
                worst_shift = worst_shift.max((a - b).abs());
            }
        }
    }
    let cell = 1.0 / 1000.0;
    Outcome {
        passed: worst_residual <= 1e-9 && worst_shift < 2.0 * cell && above_stop == 0 && count_mismatch.is_empty(),
        detail: format!(
            "max residual {worst_residual:.2e}, max threshold shift {:.2} cells, V > f'pi at {above_stop} points, threshold count mismatch {:?}",
            worst_shift / cell,
            count_mismatch
        ),
    }
}

fn criterion_simulation() -> Outcome {
    // Round trip.
    let skype = Target::Skype.config();
    let model = skype.agent_model().unwrap();
    let obs = skype.require_observer().unwrap();
    let pi0 = Belief::new(vec![0.1, 0.9]).unwrap();
    let cont = FixedRule(ObserverAction::Continue);
    let mut worst: f64 = 0.0;
    for seed in 0..200 {
        let t = simulate_episode(&model, &obs, &cont, &pi0, 100, seed).unwrap();
        let r = replay(&model, &cont, &pi0, &t.actions()).unwrap();
        for (s, b) in t.steps.iter().zip(&r.beliefs[1..]) {
            for x in 0..2 {
                worst = worst.max((s.pi.get(x) - b.get(x)).abs());
            }
        }
    }
    let round_trip = worst <= 1e-12;

    // Stop at the first decision: false alarm iff no change at step 1.
    let pre = Belief::point_mass(2, 1);
    let m = monte_carlo(
        &model,
        &obs,
        &FixedRule(ObserverAction::Stop),
        &pre,
        100_000,
        10,
        9,
    )
    .unwrap();
    let fa = m.false_alarm_rate;
    let z = (fa.mean - 0.96).abs() / fa.std_error;
    let fa_ok = z <= 3.0;

    // Every fig3 episode stops.
    let f3 = Target::Fig3.config();
    let f3_model = f3.agent_model().unwrap();
    let f3_obs = f3.require_observer().unwrap();
    let policy = solve(&f3_model, &f3_obs, &SolverConfig::default()).unwrap();
    let f3_pi0 = f3.pi0().unwrap();
    let metrics = monte_carlo(&f3_model, &f3_obs, &policy, &f3_pi0, 10_000, 1000, 11).unwrap();
    let all_stop = metrics.censored == 0;

    Outcome {
        passed: round_trip && fa_ok && all_stop,
        detail: format!(
            "replay max err {worst:.1e}; stop-at-1 false alarms {:.4} +/- {:.4} vs 0.96 ({z:.2} SE); fig3 censored {}/10000",
            fa.mean, fa.std_error, metrics.censored
        ),
    }
}

fn criterion_phase_type() -> Outcome {
    let pre = Belief::point_mass(2, 1);
    let g = ChangeProcess::geometric(0.04, pre.clone()).unwrap();
    let pmf_err = (1..=200)
        .map(|k| (ph_pmf(&g, k) - 0.96f64.powi(k as i32 - 1) * 0.04).abs())
        .fold(ph_pmf(&g, 0).abs(), f64::max);
    let e25 = expected_change_time(&g).unwrap();
    let g11 = ChangeProcess::geometric(0.11, pre).unwrap();
    let e9 = expected_change_time(&g11).unwrap();
    let n = 100_000;
    let mean = (0..n)
        .map(|i| {
            sample_chain(&g, 5_000, 7_000_000 + i)
                .tau0
                .expect("absorbed") as f64
        })
        .sum::<f64>()
        / n as f64;
    let passed = pmf_err <= 1e-15
        && (e25 - 25.0).abs() <= 1e-9
        && (e9 - 1.0 / 0.11).abs() <= 1e-9
        && (mean - 25.0).abs() <= 0.25;
    Outcome {
        passed,
        detail: format!(
            "pmf max err {pmf_err:.1e}; E[tau0] = {e25} and {e9}; sampled mean {mean:.3} (1e5 chains)"
        ),
    }
}

fn main() {
    let s = Duration::from_secs;
    let results = [
        run(1, "CVaR atom scan vs dense z-grid", s(10), criterion_cvar),
        run(2, "risk-neutral reduction", s(10), criterion_risk_neutral),
        run(
            3,
            "at most Y+1 decision profiles",
            s(60),
            criterion_partition_bound,
        ),
        run(
            4,
            "social-learning region vs alpha (figs 1-2)",
            s(30),
            criterion_region_figures,
        ),
        run(
            5,
            "non-convex stopping set (fig 3)",
            s(60),
            criterion_nonconvex,
        ),
        run(
            6,
            "dataset stopping thresholds",
            s(120),
            criterion_dataset_thresholds,
        ),
        run(
            7,
            "DP internal consistency",
            s(120),
            criterion_dp_consistency,
        ),
        run(8, "simulation consistency", s(120), criterion_simulation),
        run(9, "phase-type change time", s(60), criterion_phase_type),
    ];
    let failed = results.iter().filter(|p| !**p).count();
    println!(
        "acceptance: {}/{} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
