//! Acceptance criteria 1 to 12. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::{cell_oracle, rel_err, CellProblem, PivotRule};
use ffr_core::asymptotic::{AsymptoticScenario, AsymptoticSolver};
use ffr_core::harness::{
    asymptotic_sweep, draw_trial, run_compare, run_experiment, run_mse, run_sensitivity, write_outputs,
    ExperimentConfig, ExperimentKind,
};
use ffr_core::optimal::{
    naive_power, optimal_allocate, simplified_allocate, solve_cell_system, CellOutcome, GridSpec,
    JointAllocationResult,
};
use ffr_core::pingpong::{check_interference_function_properties, run_pingpong, PingPongOptions, PingPongStatus};
use ffr_core::system::{Link, PathLossModel, SystemParams};
use ffr_core::Kernel64;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit: Duration, detail: String) -> Outcome {
    ensure(elapsed < limit, format!("{detail}; {:.1}s (limit {}s)", elapsed.as_secs_f64(), limit.as_secs()))
}

struct Ctx {
    kernel: Kernel64,
    params: SystemParams,
    /// Asymptotic pivot distance at α = 0.5 and 10 Mbps.
    d_half: f64,
}

fn near(links: &[Link], d: f64) -> Vec<Link> {
    links.iter().copied().filter(|l| l.x_m < d).collect()
}

fn binary(r: &JointAllocationResult) -> bool {
    r.cell_a.split_users() <= 1 && r.cell_b.split_users() <= 1
}

fn criterion_1(ctx: &Ctx) -> Outcome {
    let t = Instant::now();
    let k = &ctx.kernel;
    let el = k.e_log(1.0).unwrap();
    let er = k.e_ratio(1.0).unwrap();
    let ys: Vec<f64> = (0..20).map(|i| 10f64.powf(-4.0 + 8.0 * i as f64 / 19.0)).collect();
    let trip = ys
        .iter()
        .map(|&y| rel_err(k.f(k.f_inv(y).unwrap()).unwrap(), y))
        .fold(0.0, f64::max);
    let elapsed = t.elapsed();
    let oracle = (common::e_log(1.0), common::e_ratio(1.0));
    let ok = (el - 0.596347).abs() < 1e-5
        && (er - 0.403653).abs() < 1e-5
        && (el - oracle.0).abs() < 1e-5
        && (er - oracle.1).abs() < 1e-5
        && trip < 1e-6;
    within(elapsed, Duration::from_secs(1), format!("e_log(1) = {el:.7}, e_ratio(1) = {er:.7}, round trip {trip:.1e}"))
        .and_then(|d| ensure(ok, d))
}

fn criterion_2_5_6(ctx: &Ctx) -> (Outcome, Outcome, Outcome) {
    let k = &ctx.kernel;
    let t = Instant::now();
    let (mut solved, mut worst_rate, mut worst_budget, mut splits_ok, mut total_opt) = (0, 0.0f64, 0.0f64, true, 0);
    let (mut dominance, mut worst_dom, mut compared) = (true, f64::INFINITY, 0);
    let alpha = 0.5;
    for i in 0..100u64 {
        let users = if i % 2 == 0 { 5 } else { 25 };
        let (a, b) = draw_trial(&ctx.params, users, 10e6, 2024, i).unwrap();
        let Ok(opt) = optimal_allocate(k, &a, &b, alpha, &GridSpec::default()) else { continue };
        total_opt += 1;
        splits_ok &= binary(&opt);
        let mut arms = vec![opt.clone()];
        let naive = naive_power(k, &a, &b, alpha).unwrap();
        dominance &= opt.q_total <= naive + 1e-9 * naive;
        for d in [0.5 * ctx.d_half, ctx.d_half, 1.2 * ctx.d_half] {
            if let Ok(s) = simplified_allocate(k, &a, &b, d, d, alpha, &PingPongOptions::default()) {
                // relative form of "≥ optimal − 1e-9"
                let margin = (s.q_total - opt.q_total) / opt.q_total;
                worst_dom = worst_dom.min(margin);
                dominance &= margin >= -1e-9;
                compared += 1;
                arms.push(s);
            }
        }
        for r in &arms {
            let (ca, cb) = r.check(k, &a, &b).unwrap();
            for c in [ca, cb] {
                worst_rate = worst_rate.max(c.max_rate_rel_err);
                worst_budget = worst_budget.max(c.band1_err).max(c.band2_err);
            }
        }
        solved += 1;
    }
    let elapsed = t.elapsed();
    let c2 = within(
        elapsed,
        Duration::from_secs(300),
        format!("{solved} scenarios, worst rate error {worst_rate:.1e}, worst budget error {worst_budget:.1e}"),
    )
    .and_then(|d| ensure(solved >= 90 && worst_rate <= 1e-6 && worst_budget <= 1e-9, d));
    let c5 = ensure(splits_ok && total_opt > 0, format!("{total_opt} optimal solutions, at most one split user per cell: {splits_ok}"));
    let c6 = ensure(
        dominance && compared > 0,
        format!("{compared} simplified allocations, smallest relative margin over optimal {worst_dom:.2e}; optimal below naive"),
    );
    (c2, c5, c6)
}

fn criterion_3(ctx: &Ctx) -> Outcome {
    let noise = ctx.params.noise_power();
    let levels = [0.0, 1.0, 10.0, 1e3, 1e6].map(|m| m * noise * 1e4);
    let grid: Vec<(f64, f64)> = levels.iter().flat_map(|&x| levels.iter().map(move |&y| (x, y))).collect();
    let (mut checks, mut violations) = (0, 0);
    for trial in 0..10 {
        let (a, b) = draw_trial(&ctx.params, 25, 10e6, 33, trial).unwrap();
        let (a, b) = (near(&a, ctx.d_half), near(&b, ctx.d_half));
        let r = check_interference_function_properties(&ctx.kernel, &a, &b, 0.5, &grid, &[1.5, 2.0, 10.0]).unwrap();
        checks += r.checks;
        violations += r.violations.len();
    }
    ensure(violations == 0 && checks > 0, format!("{checks} checks, {violations} counterexamples"))
}

fn criterion_4(ctx: &Ctx) -> Outcome {
    let k = &ctx.kernel;
    let (mut feasible, mut fast, mut worst) = (0, 0, 0.0f64);
    let high = PingPongOptions {
        initial_q1_b: 1e10 * ctx.params.noise_power(),
        ..PingPongOptions::default()
    };
    let mut trial = 0;
    while feasible < 100 && trial < 300 {
        let (a, b) = draw_trial(&ctx.params, 25, 10e6, 44, trial).unwrap();
        trial += 1;
        let (a, b) = (near(&a, ctx.d_half), near(&b, ctx.d_half));
        let r = run_pingpong(k, &a, &b, 0.5, &PingPongOptions::default()).unwrap();
        if r.status != PingPongStatus::Converged {
            continue;
        }
        feasible += 1;
        if r.iterations <= 15 {
            fast += 1;
        }
        let s = run_pingpong(k, &a, &b, 0.5, &high).unwrap();
        worst = worst
            .max(rel_err(r.cell_a.q1, s.cell_a.q1))
            .max(rel_err(r.cell_b.q1, s.cell_b.q1));
    }
    ensure(
        feasible == 100 && fast >= 95 && worst <= 1e-6,
        format!("{fast}/{feasible} converged within 15 iterations ({trial} drawn), initializations differ by {worst:.1e}"),
    )
}

fn criterion_7(ctx: &Ctx) -> Outcome {
    let t = Instant::now();
    let k = &ctx.kernel;
    let (mut cases, mut worst) = (0, 0.0f64);
    let mut pivots_agree = true;
    for users in 1..=3 {
        for trial in 0..4u64 {
            let (la, lb) = draw_trial(&ctx.params, users, 10e6, 7, trial).unwrap();
            let Ok(joint) = optimal_allocate(k, &la, &lb, 0.5, &GridSpec::default()) else { continue };
            let (qa, qb) = (joint.cell_a.q1, joint.cell_b.q1);
            for frac in [1.0, 0.5] {
                let target = qa * frac;
                if target <= 0.0 {
                    continue;
                }
                let CellOutcome::Solved(s) = solve_cell_system(k, &la, target, qb, 0.5).unwrap() else { continue };
                let p = CellProblem {
                    g1: la.iter().map(|l| l.g1(qb)).collect(),
                    g2: la.iter().map(|l| l.g2).collect(),
                    rate: la.iter().map(|l| l.rate).collect(),
                    alpha: 0.5,
                    q1_target: target,
                };
                let Some(o) = cell_oracle(&p, PivotRule::UnscaledInside) else {
                    return Err(format!("oracle found no solution for K = {users}, trial {trial}"));
                };
                pivots_agree &= Some(o.pivot) == s.pivot_index;
                let xi = s.xi.unwrap();
                let xi_err = if xi.abs() < 1e-6 { (o.xi - xi).abs() } else { rel_err(o.xi, xi) };
                worst = worst
                    .max(rel_err(o.beta1, s.beta1.unwrap()))
                    .max(rel_err(o.beta2, s.beta2.unwrap_or(0.0)))
                    .max(xi_err)
                    .max(rel_err(o.q1, s.q1));
                cases += 1;
            }
        }
    }
    within(
        t.elapsed(),
        Duration::from_secs(600),
        format!("{cases} cells with 1 to 3 users, pivots agree: {pivots_agree}, worst relative error {worst:.1e}"),
    )
    .and_then(|d| ensure(cases >= 12 && pivots_agree && worst <= 1e-3, d))
}

fn criterion_8(ctx: &Ctx) -> Outcome {
    let t = Instant::now();
    let cfg = ExperimentConfig::new(ExperimentKind::AsymptoticSweep);
    let rates = [2e6, 5e6, 10e6, 15e6, 20e6];
    let mut curves = Vec::new();
    for model in [PathLossModel::FREE_SPACE, PathLossModel::URBAN] {
        let params = ctx.params.with_path_loss(model);
        let mut pts = Vec::new();
        for r in rates {
            let s = asymptotic_sweep(&ctx.kernel, &cfg, params, r).unwrap();
            match (s.alpha_opt(), s.d_opt()) {
                (Some(a), Some(d)) => pts.push((a, d)),
                _ => return Err(format!("no feasible reuse factor at s = {}, r_t = {r}", model.exponent)),
            }
        }
        curves.push(pts);
    }
    let nonincreasing = |c: &[(f64, f64)], f: fn(&(f64, f64)) -> f64| c.windows(2).all(|w| f(&w[1]) <= f(&w[0]));
    let mono = curves.iter().all(|c| nonincreasing(c, |p| p.0) && nonincreasing(c, |p| p.1));
    let order = curves[0].iter().zip(&curves[1]).all(|(s2, s3)| s3.0 > s2.0 && s3.1 > s2.1);
    let fmt = |c: &[(f64, f64)]| c.iter().map(|p| format!("{:.3}/{:.0}m", p.0, p.1)).collect::<Vec<_>>().join(" ");
    within(
        t.elapsed(),
        Duration::from_secs(1800),
        format!("alpha_opt/d_opt over 2..20 Mbps: s=2 [{}], s=3 [{}]", fmt(&curves[0]), fmt(&curves[1])),
    )
    .and_then(|d| ensure(mono && order, d))
}

fn criterion_9(_ctx: &Ctx) -> Outcome {
    let t = Instant::now();
    let mut cfg = ExperimentConfig::new(ExperimentKind::Compare);
    cfg.trials = 50;
    cfg.seed = 9;
    cfg.r_t_bps = Some(vec![10e6]);
    cfg.k_per_cell = Some(vec![25, 50]);
    let rows = run_compare(&Kernel64::default(), &cfg).unwrap();
    let (k25, k50) = (&rows[0], &rows[1]);
    let dev = (k50.mean_q_opt - k50.q_t_asymptotic).abs() / k50.q_t_asymptotic;
    let ok = k50.mean_rel_gap <= k25.mean_rel_gap && dev <= 0.1 && k25.check_failures + k50.check_failures == 0;
    within(
        t.elapsed(),
        Duration::from_secs(7200),
        format!(
            "mean gap {:.2}% at K=25, {:.2}% at K=50; mean Q_T(K=50) {:.3e} vs limit {:.3e} ({:.1}%); {} + {} trials",
            100.0 * k25.mean_rel_gap,
            100.0 * k50.mean_rel_gap,
            k50.mean_q_opt,
            k50.q_t_asymptotic,
            100.0 * dev,
            k25.trials,
            k50.trials
        ),
    )
    .and_then(|d| ensure(ok, d))
}

fn criterion_10(_ctx: &Ctx) -> Outcome {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Sensitivity);
    cfg.trials = 50;
    cfg.seed = 10;
    let curve = run_sensitivity(&Kernel64::default(), &cfg).unwrap();
    let Some(arg) = curve.argmin() else { return Err("no pivot distance feasible on every trial".into()) };
    let step = curve.grid_step();
    ensure(
        (arg - curve.d_opt_m).abs() <= step,
        format!("argmin {arg:.1} m, d_opt {:.1} m, grid step {step:.1} m", curve.d_opt_m),
    )
}

fn criterion_11(_ctx: &Ctx) -> Outcome {
    let mut cfg = ExperimentConfig::new(ExperimentKind::MseConvergence);
    cfg.trials = 50;
    cfg.seed = 11;
    let points = run_mse(&Kernel64::default(), &cfg).unwrap();
    let decreasing = points.windows(2).all(|w| w[1].nmse < w[0].nmse);
    let list = points.iter().map(|p| format!("K={}: {:.2e}", p.k_per_cell, p.nmse)).collect::<Vec<_>>().join(", ");
    ensure(decreasing, format!("NMSE {list}"))
}

fn criterion_12(_ctx: &Ctx) -> Outcome {
    let k = Kernel64::default();
    let mut cfg = ExperimentConfig::new(ExperimentKind::Compare);
    cfg.trials = 4;
    cfg.seed = 12;
    cfg.r_t_bps = Some(vec![5e6]);
    cfg.k_per_cell = Some(vec![10]);
    cfg.alpha_grid = vec![0.3, 0.5, 0.7];
    let dir = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for (i, kind) in [ExperimentKind::Compare, ExperimentKind::Compare, ExperimentKind::MseConvergence, ExperimentKind::MseConvergence]
        .into_iter()
        .enumerate()
    {
        cfg.experiment = Some(kind);
        let files = run_experiment(&k, &cfg).unwrap();
        let paths = write_outputs(&dir.path().join(i.to_string()), &files).unwrap();
        runs.push(paths.iter().map(|p| std::fs::read(p).unwrap()).collect::<Vec<_>>());
    }
    ensure(
        runs[0] == runs[1] && runs[2] == runs[3],
        "compare and mse CSVs byte-identical on rerun".into(),
    )
}

fn main() {
    let kernel = Kernel64::default();
    let params = SystemParams::default();
    let scenario = AsymptoticScenario::symmetric(params, 10e6);
    let d_half = AsymptoticSolver::new(&kernel, &scenario)
        .unwrap()
        .search(0.5, &GridSpec::default(), false)
        .unwrap()
        .d_opt();
    let ctx = Ctx { kernel, params, d_half };

    let run = |f: &dyn Fn(&Ctx) -> Outcome| -> Outcome {
        catch_unwind(AssertUnwindSafe(|| f(&ctx))).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        })
    };
    let mut failed = 0;
    let mut report = |n: usize, name: &str, o: Outcome| {
        let (tag, detail) = match o {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {n:>2} {tag}: {name}: {detail}");
    };
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let wanted = |n: usize| only.as_ref().is_none_or(|o| o.contains(&n));

    if wanted(1) {
        report(1, "kernel oracle", run(&criterion_1));
    }
    if wanted(2) || wanted(5) || wanted(6) {
        let (c2, c5, c6) = catch_unwind(AssertUnwindSafe(|| criterion_2_5_6(&ctx)))
            .unwrap_or_else(|_| (Err("panicked".into()), Err("panicked".into()), Err("panicked".into())));
        report(2, "constraint tightness", c2);
        report(5, "binary structure", c5);
        report(6, "optimality dominance", c6);
    }
    if wanted(3) {
        report(3, "interference function properties", run(&criterion_3));
    }
    if wanted(4) {
        report(4, "ping-pong convergence", run(&criterion_4));
    }
    if wanted(7) {
        report(7, "tiny-K oracle", run(&criterion_7));
    }
    if wanted(8) {
        report(8, "reuse factor and pivot distance trends", run(&criterion_8));
    }
    if wanted(9) {
        report(9, "simplified versus optimal", run(&criterion_9));
    }
    if wanted(10) {
        report(10, "pivot distance sensitivity", run(&criterion_10));
    }
    if wanted(11) {
        report(11, "mean square error trend", run(&criterion_11));
    }
    if wanted(12) {
        report(12, "determinism", run(&criterion_12));
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
