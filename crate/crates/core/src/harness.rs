//! Experiment configuration and Monte Carlo drivers.
//!
//! Every experiment is a pure function of its [`ExperimentConfig`]: trial
//! `i` draws its users from `ChaCha8Rng::seed_from_u64(seed)` on stream
//! `i`, trials run in parallel, and results are aggregated in trial order,
//! so identical configs produce byte-identical CSV files.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotic::{optimum_csv, reuse_factor_sweep, sweep_csv, AsymptoticScenario, AsymptoticSolver, QuadSpec, SweepResult};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::optimal::{grid_csv, naive_power, optimal_allocate, simplified_allocate, GridSpec, JointAllocationResult, Method};
use crate::pingpong::PingPongOptions;
use crate::roots::golden_min;
use crate::system::{generate_with_rng, Link, PathLossModel, Scenario, SystemParams};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    AsymptoticSweep,
    Compare,
    Sensitivity,
    MseConvergence,
    Allocate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocateMethod {
    Optimal,
    Simplified,
}

fn default_trials() -> usize {
    200
}

fn default_alpha_grid() -> Vec<Real> {
    (0..=10).map(|i| i as Real / 10.0).collect()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

fn default_trial_grid() -> GridSpec {
    GridSpec {
        points: 8,
        refinements: 0,
        ..GridSpec::default()
    }
}

fn default_true() -> bool {
    true
}

fn default_d_points() -> usize {
    25
}

fn default_alpha_window() -> Real {
    0.2
}

fn default_alpha_tol() -> Real {
    1e-3
}

/// Configuration of one experiment. Unset lists fall back to the defaults
/// of the experiment kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// May be left out when the kind is given on the command line.
    #[serde(default)]
    pub experiment: Option<ExperimentKind>,
    #[serde(default)]
    pub system: SystemParams,
    #[serde(default)]
    pub k_per_cell: Option<Vec<usize>>,
    /// Total rate of each cell in bits/s.
    #[serde(default)]
    pub r_t_bps: Option<Vec<Real>>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_alpha_grid")]
    pub alpha_grid: Vec<Real>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Path-loss exponents of the asymptotic sweep (2 and/or 3); defaults
    /// to the exponent of `system`.
    #[serde(default)]
    pub path_loss_exponents: Option<Vec<Real>>,
    /// Reused-band power search of the asymptotic solver and of `allocate`.
    #[serde(default)]
    pub grid: GridSpec,
    /// Reused-band power search of the optimal allocator inside trials.
    #[serde(default = "default_trial_grid")]
    pub trial_grid: GridSpec,
    #[serde(default)]
    pub quad: QuadSpec,
    /// Refine the optimal reuse factor between grid points.
    #[serde(default = "default_true")]
    pub refine_alpha: bool,
    /// Reuse factor of the simplified allocator; the asymptotic optimum
    /// when unset.
    #[serde(default)]
    pub fixed_alpha: Option<Real>,
    /// Half-width of the per-trial reuse-factor search of the optimal arm,
    /// centered on the asymptotic optimum.
    #[serde(default = "default_alpha_window")]
    pub trial_alpha_window: Real,
    #[serde(default = "default_alpha_tol")]
    pub trial_alpha_tol: Real,
    /// Number of pivot distances of the sensitivity curve.
    #[serde(default = "default_d_points")]
    pub d_points: usize,
    #[serde(default)]
    pub pingpong: PingPongOptions,
    /// Scenario file of `allocate`.
    #[serde(default)]
    pub scenario: Option<PathBuf>,
    #[serde(default)]
    pub method: Option<AllocateMethod>,
    /// Pivot distance of the simplified allocator in `allocate`.
    #[serde(default)]
    pub d_subopt_m: Option<Real>,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        ExperimentConfig {
            experiment: Some(kind),
            ..serde_json::from_str("{}").expect("every field has a default")
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn kind(&self) -> Result<ExperimentKind> {
        self.experiment
            .ok_or_else(|| Error::config("experiment", "no experiment kind given"))
    }

    pub fn k_list(&self) -> Result<Vec<usize>> {
        Ok(match &self.k_per_cell {
            Some(k) => k.clone(),
            None => match self.kind()? {
                ExperimentKind::Sensitivity => vec![50],
                ExperimentKind::MseConvergence => vec![10, 20, 30, 40, 50],
                _ => vec![25, 50],
            },
        })
    }

    pub fn r_t_list(&self) -> Result<Vec<Real>> {
        Ok(match &self.r_t_bps {
            Some(r) => r.clone(),
            None => match self.kind()? {
                ExperimentKind::Sensitivity | ExperimentKind::MseConvergence => vec![10e6],
                _ => vec![2e6, 5e6, 10e6, 15e6, 20e6],
            },
        })
    }

    pub fn path_loss_models(&self) -> Result<Vec<PathLossModel>> {
        match &self.path_loss_exponents {
            None => Ok(vec![self.system.path_loss]),
            Some(list) => list
                .iter()
                .map(|&s| PathLossModel::for_exponent(s).map_err(|_| Error::config("path_loss_exponents", format!("no preset for exponent {s}"))))
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let kind = self.kind()?;
        self.system.validate()?;
        self.grid.validate()?;
        self.trial_grid.validate().map_err(|e| match e {
            Error::Config { field, message } => Error::config(field.replace("grid", "trial_grid"), message),
            e => e,
        })?;
        self.pingpong.validate()?;
        if self.trials == 0 {
            return Err(Error::config("trials", "need at least one trial"));
        }
        let r_t = self.r_t_list()?;
        if r_t.is_empty() || r_t.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::config("r_t_bps", "rates must be positive and finite"));
        }
        let k = self.k_list()?;
        if k.is_empty() || k.contains(&0) {
            return Err(Error::config("k_per_cell", "user counts must be positive"));
        }
        if kind == ExperimentKind::MseConvergence && k.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("k_per_cell", "must be strictly ascending"));
        }
        if self.alpha_grid.len() < 3 || self.alpha_grid.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::config("alpha_grid", "need at least 3 values in [0, 1]"));
        }
        if let Some(a) = self.fixed_alpha {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::config("fixed_alpha", "must lie in [0, 1]"));
            }
        }
        if !(self.trial_alpha_window > 0.0 && self.trial_alpha_tol > 0.0) {
            return Err(Error::config("trial_alpha_window", "window and tolerance must be positive"));
        }
        if kind == ExperimentKind::Sensitivity && self.d_points < 2 {
            return Err(Error::config("d_points", "need at least 2 pivot distances"));
        }
        if kind == ExperimentKind::Allocate && self.scenario.is_none() {
            return Err(Error::config("scenario", "allocate needs a scenario file"));
        }
        self.path_loss_models()?;
        Ok(())
    }
}

/// The generator of trial `trial` under `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Users of trial `trial`: `k` per cell, uniform on `[ε, D]`, each cell
/// carrying `r_t_bps` in total.
pub fn draw_trial(params: &SystemParams, k: usize, r_t_bps: Real, seed: u64, trial: u64) -> Result<(Vec<Link>, Vec<Link>)> {
    let per_user = r_t_bps * std::f64::consts::LN_2 / k as Real;
    let (a, b) = generate_with_rng(params, k, per_user, &mut trial_rng(seed, trial));
    Ok((a.links(params)?, b.links(params)?))
}

/// Asymptotic sweep over `α` for one rate.
pub fn asymptotic_sweep(kernel: &Kernel<Real>, cfg: &ExperimentConfig, params: SystemParams, r_t_bps: Real) -> Result<SweepResult> {
    let scenario = AsymptoticScenario::symmetric(params, r_t_bps).with_quad(cfg.quad);
    let solver = AsymptoticSolver::new(kernel, &scenario)?;
    reuse_factor_sweep(&solver, &cfg.alpha_grid, &cfg.grid, cfg.refine_alpha)
}

/// Reuse factor and pivot distance given to the simplified allocator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Operating {
    pub alpha: Real,
    pub d_m: Real,
    pub q_t_asymptotic: Real,
}

fn operating_point(kernel: &Kernel<Real>, cfg: &ExperimentConfig, r_t_bps: Real) -> Result<Operating> {
    let scenario = AsymptoticScenario::symmetric(cfg.system, r_t_bps).with_quad(cfg.quad);
    let solver = AsymptoticSolver::new(kernel, &scenario)?;
    let best = reuse_factor_sweep(&solver, &cfg.alpha_grid, &cfg.grid, cfg.refine_alpha)?
        .best
        .ok_or_else(|| Error::Infeasible(format!("no feasible reuse factor at r_t = {r_t_bps}")))?;
    let at_alpha = match cfg.fixed_alpha {
        Some(a) => solver.search(a, &cfg.grid, false)?,
        None => best,
    };
    Ok(Operating {
        alpha: at_alpha.alpha,
        d_m: at_alpha.d_opt(),
        q_t_asymptotic: best.q_t,
    })
}

/// `min_α` of the optimal total power of one drawn configuration, searched
/// by golden section in a window around `center`. The window slides while
/// the minimum sits on an interior edge.
pub fn min_over_alpha(
    kernel: &Kernel<Real>,
    links_a: &[Link],
    links_b: &[Link],
    center: Real,
    window: Real,
    tol: Real,
    grid: &GridSpec,
) -> Result<Option<(Real, JointAllocationResult)>> {
    let eval = |alpha: Real| -> Result<Option<JointAllocationResult>> {
        match optimal_allocate(kernel, links_a, links_b, alpha, grid) {
            Ok(r) => Ok(Some(r)),
            Err(e) if e.is_infeasible() => Ok(None),
            Err(e) => Err(e),
        }
    };
    let value = |alpha: Real| -> Result<Real> { Ok(eval(alpha)?.map_or(Real::INFINITY, |r| r.q_total)) };
    let (lo_lim, hi_lim) = (tol, 1.0 - tol);
    let mut lo = (center - window).max(lo_lim);
    let mut hi = (center + window).min(hi_lim);
    let mut alpha = center;
    for _ in 0..6 {
        alpha = golden_min(value, lo, hi, tol)?;
        if alpha - lo < 2.0 * tol && lo > lo_lim {
            (lo, hi) = ((lo - window).max(lo_lim), lo + window);
        } else if hi - alpha < 2.0 * tol && hi < hi_lim {
            (lo, hi) = (hi - window, (hi + window).min(hi_lim));
        } else {
            break;
        }
    }
    let mut best: Option<(Real, JointAllocationResult)> = None;
    for a in [alpha, center] {
        if let Some(r) = eval(a)? {
            if best.as_ref().is_none_or(|(_, b)| r.q_total < b.q_total) {
                best = Some((a, r));
            }
        }
    }
    Ok(best)
}

/// Tolerances of the sampled per-trial checks.
const CHECK_RATE_TOL: Real = 1e-6;
const CHECK_BUDGET_TOL: Real = 1e-9;

fn passes_checks(kernel: &Kernel<Real>, r: &JointAllocationResult, a: &[Link], b: &[Link]) -> Result<bool> {
    let (ca, cb) = r.check(kernel, a, b)?;
    Ok([ca, cb].iter().all(|c| {
        c.max_rate_rel_err <= CHECK_RATE_TOL && c.band1_err <= CHECK_BUDGET_TOL && c.band2_err <= CHECK_BUDGET_TOL
    }))
}

/// Summary statistics accumulated in trial order.
fn mean_var(values: &[Real]) -> (Real, Real) {
    let n = values.len() as Real;
    if values.is_empty() {
        return (Real::NAN, Real::NAN);
    }
    let mean = values.iter().sum::<Real>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<Real>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompareRow {
    pub r_t_bps: Real,
    pub k_per_cell: usize,
    pub mean_q_opt: Real,
    pub mean_q_subopt: Real,
    pub var_q_subopt: Real,
    pub q_t_asymptotic: Real,
    /// Trials in the averages.
    pub trials: usize,
    /// Trials dropped because an allocator found no solution.
    pub infeasible: usize,
    /// Mean of the per-trial `(Q_subopt - Q_opt) / Q_opt`.
    pub mean_rel_gap: Real,
    pub alpha_subopt: Real,
    pub d_subopt_m: Real,
    /// Sampled trials whose allocations failed the rate or budget checks.
    pub check_failures: usize,
}

pub const COMPARE_CSV_HEADER: &str = "r_t_bps,k_per_cell,mean_q_opt,mean_q_subopt,var_q_subopt,q_t_asymptotic,trials,infeasible,mean_rel_gap,alpha_subopt,d_subopt_m,check_failures";

pub fn compare_csv(rows: &[CompareRow]) -> String {
    let mut out = format!("{COMPARE_CSV_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{:.16e},{:.16e},{:.16e},{}\n",
            r.r_t_bps,
            r.k_per_cell,
            r.mean_q_opt,
            r.mean_q_subopt,
            r.var_q_subopt,
            r.q_t_asymptotic,
            r.trials,
            r.infeasible,
            r.mean_rel_gap,
            r.alpha_subopt,
            r.d_subopt_m,
            r.check_failures
        ));
    }
    out
}

struct TrialOutcome {
    q_opt: Real,
    q_subopt: Real,
    check_failed: bool,
}

/// Optimal and simplified power on each trial of one `(r_t, K)` cell.
pub fn run_compare(kernel: &Kernel<Real>, cfg: &ExperimentConfig) -> Result<Vec<CompareRow>> {
    let mut rows = Vec::new();
    for r_t in cfg.r_t_list()? {
        let op = operating_point(kernel, cfg, r_t)?;
        for k in cfg.k_list()? {
            let outcomes: Vec<Option<TrialOutcome>> = (0..cfg.trials as u64)
                .into_par_iter()
                .map(|trial| {
                    let (a, b) = draw_trial(&cfg.system, k, r_t, cfg.seed, trial)?;
                    let sub = match simplified_allocate(kernel, &a, &b, op.d_m, op.d_m, op.alpha, &cfg.pingpong) {
                        Ok(s) => s,
                        Err(e) if e.is_infeasible() => return Ok(None),
                        Err(e) => return Err(e),
                    };
                    let Some((_, opt)) = min_over_alpha(
                        kernel,
                        &a,
                        &b,
                        op.alpha,
                        cfg.trial_alpha_window,
                        cfg.trial_alpha_tol,
                        &cfg.trial_grid,
                    )?
                    else {
                        return Ok(None);
                    };
                    let check_failed = trial % 100 == 0
                        && !(passes_checks(kernel, &sub, &a, &b)? && passes_checks(kernel, &opt, &a, &b)?);
                    Ok(Some(TrialOutcome {
                        q_opt: opt.q_total,
                        q_subopt: sub.q_total,
                        check_failed,
                    }))
                })
                .collect::<Result<_>>()?;
            let ok: Vec<&TrialOutcome> = outcomes.iter().flatten().collect();
            let q_opt: Vec<Real> = ok.iter().map(|o| o.q_opt).collect();
            let q_sub: Vec<Real> = ok.iter().map(|o| o.q_subopt).collect();
            let gaps: Vec<Real> = ok.iter().map(|o| (o.q_subopt - o.q_opt) / o.q_opt).collect();
            let (mean_q_opt, _) = mean_var(&q_opt);
            let (mean_q_subopt, var_q_subopt) = mean_var(&q_sub);
            rows.push(CompareRow {
                r_t_bps: r_t,
                k_per_cell: k,
                mean_q_opt,
                mean_q_subopt,
                var_q_subopt,
                q_t_asymptotic: op.q_t_asymptotic,
                trials: ok.len(),
                infeasible: outcomes.len() - ok.len(),
                mean_rel_gap: mean_var(&gaps).0,
                alpha_subopt: op.alpha,
                d_subopt_m: op.d_m,
                check_failures: ok.iter().filter(|o| o.check_failed).count(),
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensitivityPoint {
    pub d_m: Real,
    pub mean_q_subopt: Real,
    pub feasible_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityCurve {
    pub r_t_bps: Real,
    pub k_per_cell: usize,
    pub alpha: Real,
    pub d_opt_m: Real,
    pub trials: usize,
    pub points: Vec<SensitivityPoint>,
}

impl SensitivityCurve {
    pub fn grid_step(&self) -> Real {
        self.points[1].d_m - self.points[0].d_m
    }

    /// Pivot distance of the smallest mean power among distances where
    /// every trial was feasible.
    pub fn argmin(&self) -> Option<Real> {
        self.points
            .iter()
            .filter(|p| p.feasible_trials == self.trials)
            .min_by(|a, b| a.mean_q_subopt.total_cmp(&b.mean_q_subopt))
            .map(|p| p.d_m)
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("d_m,mean_q_subopt,feasible_trials,trials\n");
        for p in &self.points {
            out.push_str(&format!(
                "{:.16e},{:.16e},{},{}\n",
                p.d_m, p.mean_q_subopt, p.feasible_trials, self.trials
            ));
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        format!(
            "r_t_bps,k_per_cell,alpha,d_opt_m,d_argmin_m,grid_step_m\n{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            self.r_t_bps,
            self.k_per_cell,
            self.alpha,
            self.d_opt_m,
            self.argmin().unwrap_or(Real::NAN),
            self.grid_step()
        )
    }
}

/// Mean simplified power as a function of a common pivot distance, on the
/// first rate and user count of the config.
pub fn run_sensitivity(kernel: &Kernel<Real>, cfg: &ExperimentConfig) -> Result<SensitivityCurve> {
    let r_t = cfg.r_t_list()?[0];
    let k = cfg.k_list()?[0];
    let op = operating_point(kernel, cfg, r_t)?;
    let (eps, dmax) = (cfg.system.epsilon_m, cfg.system.cell_radius_m);
    let n = cfg.d_points;
    let ds: Vec<Real> = (0..n).map(|i| eps + (dmax - eps) * i as Real / (n - 1) as Real).collect();
    let per_trial: Vec<Vec<Option<Real>>> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|trial| {
            let (a, b) = draw_trial(&cfg.system, k, r_t, cfg.seed, trial)?;
            ds.iter()
                .map(|&d| match simplified_allocate(kernel, &a, &b, d, d, op.alpha, &cfg.pingpong) {
                    Ok(s) => Ok(Some(s.q_total)),
                    Err(e) if e.is_infeasible() => Ok(None),
                    Err(e) => Err(e),
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let points = ds
        .iter()
        .enumerate()
        .map(|(j, &d)| {
            let vals: Vec<Real> = per_trial.iter().filter_map(|t| t[j]).collect();
            SensitivityPoint {
                d_m: d,
                mean_q_subopt: mean_var(&vals).0,
                feasible_trials: vals.len(),
            }
        })
        .collect();
    Ok(SensitivityCurve {
        r_t_bps: r_t,
        k_per_cell: k,
        alpha: op.alpha,
        d_opt_m: op.d_m,
        trials: cfg.trials,
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MsePoint {
    pub k_per_cell: usize,
    pub r_t_bps: Real,
    /// `E[(Q_T^(K) - Q_T)²] / Q_T²`.
    pub nmse: Real,
    pub nmse_std_err: Real,
    pub q_t_asymptotic: Real,
    pub trials: usize,
    pub infeasible: usize,
}

pub const MSE_CSV_HEADER: &str = "k_per_cell,r_t_bps,nmse,nmse_std_err,q_t_asymptotic,trials,infeasible";

pub fn mse_csv(points: &[MsePoint]) -> String {
    let mut out = format!("{MSE_CSV_HEADER}\n");
    for p in points {
        out.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{},{}\n",
            p.k_per_cell, p.r_t_bps, p.nmse, p.nmse_std_err, p.q_t_asymptotic, p.trials, p.infeasible
        ));
    }
    out
}

/// Normalized squared distance of the per-trial optimal power
/// `min_α Q_T^(K)` to its limit, per user count.
pub fn run_mse(kernel: &Kernel<Real>, cfg: &ExperimentConfig) -> Result<Vec<MsePoint>> {
    let r_t = cfg.r_t_list()?[0];
    let op = operating_point(kernel, cfg, r_t)?;
    let q_t = op.q_t_asymptotic;
    let mut out = Vec::new();
    for k in cfg.k_list()? {
        let q: Vec<Option<Real>> = (0..cfg.trials as u64)
            .into_par_iter()
            .map(|trial| {
                let (a, b) = draw_trial(&cfg.system, k, r_t, cfg.seed, trial)?;
                Ok(min_over_alpha(
                    kernel,
                    &a,
                    &b,
                    op.alpha,
                    cfg.trial_alpha_window,
                    cfg.trial_alpha_tol,
                    &cfg.trial_grid,
                )?
                .map(|(_, r)| r.q_total))
            })
            .collect::<Result<_>>()?;
        let sq: Vec<Real> = q.iter().flatten().map(|v| ((v - q_t) / q_t).powi(2)).collect();
        let (mean, var) = mean_var(&sq);
        out.push(MsePoint {
            k_per_cell: k,
            r_t_bps: r_t,
            nmse: mean,
            nmse_std_err: (var / sq.len() as Real).sqrt(),
            q_t_asymptotic: q_t,
            trials: sq.len(),
            infeasible: q.len() - sq.len(),
        });
    }
    Ok(out)
}

/// Allocation written by `allocate`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationReport {
    #[serde(flatten)]
    pub result: JointAllocationResult,
    /// All users confined to their protected band.
    pub naive_q_total: Option<Real>,
}

pub fn run_allocate(kernel: &Kernel<Real>, cfg: &ExperimentConfig, scenario: &Scenario) -> Result<AllocationReport> {
    scenario.validate()?;
    let params = scenario.system;
    let (a, b) = scenario.pair();
    let (la, lb) = (a.links(&params)?, b.links(&params)?);
    let alpha = params.alpha;
    let result = match cfg.method.unwrap_or(AllocateMethod::Optimal) {
        AllocateMethod::Optimal => optimal_allocate(kernel, &la, &lb, alpha, &cfg.grid)?,
        AllocateMethod::Simplified => {
            let d = cfg
                .d_subopt_m
                .ok_or_else(|| Error::config("d_subopt_m", "the simplified allocator needs a pivot distance"))?;
            simplified_allocate(kernel, &la, &lb, d, d, alpha, &cfg.pingpong)?
        }
    };
    let naive_q_total = if alpha < 1.0 {
        Some(naive_power(kernel, &la, &lb, alpha)?)
    } else {
        None
    };
    Ok(AllocationReport { result, naive_q_total })
}

/// Output files of an experiment as `(file name, contents)`.
pub fn run_experiment(kernel: &Kernel<Real>, cfg: &ExperimentConfig) -> Result<Vec<(String, String)>> {
    cfg.validate()?;
    Ok(match cfg.kind()? {
        ExperimentKind::AsymptoticSweep => {
            let mut files = Vec::new();
            for model in cfg.path_loss_models()? {
                let params = cfg.system.with_path_loss(model);
                let sweeps = cfg
                    .r_t_list()?
                    .into_iter()
                    .map(|r| asymptotic_sweep(kernel, cfg, params, r))
                    .collect::<Result<Vec<_>>>()?;
                let tag = format!("s{}", model.exponent);
                files.push((format!("asymptotic_{tag}.csv"), sweep_csv(&sweeps)));
                files.push((format!("asymptotic_opt_{tag}.csv"), optimum_csv(&sweeps)));
            }
            files
        }
        ExperimentKind::Compare => vec![("compare.csv".into(), compare_csv(&run_compare(kernel, cfg)?))],
        ExperimentKind::Sensitivity => {
            let curve = run_sensitivity(kernel, cfg)?;
            vec![
                ("sensitivity.csv".into(), curve.csv()),
                ("sensitivity_summary.csv".into(), curve.summary_csv()),
            ]
        }
        ExperimentKind::MseConvergence => vec![("mse.csv".into(), mse_csv(&run_mse(kernel, cfg)?))],
        ExperimentKind::Allocate => {
            let path = cfg.scenario.as_ref().expect("validated");
            let scenario = Scenario::read(path)?;
            let report = run_allocate(kernel, cfg, &scenario)?;
            let mut files = vec![("allocation.json".into(), serde_json::to_string_pretty(&report)? + "\n")];
            if report.result.method == Method::Optimal && !report.result.grid_diagnostics.is_empty() {
                files.push(("grid.csv".into(), grid_csv(&report.result.grid_diagnostics)));
            }
            files
        }
    })
}

/// Writes experiment outputs into `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, files: &[(String, String)]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    files
        .iter()
        .map(|(name, body)| {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
            Ok(path)
        })
        .collect()
}
