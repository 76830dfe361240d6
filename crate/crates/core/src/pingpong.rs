//! Best-response iteration on the reused band.
//!
//! Given the power `q̄` the other station spends on the reused band, a cell
//! water-fills its interfering users on a band of size `α` with gains
//! `g1(x, q̄)`. The resulting band power is the cell's response `Ĩ^c(q̄)`.
//! The pair of responses is a standard interference function, so the
//! alternating iteration started from zero increases monotonically to the
//! unique fixed point whenever one exists, and grows without bound
//! otherwise.

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::single_cell::{solve_level, BandShare};
use crate::system::Link;
use crate::Real;

/// Reused-band allocation of one cell against a fixed neighbor power.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceCellSolve {
    /// `None` when the cell has no interfering user.
    pub beta1: Option<Real>,
    pub q1: Real,
    pub per_user: Vec<BandShare>,
    /// Neighbor power the gains were evaluated at.
    pub q1_neighbor: Real,
}

/// The map `Ĩ^c`: water-fills `links` on a band of size `alpha` under
/// `q1_neighbor` watts of interference.
pub fn cell_response(
    kernel: &Kernel<Real>,
    links: &[Link],
    q1_neighbor: Real,
    alpha: Real,
) -> Result<InterferenceCellSolve> {
    if !(q1_neighbor >= 0.0) {
        return Err(Error::Domain {
            what: "neighbor reused-band power",
            value: q1_neighbor,
        });
    }
    let users: Vec<(Real, Real)> = links.iter().map(|l| (l.g1(q1_neighbor), l.rate)).collect();
    Ok(match solve_level(kernel, &users, alpha)? {
        None => InterferenceCellSolve {
            beta1: None,
            q1: 0.0,
            per_user: Vec::new(),
            q1_neighbor,
        },
        Some(sol) => {
            let per_user = sol.shares(&users);
            InterferenceCellSolve {
                beta1: Some(sol.beta),
                q1: per_user.iter().map(|s| s.gamma * s.power).sum(),
                per_user,
                q1_neighbor,
            }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PingPongOptions {
    /// Relative tolerance on the distance of each `q1` to the fixed point.
    pub fp_tol: Real,
    pub max_iters: usize,
    /// Starting value of cell B's reused-band power.
    pub initial_q1_b: Real,
    /// Iterates above this power (watts) are declared divergent. When
    /// `None`, `divergence_factor` times the interference-free response
    /// is used.
    pub power_ceiling: Option<Real>,
    pub divergence_factor: Real,
    /// Keep iterating after `fp_tol` is met until the iterates stop moving,
    /// so that the reported allocation is self-consistent to rounding.
    pub polish: bool,
}

impl Default for PingPongOptions {
    fn default() -> Self {
        PingPongOptions {
            fp_tol: 1e-6,
            max_iters: 200,
            initial_q1_b: 0.0,
            power_ceiling: None,
            divergence_factor: 1e6,
            polish: true,
        }
    }
}

impl PingPongOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.fp_tol > 0.0 && self.fp_tol < 1.0) {
            return Err(Error::config("fp_tol", "must lie in (0, 1)"));
        }
        if self.max_iters == 0 {
            return Err(Error::config("max_iters", "must be at least 1"));
        }
        if !(self.initial_q1_b >= 0.0 && self.initial_q1_b.is_finite()) {
            return Err(Error::config("initial_q1_b", "must be non-negative"));
        }
        if !(self.divergence_factor > 1.0) {
            return Err(Error::config("divergence_factor", "must exceed 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PingPongStatus {
    Converged,
    /// `max_iters` reached without meeting the tolerance.
    Exhausted,
    /// An iterate exceeded the power ceiling.
    Diverged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PingPongResult {
    pub cell_a: InterferenceCellSolve,
    pub cell_b: InterferenceCellSolve,
    /// Iterations needed to meet `fp_tol` (or performed, when not converged).
    pub iterations: usize,
    pub status: PingPongStatus,
    /// `(q1_a, q1_b)` after each iteration.
    pub trace: Vec<(Real, Real)>,
}

impl PingPongResult {
    pub fn converged(&self) -> bool {
        self.status == PingPongStatus::Converged
    }

    /// Trace as CSV rows `iter,q1_a,q1_b`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iter,q1_a,q1_b\n");
        for (i, (a, b)) in self.trace.iter().enumerate() {
            out.push_str(&format!("{},{:.16e},{:.16e}\n", i + 1, a, b));
        }
        out
    }
}

/// Running estimate of the distance of one coordinate to its limit.
#[derive(Default)]
struct Contraction {
    last_step: Option<Real>,
}

impl Contraction {
    /// True when `q` is within `tol·q` of the limit, judged from the last
    /// two steps (the ratio of successive steps estimates the contraction
    /// factor).
    fn settled(&mut self, step: Real, q: Real, tol: Real) -> bool {
        let step = step.abs();
        let prev = self.last_step.replace(step);
        if step == 0.0 {
            return true;
        }
        let Some(prev) = prev else { return false };
        let c = if prev > 0.0 { step / prev } else { 1.0 };
        if c >= 1.0 {
            return false;
        }
        step <= tol * q && step * c / (1.0 - c) <= 0.5 * tol * q
    }
}

/// Alternates `Ĩ^A` and `Ĩ^B` starting from `q1_b = opts.initial_q1_b`.
pub fn run_pingpong(
    kernel: &Kernel<Real>,
    links_a: &[Link],
    links_b: &[Link],
    alpha: Real,
    opts: &PingPongOptions,
) -> Result<PingPongResult> {
    opts.validate()?;
    let ceiling = match opts.power_ceiling {
        Some(c) => c,
        None => {
            let free_a = cell_response(kernel, links_a, 0.0, alpha)?.q1;
            let free_b = cell_response(kernel, links_b, 0.0, alpha)?.q1;
            opts.divergence_factor * free_a.max(free_b)
        }
    };
    let mut q_b = opts.initial_q1_b;
    let mut q_a = Real::NAN;
    let mut trace = Vec::new();
    let (mut conv_a, mut conv_b) = (Contraction::default(), Contraction::default());
    let mut status = PingPongStatus::Exhausted;
    let mut iterations = 0;
    let mut last: Option<(InterferenceCellSolve, InterferenceCellSolve)> = None;

    // guard against numerical failure once the iterates blow up
    let step = |links: &[Link], q: Real| -> Result<Option<InterferenceCellSolve>> {
        match cell_response(kernel, links, q, alpha) {
            Ok(s) => Ok(Some(s)),
            Err(_) if q > ceiling => Ok(None),
            Err(e) => Err(e),
        }
    };

    for it in 1..=opts.max_iters {
        let Some(a) = step(links_a, q_b)? else {
            status = PingPongStatus::Diverged;
            iterations = it;
            break;
        };
        let Some(b) = step(links_b, a.q1)? else {
            status = PingPongStatus::Diverged;
            iterations = it;
            break;
        };
        let (da, db) = (a.q1 - q_a, b.q1 - q_b);
        q_a = a.q1;
        q_b = b.q1;
        trace.push((q_a, q_b));
        last = Some((a, b));
        iterations = it;
        if !(q_a <= ceiling && q_b <= ceiling) {
            status = PingPongStatus::Diverged;
            break;
        }
        let settled_a = it > 1 && conv_a.settled(da, q_a, opts.fp_tol);
        let settled_b = conv_b.settled(db, q_b, opts.fp_tol);
        if (settled_a || q_a == 0.0) && (settled_b || q_b == 0.0) && it > 1 {
            status = PingPongStatus::Converged;
            break;
        }
    }

    let (mut cell_a, mut cell_b) = match last {
        Some(pair) => pair,
        None => {
            return Err(Error::Infeasible(
                "reused-band iteration diverged on its first step".into(),
            ))
        }
    };
    if status == PingPongStatus::Converged && opts.polish {
        for _ in 0..100 {
            let a = cell_response(kernel, links_a, cell_b.q1, alpha)?;
            let b = cell_response(kernel, links_b, a.q1, alpha)?;
            let moved = (a.q1 - cell_a.q1).abs() > 4.0 * Real::EPSILON * a.q1
                || (b.q1 - cell_b.q1).abs() > 4.0 * Real::EPSILON * b.q1;
            cell_a = a;
            cell_b = b;
            if !moved {
                break;
            }
        }
        // make A's gains consistent with B's final power as well
        cell_a = cell_response(kernel, links_a, cell_b.q1, alpha)?;
    }
    Ok(PingPongResult {
        cell_a,
        cell_b,
        iterations,
        status,
        trace,
    })
}

/// A violation of one of the standard-interference-function properties.
#[derive(Debug, Clone, PartialEq)]
pub enum PropertyViolation {
    Positivity { q: (Real, Real), value: (Real, Real) },
    Monotonicity { q: (Real, Real), q_prime: (Real, Real) },
    Scalability { q: (Real, Real), t: Real },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PropertyReport {
    pub checks: usize,
    pub violations: Vec<PropertyViolation>,
}

impl PropertyReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// The joint map `Ĩ(q_a, q_b) = (Ĩ^A(q_b), Ĩ^B(q_a))`.
pub fn joint_response(
    kernel: &Kernel<Real>,
    links_a: &[Link],
    links_b: &[Link],
    alpha: Real,
    q: (Real, Real),
) -> Result<(Real, Real)> {
    Ok((
        cell_response(kernel, links_a, q.1, alpha)?.q1,
        cell_response(kernel, links_b, q.0, alpha)?.q1,
    ))
}

/// Checks positivity, monotonicity and scalability of `Ĩ` on a grid of
/// power pairs and for each `t > 1` in `t_values`.
pub fn check_interference_function_properties(
    kernel: &Kernel<Real>,
    links_a: &[Link],
    links_b: &[Link],
    alpha: Real,
    q_grid: &[(Real, Real)],
    t_values: &[Real],
) -> Result<PropertyReport> {
    let mut report = PropertyReport::default();
    let values: Vec<(Real, Real)> = q_grid
        .iter()
        .map(|&q| joint_response(kernel, links_a, links_b, alpha, q))
        .collect::<Result<_>>()?;
    let nonempty = (!links_a.is_empty(), !links_b.is_empty());
    for (&q, &v) in q_grid.iter().zip(&values) {
        report.checks += 1;
        if (nonempty.0 && !(v.0 > 0.0)) || (nonempty.1 && !(v.1 > 0.0)) {
            report.violations.push(PropertyViolation::Positivity { q, value: v });
        }
    }
    for (i, (&q, &v)) in q_grid.iter().zip(&values).enumerate() {
        for (j, (&qp, &vp)) in q_grid.iter().zip(&values).enumerate() {
            if i == j || !(q.0 >= qp.0 && q.1 >= qp.1) {
                continue;
            }
            report.checks += 1;
            if !(v.0 >= vp.0 && v.1 >= vp.1) {
                report
                    .violations
                    .push(PropertyViolation::Monotonicity { q, q_prime: qp });
            }
        }
    }
    for &t in t_values {
        if !(t > 1.0) {
            return Err(Error::config("t_values", format!("scalability needs t > 1, got {t}")));
        }
        for (&q, &v) in q_grid.iter().zip(&values) {
            report.checks += 1;
            let scaled = joint_response(kernel, links_a, links_b, alpha, (t * q.0, t * q.1))?;
            let ok_a = !nonempty.0 || t * v.0 > scaled.0;
            let ok_b = !nonempty.1 || t * v.1 > scaled.1;
            if !(ok_a && ok_b) {
                report.violations.push(PropertyViolation::Scalability { q, t });
            }
        }
    }
    Ok(report)
}
