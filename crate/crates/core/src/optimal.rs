//! Optimal joint allocation and the simplified fixed-pivot allocator.
//!
//! In an optimal allocation each cell has a pivot user `L`: nearer users
//! only use the reused band, farther users only their protected band, and
//! the pivot may use both. For fixed reused-band powers `(Q₁^A, Q₁^B)` each
//! cell solves its own convex problem with the extra constraint
//! `Q₁^c = q1_target`, whose multiplier is `ξ^c`. Writing `β̃₁ = β₁/(1+ξ)`,
//! the reused-band part of the solution is a one-parameter chain in `β̃₁`
//! along which `Q₁` increases continuously; the target fixes `β̃₁`, the
//! protected budget fixes `β₂`, and the pivot equality
//! `g_{L,1} F(g_{L,1} β̃₁) / (1+ξ) = g_{L,2} F(g_{L,2} β₂)` fixes `ξ`. A
//! negative `ξ` means the cell would rather spend less than `q1_target`, so
//! the pair is not a solution.
//!
//! The joint optimum is found by a search over `(Q₁^A, Q₁^B)`: a log grid,
//! local refinement, and a final Newton polish on the analytic gradient.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{Kernel, LevelPoint};
use crate::pingpong::{run_pingpong, PingPongOptions, PingPongStatus};
use crate::roots::{newton_bracketed, Bracket};
use crate::single_cell::{allocate_protected, solve_level};
use crate::system::{CellId, Link};
use crate::Real;

/// Allocation of one user on both bands.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct UserAllocation {
    pub x_m: Real,
    /// Target rate in nats/s/Hz.
    pub rate: Real,
    pub gamma1: Real,
    pub p1: Real,
    pub gamma2: Real,
    pub p2: Real,
}

/// Allocation of one cell. Fields that do not apply to the method that
/// produced it are `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellAllocation {
    pub cell_id: CellId,
    /// 1-based index of the pivot user (last reused-band user for the
    /// simplified allocator); `None` when no user is on the reused band.
    pub pivot_index: Option<usize>,
    pub pivot_distance_m: Option<Real>,
    pub beta1: Option<Real>,
    pub beta1_tilde: Option<Real>,
    pub beta2: Option<Real>,
    pub xi: Option<Real>,
    pub q1: Real,
    pub q2: Real,
    /// Neighbor reused-band power the gains `g1` were evaluated at.
    pub q1_neighbor: Real,
    pub users: Vec<UserAllocation>,
}

/// Solution of the per-cell system; see [`solve_cell_system`].
pub type CellSystemSolution = CellAllocation;

impl CellAllocation {
    pub fn power(&self) -> Real {
        self.q1 + self.q2
    }

    /// Users with positive shares on both bands.
    pub fn split_users(&self) -> usize {
        self.users.iter().filter(|u| u.gamma1 > 0.0 && u.gamma2 > 0.0).count()
    }

    /// `Σ_k γ_{k,1} P_{k,1} h_k / (1 + h_k q)`: sensitivity of the cell's
    /// reused-band power to the neighbor power at fixed SINR.
    fn interference_sensitivity(&self, links: &[Link], q: Real) -> Real {
        self.users
            .iter()
            .zip(links)
            .map(|(u, l)| u.gamma1 * u.p1 * l.h / (1.0 + l.h * q))
            .sum()
    }

    /// Largest relative rate error, band-budget errors and split-user
    /// count when the neighbor actually spends `q1_neighbor`.
    pub fn check(
        &self,
        kernel: &Kernel<Real>,
        links: &[Link],
        q1_neighbor: Real,
        alpha: Real,
    ) -> Result<AllocationCheck> {
        let mut worst = 0.0f64;
        let (mut band1, mut band2) = (0.0, 0.0);
        for (u, l) in self.users.iter().zip(links) {
            let mut delivered = 0.0;
            if u.gamma1 > 0.0 {
                delivered += u.gamma1 * kernel.e_log(l.g1(q1_neighbor) * u.p1)?;
            }
            if u.gamma2 > 0.0 {
                delivered += u.gamma2 * kernel.e_log(l.g2 * u.p2)?;
            }
            worst = worst.max((delivered - l.rate).abs() / l.rate);
            band1 += u.gamma1;
            band2 += u.gamma2;
        }
        let used2 = if self.users.iter().any(|u| u.gamma2 > 0.0) {
            (band2 - 0.5 * (1.0 - alpha)).abs()
        } else {
            0.0
        };
        let used1 = if self.users.iter().any(|u| u.gamma1 > 0.0) {
            (band1 - alpha).abs()
        } else {
            0.0
        };
        Ok(AllocationCheck {
            max_rate_rel_err: worst,
            band1_err: used1,
            band2_err: used2,
            split_users: self.split_users(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocationCheck {
    pub max_rate_rel_err: Real,
    /// `|Σγ₁ - α|`, or 0 when the reused band is unused.
    pub band1_err: Real,
    /// `|Σγ₂ - (1-α)/2|`, or 0 when the protected band is unused.
    pub band2_err: Real,
    pub split_users: usize,
}

/// Outcome of [`solve_cell_system`].
#[derive(Debug, Clone, PartialEq)]
pub enum CellOutcome {
    Solved(CellSystemSolution),
    /// The system has no solution: `q1_target` exceeds what the cell can
    /// spend on the reused band, or the cell would spend strictly less
    /// (`ξ < 0`).
    NoSolution { xi: Option<Real> },
}

impl CellOutcome {
    pub fn solution(&self) -> Option<&CellSystemSolution> {
        match self {
            CellOutcome::Solved(s) => Some(s),
            CellOutcome::NoSolution { .. } => None,
        }
    }
}

/// Relative tolerance of the `Q₁` equality.
const Q1_REL_TOL: Real = 1e-12;

/// One point on the reused-band chain.
struct ChainPoint {
    /// 0-based pivot.
    pivot: usize,
    /// Reused-band share of the pivot.
    gamma_pivot: Real,
    q1: Real,
    /// `dQ₁ / d ln β̃₁`.
    dq1_dt: Real,
}

/// Everything about a cell that depends only on the neighbor power.
struct CellChain<'a> {
    kernel: &'a Kernel<Real>,
    links: &'a [Link],
    q1_neighbor: Real,
    alpha: Real,
    g1: Vec<Real>,
    /// `a_K`: level at which all users fill the reused band.
    top_level: Real,
    /// Reused-band power at `a_K`, the largest the cell can spend.
    q1_max: Real,
}

impl<'a> CellChain<'a> {
    fn new(kernel: &'a Kernel<Real>, links: &'a [Link], q1_neighbor: Real, alpha: Real) -> Result<Self> {
        let g1: Vec<Real> = links.iter().map(|l| l.g1(q1_neighbor)).collect();
        let (mut top_level, mut q1_max) = (0.0, 0.0);
        if alpha > 0.0 && !links.is_empty() {
            let users: Vec<(Real, Real)> = g1.iter().zip(links).map(|(&g, l)| (g, l.rate)).collect();
            if let Some(sol) = solve_level(kernel, &users, alpha)? {
                top_level = sol.beta;
                q1_max = sol.power(&users);
            }
        }
        Ok(CellChain {
            kernel,
            links,
            q1_neighbor,
            alpha,
            g1,
            top_level,
            q1_max,
        })
    }

    /// Walks the users in order at level `bt = β̃₁`.
    fn eval(&self, bt: Real, mut sink: Option<&mut Vec<LevelPoint<Real>>>) -> Result<ChainPoint> {
        let mut prefix = 0.0;
        let mut dprefix = 0.0;
        let (mut q1, mut dq1) = (0.0, 0.0);
        let last = self.links.len() - 1;
        for (k, (l, &g)) in self.links.iter().zip(&self.g1).enumerate() {
            let p = self.kernel.level(g * bt)?;
            if let Some(s) = sink.as_deref_mut() {
                s.push(p);
            }
            let need = l.rate / p.cap;
            // dx/dy = 1/f'(x) = (dC/dy) / F
            let dx_dy = p.dcap_dy / p.cap_f;
            if prefix + need >= self.alpha || k == last {
                let gamma = (self.alpha - prefix).max(0.0);
                let power = p.x / g;
                q1 += gamma * power;
                dq1 += dprefix * power + gamma * dx_dy * bt;
                return Ok(ChainPoint {
                    pivot: k,
                    gamma_pivot: gamma,
                    q1,
                    dq1_dt: dq1,
                });
            }
            prefix += need;
            // d/dt of -R/C(y) is R C'(y) y / C²; d/dt of R x/(g C) is
            // R bt (x'/C - x C'/C²)
            dprefix += l.rate * p.dcap_dy * p.y / (p.cap * p.cap);
            q1 += l.rate * p.power_per_rate(g);
            dq1 += l.rate * bt * (dx_dy / p.cap - p.x * p.dcap_dy / (p.cap * p.cap));
        }
        unreachable!("chain walk over a non-empty cell always returns")
    }

    /// Finds `β̃₁` with `Q₁(β̃₁) = target`, for `0 < target < q1_max`.
    fn level_for(&self, target: Real) -> Result<Real> {
        let hi = self.top_level.ln();
        let ln_target = target.ln();
        let mut eval = |t: Real| -> Result<(Real, Real)> {
            let c = self.eval(t.exp(), None)?;
            Ok((c.q1.ln() - ln_target, c.dq1_dt / c.q1))
        };
        // Q₁ grows like β̃^p with 1/2 <= p <= 1 near the bottom of the chain
        let gap = ln_target - self.q1_max.ln();
        let mut step = 2.0 * gap.abs() + 1.0;
        let mut lo = hi - step;
        let mut f_lo = eval(lo)?.0;
        let mut expansions = 0;
        while f_lo > 0.0 {
            expansions += 1;
            if expansions > self.kernel.config().max_bracket_expansions {
                return Err(Error::NoBracket {
                    what: "reused-band chain level",
                    expansions,
                });
            }
            step *= 2.0;
            lo = hi - step;
            f_lo = eval(lo)?.0;
        }
        if f_lo == 0.0 {
            return Ok(lo.exp());
        }
        let br = Bracket::new(lo, f_lo, hi, self.q1_max.ln() - ln_target);
        let x0 = hi + gap * 1.5;
        let t = newton_bracketed(
            "reused-band chain level",
            &mut eval,
            br,
            x0,
            4.0 * Real::EPSILON * hi.abs().max(lo.abs()).max(1.0),
            200,
        )?;
        Ok(t.exp())
    }

    fn solve(&self, target: Real) -> Result<CellOutcome> {
        let k = self.links.len();
        let share2 = 0.5 * (1.0 - self.alpha);
        if k == 0 {
            return Ok(if target == 0.0 {
                CellOutcome::Solved(self.assemble(None, None, None, Some(0.0), vec![]))
            } else {
                CellOutcome::NoSolution { xi: None }
            });
        }
        if self.alpha == 0.0 {
            // all users protected; the pivot is user 1 with no reused share
            if target != 0.0 {
                return Ok(CellOutcome::NoSolution { xi: None });
            }
            let users: Vec<(Real, Real)> = self.links.iter().map(|l| (l.g2, l.rate)).collect();
            let prot = allocate_protected(self.kernel, &users, share2)?;
            let alloc = self
                .links
                .iter()
                .zip(&prot.per_user)
                .map(|(l, s)| UserAllocation {
                    x_m: l.x_m,
                    rate: l.rate,
                    gamma2: s.gamma,
                    p2: s.power,
                    ..Default::default()
                })
                .collect();
            return Ok(CellOutcome::Solved(self.assemble(Some(0), Some(0.0), prot.beta2, Some(0.0), alloc)));
        }
        if target > self.q1_max * (1.0 + Q1_REL_TOL) || !(target > 0.0) {
            return Ok(CellOutcome::NoSolution { xi: None });
        }
        if self.alpha == 1.0 {
            // no protected band: every user must sit on the reused band
            if target < self.q1_max * (1.0 - Q1_REL_TOL) {
                return Ok(CellOutcome::NoSolution { xi: None });
            }
            let mut pts = Vec::with_capacity(k);
            self.eval(self.top_level, Some(&mut pts))?;
            let alloc = self
                .links
                .iter()
                .zip(&pts)
                .zip(&self.g1)
                .map(|((l, p), &g)| UserAllocation {
                    x_m: l.x_m,
                    rate: l.rate,
                    gamma1: l.rate / p.cap,
                    p1: p.x / g,
                    ..Default::default()
                })
                .collect();
            let bt = self.top_level;
            return Ok(CellOutcome::Solved(self.assemble(Some(k - 1), Some(bt), None, Some(0.0), alloc)));
        }

        let bt = if target >= self.q1_max {
            self.top_level
        } else {
            self.level_for(target)?
        };
        let mut pts = Vec::with_capacity(k);
        let chain = self.eval(bt, Some(&mut pts))?;
        let l = chain.pivot;
        let pivot_point = pts[l];
        let rate_left = (self.links[l].rate - chain.gamma_pivot * pivot_point.cap).max(0.0);
        // pivot residual below rounding of its own rate counts as fully served
        let pivot_in_band2 = rate_left > 1e-13 * self.links[l].rate;
        let mut band2: Vec<(Real, Real)> = Vec::with_capacity(k - l);
        if pivot_in_band2 {
            band2.push((self.links[l].g2, rate_left));
        }
        band2.extend(self.links[l + 1..].iter().map(|u| (u.g2, u.rate)));
        let level2 = solve_level(self.kernel, &band2, share2)?;
        let beta2 = level2.as_ref().map_or(0.0, |s| s.beta);
        let g1l = self.g1[l];
        let g2l = self.links[l].g2;
        let f2 = self.kernel.cap_f(g2l * beta2)?;
        let xi = g1l * pivot_point.cap_f / (g2l * f2) - 1.0;
        if xi < 0.0 {
            return Ok(CellOutcome::NoSolution { xi: Some(xi) });
        }

        let mut alloc: Vec<UserAllocation> = self
            .links
            .iter()
            .map(|u| UserAllocation {
                x_m: u.x_m,
                rate: u.rate,
                ..Default::default()
            })
            .collect();
        for k in 0..l {
            let p = &pts[k];
            alloc[k].gamma1 = self.links[k].rate / p.cap;
            alloc[k].p1 = p.x / self.g1[k];
        }
        alloc[l].gamma1 = chain.gamma_pivot;
        alloc[l].p1 = if chain.gamma_pivot > 0.0 { pivot_point.x / g1l } else { 0.0 };
        if let Some(sol) = &level2 {
            let shares = sol.shares(&band2);
            let offset = usize::from(pivot_in_band2);
            if pivot_in_band2 {
                alloc[l].gamma2 = shares[0].gamma;
                alloc[l].p2 = shares[0].power;
            }
            for (k, s) in (l + 1..self.links.len()).zip(&shares[offset..]) {
                alloc[k].gamma2 = s.gamma;
                alloc[k].p2 = s.power;
            }
        }
        let mut sol = self.assemble(Some(l), Some(bt), level2.map(|s| s.beta), Some(xi), alloc);
        sol.beta1 = Some(bt * (1.0 + xi));
        Ok(CellOutcome::Solved(sol))
    }

    fn assemble(
        &self,
        pivot: Option<usize>,
        beta1_tilde: Option<Real>,
        beta2: Option<Real>,
        xi: Option<Real>,
        users: Vec<UserAllocation>,
    ) -> CellAllocation {
        let q1 = users.iter().map(|u| u.gamma1 * u.p1).sum();
        let q2 = users.iter().map(|u| u.gamma2 * u.p2).sum();
        CellAllocation {
            cell_id: CellId::A,
            pivot_index: pivot.map(|p| p + 1),
            pivot_distance_m: pivot.map(|p| self.links[p].x_m),
            beta1: beta1_tilde,
            beta1_tilde,
            beta2,
            xi,
            q1,
            q2,
            q1_neighbor: self.q1_neighbor,
            users,
        }
    }
}

/// Solves the per-cell system for a cell whose reused-band power must be
/// `q1_target` while the neighbor spends `q1_neighbor` there.
pub fn solve_cell_system(
    kernel: &Kernel<Real>,
    links: &[Link],
    q1_target: Real,
    q1_neighbor: Real,
    alpha: Real,
) -> Result<CellOutcome> {
    if !(q1_target >= 0.0 && q1_neighbor >= 0.0) {
        return Err(Error::Domain {
            what: "cell system powers",
            value: q1_target.min(q1_neighbor),
        });
    }
    CellChain::new(kernel, links, q1_neighbor, alpha)?.solve(q1_target)
}

/// Largest reused-band power the cell can spend under `q1_neighbor`, i.e.
/// its response when every user is on the reused band.
pub fn max_reused_power(kernel: &Kernel<Real>, links: &[Link], q1_neighbor: Real, alpha: Real) -> Result<Real> {
    Ok(CellChain::new(kernel, links, q1_neighbor, alpha)?.q1_max)
}

/// The levels `a_l` (users `1..=l` filling the reused band with gains
/// `g1`) and `b_l` (users `l+1..=K` filling the protected band), for
/// `l = 0..=K`, with `a_0 = b_K = 0`.
pub fn pivot_sequences(
    kernel: &Kernel<Real>,
    links: &[Link],
    q1_neighbor: Real,
    alpha: Real,
) -> Result<(Vec<Real>, Vec<Real>)> {
    let k = links.len();
    let share2 = 0.5 * (1.0 - alpha);
    let mut a = vec![0.0; k + 1];
    let mut b = vec![0.0; k + 1];
    for l in 1..=k {
        let users: Vec<(Real, Real)> = links[..l].iter().map(|u| (u.g1(q1_neighbor), u.rate)).collect();
        a[l] = solve_level(kernel, &users, alpha)?.map_or(0.0, |s| s.beta);
    }
    for l in 0..k {
        let users: Vec<(Real, Real)> = links[l..].iter().map(|u| (u.g2, u.rate)).collect();
        b[l] = solve_level(kernel, &users, share2)?.map_or(0.0, |s| s.beta);
    }
    Ok((a, b))
}

/// The pivot selection rule: the first `l` (1-based) with
/// `g_{l,1} F(g_{l,1} a_l) / (1+ξ) <= g_{l,2} F(g_{l,2} b_l)`.
pub fn pivot_rule_index(
    kernel: &Kernel<Real>,
    links: &[Link],
    q1_neighbor: Real,
    xi: Real,
    a: &[Real],
    b: &[Real],
) -> Result<Option<usize>> {
    for (l, u) in links.iter().enumerate() {
        let g1 = u.g1(q1_neighbor);
        let lhs = g1 * kernel.cap_f(g1 * a[l + 1])? / (1.0 + xi);
        let rhs = u.g2 * kernel.cap_f(u.g2 * b[l + 1])?;
        if lhs <= rhs {
            return Ok(Some(l + 1));
        }
    }
    Ok(None)
}

/// Power of the naive allocation where every user of both cells is
/// confined to its protected band of size `(1 - α)/2`.
pub fn naive_power(kernel: &Kernel<Real>, links_a: &[Link], links_b: &[Link], alpha: Real) -> Result<Real> {
    let share = 0.5 * (1.0 - alpha);
    let mut total = 0.0;
    for links in [links_a, links_b] {
        let users: Vec<(Real, Real)> = links.iter().map(|l| (l.g2, l.rate)).collect();
        total += allocate_protected(kernel, &users, share)?.q2;
    }
    Ok(total)
}

/// Power scale of the `(Q₁^A, Q₁^B)` search: the naive benchmark, or for
/// `α = 1` the interference-free power on the full band.
pub fn reference_power(kernel: &Kernel<Real>, links_a: &[Link], links_b: &[Link], alpha: Real) -> Result<Real> {
    if alpha < 1.0 {
        return naive_power(kernel, links_a, links_b, alpha);
    }
    interference_free_power(kernel, links_a, links_b)
}

/// Power of both cells when each has the whole band to itself.
pub fn interference_free_power(kernel: &Kernel<Real>, links_a: &[Link], links_b: &[Link]) -> Result<Real> {
    let mut total = 0.0;
    for links in [links_a, links_b] {
        let users: Vec<(Real, Real)> = links.iter().map(|l| (l.g2, l.rate)).collect();
        total += allocate_protected(kernel, &users, 1.0)?.q2;
    }
    Ok(total)
}

/// Search grid over `(Q₁^A, Q₁^B)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    /// Points per axis.
    pub points: usize,
    /// Axis range as multiples of the reference power.
    pub lo_factor: Real,
    pub hi_factor: Real,
    /// Number of local refinement passes around the running argmin.
    pub refinements: usize,
    /// Points per axis of each refinement pass.
    pub refine_points: usize,
    /// Finish with Newton steps on the analytic gradient.
    pub polish: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            points: 32,
            lo_factor: 1e-3,
            hi_factor: 1e3,
            refinements: 1,
            refine_points: 9,
            polish: true,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.points < 2 {
            return Err(Error::config("grid.points", "need at least 2 points per axis"));
        }
        if !(self.lo_factor > 0.0 && self.hi_factor > self.lo_factor && self.hi_factor.is_finite()) {
            return Err(Error::config("grid.lo_factor", "need 0 < lo_factor < hi_factor"));
        }
        if self.refinements > 0 && self.refine_points < 3 {
            return Err(Error::config("grid.refine_points", "need at least 3 points per axis"));
        }
        Ok(())
    }
}

/// One evaluated `(Q₁^A, Q₁^B)` point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridRow {
    pub q1_a: Real,
    pub q1_b: Real,
    pub feasible: bool,
    /// `NaN` when infeasible.
    pub q_total: Real,
}

/// Diagnostics CSV with header `q1_a,q1_b,feasible,q_total`.
pub fn grid_csv(rows: &[GridRow]) -> String {
    let mut out = String::from("q1_a,q1_b,feasible,q_total\n");
    for r in rows {
        out.push_str(&format!(
            "{:.16e},{:.16e},{},{:.16e}\n",
            r.q1_a, r.q1_b, r.feasible as u8, r.q_total
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Optimal,
    Simplified,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointAllocationResult {
    pub method: Method,
    pub alpha: Real,
    pub cell_a: CellAllocation,
    pub cell_b: CellAllocation,
    pub q_total: Real,
    /// Selected `(Q₁^A, Q₁^B)` of the optimal search.
    pub grid_point: Option<(Real, Real)>,
    #[serde(skip)]
    pub grid_diagnostics: Vec<GridRow>,
    /// Ping-pong iterations of the simplified allocator.
    pub iterations: Option<usize>,
}

impl JointAllocationResult {
    /// Checks both cells against the reused-band powers actually spent.
    pub fn check(
        &self,
        kernel: &Kernel<Real>,
        links_a: &[Link],
        links_b: &[Link],
    ) -> Result<(AllocationCheck, AllocationCheck)> {
        Ok((
            self.cell_a.check(kernel, links_a, self.cell_b.q1, self.alpha)?,
            self.cell_b.check(kernel, links_b, self.cell_a.q1, self.alpha)?,
        ))
    }
}

struct JointEval {
    a: CellAllocation,
    b: CellAllocation,
    total: Real,
}

struct Search<'a> {
    kernel: &'a Kernel<Real>,
    links_a: &'a [Link],
    links_b: &'a [Link],
    alpha: Real,
}

impl Search<'_> {
    fn eval_with(&self, chain_a: &CellChain, chain_b: &CellChain, qa: Real, qb: Real) -> Result<Option<JointEval>> {
        if qa > chain_a.q1_max * (1.0 + Q1_REL_TOL) || qb > chain_b.q1_max * (1.0 + Q1_REL_TOL) {
            return Ok(None);
        }
        let CellOutcome::Solved(mut a) = chain_a.solve(qa)? else {
            return Ok(None);
        };
        let CellOutcome::Solved(mut b) = chain_b.solve(qb)? else {
            return Ok(None);
        };
        a.cell_id = CellId::A;
        b.cell_id = CellId::B;
        let total = a.power() + b.power();
        Ok(Some(JointEval { a, b, total }))
    }

    fn eval(&self, qa: Real, qb: Real) -> Result<Option<JointEval>> {
        let chain_a = CellChain::new(self.kernel, self.links_a, qb, self.alpha)?;
        let chain_b = CellChain::new(self.kernel, self.links_b, qa, self.alpha)?;
        self.eval_with(&chain_a, &chain_b, qa, qb)
    }

    /// Evaluates the tensor grid `qa_axis × qb_axis`, one chain per axis value.
    fn grid(&self, qa_axis: &[Real], qb_axis: &[Real]) -> Result<Vec<(GridRow, Option<JointEval>)>> {
        let chains_a: Vec<CellChain> = qb_axis
            .par_iter()
            .map(|&qb| CellChain::new(self.kernel, self.links_a, qb, self.alpha))
            .collect::<Result<_>>()?;
        let chains_b: Vec<CellChain> = qa_axis
            .par_iter()
            .map(|&qa| CellChain::new(self.kernel, self.links_b, qa, self.alpha))
            .collect::<Result<_>>()?;
        let rows: Vec<Vec<(GridRow, Option<JointEval>)>> = qa_axis
            .par_iter()
            .enumerate()
            .map(|(i, &qa)| {
                qb_axis
                    .iter()
                    .enumerate()
                    .map(|(j, &qb)| {
                        let e = self.eval_with(&chains_a[j], &chains_b[i], qa, qb)?;
                        let row = GridRow {
                            q1_a: qa,
                            q1_b: qb,
                            feasible: e.is_some(),
                            q_total: e.as_ref().map_or(Real::NAN, |e| e.total),
                        };
                        Ok((row, e))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        Ok(rows.into_iter().flatten().collect())
    }

    /// Gradient of the total power in `(ln qa, ln qb)`.
    fn gradient(&self, e: &JointEval) -> [Real; 2] {
        let (qa, qb) = (e.a.q1, e.b.q1);
        let xa = e.a.xi.unwrap_or(0.0);
        let xb = e.b.xi.unwrap_or(0.0);
        let da = -xa + (1.0 + xb) * e.b.interference_sensitivity(self.links_b, qa);
        let db = -xb + (1.0 + xa) * e.a.interference_sensitivity(self.links_a, qb);
        [qa * da, qb * db]
    }

    /// Newton iteration on the stationarity conditions in log coordinates,
    /// accepting only feasible steps that lower the total power.
    fn polish(&self, mut best: JointEval) -> Result<JointEval> {
        let h: Real = 1e-5;
        for _ in 0..40 {
            let (qa, qb) = (best.a.q1, best.b.q1);
            let g = self.gradient(&best);
            // near a minimum the error in the total is quadratic in g
            if g[0].abs().max(g[1].abs()) <= 1e-10 * best.total {
                break;
            }
            // Hessian by forward differences of the analytic gradient
            let mut hess = [[0.0; 2]; 2];
            let mut ok = true;
            for (axis, row) in hess.iter_mut().enumerate() {
                let (pa, pb) = if axis == 0 {
                    (qa * (-h).exp(), qb)
                } else {
                    (qa, qb * (-h).exp())
                };
                match self.eval(pa, pb)? {
                    Some(e) => {
                        let gp = self.gradient(&e);
                        row[0] = (g[0] - gp[0]) / h;
                        row[1] = (g[1] - gp[1]) / h;
                    }
                    None => ok = false,
                }
            }
            let sym = 0.5 * (hess[0][1] + hess[1][0]);
            let det = hess[0][0] * hess[1][1] - sym * sym;
            let mut dir = if ok && hess[0][0] > 0.0 && det > 0.0 {
                [
                    -(hess[1][1] * g[0] - sym * g[1]) / det,
                    -(hess[0][0] * g[1] - sym * g[0]) / det,
                ]
            } else {
                let n = (g[0] * g[0] + g[1] * g[1]).sqrt();
                [-0.1 * g[0] / n, -0.1 * g[1] / n]
            };
            let len = dir[0].abs().max(dir[1].abs());
            if len > 1.0 {
                dir = [dir[0] / len, dir[1] / len];
            }
            let mut step = 1.0;
            let mut moved = false;
            for _ in 0..12 {
                let (na, nb) = (qa * (step * dir[0]).exp(), qb * (step * dir[1]).exp());
                if let Some(e) = self.eval(na, nb)? {
                    if e.total < best.total {
                        best = e;
                        moved = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !moved || (step * len).max(step * dir[0].abs().max(dir[1].abs())) < 1e-12 {
                break;
            }
        }
        Ok(best)
    }
}

fn log_axis(lo: Real, hi: Real, n: usize) -> Vec<Real> {
    let (l, h) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (l + (h - l) * i as Real / (n - 1) as Real).exp())
        .collect()
}

fn better(a: &GridRow, b: &GridRow) -> bool {
    (a.q_total, a.q1_a, a.q1_b)
        .partial_cmp(&(b.q_total, b.q1_a, b.q1_b))
        .is_some_and(|o| o.is_lt())
}

/// Optimal joint allocation of both cells at reuse factor `alpha`.
pub fn optimal_allocate(
    kernel: &Kernel<Real>,
    links_a: &[Link],
    links_b: &[Link],
    alpha: Real,
    grid: &GridSpec,
) -> Result<JointAllocationResult> {
    grid.validate()?;
    let search = Search {
        kernel,
        links_a,
        links_b,
        alpha,
    };
    if alpha == 0.0 {
        let e = search
            .eval(0.0, 0.0)?
            .ok_or_else(|| Error::Infeasible("protected bands cannot serve the users".into()))?;
        return Ok(finish(Method::Optimal, alpha, e, Some((0.0, 0.0)), Vec::new(), None));
    }
    if alpha == 1.0 {
        return full_reuse(kernel, links_a, links_b);
    }

    let reference = reference_power(kernel, links_a, links_b, alpha)?;
    // a thin protected band inflates the benchmark far above the optimum
    let floor = reference.min(interference_free_power(kernel, links_a, links_b)?);
    let axis = log_axis(grid.lo_factor * floor, grid.hi_factor * reference, grid.points);
    let mut diagnostics = Vec::new();
    let mut best: Option<(GridRow, JointEval)> = None;
    let absorb = |rows: Vec<(GridRow, Option<JointEval>)>,
                  diagnostics: &mut Vec<GridRow>,
                  best: &mut Option<(GridRow, JointEval)>| {
        for (row, e) in rows {
            diagnostics.push(row);
            if let Some(e) = e {
                if best.as_ref().is_none_or(|(b, _)| better(&row, b)) {
                    *best = Some((row, e));
                }
            }
        }
    };
    absorb(search.grid(&axis, &axis)?, &mut diagnostics, &mut best);
    let ratio = axis[1] / axis[0];
    let mut span = ratio;
    for _ in 0..grid.refinements {
        let Some((row, _)) = best.as_ref() else { break };
        let (ca, cb) = (row.q1_a, row.q1_b);
        let ax_a = log_axis(ca / span, ca * span, grid.refine_points);
        let ax_b = log_axis(cb / span, cb * span, grid.refine_points);
        absorb(search.grid(&ax_a, &ax_b)?, &mut diagnostics, &mut best);
        span = span.powf(2.0 / (grid.refine_points - 1) as Real);
    }
    let Some((row, e)) = best else {
        return Err(Error::Infeasible(format!(
            "no feasible point on the {0}x{0} reused-band power grid",
            grid.points
        )));
    };
    let e = if grid.polish { search.polish(e)? } else { e };
    let point = if grid.polish { (e.a.q1, e.b.q1) } else { (row.q1_a, row.q1_b) };
    Ok(finish(Method::Optimal, alpha, e, Some(point), diagnostics, None))
}

fn finish(
    method: Method,
    alpha: Real,
    e: JointEval,
    grid_point: Option<(Real, Real)>,
    grid_diagnostics: Vec<GridRow>,
    iterations: Option<usize>,
) -> JointAllocationResult {
    JointAllocationResult {
        method,
        alpha,
        q_total: e.total,
        cell_a: e.a,
        cell_b: e.b,
        grid_point,
        grid_diagnostics,
        iterations,
    }
}

/// With `α = 1` there is no protected band and the optimum is the
/// best-response fixed point of the full populations.
fn full_reuse(kernel: &Kernel<Real>, links_a: &[Link], links_b: &[Link]) -> Result<JointAllocationResult> {
    let pp = run_pingpong(kernel, links_a, links_b, 1.0, &PingPongOptions::default())?;
    if pp.status != PingPongStatus::Converged {
        return Err(Error::Infeasible("full reuse: best-response iteration does not converge".into()));
    }
    let search = Search {
        kernel,
        links_a,
        links_b,
        alpha: 1.0,
    };
    let e = search
        .eval(pp.cell_a.q1, pp.cell_b.q1)?
        .ok_or_else(|| Error::Infeasible("full reuse fixed point rejected".into()))?;
    let point = (e.a.q1, e.b.q1);
    Ok(finish(Method::Optimal, 1.0, e, Some(point), Vec::new(), Some(pp.iterations)))
}

/// Simplified allocation: users nearer than the pivot distance of their
/// cell use only the reused band (solved by ping-pong), the others only
/// their protected band. No user is split.
pub fn simplified_allocate(
    kernel: &Kernel<Real>,
    links_a: &[Link],
    links_b: &[Link],
    d_subopt_a: Real,
    d_subopt_b: Real,
    alpha: Real,
    opts: &PingPongOptions,
) -> Result<JointAllocationResult> {
    let split = |links: &[Link], d: Real| links.partition_point(|l| l.x_m < d);
    let (na, nb) = (split(links_a, d_subopt_a), split(links_b, d_subopt_b));
    let share2 = 0.5 * (1.0 - alpha);
    let protected = |links: &[Link]| {
        let users: Vec<(Real, Real)> = links.iter().map(|l| (l.g2, l.rate)).collect();
        allocate_protected(kernel, &users, share2)
    };
    let prot_a = protected(&links_a[na..])?;
    let prot_b = protected(&links_b[nb..])?;
    let mut opts = *opts;
    if opts.power_ceiling.is_none() && alpha < 1.0 {
        opts.power_ceiling = Some(opts.divergence_factor * naive_power(kernel, links_a, links_b, alpha)?);
    }
    let pp = run_pingpong(kernel, &links_a[..na], &links_b[..nb], alpha, &opts)?;
    if !pp.converged() {
        return Err(Error::Infeasible(format!(
            "reused-band iteration {:?} after {} iterations",
            pp.status, pp.iterations
        )));
    }
    let build = |id: CellId,
                 links: &[Link],
                 n: usize,
                 cell: &crate::pingpong::InterferenceCellSolve,
                 prot: &crate::single_cell::ProtectedAllocation| {
        let mut users: Vec<UserAllocation> = links
            .iter()
            .map(|l| UserAllocation {
                x_m: l.x_m,
                rate: l.rate,
                ..Default::default()
            })
            .collect();
        for (u, s) in users[..n].iter_mut().zip(&cell.per_user) {
            u.gamma1 = s.gamma;
            u.p1 = s.power;
        }
        for (u, s) in users[n..].iter_mut().zip(&prot.per_user) {
            u.gamma2 = s.gamma;
            u.p2 = s.power;
        }
        CellAllocation {
            cell_id: id,
            pivot_index: (n > 0).then_some(n),
            pivot_distance_m: (n > 0).then(|| links[n - 1].x_m),
            beta1: cell.beta1,
            beta1_tilde: cell.beta1,
            beta2: prot.beta2,
            xi: None,
            q1: cell.q1,
            q2: prot.q2,
            q1_neighbor: cell.q1_neighbor,
            users,
        }
    };
    let cell_a = build(CellId::A, links_a, na, &pp.cell_a, &prot_a);
    let cell_b = build(CellId::B, links_b, nb, &pp.cell_b, &prot_b);
    let q_total = cell_a.power() + cell_b.power();
    Ok(JointAllocationResult {
        method: Method::Simplified,
        alpha,
        cell_a,
        cell_b,
        q_total,
        grid_point: None,
        grid_diagnostics: Vec::new(),
        iterations: Some(pp.iterations),
    })
}
