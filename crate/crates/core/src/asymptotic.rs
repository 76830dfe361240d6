//! Large-population limit of the optimal allocation.
//!
//! As the number of users and the bandwidth grow with `K/B → t`, the sums
//! over users become integrals against the user-location density `λ` on
//! `[ε, D]`, weighted by the mean normalized rate `r̄` of the cell. Users
//! nearer than the pivot distance `d` sit on the reused band, the others on
//! the protected band, and for reused-band powers `(Q₁^A, Q₁^B)` each cell
//! satisfies
//!
//! ```text
//! r̄ ∫_ε^d 𝓖(x, β₁, Q̄, ξ) dλ = α
//! r̄ ∫_d^D 𝓖(x, β₂, 0, 0) dλ = (1 - α)/2
//! g₁(d)/(1+ξ) F(g₁(d) β₁/(1+ξ)) = g₂(d) F(g₂(d) β₂)
//! r̄ ∫_ε^d 𝓕(x, β₁, Q̄, ξ) dλ = Q₁
//! ```
//!
//! Integrals are evaluated by Gauss–Legendre quadrature in `ln x`; the
//! nodes act as weighted pseudo-users so the finite-population level
//! solver is reused unchanged.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::optimal::GridSpec;
use crate::quad::GaussLegendre;
use crate::roots::{golden_min, illinois, Bracket};
use crate::single_cell::solve_level;
use crate::system::SystemParams;
use crate::Real;

/// `𝓕(x, β, Q̄, ξ)`: reused-band power per unit rate of a user at `x`.
pub fn script_f(kernel: &Kernel<Real>, params: &SystemParams, x_m: Real, beta: Real, q_bar: Real, xi: Real) -> Result<Real> {
    let g = params.g1(x_m, q_bar)?;
    let p = kernel.level(g * beta / (1.0 + xi))?;
    Ok(p.power_per_rate(g))
}

/// `𝓖(x, β, Q̄, ξ) = 1 / C(g₁(x, Q̄) β / (1+ξ))`: band fraction per unit rate.
pub fn script_g(kernel: &Kernel<Real>, params: &SystemParams, x_m: Real, beta: Real, q_bar: Real, xi: Real) -> Result<Real> {
    let g = params.g1(x_m, q_bar)?;
    Ok(1.0 / kernel.cap(g * beta / (1.0 + xi))?)
}

/// Quadrature resolution: Gauss–Legendre `order` on `panels` equal panels
/// in `ln x` for each integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadSpec {
    pub order: usize,
    pub panels: usize,
}

impl Default for QuadSpec {
    fn default() -> Self {
        QuadSpec { order: 20, panels: 3 }
    }
}

impl QuadSpec {
    pub fn doubled(self) -> Self {
        QuadSpec {
            order: self.order * 2,
            panels: self.panels,
        }
    }
}

/// Limiting cell configuration: uniform users on `[ε, D]`, constant rates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticScenario {
    pub params: SystemParams,
    /// `r̄` of cells A and B in nats/s/Hz.
    pub mean_rate: [Real; 2],
    pub quad: QuadSpec,
}

impl AsymptoticScenario {
    /// Both cells carrying a total of `r_t_bps` bits/s each.
    pub fn symmetric(params: SystemParams, r_t_bps: Real) -> Self {
        let r = r_t_bps * std::f64::consts::LN_2 / params.bandwidth_hz;
        AsymptoticScenario {
            params,
            mean_rate: [r, r],
            quad: QuadSpec::default(),
        }
    }

    pub fn with_quad(mut self, quad: QuadSpec) -> Self {
        self.quad = quad;
        self
    }

    pub fn r_t_bps(&self, cell: usize) -> Real {
        self.mean_rate[cell] * self.params.bandwidth_hz / std::f64::consts::LN_2
    }

    pub fn is_symmetric(&self) -> bool {
        self.mean_rate[0] == self.mean_rate[1]
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !self.mean_rate.iter().all(|r| *r > 0.0 && r.is_finite()) {
            return Err(Error::config("r_t", "mean rates must be positive"));
        }
        if self.quad.order == 0 || self.quad.panels == 0 {
            return Err(Error::config("quad", "order and panels must be positive"));
        }
        Ok(())
    }
}

/// Solution of one cell's limiting system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticCell {
    pub d_m: Real,
    /// `β₁ / (1+ξ)`, fixed by the reused-band budget alone.
    pub beta1_tilde: Real,
    pub beta1: Real,
    /// `None` when the protected band is empty (`d = D`).
    pub beta2: Option<Real>,
    pub xi: Real,
    pub q1: Real,
    pub q2: Real,
    pub q1_neighbor: Real,
}

impl AsymptoticCell {
    pub fn power(&self) -> Real {
        self.q1 + self.q2
    }
}

/// Outcome of [`AsymptoticSolver::solve_relaxed_cell`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RelaxedOutcome {
    /// The reused-band power equals the cap.
    Equality(AsymptoticCell),
    /// Even with every user on the reused band the cell spends less than
    /// the cap; `d = D` and the equality system has no solution.
    Slack { q1_max: Real },
    /// The pivot condition yields `ξ < 0`.
    NegativeXi { d_m: Real, xi: Real },
}

impl RelaxedOutcome {
    pub fn cell(&self) -> Option<&AsymptoticCell> {
        match self {
            RelaxedOutcome::Equality(c) => Some(c),
            _ => None,
        }
    }
}

/// Solution of the limiting joint problem at one reuse factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticSolution {
    pub alpha: Real,
    pub cells: [AsymptoticCell; 2],
    pub q_t: Real,
}

impl AsymptoticSolution {
    /// Mean pivot distance of the two cells.
    pub fn d_opt(&self) -> Real {
        0.5 * (self.cells[0].d_m + self.cells[1].d_m)
    }

    pub fn q1(&self) -> Real {
        self.cells[0].q1 + self.cells[1].q1
    }

    pub fn q2(&self) -> Real {
        self.cells[0].q2 + self.cells[1].q2
    }
}

/// Residuals of the four limiting equations, each relative to its
/// right-hand side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    pub budget1: Real,
    pub budget2: Real,
    pub pivot: Real,
    pub power: Real,
}

impl Residuals {
    pub fn max(&self) -> Real {
        self.budget1.max(self.budget2).max(self.pivot).max(self.power)
    }
}

/// Quadrature nodes `(x, weight)` with the density folded into the weight.
type Nodes = Vec<(Real, Real)>;

/// Pseudo-users `(gain, rate)` of one band and the power of their solution.
struct Band {
    users: Vec<(Real, Real)>,
}

pub struct AsymptoticSolver<'a> {
    kernel: &'a Kernel<Real>,
    scenario: &'a AsymptoticScenario,
    rule: GaussLegendre<Real>,
}

impl<'a> AsymptoticSolver<'a> {
    pub fn new(kernel: &'a Kernel<Real>, scenario: &'a AsymptoticScenario) -> Result<Self> {
        scenario.validate()?;
        Ok(AsymptoticSolver {
            kernel,
            scenario,
            rule: GaussLegendre::new(scenario.quad.order),
        })
    }

    pub fn scenario(&self) -> &AsymptoticScenario {
        self.scenario
    }

    fn params(&self) -> &SystemParams {
        &self.scenario.params
    }

    fn nodes(&self, a: Real, b: Real) -> Nodes {
        let p = self.params();
        let density = 1.0 / (p.cell_radius_m - p.epsilon_m);
        let mut out = Vec::with_capacity(self.rule.len() * self.scenario.quad.panels);
        if b > a {
            self.rule
                .for_each_node(a.ln(), b.ln(), self.scenario.quad.panels, |u, w| {
                    let x = u.exp();
                    out.push((x, w * x * density));
                });
        }
        out
    }

    fn band1(&self, cell: usize, d: Real, q_bar: Real) -> Result<Band> {
        let r = self.scenario.mean_rate[cell];
        let users = self
            .nodes(self.params().epsilon_m, d)
            .into_iter()
            .map(|(x, w)| Ok((self.params().g1(x, q_bar)?, r * w)))
            .collect::<Result<_>>()?;
        Ok(Band { users })
    }

    fn band2(&self, cell: usize, d: Real) -> Result<Band> {
        let r = self.scenario.mean_rate[cell];
        let users = self
            .nodes(d, self.params().cell_radius_m)
            .into_iter()
            .map(|(x, w)| Ok((self.params().g2(x)?, r * w)))
            .collect::<Result<_>>()?;
        Ok(Band { users })
    }

    /// `(β̃₁, Q₁)` with the reused band holding the users in `[ε, d]`.
    fn reused(&self, cell: usize, d: Real, q_bar: Real, alpha: Real) -> Result<(Real, Real)> {
        let band = self.band1(cell, d, q_bar)?;
        Ok(match solve_level(self.kernel, &band.users, alpha)? {
            Some(sol) => (sol.beta, sol.power(&band.users)),
            None => (0.0, 0.0),
        })
    }

    /// `(β₂, Q₂)` with the protected band holding the users in `[d, D]`.
    fn protected(&self, cell: usize, d: Real, alpha: Real) -> Result<(Option<Real>, Real)> {
        let band = self.band2(cell, d)?;
        Ok(match solve_level(self.kernel, &band.users, 0.5 * (1.0 - alpha))? {
            Some(sol) => (Some(sol.beta), sol.power(&band.users)),
            None => (None, 0.0),
        })
    }

    fn assemble(&self, cell: usize, d: Real, bt: Real, q1: Real, q_bar: Real, alpha: Real) -> Result<RelaxedOutcome> {
        let p = self.params();
        let (beta2, q2) = if d < p.cell_radius_m {
            self.protected(cell, d, alpha)?
        } else {
            (None, 0.0)
        };
        let xi = match beta2 {
            Some(b2) => {
                let g1 = p.g1(d, q_bar)?;
                let g2 = p.g2(d)?;
                g1 * self.kernel.cap_f(g1 * bt)? / (g2 * self.kernel.cap_f(g2 * b2)?) - 1.0
            }
            None => 0.0,
        };
        if xi < 0.0 {
            return Ok(RelaxedOutcome::NegativeXi { d_m: d, xi });
        }
        Ok(RelaxedOutcome::Equality(AsymptoticCell {
            d_m: d,
            beta1_tilde: bt,
            beta1: bt * (1.0 + xi),
            beta2,
            xi,
            q1,
            q2,
            q1_neighbor: q_bar,
        }))
    }

    /// Largest reused-band power of `cell` (all users on the reused band).
    pub fn q1_max(&self, cell: usize, q_bar: Real, alpha: Real) -> Result<Real> {
        if alpha == 0.0 {
            return Ok(0.0);
        }
        Ok(self.reused(cell, self.params().cell_radius_m, q_bar, alpha)?.1)
    }

    /// Solves the limiting system of `cell` with the power equality relaxed
    /// to `Q₁ <= q1_cap`, the neighbor spending `q1_neighbor`.
    pub fn solve_relaxed_cell(&self, cell: usize, q1_cap: Real, q1_neighbor: Real, alpha: Real) -> Result<RelaxedOutcome> {
        let p = self.params();
        let (eps, dmax) = (p.epsilon_m, p.cell_radius_m);
        if !(q1_cap >= 0.0 && q1_neighbor >= 0.0) {
            return Err(Error::Domain {
                what: "reused-band powers",
                value: q1_cap.min(q1_neighbor),
            });
        }
        if alpha == 0.0 {
            return self.assemble(cell, eps, 0.0, 0.0, q1_neighbor, alpha);
        }
        let (bt_max, q1_max) = self.reused(cell, dmax, q1_neighbor, alpha)?;
        const REL: Real = 1e-12;
        if q1_cap >= q1_max * (1.0 - REL) {
            if q1_cap > q1_max * (1.0 + REL) || alpha < 1.0 && q1_cap > q1_max {
                return Ok(RelaxedOutcome::Slack { q1_max });
            }
            return self.assemble(cell, dmax, bt_max, q1_max, q1_neighbor, alpha);
        }
        if alpha == 1.0 {
            // the protected band has zero width, so every user must be reused
            return Ok(RelaxedOutcome::Slack { q1_max });
        }
        if q1_cap == 0.0 {
            return self.assemble(cell, eps, 0.0, 0.0, q1_neighbor, alpha);
        }
        let d = self.pivot_for(cell, q1_cap, q1_neighbor, alpha, q1_max)?;
        let (bt, q1) = self.reused(cell, d, q1_neighbor, alpha)?;
        self.assemble(cell, d, bt, q1, q1_neighbor, alpha)
    }

    /// Root of `Q₁(d) = cap` on `(ε, D)`. A coarse scan checks that `Q₁`
    /// increases in `d`; if it does not, a finer scan locates the first
    /// crossing.
    fn pivot_for(&self, cell: usize, cap: Real, q_bar: Real, alpha: Real, q1_max: Real) -> Result<Real> {
        let p = self.params();
        let (eps, dmax) = (p.epsilon_m, p.cell_radius_m);
        let q1_at = |d: Real| -> Result<Real> { Ok(self.reused(cell, d, q_bar, alpha)?.1) };
        let scan = |n: usize| -> Result<(Vec<Real>, Vec<Real>)> {
            let ds: Vec<Real> = (0..=n).map(|j| eps + (dmax - eps) * j as Real / n as Real).collect();
            let mut qs = Vec::with_capacity(n + 1);
            for (j, &d) in ds.iter().enumerate() {
                qs.push(match j {
                    0 => 0.0,
                    _ if j == n => q1_max,
                    _ => q1_at(d)?,
                });
            }
            Ok((ds, qs))
        };
        let (mut ds, mut qs) = scan(8)?;
        if qs.windows(2).any(|w| w[1] < w[0]) {
            (ds, qs) = scan(256)?;
        }
        let j = qs.iter().position(|&q| q >= cap).unwrap_or(qs.len() - 1);
        let br = Bracket::new(ds[j - 1], qs[j - 1] - cap, ds[j], qs[j] - cap);
        let tol = 1e-13 * dmax;
        illinois("pivot distance", |d: Real| Ok(q1_at(d)? - cap), br, tol, 1e-13 * cap, 200)
    }

    /// Residuals of the limiting equations at a solved cell.
    pub fn residuals(&self, cell: usize, sol: &AsymptoticCell, alpha: Real) -> Result<Residuals> {
        let p = self.params();
        let r = self.scenario.mean_rate[cell];
        let (eps, dmax) = (p.epsilon_m, p.cell_radius_m);
        let q = sol.q1_neighbor;
        let mut b1 = 0.0;
        let mut pw = 0.0;
        for (x, w) in self.nodes(eps, sol.d_m) {
            b1 += r * w * script_g(self.kernel, p, x, sol.beta1, q, sol.xi)?;
            pw += r * w * script_f(self.kernel, p, x, sol.beta1, q, sol.xi)?;
        }
        let mut b2 = 0.0;
        let mut piv = 0.0;
        if let Some(beta2) = sol.beta2 {
            for (x, w) in self.nodes(sol.d_m, dmax) {
                b2 += r * w * script_g(self.kernel, p, x, beta2, 0.0, 0.0)?;
            }
            let g1 = p.g1(sol.d_m, q)? / (1.0 + sol.xi);
            let g2 = p.g2(sol.d_m)?;
            let lhs = g1 * self.kernel.cap_f(g1 * sol.beta1)?;
            let rhs = g2 * self.kernel.cap_f(g2 * beta2)?;
            piv = (lhs - rhs).abs() / rhs;
        }
        let share2 = 0.5 * (1.0 - alpha);
        Ok(Residuals {
            budget1: if alpha > 0.0 { (b1 - alpha).abs() / alpha } else { b1 },
            budget2: if sol.beta2.is_some() { (b2 - share2).abs() / share2 } else { 0.0 },
            pivot: piv,
            power: if sol.q1 > 0.0 { (pw - sol.q1).abs() / sol.q1 } else { pw },
        })
    }

    /// Both cells at reused-band powers `(qa, qb)`; `None` when either
    /// equality system has no solution.
    pub fn joint(&self, qa: Real, qb: Real, alpha: Real) -> Result<Option<AsymptoticSolution>> {
        let a = self.solve_relaxed_cell(0, qa, qb, alpha)?;
        let Some(&a) = a.cell() else { return Ok(None) };
        let b = if self.scenario.is_symmetric() && qa == qb {
            RelaxedOutcome::Equality(a)
        } else {
            self.solve_relaxed_cell(1, qb, qa, alpha)?
        };
        let Some(&b) = b.cell() else { return Ok(None) };
        Ok(Some(AsymptoticSolution {
            alpha,
            cells: [a, b],
            q_t: a.power() + b.power(),
        }))
    }

    /// Limiting power when every user is confined to its protected band.
    pub fn naive_power(&self, alpha: Real) -> Result<Real> {
        let share = 0.5 * (1.0 - alpha);
        self.all_on_g2(share)
    }

    fn all_on_g2(&self, share: Real) -> Result<Real> {
        let mut total = 0.0;
        for cell in 0..2 {
            let band = self.band2(cell, self.params().epsilon_m)?;
            total += solve_level(self.kernel, &band.users, share)?.map_or(0.0, |s| s.power(&band.users));
        }
        Ok(total)
    }

    /// Minimizes the limiting total power over `(Q₁^A, Q₁^B)`. Symmetric
    /// scenarios are searched on the diagonal unless `full_grid` is set.
    pub fn search(&self, alpha: Real, grid: &GridSpec, full_grid: bool) -> Result<AsymptoticSolution> {
        grid.validate()?;
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::config("alpha", format!("{alpha} is outside [0, 1]")));
        }
        if alpha == 0.0 {
            return self
                .joint(0.0, 0.0, 0.0)?
                .ok_or_else(|| Error::Infeasible("protected bands cannot serve the users".into()));
        }
        if alpha == 1.0 {
            return self.full_reuse();
        }
        let reference = self.naive_power(alpha)?;
        let floor = reference.min(self.all_on_g2(1.0)?);
        let lo = (grid.lo_factor * floor).ln();
        let hi = (grid.hi_factor * reference).ln();
        let n = grid.points;
        let axis: Vec<Real> = (0..n).map(|i| lo + (hi - lo) * i as Real / (n - 1) as Real).collect();
        if self.scenario.is_symmetric() && !full_grid {
            return self.search_diagonal(alpha, &axis);
        }
        self.search_grid(alpha, &axis, grid)
    }

    fn diagonal_total(&self, t: Real, alpha: Real) -> Result<Option<AsymptoticSolution>> {
        let q = t.exp();
        self.joint(q, q, alpha)
    }

    fn search_diagonal(&self, alpha: Real, axis: &[Real]) -> Result<AsymptoticSolution> {
        let vals: Vec<Option<AsymptoticSolution>> = axis
            .par_iter()
            .map(|&t| self.diagonal_total(t, alpha))
            .collect::<Result<_>>()?;
        let best = (0..axis.len())
            .filter_map(|i| vals[i].map(|s| (i, s.q_t)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
            .ok_or_else(|| Error::Infeasible("every point of the diagonal search was eliminated".into()))?;
        let step = axis[1] - axis[0];
        let objective = |t: Real| -> Result<Real> { Ok(self.diagonal_total(t, alpha)?.map_or(Real::INFINITY, |s| s.q_t)) };
        let t = golden_min(objective, axis[best] - step, axis[best] + step, 1e-10)?;
        let refined = self.diagonal_total(t, alpha)?;
        Ok(match refined {
            Some(s) if s.q_t <= vals[best].unwrap().q_t => s,
            _ => vals[best].unwrap(),
        })
    }

    fn search_grid(&self, alpha: Real, axis: &[Real], grid: &GridSpec) -> Result<AsymptoticSolution> {
        let mut best: Option<AsymptoticSolution> = None;
        let mut axes = (axis.to_vec(), axis.to_vec());
        let mut step = axis[1] - axis[0];
        for level in 0..=grid.refinements {
            let pts: Vec<(Real, Real)> = axes
                .0
                .iter()
                .flat_map(|&a| axes.1.iter().map(move |&b| (a, b)))
                .collect();
            let sols: Vec<Option<AsymptoticSolution>> = pts
                .par_iter()
                .map(|&(a, b)| self.joint(a.exp(), b.exp(), alpha))
                .collect::<Result<_>>()?;
            for s in sols.into_iter().flatten() {
                let key = (s.q_t, s.cells[0].q1, s.cells[1].q1);
                if best.is_none_or(|b| key < (b.q_t, b.cells[0].q1, b.cells[1].q1)) {
                    best = Some(s);
                }
            }
            let Some(b) = best else { break };
            if level < grid.refinements {
                let m = grid.refine_points;
                let around = |c: Real| -> Vec<Real> {
                    (0..m).map(|i| c - step + 2.0 * step * i as Real / (m - 1) as Real).collect()
                };
                axes = (around(b.cells[0].q1.ln()), around(b.cells[1].q1.ln()));
                step = 2.0 * step / (m - 1) as Real;
            }
        }
        best.ok_or_else(|| Error::Infeasible("every point of the reused-band power grid was eliminated".into()))
    }

    /// `α = 1`: the symmetric best-response fixed point `Q₁ = Q₁max(Q₁)`.
    fn full_reuse(&self) -> Result<AsymptoticSolution> {
        let mut qa = 0.0;
        let mut qb = 0.0;
        for _ in 0..500 {
            let na = self.q1_max(0, qb, 1.0)?;
            let nb = self.q1_max(1, na, 1.0)?;
            let done = (na - qa).abs() <= 1e-13 * na && (nb - qb).abs() <= 1e-13 * nb;
            (qa, qb) = (na, nb);
            if !(qa.is_finite() && qb.is_finite()) || qa > 1e6 * self.all_on_g2(1.0)? {
                break;
            }
            if done {
                return self
                    .joint(qa, qb, 1.0)?
                    .ok_or_else(|| Error::Infeasible("full reuse fixed point rejected".into()));
            }
        }
        Err(Error::Infeasible("full reuse: best-response iteration does not converge".into()))
    }
}

/// One reuse factor of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub alpha: Real,
    pub solution: Option<AsymptoticSolution>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub r_t_bps: Real,
    pub points: Vec<SweepPoint>,
    /// Minimum over `α`, refined between the neighbors of the best grid
    /// point when `refine` was requested.
    pub best: Option<AsymptoticSolution>,
}

impl SweepResult {
    pub fn alpha_opt(&self) -> Option<Real> {
        self.best.map(|s| s.alpha)
    }

    pub fn d_opt(&self) -> Option<Real> {
        self.best.map(|s| s.d_opt())
    }
}

/// Evaluates the limiting power over `alpha_grid` and returns the minimum.
pub fn reuse_factor_sweep(
    solver: &AsymptoticSolver,
    alpha_grid: &[Real],
    grid: &GridSpec,
    refine: bool,
) -> Result<SweepResult> {
    if alpha_grid.len() < 3 {
        return Err(Error::config("alpha_grid", "need at least 3 reuse factors"));
    }
    if let Some(a) = alpha_grid.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(Error::config("alpha_grid", format!("{a} is outside [0, 1]")));
    }
    let mut alphas = alpha_grid.to_vec();
    alphas.sort_by(Real::total_cmp);
    let points: Vec<SweepPoint> = alphas
        .par_iter()
        .map(|&alpha| {
            let solution = match solver.search(alpha, grid, false) {
                Ok(s) => Some(s),
                Err(e) if e.is_infeasible() => None,
                Err(e) => return Err(e),
            };
            Ok(SweepPoint { alpha, solution })
        })
        .collect::<Result<_>>()?;
    let best_i = (0..points.len())
        .filter_map(|i| points[i].solution.map(|s| (i, s.q_t)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i);
    let mut best = best_i.and_then(|i| points[i].solution);
    if let (true, Some(i)) = (refine, best_i) {
        let lo = points[i.saturating_sub(1)].alpha;
        let hi = points[(i + 1).min(points.len() - 1)].alpha;
        let objective = |a: Real| -> Result<Real> {
            match solver.search(a, grid, false) {
                Ok(s) => Ok(s.q_t),
                Err(e) if e.is_infeasible() => Ok(Real::INFINITY),
                Err(e) => Err(e),
            }
        };
        let a = golden_min(objective, lo, hi, 1e-6)?;
        if let Ok(s) = solver.search(a, grid, false) {
            if best.is_none_or(|b| s.q_t < b.q_t) {
                best = Some(s);
            }
        }
    }
    Ok(SweepResult {
        r_t_bps: solver.scenario().r_t_bps(0),
        points,
        best,
    })
}

pub const SWEEP_CSV_HEADER: &str = "alpha,r_t_bps,d_opt_m,q1,q2,q_t,feasible";

fn sweep_row(out: &mut String, alpha: Real, r_t: Real, s: Option<&AsymptoticSolution>) {
    match s {
        Some(s) => out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},1\n",
            alpha,
            r_t,
            s.d_opt(),
            s.q1(),
            s.q2(),
            s.q_t
        )),
        None => out.push_str(&format!("{alpha:.16e},{r_t:.16e},NaN,NaN,NaN,NaN,0\n")),
    }
}

/// Every evaluated reuse factor of every sweep.
pub fn sweep_csv(results: &[SweepResult]) -> String {
    let mut out = format!("{SWEEP_CSV_HEADER}\n");
    for r in results {
        for p in &r.points {
            sweep_row(&mut out, p.alpha, r.r_t_bps, p.solution.as_ref());
        }
    }
    out
}

/// One row per sweep holding its optimal reuse factor.
pub fn optimum_csv(results: &[SweepResult]) -> String {
    let mut out = format!("{SWEEP_CSV_HEADER}\n");
    for r in results {
        sweep_row(&mut out, r.alpha_opt().unwrap_or(Real::NAN), r.r_t_bps, r.best.as_ref());
    }
    out
}
