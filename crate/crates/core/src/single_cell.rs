//! Water-filling of a set of users sharing one band.
//!
//! For gains `g_k` and normalized rates `R_k`, the level `β` solves
//! `Σ R_k / C(g_k β) = share`; user `k` then gets the band fraction
//! `γ_k = R_k / C(g_k β)` and power `P_k = f⁻¹(g_k β) / g_k`, which delivers
//! exactly `R_k`.

use crate::error::{Error, Result};
use crate::kernel::{Kernel, LevelPoint};
use crate::roots::newton_unbracketed;
use crate::scalar::EULER_GAMMA;
use crate::Real;

/// Band fraction and power of one user on one band.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BandShare {
    pub gamma: Real,
    pub power: Real,
}

impl BandShare {
    /// Ergodic rate delivered at gain `g`, in nats/s/Hz.
    pub fn rate(&self, kernel: &Kernel<Real>, g: Real) -> Result<Real> {
        if self.gamma == 0.0 {
            return Ok(0.0);
        }
        Ok(self.gamma * kernel.e_log(g * self.power)?)
    }
}

/// Solution of a level equation.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSolution {
    pub beta: Real,
    pub points: Vec<LevelPoint<Real>>,
}

impl LevelSolution {
    /// Per-user shares for the gains the level was solved with.
    pub fn shares(&self, users: &[(Real, Real)]) -> Vec<BandShare> {
        users
            .iter()
            .zip(&self.points)
            .map(|(&(g, r), p)| BandShare {
                gamma: r / p.cap,
                power: p.x / g,
            })
            .collect()
    }

    /// `Σ γ_k P_k = Σ R_k f⁻¹(g_k β) / (g_k C(g_k β))`.
    pub fn power(&self, users: &[(Real, Real)]) -> Real {
        users
            .iter()
            .zip(&self.points)
            .map(|(&(g, r), p)| r * p.power_per_rate(g))
            .sum()
    }
}

/// Evaluates `Σ R_k / C(g_k β)` and its derivative in `ln β`.
pub(crate) fn band_demand(
    kernel: &Kernel<Real>,
    users: &[(Real, Real)],
    beta: Real,
    points: &mut Vec<LevelPoint<Real>>,
) -> Result<(Real, Real)> {
    points.clear();
    let (mut demand, mut slope) = (0.0, 0.0);
    for &(g, r) in users {
        let p = kernel.level(g * beta)?;
        demand += r / p.cap;
        slope -= r * p.dcap_dy * p.y / (p.cap * p.cap);
        points.push(p);
    }
    Ok((demand, slope))
}

/// A starting level: the `β` at which a user of geometric-mean gain would
/// need `Σ R / share` nats/s/Hz of spectral efficiency.
fn initial_beta(kernel: &Kernel<Real>, users: &[(Real, Real)], share: Real) -> Result<Real> {
    let total: Real = users.iter().map(|u| u.1).sum();
    let c = total / share;
    let x = if c < 0.5 {
        c / (1.0 - c)
    } else {
        (c + EULER_GAMMA).exp_m1()
    };
    let ln_g = users.iter().map(|u| u.0.ln()).sum::<Real>() / users.len() as Real;
    Ok(kernel.f(x.min(1e300))? / ln_g.exp())
}

/// Solves `Σ R_k / C(g_k β) = share` for users given as `(g_k, R_k)`.
///
/// Returns `None` for an empty user set.
pub fn solve_level(kernel: &Kernel<Real>, users: &[(Real, Real)], share: Real) -> Result<Option<LevelSolution>> {
    if users.is_empty() {
        return Ok(None);
    }
    for &(g, r) in users {
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::Domain { what: "user gain", value: g });
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::Domain { what: "user rate", value: r });
        }
    }
    if !(share > 0.0) {
        return Err(Error::Infeasible(format!(
            "{} users with positive rates cannot share a band of size {share}",
            users.len()
        )));
    }
    let ln_share = share.ln();
    let mut points = Vec::with_capacity(users.len());
    let t0 = initial_beta(kernel, users, share)?.ln();
    // increasing in t: ln share - ln demand(e^t)
    let t = newton_unbracketed(
        "band level",
        |t: Real| {
            let (d, slope) = band_demand(kernel, users, t.exp(), &mut points)?;
            Ok((ln_share - d.ln(), -slope / d))
        },
        t0,
        16.0,
        kernel.config().max_bracket_expansions,
        4.0 * Real::EPSILON,
        200,
    )?;
    let beta = t.exp();
    if points.len() != users.len() || points[0].y != users[0].0 * beta {
        band_demand(kernel, users, beta, &mut points)?;
    }
    Ok(Some(LevelSolution { beta, points }))
}

/// Allocation of the users confined to one protected band.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtectedAllocation {
    /// `None` when no user is served on the band.
    pub beta2: Option<Real>,
    pub per_user: Vec<BandShare>,
    pub q2: Real,
}

/// `β₂` for users `(g2_k, R_k)` on a band of size `band_share`.
pub fn solve_beta2(kernel: &Kernel<Real>, users: &[(Real, Real)], band_share: Real) -> Result<Option<Real>> {
    Ok(solve_level(kernel, users, band_share)?.map(|s| s.beta))
}

/// Water-fills users `(g2_k, R_k)` on a protected band of size `band_share`.
pub fn allocate_protected(
    kernel: &Kernel<Real>,
    users: &[(Real, Real)],
    band_share: Real,
) -> Result<ProtectedAllocation> {
    Ok(match solve_level(kernel, users, band_share)? {
        None => ProtectedAllocation {
            beta2: None,
            per_user: Vec::new(),
            q2: 0.0,
        },
        Some(sol) => {
            let per_user = sol.shares(users);
            let q2 = per_user.iter().map(|s| s.gamma * s.power).sum();
            ProtectedAllocation {
                beta2: Some(sol.beta),
                per_user,
                q2,
            }
        }
    })
}
