//! Physical-layer model of the two-cell linear network.
//!
//! Base stations A and B sit `2D` apart on a line; a user at distance `x`
//! from its own station is `2D - x` away from the other one. All powers are
//! in watts against the total-band noise power `σ² = N₀ B`.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Real;

/// Monomial path loss `ρ_dB(x) = offset_db + 10 s log₁₀(x / 1 km)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLossModel {
    pub exponent: Real,
    pub offset_db: Real,
}

impl PathLossModel {
    /// Okumura-Hata fit for `s = 2` at 2.4 GHz.
    pub const FREE_SPACE: PathLossModel = PathLossModel {
        exponent: 2.0,
        offset_db: 100.04,
    };

    /// Okumura-Hata fit for `s = 3` at 2.4 GHz.
    pub const URBAN: PathLossModel = PathLossModel {
        exponent: 3.0,
        offset_db: 97.52,
    };

    /// Preset for exponent 2 or 3.
    pub fn for_exponent(s: Real) -> Result<Self> {
        if s == 2.0 {
            Ok(Self::FREE_SPACE)
        } else if s == 3.0 {
            Ok(Self::URBAN)
        } else {
            Err(Error::config("path_loss.exponent", format!("no preset for exponent {s}")))
        }
    }

    /// Path loss in dB at `x_m` metres.
    pub fn loss_db(&self, x_m: Real) -> Result<Real> {
        if !(x_m > 0.0 && x_m.is_finite()) {
            return Err(Error::Domain {
                what: "path loss distance",
                value: x_m,
            });
        }
        Ok(self.offset_db + 10.0 * self.exponent * (x_m / 1000.0).log10())
    }

    /// Linear power gain `ρ(x)`.
    pub fn rho(&self, x_m: Real) -> Result<Real> {
        Ok(10f64.powf(-self.loss_db(x_m)? / 10.0))
    }
}

fn default_interference_scale() -> Real {
    1.0
}

/// Constants of the network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemParams {
    pub bandwidth_hz: Real,
    pub noise_psd_dbm_hz: Real,
    pub cell_radius_m: Real,
    /// Informational only; the carrier enters through `path_loss.offset_db`.
    pub carrier_ghz: Real,
    /// Fraction of subcarriers reused by both cells.
    pub alpha: Real,
    pub path_loss: PathLossModel,
    pub epsilon_m: Real,
    /// Multiplier on the cross-cell channel gain `ρ(2D - x)`; 0 decouples
    /// the cells.
    #[serde(default = "default_interference_scale")]
    pub interference_scale: Real,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            bandwidth_hz: 5e6,
            noise_psd_dbm_hz: -170.0,
            cell_radius_m: 500.0,
            carrier_ghz: 2.4,
            alpha: 0.5,
            path_loss: PathLossModel::FREE_SPACE,
            epsilon_m: 1.0,
            interference_scale: 1.0,
        }
    }
}

impl SystemParams {
    pub fn with_alpha(mut self, alpha: Real) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_path_loss(mut self, path_loss: PathLossModel) -> Self {
        self.path_loss = path_loss;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: Real, field: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be finite, got {v}")))
            }
        };
        finite(self.noise_psd_dbm_hz, "noise_psd_dbm_hz")?;
        finite(self.carrier_ghz, "carrier_ghz")?;
        finite(self.path_loss.offset_db, "path_loss.offset_db")?;
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return Err(Error::config("bandwidth_hz", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config("alpha", format!("must lie in [0, 1], got {}", self.alpha)));
        }
        if !(self.cell_radius_m > 0.0 && self.cell_radius_m.is_finite()) {
            return Err(Error::config("cell_radius_m", "must be positive"));
        }
        if !(self.epsilon_m > 0.0 && self.epsilon_m < self.cell_radius_m) {
            return Err(Error::config(
                "epsilon_m",
                format!("must lie in (0, cell_radius_m), got {}", self.epsilon_m),
            ));
        }
        if !(self.path_loss.exponent >= 2.0 && self.path_loss.exponent.is_finite()) {
            return Err(Error::config("path_loss.exponent", "must be at least 2"));
        }
        if !(self.interference_scale >= 0.0 && self.interference_scale.is_finite()) {
            return Err(Error::config("interference_scale", "must be non-negative"));
        }
        Ok(())
    }

    /// Total noise power `σ² = N₀ B` in watts.
    pub fn noise_power(&self) -> Real {
        10f64.powf((self.noise_psd_dbm_hz - 30.0) / 10.0) * self.bandwidth_hz
    }

    /// Share of each protected band, `(1 - α) / 2`.
    pub fn protected_share(&self) -> Real {
        0.5 * (1.0 - self.alpha)
    }

    fn check_position(&self, x_m: Real) -> Result<()> {
        if x_m >= self.epsilon_m && x_m <= self.cell_radius_m {
            Ok(())
        } else {
            Err(Error::Domain {
                what: "user position",
                value: x_m,
            })
        }
    }

    pub fn rho(&self, x_m: Real) -> Result<Real> {
        self.path_loss.rho(x_m)
    }

    /// Gain-to-noise ratio on a protected band.
    pub fn g2(&self, x_m: Real) -> Result<Real> {
        self.check_position(x_m)?;
        Ok(self.rho(x_m)? / self.noise_power())
    }

    /// Cross-cell gain over noise `ρ(2D - x) / σ²`, so that
    /// `g1(x, q) = g2(x) / (1 + h(x) q)`.
    pub fn h(&self, x_m: Real) -> Result<Real> {
        self.check_position(x_m)?;
        let far = 2.0 * self.cell_radius_m - x_m;
        Ok(self.interference_scale * self.rho(far)? / self.noise_power())
    }

    /// Gain-to-interference-plus-noise ratio on the reused band when the
    /// other station spends `q_bar` watts there.
    pub fn g1(&self, x_m: Real, q_bar: Real) -> Result<Real> {
        if !(q_bar >= 0.0) {
            return Err(Error::Domain {
                what: "interfering power",
                value: q_bar,
            });
        }
        let g2 = self.g2(x_m)?;
        let h = self.h(x_m)?;
        Ok(g2 / (1.0 + h * q_bar))
    }

    /// Converts a rate in nats/s to nats/s/Hz.
    pub fn normalized_rate(&self, r_nats_s: Real) -> Real {
        r_nats_s / self.bandwidth_hz
    }
}

/// Converts bits to nats.
pub fn bits_to_nats(bits: Real) -> Real {
    bits * std::f64::consts::LN_2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CellId {
    A,
    B,
}

impl CellId {
    pub fn other(self) -> CellId {
        match self {
            CellId::A => CellId::B,
            CellId::B => CellId::A,
        }
    }
}

/// A user: distance to its serving station and rate requirement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserRecord {
    #[serde(rename = "x_m")]
    pub position_m: Real,
    #[serde(rename = "r_nats_s")]
    pub rate_nats_s: Real,
}

/// Users of one cell, sorted by distance to the station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellScenario {
    pub cell_id: CellId,
    pub users: Vec<UserRecord>,
}

impl CellScenario {
    /// Sorts `users` by position; equal positions keep their input order.
    pub fn new(cell_id: CellId, mut users: Vec<UserRecord>) -> Self {
        users.sort_by(|a, b| a.position_m.total_cmp(&b.position_m));
        CellScenario { cell_id, users }
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn validate(&self, params: &SystemParams) -> Result<()> {
        for (i, u) in self.users.iter().enumerate() {
            if !(u.position_m >= params.epsilon_m && u.position_m <= params.cell_radius_m) {
                return Err(Error::config(
                    format!("cells[{:?}].users[{i}].x_m", self.cell_id),
                    format!("must lie in [epsilon_m, cell_radius_m], got {}", u.position_m),
                ));
            }
            if !(u.rate_nats_s > 0.0 && u.rate_nats_s.is_finite()) {
                return Err(Error::config(
                    format!("cells[{:?}].users[{i}].r_nats_s", self.cell_id),
                    format!("must be positive, got {}", u.rate_nats_s),
                ));
            }
        }
        if self.users.windows(2).any(|w| w[0].position_m > w[1].position_m) {
            return Err(Error::config(
                format!("cells[{:?}].users", self.cell_id),
                "users must be sorted by distance",
            ));
        }
        Ok(())
    }

    /// Channel description of every user, in cell order.
    pub fn links(&self, params: &SystemParams) -> Result<Vec<Link>> {
        self.users
            .iter()
            .map(|u| {
                Ok(Link {
                    x_m: u.position_m,
                    rate: params.normalized_rate(u.rate_nats_s),
                    g2: params.g2(u.position_m)?,
                    h: params.h(u.position_m)?,
                })
            })
            .collect()
    }
}

/// What the allocators need to know about a user: normalized rate `R_k`
/// (nats/s/Hz), protected-band gain `g2` and cross-cell coefficient `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub x_m: Real,
    pub rate: Real,
    pub g2: Real,
    pub h: Real,
}

impl Link {
    /// Reused-band gain under `q_bar` watts of interference.
    #[inline]
    pub fn g1(&self, q_bar: Real) -> Real {
        self.g2 / (1.0 + self.h * q_bar)
    }
}

/// Two-cell scenario as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub system: SystemParams,
    pub cells: Vec<CellScenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Scenario {
    pub fn new(system: SystemParams, cell_a: CellScenario, cell_b: CellScenario) -> Self {
        Scenario {
            system,
            cells: vec![cell_a, cell_b],
            seed: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut s: Scenario = serde_json::from_str(text)?;
        for cell in &mut s.cells {
            let sorted = CellScenario::new(cell.cell_id, std::mem::take(&mut cell.users));
            *cell = sorted;
        }
        s.validate()?;
        Ok(s)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        if self.cells.len() != 2 {
            return Err(Error::config("cells", format!("expected 2 cells, got {}", self.cells.len())));
        }
        if self.cells[0].cell_id == self.cells[1].cell_id {
            return Err(Error::config("cells", "cell ids must be A and B"));
        }
        for cell in &self.cells {
            cell.validate(&self.system)?;
        }
        Ok(())
    }

    /// Cells in (A, B) order.
    pub fn pair(&self) -> (&CellScenario, &CellScenario) {
        if self.cells[0].cell_id == CellId::A {
            (&self.cells[0], &self.cells[1])
        } else {
            (&self.cells[1], &self.cells[0])
        }
    }
}

/// Draws `k_per_cell` users per cell uniformly on `[ε, D]`, all with rate
/// `rate_per_user` (nats/s).
pub fn generate_scenario(
    params: &SystemParams,
    k_per_cell: usize,
    rate_per_user: Real,
    seed: u64,
) -> (CellScenario, CellScenario) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_with_rng(params, k_per_cell, rate_per_user, &mut rng)
}

pub fn generate_with_rng<R: Rng>(
    params: &SystemParams,
    k_per_cell: usize,
    rate_per_user: Real,
    rng: &mut R,
) -> (CellScenario, CellScenario) {
    let mut draw = |id| {
        let users = (0..k_per_cell)
            .map(|_| UserRecord {
                position_m: rng.gen_range(params.epsilon_m..=params.cell_radius_m),
                rate_nats_s: rate_per_user,
            })
            .collect();
        CellScenario::new(id, users)
    };
    let a = draw(CellId::A);
    let b = draw(CellId::B);
    (a, b)
}
