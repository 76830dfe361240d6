//! Rayleigh-fading expectations and their monotone inverses.
//!
//! With `Z` a standard exponential variable, everything downstream is built
//! from three expectations of `x >= 0`:
//!
//! * `e_log(x)   = E[ln(1 + xZ)]`
//! * `e_ratio(x) = E[Z / (1 + xZ)]`
//! * `e_sq(x)    = E[Z² / (1 + xZ)²]`
//!
//! and from `f(x) = e_log(x) / e_ratio(x) - x`, which is strictly increasing
//! with `f'(x) = e_log(x) e_sq(x) / e_ratio(x)²`. Its inverse gives the
//! per-user operating point for a water level `y`: `cap(y) = e_log(f⁻¹(y))`
//! is the spectral efficiency and `cap_f(y) = e_ratio(f⁻¹(y))` the marginal
//! factor entering the pivot equations.
//!
//! All three expectations reduce to `S(u) = e^u E₁(u)` with `u = 1/x`. For
//! `u >= 1` they are evaluated from the tail of the continued fraction
//! `S = 1/(u+1 - 1/(u+3 - 4/(u+5 - 9/(u+7 - …))))`, written so that no
//! subtraction of nearly equal quantities occurs; for `u < 1` the power
//! series of `E₁` is used.

use crate::error::{Error, Result};
use crate::scalar::{Scalar, EULER_GAMMA};

/// Tolerances of the kernel evaluations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig<T> {
    /// Absolute truncation tolerance of the series and continued fractions.
    pub quad_abs_tol: T,
    /// Relative truncation tolerance of the series and continued fractions.
    pub quad_rel_tol: T,
    /// Relative tolerance on `|f(f_inv(y)) - y| / y`.
    pub root_tol: T,
    pub max_bracket_expansions: u32,
}

impl<T: Scalar> Default for KernelConfig<T> {
    fn default() -> Self {
        let eps = T::epsilon();
        KernelConfig {
            quad_abs_tol: T::min_positive_value(),
            quad_rel_tol: eps,
            root_tol: T::lit(1e-12).max(eps * T::lit(64.0)),
            max_bracket_expansions: 64,
        }
    }
}

impl<T: Scalar> KernelConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: T, field: &str| -> Result<()> {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be strictly positive, got {v}")))
            }
        };
        positive(self.quad_abs_tol, "quad_abs_tol")?;
        positive(self.quad_rel_tol, "quad_rel_tol")?;
        positive(self.root_tol, "root_tol")?;
        if self.root_tol < T::epsilon() * T::lit(10.0) {
            return Err(Error::config(
                "root_tol",
                format!("must be at least 10 machine epsilons, got {}", self.root_tol),
            ));
        }
        if self.max_bracket_expansions == 0 {
            return Err(Error::config("max_bracket_expansions", "must be at least 1"));
        }
        Ok(())
    }
}

/// The three fading expectations at one argument, plus `f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments<T> {
    pub x: T,
    /// `E[ln(1 + xZ)]`
    pub log: T,
    /// `E[Z / (1 + xZ)]`
    pub ratio: T,
    /// `E[Z² / (1 + xZ)²]`
    pub sq: T,
    /// `f(x)`
    pub f: T,
}

impl<T: Scalar> Moments<T> {
    /// `f'(x)`.
    pub fn df(&self) -> T {
        self.log * (self.sq / self.ratio) / self.ratio
    }
}

/// Operating point of a user for the water level `y = g β`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelPoint<T> {
    pub y: T,
    /// `f⁻¹(y)`, the received SNR `g P`.
    pub x: T,
    /// `C(y)`: spectral efficiency in nats/s/Hz.
    pub cap: T,
    /// `F(y)`.
    pub cap_f: T,
    /// `dC/dy`; infinite at `y = 0`.
    pub dcap_dy: T,
}

impl<T: Scalar> LevelPoint<T> {
    /// Power spent per unit rate by a user with gain `g`: `f⁻¹(y) / (g C(y))`.
    pub fn power_per_rate(&self, g: T) -> T {
        if self.x == T::zero() {
            g.recip()
        } else {
            self.x / (g * self.cap)
        }
    }
}

/// Pure, re-entrant evaluator of the fading kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel<T> {
    config: KernelConfig<T>,
}

impl<T: Scalar> Default for Kernel<T> {
    fn default() -> Self {
        Kernel {
            config: KernelConfig::default(),
        }
    }
}

impl<T: Scalar> Kernel<T> {
    pub fn new(config: KernelConfig<T>) -> Result<Self> {
        config.validate()?;
        Ok(Kernel { config })
    }

    pub fn config(&self) -> &KernelConfig<T> {
        &self.config
    }

    fn check_arg(what: &'static str, x: T) -> Result<()> {
        if x >= T::zero() && x.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain {
                what,
                value: x.as_f64(),
            })
        }
    }

    /// Evaluates all expectations at `x >= 0`.
    pub fn moments(&self, x: T) -> Result<Moments<T>> {
        Self::check_arg("fading expectation", x)?;
        if x == T::zero() {
            return Ok(Moments {
                x,
                log: T::zero(),
                ratio: T::one(),
                sq: T::lit(2.0),
                f: T::zero(),
            });
        }
        let one = T::one();
        let u = x.recip();
        if u >= one {
            let v = self.cf_tail(u)?;
            let t = (u + T::lit(3.0) - v).recip();
            let s = (u + one - t).recip();
            Ok(Moments {
                x,
                log: s,
                ratio: u * (one - t) * s,
                sq: u * u * (T::lit(2.0) - v) * t * s,
                f: x * t / (one - t),
            })
        } else {
            let s = self.scaled_e1_series(u)?;
            let ratio = u * (one - u * s);
            let two_u = u + u;
            Ok(Moments {
                x,
                log: s,
                ratio,
                sq: u * u * (one + u - (two_u + u * u) * s),
                f: s / ratio - x,
            })
        }
    }

    /// `V(u) = 4/(u+5 - 9/(u+7 - 16/(u+9 - …)))` by the modified Lentz method.
    fn cf_tail(&self, u: T) -> Result<T> {
        let tiny = T::min_positive_value().sqrt();
        let tol = self.config.quad_rel_tol;
        let mut h = tiny;
        let mut c = h;
        let mut d = T::zero();
        for n in 1..=2000usize {
            let k = T::lit((n + 1) as f64);
            let a = if n == 1 { k * k } else { -(k * k) };
            let b = u + T::lit((2 * n + 3) as f64);
            d = b + a * d;
            if d == T::zero() {
                d = tiny;
            }
            c = b + a / c;
            if c == T::zero() {
                c = tiny;
            }
            d = d.recip();
            let delta = c * d;
            h = h * delta;
            if (delta - T::one()).abs() <= tol || (h.abs() * (delta - T::one()).abs()) <= self.config.quad_abs_tol {
                return Ok(h);
            }
        }
        Err(Error::NoConvergence {
            what: "exponential-integral continued fraction",
            iterations: 2000,
        })
    }

    /// `e^u E₁(u)` for `0 < u < 1` from the convergent power series.
    fn scaled_e1_series(&self, u: T) -> Result<T> {
        let mut sum = T::zero();
        let mut term = T::one();
        for n in 1..=200usize {
            let nf = T::lit(n as f64);
            term = -term * u / nf;
            let contrib = term / nf;
            sum = sum + contrib;
            if contrib.abs() <= self.config.quad_rel_tol * sum.abs() + self.config.quad_abs_tol {
                let e1 = -T::lit(EULER_GAMMA) - u.ln() - sum;
                return Ok(u.exp() * e1);
            }
        }
        Err(Error::NoConvergence {
            what: "exponential-integral series",
            iterations: 200,
        })
    }

    /// `E[ln(1 + xZ)]`.
    pub fn e_log(&self, x: T) -> Result<T> {
        Ok(self.moments(x)?.log)
    }

    /// `E[Z / (1 + xZ)]`.
    pub fn e_ratio(&self, x: T) -> Result<T> {
        Ok(self.moments(x)?.ratio)
    }

    /// `E[Z² / (1 + xZ)²]`.
    pub fn e_sq(&self, x: T) -> Result<T> {
        Ok(self.moments(x)?.sq)
    }

    /// `f(x) = E[ln(1+xZ)] / E[Z/(1+xZ)] - x`, with `f(0) = 0`.
    pub fn f(&self, x: T) -> Result<T> {
        Ok(self.moments(x)?.f)
    }

    /// Inverse of [`Kernel::f`] on `[0, ∞)`.
    pub fn f_inv(&self, y: T) -> Result<T> {
        Ok(self.f_inv_moments(y)?.x)
    }

    /// Solves `f(x) = y` and returns the moments at the solution.
    ///
    /// Newton's method runs on `t = ln x` against `ln f(e^t) - ln y`, whose
    /// slope decreases from 2 to 1 along the half-line. Iterates are kept
    /// inside the sign-change interval as soon as both ends are known;
    /// until then each step is capped, and the number of such one-sided
    /// steps is bounded by `max_bracket_expansions`.
    pub fn f_inv_moments(&self, y: T) -> Result<Moments<T>> {
        Self::check_arg("f_inv", y)?;
        if y == T::zero() {
            return self.moments(T::zero());
        }
        // f(x) = x² (1 - 2x + O(x²)) below the precision of the log search
        if y < T::lit(1e-200).max(T::min_positive_value().sqrt()) {
            let r = y.sqrt();
            return self.moments(r * (T::one() + r));
        }
        let one = T::one();
        let half = T::lit(0.5);
        let ln_y = y.ln();
        let x0 = if y < one {
            let r = y.sqrt();
            r * (one + r)
        } else {
            // f(x) ~ x (ln x - γ - 1) for large x
            let l = (one + y).ln();
            y / (l - T::lit(EULER_GAMMA + 1.0) + (one + l).ln()).max(half)
        };
        let mut t = x0.ln();
        let (mut lo, mut hi) = (T::neg_infinity(), T::infinity());
        let mut one_sided = 0u32;
        let tol = T::epsilon() * T::lit(8.0);
        let max_step = T::lit(64.0);
        for _ in 0..200 {
            let m = self.moments(t.exp())?;
            let g = m.f.ln() - ln_y;
            if g == T::zero() {
                return self.accept(m, y);
            }
            if g < T::zero() {
                lo = t;
            } else {
                hi = t;
            }
            let slope = m.x * m.df() / m.f;
            let mut next = t - g / slope;
            let bracketed = lo.is_finite() && hi.is_finite();
            if bracketed {
                if !(next > lo && next < hi) {
                    next = lo + half * (hi - lo);
                }
            } else {
                one_sided += 1;
                if one_sided > self.config.max_bracket_expansions {
                    return Err(Error::NoBracket {
                        what: "f_inv",
                        expansions: self.config.max_bracket_expansions,
                    });
                }
                if !next.is_finite() {
                    next = t - g.signum() * max_step;
                }
                next = next.max(t - max_step).min(t + max_step);
            }
            if (next - t).abs() <= tol * (one + t.abs()) {
                return self.accept(m, y);
            }
            t = next;
        }
        Err(Error::NoConvergence {
            what: "f_inv",
            iterations: 200,
        })
    }

    fn accept(&self, m: Moments<T>, y: T) -> Result<Moments<T>> {
        if (m.f - y).abs() > self.config.root_tol * y {
            return Err(Error::NoConvergence {
                what: "f_inv",
                iterations: 200,
            });
        }
        Ok(m)
    }

    /// `C(y) = E[ln(1 + f⁻¹(y) Z)]`.
    pub fn cap(&self, y: T) -> Result<T> {
        Ok(self.f_inv_moments(y)?.log)
    }

    /// `F(y) = E[Z / (1 + f⁻¹(y) Z)]`.
    pub fn cap_f(&self, y: T) -> Result<T> {
        Ok(self.f_inv_moments(y)?.ratio)
    }

    /// Full operating point at water level `y`.
    pub fn level(&self, y: T) -> Result<LevelPoint<T>> {
        let m = self.f_inv_moments(y)?;
        let dcap_dy = if m.x == T::zero() {
            T::infinity()
        } else {
            (m.ratio / m.sq) * m.ratio * (m.ratio / m.log)
        };
        Ok(LevelPoint {
            y,
            x: m.x,
            cap: m.log,
            cap_f: m.ratio,
            dcap_dy,
        })
    }
}
