//! Bracketing root finders for monotone scalar functions.
//!
//! Every solver here works on an *increasing* function; callers negate
//! decreasing ones. A bracket is first established by geometric expansion,
//! then narrowed by bisection, regula falsi (Illinois variant) or
//! Newton steps that are rejected whenever they leave the bracket.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// An interval `[lo, hi]` with `f(lo) <= 0 <= f(hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket<T> {
    pub lo: T,
    pub hi: T,
    pub f_lo: T,
    pub f_hi: T,
}

impl<T: Scalar> Bracket<T> {
    pub fn new(lo: T, f_lo: T, hi: T, f_hi: T) -> Self {
        Bracket { lo, hi, f_lo, f_hi }
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }
}

/// Outcome of [`expand_bracket`]: either an exact root was hit or a
/// sign-changing interval was found.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bracketed<T> {
    Root(T),
    Interval(Bracket<T>),
}

/// Expands from `x0` with geometrically growing steps until an increasing
/// function changes sign. `step0` is the first step length; each further
/// expansion doubles it.
pub fn expand_bracket<T, F>(
    what: &'static str,
    mut f: F,
    x0: T,
    step0: T,
    max_expansions: u32,
) -> Result<Bracketed<T>>
where
    T: Scalar,
    F: FnMut(T) -> Result<T>,
{
    let f0 = f(x0)?;
    if f0 == T::zero() {
        return Ok(Bracketed::Root(x0));
    }
    if !f0.is_finite() {
        return Err(Error::Domain {
            what,
            value: x0.as_f64(),
        });
    }
    let two = T::lit(2.0);
    let mut step = step0.abs();
    let (mut near, mut f_near) = (x0, f0);
    for _ in 0..max_expansions {
        let far = if f_near > T::zero() {
            near - step
        } else {
            near + step
        };
        let f_far = f(far)?;
        if f_far == T::zero() {
            return Ok(Bracketed::Root(far));
        }
        if (f_far > T::zero()) != (f_near > T::zero()) {
            let br = if far < near {
                Bracket::new(far, f_far, near, f_near)
            } else {
                Bracket::new(near, f_near, far, f_far)
            };
            return Ok(Bracketed::Interval(br));
        }
        near = far;
        f_near = f_far;
        step = step * two;
    }
    Err(Error::NoBracket {
        what,
        expansions: max_expansions,
    })
}

/// Plain bisection down to an absolute width `xtol`.
pub fn bisect<T, F>(
    what: &'static str,
    mut f: F,
    mut br: Bracket<T>,
    xtol: T,
    max_iter: usize,
) -> Result<T>
where
    T: Scalar,
    F: FnMut(T) -> Result<T>,
{
    let half = T::lit(0.5);
    for _ in 0..max_iter {
        let mid = br.lo + half * (br.hi - br.lo);
        if br.width() <= xtol || mid <= br.lo || mid >= br.hi {
            return Ok(mid);
        }
        let fm = f(mid)?;
        if fm == T::zero() {
            return Ok(mid);
        }
        if fm < T::zero() {
            br.lo = mid;
            br.f_lo = fm;
        } else {
            br.hi = mid;
            br.f_hi = fm;
        }
    }
    Err(Error::NoConvergence {
        what,
        iterations: max_iter,
    })
}

/// Regula falsi with the Illinois modification. Stops when the bracket is
/// narrower than `xtol` or `|f| <= ftol`.
pub fn illinois<T, F>(
    what: &'static str,
    mut f: F,
    br: Bracket<T>,
    xtol: T,
    ftol: T,
    max_iter: usize,
) -> Result<T>
where
    T: Scalar,
    F: FnMut(T) -> Result<T>,
{
    let half = T::lit(0.5);
    let (mut a, mut fa, mut b, mut fb) = (br.lo, br.f_lo, br.hi, br.f_hi);
    // side of the last retained endpoint: -1 for a, +1 for b
    let mut side = 0i8;
    for _ in 0..max_iter {
        if (b - a).abs() <= xtol {
            return Ok(if fa.abs() < fb.abs() { a } else { b });
        }
        let mut c = (a * fb - b * fa) / (fb - fa);
        if !(c > a && c < b) {
            c = a + half * (b - a);
        }
        let fc = f(c)?;
        if fc.abs() <= ftol || fc == T::zero() {
            return Ok(c);
        }
        if fc < T::zero() {
            a = c;
            fa = fc;
            if side == -1 {
                fb = fb * half;
            }
            side = -1;
        } else {
            b = c;
            fb = fc;
            if side == 1 {
                fa = fa * half;
            }
            side = 1;
        }
    }
    Err(Error::NoConvergence {
        what,
        iterations: max_iter,
    })
}

/// Newton iteration safeguarded by a bracket. `f` returns the value and
/// derivative of an increasing function. Steps that leave the bracket, or
/// that fail to halve the residual, fall back to bisection.
pub fn newton_bracketed<T, F>(
    what: &'static str,
    mut f: F,
    br: Bracket<T>,
    x0: T,
    xtol: T,
    max_iter: usize,
) -> Result<T>
where
    T: Scalar,
    F: FnMut(T) -> Result<(T, T)>,
{
    let half = T::lit(0.5);
    let (mut lo, mut hi) = (br.lo, br.hi);
    let mut x = if x0 > lo && x0 < hi {
        x0
    } else {
        lo + half * (hi - lo)
    };
    let mut dx_old = hi - lo;
    for _ in 0..max_iter {
        let (fx, dfx) = f(x)?;
        if fx == T::zero() {
            return Ok(x);
        }
        if fx < T::zero() {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / dfx;
        let slow = (fx + fx).abs() > (dx_old * dfx).abs();
        let next = if !newton.is_finite() || newton <= lo || newton >= hi || slow {
            lo + half * (hi - lo)
        } else {
            newton
        };
        dx_old = next - x;
        let done = dx_old.abs() <= xtol || hi - lo <= xtol;
        x = next;
        if done {
            return Ok(x);
        }
    }
    Err(Error::NoConvergence {
        what,
        iterations: max_iter,
    })
}

/// Newton iteration on an increasing function without an initial bracket.
///
/// Steps are capped at `max_step` until a sign change has been seen; the
/// number of such one-sided steps is limited to `max_one_sided`. Once both
/// signs are known, steps leaving the bracket are replaced by bisection.
/// Returns the last evaluated point, whose step fell below
/// `xtol · max(1, |x|)`.
pub fn newton_unbracketed<T, F>(
    what: &'static str,
    mut f: F,
    x0: T,
    max_step: T,
    max_one_sided: u32,
    xtol: T,
    max_iter: usize,
) -> Result<T>
where
    T: Scalar,
    F: FnMut(T) -> Result<(T, T)>,
{
    let half = T::lit(0.5);
    let (mut lo, mut hi) = (T::neg_infinity(), T::infinity());
    let mut one_sided = 0u32;
    let mut x = x0;
    for _ in 0..max_iter {
        let (fx, dfx) = f(x)?;
        if !fx.is_finite() {
            return Err(Error::Domain {
                what,
                value: x.as_f64(),
            });
        }
        if fx == T::zero() {
            return Ok(x);
        }
        if fx < T::zero() {
            lo = x;
        } else {
            hi = x;
        }
        let mut next = x - fx / dfx;
        if lo.is_finite() && hi.is_finite() {
            if !(next > lo && next < hi) {
                next = lo + half * (hi - lo);
            }
        } else {
            one_sided += 1;
            if one_sided > max_one_sided {
                return Err(Error::NoBracket {
                    what,
                    expansions: max_one_sided,
                });
            }
            if !next.is_finite() || !(dfx > T::zero()) {
                next = x - fx.signum() * max_step;
            }
            next = next.max(x - max_step).min(x + max_step);
        }
        if (next - x).abs() <= xtol * x.abs().max(T::one()) {
            return Ok(x);
        }
        x = next;
    }
    Err(Error::NoConvergence {
        what,
        iterations: max_iter,
    })
}

/// Golden-section minimization of a unimodal function on `[a, b]`. Stops
/// when the interval is narrower than `tol · (1 + max(|a|, |b|))`.
pub fn golden_min<T, F>(mut f: F, mut a: T, mut b: T, tol: T) -> Result<T>
where
    T: Scalar,
    F: FnMut(T) -> Result<T>,
{
    let r = T::lit(0.5 * (5f64.sqrt() - 1.0));
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a).abs() > tol * (T::one() + a.abs().max(b.abs())) {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc <= fd { c } else { d })
}
