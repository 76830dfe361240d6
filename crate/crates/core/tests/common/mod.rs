//! Reference implementations used by the integration tests. Nothing here
//! calls into the crate's kernel: the fading expectations are integrated
//! directly with adaptive Gauss–Kronrod quadrature.

#![allow(dead_code)]

const GK_X: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const GK_WK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const GK_WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = GK_WK[7] * fc;
    let mut gauss = GK_WG[3] * fc;
    for i in 0..7 {
        let dx = h * GK_X[i];
        let s = f(c - dx) + f(c + dx);
        kron += GK_WK[i] * s;
        if i % 2 == 1 {
            gauss += GK_WG[i / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (v, err) = gk15(f, a, b);
    if err <= tol || depth == 0 {
        return v;
    }
    let m = 0.5 * (a + b);
    adapt(f, a, m, 0.5 * tol, depth - 1) + adapt(f, m, b, 0.5 * tol, depth - 1)
}

/// `∫₀^∞ f(z) e^{-z} dz` to roughly 1e-13 relative accuracy.
pub fn expect_exp<F: Fn(f64) -> f64>(f: F) -> f64 {
    let g = |z: f64| f(z) * (-z).exp();
    let cuts = [0.0, 1e-6, 1e-3, 0.1, 1.0, 4.0, 12.0, 30.0, 60.0, 120.0, 745.0];
    let rough: f64 = cuts.windows(2).map(|w| gk15(&g, w[0], w[1]).0.abs()).sum();
    let tol = 1e-14 * rough.max(1e-300);
    cuts.windows(2).map(|w| adapt(&g, w[0], w[1], tol / 10.0, 40)).sum()
}

pub fn e_log(x: f64) -> f64 {
    expect_exp(|z| (x * z).ln_1p())
}

pub fn e_ratio(x: f64) -> f64 {
    expect_exp(|z| z / (1.0 + x * z))
}

pub fn e_sq(x: f64) -> f64 {
    expect_exp(|z| (z / (1.0 + x * z)).powi(2))
}

pub fn f(x: f64) -> f64 {
    e_log(x) / e_ratio(x) - x
}

/// Inverse of `f` by bisection in `ln x` followed by bracketed Newton.
pub fn f_inv(y: f64) -> f64 {
    assert!(y >= 0.0);
    if y == 0.0 {
        return 0.0;
    }
    // f(x) ~ x² near zero and ~ x ln x at infinity
    let (mut lo, mut hi) = (y.sqrt() * 0.25, (y.sqrt() * 4.0).max(4.0 * y + 4.0));
    while f(lo) > y {
        lo *= 0.25;
    }
    while f(hi) < y {
        hi *= 4.0;
    }
    let mut x = (lo * hi).sqrt();
    for _ in 0..200 {
        let (el, er) = (e_log(x), e_ratio(x));
        let r = el / er - x - y;
        if r == 0.0 {
            return x;
        }
        if r < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let d = el * e_sq(x) / (er * er);
        let mut next = x - r / d;
        if !(next > lo && next < hi) {
            next = (lo * hi).sqrt();
        }
        if (next - x).abs() <= 1e-15 * x || hi - lo <= 1e-15 * hi {
            return next;
        }
        x = next;
    }
    x
}

/// `C(y) = E[ln(1 + f⁻¹(y) Z)]`.
pub fn cap(y: f64) -> f64 {
    e_log(f_inv(y))
}

/// `F(y) = E[Z / (1 + f⁻¹(y) Z)]`.
pub fn cap_f(y: f64) -> f64 {
    e_ratio(f_inv(y))
}

/// Inverse of the decreasing `F` on `(0, 1]`.
pub fn cap_f_inv(t: f64) -> f64 {
    assert!(t > 0.0 && t <= 1.0);
    if t == 1.0 {
        return 0.0;
    }
    // e_ratio decreases from 1 to 0
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while e_ratio(hi) > t {
        hi *= 4.0;
    }
    for _ in 0..200 {
        let mid = if lo == 0.0 { 0.5 * hi } else { (lo * hi).sqrt() };
        if e_ratio(mid) > t {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    f(0.5 * (lo + hi))
}

/// Level `a` with `Σ R_k / C(g_k a) = share`, by bisection in `ln a`.
pub fn level(users: &[(f64, f64)], share: f64) -> f64 {
    if users.is_empty() {
        return 0.0;
    }
    let need = |a: f64| users.iter().map(|&(g, r)| r / cap(g * a)).sum::<f64>() - share;
    let (mut lo, mut hi) = (1.0f64, 1.0f64);
    while need(lo) < 0.0 {
        lo *= 0.1;
    }
    while need(hi) > 0.0 {
        hi *= 10.0;
    }
    while hi / lo > 1.0 + 1e-14 {
        let mid = (lo * hi).sqrt();
        if need(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo * hi).sqrt()
}

/// `∫_a^b f(x) dx` for `0 < a < b`, adaptive in `ln x`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let g = |u: f64| {
        let x = u.exp();
        f(x) * x
    };
    let (rough, _) = gk15(&g, a.ln(), b.ln());
    adapt(&g, a.ln(), b.ln(), rel * rough.abs(), 40)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Hermite interpolation of a monotone table `(s_i, t_i)` with slopes
/// `dt/ds`, `s` increasing.
struct Hermite {
    s: Vec<f64>,
    t: Vec<f64>,
    d: Vec<f64>,
}

impl Hermite {
    fn new(mut pts: Vec<(f64, f64, f64)>) -> Self {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        Hermite {
            s: pts.iter().map(|p| p.0).collect(),
            t: pts.iter().map(|p| p.1).collect(),
            d: pts.iter().map(|p| p.2).collect(),
        }
    }

    fn at(&self, s: f64) -> f64 {
        let n = self.s.len();
        assert!(s >= self.s[0] && s <= self.s[n - 1], "{s} outside table [{}, {}]", self.s[0], self.s[n - 1]);
        let i = self.s.partition_point(|&v| v <= s).clamp(1, n - 1) - 1;
        let h = self.s[i + 1] - self.s[i];
        let u = (s - self.s[i]) / h;
        let (u2, u3) = (u * u, u * u * u);
        (2.0 * u3 - 3.0 * u2 + 1.0) * self.t[i]
            + (u3 - 2.0 * u2 + u) * h * self.d[i]
            + (-2.0 * u3 + 3.0 * u2) * self.t[i + 1]
            + (u3 - u2) * h * self.d[i + 1]
    }
}

/// Quadrature values of the fading expectations on a fine grid in `ln x`,
/// interpolated with exact derivatives. Much faster than [`f_inv`] and
/// accurate to about 1e-10 relative for `1e-5 <= x <= 1e7`; outside that
/// range the direct quadrature is used.
pub struct Table {
    ln_elog: Hermite,
    ln_eratio: Hermite,
    ln_f_inv: Hermite,
    ln_eratio_inv: Hermite,
}

impl Table {
    pub fn get() -> &'static Table {
        static TABLE: std::sync::OnceLock<Table> = std::sync::OnceLock::new();
        TABLE.get_or_init(Table::build)
    }

    fn build() -> Table {
        let (lo, hi, h) = ((1e-5f64).ln(), (1e7f64).ln(), 0.01);
        let n = ((hi - lo) / h).ceil() as usize;
        let mut elog = Vec::with_capacity(n + 1);
        let mut erat = Vec::with_capacity(n + 1);
        let mut finv = Vec::with_capacity(n + 1);
        let mut erinv = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let t = lo + h * i as f64;
            let x = t.exp();
            let (el, er, es) = (e_log(x), e_ratio(x), e_sq(x));
            let fx = el / er - x;
            let dfx = el * es / (er * er);
            // d ln e_log / d ln x and d ln e_ratio / d ln x
            let dl = x * er / el;
            let dr = -x * es / er;
            elog.push((t, el.ln(), dl));
            erat.push((t, er.ln(), dr));
            finv.push((fx.ln(), t, fx / (x * dfx)));
            erinv.push((er.ln(), t, 1.0 / dr));
        }
        Table {
            ln_elog: Hermite::new(elog),
            ln_eratio: Hermite::new(erat),
            ln_f_inv: Hermite::new(finv),
            ln_eratio_inv: Hermite::new(erinv),
        }
    }

    fn covers(&self, y: f64) -> bool {
        let s = &self.ln_f_inv.s;
        (s[0]..=s[s.len() - 1]).contains(&y.ln())
    }

    pub fn f_inv(&self, y: f64) -> f64 {
        if y == 0.0 {
            return 0.0;
        }
        if !self.covers(y) {
            return f_inv(y);
        }
        self.ln_f_inv.at(y.ln()).exp()
    }

    pub fn e_log(&self, x: f64) -> f64 {
        let s = &self.ln_elog.s;
        if x == 0.0 {
            return 0.0;
        }
        if !(s[0]..=s[s.len() - 1]).contains(&x.ln()) {
            return e_log(x);
        }
        self.ln_elog.at(x.ln()).exp()
    }

    pub fn cap(&self, y: f64) -> f64 {
        if y == 0.0 {
            return 0.0;
        }
        if !self.covers(y) {
            return cap(y);
        }
        self.ln_elog.at(self.ln_f_inv.at(y.ln())).exp()
    }

    pub fn cap_f(&self, y: f64) -> f64 {
        if y == 0.0 {
            return 1.0;
        }
        if !self.covers(y) {
            return cap_f(y);
        }
        self.ln_eratio.at(self.ln_f_inv.at(y.ln())).exp()
    }

    /// `x` and `f(x)` with `e_ratio(x) = t`.
    pub fn cap_f_inv(&self, t: f64) -> f64 {
        let lx = self.ln_eratio_inv.at(t.ln());
        let x = lx.exp();
        // f at the interpolated point, via the tabulated expectations
        self.ln_elog.at(lx).exp() / self.ln_eratio.at(lx).exp() - x
    }

    /// Level `a` with `Σ R_k / C(g_k a) = share`.
    pub fn level(&self, users: &[(f64, f64)], share: f64) -> f64 {
        if users.is_empty() {
            return 0.0;
        }
        let need = |a: f64| users.iter().map(|&(g, r)| r / self.cap(g * a)).sum::<f64>() - share;
        let (mut lo, mut hi) = (1.0f64, 1.0f64);
        while need(lo) < 0.0 {
            lo *= 0.1;
        }
        while need(hi) > 0.0 {
            hi *= 10.0;
        }
        while hi / lo > 1.0 + 1e-14 {
            let mid = (lo * hi).sqrt();
            if need(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo * hi).sqrt()
    }
}

/// Form of the pivot selection rule used by [`cell_oracle`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PivotRule {
    /// `g₁/(1+ξ) F(g₁ a_l / (1+ξ)) <= g₂ F(g₂ b_l)`.
    ScaledInside,
    /// `g₁/(1+ξ) F(g₁ a_l) <= g₂ F(g₂ b_l)`.
    UnscaledInside,
}

/// Unknowns of the per-cell system found by [`cell_oracle`].
#[derive(Debug, Clone, Copy)]
pub struct OracleCell {
    /// 1-based pivot.
    pub pivot: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub xi: f64,
    pub q1: f64,
    pub residual: f64,
}

/// Inputs of the per-cell system: gains on both bands and rates.
pub struct CellProblem {
    pub g1: Vec<f64>,
    pub g2: Vec<f64>,
    pub rate: Vec<f64>,
    pub alpha: f64,
    pub q1_target: f64,
}

struct Prepared<'a> {
    p: &'a CellProblem,
    tb: &'static Table,
    a: Vec<f64>,
    rhs: Vec<f64>,
    f_a: Vec<f64>,
}

impl<'a> Prepared<'a> {
    fn new(p: &'a CellProblem) -> Self {
        let tb = Table::get();
        let k = p.rate.len();
        let share2 = 0.5 * (1.0 - p.alpha);
        let mut a = vec![0.0; k + 1];
        let mut b = vec![0.0; k + 1];
        for l in 1..=k {
            let users: Vec<_> = (0..l).map(|i| (p.g1[i], p.rate[i])).collect();
            a[l] = tb.level(&users, p.alpha);
        }
        for l in 0..k {
            let users: Vec<_> = (l..k).map(|i| (p.g2[i], p.rate[i])).collect();
            b[l] = tb.level(&users, share2);
        }
        let rhs = (1..=k).map(|l| p.g2[l - 1] * tb.cap_f(p.g2[l - 1] * b[l])).collect();
        let f_a = (1..=k).map(|l| tb.cap_f(p.g1[l - 1] * a[l])).collect();
        Prepared { p, tb, a, rhs, f_a }
    }

    fn pivot(&self, xi: f64, rule: PivotRule) -> Option<usize> {
        let tb = self.tb;
        (1..=self.p.rate.len()).find(|&l| {
            let g1 = self.p.g1[l - 1];
            let f = match rule {
                PivotRule::ScaledInside => tb.cap_f(g1 * self.a[l] / (1.0 + xi)),
                PivotRule::UnscaledInside => self.f_a[l - 1],
            };
            g1 / (1.0 + xi) * f <= self.rhs[l - 1]
        })
    }

    /// Residual of the pivot-rate and reused-power equations at `(ξ, β₂)`,
    /// with `L` from the pivot rule and `β₁` from the pivot equality.
    fn eval(&self, xi: f64, beta2: f64, rule: PivotRule) -> Option<OracleCell> {
        let (p, tb) = (self.p, self.tb);
        let k = p.rate.len();
        let l = self.pivot(xi, rule)?;
        let i = l - 1;
        let t = p.g2[i] * tb.cap_f(p.g2[i] * beta2) * (1.0 + xi) / p.g1[i];
        if !(t > 0.0 && t <= 1.0) {
            return None;
        }
        let bt = tb.cap_f_inv(t) / p.g1[i];
        let (mut g1_sum, mut q1) = (0.0, 0.0);
        for j in 0..i {
            let y = p.g1[j] * bt;
            let gamma = p.rate[j] / tb.cap(y);
            g1_sum += gamma;
            q1 += gamma * tb.f_inv(y) / p.g1[j];
        }
        let g2_sum: f64 = (l..k).map(|j| p.rate[j] / tb.cap(p.g2[j] * beta2)).sum();
        let gamma_l1 = p.alpha - g1_sum;
        let gamma_l2 = 0.5 * (1.0 - p.alpha) - g2_sum;
        if gamma_l1 < 0.0 || gamma_l2 < 0.0 {
            return None;
        }
        let y = p.g1[i] * bt;
        let delivered = gamma_l1 * tb.cap(y) + gamma_l2 * tb.cap(p.g2[i] * beta2);
        q1 += gamma_l1 * tb.f_inv(y) / p.g1[i];
        let r1 = (delivered - p.rate[i]) / p.rate[i];
        let r2 = (q1 - p.q1_target) / p.q1_target;
        Some(OracleCell {
            pivot: l,
            beta1: bt * (1.0 + xi),
            beta2,
            xi,
            q1,
            residual: r1.abs().max(r2.abs()),
        })
    }
}

/// The oracle's residual at one point `(ξ, β₂)`.
pub fn cell_oracle_eval(p: &CellProblem, xi: f64, beta2: f64, rule: PivotRule) -> Option<OracleCell> {
    Prepared::new(p).eval(xi, beta2, rule)
}

/// Dense-grid search over `(ln(1+ξ), ln β₂)` for the point of smallest
/// residual. Each of the best local minima of a coarse grid is refined by
/// repeatedly shrinking the grid around it.
pub fn cell_oracle(p: &CellProblem, rule: PivotRule) -> Option<OracleCell> {
    use rayon::prelude::*;
    let tb = Table::get();
    let prep = Prepared::new(p);
    let all: Vec<_> = (0..p.rate.len()).map(|i| (p.g2[i], p.rate[i])).collect();
    let scale = tb.level(&all, 0.5 * (1.0 - p.alpha)).max(prep.a[p.rate.len()]);
    let (u0, u1) = (0.0, 7.0);
    let (v0, v1) = (scale.ln() - 16.0, scale.ln() + 2.0);
    let n = 81;
    let axis = |lo: f64, hi: f64, i: usize, n: usize| lo + (hi - lo) * i as f64 / (n - 1) as f64;
    let coarse: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|ij| {
            let (u, v) = (axis(u0, u1, ij / n, n), axis(v0, v1, ij % n, n));
            prep.eval(u.exp_m1(), v.exp(), rule).map_or(f64::INFINITY, |c| c.residual)
        })
        .collect();
    let mut starts: Vec<(f64, usize)> = (0..n * n)
        .filter(|&ij| {
            let (i, j) = ((ij / n) as i64, (ij % n) as i64);
            coarse[ij].is_finite()
                && (-1..=1).all(|di| {
                    (-1..=1).all(|dj| {
                        let (a, b) = (i + di, j + dj);
                        a < 0 || b < 0 || a >= n as i64 || b >= n as i64 || coarse[(a * n as i64 + b) as usize] >= coarse[ij]
                    })
                })
        })
        .map(|ij| (coarse[ij], ij))
        .collect();
    starts.sort_by(|x, y| x.0.total_cmp(&y.0));
    starts.truncate(8);
    let (du0, dv0) = ((u1 - u0) / (n - 1) as f64, (v1 - v0) / (n - 1) as f64);
    starts
        .par_iter()
        .filter_map(|&(_, ij)| {
            let (mut bu, mut bv) = (axis(u0, u1, ij / n, n), axis(v0, v1, ij % n, n));
            let mut best = prep.eval(bu.exp_m1(), bv.exp(), rule)?;
            let (mut du, mut dv) = (du0, dv0);
            let m = 41;
            for _ in 0..200 {
                if best.residual < 1e-10 {
                    break;
                }
                let (lu, lv) = ((bu - 2.0 * du).max(0.0), bv - 2.0 * dv);
                let (hu, hv) = (bu + 2.0 * du, bv + 2.0 * dv);
                let mut at = (m / 2, m / 2);
                for i in 0..m {
                    for j in 0..m {
                        let (u, v) = (axis(lu, hu, i, m), axis(lv, hv, j, m));
                        if let Some(c) = prep.eval(u.exp_m1(), v.exp(), rule) {
                            if c.residual < best.residual {
                                best = c;
                                bu = u;
                                bv = v;
                                at = (i, j);
                            }
                        }
                    }
                }
                // a minimum on the edge of the box only recenters it
                let edge = |i: usize| i == 0 || i == m - 1;
                if !(edge(at.0) && lu > 0.0) && !edge(at.1) {
                    du = (hu - lu) / (m - 1) as f64;
                    dv = (hv - lv) / (m - 1) as f64;
                }
            }
            Some(best)
        })
        .min_by(|x, y| x.residual.total_cmp(&y.residual))
}
