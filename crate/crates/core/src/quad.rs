//! Composite Gauss–Legendre quadrature on finite intervals.

use crate::scalar::Scalar;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Scalar> GaussLegendre<T> {
    /// Builds the `n`-point rule. Nodes are found in `f64` by Newton
    /// iteration on the Legendre recurrence and then rounded to `T`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0f64; n];
        let mut weights = vec![0.0f64; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, d) = legendre(n, z);
                let dz = p / d;
                z -= dz;
                if dz.abs() <= 1e-16 {
                    break;
                }
            }
            let dp = legendre(n, z).1;
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre {
            nodes: nodes.into_iter().map(T::lit).collect(),
            weights: weights.into_iter().map(T::lit).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `∫_a^b g` with the rule applied on `panels` equal sub-intervals.
    pub fn integrate<F>(&self, a: T, b: T, panels: usize, mut g: F) -> T
    where
        F: FnMut(T) -> T,
    {
        let mut total = T::zero();
        self.for_each_node(a, b, panels, |x, w| total = total + w * g(x));
        total
    }

    /// Calls `visit(x, w)` for every node of the composite rule on `[a, b]`,
    /// where `w` already includes the interval scaling.
    pub fn for_each_node<F>(&self, a: T, b: T, panels: usize, mut visit: F)
    where
        F: FnMut(T, T),
    {
        let panels = panels.max(1);
        let h = (b - a) / T::lit(panels as f64);
        let half = h * T::lit(0.5);
        for p in 0..panels {
            let mid = a + h * (T::lit(p as f64) + T::lit(0.5));
            for (z, w) in self.nodes.iter().zip(&self.weights) {
                visit(mid + half * *z, half * *w);
            }
        }
    }
}

/// `(P_n(z), P_n'(z))` by the three-term recurrence.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}
