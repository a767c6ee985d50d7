//! One-dimensional building blocks: Gauss-Legendre rules, spectral
//! differentiation on Legendre nodes, and natural cubic splines.

use crate::C64;
use std::f64::consts::PI;

/// Gauss-Legendre nodes (ascending) and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
pub fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss-Legendre rule mapped linearly onto `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    (
        x.iter().map(|t| mid + half * t).collect(),
        w.iter().map(|t| half * t).collect(),
    )
}

/// Composite Gauss-Legendre rule: `panels` equal panels of `order` nodes each.
pub fn composite_gauss_legendre(order: usize, panels: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(order);
    let width = (b - a) / panels as f64;
    let mut nodes = Vec::with_capacity(order * panels);
    let mut weights = Vec::with_capacity(order * panels);
    for p in 0..panels {
        let lo = a + p as f64 * width;
        for (t, wt) in x.iter().zip(&w) {
            nodes.push(lo + 0.5 * width * (t + 1.0));
            weights.push(0.5 * width * wt);
        }
    }
    (nodes, weights)
}

/// Polynomial interpolant through Gauss-Legendre nodes in barycentric form.
#[derive(Debug, Clone)]
pub struct LegendreInterpolant {
    nodes: Vec<f64>,
    bary: Vec<f64>,
}

impl LegendreInterpolant {
    /// `nodes` and `weights` must be a Gauss-Legendre rule on `[-1, 1]`.
    pub fn new(nodes: &[f64], weights: &[f64]) -> Self {
        let bary = nodes
            .iter()
            .zip(weights)
            .enumerate()
            .map(|(j, (x, w))| {
                let s = ((1.0 - x * x) * w).sqrt();
                if j % 2 == 0 {
                    s
                } else {
                    -s
                }
            })
            .collect();
        Self { nodes: nodes.to_vec(), bary }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Derivative of the interpolant at every node.
    pub fn differentiate(&self, values: &[C64]) -> Vec<C64> {
        let n = self.nodes.len();
        assert_eq!(values.len(), n);
        (0..n)
            .map(|i| {
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..n {
                    if j != i {
                        let d = (self.bary[j] / self.bary[i]) / (self.nodes[i] - self.nodes[j]);
                        acc += d * (values[j] - values[i]);
                    }
                }
                acc
            })
            .collect()
    }

    /// Interpolant and its derivative at an arbitrary point.
    pub fn eval_with_derivative(&self, values: &[C64], x: f64) -> (C64, C64) {
        if let Some(j) = self.nodes.iter().position(|&xj| xj == x) {
            let d = self.differentiate(values);
            return (values[j], d[j]);
        }
        let mut num = C64::new(0.0, 0.0);
        let mut den = 0.0;
        let mut num_d = C64::new(0.0, 0.0);
        let mut den_d = 0.0;
        for ((&xj, &wj), &yj) in self.nodes.iter().zip(&self.bary).zip(values) {
            let r = wj / (x - xj);
            num += yj * r;
            den += r;
            let r2 = r / (x - xj);
            num_d -= yj * r2;
            den_d -= r2;
        }
        let f = num / den;
        (f, (num_d - f * den_d) / den)
    }
}

/// Natural cubic spline through complex samples on increasing abscissae.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<C64>,
    m: Vec<C64>,
}

impl CubicSpline {
    pub fn natural(x: &[f64], y: &[C64]) -> Self {
        let n = x.len();
        assert!(n >= 2 && y.len() == n);
        let mut m = vec![C64::new(0.0, 0.0); n];
        if n > 2 {
            // Thomas algorithm on the interior second derivatives.
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut upper = vec![0.0; k];
            let mut rhs = vec![C64::new(0.0, 0.0); k];
            for i in 0..k {
                let h0 = x[i + 1] - x[i];
                let h1 = x[i + 2] - x[i + 1];
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0 * ((y[i + 2] - y[i + 1]) / h1 - (y[i + 1] - y[i]) / h0);
            }
            for i in 1..k {
                let lower = x[i + 1] - x[i];
                let f = lower / diag[i - 1];
                diag[i] -= f * upper[i - 1];
                let prev = rhs[i - 1];
                rhs[i] -= prev * f;
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - m[i + 2] * upper[i]) / diag[i];
            }
        }
        Self { x: x.to_vec(), y: y.to_vec(), m }
    }

    fn interval(&self, t: f64) -> usize {
        let n = self.x.len();
        match self.x.partition_point(|&xi| xi <= t) {
            0 => 0,
            i if i >= n => n - 2,
            i => i - 1,
        }
    }

    /// Spline value and first derivative at `t` (extrapolates cubically).
    pub fn eval_with_derivative(&self, t: f64) -> (C64, C64) {
        let i = self.interval(t);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        let (y0, y1, m0, m1) = (self.y[i], self.y[i + 1], self.m[i], self.m[i + 1]);
        let val = y0 * a + y1 * b + (m0 * (a * a * a - a) + m1 * (b * b * b - b)) * (h * h / 6.0);
        let der = (y1 - y0) / h + (m1 * (3.0 * b * b - 1.0) - m0 * (3.0 * a * a - 1.0)) * (h / 6.0);
        (val, der)
    }

    /// First derivative at every knot.
    pub fn knot_derivatives(&self) -> Vec<C64> {
        self.x.iter().map(|&t| self.eval_with_derivative(t).1).collect()
    }
}
