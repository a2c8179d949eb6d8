//! Gauss–Legendre rules and piecewise-spectral panel grids.

use std::f64::consts::PI;

/// Gauss–Legendre rule on [-1, 1] with barycentric weights for its nodes.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
    pub bary: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "rule needs at least one node");
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        for i in 0..n {
            // Tricomi initial guess, then Newton on P_n.
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, z);
            if d.is_finite() {
                dp = d;
            }
            x[n - 1 - i] = z;
            w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
        }
        let bary = barycentric_weights(&x);
        GaussRule { x, w, bary }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Nodes and weights mapped to [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.x.iter().zip(&self.w).map(move |(x, w)| (c + h * x, h * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Row `j` holds the weights of ∫_{x_j}^{1} p(x) dx for the interpolant p.
    pub fn right_cumulative(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let fine = GaussRule::new_plain(n + 2);
        (0..n)
            .map(|j| {
                let a = self.x[j];
                let mut row = vec![0.0; n];
                for (s, ws) in fine.mapped(a, 1.0) {
                    let basis = lagrange_basis(&self.x, &self.bary, s);
                    for k in 0..n {
                        row[k] += ws * basis[k];
                    }
                }
                row
            })
            .collect()
    }

    fn new_plain(n: usize) -> Self {
        let r = GaussRule::new(n);
        GaussRule { bary: Vec::new(), ..r }
    }
}

/// Gauss–Hermite rule for ∫ e^{−y²} f(y) dy.
#[derive(Debug, Clone)]
pub struct HermiteRule {
    pub y: Vec<f64>,
    pub w: Vec<f64>,
}

impl HermiteRule {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let nf = n as f64;
        let mut y = vec![0.0; n];
        let mut w = vec![0.0; n];
        let mut z = 0.0f64;
        for i in 0..(n + 1) / 2 {
            // asymptotic starting guesses, largest root first
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * y[0],
                3 => 1.91 * z - 0.91 * y[1],
                _ => 2.0 * z - y[i - 2],
            };
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = hermite_orthonormal(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            let (_, d) = hermite_orthonormal(n, z);
            if d.is_finite() && d != 0.0 {
                dp = d;
            }
            y[i] = z;
            y[n - 1 - i] = -z;
            w[i] = 2.0 / (dp * dp);
            w[n - 1 - i] = w[i];
        }
        HermiteRule { y, w }
    }
}

/// Orthonormal Hermite function value and derivative (without e^{−y²/2}).
fn hermite_orthonormal(n: usize, z: f64) -> (f64, f64) {
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut p1 = pim4;
    let mut p2 = 0.0;
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
    }
    (p1, (2.0 * n as f64).sqrt() * p2)
}

/// P_n(z) and P_n'(z) by the three-term recurrence.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
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

pub fn barycentric_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut w = vec![1.0; n];
    for j in 0..n {
        for k in 0..n {
            if k != j {
                w[j] /= x[j] - x[k];
            }
        }
    }
    let scale = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    w.iter().map(|v| v / scale).collect()
}

/// Barycentric evaluation of the interpolant through `(x, y)` at `t`.
pub fn barycentric(x: &[f64], bary: &[f64], y: &[f64], t: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..x.len() {
        let d = t - x[k];
        if d == 0.0 {
            return y[k];
        }
        let c = bary[k] / d;
        num += c * y[k];
        den += c;
    }
    num / den
}

/// Value and first derivative of the interpolant at `t`.
pub fn barycentric_d(x: &[f64], bary: &[f64], y: &[f64], t: f64) -> (f64, f64) {
    let n = x.len();
    if let Some(j) = x.iter().position(|&xk| xk == t) {
        let mut d = 0.0;
        for k in 0..n {
            if k != j {
                d += bary[k] / bary[j] * (y[k] - y[j]) / (x[j] - x[k]);
            }
        }
        return (y[j], d);
    }
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut t0 = 0.0;
    let mut t1 = 0.0;
    for k in 0..n {
        let d = t - x[k];
        let c = bary[k] / d;
        s0 += c * y[k];
        t0 += c;
        s1 += c * y[k] / d;
        t1 += c / d;
    }
    let p = s0 / t0;
    // p = s0/t0, p' = (-s1 t0 + s0 t1)/t0^2
    (p, (s0 * t1 - s1 * t0) / (t0 * t0))
}

fn lagrange_basis(x: &[f64], bary: &[f64], t: f64) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; n];
    if let Some(j) = x.iter().position(|&xk| xk == t) {
        out[j] = 1.0;
        return out;
    }
    let mut den = 0.0;
    for k in 0..n {
        let c = bary[k] / (t - x[k]);
        out[k] = c;
        den += c;
    }
    for v in &mut out {
        *v /= den;
    }
    out
}

/// Contiguous panels with a Gauss–Legendre rule on each.
#[derive(Debug, Clone)]
pub struct PanelGrid {
    pub edges: Vec<f64>,
    pub rule: GaussRule,
    uniform: Option<(f64, f64)>,
}

impl PanelGrid {
    pub fn new(edges: Vec<f64>, order: usize) -> Self {
        assert!(edges.len() >= 2);
        assert!(edges.windows(2).all(|w| w[1] > w[0]), "panel edges must increase");
        PanelGrid { edges, rule: GaussRule::new(order), uniform: None }
    }

    /// Panels of equal width `h` starting at `a`.
    pub fn uniform(a: f64, h: f64, panels: usize, order: usize) -> Self {
        let edges = (0..=panels).map(|k| a + h * k as f64).collect();
        let mut g = PanelGrid::new(edges, order);
        g.uniform = Some((a, h));
        g
    }

    pub fn panels(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn order(&self) -> usize {
        self.rule.len()
    }

    pub fn len(&self) -> usize {
        self.panels() * self.order()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lo(&self) -> f64 {
        self.edges[0]
    }

    pub fn hi(&self) -> f64 {
        *self.edges.last().unwrap()
    }

    pub fn node(&self, i: usize) -> f64 {
        let n = self.order();
        let (p, k) = (i / n, i % n);
        let (a, b) = (self.edges[p], self.edges[p + 1]);
        0.5 * (a + b) + 0.5 * (b - a) * self.rule.x[k]
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    /// Quadrature weight of node `i` for ∫ over the whole grid.
    pub fn weight(&self, i: usize) -> f64 {
        let n = self.order();
        let (p, k) = (i / n, i % n);
        0.5 * (self.edges[p + 1] - self.edges[p]) * self.rule.w[k]
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.weight(i)).collect()
    }

    /// Panel containing `x`, clamped to the grid.
    pub fn locate(&self, x: f64) -> usize {
        let np = self.panels();
        if let Some((a, h)) = self.uniform {
            let p = ((x - a) / h).floor();
            return if p < 0.0 { 0 } else { (p as usize).min(np - 1) };
        }
        match self.edges.binary_search_by(|e| e.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(np - 1),
            Err(0) => 0,
            Err(i) => (i - 1).min(np - 1),
        }
    }

    /// Position of `x` in reference coordinates of panel `p`.
    pub fn local(&self, p: usize, x: f64) -> f64 {
        let (a, b) = (self.edges[p], self.edges[p + 1]);
        (2.0 * x - a - b) / (b - a)
    }

    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        let p = self.locate(x);
        let n = self.order();
        barycentric(&self.rule.x, &self.rule.bary, &values[p * n..(p + 1) * n], self.local(p, x))
    }

    /// Interpolated value and derivative with respect to `x`.
    pub fn interpolate_d(&self, values: &[f64], x: f64) -> (f64, f64) {
        let p = self.locate(x);
        let n = self.order();
        let (v, d) =
            barycentric_d(&self.rule.x, &self.rule.bary, &values[p * n..(p + 1) * n], self.local(p, x));
        (v, d * 2.0 / (self.edges[p + 1] - self.edges[p]))
    }
}
