//! Log-spaced radial grid, tables on it, and the time-node sequence.

use super::kernel::RadialSource;
use crate::error::{Error, Result};
use crate::numerics::gauss::PanelGrid;

/// Gauss–Legendre panels in x = ln r.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    grid: PanelGrid,
    r: Vec<f64>,
    /// 2π r² × panel weight: ∫_{R²} h = Σ w_i h(r_i).
    area: Vec<f64>,
}

impl RadialGrid {
    pub fn log_spaced(r_lo: f64, r_hi: f64, panels_per_decade: usize, order: usize) -> Result<Self> {
        if !(r_lo > 0.0 && r_hi > r_lo) || panels_per_decade == 0 || order < 2 {
            return Err(Error::Config(format!("bad radial grid [{r_lo}, {r_hi}]")));
        }
        let (a, b) = (r_lo.ln(), r_hi.ln());
        let panels = ((b - a) / std::f64::consts::LN_10 * panels_per_decade as f64).ceil() as usize;
        let grid = PanelGrid::uniform(a, (b - a) / panels as f64, panels, order);
        let r: Vec<f64> = grid.nodes().iter().map(|x| x.exp()).collect();
        let tau = 2.0 * std::f64::consts::PI;
        let area = (0..grid.len()).map(|i| tau * r[i] * r[i] * grid.weight(i)).collect();
        Ok(RadialGrid { grid, r, area })
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn r_lo(&self) -> f64 {
        self.grid.lo().exp()
    }

    pub fn r_hi(&self) -> f64 {
        self.grid.hi().exp()
    }

    /// Interpolates an N-component table; constant below the grid, zero above it.
    pub fn interp<const N: usize>(&self, table: &[[f64; N]], s: f64) -> [f64; N] {
        let x = s.ln().max(self.grid.lo());
        if x > self.grid.hi() {
            return [0.0; N];
        }
        let p = self.grid.locate(x);
        let n = self.grid.order();
        let t = self.grid.local(p, x);
        let rule = &self.grid.rule;
        let mut num = [0.0; N];
        let mut den = 0.0;
        for k in 0..n {
            let d = t - rule.x[k];
            if d == 0.0 {
                return table[p * n + k];
            }
            let w = rule.bary[k] / d;
            den += w;
            for c in 0..N {
                num[c] += w * table[p * n + k][c];
            }
        }
        num.map(|v| v / den)
    }

    /// L^p norm over R² of a radial function sampled on the grid.
    pub fn lp_norm(&self, values: &[f64], p: f64) -> f64 {
        if p.is_infinite() {
            return values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        }
        values.iter().zip(&self.area).map(|(v, w)| w * v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }

    /// Wraps a table as a heat source integrated adaptively.
    pub fn source<'a, const N: usize>(&'a self, table: &'a [[f64; N]]) -> TableSource<'a, N> {
        TableSource { grid: self, table, smooth: false }
    }

    /// Wraps a table whose structure is no finer than the √τ it will be
    /// propagated with; it is integrated with fixed rules.
    pub fn smooth_source<'a, const N: usize>(&'a self, table: &'a [[f64; N]]) -> TableSource<'a, N> {
        TableSource { grid: self, table, smooth: true }
    }
}

pub struct TableSource<'a, const N: usize> {
    grid: &'a RadialGrid,
    table: &'a [[f64; N]],
    smooth: bool,
}

impl<const N: usize> RadialSource<N> for TableSource<'_, N> {
    fn at(&self, s: f64) -> Result<[f64; N]> {
        Ok(self.grid.interp(self.table, s))
    }

    fn smooth_on_kernel_scale(&self) -> bool {
        self.smooth
    }
}

/// Geometric nodes from `t_floor` to `t_max` with `per_decade` steps, merged
/// with `extra`; nodes closer than 1e-3 relative to an extra node are dropped.
pub fn time_nodes(t_floor: f64, t_max: f64, per_decade: usize, extra: &[f64]) -> Vec<f64> {
    let n = ((t_max / t_floor).log10() * per_decade as f64).ceil().max(1.0) as usize;
    let q = (t_max / t_floor).ln() / n as f64;
    let mut out: Vec<f64> = (0..=n).map(|k| t_floor * (q * k as f64).exp()).collect();
    out[n] = t_max;
    for &e in extra {
        out.retain(|&t| (t / e - 1.0).abs() > 1e-3 || t == t_max || t == t_floor);
        if !out.iter().any(|&t| t == e) {
            out.push(e);
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out
}

/// A radial table per time node.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RadialField {
    pub times: Vec<f64>,
    pub r: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl RadialField {
    pub fn sup_norm(&self, k: usize) -> f64 {
        self.values[k].iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Value at the smallest radius, standing in for r = 0.
    pub fn at_origin(&self, k: usize) -> f64 {
        self.values[k][0]
    }

    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&s| s == t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_mass_and_interpolation() {
        let g = RadialGrid::log_spaced(1e-8, 30.0, 6, 12).unwrap();
        let vals: Vec<f64> = g.r().iter().map(|r| (-r * r).exp()).collect();
        // ∫ e^{−r²} over R² is π
        let mass = g.lp_norm(&vals, 1.0);
        assert!((mass / std::f64::consts::PI - 1.0).abs() < 1e-10, "{mass}");
        let table: Vec<[f64; 1]> = vals.iter().map(|&v| [v]).collect();
        for &r in &[1e-9, 0.3, 1.7] {
            assert!((g.interp(&table, r)[0] - (-r * r).exp()).abs() < 1e-10);
        }
        assert_eq!(g.interp(&table, 31.0)[0], 0.0);
    }

    #[test]
    fn time_nodes_include_extras() {
        let t = time_nodes(1e-16, 1e-4, 4, &[2.5e-5, 5e-5]);
        assert_eq!(t[0], 1e-16);
        assert_eq!(*t.last().unwrap(), 1e-4);
        assert!(t.contains(&2.5e-5) && t.contains(&5e-5));
        assert!(t.windows(2).all(|w| w[1] > w[0]));
    }
}
