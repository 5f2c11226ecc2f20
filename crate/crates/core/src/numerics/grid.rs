use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::par::{self, Execution};

/// Smallest admissible number of grid cells.
pub const MIN_GRID: usize = 16;

/// A real function sampled at `x_i = i / N`, `i = 0..=N`.
///
/// Interior values are always finite. The two endpoint values may be
/// `±∞`, which is how densities with an integrable endpoint singularity
/// (the arcsine law, for instance) are represented.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridFunction {
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < MIN_GRID + 1 {
            return Err(Error::MalformedGrid(format!(
                "need N >= {MIN_GRID} cells, got {}",
                values.len().saturating_sub(1)
            )));
        }
        let n = values.len() - 1;
        if let Some(i) = (1..n).find(|&i| !values[i].is_finite()) {
            return Err(Error::MalformedGrid(format!(
                "non-finite interior value {} at x = {}",
                values[i],
                i as f64 / n as f64
            )));
        }
        if values[0].is_nan() || values[n].is_nan() {
            return Err(Error::MalformedGrid("NaN endpoint value".into()));
        }
        Ok(Self { values })
    }

    /// Samples `f` on the uniform grid with `n` cells.
    pub fn from_fn<F: Fn(f64) -> f64>(n: usize, f: F) -> Result<Self> {
        if n < MIN_GRID {
            return Err(invalid("grid_size", format!("{n} < {MIN_GRID}")));
        }
        Self::new((0..=n).map(|i| f(i as f64 / n as f64)).collect())
    }

    pub fn constant(n: usize, c: f64) -> Result<Self> {
        Self::from_fn(n, |_| c)
    }

    /// Number of cells `N`.
    pub fn n(&self) -> usize {
        self.values.len() - 1
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n() as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 / self.n() as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Piecewise-linear interpolation. `x` is clamped to `[0, 1]`.
    pub fn at(&self, x: f64) -> f64 {
        let n = self.n();
        let s = x.clamp(0.0, 1.0) * n as f64;
        let i = (s.floor() as usize).min(n - 1);
        let w = s - i as f64;
        if w == 0.0 {
            return self.values[i];
        }
        if w == 1.0 {
            return self.values[i + 1];
        }
        (1.0 - w) * self.values[i] + w * self.values[i + 1]
    }

    pub(crate) fn ensure_grid(&self, n: usize) -> Result<()> {
        if self.n() != n {
            return Err(Error::GridMismatch {
                expected: n,
                actual: self.n(),
            });
        }
        Ok(())
    }

    pub(crate) fn ensure_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::MalformedGrid("operation needs finite endpoint values".into()))
        }
    }

    /// Pointwise `self - other`.
    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        other.ensure_grid(self.n())?;
        GridFunction::new(self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect())
    }

    /// `max |φ(x_i)|` over grid points with `lo <= x_i <= hi`.
    pub fn sup_norm_on(&self, lo: f64, hi: f64) -> f64 {
        let n = self.n() as f64;
        self.values
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let x = *i as f64 / n;
                // small slack so that lo = 1e-3 picks up x_i = 0.001 despite rounding
                x >= lo - 1e-12 && x <= hi + 1e-12
            })
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max)
    }

    /// `max |φ(x_i) - ψ(x_i)|` over grid points in `[lo, hi]`; unlike
    /// [`sub`](Self::sub) this accepts infinite endpoint values outside the range.
    pub fn sup_distance_on(&self, other: &GridFunction, lo: f64, hi: f64) -> Result<f64> {
        other.ensure_grid(self.n())?;
        let n = self.n() as f64;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .enumerate()
            .filter(|(i, _)| {
                let x = *i as f64 / n;
                x >= lo - 1e-12 && x <= hi + 1e-12
            })
            .map(|(_, (a, b))| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm_on(0.0, 1.0)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Trapezoidal cumulative integral `F(x_i) = ∫_0^{x_i} φ`, `F(0) = 0`.
///
/// Exact for piecewise-linear integrands.
pub fn cumulative_integral(phi: &GridFunction) -> Result<GridFunction> {
    phi.ensure_finite()?;
    GridFunction::new(prefix_sums(&trapezoid_cells(phi.values(), phi.h())))
}

/// Cumulative integral that tolerates integrable power-law endpoint
/// singularities, see [`cell_integrals_singular`]. Fails when the integral
/// diverges.
pub fn cumulative_integral_singular(phi: &GridFunction) -> Result<GridFunction> {
    let cells = cell_integrals_singular(phi.values());
    if cells.iter().any(|c| !c.is_finite()) {
        return Err(Error::MalformedGrid("integral diverges at an endpoint".into()));
    }
    GridFunction::new(prefix_sums(&cells))
}

pub(crate) fn trapezoid_cells(values: &[f64], h: f64) -> Vec<f64> {
    values.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).collect()
}

pub(crate) fn prefix_sums(cells: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(cells.len() + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for c in cells {
        acc += c;
        out.push(acc);
    }
    out
}

/// Cells within this distance of an endpoint use power-law interpolation.
const POWER_LAW_ZONE: f64 = 0.25;
/// Fitted exponents outside `[-MAX_EXPONENT, MAX_EXPONENT]` fall back to the
/// trapezoid rule; they come from sign-changing or near-zero data rather than
/// from a genuine power law.
const MAX_EXPONENT: f64 = 4.0;

/// Per-cell integrals of the grid samples `g` on the uniform grid over `[0, 1]`.
///
/// Near the endpoints each cell is integrated as the power law
/// `A · d^β` in the distance `d` to the nearer endpoint that interpolates the
/// two cell values; this is exact for `d^β` and second order for smooth data.
/// An infinite endpoint value is read as an integrable singularity whose
/// exponent is extrapolated from the next two samples; a non-integrable
/// extrapolation yields an infinite cell. Elsewhere the trapezoid rule is used.
pub fn cell_integrals_singular(g: &[f64]) -> Vec<f64> {
    let n = g.len() - 1;
    let h = 1.0 / n as f64;
    (0..n)
        .map(|i| {
            let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
            let (ga, gb) = (g[i], g[i + 1]);
            if i == 0 && !ga.is_finite() {
                return singular_end_cell(ga, g[1], g.get(2).copied().unwrap_or(f64::NAN), h);
            }
            if i == n - 1 && !gb.is_finite() {
                return singular_end_cell(gb, g[n - 1], g[n.saturating_sub(2)], h);
            }
            if b <= POWER_LAW_ZONE {
                power_law_cell(ga, gb, a, b).unwrap_or(0.5 * h * (ga + gb))
            } else if a >= 1.0 - POWER_LAW_ZONE {
                power_law_cell(gb, ga, 1.0 - b, 1.0 - a).unwrap_or(0.5 * h * (ga + gb))
            } else {
                0.5 * h * (ga + gb)
            }
        })
        .collect()
}

/// `∫_{d0}^{d1} A s^β ds` for the power law through `(d0, g0)`, `(d1, g1)`.
fn power_law_cell(g0: f64, g1: f64, d0: f64, d1: f64) -> Option<f64> {
    if d0 <= 0.0 || g0 == 0.0 || g1 == 0.0 || g0.signum() != g1.signum() {
        return None;
    }
    let log_ratio = (d1 / d0).ln();
    let beta = (g1 / g0).ln() / log_ratio;
    if !beta.is_finite() || beta.abs() > MAX_EXPONENT {
        return None;
    }
    let k = beta + 1.0;
    if k.abs() < 1e-9 {
        return Some(g0 * d0 * log_ratio);
    }
    Some((g1 * d1 - g0 * d0) / k)
}

/// Cell `[0, h]` (or its mirror) whose endpoint value is infinite; `g1`, `g2`
/// are the samples at distance `h` and `2h`.
fn singular_end_cell(g_end: f64, g1: f64, g2: f64, h: f64) -> f64 {
    let divergent = g_end.signum() * f64::INFINITY;
    if !(g1.is_finite() && g2.is_finite()) || g1 == 0.0 || g1.signum() != g2.signum() || g2 == 0.0 {
        return divergent;
    }
    let beta = (g2 / g1).ln() / std::f64::consts::LN_2;
    if !(beta > -1.0) {
        return divergent;
    }
    g1 * h / (beta + 1.0)
}

/// Hölder seminorm `sup |φ(x_i) - φ(x_j)| / |x_i - x_j|^α` over all grid pairs.
pub fn holder_seminorm(phi: &GridFunction, alpha: f64) -> Result<f64> {
    holder_seminorm_with(phi, alpha, Execution::default())
}

pub fn holder_seminorm_with(phi: &GridFunction, alpha: f64, exec: Execution) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid("alpha", format!("{alpha} not in (0, 1]")));
    }
    phi.ensure_finite()?;
    let v = phi.values();
    let n = phi.n();
    let h = phi.h();
    // |x_i - x_j|^α depends only on the index gap
    let gap_pow: Vec<f64> = (0..=n).map(|k| (k as f64 * h).powf(alpha)).collect();
    Ok(par::max_over(exec, n, |i| {
        let vi = v[i];
        ((i + 1)..=n)
            .map(|j| (v[j] - vi).abs() / gap_pow[j - i])
            .fold(0.0, f64::max)
    })
    .max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn construction_enforces_invariants() {
        assert!(GridFunction::constant(8, 1.0).is_err());
        let mut v = vec![1.0; 17];
        v[3] = f64::INFINITY;
        assert!(GridFunction::new(v.clone()).is_err());
        v[3] = 1.0;
        v[0] = f64::INFINITY;
        assert!(GridFunction::new(v.clone()).is_ok());
        v[16] = f64::NAN;
        assert!(GridFunction::new(v).is_err());
    }

    #[test]
    fn interpolation_hits_nodes_and_midpoints() {
        let g = GridFunction::from_fn(16, |x| 3.0 * x - 1.0).unwrap();
        assert_eq!(g.at(0.0), -1.0);
        assert_eq!(g.at(1.0), 2.0);
        assert!((g.at(0.37) - 0.11).abs() < 1e-14);
    }

    #[test]
    fn cumulative_integral_of_constant_is_identity() {
        let f = cumulative_integral(&GridFunction::constant(100, 1.0).unwrap()).unwrap();
        for (i, v) in f.values().iter().enumerate() {
            assert!((v - i as f64 / 100.0).abs() < 1e-14);
        }
    }

    #[test]
    fn cumulative_integral_is_exact_on_linear() {
        let f = cumulative_integral(&GridFunction::from_fn(1000, |x| x).unwrap()).unwrap();
        assert!((f.values()[1000] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn cumulative_integral_of_square_within_trapezoid_bound() {
        // error <= (b-a) h^2 / 12 · max|φ''| = 1e-6 / 6
        let f = cumulative_integral(&GridFunction::from_fn(1000, |x| x * x).unwrap()).unwrap();
        assert!((f.values()[1000] - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn trapezoid_rejects_infinite_endpoints() {
        let mut v = vec![1.0; 33];
        v[0] = f64::INFINITY;
        assert!(cumulative_integral(&GridFunction::new(v).unwrap()).is_err());
    }

    #[test]
    fn singular_integral_of_arcsine_density() {
        let n = 2000;
        let f = GridFunction::from_fn(n, |x| 1.0 / (PI * (x * (1.0 - x)).sqrt())).unwrap();
        assert!(f.values()[0].is_infinite());
        let cdf = cumulative_integral_singular(&f).unwrap();
        for (i, v) in cdf.values().iter().enumerate().step_by(50) {
            let x = i as f64 / n as f64;
            let exact = 2.0 / PI * x.sqrt().asin();
            assert!((v - exact).abs() < 2e-5, "x={x}: {v} vs {exact}");
        }
    }

    #[test]
    fn singular_integral_detects_divergence() {
        let f = GridFunction::from_fn(100, |x| 1.0 / x).unwrap();
        assert!(cumulative_integral_singular(&f).is_err());
    }

    #[test]
    fn holder_seminorm_examples() {
        let c = GridFunction::constant(50, 0.3).unwrap();
        assert_eq!(holder_seminorm(&c, 0.7).unwrap(), 0.0);
        let lin = GridFunction::from_fn(50, |x| x).unwrap();
        assert!((holder_seminorm(&lin, 1.0).unwrap() - 1.0).abs() < 1e-12);
        // |√x - √y| <= √|x - y| with equality at y = 0
        let root = GridFunction::from_fn(1000, f64::sqrt).unwrap();
        assert!((holder_seminorm(&root, 0.5).unwrap() - 1.0).abs() < 1e-12);
        assert!(holder_seminorm(&lin, 0.0).is_err());
    }

    #[test]
    fn holder_seminorm_is_execution_independent() {
        let g = GridFunction::from_fn(300, |x| (7.0 * x).sin() * x.sqrt()).unwrap();
        let a = holder_seminorm_with(&g, 0.5, Execution::Sequential).unwrap();
        let b = holder_seminorm_with(&g, 0.5, Execution::Parallel).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
