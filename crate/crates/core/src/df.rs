//! The Diaconis–Friedman chain with place-dependent weights.
//!
//! From `x` the chain moves to a uniform point of `[0, x]` with probability
//! `p(x)` and to a uniform point of `[x, 1]` with probability `q(x)`. Its
//! transition operator is
//!
//! ```text
//! Qφ(x) = p(x)/x ∫_0^x φ + q(x)/(1-x) ∫_x^1 φ,      0 < x < 1,
//! Qφ(0) = p(0) φ(0) + q(0) ∫_0^1 φ,
//! Qφ(1) = p(1) ∫_0^1 φ + q(1) φ(1),
//! ```
//!
//! and its `L²` adjoint, acting on densities, is
//! `Q*φ(x) = ∫_0^x q(t)/(1-t) φ(t) dt + ∫_x^1 p(t)/t φ(t) dt`.
//!
//! The long-run behaviour is decided by `p(0)` and `q(1)`, see [`RegimeCase`].

use std::fmt;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::ifs::PlaceDependentKernel;
use crate::mc;
use crate::numerics::grid::{cell_integrals_singular, prefix_sums, trapezoid_cells, GridFunction};
use crate::numerics::quad::{Adaptive, GaussLegendre};
use crate::par::{self, Execution};
use crate::weight::WeightFunction;

/// `p(0)` (or `q(1)`) above `1 - DEFAULT_REGIME_TOL` counts as equal to 1.
pub const DEFAULT_REGIME_TOL: f64 = 1e-9;
/// Boundary values this close to 1 (but not equal) are flagged as numerically
/// sensitive: the regime is discontinuous there.
pub const SENSITIVE_BAND: f64 = 1e-6;
/// Default grid for densities and harmonic functions.
pub const DEFAULT_GRID: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegimeCase {
    /// `p(0) < 1`, `q(1) < 1`: unique invariant law with a density.
    #[serde(rename = "AC_UNIQUE")]
    AcUnique,
    /// `p(0) = 1`, `q(1) < 1`: `δ_0` is the unique invariant law.
    #[serde(rename = "DIRAC_0")]
    Dirac0,
    /// `p(0) < 1`, `q(1) = 1`: `δ_1` is the unique invariant law.
    #[serde(rename = "DIRAC_1")]
    Dirac1,
    /// `p(0) = q(1) = 1`: invariant laws are the mixtures of `δ_0` and `δ_1`.
    #[serde(rename = "BOUNDARY_MIX")]
    BoundaryMix,
}

impl RegimeCase {
    /// Cheap classification from the boundary values alone.
    pub fn of(weight: &WeightFunction, tolerance: f64) -> RegimeCase {
        let (p0, q1) = boundary_values(weight);
        Self::from_boundary(p0, q1, tolerance)
    }

    pub fn from_boundary(p0: f64, q1: f64, tolerance: f64) -> RegimeCase {
        let at_one = |v: f64| v > 1.0 - tolerance;
        match (at_one(p0), at_one(q1)) {
            (false, false) => RegimeCase::AcUnique,
            (true, false) => RegimeCase::Dirac0,
            (false, true) => RegimeCase::Dirac1,
            (true, true) => RegimeCase::BoundaryMix,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RegimeCase::AcUnique => "AC_UNIQUE",
            RegimeCase::Dirac0 => "DIRAC_0",
            RegimeCase::Dirac1 => "DIRAC_1",
            RegimeCase::BoundaryMix => "BOUNDARY_MIX",
        }
    }
}

impl fmt::Display for RegimeCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `(p(0), q(1))`.
pub fn boundary_values(weight: &WeightFunction) -> (f64, f64) {
    (weight.p(0.0), weight.q(1.0))
}

fn require_regime(weight: &WeightFunction, expected: RegimeCase) -> Result<()> {
    let (p0, q1) = boundary_values(weight);
    let actual = RegimeCase::from_boundary(p0, q1, DEFAULT_REGIME_TOL);
    if actual != expected {
        return Err(Error::Regime {
            expected: expected.as_str(),
            actual,
            p0,
            q1,
        });
    }
    Ok(())
}

/// `Qφ` on the grid of `φ`, integrals by the cumulative trapezoid rule.
pub fn apply_q(weight: &WeightFunction, phi: &GridFunction) -> Result<GridFunction> {
    phi.ensure_finite()?;
    let n = phi.n();
    let v = phi.values();
    let cells = trapezoid_cells(v, phi.h());
    let below = prefix_sums(&cells);
    let mut above = vec![0.0; n + 1];
    for i in (0..n).rev() {
        above[i] = above[i + 1] + cells[i];
    }
    let total = below[n];
    let out = (0..=n)
        .map(|i| {
            let x = phi.x(i);
            let (p, q) = (weight.p(x), weight.q(x));
            if i == 0 {
                p * v[0] + q * total
            } else if i == n {
                p * total + q * v[n]
            } else {
                p * below[i] / x + q * above[i] / (1.0 - x)
            }
        })
        .collect();
    GridFunction::new(out)
}

/// `a · b` with `0 · ∞ = 0`.
fn mul0(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

/// Value at the endpoint of `w(t)/d(t) · φ(t)`, `d` the distance to that
/// endpoint; `w_nb`, `phi_nb` are the samples one cell inwards.
fn singular_kernel_end(w_end: f64, w_nb: f64, phi_end: f64, phi_nb: f64, h: f64) -> f64 {
    if w_end != 0.0 {
        if phi_end == 0.0 {
            // w(0) φ'(0)
            w_end * phi_nb / h
        } else {
            w_end.signum() * phi_end.signum() * f64::INFINITY
        }
    } else {
        // w'(0) φ(0)
        mul0(w_nb / h, phi_end)
    }
}

/// `Q*φ` on the grid of `φ`.
///
/// Both integrals use [`cell_integrals_singular`], so `φ` may carry integrable
/// power-law singularities at the endpoints (densities of the chain do).
/// Endpoint values of the result may be infinite; interior values are finite
/// whenever `φ` is integrable.
pub fn apply_q_adjoint(weight: &WeightFunction, phi: &GridFunction) -> Result<GridFunction> {
    let n = phi.n();
    let h = phi.h();
    let v = phi.values();
    let ps: Vec<f64> = (0..=n).map(|i| weight.p(phi.x(i))).collect();
    let qs: Vec<f64> = ps.iter().map(|p| 1.0 - p).collect();

    // towards-one part: q(t)/(1-t) φ(t)
    let mut up: Vec<f64> = (0..=n)
        .map(|i| if i == n { 0.0 } else { mul0(qs[i] / (1.0 - phi.x(i)), v[i]) })
        .collect();
    up[n] = singular_kernel_end(qs[n], qs[n - 1], v[n], v[n - 1], h);
    // towards-zero part: p(t)/t φ(t)
    let mut down: Vec<f64> = (0..=n)
        .map(|i| if i == 0 { 0.0 } else { mul0(ps[i] / phi.x(i), v[i]) })
        .collect();
    down[0] = singular_kernel_end(ps[0], ps[1], v[0], v[1], h);

    let up_cells = cell_integrals_singular(&up);
    let down_cells = cell_integrals_singular(&down);
    let below = prefix_sums(&up_cells);
    let mut above = vec![0.0; n + 1];
    for i in (0..n).rev() {
        above[i] = above[i + 1] + down_cells[i];
    }
    let out: Vec<f64> = below.iter().zip(&above).map(|(b, a)| b + a).collect();
    if out[1..n].iter().any(|x| !x.is_finite()) {
        return Err(Error::MalformedGrid("φ is not integrable against the adjoint kernel".into()));
    }
    GridFunction::new(out)
}

/// The invariant density
/// `f_p(x) = C⁻¹ exp(∫_x^{1/2} p(t)/t dt + ∫_{1/2}^x q(t)/(1-t) dt)`
/// of an `AC_UNIQUE` weight, evaluated pointwise.
///
/// Writing `p(t)/t = p(0)/t + (p(t) - p(0))/t` (and the mirror at 1) the
/// density factors as `x^{-p(0)} (1-x)^{-q(1)} e^{R(x)}` with `R` an integral
/// of bounded functions. The power laws are exact and only `R` and the
/// normalization `C` go through quadrature, the latter with the substitution
/// of [`Adaptive::integrate_left_power`].
#[derive(Debug, Clone)]
pub struct StationaryDensity {
    weight: WeightFunction,
    p0: f64,
    q1: f64,
    p1: f64,
    norm: f64,
    quad: Adaptive,
}

impl StationaryDensity {
    pub fn new(weight: &WeightFunction) -> Result<Self> {
        require_regime(weight, RegimeCase::AcUnique).map_err(|e| match e {
            Error::Regime { actual, p0, q1, .. } => Error::Regime {
                expected: "AC_UNIQUE (density integrable iff p(0) < 1 and q(1) < 1)",
                actual,
                p0,
                q1,
            },
            e => e,
        })?;
        let (p0, q1) = boundary_values(weight);
        let mut d = Self {
            weight: weight.clone(),
            p0,
            q1,
            p1: weight.p(1.0),
            norm: 1.0,
            quad: Adaptive::default(),
        };
        let left = d.quad.integrate_left_power(-p0, 0.5, |x| (1.0 - x).powf(-q1) * d.remainder(x).exp());
        let right = d.quad.integrate_right_power(-q1, 0.5, |x| x.powf(-p0) * d.remainder(x).exp());
        d.norm = left + right;
        Ok(d)
    }

    /// Local exponents `(q(0) - 1, p(1) - 1)` of the power laws at 0 and 1.
    pub fn exponents(&self) -> (f64, f64) {
        (0.0 - self.p0, 0.0 - self.q1)
    }

    /// Normalization constant `C`.
    pub fn normalization(&self) -> f64 {
        self.norm
    }

    /// `R(x) = ∫_x^{1/2} (p(t) - p(0))/t dt + ∫_{1/2}^x (q(t) - q(1))/(1-t) dt`.
    fn remainder(&self, x: f64) -> f64 {
        let w = &self.weight;
        let (p0, p1) = (self.p0, self.p1);
        let left = self.quad.integrate(x, 0.5, |t| (w.p(t) - p0) / t);
        // q(t) - q(1) = p(1) - p(t)
        let right = self.quad.integrate(0.5, x, |t| (p1 - w.p(t)) / (1.0 - t));
        left + right
    }

    /// `f_p(x)`; endpoint values are one-sided limits (possibly `+∞`).
    pub fn eval(&self, x: f64) -> f64 {
        let left = if x == 0.0 {
            if self.p0 > 0.0 {
                return f64::INFINITY;
            }
            1.0
        } else {
            x.powf(-self.p0)
        };
        let right = if x == 1.0 {
            if self.q1 > 0.0 {
                return f64::INFINITY;
            }
            1.0
        } else {
            (1.0 - x).powf(-self.q1)
        };
        left * right * self.remainder(x).exp() / self.norm
    }

    /// `ν_p([0, x])`.
    pub fn cdf(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let (p0, q1) = (self.p0, self.q1);
        let g_left = |t: f64| (1.0 - t).powf(-q1) * self.remainder(t).exp() / self.norm;
        let g_right = |t: f64| t.powf(-p0) * self.remainder(t).exp() / self.norm;
        if x <= 0.5 {
            self.quad.integrate_left_power(-p0, x, g_left)
        } else {
            1.0 - self.quad.integrate_right_power(-q1, 1.0 - x, g_right)
        }
    }

    /// `ν_p(φ)` for the piecewise-linear interpolant of `φ`.
    pub fn expect(&self, phi: &GridFunction) -> Result<f64> {
        phi.ensure_finite()?;
        let n = phi.n();
        let h = phi.h();
        let rule = GaussLegendre::new(16);
        let (p0, q1) = (self.p0, self.q1);
        let cells = par::map_indices(Execution::default(), n, |i| {
            let a = i as f64 * h;
            if i == 0 {
                self.quad.integrate_left_power(-p0, h, |t| {
                    (1.0 - t).powf(-q1) * self.remainder(t).exp() / self.norm * phi.at(t)
                })
            } else if i == n - 1 {
                self.quad.integrate_right_power(-q1, h, |t| {
                    t.powf(-p0) * self.remainder(t).exp() / self.norm * phi.at(t)
                })
            } else {
                rule.integrate(a, a + h, |t| self.eval(t) * phi.at(t))
            }
        });
        Ok(cells.iter().sum())
    }

    pub fn on_grid(&self, grid_size: usize) -> Result<GridFunction> {
        if grid_size < crate::numerics::grid::MIN_GRID {
            return Err(invalid("grid_size", format!("{grid_size} too small")));
        }
        let values = par::map_indices(Execution::default(), grid_size + 1, |i| {
            self.eval(i as f64 / grid_size as f64)
        });
        GridFunction::new(values)
    }
}

/// `f_p` sampled on the grid with `grid_size` cells.
pub fn closed_form_density(weight: &WeightFunction, grid_size: usize) -> Result<GridFunction> {
    StationaryDensity::new(weight)?.on_grid(grid_size)
}

/// Description of the invariant probability measures.
#[derive(Debug, Clone)]
pub enum Invariant {
    Density(GridFunction),
    PointMass0,
    PointMass1,
    /// Mixtures of `δ_0` and `δ_1`; `h(x)` is the probability of absorption at 1.
    BoundaryMix { h: GridFunction },
}

#[derive(Debug, Clone)]
pub struct RegimeReport {
    pub p0: f64,
    pub q1: f64,
    pub case: RegimeCase,
    /// Boundary values within [`SENSITIVE_BAND`] of 1 without being 1.
    pub near_threshold: bool,
    pub invariant: Invariant,
}

/// Classifies the weight and computes the invariant-measure description on
/// the default grid.
pub fn classify_regime(weight: &WeightFunction, tolerance: f64) -> Result<RegimeReport> {
    classify_regime_on(weight, tolerance, DEFAULT_GRID)
}

pub fn classify_regime_on(weight: &WeightFunction, tolerance: f64, grid_size: usize) -> Result<RegimeReport> {
    let (p0, q1) = boundary_values(weight);
    let case = RegimeCase::from_boundary(p0, q1, tolerance);
    let sensitive = |v: f64| v != 1.0 && (1.0 - v).abs() <= SENSITIVE_BAND.max(tolerance);
    let invariant = match case {
        RegimeCase::AcUnique => Invariant::Density(closed_form_density(weight, grid_size)?),
        RegimeCase::Dirac0 => Invariant::PointMass0,
        RegimeCase::Dirac1 => Invariant::PointMass1,
        RegimeCase::BoundaryMix => {
            let sol = solve_harmonic_unchecked(weight, None, grid_size, &HarmonicOptions::default())?;
            Invariant::BoundaryMix { h: sol.h }
        }
    };
    Ok(RegimeReport {
        p0,
        q1,
        case,
        near_threshold: sensitive(p0) || sensitive(q1),
        invariant,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct HarmonicOptions {
    pub max_iter: usize,
    pub tol: f64,
    /// Relaxation `ω` in `h ← (1-ω) h + ω Qh`.
    pub damping: f64,
}

impl Default for HarmonicOptions {
    fn default() -> Self {
        Self {
            max_iter: 100_000,
            tol: 1e-10,
            damping: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HarmonicSolution {
    pub h: GridFunction,
    /// `sup |Qh - h|` over the grid.
    pub residual: f64,
    pub iterations: usize,
}

/// Absorption-at-1 probability `h` with `Qh = h`, `h(0) = 0`, `h(1) = 1`,
/// by fixed-point iteration from `h(x) = x`.
pub fn solve_harmonic(weight: &WeightFunction, grid_size: usize, max_iter: usize, tol: f64) -> Result<HarmonicSolution> {
    let opts = HarmonicOptions {
        max_iter,
        tol,
        ..HarmonicOptions::default()
    };
    solve_harmonic_from(weight, None, grid_size, &opts)
}

/// As [`solve_harmonic`] with an explicit start (`None` means `h(x) = x`);
/// boundary values are pinned after every sweep.
pub fn solve_harmonic_from(
    weight: &WeightFunction,
    initial: Option<&GridFunction>,
    grid_size: usize,
    opts: &HarmonicOptions,
) -> Result<HarmonicSolution> {
    require_regime(weight, RegimeCase::BoundaryMix)?;
    solve_harmonic_unchecked(weight, initial, grid_size, opts)
}

fn solve_harmonic_unchecked(
    weight: &WeightFunction,
    initial: Option<&GridFunction>,
    grid_size: usize,
    opts: &HarmonicOptions,
) -> Result<HarmonicSolution> {
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(invalid("damping", format!("{} not in (0, 1]", opts.damping)));
    }
    let mut h = match initial {
        Some(h0) => {
            h0.ensure_grid(grid_size)?;
            h0.clone()
        }
        None => GridFunction::from_fn(grid_size, |x| x)?,
    };
    let pin = |h: GridFunction| -> Result<GridFunction> {
        let mut v = h.into_values();
        let n = v.len() - 1;
        v[0] = 0.0;
        v[n] = 1.0;
        GridFunction::new(v)
    };
    h = pin(h)?;
    let omega = opts.damping;
    let mut residual = f64::INFINITY;
    for it in 0..=opts.max_iter {
        let qh = apply_q(weight, &h)?;
        residual = qh.sub(&h)?.sup_norm();
        if residual < opts.tol {
            return Ok(HarmonicSolution {
                h,
                residual,
                iterations: it,
            });
        }
        if it == opts.max_iter {
            break;
        }
        let next: Vec<f64> = h
            .values()
            .iter()
            .zip(qh.values())
            .map(|(a, b)| (1.0 - omega) * a + omega * b)
            .collect();
        h = pin(GridFunction::new(next)?)?;
    }
    Err(Error::NoConvergence {
        what: "harmonic fixed-point iteration",
        iterations: opts.max_iter,
        residual,
        last: Box::new(h.into_values()),
    })
}

/// Distance to the boundary, `Δ(x) = min(x, 1 - x)`.
pub fn delta(x: f64) -> f64 {
    x.min(1.0 - x)
}

/// `E_x[Δ(Z_1)] = (3x - 4x²) / (4(1 - x))` for `p(x) = 1 - x` and
/// `x ∈ (0, 1/2]`; mirrored by `x ↦ 1 - x` on `[1/2, 1)`. Vanishes at the
/// absorbing endpoints.
pub fn expected_delta_one_step(x: f64) -> f64 {
    let x = if x > 0.5 { 1.0 - x } else { x };
    (3.0 * x - 4.0 * x * x) / (4.0 * (1.0 - x))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DriftPoint {
    pub n: usize,
    pub mean_delta: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DriftReport {
    pub curve: Vec<DriftPoint>,
    /// `exp` of the least-squares slope of `log E[Δ(Z_n)]` against `n`, over
    /// the points whose mean exceeds ten standard errors.
    pub fitted_rate: f64,
    pub theoretical_rate: f64,
    pub points_used: usize,
}

/// Monte Carlo estimate of `E_{x0}[Δ(Z_n)]`, `n = 0..=n_max`.
pub fn drift_decay(
    weight: &WeightFunction,
    x0: f64,
    n_max: usize,
    n_chains: usize,
    seed: u64,
    exec: Execution,
) -> Result<DriftReport> {
    if n_chains < 100 {
        return Err(invalid("n_chains", format!("{n_chains} < 100")));
    }
    let kernel = PlaceDependentKernel::diaconis_friedman(weight.clone());
    let (sum, sum_sq) = mc::accumulate_paths(&kernel, x0, n_max, n_chains, seed, exec, delta)?;
    let nf = n_chains as f64;
    let curve: Vec<DriftPoint> = (0..=n_max)
        .map(|n| {
            let mean = sum[n] / nf;
            let var = (sum_sq[n] / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
            DriftPoint {
                n,
                mean_delta: mean,
                stderr: (var / nf).sqrt(),
            }
        })
        .collect();
    let used: Vec<(f64, f64)> = curve
        .iter()
        .filter(|p| p.mean_delta > 0.0 && p.mean_delta > 10.0 * p.stderr)
        .map(|p| (p.n as f64, p.mean_delta.ln()))
        .collect();
    let fitted_rate = least_squares_slope(&used).map_or(f64::NAN, f64::exp);
    Ok(DriftReport {
        curve,
        fitted_rate,
        theoretical_rate: 0.75,
        points_used: used.len(),
    })
}

/// Slope of the least-squares line through `(x, y)` points.
pub(crate) fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
