//! Stationary vector and second eigenvalue of an Ulam matrix.

use rand::Rng;
use serde::Serialize;

use super::ulam::{build_ulam_with, dot, UlamMatrix};
use crate::df::{self, RegimeCase};
use crate::error::{invalid, Error, Result};
use crate::mc::chain_rng;
use crate::par::Execution;
use crate::weight::WeightFunction;

/// Iterates over which the fallback decay rate is fitted.
pub const DECAY_WINDOW: usize = 20;
/// Seed of the random start vector of the deflated iteration.
const START_SEED: u64 = 0x5eed_0f_0a11;

#[derive(Debug, Clone, Copy)]
pub struct SpectrumOptions {
    /// ℓ¹ tolerance for the stationary vector, and tolerance on successive
    /// eigenvalue estimates.
    pub tol: f64,
    pub max_iter: usize,
    pub exec: Execution,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100_000,
            exec: Execution::default(),
        }
    }
}

/// Left fixed vector `π M = π`, `Σ π = 1`, by power iteration from the
/// uniform vector until `|π M - π|₁ < tol`.
pub fn power_iteration(m: &UlamMatrix, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    power_iteration_with(m, tol, max_iter, Execution::default())
}

pub fn power_iteration_with(m: &UlamMatrix, tol: f64, max_iter: usize, exec: Execution) -> Result<Vec<f64>> {
    if !(tol > 0.0) {
        return Err(invalid("tol", format!("{tol} must be positive")));
    }
    let n = m.n_cells();
    let mut pi = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut change = f64::INFINITY;
    for _ in 0..max_iter {
        m.left_mul(&pi, &mut next, exec);
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= s);
        change = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pi, &mut next);
        if change < tol {
            return Ok(pi);
        }
    }
    Err(Error::NoConvergence {
        what: "stationary power iteration",
        iterations: max_iter,
        residual: change,
        last: Box::new(pi),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecondEigenvalue {
    /// Modulus of the dominant eigenvalue on the deflated subspace, in `[0, 1]`.
    pub lambda2: f64,
    /// Geometric rate of the iterate norms over the last [`DECAY_WINDOW`] steps.
    pub decay_fit: f64,
    /// Whether successive ratio estimates settled; if not, `lambda2` is the
    /// decay fit (complex pair or very slow convergence).
    pub converged: bool,
    pub iterations: usize,
}

/// Dominant eigenvalue modulus of `M` restricted to `{φ : π·φ = 0}`.
pub fn second_eigenvalue(m: &UlamMatrix, pi: &[f64], opts: &SpectrumOptions) -> Result<SecondEigenvalue> {
    let ones = vec![1.0; m.n_cells()];
    deflated_eigenvalue(m, &[(pi.to_vec(), ones)], opts)
}

/// Dominant eigenvalue modulus of `M` after projecting out the directions
/// `r_k` along the functionals `l_k`, for pairs `(l_k, r_k)`: after each
/// multiply `φ ← φ - Σ c_k r_k` with `c` solving `Σ_k (l_j·r_k) c_k = l_j·φ`.
pub fn deflated_eigenvalue(
    m: &UlamMatrix,
    pairs: &[(Vec<f64>, Vec<f64>)],
    opts: &SpectrumOptions,
) -> Result<SecondEigenvalue> {
    let n = m.n_cells();
    if pairs.is_empty() || pairs.len() > 2 {
        return Err(invalid("pairs", "one or two deflation pairs supported"));
    }
    if pairs.iter().any(|(l, r)| l.len() != n || r.len() != n) {
        return Err(Error::GridMismatch {
            expected: n,
            actual: pairs.iter().map(|(l, _)| l.len()).find(|&k| k != n).unwrap_or(n),
        });
    }
    let gram: Vec<Vec<f64>> = pairs
        .iter()
        .map(|(l, _)| pairs.iter().map(|(_, r)| dot(l, r)).collect())
        .collect();
    let det = if pairs.len() == 1 { gram[0][0] } else { gram[0][0] * gram[1][1] - gram[0][1] * gram[1][0] };
    if det.abs() < 1e-14 {
        return Err(invalid("pairs", "deflation directions are degenerate"));
    }
    let project = |phi: &mut [f64]| {
        let b: Vec<f64> = pairs.iter().map(|(l, _)| dot(l, phi)).collect();
        let c = if pairs.len() == 1 {
            vec![b[0] / det]
        } else {
            vec![
                (b[0] * gram[1][1] - b[1] * gram[0][1]) / det,
                (gram[0][0] * b[1] - gram[1][0] * b[0]) / det,
            ]
        };
        for ((_, r), ck) in pairs.iter().zip(&c) {
            for (v, rv) in phi.iter_mut().zip(r) {
                *v -= ck * rv;
            }
        }
    };
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |a, b| a.max(b.abs()));

    let mut rng = chain_rng(START_SEED, 0);
    let mut phi: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    project(&mut phi);
    let s = sup(&phi);
    if s == 0.0 {
        return Ok(SecondEigenvalue { lambda2: 0.0, decay_fit: 0.0, converged: true, iterations: 0 });
    }
    phi.iter_mut().for_each(|v| *v /= s);

    let mut next = vec![0.0; n];
    let mut log_norms = Vec::with_capacity(DECAY_WINDOW + 1);
    let mut cumulative = 0.0;
    let mut prev = f64::NAN;
    let mut ratio = f64::NAN;
    for it in 1..=opts.max_iter {
        m.right_mul(&phi, &mut next, opts.exec);
        project(&mut next);
        ratio = sup(&next);
        if ratio == 0.0 || ratio < 1e-300 {
            return Ok(SecondEigenvalue { lambda2: 0.0, decay_fit: 0.0, converged: true, iterations: it });
        }
        cumulative += ratio.ln();
        if log_norms.len() == DECAY_WINDOW + 1 {
            log_norms.remove(0);
        }
        log_norms.push(cumulative);
        next.iter_mut().for_each(|v| *v /= ratio);
        std::mem::swap(&mut phi, &mut next);
        if (ratio - prev).abs() < opts.tol && log_norms.len() > DECAY_WINDOW {
            return Ok(SecondEigenvalue {
                lambda2: ratio.min(1.0),
                decay_fit: decay_rate(&log_norms),
                converged: true,
                iterations: it,
            });
        }
        prev = ratio;
    }
    let decay_fit = decay_rate(&log_norms);
    let lambda2 = if decay_fit.is_finite() { decay_fit } else { ratio };
    Ok(SecondEigenvalue {
        lambda2: lambda2.clamp(0.0, 1.0),
        decay_fit,
        converged: false,
        iterations: opts.max_iter,
    })
}

/// `exp` of the least-squares slope of cumulative log norms.
fn decay_rate(log_norms: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = log_norms.iter().enumerate().map(|(k, &y)| (k as f64, y)).collect();
    df::least_squares_slope(&pts).map_or(f64::NAN, f64::exp)
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumEstimate {
    pub n_cells: usize,
    pub case: RegimeCase,
    /// Stationary cell masses (the last iterate when power iteration did not converge).
    pub stationary: Vec<f64>,
    pub stationary_converged: bool,
    pub lambda2: f64,
    pub decay_fit: f64,
    pub converged: bool,
    /// Set for `BOUNDARY_MIX`: two invariant laws, so the gap after deflating
    /// `π` alone is close to 1 and not meaningful.
    pub degenerate: bool,
    /// For `BOUNDARY_MIX`: the estimate after deflating both end-cell masses
    /// against the pair `(1 - h, h)`.
    pub lambda2_two_sided: Option<f64>,
}

/// Ulam matrix, stationary vector and gap estimate for one weight.
pub fn estimate_spectrum(weight: &WeightFunction, n_cells: usize, opts: &SpectrumOptions) -> Result<SpectrumEstimate> {
    let case = RegimeCase::of(weight, df::DEFAULT_REGIME_TOL);
    let m = build_ulam_with(weight, n_cells, opts.exec)?;
    let (stationary, stationary_converged) = match power_iteration_with(&m, opts.tol, opts.max_iter, opts.exec) {
        Ok(pi) => (pi, true),
        Err(Error::NoConvergence { last, .. }) => (*last, false),
        Err(e) => return Err(e),
    };
    let second = second_eigenvalue(&m, &stationary, opts)?;
    let lambda2_two_sided = if case == RegimeCase::BoundaryMix {
        let n = n_cells;
        let h = harmonic_on_cells(weight, n)?;
        let mut left0 = vec![0.0; n];
        left0[0] = 1.0;
        let mut left1 = vec![0.0; n];
        left1[n - 1] = 1.0;
        let one_minus_h: Vec<f64> = h.iter().map(|v| 1.0 - v).collect();
        Some(deflated_eigenvalue(&m, &[(left0, one_minus_h), (left1, h)], opts)?.lambda2)
    } else {
        None
    };
    Ok(SpectrumEstimate {
        n_cells,
        case,
        stationary,
        stationary_converged,
        lambda2: second.lambda2,
        decay_fit: second.decay_fit,
        converged: second.converged,
        degenerate: case == RegimeCase::BoundaryMix,
        lambda2_two_sided,
    })
}

fn harmonic_on_cells(weight: &WeightFunction, n: usize) -> Result<Vec<f64>> {
    let grid = (4 * n).max(df::DEFAULT_GRID);
    let sol = df::solve_harmonic(weight, grid, 100_000, 1e-10)?;
    Ok((0..n).map(|i| sol.h.at((i as f64 + 0.5) / n as f64)).collect())
}
