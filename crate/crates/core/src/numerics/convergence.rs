//! Sup-norm distance of `Qⁿφ` to its limit.

use crate::df::{self, RegimeCase, StationaryDensity};
use crate::error::{invalid, Result};
use crate::numerics::grid::GridFunction;
use crate::weight::WeightFunction;

/// `sup_x |Qⁿφ(x) - L(φ)(x)|` for `n = 0..=n_steps`, where the limit is
/// `ν_p(φ)`, `φ(0)`, `φ(1)` or `(1 - h(x)) φ(0) + h(x) φ(1)` according to the
/// regime.
pub fn convergence_curve(weight: &WeightFunction, phi: &GridFunction, n_steps: usize) -> Result<Vec<f64>> {
    if n_steps < 2 {
        return Err(invalid("n_steps", format!("{n_steps} < 2")));
    }
    phi.ensure_finite()?;
    let v = phi.values();
    let (first, last) = (v[0], v[v.len() - 1]);
    let limit: GridFunction = match RegimeCase::of(weight, df::DEFAULT_REGIME_TOL) {
        RegimeCase::AcUnique => GridFunction::constant(phi.n(), StationaryDensity::new(weight)?.expect(phi)?)?,
        RegimeCase::Dirac0 => GridFunction::constant(phi.n(), first)?,
        RegimeCase::Dirac1 => GridFunction::constant(phi.n(), last)?,
        RegimeCase::BoundaryMix => {
            if first == last {
                GridFunction::constant(phi.n(), first)?
            } else {
                let h = df::solve_harmonic(weight, phi.n(), 100_000, 1e-10)?.h;
                GridFunction::new(h.values().iter().map(|hx| (1.0 - hx) * first + hx * last).collect())?
            }
        }
    };
    let mut curve = Vec::with_capacity(n_steps + 1);
    let mut current = phi.clone();
    curve.push(current.sub(&limit)?.sup_norm());
    for _ in 0..n_steps {
        current = df::apply_q(weight, &current)?;
        curve.push(current.sub(&limit)?.sup_norm());
    }
    Ok(curve)
}
