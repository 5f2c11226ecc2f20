//! Iterated function systems on `[0, 1]` with place-dependent mixture kernels,
//! and executable versions of the contraction, regularity and minorization
//! hypotheses that give a unique invariant measure.
//!
//! A kernel mixes two one-parameter map families: at state `x` the first
//! family is chosen with probability `p(x)`, the second with `q(x)`, and the
//! family parameter `t` is uniform on `[0, 1]`. The Diaconis–Friedman kernel
//! uses the homotheties `H_t(x) = t x` and the maps `A_t(x) = t x + 1 - t`.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::numerics::quad::GaussLegendre;
use crate::par::{self, Execution};
use crate::weight::WeightFunction;

/// Default number of points of the pair grid used for the sup estimates.
pub const DEFAULT_PAIR_GRID: usize = 201;
/// Default Gauss–Legendre node count for integrals over the family parameter.
pub const DEFAULT_T_NODES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum LipschitzMap {
    /// `x ↦ t x`
    Homothety(f64),
    /// `x ↦ t x + 1 - t`
    AffineToOne(f64),
    /// Linear interpolation through sorted `(x, y)` breakpoints covering `[0, 1]`
    /// with `y ∈ [0, 1]`.
    PiecewiseLinear(Vec<(f64, f64)>),
}

impl LipschitzMap {
    pub fn piecewise_linear(breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        if breakpoints.len() < 2
            || breakpoints[0].0 != 0.0
            || breakpoints[breakpoints.len() - 1].0 != 1.0
            || breakpoints.windows(2).any(|w| w[1].0 <= w[0].0)
        {
            return Err(invalid("breakpoints", "must be strictly increasing in x from 0 to 1"));
        }
        if breakpoints.iter().any(|&(_, y)| !(0.0..=1.0).contains(&y)) {
            return Err(invalid("breakpoints", "map must take values in [0, 1]"));
        }
        Ok(Self::PiecewiseLinear(breakpoints))
    }

    pub fn identity() -> Self {
        Self::PiecewiseLinear(vec![(0.0, 0.0), (1.0, 1.0)])
    }

    pub fn apply(&self, x: f64) -> f64 {
        match self {
            Self::Homothety(t) => t * x,
            // rounding in t x + (1 - t) can only overshoot 1 by an ulp
            Self::AffineToOne(t) => (t * x + (1.0 - t)).min(1.0),
            Self::PiecewiseLinear(bp) => {
                let k = bp.partition_point(|&(bx, _)| bx <= x).clamp(1, bp.len() - 1);
                let (x0, y0) = bp[k - 1];
                let (x1, y1) = bp[k];
                (y0 + (y1 - y0) * (x - x0) / (x1 - x0)).clamp(0.0, 1.0)
            }
        }
    }

    /// Lipschitz constant `[T]`.
    pub fn lipschitz_constant(&self) -> f64 {
        match self {
            Self::Homothety(t) | Self::AffineToOne(t) => *t,
            Self::PiecewiseLinear(bp) => bp
                .windows(2)
                .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
                .fold(0.0, f64::max),
        }
    }
}

/// A family `t ↦ T_t` of maps, `t` uniform on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum MapFamily {
    Homothety,
    AffineToOne,
    /// The same map for every `t`.
    Fixed(LipschitzMap),
}

impl MapFamily {
    pub fn at(&self, t: f64) -> LipschitzMap {
        match self {
            Self::Homothety => LipschitzMap::Homothety(t),
            Self::AffineToOne => LipschitzMap::AffineToOne(t),
            Self::Fixed(m) => m.clone(),
        }
    }

    fn apply(&self, t: f64, x: f64) -> f64 {
        match self {
            Self::Homothety => t * x,
            Self::AffineToOne => (t * x + (1.0 - t)).min(1.0),
            Self::Fixed(m) => m.apply(x),
        }
    }
}

/// The randomness consumed by one step: `u` picks the family, `t` the map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepDraw {
    pub u: f64,
    pub t: f64,
}

/// `μ_x = p(x) · law(first_t) + q(x) · law(second_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaceDependentKernel {
    weight: WeightFunction,
    first: MapFamily,
    second: MapFamily,
}

impl PlaceDependentKernel {
    /// The Diaconis–Friedman kernel: homotheties with probability `p(x)`,
    /// maps towards 1 with probability `q(x)`.
    pub fn diaconis_friedman(weight: WeightFunction) -> Self {
        Self::new(weight, MapFamily::Homothety, MapFamily::AffineToOne)
    }

    pub fn new(weight: WeightFunction, first: MapFamily, second: MapFamily) -> Self {
        Self { weight, first, second }
    }

    pub fn weight(&self) -> &WeightFunction {
        &self.weight
    }

    pub fn is_diaconis_friedman(&self) -> bool {
        self.first == MapFamily::Homothety && self.second == MapFamily::AffineToOne
    }

    /// The map selected at `x` by the draw: `first_t` when `u < p(x)`.
    pub fn sample(&self, x: f64, draw: StepDraw) -> LipschitzMap {
        if draw.u < self.weight.p(x) {
            self.first.at(draw.t)
        } else {
            self.second.at(draw.t)
        }
    }

    /// One step of the chain: `T(x)` for the map selected by the draw.
    pub fn step(&self, x: f64, draw: StepDraw) -> f64 {
        if draw.u < self.weight.p(x) {
            self.first.apply(draw.t, x)
        } else {
            self.second.apply(draw.t, x)
        }
    }
}

/// See [`PlaceDependentKernel::sample`].
pub fn sample_kernel(kernel: &PlaceDependentKernel, x: f64, draw: StepDraw) -> LipschitzMap {
    kernel.sample(x, draw)
}

/// See [`PlaceDependentKernel::step`].
pub fn simulate_step(kernel: &PlaceDependentKernel, x: f64, draw: StepDraw) -> f64 {
    kernel.step(x, draw)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid("alpha", format!("{alpha} not in (0, 1]")));
    }
    Ok(())
}

fn check_pair_grid(grid_size: usize) -> Result<()> {
    if grid_size < 2 {
        return Err(invalid("grid_size", format!("{grid_size} < 2")));
    }
    Ok(())
}

/// Contraction-in-mean coefficient
/// `r = sup_{x≠y} ∫ (|T x - T y| / |x - y|)^α μ_x(dT)`,
/// the sup taken over all pairs of a uniform grid with `grid_size` points.
///
/// This lower-bounds the true sup; for the built-in families the ratio is `t`
/// for every pair, so the grid is immaterial there.
pub fn estimate_contraction_r(kernel: &PlaceDependentKernel, alpha: f64, grid_size: usize) -> Result<f64> {
    estimate_contraction_r_with(kernel, alpha, grid_size, DEFAULT_T_NODES, Execution::default())
}

pub fn estimate_contraction_r_with(
    kernel: &PlaceDependentKernel,
    alpha: f64,
    grid_size: usize,
    t_nodes: usize,
    exec: Execution,
) -> Result<f64> {
    check_alpha(alpha)?;
    check_pair_grid(grid_size)?;
    if t_nodes == 0 {
        return Err(invalid("t_nodes", "need at least one node"));
    }
    let rule = GaussLegendre::new(t_nodes);
    let m = grid_size - 1;
    let xs: Vec<f64> = (0..grid_size).map(|i| i as f64 / m as f64).collect();
    let moment = |family: &MapFamily, x: f64, y: f64| -> f64 {
        rule.iter()
            .map(|(t, w)| {
                let ratio = (family.apply(t, x) - family.apply(t, y)).abs() / (x - y).abs();
                w * ratio.powf(alpha)
            })
            .sum()
    };
    Ok(par::max_over(exec, grid_size, |i| {
        let x = xs[i];
        let (px, qx) = (kernel.weight.p(x), kernel.weight.q(x));
        xs.iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &y)| px * moment(&kernel.first, x, y) + qx * moment(&kernel.second, x, y))
            .fold(0.0, f64::max)
    }))
}

/// Hölder constant of `x ↦ μ_x` in total variation for the Diaconis–Friedman
/// kernel, `sup |μ_x - μ_y|_TV / |x - y|^α` over grid pairs.
///
/// The two families are mutually singular, so `|μ_x - μ_y|_TV = 2 |p(x) - p(y)|`.
pub fn estimate_r_alpha(weight: &WeightFunction, alpha: f64, grid_size: usize) -> Result<f64> {
    check_alpha(alpha)?;
    check_pair_grid(grid_size)?;
    let m = grid_size - 1;
    let ps: Vec<f64> = (0..grid_size).map(|i| weight.p(i as f64 / m as f64)).collect();
    let gap_pow: Vec<f64> = (0..grid_size).map(|k| (k as f64 / m as f64).powf(alpha)).collect();
    Ok(par::max_over(Execution::default(), grid_size, |i| {
        ((i + 1)..grid_size)
            .map(|j| 2.0 * (ps[j] - ps[i]).abs() / gap_pow[j - i])
            .fold(0.0, f64::max)
    })
    .max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MinorantSide {
    /// `μ = ∫ δ_{H_t} dt`
    Homothety,
    /// `μ = ∫ δ_{A_t} dt`
    Affine,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Minorization {
    pub delta: f64,
    pub side: MinorantSide,
    pub witness_found: bool,
}

/// Best uniform minorization `μ_x ≥ δ μ` with `μ` one of the two families.
///
/// `δ_H = inf p` and `δ_A = inf q` over the grid; the larger wins, ties go to
/// the homothety side. A positive `δ` puts the constant map `H_0 ≡ 0` (or
/// `A_0 ≡ 1`) in the support of `μ`, which is a contracting sequence.
pub fn check_minorization(weight: &WeightFunction, grid_size: usize) -> Result<Minorization> {
    check_pair_grid(grid_size)?;
    let m = grid_size - 1;
    let (mut inf_p, mut inf_q) = (f64::INFINITY, f64::INFINITY);
    for i in 0..grid_size {
        let x = i as f64 / m as f64;
        inf_p = inf_p.min(weight.p(x));
        inf_q = inf_q.min(weight.q(x));
    }
    let (delta, side) = if inf_p >= inf_q { (inf_p, MinorantSide::Homothety) } else { (inf_q, MinorantSide::Affine) };
    let delta = delta.clamp(0.0, 1.0);
    if delta > 0.0 {
        Ok(Minorization {
            delta,
            side,
            witness_found: true,
        })
    } else {
        Ok(Minorization {
            delta: 0.0,
            side: MinorantSide::None,
            witness_found: false,
        })
    }
}

/// Estimates of the three hypotheses at a given Hölder exponent.
#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub alpha: f64,
    pub r_estimate: f64,
    pub r_alpha_estimate: f64,
    pub delta: f64,
    pub minorant_side: MinorantSide,
    pub witness_found: bool,
}

impl HypothesisReport {
    /// Contraction in mean: `r < 1`.
    pub fn h1(&self) -> bool {
        self.r_estimate < 1.0
    }

    /// Hölder regularity of `x ↦ μ_x`: `R_α < ∞`.
    pub fn h2(&self) -> bool {
        self.r_alpha_estimate.is_finite()
    }

    /// Minorization with a contracting sequence.
    pub fn h3(&self) -> bool {
        self.delta > 0.0 && self.witness_found
    }
}

pub fn verify_hypotheses(weight: &WeightFunction, alpha: f64, grid_size: usize) -> Result<HypothesisReport> {
    let kernel = PlaceDependentKernel::diaconis_friedman(weight.clone());
    let r = estimate_contraction_r(&kernel, alpha, grid_size)?;
    let big_r = estimate_r_alpha(weight, alpha, grid_size)?;
    let m = check_minorization(weight, grid_size)?;
    Ok(HypothesisReport {
        alpha,
        r_estimate: r,
        r_alpha_estimate: big_r,
        delta: m.delta,
        minorant_side: m.side,
        witness_found: m.witness_found,
    })
}
