//! Seeded Monte Carlo over many independent chains.
//!
//! Random numbers come from ChaCha8 (`rand_chacha` 0.9). Chain `c` of a run
//! with master seed `s` uses the generator seeded with `s` through
//! `seed_from_u64` and switched to stream `c` with `set_stream`; ChaCha has
//! `2^64` streams of period `2^68` bytes each. A chain's path therefore
//! depends only on `(s, c)`, never on how chains are scheduled.
//!
//! Chains are processed in fixed batches of [`BATCH`]. Each batch fills its
//! own tally; tallies are merged once, in batch order, so floating-point sums
//! are identical for any thread count.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::df::{self, RegimeCase, StationaryDensity};
use crate::error::{invalid, Error, Result};
use crate::ifs::{PlaceDependentKernel, StepDraw};
use crate::numerics::grid::GridFunction;
use crate::par::{self, Execution};
use crate::weight::WeightFunction;

pub const RNG_NAME: &str = "ChaCha8 (rand_chacha 0.9); seed_from_u64(master seed), set_stream(chain index)";
/// Chains per work item.
pub const BATCH: usize = 64;
/// Asymptotic Kolmogorov distribution quantile `K_{0.99}`.
pub const KS_CRITICAL_1PCT: f64 = 1.628;
/// Raw samples are kept (and KS computed on them) up to this many.
pub const MAX_RAW_SAMPLES: usize = 1_000_000;
pub const DEFAULT_BINS: usize = 200;
pub const DEFAULT_ABSORPTION_EPS: f64 = 1e-6;

/// Generator for chain `chain` of a run seeded with `seed`.
pub fn chain_rng(seed: u64, chain: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain);
    rng
}

pub fn next_draw<R: Rng>(rng: &mut R) -> StepDraw {
    StepDraw {
        u: rng.random(),
        t: rng.random(),
    }
}

/// How one transition is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampler {
    /// Family from `u < p(x)`, then the map parameter `t`: two uniforms per step.
    #[default]
    TwoDraw,
    /// Inverse of the one-step distribution function
    /// `F_x(y) = p(x) min(y, x)/x + q(x) (y - x)⁺/(1 - x)`: one uniform per step.
    InverseCdf,
}

impl Sampler {
    fn step<R: Rng>(self, kernel: &PlaceDependentKernel, x: f64, rng: &mut R) -> f64 {
        match self {
            Sampler::TwoDraw => kernel.step(x, next_draw(rng)),
            Sampler::InverseCdf => {
                let v: f64 = rng.random();
                let p = kernel.weight().p(x);
                if v < p {
                    x * (v / p)
                } else {
                    (x + (1.0 - x) * (v - p) / (1.0 - p)).min(1.0)
                }
            }
        }
    }
}

/// Batched fold over chains `0..n_chains`; see the module docs.
pub(crate) fn fold_chains<T, I, F, M>(exec: Execution, n_chains: usize, init: I, per_chain: F, mut merge: M) -> T
where
    T: Send,
    I: Fn() -> T + Sync + Send,
    F: Fn(&mut T, usize) + Sync + Send,
    M: FnMut(&mut T, T),
{
    let n_batches = n_chains.div_ceil(BATCH);
    let tallies = par::map_indices(exec, n_batches, |b| {
        let mut acc = init();
        for chain in b * BATCH..((b + 1) * BATCH).min(n_chains) {
            per_chain(&mut acc, chain);
        }
        acc
    });
    let mut total = init();
    for t in tallies {
        merge(&mut total, t);
    }
    total
}

fn check_point(name: &'static str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(invalid(name, format!("{x} not in [0, 1]")));
    }
    Ok(())
}

/// A recorded sample path `Z_0, …, Z_n` with the draws that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub seed: u64,
    pub chain: u64,
    pub x0: f64,
    pub states: Vec<f64>,
    pub choices: Vec<StepDraw>,
}

impl Trajectory {
    pub fn simulate(weight: &WeightFunction, x0: f64, n_steps: usize, seed: u64, chain: u64) -> Result<Self> {
        check_point("x0", x0)?;
        let kernel = PlaceDependentKernel::diaconis_friedman(weight.clone());
        let mut rng = chain_rng(seed, chain);
        let mut states = Vec::with_capacity(n_steps + 1);
        let mut choices = Vec::with_capacity(n_steps);
        let mut z = x0;
        states.push(z);
        for _ in 0..n_steps {
            let d = next_draw(&mut rng);
            z = kernel.step(z, d);
            choices.push(d);
            states.push(z);
        }
        Ok(Self {
            seed,
            chain,
            x0,
            states,
            choices,
        })
    }

    /// Re-applies the recorded draws from `x0`.
    pub fn replay(&self, weight: &WeightFunction) -> Vec<f64> {
        let kernel = PlaceDependentKernel::diaconis_friedman(weight.clone());
        let mut z = self.x0;
        std::iter::once(z)
            .chain(self.choices.iter().map(|&d| {
                z = kernel.step(z, d);
                z
            }))
            .collect()
    }
}

/// Histogram of visited states over `n_bins` equal bins of `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalMeasure {
    pub counts: Vec<u64>,
    pub total: u64,
    /// Raw samples, chain-major, when there are at most [`MAX_RAW_SAMPLES`].
    #[serde(skip)]
    pub samples: Option<Vec<f64>>,
    /// Samples contributed by each chain (the chain-major stride of `samples`).
    pub per_chain: usize,
}

impl EmpiricalMeasure {
    pub fn new(n_bins: usize) -> Self {
        Self {
            counts: vec![0; n_bins],
            total: 0,
            samples: Some(Vec::new()),
            per_chain: 0,
        }
    }

    /// Measure of independent samples (one per "chain").
    pub fn from_samples(samples: &[f64], n_bins: usize) -> Self {
        let mut m = Self::new(n_bins);
        for &z in samples {
            m.add(z);
        }
        m.samples = Some(samples.to_vec());
        m.per_chain = 1;
        m
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_of(&self, z: f64) -> usize {
        ((z * self.n_bins() as f64) as usize).min(self.n_bins() - 1)
    }

    fn add(&mut self, z: f64) {
        let b = self.bin_of(z);
        self.counts[b] += 1;
        self.total += 1;
    }

    /// `(left, right, count)` per bin.
    pub fn bins(&self) -> impl Iterator<Item = (f64, f64, u64)> + '_ {
        let nb = self.n_bins() as f64;
        self.counts
            .iter()
            .enumerate()
            .map(move |(k, &c)| (k as f64 / nb, (k + 1) as f64 / nb, c))
    }

    /// Fraction of samples in `[0, b)` for bin edge `b = k / n_bins`.
    pub fn ecdf_at_edge(&self, k: usize) -> f64 {
        self.counts[..k].iter().sum::<u64>() as f64 / self.total as f64
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ChainOptions {
    pub n_bins: usize,
    pub sampler: Sampler,
    pub exec: Execution,
}

impl Default for ChainOptions {
    fn default() -> Self {
        Self {
            n_bins: DEFAULT_BINS,
            sampler: Sampler::default(),
            exec: Execution::default(),
        }
    }
}

/// Runs `n_chains` chains of `n_steps` steps from `x0` and records the states
/// `Z_{burn_in+1}, …, Z_{n_steps}` of every chain.
pub fn run_chains(
    weight: &WeightFunction,
    x0: f64,
    n_steps: usize,
    n_chains: usize,
    burn_in: usize,
    seed: u64,
    opts: &ChainOptions,
) -> Result<EmpiricalMeasure> {
    check_point("x0", x0)?;
    if burn_in >= n_steps {
        return Err(invalid("burn_in", format!("{burn_in} >= n_steps = {n_steps}")));
    }
    if n_chains == 0 {
        return Err(invalid("n_chains", "need at least one chain"));
    }
    if opts.n_bins == 0 {
        return Err(invalid("n_bins", "need at least one bin"));
    }
    let kernel = PlaceDependentKernel::diaconis_friedman(weight.clone());
    let per_chain = n_steps - burn_in;
    let keep = n_chains.saturating_mul(per_chain) <= MAX_RAW_SAMPLES;
    let mut m = fold_chains(
        opts.exec,
        n_chains,
        || {
            let mut m = EmpiricalMeasure::new(opts.n_bins);
            if !keep {
                m.samples = None;
            }
            m
        },
        |m, chain| {
            let mut rng = chain_rng(seed, chain as u64);
            let mut z = x0;
            for step in 1..=n_steps {
                z = opts.sampler.step(&kernel, z, &mut rng);
                if step > burn_in {
                    m.add(z);
                    if let Some(s) = m.samples.as_mut() {
                        s.push(z);
                    }
                }
            }
        },
        |acc, part| {
            for (a, b) in acc.counts.iter_mut().zip(&part.counts) {
                *a += b;
            }
            acc.total += part.total;
            if let (Some(a), Some(b)) = (acc.samples.as_mut(), part.samples) {
                a.extend(b);
            }
        },
    );
    m.per_chain = per_chain;
    Ok(m)
}

/// A cumulative distribution function on `[0, 1]`.
pub trait Cdf {
    fn cdf(&self, x: f64) -> f64;

    /// Rejects functions that are not nondecreasing from 0 to 1 on a probe grid.
    fn validate(&self) -> Result<()> {
        const PROBES: usize = 1000;
        let (lo, hi) = (self.cdf(0.0), self.cdf(1.0));
        if lo.abs() > 1e-9 || (hi - 1.0).abs() > 1e-9 {
            return Err(Error::MalformedCdf(format!("F(0) = {lo}, F(1) = {hi}")));
        }
        let mut prev = lo;
        for i in 1..=PROBES {
            let v = self.cdf(i as f64 / PROBES as f64);
            if !v.is_finite() || v < prev - 1e-12 {
                return Err(Error::MalformedCdf(format!("decreasing near x = {}", i as f64 / PROBES as f64)));
            }
            prev = v;
        }
        Ok(())
    }
}

impl<F: Fn(f64) -> f64> Cdf for F {
    fn cdf(&self, x: f64) -> f64 {
        self(x)
    }
}

/// Linear interpolation of tabulated CDF values.
impl Cdf for GridFunction {
    fn cdf(&self, x: f64) -> f64 {
        self.at(x)
    }

    fn validate(&self) -> Result<()> {
        let v = self.values();
        if v[0] != 0.0 || (v[v.len() - 1] - 1.0).abs() > 1e-12 {
            return Err(Error::MalformedCdf(format!("F(0) = {}, F(1) = {}", v[0], v[v.len() - 1])));
        }
        if v.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::MalformedCdf("not nondecreasing".into()));
        }
        Ok(())
    }
}

impl Cdf for StationaryDensity {
    fn cdf(&self, x: f64) -> f64 {
        StationaryDensity::cdf(self, x)
    }
}

/// A CDF tabulated at `x_k = sin²(πk / 2M)`, nodes clustered at both ends.
///
/// Cells within 1/4 of an end interpolate `F` (or `1 - F` at the right end) as
/// a power law in the distance to that end, which is exact for the leading
/// behaviour of densities with power-law endpoint singularities; the first and
/// last cell extrapolate the exponent of their neighbour. Other cells are
/// linear in `θ = asin √x`. Evaluation is `O(1)`.
#[derive(Debug, Clone)]
pub struct TabulatedCdf {
    xs: Vec<f64>,
    fs: Vec<f64>,
}

impl TabulatedCdf {
    pub fn from_cdf<C: Cdf + Sync + ?Sized>(cdf: &C, cells: usize, exec: Execution) -> Result<Self> {
        if cells < 8 {
            return Err(invalid("cells", format!("{cells} < 8")));
        }
        cdf.validate()?;
        let m = cells as f64;
        let xs: Vec<f64> = (0..=cells)
            .map(|k| match k {
                0 => 0.0,
                k if k == cells => 1.0,
                k => (std::f64::consts::FRAC_PI_2 * k as f64 / m).sin().powi(2),
            })
            .collect();
        let mut fs = par::map_indices(exec, cells + 1, |k| cdf.cdf(xs[k]));
        fs[0] = 0.0;
        fs[cells] = 1.0;
        // quadrature noise must not break monotonicity
        for k in 1..=cells {
            fs[k] = fs[k].max(fs[k - 1]);
        }
        Ok(Self { xs, fs })
    }

    fn cells(&self) -> usize {
        self.xs.len() - 1
    }
}

/// `y0 (d / d0)^β` with `β` from the two samples, or `None` if they do not
/// describe a positive power law.
fn power_interp(d: f64, d0: f64, y0: f64, d1: f64, y1: f64) -> Option<f64> {
    if !(y0 > 0.0 && y1 > 0.0 && d0 > 0.0 && d1 > 0.0 && d0 != d1) {
        return None;
    }
    let beta = (y1 / y0).ln() / (d1 / d0).ln();
    (beta.is_finite() && beta >= 0.0).then(|| y0 * (d / d0).powf(beta))
}

impl Cdf for TabulatedCdf {
    fn cdf(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let m = self.cells();
        let theta = x.sqrt().asin();
        let k = ((theta / std::f64::consts::FRAC_PI_2 * m as f64) as usize).min(m - 1);
        let (xs, fs) = (&self.xs, &self.fs);
        let (a, b) = (xs[k], xs[k + 1]);
        let linear = || {
            let (ta, tb) = (a.sqrt().asin(), b.sqrt().asin());
            fs[k] + (fs[k + 1] - fs[k]) * (theta - ta) / (tb - ta)
        };
        let v = if b <= 0.25 {
            let p = if k == 0 {
                power_interp(x, xs[1], fs[1], xs[2], fs[2])
            } else {
                power_interp(x, a, fs[k], b, fs[k + 1])
            };
            p.unwrap_or_else(linear)
        } else if a >= 0.75 {
            let g = |j: usize| 1.0 - fs[j];
            let d = |j: usize| 1.0 - xs[j];
            let p = if k == m - 1 {
                power_interp(1.0 - x, d(m - 1), g(m - 1), d(m - 2), g(m - 2))
            } else {
                power_interp(1.0 - x, d(k + 1), g(k + 1), d(k), g(k))
            };
            p.map_or_else(linear, |g| 1.0 - g)
        } else {
            linear()
        };
        v.clamp(fs[k], fs[k + 1])
    }
}

/// Kolmogorov–Smirnov distance between `emp` and `cdf`: on the raw sorted
/// samples when they were kept, otherwise the sup over bin edges.
pub fn ks_distance<C: Cdf + ?Sized>(emp: &EmpiricalMeasure, cdf: &C) -> Result<f64> {
    cdf.validate()?;
    if emp.total == 0 {
        return Err(invalid("emp", "empty empirical measure"));
    }
    Ok(match &emp.samples {
        Some(s) if !s.is_empty() => ks_sorted(&sorted(s), cdf),
        _ => ks_binned(emp, cdf),
    })
}

/// Sup over bin edges of `|F_emp - F|`.
pub fn ks_distance_binned<C: Cdf + ?Sized>(emp: &EmpiricalMeasure, cdf: &C) -> Result<f64> {
    cdf.validate()?;
    if emp.total == 0 {
        return Err(invalid("emp", "empty empirical measure"));
    }
    Ok(ks_binned(emp, cdf))
}

fn ks_binned<C: Cdf + ?Sized>(emp: &EmpiricalMeasure, cdf: &C) -> f64 {
    let nb = emp.n_bins();
    let mut below = 0u64;
    let mut d: f64 = 0.0;
    for k in 0..=nb {
        let ecdf = below as f64 / emp.total as f64;
        d = d.max((ecdf - cdf.cdf(k as f64 / nb as f64)).abs());
        if k < nb {
            below += emp.counts[k];
        }
    }
    d
}

fn sorted(s: &[f64]) -> Vec<f64> {
    let mut v = s.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn ks_sorted<C: Cdf + ?Sized>(xs: &[f64], cdf: &C) -> f64 {
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf.cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Two-sample KS distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Integrated autocorrelation time of `values` (chain-major, `per_chain` per
/// chain), by Geyer's initial positive sequence on the pooled within-chain
/// autocorrelations.
pub fn integrated_autocorrelation_time(values: &[f64], per_chain: usize) -> f64 {
    if per_chain < 2 || values.len() < 2 * per_chain {
        return 1.0;
    }
    let n_chains = values.len() / per_chain;
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let max_lag = per_chain - 1;
    let autocov = |lag: usize| -> f64 {
        let mut s = 0.0;
        let mut cnt = 0usize;
        for c in 0..n_chains {
            let chain = &values[c * per_chain..(c + 1) * per_chain];
            for k in 0..per_chain - lag {
                s += (chain[k] - mean) * (chain[k + lag] - mean);
            }
            cnt += per_chain - lag;
        }
        s / cnt as f64
    };
    let g0 = autocov(0);
    if g0 <= 0.0 {
        return 1.0;
    }
    let rho = |k: usize| autocov(k) / g0;
    // τ = -1 + 2 Σ_m Γ_m, Γ_m = ρ_{2m} + ρ_{2m+1}, summed while positive
    let mut tau = -1.0;
    let mut m = 0;
    while 2 * m + 1 <= max_lag {
        let pair = rho(2 * m) + rho(2 * m + 1);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        m += 1;
    }
    tau.max(1.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct KsReport {
    pub statistic: f64,
    pub n: usize,
    /// Largest integrated autocorrelation time over the probe functions.
    pub tau: f64,
    pub n_eff: f64,
    pub critical_value: f64,
    pub significance: f64,
    pub passed: bool,
    pub method: String,
}

/// Probe functions for the autocorrelation adjustment.
const TAU_PROBES: [(&str, fn(f64) -> f64); 4] = [
    ("x", |x| x),
    ("1[x<=0.1]", |x| f64::from(u8::from(x <= 0.1))),
    ("1[x<=0.5]", |x| f64::from(u8::from(x <= 0.5))),
    ("1[x<=0.9]", |x| f64::from(u8::from(x <= 0.9))),
];

/// KS test at the 1% level with an autocorrelation-adjusted sample size.
///
/// `n_eff = n / τ` with `τ` the largest integrated autocorrelation time
/// (Geyer initial positive sequence) over the probes `x`, `1[x ≤ 0.1]`,
/// `1[x ≤ 0.5]`, `1[x ≤ 0.9]`; the critical value is `1.628 / √n_eff`.
pub fn ks_test<C: Cdf + ?Sized>(emp: &EmpiricalMeasure, cdf: &C) -> Result<KsReport> {
    let statistic = ks_distance(emp, cdf)?;
    let n = emp.total as usize;
    let tau = match &emp.samples {
        Some(s) if emp.per_chain >= 2 => TAU_PROBES
            .iter()
            .map(|(_, f)| {
                let v: Vec<f64> = s.iter().map(|&z| f(z)).collect();
                integrated_autocorrelation_time(&v, emp.per_chain)
            })
            .fold(1.0, f64::max),
        _ => 1.0,
    };
    let n_eff = n as f64 / tau;
    let critical_value = KS_CRITICAL_1PCT / n_eff.sqrt();
    let probes: Vec<&str> = TAU_PROBES.iter().map(|(name, _)| *name).collect();
    Ok(KsReport {
        statistic,
        n,
        tau,
        n_eff,
        critical_value,
        significance: 0.01,
        passed: statistic < critical_value,
        method: format!(
            "n_eff = n / tau, tau = max integrated autocorrelation time (Geyer initial positive sequence, \
             pooled within-chain autocovariances) over probes [{}]; critical value K_0.99 / sqrt(n_eff) with K_0.99 = {}",
            probes.join(", "),
            KS_CRITICAL_1PCT
        ),
    })
}

/// `(Σ_chains f(Z_n), Σ_chains f(Z_n)²)` for `n = 0..=n_max`.
pub fn accumulate_paths<F>(
    kernel: &PlaceDependentKernel,
    x0: f64,
    n_max: usize,
    n_chains: usize,
    seed: u64,
    exec: Execution,
    f: F,
) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    check_point("x0", x0)?;
    let (s, s2) = fold_chains(
        exec,
        n_chains,
        || (vec![0.0; n_max + 1], vec![0.0; n_max + 1]),
        |(s, s2), chain| {
            let mut rng = chain_rng(seed, chain as u64);
            let mut z = x0;
            for n in 0..=n_max {
                if n > 0 {
                    z = kernel.step(z, next_draw(&mut rng));
                }
                let v = f(z);
                s[n] += v;
                s2[n] += v * v;
            }
        },
        |(a, a2), (b, b2)| {
            for n in 0..=n_max {
                a[n] += b[n];
                a2[n] += b2[n];
            }
        },
    );
    Ok((s, s2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
}

fn mean_estimate(sum: f64, sum_sq: f64, n: usize) -> MeanEstimate {
    let nf = n as f64;
    let mean = sum / nf;
    let var = if n > 1 { (sum_sq / nf - mean * mean).max(0.0) * nf / (nf - 1.0) } else { 0.0 };
    MeanEstimate {
        mean,
        stderr: (var / nf).sqrt(),
    }
}

/// `E_x[f(Z_1)]` from `n_samples` independent single steps.
pub fn one_step_mean<F>(weight: &WeightFunction, x: f64, f: F, n_samples: usize, seed: u64, exec: Execution) -> Result<MeanEstimate>
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    if n_samples < 2 {
        return Err(invalid("n_samples", "need at least two samples"));
    }
    let kernel = PlaceDependentKernel::diaconis_friedman(weight.clone());
    let (s, s2) = accumulate_paths(&kernel, x, 1, n_samples, seed, exec, f)?;
    Ok(mean_estimate(s[1], s2[1], n_samples))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AbsorptionSplit {
    pub near_zero: f64,
    pub near_one: f64,
    pub undecided: f64,
    pub n_chains: usize,
}

impl AbsorptionSplit {
    /// Binomial standard error of `near_one`.
    pub fn stderr_near_one(&self) -> f64 {
        (self.near_one * (1.0 - self.near_one) / self.n_chains as f64).sqrt()
    }
}

/// Classifies `Z_{n_steps}` of each chain into `[0, ε]`, `[1-ε, 1]` or the middle.
pub fn absorption_split(
    weight: &WeightFunction,
    x0: f64,
    n_chains: usize,
    n_steps: usize,
    epsilon: f64,
    seed: u64,
    exec: Execution,
) -> Result<AbsorptionSplit> {
    check_point("x0", x0)?;
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(invalid("epsilon", format!("{epsilon} not in (0, 1/2)")));
    }
    if n_chains == 0 {
        return Err(invalid("n_chains", "need at least one chain"));
    }
    let (p0, q1) = df::boundary_values(weight);
    let case = RegimeCase::from_boundary(p0, q1, df::DEFAULT_REGIME_TOL);
    if case != RegimeCase::BoundaryMix {
        return Err(Error::Regime {
            expected: "BOUNDARY_MIX",
            actual: case,
            p0,
            q1,
        });
    }
    let kernel = PlaceDependentKernel::diaconis_friedman(weight.clone());
    let counts = fold_chains(
        exec,
        n_chains,
        || [0usize; 3],
        |c, chain| {
            let mut rng = chain_rng(seed, chain as u64);
            let mut z = x0;
            for _ in 0..n_steps {
                z = kernel.step(z, next_draw(&mut rng));
            }
            let slot = if z <= epsilon {
                0
            } else if z >= 1.0 - epsilon {
                1
            } else {
                2
            };
            c[slot] += 1;
        },
        |a, b| {
            for k in 0..3 {
                a[k] += b[k];
            }
        },
    );
    let nf = n_chains as f64;
    Ok(AbsorptionSplit {
        near_zero: counts[0] as f64 / nf,
        near_one: counts[1] as f64 / nf,
        undecided: counts[2] as f64 / nf,
        n_chains,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckpointStat {
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
}

/// Monte Carlo mean of `h(Z_n)` at each checkpoint, `h` interpolated linearly.
/// For harmonic `h` every mean should be within `3σ` of `h(x0)`.
pub fn martingale_check(
    weight: &WeightFunction,
    h: &GridFunction,
    x0: f64,
    checkpoints: &[usize],
    n_chains: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<CheckpointStat>> {
    h.ensure_finite()?;
    if n_chains < 2 {
        return Err(invalid("n_chains", "need at least two chains"));
    }
    let n_max = checkpoints.iter().copied().max().unwrap_or(0);
    let kernel = PlaceDependentKernel::diaconis_friedman(weight.clone());
    let (s, s2) = accumulate_paths(&kernel, x0, n_max, n_chains, seed, exec, |z| h.at(z))?;
    Ok(checkpoints
        .iter()
        .map(|&n| {
            let e = mean_estimate(s[n], s2[n], n_chains);
            CheckpointStat {
                n,
                mean: e.mean,
                stderr: e.stderr,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(spec: &str) -> WeightFunction {
        WeightFunction::parse(spec).unwrap()
    }

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let a: Vec<f64> = (0..4).map(|_| chain_rng(7, 0).random()).collect();
        assert!(a.windows(2).all(|p| p[0] == p[1]));
        let mut r0 = chain_rng(7, 0);
        let mut r1 = chain_rng(7, 1);
        let x: f64 = r0.random();
        let y: f64 = r1.random();
        assert_ne!(x, y);
    }

    #[test]
    fn trajectory_replays_bit_exactly() {
        let weight = w("poly:0.2,0.6");
        let t = Trajectory::simulate(&weight, 0.4, 500, 99, 3).unwrap();
        assert_eq!(t.states.len(), 501);
        assert!(t.states.iter().all(|z| (0.0..=1.0).contains(z)));
        let replay = t.replay(&weight);
        assert!(replay.iter().zip(&t.states).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(Trajectory::simulate(&weight, 0.4, 500, 99, 3).unwrap(), t);
    }

    #[test]
    fn single_chain_single_step_is_point_mass() {
        let m = run_chains(&w("const:0.5"), 0.5, 11, 1, 10, 1, &ChainOptions::default()).unwrap();
        assert_eq!(m.total, 1);
        assert_eq!(m.counts.iter().filter(|&&c| c > 0).count(), 1);
    }

    #[test]
    fn run_chains_validates() {
        let o = ChainOptions::default();
        assert!(run_chains(&w("x"), 0.5, 10, 10, 10, 1, &o).is_err());
        assert!(run_chains(&w("x"), 1.5, 10, 10, 1, 1, &o).is_err());
    }

    #[test]
    fn run_chains_is_execution_independent() {
        let weight = w("const:0.3");
        let seq = ChainOptions {
            exec: Execution::Sequential,
            ..Default::default()
        };
        let a = run_chains(&weight, 0.5, 50, 300, 10, 5, &seq).unwrap();
        let b = run_chains(&weight, 0.5, 50, 300, 10, 5, &ChainOptions::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.total, 300 * 40);
        assert_eq!(a.counts.iter().sum::<u64>(), a.total);
    }

    #[test]
    fn ks_distance_of_own_cdf_is_small() {
        // Uniform samples from a counter-based stream; critical value 1.628/√n
        let n = 1_000_000;
        let mut rng = chain_rng(2024, 0);
        let xs: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let m = EmpiricalMeasure::from_samples(&xs, 200);
        let d = ks_distance(&m, &|x: f64| x).unwrap();
        assert!(d < KS_CRITICAL_1PCT / (n as f64).sqrt(), "{d}");
    }

    #[test]
    fn ks_point_mass_against_uniform() {
        let mut m = EmpiricalMeasure::from_samples(&[0.0; 10], 100);
        let d = ks_distance(&m, &|x: f64| x).unwrap();
        assert!(d >= 1.0 - 0.01);
        m.samples = None;
        let d = ks_distance(&m, &|x: f64| x).unwrap();
        assert!((d - 0.99).abs() < 1e-12, "{d}");
    }

    #[test]
    fn ks_rejects_malformed_cdf() {
        let m = EmpiricalMeasure::from_samples(&[0.5], 10);
        assert!(ks_distance(&m, &|x: f64| 1.0 - x).is_err());
        assert!(ks_distance(&m, &|x: f64| 0.5 * x).is_err());
        let bad = GridFunction::from_fn(20, |x| (6.0 * x).sin().abs().min(x)).unwrap();
        assert!(ks_distance(&m, &bad).is_err());
        let good = GridFunction::from_fn(20, |x| x * x).unwrap();
        assert!(ks_distance(&m, &good).is_ok());
    }

    #[test]
    fn tabulated_cdf_tracks_singular_laws() {
        let arcsine = |x: f64| 2.0 / std::f64::consts::PI * x.sqrt().asin();
        let t = TabulatedCdf::from_cdf(&arcsine, 512, Execution::default()).unwrap();
        // a Beta(0.3, 0.7)-like endpoint behaviour through its power laws
        let skew = |x: f64| 0.5 * x.powf(0.3) + 0.5 * (1.0 - (1.0 - x).powf(0.7));
        let s = TabulatedCdf::from_cdf(&skew, 512, Execution::default()).unwrap();
        for k in 0..=10_000 {
            let x = (k as f64 / 10_000.0).powi(3);
            assert!((t.cdf(x) - arcsine(x)).abs() < 1e-6, "arcsine x={x}");
            assert!((s.cdf(x) - skew(x)).abs() < 1e-4, "skew x={x}: {} vs {}", s.cdf(x), skew(x));
            let y = 1.0 - x;
            assert!((s.cdf(y) - skew(y)).abs() < 1e-4, "skew y={y}");
        }
        assert!(t.validate().is_ok());
    }

    #[test]
    fn two_samplers_agree_in_distribution() {
        let weight = w("poly:0.2,0.6");
        let mk = |sampler| ChainOptions {
            sampler,
            ..Default::default()
        };
        // one retained state per chain: independent samples
        let a = run_chains(&weight, 0.5, 41, 20_000, 40, 11, &mk(Sampler::TwoDraw)).unwrap();
        let b = run_chains(&weight, 0.5, 41, 20_000, 40, 12, &mk(Sampler::InverseCdf)).unwrap();
        let d = ks_two_sample(a.samples.as_ref().unwrap(), b.samples.as_ref().unwrap());
        let crit = KS_CRITICAL_1PCT * (2.0 / 20_000.0f64).sqrt();
        assert!(d < crit, "{d} >= {crit}");
    }

    #[test]
    fn autocorrelation_time_of_iid_is_one_and_of_ar1_is_larger() {
        let mut rng = chain_rng(1, 0);
        let iid: Vec<f64> = (0..20_000).map(|_| rng.random()).collect();
        let tau = integrated_autocorrelation_time(&iid, 100);
        assert!(tau < 1.3, "{tau}");
        // AR(1) with coefficient 1/2 has τ = (1 + 1/2)/(1 - 1/2) = 3
        let mut ar = Vec::with_capacity(200 * 200);
        for _ in 0..200 {
            let mut v = 0.0;
            for _ in 0..200 {
                v = 0.5 * v + rng.random::<f64>() - 0.5;
                ar.push(v);
            }
        }
        let tau = integrated_autocorrelation_time(&ar, 200);
        assert!((tau - 3.0).abs() < 0.4, "{tau}");
    }

    #[test]
    fn absorption_from_endpoints() {
        let weight = w("1-x");
        let s = absorption_split(&weight, 0.0, 200, 50, 1e-6, 3, Execution::default()).unwrap();
        assert_eq!(s.near_zero, 1.0);
        let s = absorption_split(&weight, 1.0, 200, 50, 1e-6, 3, Execution::default()).unwrap();
        assert_eq!(s.near_one, 1.0);
        assert!(absorption_split(&w("const:0.5"), 0.3, 10, 10, 1e-6, 3, Execution::default()).is_err());
        assert!(absorption_split(&weight, 0.3, 10, 10, 0.7, 3, Execution::default()).is_err());
    }

    #[test]
    fn martingale_with_constant_h_is_exact() {
        let h = GridFunction::constant(64, 1.0).unwrap();
        let stats = martingale_check(&w("1-x"), &h, 0.3, &[1, 10, 100], 500, 1, Execution::default()).unwrap();
        for s in stats {
            assert_eq!(s.mean, 1.0);
            assert_eq!(s.stderr, 0.0);
        }
    }

    #[test]
    fn boundary_fixing_probabilities() {
        // from 0 the chain stays at 0 exactly when the homothety family is picked
        let weight = w("poly:0.3,0.4");
        let kernel = PlaceDependentKernel::diaconis_friedman(weight.clone());
        let n = 100_000;
        let (s, _) = accumulate_paths(&kernel, 0.0, 1, n, 8, Execution::default(), |z| f64::from(u8::from(z == 0.0))).unwrap();
        let frac = s[1] / n as f64;
        let sigma = (0.3f64 * 0.7 / n as f64).sqrt();
        assert!((frac - 0.3).abs() < 4.0 * sigma, "{frac}");
        let (s, _) = accumulate_paths(&kernel, 1.0, 1, n, 9, Execution::default(), |z| f64::from(u8::from(z == 1.0))).unwrap();
        let frac = s[1] / n as f64;
        assert!((frac - 0.3).abs() < 4.0 * sigma, "{frac}");
    }
}
