//! Gauss–Legendre rules, adaptive integration, and substitutions that remove
//! integrable power-law endpoint singularities.

use std::f64::consts::PI;

/// Gauss–Legendre rule mapped to `[0, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// `n`-point rule; exact for polynomials of degree `2n - 1`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, refined by Newton on P_n
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
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
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            // map [-1, 1] -> [0, 1]
            nodes[i] = 0.5 * (1.0 - z);
            nodes[n - 1 - i] = 0.5 * (1.0 + z);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights on `[0, 1]`.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// `∫_a^b f`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let h = b - a;
        self.iter().map(|(t, w)| w * f(a + h * t)).sum::<f64>() * h
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Globally adaptive bisection comparing a 10-point and a 21-point
/// Gauss–Legendre estimate on every panel.
#[derive(Debug, Clone)]
pub struct Adaptive {
    coarse: GaussLegendre,
    fine: GaussLegendre,
    abs_tol: f64,
    rel_tol: f64,
    max_depth: u32,
}

impl Default for Adaptive {
    fn default() -> Self {
        Self::new(1e-14, 1e-13)
    }
}

impl Adaptive {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            coarse: GaussLegendre::new(10),
            fine: GaussLegendre::new(21),
            abs_tol,
            rel_tol,
            max_depth: 40,
        }
    }

    /// `∫_a^b f`, with orientation (`a > b` flips the sign).
    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        if a == b {
            return 0.0;
        }
        if a > b {
            return -self.integrate(b, a, f);
        }
        let whole = self.fine.integrate(a, b, &f);
        let tol = self.abs_tol.max(self.rel_tol * whole.abs());
        self.panel(a, b, &f, whole, tol, 0)
    }

    fn panel<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: &F, fine: f64, tol: f64, depth: u32) -> f64 {
        let coarse = self.coarse.integrate(a, b, f);
        if (fine - coarse).abs() <= tol || depth >= self.max_depth || b - a < 1e-15 {
            return fine;
        }
        let m = 0.5 * (a + b);
        let left = self.fine.integrate(a, m, f);
        let right = self.fine.integrate(m, b, f);
        self.panel(a, m, f, left, 0.5 * tol, depth + 1) + self.panel(m, b, f, right, 0.5 * tol, depth + 1)
    }

    /// `∫_0^c x^a g(x) dx` for `a > -1` via `x = c s^{1/(a+1)}`, which turns
    /// the integrand into `c^{a+1}/(a+1) · g(x(s))` on `s ∈ [0, 1]`.
    pub fn integrate_left_power<F: Fn(f64) -> f64>(&self, exponent: f64, c: f64, g: F) -> f64 {
        debug_assert!(exponent > -1.0);
        if c <= 0.0 {
            return 0.0;
        }
        let k = exponent + 1.0;
        let scale = c.powf(k) / k;
        scale * self.integrate(0.0, 1.0, |s| g(c * s.powf(1.0 / k)))
    }

    /// `∫_{1-c}^1 (1-x)^b g(x) dx` for `b > -1`, mirror of
    /// [`Adaptive::integrate_left_power`].
    pub fn integrate_right_power<F: Fn(f64) -> f64>(&self, exponent: f64, c: f64, g: F) -> f64 {
        self.integrate_left_power(exponent, c, |d| g(1.0 - d))
    }
}
