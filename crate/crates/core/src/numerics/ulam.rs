//! Ulam discretization of the Diaconis–Friedman kernel.
//!
//! `[0, 1]` is cut into `n` equal cells. Row `i` is the exact one-step law from
//! the midpoint `x_i` of cell `i`, integrated over each target cell.

use crate::error::{invalid, Result};
use crate::par::{self, Execution};
use crate::weight::WeightFunction;

pub const MIN_CELLS: usize = 8;

/// Dense row-stochastic matrix, row-major, with its transpose kept alongside
/// for left multiplication.
#[derive(Debug, Clone, PartialEq)]
pub struct UlamMatrix {
    n: usize,
    rows: Vec<f64>,
    cols: Vec<f64>,
}

impl UlamMatrix {
    /// Checks that `rows` (row-major, `n × n`) is row-stochastic.
    pub fn from_rows(n: usize, rows: Vec<f64>) -> Result<Self> {
        if rows.len() != n * n {
            return Err(invalid("rows", format!("expected {} entries, got {}", n * n, rows.len())));
        }
        if rows.iter().any(|&v| !(v >= 0.0)) {
            return Err(invalid("rows", "negative or NaN entry"));
        }
        for (i, row) in rows.chunks(n).enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(invalid("rows", format!("row {i} sums to {s}")));
            }
        }
        let mut cols = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                cols[j * n + i] = rows[i * n + j];
            }
        }
        Ok(Self { n, rows, cols })
    }

    pub fn n_cells(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.n..(i + 1) * self.n]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.rows.chunks(self.n).map(|r| r.iter().sum()).collect()
    }

    /// Nonzero entries as `(i, j, prob)` in row-major order.
    pub fn nonzero(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(k, &v)| (k / self.n, k % self.n, v))
    }

    /// `out = v M` (distributions evolve on the left).
    pub fn left_mul(&self, v: &[f64], out: &mut [f64], exec: Execution) {
        let n = self.n;
        par::fill_indexed(exec, out, |j| dot(&self.cols[j * n..(j + 1) * n], v));
    }

    /// `out = M φ` (test functions evolve on the right).
    pub fn right_mul(&self, phi: &[f64], out: &mut [f64], exec: Execution) {
        let n = self.n;
        par::fill_indexed(exec, out, |i| dot(&self.rows[i * n..(i + 1) * n], phi));
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Ulam matrix of the weight on `n_cells` cells, rows built in parallel.
pub fn build_ulam(weight: &WeightFunction, n_cells: usize) -> Result<UlamMatrix> {
    build_ulam_with(weight, n_cells, Execution::default())
}

pub fn build_ulam_with(weight: &WeightFunction, n_cells: usize, exec: Execution) -> Result<UlamMatrix> {
    if n_cells < MIN_CELLS {
        return Err(invalid("n_cells", format!("{n_cells} < {MIN_CELLS}")));
    }
    let n = n_cells;
    let nf = n as f64;
    let mut rows = vec![0.0; n * n];
    par::for_each_row(exec, &mut rows, n, |i, row| {
        let x = (i as f64 + 0.5) / nf;
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = cell_mass(weight, x, j as f64 / nf, (j + 1) as f64 / nf);
        }
    });
    UlamMatrix::from_rows(n, rows)
}

/// Probability that one step from interior `x` lands in `[a, b]`.
pub fn cell_mass(weight: &WeightFunction, x: f64, a: f64, b: f64) -> f64 {
    let below = (b.min(x) - a).max(0.0);
    let above = (b - a.max(x)).max(0.0);
    weight.p(x) * below / x + weight.q(x) * above / (1.0 - x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_sum_to_one() {
        for spec in ["const:0.5", "x", "1-x", "poly:0.1,0.8", "poly:1,0,-1"] {
            let w = WeightFunction::parse(spec).unwrap();
            let m = build_ulam(&w, 37).unwrap();
            assert!(m.row_sums().iter().all(|s| (s - 1.0).abs() < 1e-12), "{spec}");
        }
    }

    #[test]
    fn two_cell_hand_value() {
        let w = WeightFunction::constant(0.5).unwrap();
        // two cells, from the midpoint 1/4 of the left one
        assert!((cell_mass(&w, 0.25, 0.0, 0.5) - 2.0 / 3.0).abs() < 1e-15);
        let m = build_ulam(&w, 8).unwrap();
        // from x = 1/16: p·1 into cell 0 plus q·(1/16)/(15/16)
        let expected = 0.5 + 0.5 * (1.0 / 16.0) / (15.0 / 16.0);
        assert!((m.get(0, 0) - expected).abs() < 1e-15);
    }

    #[test]
    fn rejects_small_and_bad_input() {
        let w = WeightFunction::identity();
        assert!(build_ulam(&w, 4).is_err());
        assert!(UlamMatrix::from_rows(2, vec![0.5, 0.5, 0.7, 0.7]).is_err());
        assert!(UlamMatrix::from_rows(2, vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn identity_weight_rows_are_uniform() {
        let m = build_ulam(&WeightFunction::identity(), 64).unwrap();
        assert!(m.row(17).iter().all(|v| (v - 1.0 / 64.0).abs() < 1e-12));
    }

    #[test]
    fn products_match_definition() {
        let w = WeightFunction::parse("poly:0.2,0.5").unwrap();
        let m = build_ulam_with(&w, 12, Execution::Sequential).unwrap();
        let v: Vec<f64> = (0..12).map(|k| k as f64).collect();
        let mut out = vec![0.0; 12];
        m.left_mul(&v, &mut out, Execution::Parallel);
        let j = 5;
        let direct: f64 = (0..12).map(|i| v[i] * m.get(i, j)).sum();
        assert!((out[j] - direct).abs() < 1e-12);
        m.right_mul(&v, &mut out, Execution::Parallel);
        assert!((out[3] - dot(m.row(3), &v)).abs() < 1e-15);
        assert_eq!(m.nonzero().count(), 144);
    }
}
