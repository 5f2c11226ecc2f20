//! Weight functions `p: [0, 1] -> [0, 1]`.
//!
//! The text form is shared by the CLI and config files:
//!
//! | spec            | weight                              |
//! |-----------------|-------------------------------------|
//! | `const:<c>`     | `p(x) = c`                          |
//! | `x`             | `p(x) = x`                          |
//! | `1-x`           | `p(x) = 1 - x`                      |
//! | `poly:c0,c1,..` | `p(x) = c0 + c1 x + c2 x^2 + ...`   |
//! | `pwl:<file>`    | linear interpolation of a `x,p` CSV |

use std::fmt;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Number of points of the construction-time range check.
const RANGE_CHECK_POINTS: usize = 10_001;
const RANGE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum WeightRepr {
    Constant(f64),
    Identity,
    OneMinusX,
    /// Coefficients in increasing degree.
    Polynomial(Vec<f64>),
    /// Sorted `(x, p)` knots; `x` covers 0 and 1.
    PiecewiseLinear { knots: Vec<(f64, f64)>, source: Option<PathBuf> },
}

/// The probability `p(x)` of choosing the homothety family at `x`.
///
/// `q(x) = 1 - p(x)` is always derived, never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFunction {
    repr: WeightRepr,
    alpha: f64,
}

impl WeightFunction {
    pub fn new(repr: WeightRepr) -> Result<Self> {
        if let WeightRepr::PiecewiseLinear { knots, .. } = &repr {
            validate_knots(knots)?;
        }
        let w = Self { repr, alpha: 1.0 };
        w.check_range()?;
        Ok(w)
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(WeightRepr::Constant(c))
    }

    pub fn identity() -> Self {
        Self {
            repr: WeightRepr::Identity,
            alpha: 1.0,
        }
    }

    pub fn one_minus_x() -> Self {
        Self {
            repr: WeightRepr::OneMinusX,
            alpha: 1.0,
        }
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidWeight {
                spec: "poly:".into(),
                reason: "no coefficients".into(),
            });
        }
        Self::new(WeightRepr::Polynomial(coeffs))
    }

    pub fn piecewise_linear(knots: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(WeightRepr::PiecewiseLinear {
            knots,
            source: None,
        })
    }

    /// Declares the Hölder exponent of `p`. The built-in representations are
    /// Lipschitz, so the default is 1.
    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(crate::error::invalid("alpha", format!("{alpha} not in (0, 1]")));
        }
        self.alpha = alpha;
        Ok(self)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn repr(&self) -> &WeightRepr {
        &self.repr
    }

    /// Parses the text form described in the module docs.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let bad = |reason: &str| Error::InvalidWeight {
            spec: spec.to_string(),
            reason: reason.to_string(),
        };
        match spec {
            "x" => return Ok(Self::identity()),
            "1-x" => return Ok(Self::one_minus_x()),
            _ => {}
        }
        let (kind, rest) = spec
            .split_once(':')
            .ok_or_else(|| bad("expected const:<c>, x, 1-x, poly:<c0>,.. or pwl:<file>"))?;
        match kind {
            "const" => {
                let c: f64 = rest.trim().parse().map_err(|_| bad("constant is not a number"))?;
                Self::constant(c)
            }
            "poly" => {
                let coeffs = rest
                    .split(',')
                    .map(|c| c.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| bad("coefficient is not a number"))?;
                Self::polynomial(coeffs)
            }
            "pwl" => Self::from_csv(Path::new(rest.trim())),
            _ => Err(bad("unknown weight kind")),
        }
    }

    /// Reads a piecewise-linear weight from a CSV with columns `x,p`.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let table_err = |reason: String| Error::WeightTable {
            path: path.to_path_buf(),
            reason,
        };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| table_err(e.to_string()))?;
        let mut knots = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| table_err(e.to_string()))?;
            if record.len() != 2 {
                return Err(table_err(format!("row {} has {} columns", line + 1, record.len())));
            }
            let x = record[0].parse::<f64>();
            let p = record[1].parse::<f64>();
            match (x, p) {
                (Ok(x), Ok(p)) => knots.push((x, p)),
                // header row
                _ if line == 0 => continue,
                _ => return Err(table_err(format!("row {} is not numeric", line + 1))),
            }
        }
        Self::new(WeightRepr::PiecewiseLinear {
            knots,
            source: Some(path.to_path_buf()),
        })
    }

    /// `p(x)`.
    pub fn p(&self, x: f64) -> f64 {
        match &self.repr {
            WeightRepr::Constant(c) => *c,
            WeightRepr::Identity => x,
            WeightRepr::OneMinusX => 1.0 - x,
            WeightRepr::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &a| acc * x + a),
            WeightRepr::PiecewiseLinear { knots, .. } => interpolate_knots(knots, x),
        }
    }

    /// `q(x) = 1 - p(x)`.
    pub fn q(&self, x: f64) -> f64 {
        1.0 - self.p(x)
    }

    fn check_range(&self) -> Result<()> {
        for i in 0..RANGE_CHECK_POINTS {
            let x = i as f64 / (RANGE_CHECK_POINTS - 1) as f64;
            let v = self.p(x);
            if !(v >= -RANGE_SLACK && v <= 1.0 + RANGE_SLACK) {
                return Err(Error::WeightOutOfRange { x, value: v });
            }
        }
        Ok(())
    }
}

impl fmt::Display for WeightFunction {
    /// Writes the parseable text form.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            WeightRepr::Constant(c) => write!(f, "const:{c}"),
            WeightRepr::Identity => f.write_str("x"),
            WeightRepr::OneMinusX => f.write_str("1-x"),
            WeightRepr::Polynomial(c) => {
                let parts: Vec<String> = c.iter().map(|v| v.to_string()).collect();
                write!(f, "poly:{}", parts.join(","))
            }
            WeightRepr::PiecewiseLinear { source: Some(p), .. } => write!(f, "pwl:{}", p.display()),
            WeightRepr::PiecewiseLinear { knots, .. } => write!(f, "pwl:<{} knots>", knots.len()),
        }
    }
}

fn validate_knots(knots: &[(f64, f64)]) -> Result<()> {
    let bad = |reason: &str| Error::InvalidWeight {
        spec: "pwl".into(),
        reason: reason.to_string(),
    };
    if knots.len() < 2 {
        return Err(bad("need at least two knots"));
    }
    if knots.iter().any(|(x, p)| !x.is_finite() || !p.is_finite()) {
        return Err(bad("non-finite knot"));
    }
    if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(bad("knots must be strictly increasing in x"));
    }
    if knots[0].0 != 0.0 || knots[knots.len() - 1].0 != 1.0 {
        return Err(bad("knots must start at x = 0 and end at x = 1"));
    }
    Ok(())
}

fn interpolate_knots(knots: &[(f64, f64)], x: f64) -> f64 {
    let k = knots.partition_point(|&(kx, _)| kx <= x);
    if k == 0 {
        return knots[0].1;
    }
    if k == knots.len() {
        return knots[k - 1].1;
    }
    let (x0, p0) = knots[k - 1];
    let (x1, p1) = knots[k];
    p0 + (p1 - p0) * (x - x0) / (x1 - x0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn parses_every_builtin_form() {
        assert_eq!(WeightFunction::parse("const:0.5").unwrap().p(0.3), 0.5);
        assert_eq!(WeightFunction::parse("x").unwrap().p(0.3), 0.3);
        assert_eq!(WeightFunction::parse("1-x").unwrap().p(0.25), 0.75);
        let w = WeightFunction::parse("poly:1,0,-1").unwrap();
        assert_eq!(w.p(0.5), 0.75);
        assert_eq!(w.q(1.0), 1.0);
    }

    #[test]
    fn rejects_out_of_range_and_garbage() {
        assert!(matches!(
            WeightFunction::parse("const:1.5"),
            Err(Error::WeightOutOfRange { .. })
        ));
        assert!(matches!(
            WeightFunction::parse("poly:0,2"),
            Err(Error::WeightOutOfRange { .. })
        ));
        assert!(WeightFunction::parse("sin").is_err());
        assert!(WeightFunction::parse("const:abc").is_err());
        assert!(WeightFunction::parse("poly:").is_err());
    }

    #[test]
    fn display_round_trips() {
        for spec in ["const:0.25", "x", "1-x", "poly:1,0,-1"] {
            let w = WeightFunction::parse(spec).unwrap();
            assert_eq!(w.to_string(), spec);
            assert_eq!(WeightFunction::parse(&w.to_string()).unwrap(), w);
        }
    }

    #[test]
    fn piecewise_linear_from_csv() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "x,p\n0,0.2\n0.5,0.8\n1,0.4").unwrap();
        let spec = format!("pwl:{}", file.path().display());
        let w = WeightFunction::parse(&spec).unwrap();
        assert!((w.p(0.25) - 0.5).abs() < 1e-15);
        assert!((w.p(0.75) - 0.6).abs() < 1e-15);
        assert_eq!(w.p(1.0), 0.4);
        assert_eq!(w.to_string(), spec);
    }

    #[test]
    fn piecewise_linear_must_cover_unit_interval() {
        assert!(WeightFunction::piecewise_linear(vec![(0.1, 0.5), (1.0, 0.5)]).is_err());
        assert!(WeightFunction::piecewise_linear(vec![(0.0, 0.5), (0.5, 0.5), (0.5, 0.2), (1.0, 0.5)]).is_err());
        assert!(WeightFunction::piecewise_linear(vec![(0.0, 0.5), (1.0, 1.2)]).is_err());
    }

    #[test]
    fn alpha_is_validated() {
        assert!(WeightFunction::identity().with_alpha(0.0).is_err());
        assert!(WeightFunction::identity().with_alpha(1.5).is_err());
        assert_eq!(WeightFunction::identity().with_alpha(0.5).unwrap().alpha(), 0.5);
    }
}
