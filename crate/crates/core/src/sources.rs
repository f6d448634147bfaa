//! Scalar source distributions and their information summaries.
//!
//! Entropies are in nats throughout. The three analytic families carry
//! closed forms; tabulated densities are piecewise linear on a uniform grid
//! and use trapezoidal integrals.

use std::f64::consts::{E, PI};
use std::fmt;
use std::io::Read;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize, Serializer};

/// `2πe`, the normalizer of the entropy power.
pub const TWO_PI_E: f64 = 2.0 * PI * E;

/// Entropy power `exp(2h) / (2πe)` of a differential entropy `h` in nats.
pub fn entropy_power(h: f64) -> f64 {
    (2.0 * h).exp() / TWO_PI_E
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SourceError {
    #[error("variance must be positive and finite, got {0}")]
    NonPositiveVariance(f64),
    #[error("unknown source kind `{0}` (expected gaussian, laplace, uniform or tabulated)")]
    UnknownKind(String),
    #[error("tabulated sources are built from a table, not from a variance")]
    TableRequired,
    #[error("invalid density table: {0}")]
    InvalidTable(String),
    #[error("declared variance {declared} does not match the table's variance {computed}")]
    VarianceMismatch { declared: f64, computed: f64 },
    #[error("differential entropy of the tabulated density diverged")]
    EntropyDiverged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Gaussian,
    Laplace,
    Uniform,
    Tabulated,
}

impl SourceKind {
    pub const BUILT_IN: [SourceKind; 3] =
        [SourceKind::Gaussian, SourceKind::Laplace, SourceKind::Uniform];

    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::Gaussian => "gaussian",
            SourceKind::Laplace => "laplace",
            SourceKind::Uniform => "uniform",
            SourceKind::Tabulated => "tabulated",
        }
    }
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceKind {
    type Err = SourceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(SourceKind::Gaussian),
            "laplace" | "laplacian" => Ok(SourceKind::Laplace),
            "uniform" => Ok(SourceKind::Uniform),
            "tabulated" | "table" => Ok(SourceKind::Tabulated),
            other => Err(SourceError::UnknownKind(other.to_string())),
        }
    }
}

/// Fisher information of a density; `Infinite` for densities with jumps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fisher {
    Finite(f64),
    Infinite,
}

impl Fisher {
    pub fn finite(self) -> Option<f64> {
        match self {
            Fisher::Finite(j) => Some(j),
            Fisher::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Fisher::Infinite)
    }
}

impl Serialize for Fisher {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Fisher::Finite(j) => serializer.serialize_f64(*j),
            Fisher::Infinite => serializer.serialize_str("inf"),
        }
    }
}

/// Differential entropy, entropy power, Fisher information and variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InfoSummary {
    pub h: f64,
    #[serde(rename = "N")]
    pub entropy_power: f64,
    #[serde(rename = "J")]
    pub fisher: Fisher,
    /// Set when `fisher` comes from finite differences on a table.
    #[serde(rename = "J_approximate")]
    pub fisher_approximate: bool,
    pub sigma2: f64,
}

/// A density sampled on a uniform grid, linearly interpolated between nodes
/// and zero outside `[x0, x_last]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedDensity {
    x0: f64,
    dx: f64,
    pdf: Vec<f64>,
    /// Cumulative probability at each node.
    cdf: Vec<f64>,
    mean: f64,
    variance: f64,
}

impl TabulatedDensity {
    /// Validates and renormalizes `(x, pdf)` points.
    pub fn new(points: &[(f64, f64)]) -> Result<Self, SourceError> {
        let bad = |m: &str| Err(SourceError::InvalidTable(m.to_string()));
        if points.len() < 3 {
            return bad("need at least three grid points");
        }
        let x0 = points[0].0;
        let n = points.len();
        let dx = (points[n - 1].0 - x0) / (n - 1) as f64;
        if !(dx > 0.0) || !dx.is_finite() {
            return bad("x must be strictly increasing");
        }
        for (i, w) in points.windows(2).enumerate() {
            let step = w[1].0 - w[0].0;
            if !(step > 0.0) {
                return bad("x must be strictly increasing");
            }
            if (step - dx).abs() > 1e-6 * dx {
                return Err(SourceError::InvalidTable(format!(
                    "x grid is not uniform near row {}",
                    i + 1
                )));
            }
        }
        let mut pdf: Vec<f64> = Vec::with_capacity(n);
        for &(_, p) in points {
            if !p.is_finite() || p < 0.0 {
                return bad("pdf values must be finite and non-negative");
            }
            pdf.push(p);
        }
        let mass = trapezoid(&pdf, dx);
        if !(mass > 0.0) {
            return bad("density has zero mass");
        }
        for p in &mut pdf {
            *p /= mass;
        }
        let mut cdf = vec![0.0; n];
        for i in 1..n {
            cdf[i] = cdf[i - 1] + 0.5 * dx * (pdf[i - 1] + pdf[i]);
        }
        let total = cdf[n - 1];
        if (total - 1.0).abs() > 1e-8 {
            return bad("density failed to normalize");
        }

        // Simpson is exact for the (at most cubic) cell integrands below.
        let cell_moment = |i: usize, f: &dyn Fn(f64) -> f64| {
            let (a, b) = (x0 + i as f64 * dx, x0 + (i + 1) as f64 * dx);
            let pm = 0.5 * (pdf[i] + pdf[i + 1]);
            dx / 6.0 * (pdf[i] * f(a) + 4.0 * pm * f(0.5 * (a + b)) + pdf[i + 1] * f(b))
        };
        let mean: f64 = (0..n - 1).map(|i| cell_moment(i, &|x| x)).sum();
        let variance: f64 = (0..n - 1)
            .map(|i| cell_moment(i, &|x| (x - mean) * (x - mean)))
            .sum();
        if !(variance > 0.0) || !variance.is_finite() {
            return bad("density has zero-measure support");
        }
        Ok(Self {
            x0,
            dx,
            pdf,
            cdf,
            mean,
            variance,
        })
    }

    /// Parses a two-column `x,pdf` CSV; a header row is optional.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, SourceError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut points = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| SourceError::InvalidTable(e.to_string()))?;
            if rec.len() != 2 {
                return Err(SourceError::InvalidTable(format!(
                    "row {} has {} columns, expected 2",
                    row + 1,
                    rec.len()
                )));
            }
            let parsed = (rec[0].parse::<f64>(), rec[1].parse::<f64>());
            match parsed {
                (Ok(x), Ok(p)) => points.push((x, p)),
                _ if row == 0 => continue,
                _ => {
                    return Err(SourceError::InvalidTable(format!(
                        "row {} is not numeric",
                        row + 1
                    )))
                }
            }
        }
        Self::new(&points)
    }

    pub fn len(&self) -> usize {
        self.pdf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pdf.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.dx
    }

    pub fn support(&self) -> (f64, f64) {
        (self.x0, self.x_at(self.pdf.len() - 1))
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    fn x_at(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let t = (x - self.x0) / self.dx;
        let last = self.pdf.len() - 1;
        if !(t >= 0.0) || t > last as f64 {
            return 0.0;
        }
        let i = (t.floor() as usize).min(last - 1);
        let frac = t - i as f64;
        self.pdf[i] + frac * (self.pdf[i + 1] - self.pdf[i])
    }

    fn entropy(&self) -> f64 {
        let integrand: Vec<f64> = self
            .pdf
            .iter()
            .map(|&p| if p > 0.0 { -p * p.ln() } else { 0.0 })
            .collect();
        trapezoid(&integrand, self.dx)
    }

    fn fisher(&self) -> Fisher {
        let n = self.pdf.len();
        let peak = self.pdf.iter().cloned().fold(0.0, f64::max);
        if self.pdf[0] > 1e-6 * peak || self.pdf[n - 1] > 1e-6 * peak {
            return Fisher::Infinite;
        }
        let mut acc = 0.0;
        for i in 1..n - 1 {
            let (l, c, r) = (self.pdf[i - 1], self.pdf[i], self.pdf[i + 1]);
            if c == 0.0 {
                if l > 0.0 || r > 0.0 {
                    return Fisher::Infinite;
                }
                continue;
            }
            if l == 0.0 || r == 0.0 {
                return Fisher::Infinite;
            }
            let score = (r.ln() - l.ln()) / (2.0 * self.dx);
            acc += c * score * score * self.dx;
        }
        Fisher::Finite(acc)
    }

    /// Inverse-CDF draw from the piecewise-linear density.
    fn quantile(&self, u: f64) -> f64 {
        let i = match self.cdf.partition_point(|&c| c <= u) {
            0 => 0,
            k => (k - 1).min(self.pdf.len() - 2),
        };
        let (p0, p1) = (self.pdf[i], self.pdf[i + 1]);
        let target = u - self.cdf[i];
        if target <= 0.0 {
            return self.x_at(i);
        }
        // Solve p0 t + (p1 - p0) t^2 / (2 dx) = target for t in [0, dx].
        let slope = (p1 - p0) / self.dx;
        let t = if slope.abs() < 1e-300 {
            if p0 > 0.0 {
                target / p0
            } else {
                0.0
            }
        } else {
            let disc = (p0 * p0 + 2.0 * slope * target).max(0.0);
            2.0 * target / (p0 + disc.sqrt())
        };
        self.x_at(i) + t.clamp(0.0, self.dx)
    }
}

fn trapezoid(values: &[f64], dx: f64) -> f64 {
    let n = values.len();
    let inner: f64 = values[1..n - 1].iter().sum();
    dx * (inner + 0.5 * (values[0] + values[n - 1]))
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Gaussian { sigma: f64 },
    Laplace { b: f64 },
    Uniform { half_width: f64 },
    Tabulated(Arc<TabulatedDensity>),
}

/// An immutable scalar source distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceModel {
    shape: Shape,
    mean: f64,
    variance: f64,
}

/// Builds a centered built-in source with exactly the requested variance.
pub fn make_source(kind: SourceKind, variance: f64) -> Result<SourceModel, SourceError> {
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(SourceError::NonPositiveVariance(variance));
    }
    let shape = match kind {
        SourceKind::Gaussian => Shape::Gaussian {
            sigma: variance.sqrt(),
        },
        SourceKind::Laplace => Shape::Laplace {
            b: (variance / 2.0).sqrt(),
        },
        SourceKind::Uniform => Shape::Uniform {
            half_width: (3.0 * variance).sqrt(),
        },
        SourceKind::Tabulated => return Err(SourceError::TableRequired),
    };
    Ok(SourceModel {
        shape,
        mean: 0.0,
        variance,
    })
}

/// Closed-form summary for the analytic families, trapezoidal for tables.
pub fn info_summary(source: &SourceModel) -> Result<InfoSummary, SourceError> {
    let sigma2 = source.variance;
    let (h, fisher, approx) = match &source.shape {
        Shape::Gaussian { .. } => (0.5 * (TWO_PI_E * sigma2).ln(), Fisher::Finite(1.0 / sigma2), false),
        Shape::Laplace { b } => (1.0 + (2.0 * b).ln(), Fisher::Finite(2.0 / sigma2), false),
        Shape::Uniform { half_width } => ((2.0 * half_width).ln(), Fisher::Infinite, false),
        Shape::Tabulated(t) => {
            let h = t.entropy();
            if !h.is_finite() {
                return Err(SourceError::EntropyDiverged);
            }
            (h, t.fisher(), true)
        }
    };
    Ok(InfoSummary {
        h,
        entropy_power: entropy_power(h),
        fisher,
        fisher_approximate: approx,
        sigma2,
    })
}

impl SourceModel {
    /// A source backed by a density table. When `declared_variance` is given
    /// it must match the table's own variance to 1e-6 relative.
    pub fn tabulated(
        table: TabulatedDensity,
        declared_variance: Option<f64>,
    ) -> Result<Self, SourceError> {
        let computed = table.variance();
        if let Some(declared) = declared_variance {
            if !(declared > 0.0) || !declared.is_finite() {
                return Err(SourceError::NonPositiveVariance(declared));
            }
            if ((declared - computed) / declared).abs() > 1e-6 {
                return Err(SourceError::VarianceMismatch { declared, computed });
            }
        }
        Ok(Self {
            mean: table.mean(),
            variance: computed,
            shape: Shape::Tabulated(Arc::new(table)),
        })
    }

    pub fn kind(&self) -> SourceKind {
        match self.shape {
            Shape::Gaussian { .. } => SourceKind::Gaussian,
            Shape::Laplace { .. } => SourceKind::Laplace,
            Shape::Uniform { .. } => SourceKind::Uniform,
            Shape::Tabulated(_) => SourceKind::Tabulated,
        }
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.shape, Shape::Gaussian { .. })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::Tabulated(t) => t.pdf(x),
            _ => self.ln_pdf(x).exp(),
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let u = x - self.mean;
        match &self.shape {
            Shape::Gaussian { sigma } => {
                -0.5 * (u / sigma) * (u / sigma) - (sigma * (2.0 * PI).sqrt()).ln()
            }
            Shape::Laplace { b } => -u.abs() / b - (2.0 * b).ln(),
            Shape::Uniform { half_width } => {
                if u.abs() <= *half_width {
                    -(2.0 * half_width).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Shape::Tabulated(t) => t.pdf(x).ln(),
        }
    }

    /// Length scale on which the density varies smoothly away from its
    /// breakpoints; infinite for piecewise-constant/linear shapes.
    pub(crate) fn smooth_scale(&self) -> f64 {
        match &self.shape {
            Shape::Gaussian { sigma } => *sigma,
            Shape::Laplace { b } => *b,
            Shape::Uniform { .. } | Shape::Tabulated(_) => f64::INFINITY,
        }
    }

    /// Points where the density is not smooth (kinks or jumps), at the
    /// resolution relevant to the smoothed output density.
    pub(crate) fn kinks(&self) -> Vec<f64> {
        match &self.shape {
            Shape::Gaussian { .. } => Vec::new(),
            Shape::Laplace { .. } => vec![self.mean],
            Shape::Uniform { half_width } => {
                vec![self.mean - half_width, self.mean + half_width]
            }
            Shape::Tabulated(t) => {
                let (a, b) = t.support();
                vec![a, b]
            }
        }
    }

    /// Interval holding all but a negligible (< 1e-17) share of the mass.
    pub(crate) fn effective_support(&self) -> (f64, f64) {
        let r = match &self.shape {
            Shape::Gaussian { sigma } => 9.0 * sigma,
            Shape::Laplace { b } => 40.0 * b,
            Shape::Uniform { half_width } => *half_width,
            Shape::Tabulated(t) => return t.support(),
        };
        (self.mean - r, self.mean + r)
    }

    /// Hard bounds for the convolution integral at truncation width `k`;
    /// beyond them the density is negligible against the Gaussian kernel.
    pub(crate) fn clip_support(&self, k: f64) -> (f64, f64) {
        let r = match &self.shape {
            Shape::Gaussian { sigma } => (k + 30.0) * sigma,
            Shape::Laplace { b } => (5.0 * k).max(60.0) * b,
            Shape::Uniform { half_width } => *half_width,
            Shape::Tabulated(t) => return t.support(),
        };
        (self.mean - r, self.mean + r)
    }

    /// Appends the interior points of `(lo, hi)` at which the density's
    /// derivative jumps, in increasing order.
    pub(crate) fn breakpoints_within(&self, lo: f64, hi: f64, out: &mut Vec<f64>) {
        match &self.shape {
            Shape::Tabulated(t) => {
                let first = ((lo - t.x0) / t.dx).floor() as i64 + 1;
                let last = ((hi - t.x0) / t.dx).ceil() as i64 - 1;
                let first = first.max(0);
                let last = last.min(t.len() as i64 - 1);
                for i in first..=last {
                    let x = t.x_at(i as usize);
                    if x > lo && x < hi {
                        out.push(x);
                    }
                }
            }
            _ => {
                for x in self.kinks() {
                    if x > lo && x < hi {
                        out.push(x);
                    }
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.shape {
            Shape::Gaussian { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                self.mean + sigma * z
            }
            Shape::Laplace { b } => {
                let u: f64 = rng.random::<f64>() - 0.5;
                self.mean - b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            Shape::Uniform { half_width } => {
                self.mean + half_width * (2.0 * rng.random::<f64>() - 1.0)
            }
            Shape::Tabulated(t) => t.quantile(rng.random::<f64>()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn built_in_densities_at_origin() {
        let g = make_source(SourceKind::Gaussian, 1.0).unwrap();
        assert!(close(g.pdf(0.0), 0.398_942_280_401_432_7, 1e-15));
        let l = make_source(SourceKind::Laplace, 1.0).unwrap();
        assert!(close(l.pdf(0.0), 1.0 / 2f64.sqrt(), 1e-15));
        let u = make_source(SourceKind::Uniform, 1.0).unwrap();
        assert!(close(u.pdf(0.0), 1.0 / (2.0 * 3f64.sqrt()), 1e-15));
        assert_eq!(u.pdf(1.8), 0.0);
    }

    #[test]
    fn make_source_rejects_bad_input() {
        assert_eq!(
            make_source(SourceKind::Gaussian, 0.0),
            Err(SourceError::NonPositiveVariance(0.0))
        );
        assert!(make_source(SourceKind::Laplace, f64::NAN).is_err());
        assert_eq!(
            make_source(SourceKind::Tabulated, 1.0),
            Err(SourceError::TableRequired)
        );
        assert!(matches!(
            "cauchy".parse::<SourceKind>(),
            Err(SourceError::UnknownKind(_))
        ));
    }

    #[test]
    fn closed_form_summaries() {
        let g = info_summary(&make_source(SourceKind::Gaussian, 1.0).unwrap()).unwrap();
        assert!(close(g.h, 1.418_938_533_204_672_7, 1e-14));
        assert!(close(g.entropy_power, 1.0, 1e-14));
        assert_eq!(g.fisher, Fisher::Finite(1.0));

        let l = info_summary(&make_source(SourceKind::Laplace, 1.0).unwrap()).unwrap();
        assert!(close(l.h, 1.0 + 2f64.sqrt().ln(), 1e-14));
        assert!(close(l.h, 1.346_57, 1e-5));
        assert!(close(l.entropy_power, 0.865_26, 1e-5));
        assert!(close(l.fisher.finite().unwrap(), 2.0, 1e-14));

        let u = info_summary(&make_source(SourceKind::Uniform, 1.0).unwrap()).unwrap();
        assert!(close(u.h, (2.0 * 3f64.sqrt()).ln(), 1e-14));
        assert!(close(u.entropy_power, 12.0 / TWO_PI_E, 1e-14));
        assert!(close(u.entropy_power, 0.702_598, 1e-6));
        assert!(u.fisher.is_infinite());
    }

    #[test]
    fn fisher_serializes_infinity_as_string() {
        let u = info_summary(&make_source(SourceKind::Uniform, 1.0).unwrap()).unwrap();
        let v = serde_json::to_value(u).unwrap();
        assert_eq!(v["J"], "inf");
        let l = info_summary(&make_source(SourceKind::Laplace, 1.0).unwrap()).unwrap();
        assert_eq!(serde_json::to_value(l).unwrap()["J"], 2.0);
    }

    fn gaussian_table(step: f64, half_range: f64) -> Vec<(f64, f64)> {
        let n = (2.0 * half_range / step).round() as usize;
        (0..=n)
            .map(|i| {
                let x = -half_range + i as f64 * step;
                (x, (-0.5 * x * x).exp())
            })
            .collect()
    }

    #[test]
    fn tabulated_gaussian_matches_closed_form() {
        let t = TabulatedDensity::new(&gaussian_table(0.01, 10.0)).unwrap();
        assert!(close(t.variance(), 1.0, 1e-4));
        let src = SourceModel::tabulated(t, None).unwrap();
        let info = info_summary(&src).unwrap();
        assert!(close(info.h, 0.5 * TWO_PI_E.ln(), 1e-4), "h = {}", info.h);
        let j = info.fisher.finite().unwrap();
        assert!(close(j, 1.0, 1e-3), "J = {j}");
        assert!(info.fisher_approximate);
        assert!(close(src.pdf(0.0), 0.398_942, 1e-5));
    }

    #[test]
    fn tabulated_table_validation() {
        assert!(TabulatedDensity::new(&[(0.0, 1.0), (1.0, 1.0)]).is_err());
        assert!(TabulatedDensity::new(&[(0.0, 1.0), (1.0, 1.0), (1.5, 1.0)]).is_err());
        assert!(TabulatedDensity::new(&[(0.0, 1.0), (1.0, -1.0), (2.0, 1.0)]).is_err());
        assert!(TabulatedDensity::new(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]).is_err());
        assert!(TabulatedDensity::new(&[(0.0, 1.0), (0.0, 1.0), (2.0, 1.0)]).is_err());
    }

    #[test]
    fn tabulated_is_renormalized_and_variance_checked() {
        let pts: Vec<(f64, f64)> = gaussian_table(0.01, 10.0)
            .into_iter()
            .map(|(x, p)| (x, 7.0 * p))
            .collect();
        let t = TabulatedDensity::new(&pts).unwrap();
        let mass: f64 = trapezoid(&t.pdf, t.dx);
        assert!(close(mass, 1.0, 1e-12));
        assert!(matches!(
            SourceModel::tabulated(t.clone(), Some(2.0)),
            Err(SourceError::VarianceMismatch { .. })
        ));
        assert!(SourceModel::tabulated(t.clone(), Some(t.variance())).is_ok());
    }

    #[test]
    fn tabulated_csv_with_and_without_header() {
        let body = "x,pdf\n-1,0.0\n0,1.0\n1,0.0\n";
        let t = TabulatedDensity::from_csv(body.as_bytes()).unwrap();
        assert_eq!(t.len(), 3);
        assert!(close(t.variance(), 1.0 / 6.0, 1e-12));
        let t2 = TabulatedDensity::from_csv("-1,0\n0,1\n1,0\n".as_bytes()).unwrap();
        assert_eq!(t, t2);
        assert!(TabulatedDensity::from_csv("x,pdf\n0,1\nfoo,2\n".as_bytes()).is_err());
        assert!(TabulatedDensity::from_csv("0,1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn triangular_table_has_infinite_fisher() {
        let t = TabulatedDensity::from_csv("-1,0\n0,1\n1,0\n".as_bytes()).unwrap();
        let src = SourceModel::tabulated(t, None).unwrap();
        assert!(info_summary(&src).unwrap().fisher.is_infinite());
    }

    #[test]
    fn tabulated_quantile_inverts_cdf() {
        let t = TabulatedDensity::new(&[(0.0, 0.0), (1.0, 2.0), (2.0, 0.0)]).unwrap();
        assert!(close(t.quantile(0.5), 1.0, 1e-12));
        // CDF on [0, 1] is x^2 / 2.
        assert!(close(t.quantile(0.125), 0.5, 1e-12));
        assert!(close(t.quantile(0.0), 0.0, 1e-12));
    }

    #[test]
    fn sample_moments_match_variance() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for kind in SourceKind::BUILT_IN {
            let src = make_source(kind, 2.0).unwrap();
            let n = 200_000;
            let xs: Vec<f64> = (0..n).map(|_| src.sample(&mut rng)).collect();
            let m = xs.iter().sum::<f64>() / n as f64;
            let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64;
            assert!(m.abs() < 0.02, "{kind}: mean {m}");
            assert!((v - 2.0).abs() < 0.05, "{kind}: var {v}");
        }
    }

    proptest! {
        #[test]
        fn entropy_power_never_exceeds_variance(v in 1e-3f64..1e3) {
            for kind in SourceKind::BUILT_IN {
                let info = info_summary(&make_source(kind, v).unwrap()).unwrap();
                prop_assert!((info.entropy_power - (2.0 * info.h).exp() / TWO_PI_E).abs()
                    <= 1e-14 * info.entropy_power);
                if kind == SourceKind::Gaussian {
                    prop_assert!((info.entropy_power - v).abs() <= 1e-10 * v);
                } else {
                    prop_assert!(info.entropy_power < v);
                }
                if let Some(j) = info.fisher.finite() {
                    prop_assert!(j * info.entropy_power >= 1.0 - 1e-12);
                }
            }
        }

        #[test]
        fn entropy_shifts_by_half_log_of_scale(v in 1e-2f64..1e2, c in 1e-2f64..1e2) {
            for kind in SourceKind::BUILT_IN {
                let a = info_summary(&make_source(kind, v).unwrap()).unwrap();
                let b = info_summary(&make_source(kind, c * v).unwrap()).unwrap();
                prop_assert!((b.h - a.h - 0.5 * c.ln()).abs() < 1e-12);
            }
        }
    }
}
