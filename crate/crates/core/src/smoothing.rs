//! The additive-Gaussian observation `Y = X + W` with `W ~ N(0, s)`.
//!
//! Every per-`y` quantity comes out of one posterior kernel: the density of
//! `Y` and the first three posterior moments of `X`, accumulated in the log
//! domain. Score and curvature of `ln p_Y` follow from the moments
//! (`score = (E[X|y] - y) / s`, `curvature = Var(X|y) / s^2 - 1 / s`), which
//! is the same as differentiating the convolution under the integral sign.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use crate::quadrature::{integrate_adaptive, AdaptiveOptions, GaussLegendre};
use crate::sources::{entropy_power, SourceModel, TWO_PI_E};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SmoothingError {
    #[error("noise variance must be positive and finite, got {0}")]
    NonPositiveNoise(f64),
    #[error("quadrature for {what} did not converge (error/tolerance = {worst_ratio:.3e} after {intervals} intervals)")]
    QuadratureNotConverged {
        what: &'static str,
        worst_ratio: f64,
        intervals: usize,
    },
    #[error("output density underflows at y = {y} (ln p_Y = {ln_density})")]
    DensityUnderflow { y: f64, ln_density: f64 },
    #[error("conditional variance {value} at y = {y} is not positive")]
    NegativeConditionalVariance { y: f64, value: f64 },
    #[error("{what} is {value}, expected {expected}")]
    InvariantViolated {
        what: &'static str,
        value: f64,
        expected: f64,
    },
}

/// Numerical settings shared by the posterior kernel and the `y` integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    /// Truncation half-width in standard deviations.
    pub trunc_k: f64,
    /// Relative and absolute tolerance of the adaptive `y` integrals.
    pub tol: f64,
    /// Gauss-Legendre nodes per panel.
    pub nodes: usize,
    pub max_intervals: usize,
    /// Use closed forms for Gaussian sources instead of quadrature.
    pub gaussian_closed_form: bool,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            trunc_k: 12.0,
            tol: 1e-10,
            nodes: 16,
            max_intervals: 20_000,
            gaussian_closed_form: true,
        }
    }
}

/// Posterior summary of `X` given one observation `Y = y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posterior {
    pub y: f64,
    pub ln_density: f64,
    pub mean: f64,
    pub var: f64,
    /// Third central moment of `X` given `y`.
    pub third: f64,
}

impl Posterior {
    pub fn density(&self) -> f64 {
        self.ln_density.exp()
    }

    pub fn score(&self, s: f64) -> f64 {
        (self.mean - self.y) / s
    }

    pub fn curvature(&self, s: f64) -> f64 {
        self.var / (s * s) - 1.0 / s
    }

    /// `d/dy Var(X | Y = y)`.
    pub fn var_slope(&self, s: f64) -> f64 {
        self.third / s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SummaryMethod {
    ClosedForm,
    Quadrature,
}

/// Integrated quantities of a channel, all entropies in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelSummary {
    pub s: f64,
    pub h_y: f64,
    pub n_y: f64,
    pub mmse: f64,
    /// Entropy of the conditional mean `V = E[X|Y]`.
    pub h_v: f64,
    pub n_v: f64,
    pub var_v: f64,
    pub mass: f64,
    pub var_y: f64,
    /// Largest error estimate among the integrals, plus the lost mass.
    pub error: f64,
    pub method: SummaryMethod,
}

impl ChannelSummary {
    /// `σ² - mmse - N(V)`, zero exactly when the source is Gaussian.
    pub fn gap(&self, sigma2: f64) -> f64 {
        sigma2 - self.mmse - self.n_v
    }
}

#[derive(Debug, Clone)]
pub struct SmoothedChannel {
    source: SourceModel,
    s: f64,
    config: QuadConfig,
    rule: Arc<GaussLegendre>,
    short_rule: Arc<GaussLegendre>,
}

impl SmoothedChannel {
    pub fn new(source: SourceModel, s: f64, config: QuadConfig) -> Result<Self, SmoothingError> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(SmoothingError::NonPositiveNoise(s));
        }
        Ok(Self {
            source,
            s,
            config,
            rule: Arc::new(GaussLegendre::new(config.nodes.max(2))),
            short_rule: Arc::new(GaussLegendre::new(4)),
        })
    }

    pub fn source(&self) -> &SourceModel {
        &self.source
    }

    pub fn noise(&self) -> f64 {
        self.s
    }

    pub fn config(&self) -> &QuadConfig {
        &self.config
    }

    fn closed_form(&self) -> bool {
        self.config.gaussian_closed_form && self.source.is_gaussian()
    }

    pub fn posterior(&self, y: f64) -> Result<Posterior, SmoothingError> {
        if self.closed_form() {
            return Ok(self.gaussian_posterior(y));
        }
        self.posterior_quadrature(y)
    }

    fn gaussian_posterior(&self, y: f64) -> Posterior {
        let (mu, v, s) = (self.source.mean(), self.source.variance(), self.s);
        let total = v + s;
        let u = y - mu;
        Posterior {
            y,
            ln_density: -0.5 * u * u / total - 0.5 * (2.0 * PI * total).ln(),
            mean: mu + v / total * u,
            var: v * s / total,
            third: 0.0,
        }
    }

    fn posterior_quadrature(&self, y: f64) -> Result<Posterior, SmoothingError> {
        let sd = self.s.sqrt();
        let half = self.config.trunc_k * sd;
        let (clo, chi) = self.source.clip_support(self.config.trunc_k);
        let (mut lo, mut hi) = if y + half <= clo {
            (clo, (clo + 2.0 * half).min(chi))
        } else if y - half >= chi {
            ((chi - 2.0 * half).max(clo), chi)
        } else {
            ((y - half).max(clo), (y + half).min(chi))
        };

        let inv2s = 0.5 / self.s;
        let log_kernel = |x: f64| {
            let d = y - x;
            self.source.ln_pdf(x) - d * d * inv2s
        };
        let mut nodes: Vec<(f64, f64)> = Vec::with_capacity(32 * self.rule.len());
        let mut top;
        loop {
            nodes.clear();
            let peak;
            (top, peak) = self.collect_nodes(lo, hi, &log_kernel, &mut nodes);
            if top == f64::NEG_INFINITY {
                return Err(SmoothingError::DensityUnderflow {
                    y,
                    ln_density: f64::NEG_INFINITY,
                });
            }
            // Widen any cut edge where the integrand is not yet negligible.
            let grow_lo = lo > clo && log_kernel(lo) > peak - 50.0;
            let grow_hi = hi < chi && log_kernel(hi) > peak - 50.0;
            if !grow_lo && !grow_hi {
                break;
            }
            if grow_lo {
                lo = (lo - 2.0 * half).max(clo);
            }
            if grow_hi {
                hi = (hi + 2.0 * half).min(chi);
            }
        }

        let (mut z, mut zx) = (0.0, 0.0);
        for (x, l) in nodes.iter_mut() {
            let e = (*l - top).exp();
            *l = e;
            z += e;
            zx += e * *x;
        }
        let mean = zx / z;
        let (mut m2, mut m3) = (0.0, 0.0);
        for &(x, e) in &nodes {
            let d = x - mean;
            m2 += e * d * d;
            m3 += e * d * d * d;
        }
        let var = m2 / z;
        if !(var > 0.0) {
            return Err(SmoothingError::NegativeConditionalVariance { y, value: var });
        }
        Ok(Posterior {
            y,
            ln_density: top + z.ln() - 0.5 * (2.0 * PI * self.s).ln(),
            mean,
            var,
            third: m3 / z,
        })
    }

    /// Pushes `(x, ln w + log_kernel(x))` for every node on `[lo, hi]` and
    /// returns the largest log-weight and the largest `log_kernel` value.
    fn collect_nodes(
        &self,
        lo: f64,
        hi: f64,
        log_kernel: &impl Fn(f64) -> f64,
        nodes: &mut Vec<(f64, f64)>,
    ) -> (f64, f64) {
        let sd = self.s.sqrt();
        let mut cuts = Vec::with_capacity(8);
        cuts.push(lo);
        self.source.breakpoints_within(lo, hi, &mut cuts);
        cuts.push(hi);

        let panel = sd.min(self.source.smooth_scale());
        let (mut top, mut peak) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for seg in cuts.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let len = b - a;
            if !(len > 0.0) {
                continue;
            }
            let (rule, pieces) = if len <= 0.25 * sd {
                (&*self.short_rule, 1)
            } else {
                (&*self.rule, (len / panel).ceil().max(1.0) as usize)
            };
            let width = len / pieces as f64;
            for j in 0..pieces {
                let pa = a + j as f64 * width;
                let pb = if j + 1 == pieces { b } else { pa + width };
                rule.for_each_node(pa, pb, |x, w| {
                    let k = log_kernel(x);
                    let l = w.ln() + k;
                    top = top.max(l);
                    peak = peak.max(k);
                    nodes.push((x, l));
                });
            }
        }
        (top, peak)
    }

    pub fn ln_output_density(&self, y: f64) -> Result<f64, SmoothingError> {
        Ok(self.posterior(y)?.ln_density)
    }

    pub fn output_density(&self, y: f64) -> Result<f64, SmoothingError> {
        let ln_density = self.ln_output_density(y)?;
        let p = ln_density.exp();
        if p > 0.0 {
            Ok(p)
        } else {
            Err(SmoothingError::DensityUnderflow { y, ln_density })
        }
    }

    /// First and second derivatives of `ln p_Y` at `y`.
    pub fn score_and_curvature(&self, y: f64) -> Result<(f64, f64), SmoothingError> {
        let p = self.posterior(y)?;
        Ok((p.score(self.s), p.curvature(self.s)))
    }

    /// `(E[X|Y=y], Var(X|Y=y))`.
    pub fn cond_moments(&self, y: f64) -> Result<(f64, f64), SmoothingError> {
        let p = self.posterior(y)?;
        Ok((p.mean, p.var))
    }

    /// Half-width of the `y` range used by the integrals, around the mean.
    pub fn y_radius(&self) -> f64 {
        let k = self.config.trunc_k;
        let (lo, hi) = self.source.effective_support();
        let mu = self.source.mean();
        let reach = (hi - mu).max(mu - lo);
        (k * (self.source.variance() + self.s).sqrt()).max(reach + k * self.s.sqrt())
    }

    pub fn summary(&self) -> Result<ChannelSummary, SmoothingError> {
        if self.closed_form() {
            return Ok(self.gaussian_summary());
        }
        let summary = self.summary_quadrature()?;
        let sigma2 = self.source.variance();
        if (summary.mass - 1.0).abs() > 1e-8 {
            return Err(SmoothingError::InvariantViolated {
                what: "output mass",
                value: summary.mass,
                expected: 1.0,
            });
        }
        let want = sigma2 + self.s;
        if ((summary.var_y - want) / want).abs() > 1e-6 {
            return Err(SmoothingError::InvariantViolated {
                what: "output variance",
                value: summary.var_y,
                expected: want,
            });
        }
        Ok(summary)
    }

    fn gaussian_summary(&self) -> ChannelSummary {
        let (v, s) = (self.source.variance(), self.s);
        let total = v + s;
        let h_y = 0.5 * (TWO_PI_E * total).ln();
        let var_v = v * v / total;
        let h_v = 0.5 * (TWO_PI_E * var_v).ln();
        ChannelSummary {
            s,
            h_y,
            n_y: entropy_power(h_y),
            mmse: v * s / total,
            h_v,
            n_v: entropy_power(h_v),
            var_v,
            mass: 1.0,
            var_y: total,
            error: 0.0,
            method: SummaryMethod::ClosedForm,
        }
    }

    fn summary_quadrature(&self) -> Result<ChannelSummary, SmoothingError> {
        let mu = self.source.mean();
        let r = self.y_radius();
        let (lo, hi) = (mu - r, mu + r);
        let pieces = 8;
        let mut breaks: Vec<f64> = (0..=pieces)
            .map(|i| lo + (hi - lo) * i as f64 / pieces as f64)
            .collect();
        // Grade the mesh geometrically around kinks so the smoothed corner,
        // only about √s wide, is resolved before error estimates are trusted.
        let width = self.s.sqrt();
        for k in self.source.kinks() {
            let mut h = width;
            while h < r {
                breaks.extend([k - h, k, k + h]);
                h *= 4.0;
            }
        }
        breaks.retain(|&x| x >= lo && x <= hi);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();

        let s = self.s;
        let integrand = |y: f64| -> Result<[f64; 8], SmoothingError> {
            let post = self.posterior_quadrature(y)?;
            let p = post.ln_density.exp();
            if p == 0.0 {
                return Ok([0.0; 8]);
            }
            let u = y - mu;
            let m = post.mean - mu;
            Ok([
                p,
                p * u,
                p * u * u,
                -p * post.ln_density,
                p * post.var,
                p * (post.var / s).ln(),
                p * m,
                p * m * m,
            ])
        };
        let opts = AdaptiveOptions {
            abs_tol: self.config.tol,
            rel_tol: self.config.tol,
            max_intervals: self.config.max_intervals,
        };
        let res = integrate_adaptive(integrand, &breaks, &self.rule, opts)?.map_err(|nc| {
            SmoothingError::QuadratureNotConverged {
                what: "channel summary",
                worst_ratio: nc.worst_error,
                intervals: nc.intervals,
            }
        })?;
        let [mass, m1, m2, h_y, mmse, eln, mv1, mv2] = res.value;
        let mean_y = m1 / mass;
        let h_v = h_y + eln;
        Ok(ChannelSummary {
            s,
            h_y,
            n_y: entropy_power(h_y),
            mmse,
            h_v,
            n_v: entropy_power(h_v),
            var_v: mv2 - mv1 * mv1,
            mass,
            var_y: m2 / mass - mean_y * mean_y,
            error: res.error.iter().cloned().fold(0.0, f64::max) + (1.0 - mass).abs(),
            method: SummaryMethod::Quadrature,
        })
    }

    pub fn output_entropy(&self) -> Result<f64, SmoothingError> {
        Ok(self.summary()?.h_y)
    }

    pub fn mmse(&self) -> Result<f64, SmoothingError> {
        Ok(self.summary()?.mmse)
    }

    pub fn cond_mean_entropy(&self) -> Result<f64, SmoothingError> {
        Ok(self.summary()?.h_v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sources::{make_source, SourceKind};

    fn channel(kind: SourceKind, s: f64) -> SmoothedChannel {
        SmoothedChannel::new(make_source(kind, 1.0).unwrap(), s, QuadConfig::default()).unwrap()
    }

    fn forced(kind: SourceKind, s: f64) -> SmoothedChannel {
        let cfg = QuadConfig {
            gaussian_closed_form: false,
            ..QuadConfig::default()
        };
        SmoothedChannel::new(make_source(kind, 1.0).unwrap(), s, cfg).unwrap()
    }

    #[test]
    fn rejects_bad_noise() {
        let src = make_source(SourceKind::Gaussian, 1.0).unwrap();
        for s in [0.0, -1.0, f64::INFINITY] {
            assert!(SmoothedChannel::new(src.clone(), s, QuadConfig::default()).is_err());
        }
    }

    #[test]
    fn gaussian_kernel_matches_closed_form() {
        let q = forced(SourceKind::Gaussian, 1.0);
        let c = channel(SourceKind::Gaussian, 1.0);
        for y in [-7.0, -2.0, 0.0, 1.0, 2.0, 9.0] {
            let a = q.posterior(y).unwrap();
            let b = c.posterior(y).unwrap();
            assert!((a.ln_density - b.ln_density).abs() < 1e-12, "y={y}");
            assert!((a.mean - b.mean).abs() < 1e-12);
            assert!((a.var - b.var).abs() < 1e-12);
            assert!(a.third.abs() < 1e-12);
        }
        assert!((c.output_density(0.0).unwrap() - 1.0 / (4.0 * PI).sqrt()).abs() < 1e-15);
        let (score, curv) = q.score_and_curvature(2.0).unwrap();
        assert!((score + 1.0).abs() < 1e-12 && (curv + 0.5).abs() < 1e-12);
        let (m, v) = q.cond_moments(1.0).unwrap();
        assert!((m - 0.5).abs() < 1e-12 && (v - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gaussian_summary_by_quadrature() {
        for s in [1e-3, 0.25, 1.0, 4.0, 1e4] {
            let q = forced(SourceKind::Gaussian, s).summary().unwrap();
            let c = channel(SourceKind::Gaussian, s).summary().unwrap();
            assert!((q.h_y - c.h_y).abs() < 1e-9, "s={s}: {} vs {}", q.h_y, c.h_y);
            assert!((q.h_v - c.h_v).abs() < 1e-9, "s={s}");
            assert!((q.mmse - c.mmse).abs() < 1e-9 * c.mmse.max(1e-3), "s={s}");
            assert!(c.gap(1.0).abs() < 1e-15);
        }
        let c = channel(SourceKind::Gaussian, 1.0).summary().unwrap();
        assert!((c.h_y - 0.5 * (4.0 * PI * std::f64::consts::E).ln()).abs() < 1e-14);
        assert!((c.h_v - 1.072_36).abs() < 1e-5);
    }

    #[test]
    fn uniform_recovers_prior_for_small_noise() {
        let c = channel(SourceKind::Uniform, 1e-4);
        let p = c.output_density(0.0).unwrap();
        assert!((p - 1.0 / (2.0 * 3f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn far_tail_stays_finite_in_log_domain() {
        let c = channel(SourceKind::Uniform, 1e-2);
        let post = c.posterior(40.0).unwrap();
        assert!(post.ln_density.is_finite());
        assert!(post.mean <= 3f64.sqrt() && post.mean > 1.6);
        assert!(matches!(
            c.output_density(40.0),
            Err(SmoothingError::DensityUnderflow { .. })
        ));
    }

    #[test]
    fn symmetric_sources_have_zero_score_at_origin() {
        for kind in SourceKind::BUILT_IN {
            let c = channel(kind, 0.7);
            let (score, _) = c.score_and_curvature(0.0).unwrap();
            assert!(score.abs() < 1e-14, "{kind}");
        }
    }

    #[test]
    fn summaries_meet_invariants() {
        for kind in [SourceKind::Laplace, SourceKind::Uniform] {
            for s in [1e-3, 0.25, 1.0, 4.0, 1e4] {
                let sum = channel(kind, s).summary().unwrap();
                assert!((sum.mmse + sum.var_v - 1.0).abs() < 1e-6, "{kind} s={s}");
                assert!(sum.n_v <= sum.var_v && sum.var_v <= 1.0, "{kind} s={s}");
                assert!(sum.mmse < 1.0 && sum.mmse > 0.0);
            }
        }
    }
}
