//! Large-`M` and small-distortion expansions of the rate loss, the small-noise
//! slope of the entropy power, and the crossover between the two upper
//! bounds for many agents.

use serde::Serialize;

use crate::bounds::{rateloss_ub_inf, rateloss_ub_prev_inf};
use crate::smoothing::{QuadConfig, SmoothedChannel, SmoothingError};
use crate::sources::{info_summary, InfoSummary, SourceError, SourceModel};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum AsymptoticsError {
    #[error("distortion {d} is outside the region ({lo}, {hi})")]
    RegionViolation { d: f64, lo: f64, hi: f64 },
    #[error("invalid regime: {0}")]
    InvalidRegime(String),
    #[error("the source has infinite Fisher information")]
    InfiniteFisher,
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Smoothing(#[from] SmoothingError),
}

fn check_region(d: f64, lo: f64, hi: f64) -> Result<(), AsymptoticsError> {
    if d > lo && d < hi {
        Ok(())
    } else {
        Err(AsymptoticsError::RegionViolation { d, lo, hi })
    }
}

/// `constant + inv_m / M`, accurate to `O(1/M²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LargeM {
    pub constant: f64,
    pub inv_m: f64,
}

impl LargeM {
    pub fn eval(&self, m: f64) -> f64 {
        self.constant + self.inv_m / m
    }
}

/// `log_coeff·ln(1/δ) + constant + linear·δ`, accurate to `O(δ²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmallDelta {
    pub log_coeff: f64,
    pub constant: f64,
    pub linear: f64,
}

impl SmallDelta {
    pub fn eval(&self, delta: f64) -> f64 {
        -self.log_coeff * delta.ln() + self.constant + self.linear * delta
    }
}

fn loss_inf(sigma2: f64, sigma_w2: f64, d: f64) -> f64 {
    0.5 * sigma_w2 * (1.0 / d - 1.0 / sigma2)
}

/// Gaussian loss at fixed `D` as `M` grows.
pub fn gaussian_loss_large_m(sigma2: f64, sigma_w2: f64, d: f64) -> Result<LargeM, AsymptoticsError> {
    check_region(d, 0.0, sigma2)?;
    let l = loss_inf(sigma2, sigma_w2, d);
    Ok(LargeM {
        constant: l,
        inv_m: l * (l - 1.0),
    })
}

/// Growth rate `γ` of the loss along `D = βM^{-α}`.
pub fn gamma_coefficient(alpha: f64, beta: f64, sigma_w2: f64) -> Result<f64, AsymptoticsError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(AsymptoticsError::InvalidRegime(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    if !(beta > 0.0) {
        return Err(AsymptoticsError::InvalidRegime(format!(
            "beta must be positive, got {beta}"
        )));
    }
    if alpha < 1.0 {
        return Ok(sigma_w2 / (2.0 * beta));
    }
    if beta <= sigma_w2 {
        return Err(AsymptoticsError::InvalidRegime(format!(
            "alpha = 1 needs beta > sigma_w2 ({beta} <= {sigma_w2})"
        )));
    }
    Ok(0.5 * (beta / (beta - sigma_w2)).ln())
}

/// Gaussian loss at `D = D_min + δ` for small `δ`.
pub fn gaussian_loss_small_delta(sigma2: f64, sigma_w2: f64, m: u32) -> SmallDelta {
    let mf = m as f64;
    let half = 0.5 * (mf - 1.0);
    let denom = mf * sigma2 + sigma_w2;
    if m <= 1 {
        return SmallDelta {
            log_coeff: 0.0,
            constant: 0.0,
            linear: 0.0,
        };
    }
    SmallDelta {
        log_coeff: half,
        constant: half * (mf * sigma_w2 * sigma2 * sigma2 / (denom * denom)).ln(),
        linear: (mf - 1.0) * denom / (2.0 * sigma_w2 * sigma2),
    }
}

fn finite_fisher(info: &InfoSummary) -> Result<f64, AsymptoticsError> {
    info.fisher.finite().ok_or(AsymptoticsError::InfiniteFisher)
}

/// Large-`M` expansion of the tight upper bound, valid for `0 < D < N(X)`.
pub fn ub_large_m_expansion(
    info: &InfoSummary,
    sigma_w2: f64,
    d: f64,
) -> Result<LargeM, AsymptoticsError> {
    let j = finite_fisher(info)?;
    check_region(d, 0.0, info.entropy_power)?;
    let sigma2 = info.sigma2;
    let l = loss_inf(sigma2, sigma_w2, d);
    Ok(LargeM {
        constant: l + 0.5 * (sigma2 / info.entropy_power).ln(),
        inv_m: l * l - l + 0.5 * sigma_w2 * (j - 1.0 / sigma2),
    })
}

/// Large-`M` expansion of the lower bound, valid for `0 < D < 1/J(X)`.
pub fn lb_large_m_expansion(
    info: &InfoSummary,
    sigma_w2: f64,
    d: f64,
) -> Result<LargeM, AsymptoticsError> {
    let j = finite_fisher(info)?;
    check_region(d, 0.0, 1.0 / j)?;
    let sigma2 = info.sigma2;
    let l = loss_inf(sigma2, sigma_w2, d);
    let excess = 0.5 * sigma_w2 * (1.0 / d - j);
    Ok(LargeM {
        constant: l - 0.5 * sigma_w2 * (j - 1.0 / sigma2) - 0.5 * (sigma2 / info.entropy_power).ln(),
        inv_m: excess * excess - l,
    })
}

/// Small-noise slope of `s ↦ N(X + √s G)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KappaLimit {
    /// `(N(X + √s G) - N(X)) / s` at `s = 1e-2, 1e-3, 1e-4`.
    pub slopes: [f64; 3],
    /// Two-point Richardson extrapolation of the last two slopes.
    pub numeric: f64,
    /// `N(X)·J(X)`, absent when the Fisher information is infinite.
    pub analytic: Option<f64>,
}

pub const KAPPA_NOISE_LEVELS: [f64; 3] = [1e-2, 1e-3, 1e-4];

pub fn kappa_limit(source: &SourceModel, config: QuadConfig) -> Result<KappaLimit, AsymptoticsError> {
    let info = info_summary(source)?;
    let mut slopes = [0.0; 3];
    for (slot, &s) in slopes.iter_mut().zip(&KAPPA_NOISE_LEVELS) {
        let n_y = SmoothedChannel::new(source.clone(), s, config)?.summary()?.n_y;
        *slot = (n_y - info.entropy_power) / s;
    }
    Ok(KappaLimit {
        slopes,
        numeric: (10.0 * slopes[2] - slopes[1]) / 9.0,
        analytic: info.fisher.finite().map(|j| j * info.entropy_power),
    })
}

/// Crossover distortion below which the new many-agent bound beats the
/// previous one, at `σ² = 1` and `σ_W² = 1/snr`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DStar {
    pub d_star: f64,
    /// False when the previous bound stays above the new one on all of
    /// `(0, N(X))`; then `d_star` is the region end `N(X)`.
    pub crossover: bool,
    /// Previous bound minus new bound at `d_star`.
    pub difference: f64,
}

/// Previous minus new bound, with `σ² = 1`.
pub fn bound_difference(n_x: f64, sigma_w2: f64, d: f64) -> f64 {
    let prev = rateloss_ub_prev_inf(1.0, sigma_w2, d).value.unwrap_or(f64::NAN);
    let new = rateloss_ub_inf(1.0, n_x, sigma_w2, d).value.unwrap_or(f64::NAN);
    prev - new
}

pub fn dstar_solve(n_x: f64, snr: f64) -> Result<DStar, AsymptoticsError> {
    if !(n_x > 0.0 && n_x <= 1.0) {
        return Err(AsymptoticsError::InvalidRegime(format!(
            "entropy power must lie in (0, 1], got {n_x}"
        )));
    }
    if !(snr > 0.0) || !snr.is_finite() {
        return Err(AsymptoticsError::InvalidRegime(format!("snr must be positive, got {snr}")));
    }
    let sigma_w = snr.recip().sqrt();
    // The difference is ½ln(N(X)·g(D)) with g(D) = 2 - D + 2σ_W(1/√D - √D),
    // strictly decreasing, so its sign is that of ln N(X) + ln g(D).
    let sign = |d: f64| n_x.ln() + (2.0 - d + 2.0 * sigma_w * (1.0 / d.sqrt() - d.sqrt())).ln();
    let sigma_w2 = sigma_w * sigma_w;
    if sign(n_x) >= 0.0 {
        return Ok(DStar {
            d_star: n_x,
            crossover: false,
            difference: 0.5 * sign(n_x),
        });
    }
    let mut hi = n_x;
    let mut lo = n_x;
    while sign(lo) < 0.0 {
        lo *= 0.5;
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sign(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let d_star = if sign(hi).abs() < sign(lo).abs() { hi } else { lo };
    Ok(DStar {
        d_star,
        crossover: true,
        difference: bound_difference(n_x, sigma_w2, d_star),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sources::{make_source, SourceKind};

    #[test]
    fn gaussian_expansion_examples() {
        let e = gaussian_loss_large_m(1.0, 1.0, 0.5).unwrap();
        assert_eq!((e.constant, e.inv_m), (0.5, -0.25));
        let e = gaussian_loss_large_m(1.0, 1.0, 1.0 / 3.0).unwrap();
        assert!(e.inv_m.abs() < 1e-15);
        assert!(gaussian_loss_large_m(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma_coefficient(0.5, 2.0, 1.0).unwrap(), 0.25);
        assert!((gamma_coefficient(1.0, 2.0, 1.0).unwrap() - 0.5 * 2f64.ln()).abs() < 1e-15);
        assert!(matches!(
            gamma_coefficient(1.0, 1.0, 1.0),
            Err(AsymptoticsError::InvalidRegime(_))
        ));
        assert!(gamma_coefficient(1.5, 2.0, 1.0).is_err());
    }

    #[test]
    fn small_delta_examples() {
        let e = gaussian_loss_small_delta(1.0, 1.0, 2);
        assert_eq!(e.log_coeff, 0.5);
        assert!((e.constant - 0.5 * (2.0f64 / 9.0).ln()).abs() < 1e-15);
        assert!((e.constant + 0.752_04).abs() < 1e-5);
        assert_eq!(e.linear, 1.5);
        let e = gaussian_loss_small_delta(1.0, 1.0, 1);
        assert_eq!((e.log_coeff, e.constant, e.linear), (0.0, 0.0, 0.0));
    }

    #[test]
    fn general_expansions() {
        let g = info_summary(&make_source(SourceKind::Gaussian, 1.0).unwrap()).unwrap();
        let base = gaussian_loss_large_m(1.0, 1.0, 0.4).unwrap();
        let ub = ub_large_m_expansion(&g, 1.0, 0.4).unwrap();
        let lb = lb_large_m_expansion(&g, 1.0, 0.4).unwrap();
        for e in [ub, lb] {
            assert!((e.constant - base.constant).abs() < 1e-12);
            assert!((e.inv_m - base.inv_m).abs() < 1e-12);
        }

        let l = info_summary(&make_source(SourceKind::Laplace, 1.0).unwrap()).unwrap();
        let ub = ub_large_m_expansion(&l, 1.0, 0.4).unwrap();
        assert!((ub.constant - 0.822_37).abs() < 1e-5, "{}", ub.constant);
        let lb = lb_large_m_expansion(&l, 1.0, 0.4).unwrap();
        assert!((lb.constant - 0.177_63).abs() < 1e-5, "{}", lb.constant);
        assert!(lb_large_m_expansion(&l, 1.0, 0.5).is_err());

        let u = info_summary(&make_source(SourceKind::Uniform, 1.0).unwrap()).unwrap();
        assert_eq!(
            ub_large_m_expansion(&u, 1.0, 0.4),
            Err(AsymptoticsError::InfiniteFisher)
        );
    }

    #[test]
    fn kappa_for_gaussian_sources() {
        for v in [1.0, 4.0] {
            let k = kappa_limit(&make_source(SourceKind::Gaussian, v).unwrap(), QuadConfig::default())
                .unwrap();
            assert!((k.numeric - 1.0).abs() < 1e-9, "{k:?}");
            assert!((k.analytic.unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dstar_without_crossover_at_unit_entropy_power() {
        let r = dstar_solve(1.0, 1.0).unwrap();
        assert!(!r.crossover);
        assert_eq!(r.d_star, 1.0);
    }

    #[test]
    fn dstar_root_is_a_sign_change() {
        let r = dstar_solve(0.3, 10.0).unwrap();
        assert!(r.crossover);
        assert!(r.difference.abs() < 1e-12, "{r:?}");
        let w2 = 0.1;
        assert!(bound_difference(0.3, w2, r.d_star * (1.0 - 1e-9)) > 0.0);
        assert!(bound_difference(0.3, w2, r.d_star * (1.0 + 1e-9)) < 0.0);
        assert!(dstar_solve(0.0, 1.0).is_err());
        assert!(dstar_solve(0.5, 0.0).is_err());
    }
}
