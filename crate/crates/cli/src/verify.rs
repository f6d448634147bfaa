//! Verification suites. Each check records what was measured, the limit it
//! is held to, and the slack `limit - measured` (negative means failure).

use clap::ValueEnum;
use rateloss_core::asymptotics::{
    bound_difference, dstar_solve, gamma_coefficient, gaussian_loss_large_m,
    gaussian_loss_small_delta, kappa_limit, ub_large_m_expansion,
};
use rateloss_core::bounds::{
    d_min_gaussian, exact_gaussian_loss, Agents, BoundEvaluator, BoundResult, FormulaId,
};
use rateloss_core::mc::{estimate_many, McQuantity};
use rateloss_core::smoothing::{QuadConfig, SmoothedChannel};
use rateloss_core::sources::{info_summary, make_source, SourceKind};
use serde::Serialize;

use crate::sweep::{default_range, log_grid};
use crate::CliError;

pub const DEFAULT_SAMPLES: usize = 1_000_000;
pub const NOISE_LEVELS: [f64; 3] = [0.25, 1.0, 4.0];

/// Allowance for comparing bounds that coincide exactly in some cases
/// (both remote lower bounds are equal for Gaussian input at small s).
pub const ROUNDING: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Identities,
    Ordering,
    Asymptotics,
    Mc,
}

impl Suite {
    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Identities => "identities",
            Suite::Ordering => "ordering",
            Suite::Asymptotics => "asymptotics",
            Suite::Mc => "mc",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub limit: f64,
    pub slack: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    /// Passes when `measured <= limit`.
    pub fn at_most(name: impl Into<String>, measured: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            passed: measured <= limit,
            measured,
            limit,
            slack: limit - measured,
            detail: None,
        }
    }

    pub fn detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub suite: Suite,
    pub seed: u64,
    pub samples: usize,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.passed)
    }
}

pub fn run(suite: Suite, seed: u64, samples: usize, config: QuadConfig) -> Result<Report, CliError> {
    let checks = match suite {
        Suite::Identities => identities(seed, samples, config)?,
        Suite::Ordering => ordering(config)?,
        Suite::Asymptotics => asymptotics(config)?,
        Suite::Mc => mc(seed, samples, config)?,
    };
    Ok(Report {
        suite,
        seed,
        samples,
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

fn channel(kind: SourceKind, s: f64, config: QuadConfig) -> Result<SmoothedChannel, CliError> {
    Ok(SmoothedChannel::new(make_source(kind, 1.0)?, s, config)?)
}

fn identities(seed: u64, samples: usize, config: QuadConfig) -> Result<Vec<Check>, CliError> {
    let mut checks = Vec::new();
    for kind in [SourceKind::Laplace, SourceKind::Uniform] {
        for s in NOISE_LEVELS {
            let c = channel(kind, s, config)?;
            let h_v = c.summary()?.h_v;
            let est = &estimate_many(&c, &[McQuantity::EntropyV], samples, seed)?[0];
            checks.push(
                Check::at_most(format!("hv_quadrature_vs_mc/{kind}/s={s}"), (h_v - est.mean).abs(), est.half_width_99)
                    .detail(format!("quadrature {h_v}, mc {} over {} samples", est.mean, est.n_samples)),
            );
        }
    }
    let forced = QuadConfig {
        gaussian_closed_form: false,
        ..config
    };
    for kind in SourceKind::BUILT_IN {
        let h_x = info_summary(&make_source(kind, 1.0)?)?.h;
        for s in NOISE_LEVELS {
            let sum = channel(kind, s, forced)?.summary()?;
            let excess = sum.h_v + sum.h_y - 2.0 * h_x;
            let name = format!("entropy_sum/{kind}/s={s}");
            checks.push(if kind == SourceKind::Gaussian {
                Check::at_most(name, excess.abs(), 1e-6).detail("equality for Gaussian input")
            } else {
                Check::at_most(name, -excess, 1e-6).detail(format!("h(V)+h(Y)-2h(X) = {excess}"))
            });
        }
    }
    Ok(checks)
}

fn value(r: &BoundResult) -> Option<f64> {
    r.is_valid().then_some(r.value).flatten()
}

/// Largest `a - b` over the points where both are valid, with the count.
fn worst_excess(
    ev_a: &BoundEvaluator,
    a: FormulaId,
    ev_b: &BoundEvaluator,
    b: FormulaId,
    grid: &[f64],
) -> Result<(f64, usize), CliError> {
    let mut worst = f64::NEG_INFINITY;
    let mut n = 0;
    for &d in grid {
        if let (Some(x), Some(y)) = (value(&ev_a.evaluate(a, d)?), value(&ev_b.evaluate(b, d)?)) {
            worst = worst.max(x - y);
            n += 1;
        }
    }
    Ok((worst, n))
}

fn ordering(config: QuadConfig) -> Result<Vec<Check>, CliError> {
    let mut checks = Vec::new();
    for kind in SourceKind::BUILT_IN {
        for s in NOISE_LEVELS {
            let ev = BoundEvaluator::new(&make_source(kind, 1.0)?, s, Agents::Finite(1), config)?;
            let grid = log_grid(ev.channel().expect("finite M").mmse * 1.01, 0.999, 50);
            let (worst, n) = worst_excess(&ev, FormulaId::RemoteLb2, &ev, FormulaId::RemoteLb1, &grid)?;
            checks.push(
                Check::at_most(format!("remote_lb1_ge_lb2/{kind}/s={s}"), worst, ROUNDING)
                    .detail(format!("{n} points with both bounds valid")),
            );
        }
    }

    for m in [2u32, 5, 10] {
        let ev = BoundEvaluator::new(&make_source(SourceKind::Gaussian, 1.0)?, 1.0, Agents::Finite(m), config)?;
        let (lo, hi) = (d_min_gaussian(1.0, 1.0, m), 1.0);
        let mut worst: f64 = 0.0;
        for i in 1..=100 {
            let d = lo + (hi - lo) * i as f64 / 101.0;
            let ub = value(&ev.evaluate(FormulaId::UbTight, d)?).unwrap_or(f64::INFINITY);
            let exact = exact_gaussian_loss(1.0, 1.0, m, d).value.unwrap_or(f64::NAN);
            worst = worst.max((ub - exact).abs());
        }
        checks.push(Check::at_most(format!("gaussian_tightness/M={m}"), worst, 1e-9));
    }

    let (lo, hi) = default_range(1.0, 1.0, Agents::Finite(10));
    let grid = log_grid(lo, hi, 400);
    let evs: Vec<BoundEvaluator> = SourceKind::BUILT_IN
        .iter()
        .map(|&k| BoundEvaluator::new(&make_source(k, 1.0)?, 1.0, Agents::Finite(10), config).map_err(CliError::from))
        .collect::<Result<_, _>>()?;
    let (gauss, laplace, uniform) = (&evs[0], &evs[1], &evs[2]);
    for (name, ev) in [("laplace", laplace), ("uniform", uniform)] {
        let (worst, n) = worst_excess(ev, FormulaId::Lb, ev, FormulaId::UbTight, &grid)?;
        checks.push(
            Check::at_most(format!("lb_le_ub/{name}/M=10"), worst, 0.0).detail(format!("{n} points with both bounds valid")),
        );
    }
    let (worst, n) = worst_excess(laplace, FormulaId::Lb, gauss, FormulaId::Lb, &grid)?;
    checks.push(Check::at_most("gaussian_maximizes_lb/M=10", worst, 0.0).detail(format!("{n} common points")));
    let (worst, n) = worst_excess(gauss, FormulaId::UbTight, laplace, FormulaId::UbTight, &grid)?;
    checks.push(Check::at_most("gaussian_minimizes_ub/M=10", worst, 0.0).detail(format!("{n} common points")));
    Ok(checks)
}

fn spread(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::MIN, f64::max);
    let min = xs.iter().cloned().fold(f64::MAX, f64::min);
    max / min
}

fn exact_loss(m: u32, d: f64) -> f64 {
    exact_gaussian_loss(1.0, 1.0, m, d).value.unwrap_or(f64::NAN)
}

fn asymptotics(config: QuadConfig) -> Result<Vec<Check>, CliError> {
    let mut checks = Vec::new();
    let agents = [100u32, 1000, 10_000];

    let e = gaussian_loss_large_m(1.0, 1.0, 0.5)?;
    let scaled: Vec<f64> = agents
        .iter()
        .map(|&m| ((exact_loss(m, 0.5) - e.eval(m as f64)) * (m as f64).powi(2)).abs())
        .collect();
    checks.push(Check::at_most("gaussian_large_m_remainder/D=0.5", spread(&scaled), 4.0).detail(format!("|error|·M² = {scaled:?}")));

    let m = 100_000u32;
    for (alpha, beta) in [(0.5, 2.0), (1.0, 2.0)] {
        let gamma = gamma_coefficient(alpha, beta, 1.0)?;
        let mf = m as f64;
        let ratio = exact_loss(m, beta * mf.powf(-alpha)) / (gamma * mf.powf(alpha));
        checks.push(
            Check::at_most(format!("gaussian_gamma_ratio/alpha={alpha}/beta={beta}"), (ratio - 1.0).abs(), 1e-2)
                .detail(format!("ratio {ratio} at M = {m}")),
        );
    }

    for m in [2u32, 5, 10] {
        let e = gaussian_loss_small_delta(1.0, 1.0, m);
        let d0 = d_min_gaussian(1.0, 1.0, m);
        let scaled: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
            .iter()
            .map(|&delta| ((exact_loss(m, d0 + delta) - e.eval(delta)) / (delta * delta)).abs())
            .collect();
        checks.push(Check::at_most(format!("gaussian_small_delta_remainder/M={m}"), spread(&scaled), 4.0).detail(format!("|error|/δ² = {scaled:?}")));
    }

    let laplace = make_source(SourceKind::Laplace, 1.0)?;
    let info = info_summary(&laplace)?;
    let e = ub_large_m_expansion(&info, 1.0, 0.4)?;
    let mut scaled = Vec::new();
    for &m in &agents {
        let ev = BoundEvaluator::new(&laplace, 1.0, Agents::Finite(m), config)?;
        let ub = value(&ev.evaluate(FormulaId::UbTight, 0.4)?).unwrap_or(f64::NAN);
        scaled.push(((ub - e.eval(m as f64)) * (m as f64).powf(1.5)).abs());
    }
    checks.push(
        Check::at_most("laplace_ub_large_m_remainder/D=0.4", spread(&scaled), 4.0)
            .detail(format!("|error|·M^1.5 = {scaled:?}; the Laplace kink makes the remainder O(M^-1.5)")),
    );

    for kind in [SourceKind::Gaussian, SourceKind::Laplace] {
        let k = kappa_limit(&make_source(kind, 1.0)?, config)?;
        let analytic = k.analytic.unwrap_or(f64::NAN);
        checks.push(
            Check::at_most(format!("kappa/{kind}"), (k.numeric / analytic - 1.0).abs(), 1e-2)
                .detail(format!("numeric {}, N(X)J(X) = {analytic}", k.numeric)),
        );
    }

    for snr in [0.1, 1.0, 10.0] {
        let mut rises = 0.0f64;
        let mut worst_gap = 0.0f64;
        let mut last = f64::INFINITY;
        for i in (30..=100).rev() {
            let r = dstar_solve(i as f64 / 100.0, snr)?;
            rises = rises.max(r.d_star - last);
            last = r.d_star;
            if r.crossover {
                worst_gap = worst_gap.max(bound_difference(i as f64 / 100.0, 1.0 / snr, r.d_star).abs());
            }
        }
        checks.push(Check::at_most(format!("dstar_monotone/snr={snr}"), rises.max(0.0), 0.0));
        checks.push(Check::at_most(format!("dstar_root/snr={snr}"), worst_gap, 1e-8));
    }
    Ok(checks)
}

fn mc(seed: u64, samples: usize, config: QuadConfig) -> Result<Vec<Check>, CliError> {
    let mut checks = Vec::new();
    for kind in [SourceKind::Gaussian, SourceKind::Laplace] {
        let c = channel(kind, 1.0, config)?;
        let sum = c.summary()?;
        let want = [sum.mmse, sum.h_y, sum.h_v, sum.var_v];
        let est = estimate_many(&c, &McQuantity::ALL, samples, seed)?;
        for (e, w) in est.iter().zip(want) {
            checks.push(
                Check::at_most(format!("{}/{kind}/s=1", e.quantity.as_str()), (e.mean - w).abs(), e.half_width_99)
                    .detail(format!("mc {} vs {w}", e.mean)),
            );
        }
    }
    Ok(checks)
}
