//! Rate-distortion and rate-loss bounds for the Gaussian-noise CEO problem.
//!
//! All values are in nats. Each bound reports its own validity region; a
//! value is present only when the region is `Valid`.
//!
//! Most finite-`M` formulas share `x = (σ_W²/M)(1/D - 1/σ²)`, which lies in
//! `[0, 1)` between the smallest attainable distortion and `σ²`. They are
//! written in terms of `ℓ = -ln(1 - x)` so that nothing cancels near `σ²`.

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::smoothing::{ChannelSummary, QuadConfig, SmoothedChannel, SmoothingError};
use crate::sources::{info_summary, InfoSummary, SourceError, SourceModel};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("the source has infinite Fisher information")]
    InfiniteFisher,
    #[error("{0} needs a finite number of agents")]
    FiniteAgentsRequired(FormulaId),
    #[error("{0} is only defined as the number of agents grows without bound")]
    InfiniteAgentsRequired(FormulaId),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Smoothing(#[from] SmoothingError),
}

/// Number of agents, possibly unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Agents {
    Finite(u32),
    Infinite,
}

impl Agents {
    pub fn finite(self) -> Option<u32> {
        match self {
            Agents::Finite(m) => Some(m),
            Agents::Infinite => None,
        }
    }
}

impl fmt::Display for Agents {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Agents::Finite(m) => write!(f, "{m}"),
            Agents::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Agents {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_ascii_lowercase();
        if matches!(t.as_str(), "inf" | "infinity" | "∞") {
            return Ok(Agents::Infinite);
        }
        match t.parse::<u32>() {
            Ok(m) if m >= 1 => Ok(Agents::Finite(m)),
            _ => Err(format!("expected a positive integer or `inf`, got `{s}`")),
        }
    }
}

impl Serialize for Agents {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Agents::Finite(m) => serializer.serialize_u32(*m),
            Agents::Infinite => serializer.serialize_str("inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Region {
    Valid,
    BelowDmin,
    AboveRegion,
    Degenerate(String),
}

impl Region {
    /// Marker string used in tables; `None` for `Valid`.
    pub fn marker(&self) -> Option<String> {
        match self {
            Region::Valid => None,
            Region::BelowDmin => Some("below_dmin".into()),
            Region::AboveRegion => Some("above_region".into()),
            Region::Degenerate(why) => Some(format!("degenerate:{why}")),
        }
    }
}

impl Serialize for Region {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self.marker() {
            None => serializer.serialize_str("valid"),
            Some(m) => serializer.serialize_str(&m),
        }
    }
}

macro_rules! formula_ids {
    ($($variant:ident => $name:literal),* $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum FormulaId { $($variant),* }

        impl FormulaId {
            pub const ALL: &'static [FormulaId] = &[$(FormulaId::$variant),*];

            pub fn as_str(self) -> &'static str {
                match self { $(FormulaId::$variant => $name),* }
            }
        }

        impl FromStr for FormulaId {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s { $($name => Ok(FormulaId::$variant),)* _ => Err(format!("unknown formula `{s}`")) }
            }
        }
    };
}

formula_ids! {
    ExactGauss => "exact_gauss",
    ExactGaussInf => "exact_gauss_inf",
    RemoteLb1 => "remote_lb1",
    RemoteLb2 => "remote_lb2",
    RemoteLbTight => "remote_lb_tight",
    RemoteLbWeak => "remote_lb_weak",
    CeoSumrateUb => "ceo_sumrate_ub",
    UbTight => "ub_tight",
    UbNew => "ub_new",
    Lb => "lb",
    LbInf => "lb_inf",
    UbPrev => "ub_prev",
    UbPrevInf => "ub_prev_inf",
}

impl FormulaId {
    /// Whether the formula is the limit of many agents.
    pub fn is_limit(self) -> bool {
        matches!(
            self,
            FormulaId::ExactGaussInf | FormulaId::UbNew | FormulaId::LbInf | FormulaId::UbPrevInf
        )
    }
}

impl fmt::Display for FormulaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for FormulaId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundResult {
    pub formula: FormulaId,
    pub value: Option<f64>,
    pub region: Region,
}

impl BoundResult {
    fn valid(formula: FormulaId, value: f64) -> Self {
        Self {
            formula,
            value: Some(value),
            region: Region::Valid,
        }
    }

    fn outside(formula: FormulaId, region: Region) -> Self {
        Self {
            formula,
            value: None,
            region,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.region == Region::Valid
    }
}

fn log_plus(x: f64) -> f64 {
    x.ln().max(0.0)
}

/// `σ²σ_W² / (Mσ² + σ_W²)`, the smallest attainable distortion with
/// Gaussian input.
pub fn d_min_gaussian(sigma2: f64, sigma_w2: f64, m: u32) -> f64 {
    sigma2 * sigma_w2 / (m as f64 * sigma2 + sigma_w2)
}

/// `(x, ℓ)` with `x = s(1/D - 1/σ²)` and `ℓ = -ln(1 - x)`.
fn pole_terms(sigma2: f64, s: f64, d: f64) -> (f64, f64) {
    let x = s * (sigma2 - d) / (d * sigma2);
    (x, -(-x).ln_1p())
}

pub fn exact_gaussian_loss(sigma2: f64, sigma_w2: f64, m: u32, d: f64) -> BoundResult {
    let id = FormulaId::ExactGauss;
    if d <= d_min_gaussian(sigma2, sigma_w2, m) {
        return BoundResult::outside(id, Region::BelowDmin);
    }
    let (_, ell) = pole_terms(sigma2, sigma_w2 / m as f64, d);
    BoundResult::valid(id, 0.5 * (m as f64 - 1.0) * ell)
}

/// `(σ_W²/2)(1/D - 1/σ²)`, the Gaussian loss with unboundedly many agents.
pub fn exact_gaussian_loss_inf(sigma2: f64, sigma_w2: f64, d: f64) -> BoundResult {
    BoundResult::valid(FormulaId::ExactGaussInf, 0.5 * sigma_w2 * (sigma2 - d) / (d * sigma2))
}

/// Inputs shared by the remote lower bounds at noise variance `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemoteTerms {
    /// Entropy power of the source.
    pub n_x: f64,
    pub n_y: f64,
    pub n_v: f64,
    pub mmse: f64,
    pub s: f64,
}

impl RemoteTerms {
    pub fn new(info: &InfoSummary, channel: &ChannelSummary) -> Self {
        Self {
            n_x: info.entropy_power,
            n_y: channel.n_y,
            n_v: channel.n_v,
            mmse: channel.mmse,
            s: channel.s,
        }
    }
}

fn remote_pair(
    id: FormulaId,
    t: &RemoteTerms,
    d: f64,
    first_num: f64,
    second_num: f64,
) -> BoundResult {
    let denom = t.n_y - t.n_x * t.s / d;
    if !(denom > 0.0) {
        return BoundResult::outside(id, Region::Degenerate("denominator nonpositive".into()));
    }
    if d <= t.mmse {
        return BoundResult::outside(id, Region::BelowDmin);
    }
    BoundResult::valid(id, 0.5 * log_plus(first_num / d) + 0.5 * log_plus(second_num / denom))
}

pub fn remote_lb1(t: &RemoteTerms, d: f64) -> BoundResult {
    remote_pair(FormulaId::RemoteLb1, t, d, t.n_v, t.n_y)
}

pub fn remote_lb2(t: &RemoteTerms, d: f64) -> BoundResult {
    remote_pair(FormulaId::RemoteLb2, t, d, t.n_x, t.n_x)
}

pub fn remote_lb_tight(t: &RemoteTerms, d: f64) -> BoundResult {
    let id = FormulaId::RemoteLbTight;
    if d <= t.mmse {
        return BoundResult::outside(id, Region::BelowDmin);
    }
    BoundResult::valid(id, 0.5 * log_plus(t.n_v / (d - t.mmse)))
}

/// The cooperation bound without the mmse term; `t.s` must be `σ_W²/M`.
pub fn remote_lb_weak(t: &RemoteTerms, d: f64) -> BoundResult {
    let id = FormulaId::RemoteLbWeak;
    if d <= t.n_x * t.s / t.n_y {
        return BoundResult::outside(id, Region::BelowDmin);
    }
    let denom = t.n_y - t.n_x * t.s / d;
    BoundResult::valid(id, 0.5 * log_plus(t.n_v / d) + 0.5 * log_plus(t.n_y / denom))
}

pub fn ceo_sumrate_ub(sigma2: f64, sigma_w2: f64, m: u32, d: f64) -> BoundResult {
    let id = FormulaId::CeoSumrateUb;
    if d <= d_min_gaussian(sigma2, sigma_w2, m) {
        return BoundResult::outside(id, Region::BelowDmin);
    }
    if d >= sigma2 {
        return BoundResult::valid(id, 0.0);
    }
    let (_, ell) = pole_terms(sigma2, sigma_w2 / m as f64, d);
    BoundResult::valid(id, 0.5 * (sigma2 / d).ln() + 0.5 * m as f64 * ell)
}

/// Upper bound on the rate loss from the cooperation bound with mmse.
///
/// The value is computed as `(M/2)ℓ + ½ln(1 + u)` with
/// `u = (D·gap - mmse(σ² - D)) / (N(V)·D)` and `gap = σ² - mmse - N(V)`,
/// which is the first displayed form regrouped. Both displayed forms are
/// also evaluated literally and must agree with it.
pub fn rateloss_ub_tight(
    sigma2: f64,
    sigma_w2: f64,
    m: u32,
    t: &RemoteTerms,
    d: f64,
) -> BoundResult {
    let id = FormulaId::UbTight;
    if d <= d_min_gaussian(sigma2, sigma_w2, m) {
        return BoundResult::outside(id, Region::BelowDmin);
    }
    if d >= t.mmse + t.n_v {
        return BoundResult::outside(id, Region::AboveRegion);
    }
    let mf = m as f64;
    let (_, ell) = pole_terms(sigma2, sigma_w2 / mf, d);
    let gap = sigma2 - t.mmse - t.n_v;
    let u = (d * gap - t.mmse * (sigma2 - d)) / (t.n_v * d);
    let value = 0.5 * mf * ell + 0.5 * u.ln_1p();

    let tail = 0.5 * (sigma2 / t.n_v).ln() - 0.5 * (d / (d - t.mmse)).ln();
    let first = 0.5 * mf * ell + tail;
    let mut forms = vec![first];
    if m > 1 {
        let l_n = 0.5 * (mf - 1.0) * ell;
        forms.push(mf / (mf - 1.0) * l_n + tail);
    }
    for f in forms {
        if (f - value).abs() > 1e-9 * value.abs().max(1.0) {
            return BoundResult::outside(id, Region::Degenerate("forms disagree".into()));
        }
    }
    BoundResult::valid(id, value)
}

/// `½ln(σ²/N(X)) + (σ_W²/2)(1/D - 1/σ²)` for `0 < D < N(X)`.
pub fn rateloss_ub_inf(sigma2: f64, n_x: f64, sigma_w2: f64, d: f64) -> BoundResult {
    let id = FormulaId::UbNew;
    if d >= n_x {
        return BoundResult::outside(id, Region::AboveRegion);
    }
    BoundResult::valid(id, 0.5 * (sigma2 / n_x).ln() + 0.5 * sigma_w2 * (sigma2 - d) / (d * sigma2))
}

/// Lower bound on the rate loss with `M` agents.
pub fn rateloss_lb(sigma2: f64, sigma_w2: f64, m: u32, t: &RemoteTerms, d: f64) -> BoundResult {
    let id = FormulaId::Lb;
    let s = sigma_w2 / m as f64;
    let lower = sigma2 * s / (sigma2 + s);
    let upper = t.n_x * s / (t.n_y - t.n_x);
    if !(upper > lower) {
        return BoundResult::outside(id, Region::Degenerate("empty region".into()));
    }
    if d <= lower {
        return BoundResult::outside(id, Region::BelowDmin);
    }
    if d >= upper {
        return BoundResult::outside(id, Region::AboveRegion);
    }
    let mf = m as f64;
    let (x, ell) = pole_terms(sigma2, s, d);
    // N(Y)/N(X) - s/D = (1 - x) + delta.
    let delta = (t.n_y - t.n_x) / t.n_x - s / sigma2;
    let value = 0.5 * (mf - 1.0) * ell - 0.5 * mf * (delta / (1.0 - x)).ln_1p()
        - 0.5 * (sigma2 / t.n_x).ln();
    BoundResult::valid(id, value)
}

/// `(σ_W²/2)(1/D - J) - ½ln(σ²/N(X))` for `0 < D < 1/J`.
pub fn rateloss_lb_inf(
    sigma2: f64,
    info: &InfoSummary,
    sigma_w2: f64,
    d: f64,
) -> Result<BoundResult, BoundsError> {
    let id = FormulaId::LbInf;
    let j = info.fisher.finite().ok_or(BoundsError::InfiniteFisher)?;
    if d >= 1.0 / j {
        return Ok(BoundResult::outside(id, Region::AboveRegion));
    }
    Ok(BoundResult::valid(
        id,
        0.5 * sigma_w2 * (1.0 / d - j) - 0.5 * (sigma2 / info.entropy_power).ln(),
    ))
}

pub fn rateloss_ub_prev(sigma2: f64, sigma_w2: f64, m: u32, d: f64) -> BoundResult {
    let id = FormulaId::UbPrev;
    let mf = m as f64;
    let s = sigma_w2 / mf;
    let (x, ell) = pole_terms(sigma2, s, d);
    if !(x < 1.0) {
        return BoundResult::outside(id, Region::BelowDmin);
    }
    let slope = (sigma2 - d) / (d * sigma2);
    let spread = d + 2.0 * d.sqrt() * sigma_w2.sqrt() + s;
    let value = 0.5 * (mf - 1.0) * ell + 0.5 * (slope * spread / (1.0 - x)).ln_1p();
    BoundResult::valid(id, value)
}

pub fn rateloss_ub_prev_inf(sigma2: f64, sigma_w2: f64, d: f64) -> BoundResult {
    let slope = (sigma2 - d) / (d * sigma2);
    let value = 0.5 * sigma_w2 * slope + 0.5 * (slope * (d + 2.0 * (d * sigma_w2).sqrt())).ln_1p();
    BoundResult::valid(FormulaId::UbPrevInf, value)
}

/// Evaluates every bound for one source, noise level and number of agents.
/// The channel quantities are computed once, at construction.
#[derive(Debug, Clone)]
pub struct BoundEvaluator {
    info: InfoSummary,
    sigma_w2: f64,
    agents: Agents,
    channel: Option<ChannelSummary>,
}

impl BoundEvaluator {
    pub fn new(
        source: &SourceModel,
        sigma_w2: f64,
        agents: Agents,
        config: QuadConfig,
    ) -> Result<Self, BoundsError> {
        if !(sigma_w2 > 0.0) || !sigma_w2.is_finite() {
            return Err(BoundsError::InvalidInput(format!(
                "noise variance must be positive, got {sigma_w2}"
            )));
        }
        let info = info_summary(source)?;
        let channel = match agents {
            Agents::Finite(m) => Some(
                SmoothedChannel::new(source.clone(), sigma_w2 / m as f64, config)?.summary()?,
            ),
            Agents::Infinite => None,
        };
        Ok(Self {
            info,
            sigma_w2,
            agents,
            channel,
        })
    }

    /// Assembles an evaluator from precomputed pieces; `channel` must be the
    /// summary at `s = σ_W²/M` and is ignored for unbounded `M`.
    pub fn from_parts(
        info: InfoSummary,
        sigma_w2: f64,
        agents: Agents,
        channel: Option<ChannelSummary>,
    ) -> Result<Self, BoundsError> {
        if let (Agents::Finite(_), None) = (agents, channel) {
            return Err(BoundsError::InvalidInput("finite M needs a channel summary".into()));
        }
        Ok(Self {
            info,
            sigma_w2,
            agents,
            channel: if agents == Agents::Infinite { None } else { channel },
        })
    }

    pub fn info(&self) -> &InfoSummary {
        &self.info
    }

    pub fn channel(&self) -> Option<&ChannelSummary> {
        self.channel.as_ref()
    }

    pub fn agents(&self) -> Agents {
        self.agents
    }

    pub fn sigma_w2(&self) -> f64 {
        self.sigma_w2
    }

    pub fn d_min(&self) -> Option<f64> {
        self.agents
            .finite()
            .map(|m| d_min_gaussian(self.info.sigma2, self.sigma_w2, m))
    }

    /// Formulas that apply to this number of agents.
    pub fn formulas(&self) -> Vec<FormulaId> {
        let limit = self.agents == Agents::Infinite;
        FormulaId::ALL
            .iter()
            .copied()
            .filter(|f| f.is_limit() == limit)
            .collect()
    }

    pub fn remote_terms(&self) -> Option<RemoteTerms> {
        self.channel.as_ref().map(|c| RemoteTerms::new(&self.info, c))
    }

    pub fn evaluate(&self, id: FormulaId, d: f64) -> Result<BoundResult, BoundsError> {
        if !(d > 0.0) || !d.is_finite() {
            return Err(BoundsError::InvalidInput(format!(
                "distortion must be positive, got {d}"
            )));
        }
        let sigma2 = self.info.sigma2;
        let w = self.sigma_w2;
        if id.is_limit() {
            return match id {
                FormulaId::ExactGaussInf => Ok(exact_gaussian_loss_inf(sigma2, w, d)),
                FormulaId::UbNew => Ok(rateloss_ub_inf(sigma2, self.info.entropy_power, w, d)),
                FormulaId::LbInf => rateloss_lb_inf(sigma2, &self.info, w, d),
                _ => Ok(rateloss_ub_prev_inf(sigma2, w, d)),
            };
        }
        let (Agents::Finite(m), Some(t)) = (self.agents, self.remote_terms()) else {
            return Err(BoundsError::FiniteAgentsRequired(id));
        };
        Ok(match id {
            FormulaId::ExactGauss => exact_gaussian_loss(sigma2, w, m, d),
            FormulaId::RemoteLb1 => remote_lb1(&t, d),
            FormulaId::RemoteLb2 => remote_lb2(&t, d),
            FormulaId::RemoteLbTight => remote_lb_tight(&t, d),
            FormulaId::RemoteLbWeak => remote_lb_weak(&t, d),
            FormulaId::CeoSumrateUb => ceo_sumrate_ub(sigma2, w, m, d),
            FormulaId::UbTight => rateloss_ub_tight(sigma2, w, m, &t, d),
            FormulaId::Lb => rateloss_lb(sigma2, w, m, &t, d),
            FormulaId::UbPrev => rateloss_ub_prev(sigma2, w, m, d),
            _ => unreachable!("limit formulas handled above"),
        })
    }

    /// Evaluates every applicable formula. Structural failures (such as
    /// infinite Fisher information) are returned per formula.
    pub fn evaluate_all(&self, d: f64) -> Vec<(FormulaId, Result<BoundResult, BoundsError>)> {
        self.formulas()
            .into_iter()
            .map(|id| (id, self.evaluate(id, d)))
            .collect()
    }
}
