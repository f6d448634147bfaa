//! Monte Carlo estimates of channel quantities, used to cross-check the
//! quadrature.
//!
//! Samples are drawn in fixed-size shards. Shard `k` uses a ChaCha8 stream
//! `k` under the user seed, and shard statistics are merged in shard order,
//! so results are bit-identical for a given seed and sample count no matter
//! how the shards are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::smoothing::{Posterior, SmoothedChannel, SmoothingError};

/// Two-sided 99% standard normal quantile.
pub const Z_99: f64 = 2.575_829_303_548_900_4;

pub const SHARD_SIZE: usize = 65_536;
pub const MIN_SAMPLES: usize = 10_000;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum McError {
    #[error("need at least {MIN_SAMPLES} samples, got {0}")]
    TooFewSamples(usize),
    #[error("conditional mean is not increasing near y = {y}; cannot invert it")]
    InversionFailed { y: f64 },
    #[error(transparent)]
    Smoothing(#[from] SmoothingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum McQuantity {
    #[serde(rename = "mc_mmse")]
    Mmse,
    #[serde(rename = "mc_entropy_y")]
    EntropyY,
    #[serde(rename = "mc_entropy_v")]
    EntropyV,
    #[serde(rename = "mc_var_v")]
    VarV,
}

impl McQuantity {
    pub const ALL: [McQuantity; 4] = [
        McQuantity::Mmse,
        McQuantity::EntropyY,
        McQuantity::EntropyV,
        McQuantity::VarV,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            McQuantity::Mmse => "mc_mmse",
            McQuantity::EntropyY => "mc_entropy_y",
            McQuantity::EntropyV => "mc_entropy_v",
            McQuantity::VarV => "mc_var_v",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub quantity: McQuantity,
    pub mean: f64,
    pub half_width_99: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl McEstimate {
    /// Whether `value` lies inside the 99% interval.
    pub fn covers(&self, value: f64) -> bool {
        (value - self.mean).abs() <= self.half_width_99
    }
}

/// Running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if other.n == 0.0 {
            return self;
        }
        if self.n == 0.0 {
            return other;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * other.n / n,
            m2: self.m2 + other.m2 + d * d * self.n * other.n / n,
        }
    }
}

/// Cubic Hermite table of `ln p_Y`, `E[X|y]` and `Var(X|y)` on a uniform grid,
/// with exact slopes from the posterior moments.
#[derive(Debug, Clone)]
struct PosteriorTable {
    lo: f64,
    step: f64,
    s: f64,
    ln_p: Vec<f64>,
    mean: Vec<f64>,
    var: Vec<f64>,
    third: Vec<f64>,
}

fn hermite(f0: f64, d0: f64, f1: f64, d1: f64, h: f64, t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * f0
        + (t3 - 2.0 * t2 + t) * h * d0
        + (-2.0 * t3 + 3.0 * t2) * f1
        + (t3 - t2) * h * d1
}

impl PosteriorTable {
    fn nodes_needed(channel: &SmoothedChannel) -> (f64, f64, usize) {
        let src = channel.source();
        let s = channel.noise();
        let feature = s
            .sqrt()
            .min(src.smooth_scale())
            .min((src.variance() + s).sqrt());
        let step = feature / 16.0;
        let r = channel.y_radius();
        let n = (2.0 * r / step).ceil() as usize + 1;
        (src.mean() - r, 2.0 * r / (n - 1) as f64, n)
    }

    fn build(channel: &SmoothedChannel) -> Result<Self, McError> {
        let (lo, step, n) = Self::nodes_needed(channel);
        let posts: Vec<Posterior> = (0..n)
            .into_par_iter()
            .map(|i| channel.posterior(lo + i as f64 * step))
            .collect::<Result<_, _>>()?;
        for w in posts.windows(2) {
            if !(w[1].mean > w[0].mean) {
                return Err(McError::InversionFailed { y: w[1].y });
            }
        }
        Ok(Self {
            lo,
            step,
            s: channel.noise(),
            ln_p: posts.iter().map(|p| p.ln_density).collect(),
            mean: posts.iter().map(|p| p.mean).collect(),
            var: posts.iter().map(|p| p.var).collect(),
            third: posts.iter().map(|p| p.third).collect(),
        })
    }

    fn cell(&self, y: f64) -> Option<(usize, f64)> {
        let u = (y - self.lo) / self.step;
        let last = self.ln_p.len() - 1;
        if !(u >= 0.0 && u <= last as f64) {
            return None;
        }
        let i = (u.floor() as usize).min(last - 1);
        Some((i, u - i as f64))
    }

    fn y_at(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.step
    }

    fn mean_at(&self, i: usize, t: f64) -> f64 {
        let s = self.s;
        hermite(
            self.mean[i],
            self.var[i] / s,
            self.mean[i + 1],
            self.var[i + 1] / s,
            self.step,
            t,
        )
    }

    /// `(ln p_Y, E[X|y], Var(X|y))` at a point inside the table.
    fn eval(&self, i: usize, t: f64) -> (f64, f64, f64) {
        let s = self.s;
        let (y0, y1) = (self.y_at(i), self.y_at(i + 1));
        let ln_p = hermite(
            self.ln_p[i],
            (self.mean[i] - y0) / s,
            self.ln_p[i + 1],
            (self.mean[i + 1] - y1) / s,
            self.step,
            t,
        );
        let var = hermite(
            self.var[i],
            self.third[i] / s,
            self.var[i + 1],
            self.third[i + 1] / s,
            self.step,
            t,
        );
        (ln_p, self.mean_at(i, t), var)
    }

    /// Solves `E[X|y] = v` for the cell and offset of `y`.
    fn invert_mean(&self, v: f64) -> Result<(usize, f64), McError> {
        let k = self.mean.partition_point(|&m| m <= v);
        if k == 0 || k == self.mean.len() {
            return Err(McError::InversionFailed {
                y: if k == 0 { self.lo } else { self.y_at(k - 1) },
            });
        }
        let i = k - 1;
        let (mut a, mut b) = (0.0, 1.0);
        for _ in 0..64 {
            let mid = 0.5 * (a + b);
            if self.mean_at(i, mid) <= v {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok((i, 0.5 * (a + b)))
    }
}

enum Lookup<'a> {
    Table(&'a PosteriorTable),
    Direct,
}

struct Sampler<'a> {
    channel: &'a SmoothedChannel,
    lookup: Lookup<'a>,
}

impl Sampler<'_> {
    /// Per-sample contributions for each requested quantity.
    fn contributions(
        &self,
        x: f64,
        y: f64,
        wanted: &[McQuantity],
        out: &mut [f64],
    ) -> Result<(), McError> {
        let s = self.channel.noise();
        let mu = self.channel.source().mean();
        let table_hit = match &self.lookup {
            Lookup::Table(t) => t.cell(y).map(|(i, f)| (*t, i, f)),
            Lookup::Direct => None,
        };
        let (ln_p, mean, _) = match table_hit {
            Some((t, i, f)) => t.eval(i, f),
            None => {
                let p = self.channel.posterior(y)?;
                (p.ln_density, p.mean, p.var)
            }
        };
        for (slot, q) in out.iter_mut().zip(wanted) {
            *slot = match q {
                McQuantity::Mmse => (x - mean) * (x - mean),
                McQuantity::EntropyY => -ln_p,
                McQuantity::VarV => (mean - mu) * (mean - mu),
                McQuantity::EntropyV => {
                    // Recover y from v = E[X|y] and use p_V(v) = p_Y(y) s / Var(X|y).
                    let (ln_p_inv, var_inv) = match table_hit {
                        Some((t, _, _)) => {
                            let (i, f) = t.invert_mean(mean)?;
                            let (lp, _, vr) = t.eval(i, f);
                            (lp, vr)
                        }
                        None => {
                            let y_inv = self.invert_direct(mean, y)?;
                            let p = self.channel.posterior(y_inv)?;
                            (p.ln_density, p.var)
                        }
                    };
                    -(ln_p_inv + s.ln() - var_inv.ln())
                }
            };
        }
        Ok(())
    }

    fn invert_direct(&self, v: f64, hint: f64) -> Result<f64, McError> {
        let s = self.channel.noise();
        let width = s.sqrt().max(1e-8);
        let mean = |y: f64| self.channel.posterior(y).map(|p| p.mean);
        let (mut a, mut b) = (hint - width, hint + width);
        let mut grow = 0;
        while mean(a)? > v {
            a -= width * (1 << grow) as f64;
            grow += 1;
            if grow > 60 {
                return Err(McError::InversionFailed { y: a });
            }
        }
        grow = 0;
        while mean(b)? < v {
            b += width * (1 << grow) as f64;
            grow += 1;
            if grow > 60 {
                return Err(McError::InversionFailed { y: b });
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if mean(mid)? <= v {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok(0.5 * (a + b))
    }
}

/// Estimates several quantities from one set of samples.
pub fn estimate_many(
    channel: &SmoothedChannel,
    wanted: &[McQuantity],
    n: usize,
    seed: u64,
) -> Result<Vec<McEstimate>, McError> {
    if n < MIN_SAMPLES {
        return Err(McError::TooFewSamples(n));
    }
    let (_, _, table_nodes) = PosteriorTable::nodes_needed(channel);
    let table = if table_nodes <= n {
        Some(PosteriorTable::build(channel)?)
    } else {
        None
    };
    let sampler = Sampler {
        channel,
        lookup: match &table {
            Some(t) => Lookup::Table(t),
            None => Lookup::Direct,
        },
    };
    let source = channel.source();
    let sd = channel.noise().sqrt();
    let shards = n.div_ceil(SHARD_SIZE);
    let per_shard: Vec<Vec<Moments>> = (0..shards)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let count = SHARD_SIZE.min(n - k * SHARD_SIZE);
            let mut acc = vec![Moments::default(); wanted.len()];
            let mut buf = vec![0.0; wanted.len()];
            for _ in 0..count {
                let x = source.sample(&mut rng);
                let w: f64 = StandardNormal.sample(&mut rng);
                sampler.contributions(x, x + sd * w, wanted, &mut buf)?;
                for (m, &v) in acc.iter_mut().zip(&buf) {
                    m.push(v);
                }
            }
            Ok(acc)
        })
        .collect::<Result<_, McError>>()?;

    let mut total = vec![Moments::default(); wanted.len()];
    for shard in per_shard {
        for (t, m) in total.iter_mut().zip(shard) {
            *t = t.merge(m);
        }
    }
    Ok(wanted
        .iter()
        .zip(total)
        .map(|(&quantity, m)| {
            let var = m.m2 / (m.n - 1.0);
            McEstimate {
                quantity,
                mean: m.mean,
                half_width_99: Z_99 * (var / m.n).sqrt(),
                n_samples: n,
                seed,
            }
        })
        .collect())
}

fn single(channel: &SmoothedChannel, q: McQuantity, n: usize, seed: u64) -> Result<McEstimate, McError> {
    Ok(estimate_many(channel, &[q], n, seed)?.remove(0))
}

pub fn mc_mmse(channel: &SmoothedChannel, n: usize, seed: u64) -> Result<McEstimate, McError> {
    single(channel, McQuantity::Mmse, n, seed)
}

pub fn mc_entropy_y(channel: &SmoothedChannel, n: usize, seed: u64) -> Result<McEstimate, McError> {
    single(channel, McQuantity::EntropyY, n, seed)
}

pub fn mc_entropy_v(channel: &SmoothedChannel, n: usize, seed: u64) -> Result<McEstimate, McError> {
    single(channel, McQuantity::EntropyV, n, seed)
}

pub fn mc_var_v(channel: &SmoothedChannel, n: usize, seed: u64) -> Result<McEstimate, McError> {
    single(channel, McQuantity::VarV, n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smoothing::QuadConfig;
    use crate::sources::{make_source, SourceKind};

    fn channel(kind: SourceKind, s: f64) -> SmoothedChannel {
        SmoothedChannel::new(make_source(kind, 1.0).unwrap(), s, QuadConfig::default()).unwrap()
    }

    #[test]
    fn pooled_moments_match_single_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let mut whole = Moments::default();
        xs.iter().for_each(|&x| whole.push(x));
        let (mut a, mut b) = (Moments::default(), Moments::default());
        xs[..313].iter().for_each(|&x| a.push(x));
        xs[313..].iter().for_each(|&x| b.push(x));
        let merged = a.merge(b);
        assert!((merged.mean - whole.mean).abs() < 1e-12);
        assert!((merged.m2 - whole.m2).abs() < 1e-9 * whole.m2);
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let f = |x: f64| 2.0 * x * x * x - x + 0.5;
        let df = |x: f64| 6.0 * x * x - 1.0;
        let (a, h) = (0.3, 0.7);
        for t in [0.0, 0.25, 0.5, 0.9, 1.0] {
            let got = hermite(f(a), df(a), f(a + h), df(a + h), h, t);
            assert!((got - f(a + t * h)).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_small_sample_counts() {
        let c = channel(SourceKind::Gaussian, 1.0);
        assert_eq!(mc_mmse(&c, 9_999, 1), Err(McError::TooFewSamples(9_999)));
    }

    #[test]
    fn gaussian_estimates_cover_closed_forms() {
        let c = channel(SourceKind::Gaussian, 1.0);
        let est = estimate_many(&c, &McQuantity::ALL, 1_000_000, 42).unwrap();
        let want = [0.5, 0.5 * (4.0 * std::f64::consts::PI * std::f64::consts::E).ln(), 1.072_364_942_924_700_1, 0.5];
        for (e, w) in est.iter().zip(want) {
            assert!(e.covers(w), "{e:?} vs {w}");
            assert!(e.half_width_99 > 0.0);
        }
    }

    #[test]
    fn table_and_direct_paths_agree() {
        let c = channel(SourceKind::Laplace, 0.5);
        let table = PosteriorTable::build(&c).unwrap();
        for y in [-3.0, -0.7, 0.0, 0.31, 2.2] {
            let (i, t) = table.cell(y).unwrap();
            let (lp, m, v) = table.eval(i, t);
            let p = c.posterior(y).unwrap();
            assert!((lp - p.ln_density).abs() < 1e-8, "y={y}");
            assert!((m - p.mean).abs() < 1e-8);
            assert!((v - p.var).abs() < 1e-8);
            let (j, u) = table.invert_mean(p.mean).unwrap();
            assert!((table.y_at(j) + u * table.step - y).abs() < 1e-7);
        }
    }

    #[test]
    fn reproducible_for_fixed_seed() {
        let c = channel(SourceKind::Uniform, 1.0);
        let a = estimate_many(&c, &McQuantity::ALL, 200_000, 7).unwrap();
        let b = estimate_many(&c, &McQuantity::ALL, 200_000, 7).unwrap();
        assert_eq!(a, b);
        let other = estimate_many(&c, &McQuantity::ALL, 200_000, 8).unwrap();
        assert_ne!(a[0].mean, other[0].mean);
    }

    #[test]
    fn nearly_noiseless_mmse_is_tiny() {
        let c = channel(SourceKind::Gaussian, 1e-6);
        let e = mc_mmse(&c, 10_000, 42).unwrap();
        assert!(e.mean < 1e-5);
    }

    #[test]
    fn direct_evaluation_inverts_the_mean() {
        let c = channel(SourceKind::Laplace, 1.0);
        let sampler = Sampler {
            channel: &c,
            lookup: Lookup::Direct,
        };
        let p = c.posterior(1.3).unwrap();
        let y = sampler.invert_direct(p.mean, 0.2).unwrap();
        assert!((y - 1.3).abs() < 1e-9);
    }
}
