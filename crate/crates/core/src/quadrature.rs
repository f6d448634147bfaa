//! Gauss-Legendre rules and a globally adaptive integrator for vector-valued
//! integrands.
//!
//! The adaptive scheme estimates the error on each subinterval by comparing
//! the rule applied once against the rule applied on both halves. Intervals
//! are refined worst-first until every component meets
//! `max(abs_tol, rel_tol * |I_k|)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Nodes and weights of an `n`-point Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the rule by Newton iteration on the Legendre three-term recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Calls `visit(x, w)` for every node mapped onto `[a, b]`.
    #[inline]
    pub fn for_each_node(&self, a: f64, b: f64, mut visit: impl FnMut(f64, f64)) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (t, w) in self.nodes.iter().zip(&self.weights) {
            visit(mid + half * t, half * w);
        }
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let mut acc = 0.0;
        self.for_each_node(a, b, |x, w| acc += w * f(x));
        acc
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Tolerances and work limit for [`integrate_adaptive`].
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

/// Result of a vector-valued adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral<const K: usize> {
    pub value: [f64; K],
    pub error: [f64; K],
    pub intervals: usize,
}

/// Raised when the interval budget runs out before the tolerance is met.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NotConverged {
    pub worst_error: f64,
    pub intervals: usize,
}

struct Piece<const K: usize> {
    a: f64,
    b: f64,
    left: [f64; K],
    right: [f64; K],
    error: [f64; K],
    priority: f64,
}

impl<const K: usize> PartialEq for Piece<K> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<const K: usize> Eq for Piece<K> {}
impl<const K: usize> PartialOrd for Piece<K> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const K: usize> Ord for Piece<K> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .total_cmp(&other.priority)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn apply<const K: usize, E>(
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    f: &mut impl FnMut(f64) -> Result<[f64; K], E>,
) -> Result<[f64; K], E> {
    let mut acc = [0.0; K];
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    for (t, w) in rule.nodes.iter().zip(&rule.weights) {
        let v = f(mid + half * t)?;
        for k in 0..K {
            acc[k] += half * w * v[k];
        }
    }
    Ok(acc)
}

fn make_piece<const K: usize, E>(
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    whole: [f64; K],
    f: &mut impl FnMut(f64) -> Result<[f64; K], E>,
) -> Result<Piece<K>, E> {
    let m = 0.5 * (a + b);
    let left = apply(rule, a, m, f)?;
    let right = apply(rule, m, b, f)?;
    let mut error = [0.0; K];
    for k in 0..K {
        error[k] = (left[k] + right[k] - whole[k]).abs();
    }
    Ok(Piece {
        a,
        b,
        left,
        right,
        error,
        priority: 0.0,
    })
}

/// Integrates `f` over the consecutive segments delimited by `breaks`
/// (which must be sorted; at least two entries).
pub fn integrate_adaptive<const K: usize, E>(
    mut f: impl FnMut(f64) -> Result<[f64; K], E>,
    breaks: &[f64],
    rule: &GaussLegendre,
    opts: AdaptiveOptions,
) -> Result<Result<Integral<K>, NotConverged>, E> {
    assert!(breaks.len() >= 2, "need at least one segment");
    let mut heap = BinaryHeap::new();
    let mut total = [0.0; K];
    let mut total_err = [0.0; K];

    for seg in breaks.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        if !(b > a) {
            continue;
        }
        let whole = apply(rule, a, b, &mut f)?;
        let piece = make_piece(rule, a, b, whole, &mut f)?;
        for k in 0..K {
            total[k] += piece.left[k] + piece.right[k];
            total_err[k] += piece.error[k];
        }
        heap.push(piece);
    }

    let scale = |total: &[f64; K]| {
        let mut s = [0.0; K];
        for k in 0..K {
            s[k] = opts.abs_tol.max(opts.rel_tol * total[k].abs());
        }
        s
    };
    let priority_of = |err: &[f64; K], s: &[f64; K]| {
        (0..K).map(|k| err[k] / s[k]).fold(0.0_f64, f64::max)
    };

    // Priorities are assigned once totals are known; rebuild the heap.
    let s0 = scale(&total);
    let mut pieces: Vec<Piece<K>> = heap.into_vec();
    for p in &mut pieces {
        p.priority = priority_of(&p.error, &s0);
    }
    let mut heap: BinaryHeap<Piece<K>> = pieces.into();

    let mut count = heap.len();
    loop {
        let s = scale(&total);
        if (0..K).all(|k| total_err[k] <= s[k]) {
            break;
        }
        if count >= opts.max_intervals {
            let worst = (0..K).map(|k| total_err[k] / s[k]).fold(0.0_f64, f64::max);
            return Ok(Err(NotConverged {
                worst_error: worst,
                intervals: count,
            }));
        }
        let Some(worst) = heap.pop() else { break };
        let m = 0.5 * (worst.a + worst.b);
        let l = make_piece(rule, worst.a, m, worst.left, &mut f)?;
        let r = make_piece(rule, m, worst.b, worst.right, &mut f)?;
        for k in 0..K {
            total[k] += l.left[k] + l.right[k] + r.left[k] + r.right[k]
                - worst.left[k]
                - worst.right[k];
            total_err[k] += l.error[k] + r.error[k] - worst.error[k];
        }
        let s = scale(&total);
        for mut p in [l, r] {
            p.priority = priority_of(&p.error, &s);
            heap.push(p);
        }
        count += 1;
    }

    // Re-sum from the leaves to shed the drift of the running updates.
    let mut value = [0.0; K];
    let mut error = [0.0; K];
    let mut leaves: Vec<Piece<K>> = heap.into_vec();
    leaves.sort_by(|p, q| p.a.total_cmp(&q.a));
    for p in &leaves {
        for k in 0..K {
            value[k] += p.left[k] + p.right[k];
            error[k] += p.error[k];
        }
    }
    Ok(Ok(Integral {
        value,
        error,
        intervals: leaves.len(),
    }))
}
