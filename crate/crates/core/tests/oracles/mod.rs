//! Brute-force reference computations that share no code with the library.
#![allow(dead_code)]

use std::f64::consts::{PI, SQRT_2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Gaussian,
    Laplace,
    Uniform,
}

/// Unit-variance, zero-mean densities written out directly.
pub fn pdf(shape: Shape, x: f64) -> f64 {
    match shape {
        Shape::Gaussian => (-0.5 * x * x).exp() / (2.0 * PI).sqrt(),
        Shape::Laplace => {
            let b = 0.5f64.sqrt();
            (-x.abs() / b).exp() / (2.0 * b)
        }
        Shape::Uniform => {
            let a = 3f64.sqrt();
            if x.abs() <= a {
                0.5 / a
            } else {
                0.0
            }
        }
    }
}

/// Support endpoints and interior kinks, for splitting integrals.
pub fn support(shape: Shape) -> (f64, f64, Vec<f64>) {
    match shape {
        Shape::Gaussian => (-40.0, 40.0, vec![]),
        Shape::Laplace => (-40.0, 40.0, vec![0.0]),
        Shape::Uniform => (-3f64.sqrt(), 3f64.sqrt(), vec![]),
    }
}

/// Composite Simpson with `n` (rounded up to even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Simpson over `[a, b]` split at the given interior points.
pub fn simpson_split(f: impl Fn(f64) -> f64, a: f64, b: f64, cuts: &[f64], n: usize) -> f64 {
    let mut pts = vec![a];
    pts.extend(cuts.iter().cloned().filter(|&c| c > a && c < b));
    pts.push(b);
    pts.windows(2)
        .map(|w| simpson(&f, w[0], w[1], ((n as f64) * (w[1] - w[0]) / (b - a)).ceil() as usize + 2))
        .sum()
}

fn gauss_kernel(s: f64, d: f64) -> f64 {
    (-0.5 * d * d / s).exp() / (2.0 * PI * s).sqrt()
}

/// Trapezoidal convolution on a uniform grid `lo, lo + step, ..., hi`.
pub fn trapezoid_convolution(shape: Shape, s: f64, y: f64, lo: f64, hi: f64, step: f64) -> f64 {
    let n = ((hi - lo) / step).round() as usize;
    let mut acc = 0.0;
    for i in 0..=n {
        let x = lo + i as f64 * step;
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        acc += w * pdf(shape, x) * gauss_kernel(s, y - x);
    }
    acc * step
}

/// `(p_Y(y), E[X|y], Var(X|y))` as ratios of dense Simpson integrals.
pub fn ratio_moments(shape: Shape, s: f64, y: f64, n: usize) -> (f64, f64, f64) {
    let (lo, hi, cuts) = support(shape);
    let r = 14.0 * s.sqrt();
    let (a, b) = ((y - r).max(lo), (y + r).min(hi));
    let (a, b) = if a < b { (a, b) } else if y > hi { (hi - 2.0 * r, hi) } else { (lo, lo + 2.0 * r) };
    let (a, b) = (a.max(lo), b.min(hi));
    let z = simpson_split(|x| pdf(shape, x) * gauss_kernel(s, y - x), a, b, &cuts, n);
    let m1 = simpson_split(|x| x * pdf(shape, x) * gauss_kernel(s, y - x), a, b, &cuts, n) / z;
    let m2 = simpson_split(
        |x| (x - m1) * (x - m1) * pdf(shape, x) * gauss_kernel(s, y - x),
        a,
        b,
        &cuts,
        n,
    ) / z;
    (z, m1, m2)
}

fn phi_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Output density from erf closed forms.
pub fn output_density_closed(shape: Shape, s: f64, y: f64) -> f64 {
    let sd = s.sqrt();
    match shape {
        Shape::Gaussian => gauss_kernel(1.0 + s, y),
        Shape::Uniform => {
            let a = 3f64.sqrt();
            let (u, l) = ((y + a) / sd, (y - a) / sd);
            // Difference of upper tails when both limits are positive, to avoid cancellation.
            let mass = if l > 0.0 {
                0.5 * (libm::erfc(l / SQRT_2) - libm::erfc(u / SQRT_2))
            } else {
                phi_cdf(u) - phi_cdf(l)
            };
            mass / (2.0 * a)
        }
        Shape::Laplace => {
            let b = 0.5f64.sqrt();
            let t = |sign: f64| {
                let arg = (s / b - sign * y) / (SQRT_2 * sd);
                // e^{s/2b^2 - sign*y/b} erfc(arg), combined in logs to avoid overflow.
                let ln = s / (2.0 * b * b) - sign * y / b;
                (ln + libm::log(libm::erfc(arg))).exp()
            };
            (t(1.0) + t(-1.0)) / (4.0 * b)
        }
    }
}

/// `h(Y)` and `h(V)` where `V = E[X|Y]`, with `h(V)` from the change of
/// variables `v = g(y)`, `dv/dy` by central differences of the ratio mean.
pub fn entropies_by_change_of_variables(shape: Shape, s: f64, y_step: f64, x_n: usize) -> (f64, f64) {
    let (lo, hi, _) = support(shape);
    let reach = if shape == Shape::Uniform { hi } else { 0.0 };
    let r = (12.0 * (1.0 + s).sqrt()).max(reach + 12.0 * s.sqrt());
    let r = if shape == Shape::Laplace { r.max(28.0 + 12.0 * s.sqrt()) } else { r };
    let _ = lo;
    let n = ((2.0 * r) / y_step).ceil() as usize;
    let n = n + n % 2;
    let fd = 1e-4;
    let mut hy = vec![0.0; n + 1];
    let mut jac = vec![0.0; n + 1];
    for (i, (hy_i, jac_i)) in hy.iter_mut().zip(jac.iter_mut()).enumerate() {
        let y = -r + 2.0 * r * i as f64 / n as f64;
        let (p, _, _) = ratio_moments(shape, s, y, x_n);
        if p <= 0.0 {
            continue;
        }
        let (_, m_plus, _) = ratio_moments(shape, s, y + fd, x_n);
        let (_, m_minus, _) = ratio_moments(shape, s, y - fd, x_n);
        let slope = (m_plus - m_minus) / (2.0 * fd);
        *hy_i = -p * p.ln();
        *jac_i = p * slope.ln();
    }
    let h = 2.0 * r / n as f64;
    let integrate = |v: &[f64]| {
        let m = v.len() - 1;
        let mut acc = v[0] + v[m];
        for (i, x) in v.iter().enumerate().take(m).skip(1) {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * x;
        }
        acc * h / 3.0
    };
    let h_y = integrate(&hy);
    (h_y, h_y + integrate(&jac))
}
