//! Numerical integration.
//!
//! Two families of rules live here:
//!
//! * adaptive Gauss–Kronrod (7/15 points) with a worst-interval-first
//!   bisection strategy, in a vector-valued form so that a whole error
//!   matrix can be integrated on a shared set of nodes;
//! * double-exponential rules (tanh-sinh on finite intervals, exp-sinh on
//!   the half line) which tolerate integrable power singularities at the
//!   endpoints, such as `x^alpha` with `alpha > -1`.
//!
//! Gauss–Kronrod never evaluates the integrand at interval endpoints, so
//! callers that split the domain at a singular point never hit it.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for XGK[1], XGK[3], XGK[5] and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Scalar integral estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

/// Vector-valued integral estimate. `error` bounds the max-norm error.
#[derive(Debug, Clone, PartialEq)]
pub struct VecEstimate {
    pub values: Vec<f64>,
    pub error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Stopping rule for the adaptive Gauss–Kronrod integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-12,
            rel: 1e-10,
            max_intervals: 4000,
        }
    }
}

/// Maps the integration variable of a segment to an (anchor, offset) pair.
#[derive(Clone, Copy)]
struct Chart {
    anchor: f64,
    /// Signed length of a graded piece; unused when `grading` is 0.
    length: f64,
    grading: i32,
}

struct Segment {
    chart: Chart,
    a: f64,
    b: f64,
    values: Vec<f64>,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn gk15<F>(f: &mut F, dim: usize, monitored: usize, chart: Chart, a: f64, b: f64, evals: &mut usize) -> Segment
where
    F: FnMut(f64, f64) -> Vec<f64>,
{
    // On graded pieces the parameter t in [0, 1] maps to the offset
    // length * t^grading, which clusters nodes at the anchor.
    let mut f = |t: f64| -> Vec<f64> {
        let Chart { anchor, length, grading } = chart;
        if grading == 0 {
            return f(anchor, t);
        }
        let tp = t.powi(grading - 1);
        let jac = f64::from(grading) * length.abs() * tp;
        let mut v = f(anchor, length * tp * t);
        for x in v.iter_mut() {
            *x *= jac;
        }
        v
    };
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut kronrod = vec![0.0; dim];
    let mut gauss = vec![0.0; dim];

    let fc = f(centre);
    *evals += 1;
    for d in 0..dim {
        kronrod[d] = WGK[7] * fc[d];
        gauss[d] = WG[3] * fc[d];
    }
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let f1 = f(centre - dx);
        let f2 = f(centre + dx);
        *evals += 2;
        for d in 0..dim {
            let s = f1[d] + f2[d];
            kronrod[d] += w * s;
            if j % 2 == 1 {
                gauss[d] += WG[j / 2] * s;
            }
        }
    }
    let mut error = 0.0_f64;
    for d in 0..dim {
        kronrod[d] *= half;
        gauss[d] *= half;
        if d < monitored {
            error = error.max((kronrod[d] - gauss[d]).abs());
        }
    }
    Segment {
        chart,
        a,
        b,
        values: kronrod,
        error,
    }
}

/// Adaptive Gauss–Kronrod integration of a vector-valued function over the
/// panels delimited by consecutive `breaks` (which must be sorted). The
/// integrand must return vectors of length `dim`.
pub fn gauss_kronrod_vec<F>(mut f: F, dim: usize, breaks: &[f64], tol: Tolerance) -> VecEstimate
where
    F: FnMut(f64) -> Vec<f64>,
{
    let pieces: Vec<AnchoredPiece> = breaks
        .windows(2)
        .map(|w| AnchoredPiece {
            anchor: 0.0,
            lo: w[0],
            hi: w[1],
            grading: 0,
        })
        .collect();
    gauss_kronrod_anchored(|_, x| f(x), dim, &pieces, tol)
}

/// The points `anchor + t` for `t` in `[lo, hi]`.
///
/// A piece with `grading = m >= 1` has one end at offset 0 and is integrated
/// in the variable `s` in `[0, 1]` with `t = hi * s^m` (or `lo * s^m`). An
/// integrand behaving like `|t|^alpha` at the anchor becomes
/// `s^(m (alpha + 1) - 1)`, bounded once `m >= 1 / (alpha + 1)`. With
/// `grading = 0` the piece is integrated in `t` directly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchoredPiece {
    pub anchor: f64,
    pub lo: f64,
    pub hi: f64,
    pub grading: i32,
}

/// Grading exponent that makes `|t|^alpha` at least as smooth as `s^1`.
pub fn grading_for(alpha: f64) -> i32 {
    if alpha >= 1.0 {
        1
    } else {
        (2.0 / (alpha + 1.0)).ceil().clamp(1.0, 64.0) as i32
    }
}

/// Splits each panel between consecutive `breaks` at its midpoint and
/// anchors each half at its own break, so offsets from every break are
/// represented exactly however small they get. `gradings[i]` holds the
/// grading exponents of the pieces below and above `breaks[i]`.
pub fn anchored_pieces(breaks: &[f64], gradings: &[(i32, i32)]) -> Vec<AnchoredPiece> {
    let mut pieces = Vec::with_capacity(2 * breaks.len());
    for (i, w) in breaks.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            continue;
        }
        let left = 0.5 * (w[1] - w[0]);
        pieces.push(AnchoredPiece {
            anchor: w[0],
            lo: 0.0,
            hi: left,
            grading: gradings[i].1.max(1),
        });
        pieces.push(AnchoredPiece {
            anchor: w[1],
            lo: (w[0] + left) - w[1],
            hi: 0.0,
            grading: gradings[i + 1].0.max(1),
        });
    }
    pieces
}

/// [`gauss_kronrod_vec`] over anchored pieces. The integrand receives the
/// anchor and the offset separately.
pub fn gauss_kronrod_anchored<F>(f: F, dim: usize, pieces: &[AnchoredPiece], tol: Tolerance) -> VecEstimate
where
    F: FnMut(f64, f64) -> Vec<f64>,
{
    gauss_kronrod_monitored(f, dim, dim, pieces, tol)
}

/// [`gauss_kronrod_anchored`] where only the first `monitored` components
/// enter the error estimate; the rest are integrated along unchecked.
pub fn gauss_kronrod_monitored<F>(mut f: F, dim: usize, monitored: usize, pieces: &[AnchoredPiece], tol: Tolerance) -> VecEstimate
where
    F: FnMut(f64, f64) -> Vec<f64>,
{
    let mut evaluations = 0;
    let mut heap = BinaryHeap::new();
    let mut settled = vec![0.0; dim];
    let mut settled_error = 0.0;

    for p in pieces {
        if !(p.hi > p.lo) {
            continue;
        }
        let seg = if p.grading > 0 {
            let chart = Chart {
                anchor: p.anchor,
                length: if p.lo == 0.0 { p.hi } else { p.lo },
                grading: p.grading,
            };
            gk15(&mut f, dim, monitored, chart, 0.0, 1.0, &mut evaluations)
        } else {
            let chart = Chart {
                anchor: p.anchor,
                length: 0.0,
                grading: 0,
            };
            gk15(&mut f, dim, monitored, chart, p.lo, p.hi, &mut evaluations)
        };
        heap.push(seg);
    }

    let total = |heap: &BinaryHeap<Segment>, settled: &[f64], settled_error: f64| {
        let mut v = settled.to_vec();
        let mut e = settled_error;
        for s in heap.iter() {
            for (acc, x) in v.iter_mut().zip(&s.values) {
                *acc += x;
            }
            e += s.error;
        }
        (v, e)
    };

    let mut converged = false;
    loop {
        let (values, error) = total(&heap, &settled, settled_error);
        if error <= tol.abs.max(tol.rel * max_norm(&values[..monitored])) {
            converged = true;
            break;
        }
        if heap.len() >= tol.max_intervals {
            break;
        }
        let Some(worst) = heap.pop() else {
            break;
        };
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) || (worst.b - worst.a) <= 1e-15 * worst.a.abs().max(worst.b.abs()) {
            // Cannot be split further in floating point.
            for (acc, x) in settled.iter_mut().zip(&worst.values) {
                *acc += x;
            }
            settled_error += worst.error;
            continue;
        }
        heap.push(gk15(&mut f, dim, monitored, worst.chart, worst.a, mid, &mut evaluations));
        heap.push(gk15(&mut f, dim, monitored, worst.chart, mid, worst.b, &mut evaluations));
    }

    let (values, error) = total(&heap, &settled, settled_error);
    VecEstimate {
        values,
        error,
        evaluations,
        converged,
    }
}

/// Scalar adaptive Gauss–Kronrod integration over `[a, b]`.
pub fn gauss_kronrod<F>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Estimate
where
    F: FnMut(f64) -> f64,
{
    let est = gauss_kronrod_vec(|x| vec![f(x)], 1, &[a, b], tol);
    Estimate {
        value: est.values[0],
        error: est.error,
        converged: est.converged,
    }
}

const MAX_DE_LEVEL: usize = 10;

/// Tanh-sinh quadrature of `f` over the finite interval `[a, b]`.
///
/// Nodes near each endpoint are formed from the distance to that endpoint,
/// so power singularities at `a` or `b` are resolved down to the smallest
/// representable offsets.
pub fn tanh_sinh<F>(f: F, a: f64, b: f64, rel_tol: f64) -> Estimate
where
    F: Fn(f64) -> f64,
{
    let width = b - a;
    let half_pi = std::f64::consts::FRAC_PI_2;
    // Term at parameter t; zero when the node collapses onto an endpoint.
    let term = |t: f64| -> f64 {
        let u = half_pi * t.sinh();
        let cosh_u = u.cosh();
        if !cosh_u.is_finite() {
            return 0.0;
        }
        let w = 0.5 * width * half_pi * t.cosh() / (cosh_u * cosh_u);
        // (1 + tanh u) / 2 = 1 / (1 + e^{-2u})
        let x = if u < 0.0 {
            a + width / (1.0 + (-2.0 * u).exp())
        } else {
            b - width / (1.0 + (2.0 * u).exp())
        };
        if x <= a || x >= b || w == 0.0 {
            return 0.0;
        }
        let v = f(x) * w;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    // Nodes reach within the smallest normal doubles of either endpoint.
    double_exponential(term, 6.1, rel_tol)
}

/// Exp-sinh quadrature of `f` over `(origin, ∞)` when `direction > 0`, or
/// over `(-∞, origin)` when `direction < 0`. The integrand is evaluated at
/// the offset `y > 0` from the origin, i.e. `f(y)` integrates
/// `g(origin ± y)`; this keeps tiny offsets exact. `scale` sets the length
/// scale of the substitution.
pub fn half_line<F>(f: F, scale: f64, rel_tol: f64) -> Estimate
where
    F: Fn(f64) -> f64,
{
    let half_pi = std::f64::consts::FRAC_PI_2;
    let term = |t: f64| -> f64 {
        let y = scale * (half_pi * t.sinh()).exp();
        if y == 0.0 || !y.is_finite() {
            return 0.0;
        }
        let w = y * half_pi * t.cosh();
        let v = f(y) * w;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    // Left tail reaches offsets near the smallest normal doubles.
    double_exponential_asym(term, -6.6, 4.0, rel_tol)
}

fn double_exponential<T: Fn(f64) -> f64>(term: T, t_max: f64, rel_tol: f64) -> Estimate {
    double_exponential_asym(term, -t_max, t_max, rel_tol)
}

fn double_exponential_asym<T: Fn(f64) -> f64>(term: T, t_lo: f64, t_hi: f64, rel_tol: f64) -> Estimate {
    let mut h = 0.5;
    let mut sum = 0.0;
    let mut k = (t_lo / h).ceil() as i64;
    while (k as f64) * h <= t_hi {
        sum += term(k as f64 * h);
        k += 1;
    }
    let mut estimate = sum * h;
    let mut error = f64::INFINITY;
    for _level in 1..=MAX_DE_LEVEL {
        h *= 0.5;
        // New nodes are the odd multiples of the halved step.
        let mut fresh = 0.0;
        let mut k = (t_lo / h).ceil() as i64;
        if k % 2 == 0 {
            k += 1;
        }
        while (k as f64) * h <= t_hi {
            fresh += term(k as f64 * h);
            k += 2;
        }
        sum += fresh;
        let next = sum * h;
        error = (next - estimate).abs();
        estimate = next;
        if error <= rel_tol * estimate.abs() {
            return Estimate {
                value: estimate,
                error,
                converged: true,
            };
        }
    }
    Estimate {
        value: estimate,
        error,
        converged: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_kronrod_polynomial_is_exact() {
        let est = gauss_kronrod(|x| 3.0 * x * x - 2.0 * x + 1.0, -1.0, 2.0, Tolerance::default());
        // x^3 - x^2 + x on [-1, 2] = (8 - 4 + 2) - (-1 - 1 - 1) = 9
        assert!((est.value - 9.0).abs() < 1e-13);
        assert!(est.converged);
    }

    #[test]
    fn gauss_kronrod_resolves_a_jump() {
        let tol = Tolerance {
            abs: 1e-11,
            rel: 0.0,
            max_intervals: 4000,
        };
        let est = gauss_kronrod(|x| if x < 0.3 { 1.0 } else { 0.0 }, 0.0, 1.0, tol);
        assert!((est.value - 0.3).abs() < 1e-10, "{est:?}");
    }

    #[test]
    fn vector_integrand_shares_nodes() {
        let est = gauss_kronrod_vec(|x| vec![x.sin(), x.cos()], 2, &[0.0, 1.0, std::f64::consts::PI], Tolerance::default());
        assert!((est.values[0] - 2.0).abs() < 1e-12);
        assert!(est.values[1].abs() < 1e-12);
    }

    #[test]
    fn tanh_sinh_endpoint_singularity() {
        // ∫_0^1 x^{-0.9} dx = 10
        let est = tanh_sinh(|x| x.powf(-0.9), 0.0, 1.0, 1e-12);
        assert!((est.value - 10.0).abs() < 1e-8, "{est:?}");
    }

    #[test]
    fn half_line_gaussian_and_singular() {
        let est = half_line(|y| (-0.5 * y * y).exp(), 1.0, 1e-13);
        let want = (std::f64::consts::PI / 2.0).sqrt();
        assert!((est.value - want).abs() < 1e-12 * want, "{est:?}");

        // ∫_0^∞ y^{-0.5} e^{-y} dy = Γ(1/2) = √π
        let est = half_line(|y| y.powf(-0.5) * (-y).exp(), 1.0, 1e-13);
        assert!((est.value - std::f64::consts::PI.sqrt()).abs() < 1e-11, "{est:?}");
    }

    #[test]
    fn grading_exponents() {
        assert_eq!(grading_for(f64::INFINITY), 1);
        assert_eq!(grading_for(2.0), 1);
        assert_eq!(grading_for(0.0), 2);
        assert_eq!(grading_for(-0.5), 4);
        assert_eq!(grading_for(-0.85), 14);
    }

    #[test]
    fn anchored_singularity_far_from_origin() {
        // ∫ |x - c|^{-0.85} over [c - 1, c + 1] = 2 / 0.15
        let c = 1.0e6 + 0.3;
        let g = grading_for(-0.85);
        let pieces = anchored_pieces(&[c - 1.0, c, c + 1.0], &[(1, 1), (g, g), (1, 1)]);
        assert_eq!(pieces.len(), 4);
        let est = gauss_kronrod_anchored(
            |anchor, off| vec![((anchor - c) + off).abs().powf(-0.85)],
            1,
            &pieces,
            Tolerance {
                abs: 1e-12,
                rel: 1e-12,
                max_intervals: 500,
            },
        );
        let want = 2.0 / 0.15;
        assert!((est.values[0] - want).abs() < 1e-9 * want, "{est:?}");
    }
}
