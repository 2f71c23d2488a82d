//! Characteristic functions of exponential mixtures and CDF recovery by
//! Gil-Pelaez inversion.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::quad::adaptive;
use crate::error::{Error, Result};

/// Truncation rule for the inversion integral: stop at the first `T` with
/// `|cf(T)| / T` below this value.
pub const TRUNCATION: f64 = 1e-12;
/// Absolute error target of one CDF evaluation.
pub const CDF_TOLERANCE: f64 = 1e-8;
const PANEL_TOLERANCE: f64 = 1e-10;
const MAX_PANELS: usize = 2_000_000;

pub trait CharacteristicFunction {
    fn eval(&self, t: f64) -> Complex64;
    /// `|cf(t)|`.
    fn magnitude(&self, t: f64) -> f64;
    /// Upper bound on `|d arg cf / dt|` over `[t, inf)`.
    fn phase_rate(&self, t: f64) -> f64;
    /// Largest scale parameter; sets the width of the CF's main lobe.
    fn max_scale(&self) -> f64;
}

/// Distribution of a sum of independent exponentials, stored as
/// `(mean, multiplicity)` pairs: `cf(t) = prod (1 - j t mean)^(-multiplicity)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpMixtureCf {
    terms: Vec<(f64, u32)>,
}

impl ExpMixtureCf {
    /// From exponential rates (inverse means), each with multiplicity one.
    pub fn from_rates(rates: &[f64]) -> Self {
        Self::from_means(rates.iter().map(|&r| (1.0 / r, 1)).collect())
    }

    /// Zero-mean or zero-multiplicity terms are dropped (they are point masses at 0).
    pub fn from_means(terms: Vec<(f64, u32)>) -> Self {
        Self { terms: terms.into_iter().filter(|&(m, k)| m > 0.0 && k > 0).collect() }
    }

    /// Sum of `k` i.i.d. exponentials with the given mean.
    pub fn erlang(k: u32, mean: f64) -> Self {
        Self::from_means(vec![(mean, k)])
    }

    pub fn terms(&self) -> &[(f64, u32)] {
        &self.terms
    }

    pub fn mean(&self) -> f64 {
        self.terms.iter().map(|&(m, k)| m * k as f64).sum()
    }
}

impl CharacteristicFunction for ExpMixtureCf {
    fn eval(&self, t: f64) -> Complex64 {
        let mut acc = Complex64::new(1.0, 0.0);
        for &(m, k) in &self.terms {
            let tm = t * m;
            let z = Complex64::new(1.0, tm) / (1.0 + tm * tm);
            acc *= z.powi(k as i32);
        }
        acc
    }

    fn magnitude(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(m, k)| (1.0 + t * t * m * m).powf(-0.5 * k as f64))
            .product()
    }

    fn phase_rate(&self, t: f64) -> f64 {
        self.terms.iter().map(|&(m, k)| k as f64 * m / (1.0 + t * t * m * m)).sum()
    }

    fn max_scale(&self) -> f64 {
        self.terms.iter().map(|t| t.0).fold(0.0, f64::max)
    }
}

/// Difference `A - B` of two independent exponential mixtures:
/// `cf(t) = cf_A(t) * conj(cf_B(t))`.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceCf {
    pub plus: ExpMixtureCf,
    pub minus: ExpMixtureCf,
}

impl CharacteristicFunction for DifferenceCf {
    fn eval(&self, t: f64) -> Complex64 {
        self.plus.eval(t) * self.minus.eval(t).conj()
    }

    fn magnitude(&self, t: f64) -> f64 {
        self.plus.magnitude(t) * self.minus.magnitude(t)
    }

    fn phase_rate(&self, t: f64) -> f64 {
        self.plus.phase_rate(t) + self.minus.phase_rate(t)
    }

    fn max_scale(&self) -> f64 {
        self.plus.max_scale().max(self.minus.max_scale())
    }
}

/// `F(x) = 1/2 - (1/pi) int_0^inf Im(cf(t) e^{-jtx}) / t dt`.
///
/// The integral is cut at the first `T` where `|cf(T)| / T` drops below
/// [`TRUNCATION`]. The head is covered by panels no wider than one period of
/// the local oscillation, each integrated adaptively. Once the CF's own phase
/// varies slowly compared with `e^{-jtx}`, the remaining integral is a sum of
/// alternating half-period cycles; its partial sums are extrapolated with the
/// Wynn epsilon algorithm and the summation stops early when the extrapolated
/// limit is stable.
pub fn cdf_gil_pelaez<C: CharacteristicFunction>(cf: &C, x: f64) -> Result<f64> {
    let scale = cf.max_scale();
    if scale == 0.0 {
        // Point mass at zero.
        return Ok(if x >= 0.0 { 1.0 } else { 0.0 });
    }
    let mut t_end = 1.0 / scale;
    while cf.magnitude(t_end) / t_end >= TRUNCATION {
        t_end *= 2.0;
    }
    let integrand = |t: f64| {
        if t == 0.0 {
            return 0.0;
        }
        let v = cf.eval(t) * Complex64::from_polar(1.0, -t * x);
        v.im / t
    };
    let lobe = 1.0 / scale;
    let ax = x.abs();
    let head_done = |t: f64| ax > 0.0 && cf.phase_rate(t) <= 0.05 * ax;

    let mut edges = vec![0.0];
    let mut a = 0.0;
    while a < t_end && !head_done(a) {
        let rate = cf.phase_rate(a) + ax;
        let by_phase = if rate > 0.0 { 2.0 * PI / rate } else { f64::INFINITY };
        a = (a + by_phase.min(a.max(lobe))).min(t_end);
        edges.push(a);
        if edges.len() > MAX_PANELS {
            return Err(Error::QuadratureNonConvergence { achieved: f64::INFINITY, target: CDF_TOLERANCE });
        }
    }
    let panel_tol = (CDF_TOLERANCE / edges.len() as f64).min(PANEL_TOLERANCE);
    let mut total = 0.0;
    let mut err = 0.0;
    for pair in edges.windows(2) {
        let (v, e) = adaptive(&integrand, pair[0], pair[1], panel_tol, 30);
        total += v;
        err += e;
    }
    if a < t_end {
        let (tail, tail_err) = oscillatory_tail(&integrand, a, t_end, PI / ax)?;
        total += tail;
        err += tail_err;
    }
    if err > CDF_TOLERANCE {
        return Err(Error::QuadratureNonConvergence { achieved: err, target: CDF_TOLERANCE });
    }
    Ok((0.5 - total / PI).clamp(0.0, 1.0))
}

/// Integral over `[start, end]` summed cycle by cycle with extrapolation.
fn oscillatory_tail<F: Fn(f64) -> f64>(f: &F, start: f64, end: f64, cycle: f64) -> Result<(f64, f64)> {
    const MIN_CYCLES: usize = 8;
    const MAX_CYCLES: usize = 200;
    let mut sums = Vec::new();
    let mut acc = 0.0;
    let mut err = 0.0;
    let mut prev_limit = f64::NAN;
    let mut stable = 0;
    let mut t = start;
    while t < end {
        let b = (t + cycle).min(end);
        let (v, e) = adaptive(f, t, b, PANEL_TOLERANCE * 1e-2, 30);
        acc += v;
        err += e;
        t = b;
        sums.push(acc);
        if sums.len() >= MIN_CYCLES {
            let limit = wynn_epsilon(&sums);
            if (limit - prev_limit).abs() < 1e-12 {
                stable += 1;
                if stable >= 2 {
                    return Ok((limit, err + (limit - prev_limit).abs()));
                }
            } else {
                stable = 0;
            }
            prev_limit = limit;
        }
        if sums.len() >= MAX_CYCLES {
            // Fall back to plain summation over the remaining range.
            let (v, e) = adaptive(f, t, end, PANEL_TOLERANCE, 40);
            return Ok((acc + v, err + e));
        }
    }
    Ok((acc, err))
}

/// Wynn epsilon extrapolation of a sequence of partial sums. Returns the
/// highest even-column entry of the table.
pub fn wynn_epsilon(s: &[f64]) -> f64 {
    let n = s.len();
    let mut prev = vec![0.0; n + 1];
    let mut cur: Vec<f64> = s.to_vec();
    let mut best = *s.last().unwrap();
    for k in 1..n {
        let mut next = Vec::with_capacity(n - k);
        for j in 0..n - k {
            let d = cur[j + 1] - cur[j];
            if d == 0.0 {
                return cur[j + 1];
            }
            next.push(prev[j + 1] + 1.0 / d);
        }
        prev = cur;
        cur = next;
        if k % 2 == 0 {
            best = *cur.last().unwrap();
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, Gamma};

    #[test]
    fn wynn_accelerates_alternating_series() {
        // ln 2 = 1 - 1/2 + 1/3 - ...
        let mut acc = 0.0;
        let sums: Vec<f64> = (1..=12)
            .map(|k| {
                acc += if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
                acc
            })
            .collect();
        let w = wynn_epsilon(&sums);
        assert!((w - 2f64.ln()).abs() < 1e-8);
    }

    #[test]
    fn cf_basics() {
        let cf = ExpMixtureCf::from_means(vec![(0.3, 2), (1.7, 1), (0.01, 16)]);
        assert_eq!(cf.eval(0.0), Complex64::new(1.0, 0.0));
        for t in [0.1, 1.0, 7.0, 100.0] {
            assert!(cf.eval(t).norm() <= 1.0);
            assert!((cf.eval(t).norm() - cf.magnitude(t)).abs() < 1e-14);
        }
        assert!((cf.mean() - (0.6 + 1.7 + 0.16)).abs() < 1e-14);
        assert_eq!(ExpMixtureCf::from_rates(&[2.0]).terms(), &[(0.5, 1)]);
    }

    #[test]
    fn single_exponential() {
        let lambda = 2.5;
        let cf = ExpMixtureCf::from_rates(&[lambda]);
        for x in [0.05, 0.3, 1.0, 2.0] {
            let f = cdf_gil_pelaez(&cf, x).unwrap();
            assert!((f - (1.0 - (-lambda * x).exp())).abs() < 1e-8, "x={x} f={f}");
        }
    }

    #[test]
    fn erlang_matches_incomplete_gamma() {
        for (k, mean) in [(2u32, 1.0), (16, 0.05), (32, 0.3), (5, 2.0)] {
            let cf = ExpMixtureCf::erlang(k, mean);
            let oracle = Gamma::new(k as f64, 1.0 / mean).unwrap();
            for q in [0.2, 0.6, 1.0, 1.4, 2.5] {
                let x = q * k as f64 * mean;
                let f = cdf_gil_pelaez(&cf, x).unwrap();
                assert!((f - oracle.cdf(x)).abs() < 1e-6, "k={k} x={x}");
            }
        }
    }

    #[test]
    fn limits_and_monotone() {
        let cf = ExpMixtureCf::from_means(vec![(0.5, 3), (0.05, 20)]);
        let mean = cf.mean();
        assert!(cdf_gil_pelaez(&cf, -50.0 * mean).unwrap() < 1e-8);
        assert!(cdf_gil_pelaez(&cf, 50.0 * mean).unwrap() > 1.0 - 1e-8);
        let mut prev = 0.0;
        for i in 0..100 {
            let f = cdf_gil_pelaez(&cf, 4.0 * mean * i as f64 / 99.0).unwrap();
            assert!(f >= prev - 1e-9);
            prev = f;
        }
    }

    #[test]
    fn difference_of_identical_is_half() {
        let a = ExpMixtureCf::from_means(vec![(0.2, 8), (1.0, 2)]);
        let d = DifferenceCf { plus: a.clone(), minus: a };
        assert!((cdf_gil_pelaez(&d, 0.0).unwrap() - 0.5).abs() < 1e-9);
        // Exp(1) - Exp(1) is Laplace(0, 1): F(x) = 1 - e^{-x}/2 for x >= 0.
        let e = ExpMixtureCf::erlang(1, 1.0);
        let d = DifferenceCf { plus: e.clone(), minus: e };
        assert!((cdf_gil_pelaez(&d, 0.7).unwrap() - (1.0 - 0.5 * (-0.7f64).exp())).abs() < 1e-7);
    }
}
