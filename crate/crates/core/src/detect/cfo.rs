//! Pilot-based carrier-frequency-offset estimation and compensation.
//!
//! The estimator works on a frame of consecutive CP-prefixed symbols that
//! share one channel. Each candidate offset is removed, the symbols are
//! demodulated and divided by their known pilots, and the normalized spread
//! of those per-bin ratios across the frame is the cost to minimize.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::analytic::threshold::golden_section;
use crate::error::{Error, Result};
use crate::ofdm::Ofdm;

const COARSE_STEP: f64 = 1e-2;
const GRID_STEP: f64 = 1e-3;
const REFINE_TOL: f64 = 1e-5;

/// Removes the phase ramp `exp(j 2 pi eps (i + symbol_index (n + cp)) / n)`.
pub fn compensate_cfo(samples: &mut [Complex64], eps: f64, n: usize, symbol_index: usize, cp_len: usize) {
    crate::channel::inject_cfo(samples, -eps, n, symbol_index, cp_len);
}

/// Pilot-spread cost of a candidate offset. `pilots[i]` is the known
/// spectrum of symbol `i`; its non-zero bins are the pilot positions.
pub fn pilot_variance_metric(symbols: &[Vec<Complex64>], pilots: &[Vec<Complex64>], ofdm: &Ofdm, eps: f64) -> f64 {
    let bins = pilot_bins(pilots, ofdm.n());
    spread(symbols, pilots, &bins, ofdm, eps)
}

fn pilot_bins(pilots: &[Vec<Complex64>], n: usize) -> Vec<usize> {
    (0..n).filter(|&k| pilots.iter().all(|p| p[k] != Complex64::new(0.0, 0.0))).collect()
}

fn spread(symbols: &[Vec<Complex64>], pilots: &[Vec<Complex64>], bins: &[usize], ofdm: &Ofdm, eps: f64) -> f64 {
    let n = ofdm.n();
    let cp = ofdm.cp_len();
    let m = symbols.len() as f64;
    let mut sum = vec![Complex64::new(0.0, 0.0); n];
    let mut power = vec![0.0; n];
    let step = Complex64::from_polar(1.0, -2.0 * PI * eps / n as f64);
    let mut body = vec![Complex64::new(0.0, 0.0); n];
    for (i, (sym, pil)) in symbols.iter().zip(pilots).enumerate() {
        let start = (i * (n + cp) + cp) as f64;
        let mut rot = Complex64::from_polar(1.0, -2.0 * PI * eps * start / n as f64);
        for (b, v) in body.iter_mut().zip(&sym[cp..cp + n]) {
            *b = v * rot;
            rot *= step;
        }
        ofdm.dft_in_place(&mut body);
        for &k in bins {
            let z = body[k] / pil[k];
            sum[k] += z;
            power[k] += z.norm_sqr();
        }
    }
    let total: f64 = bins
        .iter()
        .map(|&k| if power[k] == 0.0 { 0.0 } else { 1.0 - sum[k].norm_sqr() / (m * power[k]) })
        .sum();
    total / bins.len() as f64
}

/// Offset in `[-0.5, 0.5)` minimizing the pilot spread. A coarse scan
/// locates the main lobe, a 1e-3 grid brackets the minimum inside it, and
/// golden-section search refines to 1e-5.
pub fn estimate_cfo(symbols: &[Vec<Complex64>], pilots: &[Vec<Complex64>], ofdm: &Ofdm) -> Result<f64> {
    if symbols.len() < 2 || pilots.len() != symbols.len() {
        return Err(Error::InsufficientPilots { needed: 2, actual: symbols.len().min(pilots.len()) });
    }
    let bins = pilot_bins(pilots, ofdm.n());
    if bins.is_empty() {
        return Err(Error::InsufficientPilots { needed: 1, actual: 0 });
    }
    let cost = |e: f64| spread(symbols, pilots, &bins, ofdm, e);
    let scan = |lo: f64, step: f64, count: usize| {
        (0..count)
            .map(|i| lo + i as f64 * step)
            .map(|e| (e, cost(e)))
            .fold((lo, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
            .0
    };
    let coarse = scan(-0.5, COARSE_STEP, (1.0 / COARSE_STEP).round() as usize);
    let span = (2.0 * COARSE_STEP / GRID_STEP).round() as usize;
    let fine = scan(coarse - COARSE_STEP, GRID_STEP, span + 1);
    golden_section(|e| Ok(cost(e)), fine - GRID_STEP, fine + GRID_STEP, REFINE_TOL)
}
