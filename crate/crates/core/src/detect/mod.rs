//! Receiver: coherent primary detection, non-coherent device detectors,
//! direct-link cancellation with ML re-detection, and CFO handling.

pub mod cfo;

use num_complex::Complex64;
use rand::Rng;

use crate::backscatter::BdProfile;
use crate::channel::{complex_normal, frequency_response, ChannelRealization};
use crate::config::{EdgeModel, Modulation};
use crate::ofdm::AllocationMap;

pub use cfo::{compensate_cfo, estimate_cfo, pilot_variance_metric};

/// Per-device detector statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestStatistics {
    Ofsk { r: f64, threshold: f64 },
    Mfsk { r0: f64, r1: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionOutcome {
    pub primary_bits: Vec<u8>,
    pub bd_bits: Vec<u8>,
    pub stats: Vec<TestStatistics>,
    pub used_sic: bool,
}

/// Sum of `|Y[k]|^2` over `bins`.
pub fn energy(freq: &[Complex64], bins: &[usize]) -> f64 {
    bins.iter().map(|&k| freq[k].norm_sqr()).sum()
}

/// Coherent BPSK decision per data bin: bit 1 iff `Re(Y conj(h)) < 0`.
pub fn detect_primary(freq: &[Complex64], map: &AllocationMap, h_est: &[Complex64]) -> Vec<u8> {
    map.data
        .iter()
        .map(|&k| u8::from((freq[k] * h_est[k].conj()).re < 0.0))
        .collect()
}

/// OFSK statistic of `device` (1-based).
pub fn ofsk_statistic(freq: &[Complex64], map: &AllocationMap, device: usize, with_shared: bool) -> f64 {
    energy(freq, &map.designated(device, 0, with_shared))
}

/// Energy detector: bit 1 iff the statistic exceeds `gamma`; equality is a 0.
pub fn detect_ofsk(freq: &[Complex64], map: &AllocationMap, device: usize, gamma: f64, with_shared: bool) -> u8 {
    u8::from(ofsk_statistic(freq, map, device, with_shared) > gamma)
}

/// Slot energies `(R0, R1)` of an MFSK device.
pub fn mfsk_statistics(freq: &[Complex64], map: &AllocationMap, device: usize, with_shared: bool) -> (f64, f64) {
    (
        energy(freq, &map.designated(device, 0, with_shared)),
        energy(freq, &map.designated(device, 1, with_shared)),
    )
}

/// Pairwise energy comparison: bit 0 iff `R0 >= R1`.
pub fn detect_mfsk(freq: &[Complex64], map: &AllocationMap, device: usize, with_shared: bool) -> u8 {
    let (r0, r1) = mfsk_statistics(freq, map, device, with_shared);
    u8::from(r1 > r0)
}

/// Genie per-bin channel seen by the primary symbol: the direct link plus the
/// unshifted reflection of every OFSK device in its bit-0 state.
pub fn reference_channel(real: &ChannelRealization, profiles: &[BdProfile], n: usize) -> Vec<Complex64> {
    let mut h = frequency_response(&real.h_direct, n);
    for (i, prof) in profiles.iter().enumerate() {
        if prof.shift_bit0 != 0 {
            continue;
        }
        let hf = frequency_response(&real.h_forward[i], n);
        let hb = frequency_response(&real.h_back[i], n);
        for k in 0..n {
            h[k] += prof.alpha * hb[k] * hf[k];
        }
    }
    h
}

/// Adds independent `CN(0, var)` errors to a vector of estimates.
pub fn perturb<R: Rng + ?Sized>(values: &[Complex64], var: f64, rng: &mut R) -> Vec<Complex64> {
    if var <= 0.0 {
        return values.to_vec();
    }
    values.iter().map(|v| v + complex_normal(rng, var)).collect()
}

/// Residual after removing `h_est * x_est` on the data bins.
pub fn run_sic(freq: &[Complex64], map: &AllocationMap, h_est: &[Complex64], x_est: &[Complex64]) -> Vec<Complex64> {
    let mut res = freq.to_vec();
    for &k in &map.data {
        res[k] -= h_est[k] * x_est[k];
    }
    res
}

/// Per-bin cascaded channel of one device.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeEstimate {
    pub alpha: Complex64,
    pub forward: Vec<Complex64>,
    pub back: Vec<Complex64>,
}

impl CascadeEstimate {
    pub fn from_realization(real: &ChannelRealization, device_idx: usize, alpha: Complex64, n: usize) -> Self {
        Self {
            alpha,
            forward: frequency_response(&real.h_forward[device_idx], n),
            back: frequency_response(&real.h_back[device_idx], n),
        }
    }
}

/// Spectrum a device contributes when shifting the primary symbol `x` by
/// `shift` bins: `alpha Hb[k] Hf[k-s] X[k-s] exp(j 2 pi s cp / n)`.
/// Band-limited edges drop the part that would wrap past the top bin.
pub fn landing_pattern(
    cascade: &CascadeEstimate,
    x: &[Complex64],
    shift: usize,
    cp_len: usize,
    edge: EdgeModel,
) -> Vec<Complex64> {
    let n = x.len();
    let ramp = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * ((shift * cp_len) % n) as f64 / n as f64);
    (0..n)
        .map(|k| {
            if edge == EdgeModel::BandLimited && k < shift {
                return Complex64::new(0.0, 0.0);
            }
            let src = (k + n - shift % n) % n;
            cascade.alpha * cascade.back[k] * cascade.forward[src] * x[src] * ramp
        })
        .collect()
}

/// The residual patterns a device can leave after cancellation, one per bit.
/// For OFSK the bit-0 reflection is part of the reference channel, so bit 0
/// leaves nothing and bit 1 leaves its shifted copy minus that reflection.
pub fn ml_candidates(
    profile: &BdProfile,
    cascade: &CascadeEstimate,
    x: &[Complex64],
    cp_len: usize,
    edge: EdgeModel,
) -> [Vec<Complex64>; 2] {
    match profile.modulation {
        Modulation::Ofsk => {
            let n = x.len();
            let unshifted = landing_pattern(cascade, x, 0, cp_len, edge);
            let mut one = landing_pattern(cascade, x, profile.shift_bit1, cp_len, edge);
            for k in 0..n {
                one[k] -= unshifted[k];
            }
            [vec![Complex64::new(0.0, 0.0); n], one]
        }
        Modulation::Mfsk => [
            landing_pattern(cascade, x, profile.shift_bit0, cp_len, edge),
            landing_pattern(cascade, x, profile.shift_bit1, cp_len, edge),
        ],
    }
}

/// Index of the candidate closest to the residual over `bins`; ties keep the
/// lower index.
pub fn ml_detect_bd(residual: &[Complex64], bins: &[usize], candidates: &[Vec<Complex64>]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, cand) in candidates.iter().enumerate() {
        let d: f64 = bins.iter().map(|&k| (residual[k] - cand[k]).norm_sqr()).sum();
        if d < best.1 {
            best = (i, d);
        }
    }
    best.0
}

/// All bins an ML decision for `device` looks at: both slots' nulls and
/// owned shared bins.
pub fn ml_bins(map: &AllocationMap, device: usize) -> Vec<usize> {
    let mut bins: Vec<usize> = (0..map.slots()).flat_map(|s| map.designated(device, s, true)).collect();
    bins.sort_unstable();
    bins
}
