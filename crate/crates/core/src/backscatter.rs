//! Backscatter devices: reflection coefficients from impedances and the
//! frequency-shifting reflection waveforms.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::config::Modulation;
use crate::error::{Error, Result};
use crate::ofdm::AllocationMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpedancePair {
    pub z_antenna: Complex64,
    pub z_load: Complex64,
}

/// Denominator convention of the reflection coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReflectionFormula {
    /// `(Z_l - Z_a*) / (Z_l - Z_a)`.
    DifferenceDenominator,
    /// Textbook power-wave form `(Z_l - Z_a*) / (Z_l + Z_a)`.
    Conventional,
}

pub fn reflection_coefficient(z: ImpedancePair) -> Result<Complex64> {
    reflection_coefficient_with(z, ReflectionFormula::DifferenceDenominator)
}

pub fn reflection_coefficient_with(z: ImpedancePair, formula: ReflectionFormula) -> Result<Complex64> {
    let den = match formula {
        ReflectionFormula::DifferenceDenominator => z.z_load - z.z_antenna,
        ReflectionFormula::Conventional => z.z_load + z.z_antenna,
    };
    if den.norm() == 0.0 {
        return Err(Error::DegenerateImpedance);
    }
    Ok((z.z_load - z.z_antenna.conj()) / den)
}

/// Closed-form magnitude/phase evaluation from impedance magnitudes and phase
/// angles. The magnitude expression mixes |Z| and |Z|² terms
/// and generally disagrees with [`reflection_coefficient`]; it is kept for
/// cross-reporting only. Returns `(magnitude, phase)`.
pub fn reflection_polar(z: ImpedancePair) -> (f64, f64) {
    let (ra, ta) = z.z_antenna.to_polar();
    let (rl, tl) = z.z_load.to_polar();
    let cross = 2.0 * ra * rl * (ta - tl).cos();
    let magnitude = (ra + rl - cross) / (ra + rl + cross);
    let phase = (2.0 * ra * rl * (ta - tl).sin() / (ra * ra + rl * rl)).atan();
    (magnitude, phase)
}

/// One device's reflection parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BdProfile {
    /// 1-based device index.
    pub index: usize,
    pub alpha: Complex64,
    pub modulation: Modulation,
    pub shift_bit0: usize,
    pub shift_bit1: usize,
}

impl BdProfile {
    /// Device `index`'s shifts as designated by the allocation map.
    pub fn from_map(map: &AllocationMap, index: usize, alpha: Complex64) -> Self {
        let (shift_bit0, shift_bit1) = match map.modulation {
            Modulation::Ofsk => (0, map.shift(index, 0)),
            Modulation::Mfsk => (map.shift(index, 0), map.shift(index, 1)),
        };
        Self { index, alpha, modulation: map.modulation, shift_bit0, shift_bit1 }
    }

    /// Profiles for every device of a map, with coefficients in device order.
    pub fn all(map: &AllocationMap, alpha: &[Complex64]) -> Vec<Self> {
        alpha.iter().enumerate().map(|(i, &a)| Self::from_map(map, i + 1, a)).collect()
    }

    pub fn shift(&self, bit: u8) -> usize {
        if bit == 0 {
            self.shift_bit0
        } else {
            self.shift_bit1
        }
    }
}

/// Reflection waveform over `n_samples` (CP included) for a DFT size `n`:
/// `alpha * exp(j 2 pi s i / n)` with `s` the shift selected by `bit`.
pub fn bd_waveform(profile: &BdProfile, bit: u8, n_samples: usize, n: usize) -> Vec<Complex64> {
    let s = profile.shift(bit);
    if s == 0 {
        return vec![profile.alpha; n_samples];
    }
    (0..n_samples)
        .map(|i| profile.alpha * Complex64::from_polar(1.0, 2.0 * PI * ((s * i) % n) as f64 / n as f64))
        .collect()
}

/// Element-wise product of the incident signal with the device waveform.
pub fn apply_backscatter(
    incident: &[Complex64],
    profile: &BdProfile,
    bit: u8,
    n: usize,
) -> Vec<Complex64> {
    let w = bd_waveform(profile, bit, incident.len(), n);
    incident.iter().zip(&w).map(|(x, b)| x * b).collect()
}
