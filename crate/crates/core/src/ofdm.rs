//! Subcarrier allocation for the four access schemes and the OFDM
//! modulator/demodulator (unitary DFT with cyclic prefix).

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::config::{Modulation, Scheme, ValidatedConfig};
use crate::error::{Error, Result};

/// Role of one subcarrier index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// Carries primary data symbol `m`.
    Data(usize),
    /// Interference-free landing bin of device `device` (1-based) for `slot`.
    /// OFSK devices have a single slot; MFSK slot `b` is the landing of bit `b`.
    Null { device: usize, slot: usize },
    /// Remainder bin left empty by a fully-orthogonal layout.
    Unused,
}

impl Role {
    fn label(&self, modulation: Modulation) -> String {
        match *self {
            Role::Data(_) => "D".into(),
            Role::Null { device, slot } => match modulation {
                Modulation::Ofsk => format!("B{device}"),
                Modulation::Mfsk => format!("B{device}/{slot}"),
            },
            Role::Unused => "N".into(),
        }
    }
}

/// Subcarrier roles and the designated bin sets of every device.
///
/// Semi-orthogonal devices also land on primary data bins. Those shared bins
/// keep the `Data` role and are listed per device and slot in `shared`; each
/// shared bin is owned by exactly one (device, slot) so that the sets used by
/// different detectors are disjoint.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationMap {
    pub scheme: Scheme,
    pub modulation: Modulation,
    pub n: usize,
    pub p: usize,
    pub roles: Vec<Role>,
    /// Data bin indices in data-symbol order.
    pub data: Vec<usize>,
    /// `nulls[device - 1][slot]`: interference-free designated bins.
    pub nulls: Vec<Vec<Vec<usize>>>,
    /// `shared[device - 1][slot]`: owned shared data bins (empty for FO).
    pub shared: Vec<Vec<Vec<usize>>>,
}

fn slots(modulation: Modulation) -> usize {
    match modulation {
        Modulation::Ofsk => 1,
        Modulation::Mfsk => 2,
    }
}

impl AllocationMap {
    pub fn build(cfg: &ValidatedConfig) -> Self {
        let c = cfg.config();
        Self::for_scheme(c.scheme, c.modulation, c.n_subcarriers, c.num_bds)
    }

    /// Builds the map without config validation. Callers must respect the
    /// capacity limits checked by [`crate::config::validate`].
    pub fn for_scheme(scheme: Scheme, modulation: Modulation, n: usize, p: usize) -> Self {
        let ns = slots(modulation);
        let mut roles = vec![Role::Unused; n];
        let mut nulls = vec![vec![Vec::new(); ns]; p];
        let mut data = Vec::new();
        match scheme {
            Scheme::FullyOrthogonal => {
                let block = ns * p + 1;
                for m in 0..n / block {
                    let base = m * block;
                    roles[base] = Role::Data(m);
                    data.push(base);
                    for dev in 1..=p {
                        for slot in 0..ns {
                            let k = base + ns * (dev - 1) + slot + 1;
                            roles[k] = Role::Null { device: dev, slot };
                            nulls[dev - 1][slot].push(k);
                        }
                    }
                }
            }
            Scheme::SemiOrthogonal => {
                let block = ns * p;
                roles[0] = Role::Data(0);
                data.push(0);
                for dev in 1..=p {
                    for slot in 0..ns {
                        let k = ns * (dev - 1) + slot + 1;
                        roles[k] = Role::Null { device: dev, slot };
                        nulls[dev - 1][slot].push(k);
                    }
                }
                for k in block + 1..n {
                    roles[k] = Role::Data(k - block);
                    data.push(k);
                }
            }
        }
        let mut map = Self {
            scheme,
            modulation,
            n,
            p,
            roles,
            data,
            nulls,
            shared: vec![vec![Vec::new(); ns]; p],
        };
        if scheme == Scheme::SemiOrthogonal {
            map.assign_shared();
        }
        map
    }

    /// Distributes every data bin reached by some device shift among the
    /// candidate (device, slot) pairs in round-robin order.
    fn assign_shared(&mut self) {
        let ns = slots(self.modulation);
        let mut turn = 0usize;
        for k in 0..self.n {
            if !matches!(self.roles[k], Role::Data(_)) {
                continue;
            }
            let mut candidates = Vec::new();
            for dev in 1..=self.p {
                for slot in 0..ns {
                    let s = self.shift(dev, slot);
                    if k >= s && matches!(self.roles[k - s], Role::Data(_)) {
                        candidates.push((dev, slot));
                    }
                }
            }
            if !candidates.is_empty() {
                let (dev, slot) = candidates[turn % candidates.len()];
                self.shared[dev - 1][slot].push(k);
                turn += 1;
            }
        }
    }

    pub fn n_data(&self) -> usize {
        self.data.len()
    }

    /// Total null bins reserved for devices.
    pub fn n_null(&self) -> usize {
        self.nulls.iter().flatten().map(Vec::len).sum()
    }

    pub fn slots(&self) -> usize {
        slots(self.modulation)
    }

    /// Spectral shift in bins that device `device` (1-based) applies for `slot`.
    /// For OFSK slot 0 is the bit-1 shift; bit 0 reflects unshifted.
    pub fn shift(&self, device: usize, slot: usize) -> usize {
        match self.modulation {
            Modulation::Ofsk => device,
            Modulation::Mfsk => 2 * device - 1 + slot,
        }
    }

    /// Designated bins of a device slot: nulls, plus owned shared bins when
    /// `with_shared` is set.
    pub fn designated(&self, device: usize, slot: usize, with_shared: bool) -> Vec<usize> {
        let mut bins = self.nulls[device - 1][slot].clone();
        if with_shared {
            bins.extend_from_slice(&self.shared[device - 1][slot]);
        }
        bins
    }

    pub fn labels(&self) -> Vec<String> {
        self.roles.iter().map(|r| r.label(self.modulation)).collect()
    }

    pub fn dump(&self) -> AllocationDump {
        AllocationDump {
            scheme: self.scheme.to_string(),
            modulation: self.modulation.to_string(),
            n: self.n,
            p: self.p,
            roles: self.labels(),
            data: self.data.clone(),
            nulls: self.nulls.clone(),
            shared: self.shared.clone(),
        }
    }
}

/// JSON view of an [`AllocationMap`].
#[derive(Debug, Serialize)]
pub struct AllocationDump {
    pub scheme: String,
    pub modulation: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "P")]
    pub p: usize,
    pub roles: Vec<String>,
    pub data: Vec<usize>,
    pub nulls: Vec<Vec<Vec<usize>>>,
    pub shared: Vec<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfdmSymbol {
    pub freq: Vec<Complex64>,
    /// Cyclic prefix followed by the symbol body.
    pub time: Vec<Complex64>,
}

/// Unitary N-point DFT pair with cyclic-prefix handling.
#[derive(Clone)]
pub struct Ofdm {
    n: usize,
    cp_len: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl std::fmt::Debug for Ofdm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Ofdm").field("n", &self.n).field("cp_len", &self.cp_len).finish()
    }
}

impl Ofdm {
    pub fn new(n: usize, cp_len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            cp_len,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            scale: 1.0 / (n as f64).sqrt(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cp_len(&self) -> usize {
        self.cp_len
    }

    pub fn symbol_len(&self) -> usize {
        self.n + self.cp_len
    }

    /// In-place unitary DFT of an N-sample buffer.
    pub fn dft_in_place(&self, buf: &mut [Complex64]) {
        self.fwd.process(buf);
        buf.iter_mut().for_each(|v| *v *= self.scale);
    }

    /// In-place unitary inverse DFT of an N-sample buffer.
    pub fn idft_in_place(&self, buf: &mut [Complex64]) {
        self.inv.process(buf);
        buf.iter_mut().for_each(|v| *v *= self.scale);
    }

    /// IDFT of `freq` with the last `cp_len` samples prepended.
    pub fn modulate(&self, freq: &[Complex64]) -> Result<OfdmSymbol> {
        if freq.len() != self.n {
            return Err(Error::LengthMismatch { expected: self.n, actual: freq.len() });
        }
        let mut body = freq.to_vec();
        self.idft_in_place(&mut body);
        Ok(OfdmSymbol { freq: freq.to_vec(), time: self.add_cp(&body) })
    }

    pub fn add_cp(&self, body: &[Complex64]) -> Vec<Complex64> {
        let mut time = Vec::with_capacity(self.symbol_len());
        time.extend_from_slice(&body[self.n - self.cp_len..]);
        time.extend_from_slice(body);
        time
    }

    /// Drops the cyclic prefix and returns the DFT of the next N samples.
    pub fn demodulate(&self, time: &[Complex64]) -> Result<Vec<Complex64>> {
        let needed = self.symbol_len();
        if time.len() < needed {
            return Err(Error::ShortBuffer { needed, actual: time.len() });
        }
        let mut buf = time[self.cp_len..needed].to_vec();
        self.dft_in_place(&mut buf);
        Ok(buf)
    }
}

/// BPSK symbol for a bit: 0 maps to +1, 1 to -1.
pub fn bpsk(bit: u8) -> f64 {
    if bit == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Frequency-domain primary symbol: BPSK on the data bins, zero elsewhere.
pub fn primary_spectrum(bits: &[u8], map: &AllocationMap) -> Result<Vec<Complex64>> {
    if bits.len() != map.n_data() {
        return Err(Error::LengthMismatch { expected: map.n_data(), actual: bits.len() });
    }
    let mut freq = vec![Complex64::new(0.0, 0.0); map.n];
    for (&k, &b) in map.data.iter().zip(bits) {
        freq[k] = Complex64::new(bpsk(b), 0.0);
    }
    Ok(freq)
}

pub fn modulate_primary(bits: &[u8], map: &AllocationMap, ofdm: &Ofdm) -> Result<OfdmSymbol> {
    ofdm.modulate(&primary_spectrum(bits, map)?)
}
