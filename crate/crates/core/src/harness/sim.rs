//! Monte Carlo simulation of one sweep cell.
//!
//! A trial is one OFDM symbol carrying one bit per device. Trials are grouped
//! into frames that share a channel draw; frames have a single symbol unless
//! a carrier offset is injected or compensated, in which case they span
//! `cfo_frame_symbols` symbols so the estimator has a pilot batch to work on.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use super::stats::cell_rng;
use crate::backscatter::BdProfile;
use crate::channel::{assemble_rx, complex_normal, draw, frequency_response};
use crate::config::{Modulation, ValidatedConfig};
use crate::detect::{
    compensate_cfo, detect_mfsk, detect_primary, estimate_cfo, ml_bins, ml_candidates, ml_detect_bd,
    landing_pattern, mfsk_statistics, ofsk_statistic, perturb, reference_channel, run_sic, CascadeEstimate,
};
use crate::error::Result;
use crate::ofdm::{primary_spectrum, AllocationMap, Ofdm};

/// How device bits are recovered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectMode {
    /// Non-coherent detector on the interference-free nulls.
    Nulls,
    /// Genie cancellation, then ML over nulls and shared bins.
    SicMl,
    /// Genie cancellation, then the non-coherent detector over nulls and
    /// shared bins.
    SicEnergy,
    /// Simultaneous access: unshifted antipodal reflections over the whole
    /// band, direct-link cancellation, then per-device ML.
    Baseline,
}

/// Everything a cell needs to run trials.
#[derive(Debug, Clone)]
pub struct CellSetup {
    pub cfg: ValidatedConfig,
    pub map: AllocationMap,
    pub ofdm: Ofdm,
    pub profiles: Vec<BdProfile>,
    pub noise_var: f64,
    pub mode: DetectMode,
    pub cfo_compensate: bool,
    /// OFSK decision threshold per device.
    pub thresholds: Vec<f64>,
    /// Extra thresholds at which OFSK exceedances are counted (ROC).
    pub roc_thresholds: Vec<f64>,
    /// Identifies the cell's random streams.
    pub key: String,
}

/// Integer tallies; merging is exact so results do not depend on scheduling.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CellCounts {
    pub symbols: u64,
    pub primary_errors: u64,
    pub primary_bits: u64,
    pub bd_errors: u64,
    pub bd_decisions: u64,
    /// Device decisions with bit 0 sent.
    pub h0: u64,
    pub false_alarms: u64,
    /// Device decisions with bit 1 sent.
    pub h1: u64,
    pub misses: u64,
    pub roc_h0_above: Vec<u64>,
    pub roc_h1_above: Vec<u64>,
    pub cfo_frames: u64,
    /// Frames whose offset estimate landed within 1e-3 of the truth.
    pub cfo_within_tol: u64,
}

impl CellCounts {
    fn merge(&mut self, o: &CellCounts) {
        self.symbols += o.symbols;
        self.primary_errors += o.primary_errors;
        self.primary_bits += o.primary_bits;
        self.bd_errors += o.bd_errors;
        self.bd_decisions += o.bd_decisions;
        self.h0 += o.h0;
        self.false_alarms += o.false_alarms;
        self.h1 += o.h1;
        self.misses += o.misses;
        if self.roc_h0_above.len() < o.roc_h0_above.len() {
            self.roc_h0_above.resize(o.roc_h0_above.len(), 0);
            self.roc_h1_above.resize(o.roc_h1_above.len(), 0);
        }
        for (a, b) in self.roc_h0_above.iter_mut().zip(&o.roc_h0_above) {
            *a += b;
        }
        for (a, b) in self.roc_h1_above.iter_mut().zip(&o.roc_h1_above) {
            *a += b;
        }
        self.cfo_frames += o.cfo_frames;
        self.cfo_within_tol += o.cfo_within_tol;
    }
}

const CHUNK_FRAMES: usize = 512;
const CFO_TOLERANCE: f64 = 1e-3;

impl CellSetup {
    fn frame_len(&self) -> usize {
        let c = self.cfg.config();
        if c.cfo_normalized != 0.0 || self.cfo_compensate {
            c.cfo_frame_symbols
        } else {
            1
        }
    }

    /// Runs at least `trials` symbols (rounded up to whole frames).
    pub fn simulate(&self, trials: usize) -> Result<CellCounts> {
        let m = self.frame_len();
        let frames = trials.div_ceil(m);
        let chunks = frames.div_ceil(CHUNK_FRAMES);
        let parts: Vec<Result<CellCounts>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut acc = self.empty_counts();
                for f in c * CHUNK_FRAMES..((c + 1) * CHUNK_FRAMES).min(frames) {
                    self.frame(f as u64, m, &mut acc)?;
                }
                Ok(acc)
            })
            .collect();
        let mut total = self.empty_counts();
        for p in parts {
            total.merge(&p?);
        }
        Ok(total)
    }

    fn empty_counts(&self) -> CellCounts {
        CellCounts {
            roc_h0_above: vec![0; self.roc_thresholds.len()],
            roc_h1_above: vec![0; self.roc_thresholds.len()],
            ..Default::default()
        }
    }

    fn frame(&self, index: u64, m: usize, acc: &mut CellCounts) -> Result<()> {
        let c = self.cfg.config();
        let n = self.map.n;
        let p = self.map.p;
        let mut rng = cell_rng(c.seed, &self.key, index);
        let real = draw(&c.channel_profile, p, c.cfo_normalized, &mut rng);
        let href = match self.mode {
            DetectMode::Baseline => frequency_response(&real.h_direct, n),
            _ => reference_channel(&real, &self.profiles, n),
        };
        let cascades: Vec<CascadeEstimate> = match self.mode {
            DetectMode::SicMl | DetectMode::Baseline => (0..p)
                .map(|i| CascadeEstimate::from_realization(&real, i, self.profiles[i].alpha, n))
                .collect(),
            _ => Vec::new(),
        };

        let mut sent = Vec::with_capacity(m);
        for s in 0..m {
            let bits: Vec<u8> = (0..self.map.n_data()).map(|_| rng.gen_range(0..2)).collect();
            let bd_bits: Vec<u8> = (0..p).map(|_| rng.gen_range(0..2)).collect();
            let x = primary_spectrum(&bits, &self.map)?;
            let tx = self.ofdm.modulate(&x)?;
            let rx = if self.mode == DetectMode::Baseline {
                let profiles: Vec<BdProfile> = self
                    .profiles
                    .iter()
                    .zip(&bd_bits)
                    .map(|(pr, &b)| BdProfile { alpha: pr.alpha * crate::ofdm::bpsk(b), ..*pr })
                    .collect();
                assemble_rx(&tx.time, &real, &vec![0; p], &profiles, &self.ofdm, c.edge_model, self.noise_var, s, &mut rng)
            } else {
                assemble_rx(&tx.time, &real, &bd_bits, &self.profiles, &self.ofdm, c.edge_model, self.noise_var, s, &mut rng)
            };
            sent.push((bits, bd_bits, x, rx));
        }

        if self.cfo_compensate {
            let symbols: Vec<Vec<Complex64>> = sent.iter().map(|t| t.3.clone()).collect();
            let pilots: Vec<Vec<Complex64>> = sent.iter().map(|t| t.2.clone()).collect();
            let eps = estimate_cfo(&symbols, &pilots, &self.ofdm)?;
            acc.cfo_frames += 1;
            acc.cfo_within_tol += u64::from((eps - c.cfo_normalized).abs() <= CFO_TOLERANCE);
            for (s, t) in sent.iter_mut().enumerate() {
                compensate_cfo(&mut t.3, eps, n, s, self.ofdm.cp_len());
            }
        }

        for (bits, bd_bits, x, rx) in &sent {
            let y = self.ofdm.demodulate(rx)?;
            let h_est = perturb(&href, c.sic_error_var_h, &mut rng);
            let primary = detect_primary(&y, &self.map, &h_est);
            acc.primary_errors += primary.iter().zip(bits).filter(|(a, b)| a != b).count() as u64;
            acc.primary_bits += bits.len() as u64;
            acc.symbols += 1;

            let residual = match self.mode {
                DetectMode::Nulls => None,
                _ => {
                    let x_est = self.perturb_data(x, c.sic_error_var_x, &mut rng);
                    Some((run_sic(&y, &self.map, &h_est, &x_est), x_est))
                }
            };
            for dev in 1..=p {
                let sent_bit = bd_bits[dev - 1];
                let decided = self.decide(dev, &y, residual.as_ref(), &cascades, acc, sent_bit);
                acc.bd_decisions += 1;
                acc.bd_errors += u64::from(decided != sent_bit);
                if sent_bit == 0 {
                    acc.h0 += 1;
                    acc.false_alarms += u64::from(decided == 1);
                } else {
                    acc.h1 += 1;
                    acc.misses += u64::from(decided == 0);
                }
            }
        }
        Ok(())
    }

    fn perturb_data<R: Rng + ?Sized>(&self, x: &[Complex64], var: f64, rng: &mut R) -> Vec<Complex64> {
        let mut out = x.to_vec();
        if var > 0.0 {
            for &k in &self.map.data {
                out[k] += complex_normal(rng, var);
            }
        }
        out
    }

    fn decide(
        &self,
        dev: usize,
        y: &[Complex64],
        residual: Option<&(Vec<Complex64>, Vec<Complex64>)>,
        cascades: &[CascadeEstimate],
        acc: &mut CellCounts,
        sent_bit: u8,
    ) -> u8 {
        let modulation = self.map.modulation;
        let cp = self.ofdm.cp_len();
        let edge = self.cfg.config().edge_model;
        match (self.mode, residual) {
            (DetectMode::Nulls, _) => match modulation {
                Modulation::Ofsk => {
                    let r = ofsk_statistic(y, &self.map, dev, false);
                    self.count_roc(r, sent_bit, acc);
                    u8::from(r > self.thresholds[dev - 1])
                }
                Modulation::Mfsk => detect_mfsk(y, &self.map, dev, false),
            },
            (DetectMode::SicEnergy, Some((res, _))) => match modulation {
                Modulation::Ofsk => {
                    let r = ofsk_statistic(res, &self.map, dev, true);
                    self.count_roc(r, sent_bit, acc);
                    u8::from(r > self.thresholds[dev - 1])
                }
                Modulation::Mfsk => {
                    let (r0, r1) = mfsk_statistics(res, &self.map, dev, true);
                    u8::from(r1 > r0)
                }
            },
            (DetectMode::SicMl, Some((res, x_est))) => {
                let cands = ml_candidates(&self.profiles[dev - 1], &cascades[dev - 1], x_est, cp, edge);
                ml_detect_bd(res, &ml_bins(&self.map, dev), &cands) as u8
            }
            (DetectMode::Baseline, Some((res, x_est))) => {
                let one = landing_pattern(&cascades[dev - 1], x_est, 0, cp, edge);
                let minus: Vec<Complex64> = one.iter().map(|v| -v).collect();
                ml_detect_bd(res, &self.map.data, &[one, minus]) as u8
            }
            _ => unreachable!("cancellation modes always carry a residual"),
        }
    }

    fn count_roc(&self, r: f64, sent_bit: u8, acc: &mut CellCounts) {
        let above = if sent_bit == 0 { &mut acc.roc_h0_above } else { &mut acc.roc_h1_above };
        for (a, &t) in above.iter_mut().zip(&self.roc_thresholds) {
            *a += u64::from(r > t);
        }
    }
}
