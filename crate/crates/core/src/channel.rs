//! Rayleigh multipath links, received-signal assembly, AWGN and CFO.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::backscatter::{apply_backscatter, BdProfile};
use crate::config::{ChannelProfile, EdgeModel};
use crate::ofdm::Ofdm;

/// Tap sets for one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h_direct: Vec<Complex64>,
    /// Transmitter to device, per device.
    pub h_forward: Vec<Vec<Complex64>>,
    /// Device to receiver, per device.
    pub h_back: Vec<Vec<Complex64>>,
    /// Normalized carrier frequency offset.
    pub cfo: f64,
}

/// Circularly-symmetric complex Gaussian sample with variance `var`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

fn draw_taps<R: Rng + ?Sized>(powers: &[f64], rng: &mut R) -> Vec<Complex64> {
    powers.iter().map(|&p| complex_normal(rng, p)).collect()
}

/// Independent taps for the direct link and for each of `num_bds` device links.
pub fn draw<R: Rng + ?Sized>(
    profile: &ChannelProfile,
    num_bds: usize,
    cfo: f64,
    rng: &mut R,
) -> ChannelRealization {
    let h_direct = draw_taps(&profile.direct, rng);
    let mut h_forward = Vec::with_capacity(num_bds);
    let mut h_back = Vec::with_capacity(num_bds);
    for _ in 0..num_bds {
        h_forward.push(draw_taps(&profile.forward, rng));
        h_back.push(draw_taps(&profile.backscatter, rng));
    }
    ChannelRealization { h_direct, h_forward, h_back, cfo }
}

/// Linear convolution truncated to the input length.
pub fn propagate(tx: &[Complex64], taps: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); tx.len()];
    for (n, o) in out.iter_mut().enumerate() {
        for (l, h) in taps.iter().enumerate().take(n + 1) {
            *o += h * tx[n - l];
        }
    }
    out
}

/// Per-bin response `sum_l h[l] exp(-j 2 pi k l / n)` of a tap vector.
pub fn frequency_response(taps: &[Complex64], n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|k| {
            taps.iter()
                .enumerate()
                .map(|(l, h)| h * Complex64::from_polar(1.0, -2.0 * PI * ((k * l) % n) as f64 / n as f64))
                .sum()
        })
        .collect()
}

/// Removes the top `shift` bins of a CP-prefixed symbol so that a subsequent
/// upward shift leaves no energy beyond the band edge.
pub fn band_limit(ofdm: &Ofdm, symbol: &[Complex64], shift: usize) -> Vec<Complex64> {
    let n = ofdm.n();
    let cp = ofdm.cp_len();
    if shift == 0 {
        return symbol.to_vec();
    }
    let mut body = symbol[cp..cp + n].to_vec();
    ofdm.dft_in_place(&mut body);
    for v in &mut body[n - shift.min(n)..] {
        *v = Complex64::new(0.0, 0.0);
    }
    ofdm.idft_in_place(&mut body);
    ofdm.add_cp(&body)
}

/// Noise-free received symbol: direct link plus every device's forward,
/// reflect and backscatter chain.
pub fn assemble_rx_clean(
    tx: &[Complex64],
    real: &ChannelRealization,
    bd_bits: &[u8],
    profiles: &[BdProfile],
    ofdm: &Ofdm,
    edge: EdgeModel,
) -> Vec<Complex64> {
    let mut y = propagate(tx, &real.h_direct);
    for (i, (prof, &bit)) in profiles.iter().zip(bd_bits).enumerate() {
        let mut incident = propagate(tx, &real.h_forward[i]);
        if edge == EdgeModel::BandLimited {
            incident = band_limit(ofdm, &incident, prof.shift(bit));
        }
        let reflected = apply_backscatter(&incident, prof, bit, ofdm.n());
        for (acc, v) in y.iter_mut().zip(propagate(&reflected, &real.h_back[i])) {
            *acc += v;
        }
    }
    y
}

pub fn add_noise<R: Rng + ?Sized>(samples: &mut [Complex64], var: f64, rng: &mut R) {
    if var > 0.0 {
        samples.iter_mut().for_each(|v| *v += complex_normal(rng, var));
    }
}

/// Full received symbol `symbol_index` of a frame: clean signal, AWGN of
/// variance `noise_var`, then the realization's CFO.
#[allow(clippy::too_many_arguments)]
pub fn assemble_rx<R: Rng + ?Sized>(
    tx: &[Complex64],
    real: &ChannelRealization,
    bd_bits: &[u8],
    profiles: &[BdProfile],
    ofdm: &Ofdm,
    edge: EdgeModel,
    noise_var: f64,
    symbol_index: usize,
    rng: &mut R,
) -> Vec<Complex64> {
    let mut y = assemble_rx_clean(tx, real, bd_bits, profiles, ofdm, edge);
    add_noise(&mut y, noise_var, rng);
    if real.cfo != 0.0 {
        inject_cfo(&mut y, real.cfo, ofdm.n(), symbol_index, ofdm.cp_len());
    }
    y
}

/// Multiplies sample `i` of symbol `symbol_index` by
/// `exp(j 2 pi eps (i + symbol_index (n + cp)) / n)`.
pub fn inject_cfo(samples: &mut [Complex64], eps: f64, n: usize, symbol_index: usize, cp_len: usize) {
    let start = (symbol_index * (n + cp_len)) as f64;
    for (i, v) in samples.iter_mut().enumerate() {
        *v *= Complex64::from_polar(1.0, 2.0 * PI * eps * (start + i as f64) / n as f64);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Modulation, Scheme};
    use crate::ofdm::{modulate_primary, AllocationMap};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
        (0..n).map(|_| complex_normal(rng, 1.0)).collect()
    }

    #[test]
    fn unit_tap_power_and_profile() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| complex_normal(&mut rng, 1.0).norm_sqr()).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.02);
        let prof = ChannelProfile::default();
        let mut acc = [0.0; 4];
        for _ in 0..n {
            let r = draw(&prof, 1, 0.0, &mut rng);
            for (a, h) in acc.iter_mut().zip(&r.h_direct) {
                *a += h.norm_sqr();
            }
        }
        for a in acc {
            assert!((a / n as f64 - 0.25).abs() < 0.25 * 0.02);
        }
    }

    #[test]
    fn rayleigh_ks() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 10_000;
        let mut mags: Vec<f64> = (0..n).map(|_| complex_normal(&mut rng, 1.0).norm()).collect();
        mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // Rayleigh with scale 1/sqrt(2): F(x) = 1 - exp(-x^2)
        let d = mags
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = 1.0 - (-x * x).exp();
                (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        // 1% critical value
        assert!(d < 1.63 / (n as f64).sqrt());
    }

    #[test]
    fn propagate_cases() {
        let x = vec![c(1.0, 0.0), c(2.0, 1.0), c(-1.0, 3.0)];
        assert_eq!(propagate(&x, &[c(1.0, 0.0)]), x);
        assert_eq!(propagate(&x, &[c(0.0, 0.0), c(1.0, 0.0)]), vec![c(0.0, 0.0), x[0], x[1]]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tx = random_vec(&mut rng, 40);
        let taps = random_vec(&mut rng, 3);
        let y = propagate(&tx, &taps);
        for n in 0..40 {
            let mut want = c(0.0, 0.0);
            for k in 0..3 {
                if n >= k {
                    want += taps[k] * tx[n - k];
                }
            }
            assert!((y[n] - want).norm() < 1e-12);
        }
    }

    fn unit_real(p: usize) -> ChannelRealization {
        ChannelRealization {
            h_direct: vec![c(1.0, 0.0)],
            h_forward: vec![vec![c(1.0, 0.0)]; p],
            h_back: vec![vec![c(1.0, 0.0)]; p],
            cfo: 0.0,
        }
    }

    #[test]
    fn assemble_trivial_cases() {
        let ofdm = Ofdm::new(16, 4);
        let map = AllocationMap::for_scheme(Scheme::FullyOrthogonal, Modulation::Ofsk, 16, 1);
        let sym = modulate_primary(&[0, 1, 1, 0, 1, 0, 0, 0], &map, &ofdm).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y = assemble_rx(&sym.time, &unit_real(0), &[], &[], &ofdm, EdgeModel::Circular, 0.0, 0, &mut rng);
        assert_eq!(y, sym.time);

        let mut real = unit_real(1);
        real.h_direct = vec![c(0.0, 0.0)];
        let prof = BdProfile::from_map(&map, 1, c(1.0, 0.0));
        let y = assemble_rx_clean(&sym.time, &real, &[0], &[prof], &ofdm, EdgeModel::BandLimited);
        for (a, b) in y.iter().zip(&sym.time) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn noise_only_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut y = vec![c(0.0, 0.0); 100_000];
        add_noise(&mut y, 0.3, &mut rng);
        let var = y.iter().map(|v| v.norm_sqr()).sum::<f64>() / y.len() as f64;
        assert!((var / 0.3 - 1.0).abs() < 0.03);
    }

    #[test]
    fn linearity_and_frequency_domain_model() {
        let ofdm = Ofdm::new(32, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let prof = ChannelProfile::default();
        let real = draw(&prof, 1, 0.0, &mut rng);
        let map = AllocationMap::for_scheme(Scheme::FullyOrthogonal, Modulation::Mfsk, 32, 1);
        let bd = BdProfile::from_map(&map, 1, c(0.5, 0.2));
        let x1 = random_vec(&mut rng, 38);
        let x2 = random_vec(&mut rng, 38);
        let sum: Vec<Complex64> = x1.iter().zip(&x2).map(|(a, b)| a + b).collect();
        for edge in [EdgeModel::Circular, EdgeModel::BandLimited] {
            let y1 = assemble_rx_clean(&x1, &real, &[1], &[bd], &ofdm, edge);
            let y2 = assemble_rx_clean(&x2, &real, &[1], &[bd], &ofdm, edge);
            let ys = assemble_rx_clean(&sum, &real, &[1], &[bd], &ofdm, edge);
            for i in 0..38 {
                assert!((ys[i] - y1[i] - y2[i]).norm() < 1e-12);
            }
        }
        // Direct link only: per-bin product with the channel response.
        let freq = random_vec(&mut rng, 32);
        let sym = ofdm.modulate(&freq).unwrap();
        let y = ofdm.demodulate(&propagate(&sym.time, &real.h_direct)).unwrap();
        let h = frequency_response(&real.h_direct, 32);
        for k in 0..32 {
            assert!((y[k] - h[k] * freq[k]).norm() < 1e-9);
        }
        // Device chain: shifted cascade with CP phase term.
        let s = bd.shift_bit1;
        let chain = ChannelRealization { h_direct: vec![c(0.0, 0.0)], ..real.clone() };
        let y = ofdm
            .demodulate(&assemble_rx_clean(&sym.time, &chain, &[1], &[bd], &ofdm, EdgeModel::Circular))
            .unwrap();
        let hf = frequency_response(&real.h_forward[0], 32);
        let hb = frequency_response(&real.h_back[0], 32);
        let ramp = Complex64::from_polar(1.0, 2.0 * PI * (s * 6) as f64 / 32.0);
        for k in 0..32 {
            let src = (k + 32 - s) % 32;
            let want = bd.alpha * hb[k] * hf[src] * freq[src] * ramp;
            assert!((y[k] - want).norm() < 1e-9);
        }
        // Band-limited: sources that would wrap are dropped.
        let y = ofdm
            .demodulate(&assemble_rx_clean(&sym.time, &chain, &[1], &[bd], &ofdm, EdgeModel::BandLimited))
            .unwrap();
        for k in 0..s {
            assert!(y[k].norm() < 1e-9);
        }
    }

    #[test]
    fn cfo_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random_vec(&mut rng, 40);
        let mut y = x.clone();
        inject_cfo(&mut y, 0.0, 32, 3, 8);
        assert_eq!(y, x);

        let ofdm = Ofdm::new(32, 8);
        let freq = random_vec(&mut rng, 32);
        let sym = ofdm.modulate(&freq).unwrap();
        let mut t = sym.time.clone();
        inject_cfo(&mut t, 1.0, 32, 0, 8);
        let f = ofdm.demodulate(&t).unwrap();
        for k in 0..32 {
            let want = freq[(k + 31) % 32] * Complex64::from_polar(1.0, 2.0 * PI * 8.0 / 32.0);
            assert!((f[k] - want).norm() < 1e-9);
        }

        let k0 = 5;
        let tone: Vec<Complex64> = (0..40)
            .map(|i| Complex64::from_polar(1.0, 2.0 * PI * (k0 * i) as f64 / 32.0))
            .collect();
        let mut t = tone.clone();
        let eps = 0.05;
        inject_cfo(&mut t, eps, 32, 0, 8);
        let f = ofdm.demodulate(&t).unwrap();
        // Dirichlet kernel: |sin(pi eps) / (N sin(pi eps / N))| times sqrt(N).
        let n = 32.0;
        let want = (PI * eps).sin() / (n * (PI * eps / n).sin()) * n.sqrt();
        assert!((f[k0].norm() - want).abs() < 1e-6);
    }
}
