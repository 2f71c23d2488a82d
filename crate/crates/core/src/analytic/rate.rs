//! Achievable sum-rates of the primary link and the device links.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{draw, frequency_response, ChannelRealization};
use crate::config::ValidatedConfig;
use crate::error::{Error, Result};
use crate::ofdm::AllocationMap;

/// What the device signal sees on a bin it shares with primary data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SharedInterference {
    /// The full direct-link power `|H_d|^2`.
    Direct,
    /// What genie cancellation with noisy estimates leaves behind:
    /// `var_h E|X|^2 + var_x |H_d|^2`.
    Residual { var_h: f64, var_x: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinSinr {
    pub bin: usize,
    pub sinr: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RateBreakdown {
    /// Device links, bits/s.
    pub r_bd: f64,
    pub r_primary: f64,
    pub r_total: f64,
    pub bd_bins: Vec<BinSinr>,
    pub primary_bins: Vec<BinSinr>,
}

/// Shannon rate of one subcarrier.
pub fn bin_rate(spacing_hz: f64, sinr: f64) -> f64 {
    spacing_hz * (1.0 + sinr).log2()
}

/// Rates for one channel realization.
///
/// Device bins use the cascaded gain `|alpha|^2 |H_b[k]|^2 |H_f[k-s]|^2` of the
/// shift `s` that lands there. Shared bins add the primary as interference,
/// and the primary on a shared bin sees the device landing as interference.
pub fn sum_rate(
    map: &AllocationMap,
    real: &ChannelRealization,
    alpha: &[Complex64],
    noise_var: f64,
    spacing_hz: f64,
    interference: SharedInterference,
) -> RateBreakdown {
    let n = map.n;
    let hd: Vec<f64> = frequency_response(&real.h_direct, n).iter().map(|h| h.norm_sqr()).collect();
    let mut out = RateBreakdown::default();
    let mut primary_interference = vec![0.0; n];
    for dev in 1..=map.p {
        let hf: Vec<f64> = frequency_response(&real.h_forward[dev - 1], n).iter().map(|h| h.norm_sqr()).collect();
        let hb: Vec<f64> = frequency_response(&real.h_back[dev - 1], n).iter().map(|h| h.norm_sqr()).collect();
        let a2 = alpha[dev - 1].norm_sqr();
        for slot in 0..map.slots() {
            let s = map.shift(dev, slot);
            let cascade = |k: usize| a2 * hb[k] * hf[(k + n - s % n) % n];
            for &k in &map.nulls[dev - 1][slot] {
                out.bd_bins.push(BinSinr { bin: k, sinr: cascade(k) / noise_var });
            }
            for &k in &map.shared[dev - 1][slot] {
                let i = match interference {
                    SharedInterference::Direct => hd[k],
                    SharedInterference::Residual { var_h, var_x } => var_h + var_x * hd[k],
                };
                out.bd_bins.push(BinSinr { bin: k, sinr: cascade(k) / (i + noise_var) });
                primary_interference[k] += cascade(k);
            }
        }
    }
    for &k in &map.data {
        out.primary_bins.push(BinSinr { bin: k, sinr: hd[k] / (primary_interference[k] + noise_var) });
    }
    out.r_bd = out.bd_bins.iter().map(|b| bin_rate(spacing_hz, b.sinr)).sum();
    out.r_primary = out.primary_bins.iter().map(|b| bin_rate(spacing_hz, b.sinr)).sum();
    out.r_total = out.r_bd + out.r_primary;
    out
}

fn check_map(cfg: &ValidatedConfig, map: &AllocationMap) -> Result<()> {
    let c = cfg.config();
    if map.scheme != c.scheme || map.modulation != c.modulation || map.n != cfg.n() || map.p != cfg.p() {
        return Err(Error::SchemeMismatch {
            expected: format!("{}/{} N={} P={}", c.scheme, c.modulation, cfg.n(), cfg.p()),
            actual: format!("{}/{} N={} P={}", map.scheme, map.modulation, map.n, map.p),
        });
    }
    Ok(())
}

/// Rates of one realization under a configuration.
pub fn sum_rate_realization(
    cfg: &ValidatedConfig,
    map: &AllocationMap,
    real: &ChannelRealization,
    snr_db: f64,
    interference: SharedInterference,
) -> Result<RateBreakdown> {
    check_map(cfg, map)?;
    let c = cfg.config();
    Ok(sum_rate(map, real, &c.alpha, cfg.noise_variance(snr_db), c.subcarrier_spacing_hz, interference))
}

/// Mean rates over `realizations` independent channel draws. The per-bin
/// terms of the result are left empty.
pub fn sum_rate_ensemble(
    cfg: &ValidatedConfig,
    map: &AllocationMap,
    snr_db: f64,
    interference: SharedInterference,
    realizations: usize,
    seed: u64,
) -> Result<RateBreakdown> {
    check_map(cfg, map)?;
    let c = cfg.config();
    let noise_var = cfg.noise_variance(snr_db);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut r_bd, mut r_primary) = (0.0, 0.0);
    for _ in 0..realizations {
        let real = draw(&c.channel_profile, cfg.p(), 0.0, &mut rng);
        let r = sum_rate(map, &real, &c.alpha, noise_var, c.subcarrier_spacing_hz, interference);
        r_bd += r.r_bd;
        r_primary += r.r_primary;
    }
    let m = realizations.max(1) as f64;
    let (r_bd, r_primary) = (r_bd / m, r_primary / m);
    Ok(RateBreakdown { r_bd, r_primary, r_total: r_bd + r_primary, ..Default::default() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{validate, ChannelProfile, Modulation, Scheme, SnrReference, SystemConfig};

    fn flat(p: usize) -> ChannelRealization {
        let one = vec![Complex64::new(1.0, 0.0)];
        ChannelRealization { h_direct: one.clone(), h_forward: vec![one.clone(); p], h_back: vec![one; p], cfo: 0.0 }
    }

    #[test]
    fn unit_sinr_bin() {
        assert!((bin_rate(15e3, 1.0) - 15e3).abs() < 1e-9);
    }

    #[test]
    fn flat_fo_counts() {
        let map = AllocationMap::for_scheme(Scheme::FullyOrthogonal, Modulation::Ofsk, 8, 1);
        let r = sum_rate(&map, &flat(1), &[Complex64::new(1.0, 0.0)], 1.0, 15e3, SharedInterference::Direct);
        // four unit-SINR device bins and four unit-SNR data bins
        assert!((r.r_bd - 4.0 * 15e3).abs() < 1e-6);
        assert!((r.r_primary - 4.0 * 15e3).abs() < 1e-6);
        assert_eq!(r.r_total, r.r_bd + r.r_primary);
    }

    #[test]
    fn no_devices_no_device_rate() {
        let map = AllocationMap::for_scheme(Scheme::FullyOrthogonal, Modulation::Ofsk, 8, 0);
        let r = sum_rate(&map, &flat(0), &[], 1.0, 15e3, SharedInterference::Direct);
        assert_eq!(r.r_bd, 0.0);
        assert!(r.r_primary > 0.0);
    }

    #[test]
    fn flat_so_interference_terms() {
        let map = AllocationMap::for_scheme(Scheme::SemiOrthogonal, Modulation::Ofsk, 8, 1);
        let a = 0.5;
        let r = sum_rate(&map, &flat(1), &[Complex64::new(a, 0.0)], 0.1, 1.0, SharedInterference::Direct);
        let shared = map.shared[0][0].len() as f64;
        let expect_bd = (1.0 + a * a / 0.1f64).log2() + shared * (1.0 + a * a / 1.1f64).log2();
        assert!((r.r_bd - expect_bd).abs() < 1e-12);
        let clean = map.n_data() as f64 - shared;
        let expect_p = clean * (1.0 + 10.0f64).log2() + shared * (1.0 + 1.0 / (a * a + 0.1f64)).log2();
        assert!((r.r_primary - expect_p).abs() < 1e-12);
        let sic = sum_rate(&map, &flat(1), &[Complex64::new(a, 0.0)], 0.1, 1.0, SharedInterference::Residual { var_h: 0.0, var_x: 0.0 });
        assert!(sic.r_bd > r.r_bd);
    }

    #[test]
    fn scheme_mismatch_rejected() {
        let cfg = validate(SystemConfig::default()).unwrap();
        let map = AllocationMap::for_scheme(Scheme::SemiOrthogonal, Modulation::Ofsk, 64, 1);
        let real = draw(&ChannelProfile::default(), 1, 0.0, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(
            sum_rate_realization(&cfg, &map, &real, 10.0, SharedInterference::Direct),
            Err(Error::SchemeMismatch { .. })
        ));
    }

    #[test]
    fn so_dominates_fo_on_identical_draws() {
        for modulation in [Modulation::Ofsk, Modulation::Mfsk] {
            let base = SystemConfig {
                modulation,
                snr_reference: SnrReference::Subcarrier,
                ..SystemConfig::default().with_devices(4, 0.25)
            };
            let fo = validate(base.clone()).unwrap();
            let so = validate(SystemConfig { scheme: Scheme::SemiOrthogonal, ..base }).unwrap();
            let (mfo, mso) = (AllocationMap::build(&fo), AllocationMap::build(&so));
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            for snr in [0.0, 10.0, 20.0] {
                let real = draw(&fo.config().channel_profile, 4, 0.0, &mut rng);
                let a = sum_rate_realization(&fo, &mfo, &real, snr, SharedInterference::Direct).unwrap();
                let b = sum_rate_realization(&so, &mso, &real, snr, SharedInterference::Direct).unwrap();
                assert!(b.r_total >= a.r_total, "{modulation:?} {snr}: {} < {}", b.r_total, a.r_total);
            }
        }
    }
}
