//! Experiment parameters, their invariants and the on-disk config format.
//!
//! A [`SystemConfig`] is plain data. [`validate`] checks every invariant and
//! returns a [`ValidatedConfig`] carrying the derived subcarrier counts; every
//! other module only ever consumes the validated form.

use std::fmt;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    FullyOrthogonal,
    SemiOrthogonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Modulation {
    Ofsk,
    Mfsk,
}

/// Which signal power the SNR grid is referenced to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnrReference {
    /// SNR = 1 / noise variance: unit-energy symbol on a loaded subcarrier.
    Subcarrier,
    /// SNR measured against the average time-domain power of the transmitted
    /// symbol, which is `N_d / N` for unit-energy BPSK on `N_d` loaded bins.
    TimeDomain,
}

/// How device frequency shifts treat energy pushed past the top of the band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeModel {
    /// Pure sampled-domain shift: the top bins alias back onto bin 0 onwards.
    Circular,
    /// Shifted energy beyond bin N-1 falls outside the receiver band and is lost.
    BandLimited,
}

/// How the OFSK energy threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdMode {
    /// Smallest threshold meeting the configured false-alarm target.
    PfaTarget,
    /// Threshold minimising (PMD + PFA) / 2.
    MinError,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::FullyOrthogonal => "fully-orthogonal",
            Scheme::SemiOrthogonal => "semi-orthogonal",
        })
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modulation::Ofsk => "ofsk",
            Modulation::Mfsk => "mfsk",
        })
    }
}

/// Average power per tap for each link type. Tap counts are the list lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelProfile {
    pub direct: Vec<f64>,
    pub forward: Vec<f64>,
    pub backscatter: Vec<f64>,
}

impl ChannelProfile {
    pub fn uniform(direct_taps: usize, forward_taps: usize, backscatter_taps: usize) -> Self {
        let uni = |n: usize| vec![1.0 / n as f64; n];
        Self {
            direct: uni(direct_taps),
            forward: uni(forward_taps),
            backscatter: uni(backscatter_taps),
        }
    }

    /// Maximum excess delay of the composite channel in samples.
    pub fn delay_spread(&self) -> usize {
        let direct = self.direct.len().saturating_sub(1);
        let cascaded =
            self.forward.len().saturating_sub(1) + self.backscatter.len().saturating_sub(1);
        direct.max(cascaded)
    }

    fn check(&self) -> Result<()> {
        for (name, taps) in [
            ("direct", &self.direct),
            ("forward", &self.forward),
            ("backscatter", &self.backscatter),
        ] {
            if taps.is_empty() {
                return Err(Error::InvalidConfig(format!("{name} link needs at least one tap")));
            }
            if taps.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} tap powers must be non-negative"
                )));
            }
            let total: f64 = taps.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidConfig(format!(
                    "{name} tap powers sum to {total}, expected 1"
                )));
            }
        }
        Ok(())
    }
}

impl Default for ChannelProfile {
    fn default() -> Self {
        Self::uniform(4, 4, 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub n_subcarriers: usize,
    pub cp_len: usize,
    pub num_bds: usize,
    pub scheme: Scheme,
    pub modulation: Modulation,
    pub subcarrier_spacing_hz: f64,
    pub snr_db_grid: Vec<f64>,
    pub alpha: Vec<Complex64>,
    pub channel_profile: ChannelProfile,
    pub cfo_normalized: f64,
    pub num_trials: usize,
    pub seed: u64,
    pub pfa_target: f64,
    pub snr_reference: SnrReference,
    pub edge_model: EdgeModel,
    pub threshold_mode: ThresholdMode,
    /// Variance of the direct-channel estimation error used by SIC and the
    /// coherent primary detector.
    pub sic_error_var_h: f64,
    /// Variance of the primary-symbol estimation error used by SIC.
    pub sic_error_var_x: f64,
    /// Symbols per frame when CFO estimation is active.
    pub cfo_frame_symbols: usize,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            n_subcarriers: 64,
            cp_len: 8,
            num_bds: 1,
            scheme: Scheme::FullyOrthogonal,
            modulation: Modulation::Ofsk,
            subcarrier_spacing_hz: 15e3,
            snr_db_grid: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0],
            alpha: vec![Complex64::new(0.25, 0.0)],
            channel_profile: ChannelProfile::default(),
            cfo_normalized: 0.0,
            num_trials: 100_000,
            seed: 1,
            pfa_target: 1e-3,
            snr_reference: SnrReference::TimeDomain,
            edge_model: EdgeModel::BandLimited,
            threshold_mode: ThresholdMode::PfaTarget,
            sic_error_var_h: 0.0,
            sic_error_var_x: 0.0,
            cfo_frame_symbols: 8,
        }
    }
}

impl SystemConfig {
    /// Same config with `p` devices all reflecting with coefficient `alpha`.
    pub fn with_devices(mut self, p: usize, alpha: f64) -> Self {
        self.num_bds = p;
        self.alpha = vec![Complex64::new(alpha, 0.0); p];
        self
    }
}

/// Subcarrier counts implied by a scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DerivedCounts {
    /// Primary data subcarriers `N_d`.
    pub n_data: usize,
    /// Interference-free designated subcarriers per device `N_bp`.
    pub n_null_per_device: usize,
    /// Total null subcarriers reserved for devices `N_b`.
    pub n_null_total: usize,
}

/// Smallest N accepted for a scheme.
pub fn min_subcarriers(scheme: Scheme, modulation: Modulation, p: usize) -> usize {
    match (scheme, modulation) {
        (Scheme::FullyOrthogonal, Modulation::Ofsk) => (p + 1) * 2,
        (Scheme::FullyOrthogonal, Modulation::Mfsk) => (2 * p + 1) * 2,
        (Scheme::SemiOrthogonal, Modulation::Ofsk) => p + 2,
        (Scheme::SemiOrthogonal, Modulation::Mfsk) => 2 * p + 2,
    }
}

/// Closed-form subcarrier counts.
///
/// Fully-orthogonal layouts only place a data subcarrier where its whole block
/// (the data bin plus every device slot after it) fits inside the symbol, so
/// `N_d = floor(N / block)`; any remainder bins stay unused.
pub fn derived_counts(scheme: Scheme, modulation: Modulation, n: usize, p: usize) -> DerivedCounts {
    match (scheme, modulation) {
        (Scheme::FullyOrthogonal, Modulation::Ofsk) => {
            let n_data = n / (p + 1);
            DerivedCounts { n_data, n_null_per_device: n_data, n_null_total: p * n_data }
        }
        (Scheme::FullyOrthogonal, Modulation::Mfsk) => {
            let n_data = n / (2 * p + 1);
            DerivedCounts {
                n_data,
                n_null_per_device: 2 * n_data,
                n_null_total: 2 * p * n_data,
            }
        }
        (Scheme::SemiOrthogonal, Modulation::Ofsk) => {
            DerivedCounts { n_data: n - p, n_null_per_device: 1, n_null_total: p }
        }
        (Scheme::SemiOrthogonal, Modulation::Mfsk) => {
            DerivedCounts { n_data: n - 2 * p, n_null_per_device: 2, n_null_total: 2 * p }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedConfig {
    config: SystemConfig,
    derived: DerivedCounts,
}

impl ValidatedConfig {
    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn derived(&self) -> DerivedCounts {
        self.derived
    }

    pub fn n(&self) -> usize {
        self.config.n_subcarriers
    }

    pub fn p(&self) -> usize {
        self.config.num_bds
    }

    pub fn into_inner(self) -> SystemConfig {
        self.config
    }

    /// Per-sample complex noise variance for a given SNR in dB.
    pub fn noise_variance(&self, snr_db: f64) -> f64 {
        let snr = 10f64.powf(snr_db / 10.0);
        match self.config.snr_reference {
            SnrReference::Subcarrier => 1.0 / snr,
            SnrReference::TimeDomain => {
                self.derived.n_data as f64 / self.config.n_subcarriers as f64 / snr
            }
        }
    }
}

pub fn validate(config: SystemConfig) -> Result<ValidatedConfig> {
    let c = &config;
    if c.n_subcarriers == 0 {
        return Err(Error::InvalidConfig("n_subcarriers must be positive".into()));
    }
    if c.num_bds == 0 {
        return Err(Error::InvalidConfig("num_bds must be positive".into()));
    }
    if c.num_trials == 0 {
        return Err(Error::InvalidConfig("num_trials must be positive".into()));
    }
    if !(c.subcarrier_spacing_hz.is_finite() && c.subcarrier_spacing_hz > 0.0) {
        return Err(Error::InvalidConfig("subcarrier_spacing_hz must be positive".into()));
    }
    if !(c.pfa_target > 0.0 && c.pfa_target < 1.0) {
        return Err(Error::InvalidConfig("pfa_target must lie in (0, 1)".into()));
    }
    if !(-0.5..0.5).contains(&c.cfo_normalized) {
        return Err(Error::InvalidConfig("cfo_normalized must lie in [-0.5, 0.5)".into()));
    }
    if c.snr_db_grid.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidConfig("snr_db_grid entries must be finite".into()));
    }
    if c.sic_error_var_h < 0.0 || c.sic_error_var_x < 0.0 {
        return Err(Error::InvalidConfig("estimation error variances must be >= 0".into()));
    }
    if c.cfo_frame_symbols < 2 {
        return Err(Error::InvalidConfig("cfo_frame_symbols must be at least 2".into()));
    }
    if c.alpha.len() != c.num_bds {
        return Err(Error::InvalidConfig(format!(
            "alpha has {} entries for {} devices",
            c.alpha.len(),
            c.num_bds
        )));
    }
    for (i, a) in c.alpha.iter().enumerate() {
        let magnitude = a.norm();
        if !magnitude.is_finite() || magnitude > 1.0 {
            return Err(Error::AlphaOutOfRange { device: i + 1, magnitude });
        }
    }
    c.channel_profile.check()?;
    let delay_spread = c.channel_profile.delay_spread();
    if c.cp_len < delay_spread {
        return Err(Error::CpTooShort { cp_len: c.cp_len, delay_spread });
    }
    let required = min_subcarriers(c.scheme, c.modulation, c.num_bds);
    if c.n_subcarriers < required {
        return Err(Error::Capacity {
            scheme: c.scheme.to_string(),
            modulation: c.modulation.to_string(),
            required,
            n: c.n_subcarriers,
        });
    }
    let derived = derived_counts(c.scheme, c.modulation, c.n_subcarriers, c.num_bds);
    Ok(ValidatedConfig { config, derived })
}

/// Device detector applied to the residual after direct-link cancellation
/// in semi-orthogonal schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PostSicDetector {
    /// Nearest bit pattern given the cascaded channel.
    #[default]
    Ml,
    /// The non-coherent detector over null and shared bins.
    Energy,
}

/// A reflection coefficient as written in a config file: a real number or
/// a `[re, im]` pair.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaValue {
    Real(f64),
    Complex([f64; 2]),
}

impl From<AlphaValue> for Complex64 {
    fn from(v: AlphaValue) -> Self {
        match v {
            AlphaValue::Real(re) => Complex64::new(re, 0.0),
            AlphaValue::Complex([re, im]) => Complex64::new(re, im),
        }
    }
}

/// Flat key-value config file. Every key is optional and falls back to the
/// [`SystemConfig`] default; unknown keys are rejected. The `*_grid`, `schemes`,
/// `modulations`, `metrics` and switch keys describe a sweep and are consumed
/// by the experiment harness.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub n_subcarriers: Option<usize>,
    pub cp_len: Option<usize>,
    pub num_bds: Option<usize>,
    pub scheme: Option<Scheme>,
    pub modulation: Option<Modulation>,
    pub subcarrier_spacing_hz: Option<f64>,
    pub snr_db_grid: Option<Vec<f64>>,
    pub alpha: Option<Vec<AlphaValue>>,
    pub direct_tap_powers: Option<Vec<f64>>,
    pub forward_tap_powers: Option<Vec<f64>>,
    pub backscatter_tap_powers: Option<Vec<f64>>,
    pub cfo_normalized: Option<f64>,
    pub num_trials: Option<usize>,
    pub seed: Option<u64>,
    pub pfa_target: Option<f64>,
    pub snr_reference: Option<SnrReference>,
    pub edge_model: Option<EdgeModel>,
    pub threshold_mode: Option<ThresholdMode>,
    pub sic_error_var_h: Option<f64>,
    pub sic_error_var_x: Option<f64>,
    pub cfo_frame_symbols: Option<usize>,

    pub schemes: Option<Vec<Scheme>>,
    pub modulations: Option<Vec<Modulation>>,
    pub n_grid: Option<Vec<usize>>,
    pub p_grid: Option<Vec<usize>>,
    pub alpha_grid: Option<Vec<f64>>,
    pub metrics: Option<Vec<String>>,
    pub sic: Option<Vec<bool>>,
    pub cfo_compensate: Option<Vec<bool>>,
    pub analytic: Option<bool>,
    pub max_cells: Option<usize>,
    pub cfo_grid: Option<Vec<f64>>,
    pub roc_pfa: Option<Vec<f64>>,
    pub rate_realizations: Option<usize>,
    pub post_sic_detector: Option<PostSicDetector>,
    pub baseline: Option<bool>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Builds the system config. A missing `alpha` list with `num_bds` set
    /// repeats the default coefficient for every device.
    pub fn system_config(&self) -> SystemConfig {
        let d = SystemConfig::default();
        let num_bds = self.num_bds.unwrap_or(d.num_bds);
        let alpha = match &self.alpha {
            Some(list) => list.iter().map(|&a| a.into()).collect(),
            None => vec![d.alpha[0]; num_bds],
        };
        let dp = ChannelProfile::default();
        SystemConfig {
            n_subcarriers: self.n_subcarriers.unwrap_or(d.n_subcarriers),
            cp_len: self.cp_len.unwrap_or(d.cp_len),
            num_bds,
            scheme: self.scheme.unwrap_or(d.scheme),
            modulation: self.modulation.unwrap_or(d.modulation),
            subcarrier_spacing_hz: self.subcarrier_spacing_hz.unwrap_or(d.subcarrier_spacing_hz),
            snr_db_grid: self.snr_db_grid.clone().unwrap_or(d.snr_db_grid),
            alpha,
            channel_profile: ChannelProfile {
                direct: self.direct_tap_powers.clone().unwrap_or(dp.direct),
                forward: self.forward_tap_powers.clone().unwrap_or(dp.forward),
                backscatter: self.backscatter_tap_powers.clone().unwrap_or(dp.backscatter),
            },
            cfo_normalized: self.cfo_normalized.unwrap_or(d.cfo_normalized),
            num_trials: self.num_trials.unwrap_or(d.num_trials),
            seed: self.seed.unwrap_or(d.seed),
            pfa_target: self.pfa_target.unwrap_or(d.pfa_target),
            snr_reference: self.snr_reference.unwrap_or(d.snr_reference),
            edge_model: self.edge_model.unwrap_or(d.edge_model),
            threshold_mode: self.threshold_mode.unwrap_or(d.threshold_mode),
            sic_error_var_h: self.sic_error_var_h.unwrap_or(d.sic_error_var_h),
            sic_error_var_x: self.sic_error_var_x.unwrap_or(d.sic_error_var_x),
            cfo_frame_symbols: self.cfo_frame_symbols.unwrap_or(d.cfo_frame_symbols),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(scheme: Scheme, modulation: Modulation, n: usize, p: usize) -> SystemConfig {
        SystemConfig {
            n_subcarriers: n,
            cp_len: (n / 8).max(3),
            scheme,
            modulation,
            ..SystemConfig::default()
        }
        .with_devices(p, 0.5)
    }

    #[test]
    fn fo_ofsk_64_two_devices() {
        let v = validate(cfg(Scheme::FullyOrthogonal, Modulation::Ofsk, 64, 2)).unwrap();
        assert_eq!(v.derived().n_data, 21);
        assert_eq!(v.derived().n_null_per_device, 21);
        assert_eq!(v.config().subcarrier_spacing_hz, 15e3);
    }

    #[test]
    fn capacity_error() {
        let err = validate(cfg(Scheme::FullyOrthogonal, Modulation::Mfsk, 4, 3)).unwrap_err();
        assert!(matches!(err, Error::Capacity { required: 14, n: 4, .. }));
    }

    #[test]
    fn cp_too_short() {
        let mut c = cfg(Scheme::FullyOrthogonal, Modulation::Ofsk, 64, 1);
        c.cp_len = 2;
        c.channel_profile.direct = vec![0.2; 5];
        let err = validate(c).unwrap_err();
        assert!(matches!(err, Error::CpTooShort { cp_len: 2, delay_spread: 4 }));
    }

    #[test]
    fn alpha_out_of_range() {
        let mut c = cfg(Scheme::SemiOrthogonal, Modulation::Ofsk, 64, 2);
        c.alpha[1] = Complex64::new(0.8, 0.7);
        assert!(matches!(validate(c), Err(Error::AlphaOutOfRange { device: 2, .. })));
    }

    #[test]
    fn rejects_bad_scalars() {
        let mut c = cfg(Scheme::FullyOrthogonal, Modulation::Ofsk, 64, 1);
        c.num_trials = 0;
        assert!(validate(c).is_err());
        let mut c = cfg(Scheme::FullyOrthogonal, Modulation::Ofsk, 64, 1);
        c.cfo_normalized = 0.5;
        assert!(validate(c).is_err());
        let mut c = cfg(Scheme::FullyOrthogonal, Modulation::Ofsk, 64, 1);
        c.channel_profile.forward = vec![0.5, 0.4];
        assert!(validate(c).is_err());
    }

    #[test]
    fn validate_is_idempotent() {
        for scheme in [Scheme::FullyOrthogonal, Scheme::SemiOrthogonal] {
            for modulation in [Modulation::Ofsk, Modulation::Mfsk] {
                let once = validate(cfg(scheme, modulation, 128, 3)).unwrap();
                let twice = validate(once.config().clone()).unwrap();
                assert_eq!(once, twice);
            }
        }
    }

    #[test]
    fn noise_reference() {
        let mut c = cfg(Scheme::FullyOrthogonal, Modulation::Ofsk, 64, 1);
        c.snr_reference = SnrReference::Subcarrier;
        let v = validate(c.clone()).unwrap();
        assert!((v.noise_variance(10.0) - 0.1).abs() < 1e-15);
        c.snr_reference = SnrReference::TimeDomain;
        let v = validate(c).unwrap();
        assert!((v.noise_variance(10.0) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn config_file_roundtrip_and_unknown_keys() {
        let text = r#"
            n_subcarriers = 128
            cp_len = 16
            num_bds = 2
            scheme = "semi-orthogonal"
            modulation = "mfsk"
            alpha = [0.5, [0.25, 0.25]]
            forward_tap_powers = [0.5, 0.5]
            seed = 7
        "#;
        let file = ConfigFile::parse(text).unwrap();
        let c = file.system_config();
        assert_eq!(c.n_subcarriers, 128);
        assert_eq!(c.alpha[1], Complex64::new(0.25, 0.25));
        assert_eq!(c.channel_profile.forward, vec![0.5, 0.5]);
        assert!(validate(c).is_ok());

        assert!(ConfigFile::parse("n_subcarrier = 64").is_err());
    }
}
