//! Detection-error probabilities of the non-coherent OFSK and MFSK detectors.
//!
//! Conditional on the backscatter-link power `u`, the energy collected over a
//! device's designated bins is a sum of independent exponentials. The signal
//! part has the eigenvalues of the cascaded forward-channel covariance seen
//! through the landing bins. The result is averaged over `u ~ Exp(mean)`
//! (single-tap Rayleigh backscatter link).

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

use super::cf::{cdf_gil_pelaez, DifferenceCf, ExpMixtureCf};
use super::quad::composite_rule;
use crate::config::{Modulation, ValidatedConfig};
use crate::error::{Error, Result};
use crate::ofdm::{AllocationMap, Role};

/// How conditional exponential means are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RateModel {
    /// Eigenvalues of the cascaded-channel covariance over the designated bins
    /// plus per-bin noise. Exact for a single-tap backscatter link.
    #[default]
    Covariance,
    /// Every designated bin gets the same mean
    /// `2 |alpha| u sum_bins(channel power + noise component variance)` for
    /// OFSK and `2 |alpha| u sum_bins(channel power) + noise variance` for
    /// MFSK.
    UniformMean,
}

/// Signal-present energy statistic of one designated bin set.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyModel {
    /// Signal means per unit backscatter power, one per exponential term.
    pub signal_weights: Vec<f64>,
    /// Additive mean of each signal term.
    pub signal_floor: f64,
    /// Noise-only exponential terms.
    pub noise_terms: usize,
    pub noise_var: f64,
}

impl EnergyModel {
    /// Conditional statistic given backscatter power `u`.
    pub fn given(&self, u: f64) -> ExpMixtureCf {
        let mut terms: Vec<(f64, u32)> =
            self.signal_weights.iter().map(|&w| (w * u + self.signal_floor, 1)).collect();
        terms.push((self.noise_var, self.noise_terms as u32));
        ExpMixtureCf::from_means(terms)
    }

    /// Mean energy averaged over the backscatter power.
    pub fn mean(&self, u_mean: f64) -> f64 {
        self.signal_weights.iter().sum::<f64>() * u_mean
            + self.signal_floor * self.signal_weights.len() as f64
            + self.noise_var * self.noise_terms as f64
    }

    pub fn n_bins(&self) -> usize {
        self.signal_weights.len() + self.noise_terms
    }

    /// Noise-only statistic over the same bins.
    pub fn noise_only(&self) -> ExpMixtureCf {
        ExpMixtureCf::erlang(self.n_bins() as u32, self.noise_var)
    }
}

/// Nonzero eigenvalues of the L x L matrix
/// `G[l][l'] = sqrt(p_l p_l') sum_j exp(j 2 pi s_j (l - l') / n)` over the source
/// bins `s_j`, sorted descending, at most `min(L, sources)` of them.
pub fn cascade_eigenvalues(sources: &[usize], tap_powers: &[f64], n: usize) -> Vec<f64> {
    let l = tap_powers.len();
    let g = DMatrix::<Complex64>::from_fn(l, l, |a, b| {
        let d = a as f64 - b as f64;
        let s: Complex64 = sources
            .iter()
            .map(|&j| Complex64::from_polar(1.0, 2.0 * PI * j as f64 * d / n as f64))
            .sum();
        s * (tap_powers[a] * tap_powers[b]).sqrt()
    });
    let mut eig: Vec<f64> = g.symmetric_eigen().eigenvalues.iter().map(|v| v.max(0.0)).collect();
    eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
    eig.truncate(l.min(sources.len()));
    eig
}

/// Bins whose energy lands on `bins` under a shift, i.e. data sources.
fn sources_for(map: &AllocationMap, bins: &[usize], shift: usize) -> Vec<usize> {
    bins.iter()
        .filter(|&&k| k >= shift && matches!(map.roles[k - shift], Role::Data(_)))
        .map(|&k| k - shift)
        .collect()
}

/// Energy model of device `device`'s landing bins for `slot` at noise
/// variance `noise_var`.
pub fn energy_model(
    cfg: &ValidatedConfig,
    map: &AllocationMap,
    device: usize,
    slot: usize,
    with_shared: bool,
    noise_var: f64,
    rate_model: RateModel,
) -> EnergyModel {
    let c = cfg.config();
    let bins = map.designated(device, slot, with_shared);
    let shift = map.shift(device, slot);
    let alpha2 = c.alpha[device - 1].norm_sqr();
    match rate_model {
        RateModel::Covariance => {
            let sources = sources_for(map, &bins, shift);
            let eig = cascade_eigenvalues(&sources, &c.channel_profile.forward, map.n);
            EnergyModel {
                noise_terms: bins.len() - eig.len(),
                signal_weights: eig.into_iter().map(|e| alpha2 * e).collect(),
                signal_floor: noise_var,
                noise_var,
            }
        }
        RateModel::UniformMean => {
            // Per-bin cascaded channel power is the forward link's total power.
            let h_pow: f64 = c.channel_profile.forward.iter().sum();
            let nb = bins.len() as f64;
            let alpha = c.alpha[device - 1].norm();
            // The noise variance per real component is half the complex one.
            let (weight, floor) = match c.modulation {
                Modulation::Ofsk => (2.0 * alpha * nb * (h_pow + 0.5 * noise_var), 0.0),
                Modulation::Mfsk => (2.0 * alpha * nb * h_pow, noise_var),
            };
            EnergyModel {
                signal_weights: vec![weight; bins.len()],
                signal_floor: floor,
                noise_terms: 0,
                noise_var,
            }
        }
    }
}

/// Gauss-Legendre nodes per panel when averaging over the backscatter power.
const NODES_PER_PANEL: usize = 16;
/// Maximum change allowed when the averaging rule is refined.
pub const MARGINAL_GUARD: f64 = 1e-7;

/// Panel edges in units of the mean power: one panel below 1e-8, one per
/// decade up to 10, then the tail to 40 (beyond which the density is < 5e-18).
fn marginal_rule(nodes: usize) -> (Vec<f64>, Vec<f64>) {
    let mut breaks = vec![0.0];
    breaks.extend((-8..=1).map(|d| 10f64.powi(d)));
    breaks.push(40.0);
    composite_rule(&breaks, nodes)
}

/// `E[g(u)]` for `u ~ Exp(u_mean)` by a composite Gauss-Legendre rule with
/// decade-spaced panels, which resolves detection transitions at very small
/// `u` as well as the bulk of the density.
pub fn average_over_backscatter<G>(g: G, u_mean: f64, nodes: usize) -> Result<f64>
where
    G: Fn(f64) -> Result<f64>,
{
    let (xs, ws) = marginal_rule(nodes);
    let mut acc = 0.0;
    for (x, w) in xs.iter().zip(&ws) {
        acc += w * (-x).exp() * g(u_mean * x)?;
    }
    Ok(acc)
}

/// Same as [`average_over_backscatter`] but also evaluates the doubled rule
/// and fails if the two differ by more than [`MARGINAL_GUARD`].
pub fn average_guarded<G>(g: G, u_mean: f64) -> Result<f64>
where
    G: Fn(f64) -> Result<f64>,
{
    let coarse = average_over_backscatter(&g, u_mean, NODES_PER_PANEL)?;
    let fine = average_over_backscatter(&g, u_mean, 2 * NODES_PER_PANEL)?;
    let diff = (coarse - fine).abs();
    if diff > MARGINAL_GUARD {
        return Err(Error::QuadratureNonConvergence { achieved: diff, target: MARGINAL_GUARD });
    }
    Ok(fine)
}

/// One device's OFSK detector statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct OfskModel {
    pub signal: EnergyModel,
    pub u_mean: f64,
}

impl OfskModel {
    fn fading_free(&self) -> bool {
        self.signal.signal_weights.iter().all(|&w| w == 0.0)
    }

    pub fn pfa(&self, gamma: f64) -> Result<f64> {
        Ok(1.0 - cdf_gil_pelaez(&self.signal.noise_only(), gamma)?)
    }

    pub fn pmd_with(&self, gamma: f64, nodes: usize) -> Result<f64> {
        if self.fading_free() {
            return cdf_gil_pelaez(&self.signal.given(0.0), gamma);
        }
        average_over_backscatter(|u| cdf_gil_pelaez(&self.signal.given(u), gamma), self.u_mean, nodes)
    }

    pub fn pmd(&self, gamma: f64) -> Result<f64> {
        self.pmd_with(gamma, NODES_PER_PANEL)
    }

    pub fn pmd_guarded(&self, gamma: f64) -> Result<f64> {
        if self.fading_free() {
            return cdf_gil_pelaez(&self.signal.given(0.0), gamma);
        }
        average_guarded(|u| cdf_gil_pelaez(&self.signal.given(u), gamma), self.u_mean)
    }

    /// `(pmd, pfa)` at a threshold.
    pub fn error_point(&self, gamma: f64) -> Result<(f64, f64)> {
        Ok((self.pmd_guarded(gamma)?, self.pfa(gamma)?))
    }

    pub fn mean_h1(&self) -> f64 {
        self.signal.mean(self.u_mean)
    }
}

/// One device's MFSK detector statistics, indexed by transmitted bit.
#[derive(Debug, Clone, PartialEq)]
pub struct MfskModel {
    pub signal: [EnergyModel; 2],
    pub u_mean: f64,
}

impl MfskModel {
    /// `Pr(error | bit, u) = F_{R_sig - R_other}(0)`.
    fn conditional_error(&self, bit: usize, u: f64) -> Result<f64> {
        let other = &self.signal[1 - bit];
        let d = DifferenceCf { plus: self.signal[bit].given(u), minus: other.noise_only() };
        cdf_gil_pelaez(&d, 0.0)
    }

    /// Bit error rate averaged over equiprobable bits and backscatter fading.
    pub fn pe(&self) -> Result<f64> {
        let e0 = average_guarded(|u| self.conditional_error(0, u), self.u_mean)?;
        let e1 = average_guarded(|u| self.conditional_error(1, u), self.u_mean)?;
        Ok(0.5 * (e0 + e1))
    }
}

fn u_mean(cfg: &ValidatedConfig) -> f64 {
    cfg.config().channel_profile.backscatter.iter().sum()
}

pub fn ofsk_model(
    cfg: &ValidatedConfig,
    map: &AllocationMap,
    device: usize,
    with_shared: bool,
    noise_var: f64,
    rate_model: RateModel,
) -> OfskModel {
    OfskModel {
        signal: energy_model(cfg, map, device, 0, with_shared, noise_var, rate_model),
        u_mean: u_mean(cfg),
    }
}

pub fn mfsk_model(
    cfg: &ValidatedConfig,
    map: &AllocationMap,
    device: usize,
    with_shared: bool,
    noise_var: f64,
    rate_model: RateModel,
) -> MfskModel {
    MfskModel {
        signal: [
            energy_model(cfg, map, device, 0, with_shared, noise_var, rate_model),
            energy_model(cfg, map, device, 1, with_shared, noise_var, rate_model),
        ],
        u_mean: u_mean(cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{validate, Scheme, SystemConfig};

    fn fo(modulation: Modulation, alpha: f64) -> (ValidatedConfig, AllocationMap) {
        let v = validate(SystemConfig { modulation, ..SystemConfig::default() }.with_devices(1, alpha))
            .unwrap();
        let m = AllocationMap::build(&v);
        (v, m)
    }

    #[test]
    fn fo_ofsk_eigenvalues() {
        // 32 even sources: G = 32 I scaled by 1/4 per tap.
        let (v, m) = fo(Modulation::Ofsk, 1.0);
        let e = energy_model(&v, &m, 1, 0, false, 0.01, RateModel::Covariance);
        assert_eq!(e.noise_terms, 28);
        for w in &e.signal_weights {
            assert!((w - 8.0).abs() < 1e-10);
        }
    }

    #[test]
    fn eigenvalues_match_direct_trace() {
        let sources = [0usize, 3, 6, 9, 12, 30, 41];
        let p = [0.4, 0.3, 0.2, 0.1];
        let e = cascade_eigenvalues(&sources, &p, 64);
        // trace = |sources| * sum p
        assert!((e.iter().sum::<f64>() - 7.0).abs() < 1e-10);
        assert_eq!(cascade_eigenvalues(&[5], &p, 64).len(), 1);
    }

    #[test]
    fn threshold_limits() {
        let (v, m) = fo(Modulation::Ofsk, 0.5);
        let model = ofsk_model(&v, &m, 1, false, v.noise_variance(10.0), RateModel::Covariance);
        let (pmd, pfa) = model.error_point(0.0).unwrap();
        assert!(pmd < 1e-8 && pfa > 1.0 - 1e-8);
        let big = 100.0 * model.mean_h1();
        assert!(model.pfa(big).unwrap() < 1e-8);
        assert!(model.pmd(big).unwrap() > 0.99);
    }

    #[test]
    fn pmd_pfa_monotone() {
        let (v, m) = fo(Modulation::Ofsk, 0.25);
        let model = ofsk_model(&v, &m, 1, false, v.noise_variance(5.0), RateModel::Covariance);
        let top = 3.0 * model.mean_h1();
        let mut last = (0.0, 1.0);
        for i in 0..30 {
            let g = top * i as f64 / 29.0;
            let pmd = model.pmd(g).unwrap();
            let pfa = model.pfa(g).unwrap();
            assert!(pmd >= last.0 - 1e-9 && pfa <= last.1 + 1e-9);
            last = (pmd, pfa);
        }
    }

    #[test]
    fn mfsk_symmetric_half_and_decreasing() {
        let (v, m) = fo(Modulation::Mfsk, 0.0);
        let model = mfsk_model(&v, &m, 1, false, 0.1, RateModel::Covariance);
        assert!((model.pe().unwrap() - 0.5).abs() < 1e-7);
        let (v, m) = fo(Modulation::Mfsk, 1.0);
        let mut last = 1.0;
        for snr in [0.0, 10.0, 20.0, 30.0] {
            let model = mfsk_model(&v, &m, 1, false, v.noise_variance(snr), RateModel::Covariance);
            let pe = model.pe().unwrap();
            assert!(pe < last);
            last = pe;
        }
    }

    #[test]
    fn so_pre_sic_single_bin() {
        let v = validate(
            SystemConfig { scheme: Scheme::SemiOrthogonal, ..SystemConfig::default() }.with_devices(2, 0.5),
        )
        .unwrap();
        let m = AllocationMap::build(&v);
        let e = energy_model(&v, &m, 2, 0, false, 0.1, RateModel::Covariance);
        assert_eq!(e.n_bins(), 1);
        assert_eq!(e.signal_weights.len(), 1);
        // single source bin: eigenvalue = total forward power
        assert!((e.signal_weights[0] - 0.25).abs() < 1e-12);
    }
}
