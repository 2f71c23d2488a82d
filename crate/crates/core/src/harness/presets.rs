//! Parameter grids of the evaluation figures.

use super::sweep::{Metric, SweepSpec};
use crate::config::{Modulation, PostSicDetector, Scheme, SnrReference, SystemConfig};
use crate::error::{Error, Result};

pub const PRESETS: [&str; 15] = [
    "fig5", "fig6", "fig7", "fig8", "fig9", "fig10", "fig11", "fig12", "fig13", "fig14", "fig15", "fig16", "fig17",
    "fig18", "fig19",
];

const ALPHAS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];
const N_GRID: [usize; 4] = [64, 128, 256, 512];

fn spec(scheme: Scheme, modulation: Modulation, metrics: Vec<Metric>) -> SweepSpec {
    let base = SystemConfig { scheme, modulation, ..SystemConfig::default() };
    SweepSpec::from_config(base, metrics)
}

fn rate_spec(snr: Vec<f64>) -> SweepSpec {
    let base = SystemConfig { snr_db_grid: snr, snr_reference: SnrReference::Subcarrier, ..SystemConfig::default() };
    let mut s = SweepSpec::from_config(base, vec![Metric::SumRate]);
    s.schemes = vec![Scheme::FullyOrthogonal, Scheme::SemiOrthogonal];
    s.modulations = vec![Modulation::Ofsk, Modulation::Mfsk];
    s.analytic = false;
    s
}

pub fn preset(name: &str) -> Result<SweepSpec> {
    use Modulation::*;
    use Scheme::*;
    let fo_so = vec![FullyOrthogonal, SemiOrthogonal];
    let s = match name {
        "fig5" => {
            let mut s = spec(FullyOrthogonal, Ofsk, vec![Metric::PrimaryBer]);
            s.schemes = fo_so;
            s.modulations = vec![Ofsk, Mfsk];
            s
        }
        "fig6" => {
            let mut s = spec(FullyOrthogonal, Ofsk, vec![Metric::Pmd, Metric::Pfa, Metric::BdBer]);
            s.alpha_grid = ALPHAS.to_vec();
            s
        }
        "fig7" => {
            let mut s = spec(FullyOrthogonal, Ofsk, vec![Metric::Pmd, Metric::Pfa, Metric::BdBer]);
            s.n_grid = N_GRID.to_vec();
            s
        }
        "fig8" => {
            let mut s = spec(FullyOrthogonal, Ofsk, vec![Metric::Roc]);
            s.base.snr_db_grid = vec![0.0, 5.0, 10.0];
            s
        }
        "fig9" | "fig12" => {
            let m = if name == "fig9" { Ofsk } else { Mfsk };
            let mut s = spec(SemiOrthogonal, m, vec![Metric::BdBer, Metric::Pmd, Metric::Pfa]);
            s.alpha_grid = ALPHAS.to_vec();
            s.sic = vec![false, true];
            s.post_sic = PostSicDetector::Ml;
            s
        }
        "fig10" => {
            let mut s = spec(FullyOrthogonal, Mfsk, vec![Metric::BdBer]);
            s.alpha_grid = ALPHAS.to_vec();
            s
        }
        "fig11" => {
            let mut s = spec(FullyOrthogonal, Mfsk, vec![Metric::BdBer]);
            s.n_grid = N_GRID.to_vec();
            s
        }
        "fig13" => {
            let mut s = spec(FullyOrthogonal, Mfsk, vec![Metric::BdBer]);
            s.set_cfo(&[0.0, 0.01, 0.03, 0.05], &[false, true]);
            s
        }
        "fig14" => {
            let mut s = spec(FullyOrthogonal, Mfsk, vec![Metric::BdBer]);
            s.alpha_grid = ALPHAS.to_vec();
            s.set_cfo(&[0.0, 0.05], &[false, true]);
            s
        }
        "fig15" => {
            let mut s = spec(FullyOrthogonal, Ofsk, vec![Metric::BdBer]);
            s.modulations = vec![Ofsk, Mfsk];
            s.p_grid = vec![2];
            s.alpha_grid = vec![0.5];
            s.baseline = true;
            s
        }
        "fig16" => {
            let mut s = rate_spec(vec![20.0]);
            s.p_grid = (1..=8).collect();
            s
        }
        "fig17" => {
            let mut s = rate_spec(vec![20.0]);
            s.p_grid = (1..=8).collect();
            s.alpha_grid = ALPHAS.to_vec();
            s
        }
        "fig18" => {
            let mut s = rate_spec(vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0]);
            s.p_grid = vec![4];
            s
        }
        "fig19" => {
            let mut s = rate_spec(vec![10.0]);
            s.p_grid = vec![4];
            s.n_grid = N_GRID.to_vec();
            s
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown preset `{other}` (expected one of {})",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_enumerates() {
        for name in PRESETS {
            let s = preset(name).unwrap();
            assert!(!s.cells().unwrap().is_empty(), "{name}");
        }
        assert!(preset("fig99").is_err());
    }

    #[test]
    fn fig6_and_fig19_grids() {
        let s = preset("fig6").unwrap();
        assert_eq!(s.alpha_grid, ALPHAS.to_vec());
        assert_eq!(s.n_grid, vec![64]);
        let s = preset("fig19").unwrap();
        assert_eq!(s.n_grid, N_GRID.to_vec());
        assert_eq!(s.base.snr_db_grid, vec![10.0]);
        assert_eq!(s.alpha_grid, vec![0.25]);
    }
}
