//! OFSK threshold selection.

use super::pe::OfskModel;
use crate::config::ThresholdMode;
use crate::error::Result;

const GRID_POINTS: usize = 200;
const GOLDEN_REL_TOL: f64 = 1e-6;

/// Detector operating point at one threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfskPoint {
    pub gamma: f64,
    pub pmd: f64,
    pub pfa: f64,
}

impl OfskPoint {
    pub fn pe(&self) -> f64 {
        0.5 * (self.pmd + self.pfa)
    }
}

/// Threshold minimising `(PMD + PFA) / 2`: a 200-point grid over
/// `[0, 4 E[R | H1]]` followed by golden-section refinement around the best
/// grid point.
pub fn min_error_threshold(model: &OfskModel) -> Result<f64> {
    let top = 4.0 * model.mean_h1();
    let step = top / (GRID_POINTS - 1) as f64;
    let cost = |g: f64| -> Result<f64> { Ok(0.5 * (model.pmd(g)? + model.pfa(g)?)) };
    let mut best = (0usize, f64::INFINITY);
    for i in 0..GRID_POINTS {
        let c = cost(i as f64 * step)?;
        if c < best.1 {
            best = (i, c);
        }
    }
    let lo = best.0.saturating_sub(1) as f64 * step;
    let hi = ((best.0 + 1).min(GRID_POINTS - 1)) as f64 * step;
    golden_section(cost, lo, hi, GOLDEN_REL_TOL * top.max(f64::MIN_POSITIVE))
}

/// Threshold whose false-alarm probability equals `target` (the smallest
/// threshold with `PFA <= target`, since PFA is non-increasing).
pub fn pfa_target_threshold(model: &OfskModel, target: f64) -> Result<f64> {
    let tol = (1e-3 * target).min(1e-5);
    let mut lo = 0.0;
    let mut hi = model.signal.noise_only().mean().max(f64::MIN_POSITIVE);
    while model.pfa(hi)? > target {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let pfa = model.pfa(mid)?;
        if (pfa - target).abs() < tol {
            return Ok(mid);
        }
        if pfa > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

pub fn optimize_threshold(model: &OfskModel, mode: ThresholdMode, pfa_target: f64) -> Result<f64> {
    match mode {
        ThresholdMode::MinError => min_error_threshold(model),
        ThresholdMode::PfaTarget => pfa_target_threshold(model, pfa_target),
    }
}

/// Threshold plus the guarded PMD and PFA at that threshold.
pub fn ofsk_operating_point(model: &OfskModel, mode: ThresholdMode, pfa_target: f64) -> Result<OfskPoint> {
    let gamma = optimize_threshold(model, mode, pfa_target)?;
    let (pmd, pfa) = model.error_point(gamma)?;
    Ok(OfskPoint { gamma, pmd, pfa })
}

/// Minimum of a unimodal function on `[lo, hi]`.
pub fn golden_section<F>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2)?;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::pe::EnergyModel;

    /// H0 ~ Exp(rate lambda), H1 ~ Exp(rate lambda / 2), with no dependence
    /// on the backscatter power.
    fn toy(lambda: f64) -> OfskModel {
        OfskModel {
            signal: EnergyModel {
                signal_weights: vec![0.0],
                signal_floor: 2.0 / lambda,
                noise_terms: 0,
                noise_var: 1.0 / lambda,
            },
            u_mean: 1.0,
        }
    }

    #[test]
    fn golden_finds_quadratic_min() {
        let x = golden_section(|x| Ok((x - 0.3) * (x - 0.3)), -1.0, 2.0, 1e-9).unwrap();
        assert!((x - 0.3).abs() < 1e-8);
    }

    #[test]
    fn pfa_target_accuracy() {
        let m = toy(4.0);
        let g = pfa_target_threshold(&m, 1e-3).unwrap();
        assert!((m.pfa(g).unwrap() - 1e-3).abs() < 1e-5);
        // closed form for a single exponential
        assert!((g - (1e3f64).ln() / 4.0).abs() < 1e-3);
    }

    #[test]
    fn min_error_matches_dense_grid() {
        let m = toy(2.0);
        let g = min_error_threshold(&m).unwrap();
        let cost = |g: f64| 0.5 * (m.pmd(g).unwrap() + m.pfa(g).unwrap());
        let top = 4.0 * m.mean_h1();
        let brute = (0..4000)
            .map(|i| top * i as f64 / 3999.0)
            .min_by(|a, b| cost(*a).partial_cmp(&cost(*b)).unwrap())
            .unwrap();
        assert!(cost(g) <= cost(brute) + 1e-9);
        // likelihood crossover
        assert!((g - 2f64.ln() / 1.0).abs() < 1e-4, "g={g}");
    }

    #[test]
    fn degenerate_noise_gives_zero_error() {
        let m = OfskModel {
            signal: EnergyModel {
                signal_weights: vec![8.0; 4],
                signal_floor: 1e-9,
                noise_terms: 28,
                noise_var: 1e-9,
            },
            u_mean: 1.0,
        };
        let p = ofsk_operating_point(&m, ThresholdMode::MinError, 1e-3).unwrap();
        assert!(p.pe() < 1e-4, "{p:?}");
    }
}
