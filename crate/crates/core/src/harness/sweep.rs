//! Parameter sweeps: cell enumeration, Monte Carlo runs, paired analytic
//! records, ROC points, sum-rates and the simultaneous-access baseline.

use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::record::{CellKey, MetricRecord, Source};
use super::sim::{CellCounts, CellSetup, DetectMode};
use super::stats::{cell_rng, mean_interval, wilson, Z95};
use crate::analytic::pe::{mfsk_model, ofsk_model, RateModel};
use crate::analytic::rate::{sum_rate, SharedInterference};
use crate::analytic::threshold::{min_error_threshold, pfa_target_threshold};
use crate::backscatter::BdProfile;
use crate::channel::draw;
use crate::config::{
    validate, ConfigFile, Modulation, PostSicDetector, Scheme, SystemConfig, ThresholdMode, ValidatedConfig,
};
use crate::error::{Error, Result};
use crate::ofdm::{AllocationMap, Ofdm};

pub const DEFAULT_MAX_CELLS: usize = 10_000;
pub const DEFAULT_RATE_REALIZATIONS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    PrimaryBer,
    BdBer,
    Pmd,
    Pfa,
    Roc,
    SumRate,
}

impl FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "primary_ber" => Metric::PrimaryBer,
            "bd_ber" => Metric::BdBer,
            "pmd" => Metric::Pmd,
            "pfa" => Metric::Pfa,
            "roc" => Metric::Roc,
            "sum_rate" => Metric::SumRate,
            other => return Err(Error::InvalidConfig(format!("unknown metric `{other}`"))),
        })
    }
}

/// Carrier-offset condition of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CfoMode {
    pub eps: f64,
    pub compensate: bool,
}

impl CfoMode {
    fn label(&self) -> String {
        match (self.eps == 0.0, self.compensate) {
            (true, false) => "off".into(),
            (_, false) => format!("{}", self.eps),
            (_, true) => format!("{}+comp", self.eps),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSpec {
    pub base: SystemConfig,
    pub schemes: Vec<Scheme>,
    pub modulations: Vec<Modulation>,
    pub n_grid: Vec<usize>,
    pub p_grid: Vec<usize>,
    pub alpha_grid: Vec<f64>,
    pub metrics: Vec<Metric>,
    pub sic: Vec<bool>,
    pub cfo: Vec<CfoMode>,
    /// Add analytic records next to the simulated ones where a model exists.
    pub analytic: bool,
    pub max_cells: usize,
    /// Nominal false-alarm levels of the ROC points.
    pub roc_pfa: Vec<f64>,
    pub rate_realizations: usize,
    pub post_sic: PostSicDetector,
    /// Also run the simultaneous-access baseline for every cell.
    pub baseline: bool,
}

impl SweepSpec {
    /// Single-cell-per-SNR sweep of one configuration.
    pub fn from_config(base: SystemConfig, metrics: Vec<Metric>) -> Self {
        Self {
            schemes: vec![base.scheme],
            modulations: vec![base.modulation],
            n_grid: vec![base.n_subcarriers],
            p_grid: vec![base.num_bds],
            alpha_grid: vec![base.alpha.first().map_or(0.25, |a| a.re)],
            sic: vec![false],
            cfo: vec![CfoMode { eps: base.cfo_normalized, compensate: false }],
            base,
            metrics,
            analytic: true,
            max_cells: DEFAULT_MAX_CELLS,
            roc_pfa: default_roc_pfa(),
            rate_realizations: DEFAULT_RATE_REALIZATIONS,
            post_sic: PostSicDetector::default(),
            baseline: false,
        }
    }

    /// Sweep described by a config file; absent sweep keys collapse to the
    /// file's single system values.
    pub fn from_file(file: &ConfigFile) -> Result<Self> {
        let base = file.system_config();
        let metrics = match &file.metrics {
            Some(list) => list.iter().map(|m| m.parse()).collect::<Result<Vec<_>>>()?,
            None => vec![Metric::BdBer],
        };
        let mut spec = Self::from_config(base, metrics);
        if let Some(v) = &file.schemes {
            spec.schemes = v.clone();
        }
        if let Some(v) = &file.modulations {
            spec.modulations = v.clone();
        }
        if let Some(v) = &file.n_grid {
            spec.n_grid = v.clone();
        }
        if let Some(v) = &file.p_grid {
            spec.p_grid = v.clone();
        }
        if let Some(v) = &file.alpha_grid {
            spec.alpha_grid = v.clone();
        }
        if let Some(v) = &file.sic {
            spec.sic = v.clone();
        }
        let eps_list = file.cfo_grid.clone().unwrap_or_else(|| vec![spec.base.cfo_normalized]);
        let comp_list = file.cfo_compensate.clone().unwrap_or_else(|| vec![false]);
        spec.set_cfo(&eps_list, &comp_list);
        if let Some(v) = file.analytic {
            spec.analytic = v;
        }
        if let Some(v) = file.max_cells {
            spec.max_cells = v;
        }
        if let Some(v) = &file.roc_pfa {
            spec.roc_pfa = v.clone();
        }
        if let Some(v) = file.rate_realizations {
            spec.rate_realizations = v;
        }
        if let Some(v) = file.post_sic_detector {
            spec.post_sic = v;
        }
        if let Some(v) = file.baseline {
            spec.baseline = v;
        }
        Ok(spec)
    }

    pub fn set_cfo(&mut self, eps: &[f64], compensate: &[bool]) {
        self.cfo = eps
            .iter()
            .flat_map(|&e| compensate.iter().map(move |&c| CfoMode { eps: e, compensate: c }))
            .collect();
    }

    pub fn wants(&self, m: Metric) -> bool {
        self.metrics.contains(&m)
    }

    fn wants_simulation(&self) -> bool {
        [Metric::PrimaryBer, Metric::BdBer, Metric::Pmd, Metric::Pfa, Metric::Roc]
            .iter()
            .any(|&m| self.wants(m))
    }

    /// All cells of the cross product, in output order. Fully-orthogonal
    /// schemes have nothing to cancel, so they only run without SIC.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        if self.base.num_trials == 0 {
            return Err(Error::InvalidConfig("num_trials must be positive".into()));
        }
        if self.metrics.is_empty() {
            return Err(Error::InvalidConfig("no metrics selected".into()));
        }
        let mut cells = Vec::new();
        for &scheme in &self.schemes {
            for &modulation in &self.modulations {
                for &n in &self.n_grid {
                    for &p in &self.p_grid {
                        for &alpha in &self.alpha_grid {
                            let mut sics = self.sic.clone();
                            if scheme == Scheme::FullyOrthogonal {
                                sics = vec![false];
                            }
                            for &sic in &sics {
                                for &cfo in &self.cfo {
                                    cells.push(self.cell(scheme, modulation, n, p, alpha, sic, cfo)?);
                                }
                            }
                        }
                    }
                }
            }
        }
        let total = cells.len() * self.base.snr_db_grid.len();
        if total > self.max_cells {
            return Err(Error::CellBudgetExceeded { cells: total, budget: self.max_cells });
        }
        Ok(cells)
    }

    #[allow(clippy::too_many_arguments)]
    fn cell(&self, scheme: Scheme, modulation: Modulation, n: usize, p: usize, alpha: f64, sic: bool, cfo: CfoMode) -> Result<Cell> {
        let cfg = validate(SystemConfig {
            scheme,
            modulation,
            n_subcarriers: n,
            num_bds: p,
            alpha: vec![Complex64::new(alpha, 0.0); p],
            cfo_normalized: cfo.eps,
            ..self.base.clone()
        })?;
        Ok(Cell { cfg, alpha, sic, cfo })
    }
}

fn default_roc_pfa() -> Vec<f64> {
    vec![1e-3, 2e-3, 5e-3, 1e-2, 2e-2, 5e-2, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
}

/// One point of the sweep grid except SNR.
#[derive(Debug, Clone)]
pub struct Cell {
    pub cfg: ValidatedConfig,
    pub alpha: f64,
    pub sic: bool,
    pub cfo: CfoMode,
}

impl Cell {
    pub fn key(&self, snr_db: f64) -> CellKey {
        let c = self.cfg.config();
        CellKey {
            scheme: c.scheme.to_string(),
            modulation: c.modulation.to_string(),
            n: c.n_subcarriers,
            p: c.num_bds,
            alpha: self.alpha,
            snr_db,
            cfo: self.cfo.label(),
            sic: if self.sic { "on".into() } else { "off".into() },
        }
    }

    fn baseline_key(&self, snr_db: f64) -> CellKey {
        CellKey {
            scheme: "simultaneous-access".into(),
            modulation: "antipodal".into(),
            n: self.cfg.n(),
            sic: "on".into(),
            ..self.key(snr_db)
        }
    }
}

/// Decision threshold of every OFSK device in a cell; empty for MFSK.
fn device_thresholds(cfg: &ValidatedConfig, map: &AllocationMap, noise_var: f64, with_shared: bool) -> Result<Vec<f64>> {
    let c = cfg.config();
    if c.modulation != Modulation::Ofsk {
        return Ok(Vec::new());
    }
    (1..=cfg.p())
        .map(|dev| {
            let model = ofsk_model(cfg, map, dev, with_shared, noise_var, RateModel::Covariance);
            match c.threshold_mode {
                ThresholdMode::PfaTarget => pfa_target_threshold(&model, c.pfa_target),
                ThresholdMode::MinError => min_error_threshold(&model),
            }
        })
        .collect()
}

fn binomial(key: &CellKey, metric: &str, hits: u64, trials: u64, wall: u64) -> MetricRecord {
    let value = if trials == 0 { 0.0 } else { hits as f64 / trials as f64 };
    let (lo, hi) = wilson(hits, trials, Z95);
    MetricRecord {
        key: key.clone(),
        metric: metric.into(),
        value,
        ci_lo: lo.min(value),
        ci_hi: hi.max(value),
        trials,
        source: Source::Montecarlo,
        wall_time_ms: wall,
    }
}

/// Everything a sweep produced, in canonical order.
#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub records: Vec<MetricRecord>,
    pub cells: usize,
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepOutput> {
    let cells = spec.cells()?;
    let jobs: Vec<(&Cell, f64)> =
        cells.iter().flat_map(|c| spec.base.snr_db_grid.iter().map(move |&s| (c, s))).collect();
    let results: Vec<Result<Vec<MetricRecord>>> =
        jobs.par_iter().map(|(cell, snr)| run_point(spec, cell, *snr)).collect();
    let mut records = Vec::new();
    for r in results {
        records.extend(r?);
    }
    Ok(SweepOutput { records, cells: jobs.len() })
}

/// Simulation setup for one cell and SNR.
pub fn cell_setup(cell: &Cell, snr_db: f64, mode: DetectMode) -> Result<CellSetup> {
    let cfg = &cell.cfg;
    let c = cfg.config();
    let (map, profiles) = if mode == DetectMode::Baseline {
        let map = AllocationMap::for_scheme(Scheme::FullyOrthogonal, Modulation::Ofsk, cfg.n(), 0);
        let profiles = c
            .alpha
            .iter()
            .enumerate()
            .map(|(i, &a)| BdProfile { index: i + 1, alpha: a, modulation: Modulation::Ofsk, shift_bit0: 0, shift_bit1: 0 })
            .collect();
        (AllocationMap { p: cfg.p(), ..map }, profiles)
    } else {
        let map = AllocationMap::build(cfg);
        let profiles = BdProfile::all(&map, &c.alpha);
        (map, profiles)
    };
    let noise_var = cfg.noise_variance(snr_db);
    let thresholds = match mode {
        DetectMode::Nulls => device_thresholds(cfg, &map, noise_var, false)?,
        DetectMode::SicEnergy => device_thresholds(cfg, &map, noise_var, true)?,
        _ => Vec::new(),
    };
    let key = if mode == DetectMode::Baseline { cell.baseline_key(snr_db) } else { cell.key(snr_db) };
    Ok(CellSetup {
        cfg: cfg.clone(),
        ofdm: Ofdm::new(cfg.n(), c.cp_len),
        map,
        profiles,
        noise_var,
        mode,
        cfo_compensate: cell.cfo.compensate,
        thresholds,
        roc_thresholds: Vec::new(),
        key: key.stream_key(),
    })
}

fn detect_mode(spec: &SweepSpec, cell: &Cell) -> DetectMode {
    if cell.sic && cell.cfg.config().scheme == Scheme::SemiOrthogonal {
        match spec.post_sic {
            PostSicDetector::Ml => DetectMode::SicMl,
            PostSicDetector::Energy => DetectMode::SicEnergy,
        }
    } else {
        DetectMode::Nulls
    }
}

fn run_point(spec: &SweepSpec, cell: &Cell, snr_db: f64) -> Result<Vec<MetricRecord>> {
    let start = Instant::now();
    let key = cell.key(snr_db);
    let mut out = Vec::new();
    let trials = cell.cfg.config().num_trials;
    let mode = detect_mode(spec, cell);

    if spec.wants_simulation() {
        let mut setup = cell_setup(cell, snr_db, mode)?;
        let roc = spec.wants(Metric::Roc) && cell.cfg.config().modulation == Modulation::Ofsk && mode == DetectMode::Nulls;
        if roc {
            setup.roc_thresholds = roc_thresholds(&setup, &spec.roc_pfa)?;
        }
        let counts = setup.simulate(trials)?;
        let wall = start.elapsed().as_millis() as u64;
        out.extend(simulated_records(spec, &key, &counts, cell, wall));
        if roc {
            out.extend(roc_records(&key, &spec.roc_pfa, &counts, wall));
        }
        if spec.analytic {
            out.extend(analytic_records(spec, cell, &setup, &key)?);
        }
        if cell.cfo.compensate {
            out.push(binomial(&key, "cfo_within_1e-3", counts.cfo_within_tol, counts.cfo_frames, wall));
        }
    }

    if spec.baseline && spec.wants(Metric::BdBer) {
        let setup = cell_setup(cell, snr_db, DetectMode::Baseline)?;
        let counts = setup.simulate(trials)?;
        let wall = start.elapsed().as_millis() as u64;
        out.push(binomial(&cell.baseline_key(snr_db), "bd_ber", counts.bd_errors, counts.bd_decisions, wall));
    }

    if spec.wants(Metric::SumRate) {
        out.extend(rate_records(spec, cell, snr_db, &key)?);
    }
    Ok(out)
}

fn simulated_records(spec: &SweepSpec, key: &CellKey, c: &CellCounts, cell: &Cell, wall: u64) -> Vec<MetricRecord> {
    let mut out = Vec::new();
    if spec.wants(Metric::PrimaryBer) {
        out.push(binomial(key, "primary_ber", c.primary_errors, c.primary_bits, wall));
    }
    if spec.wants(Metric::BdBer) {
        out.push(binomial(key, "bd_ber", c.bd_errors, c.bd_decisions, wall));
    }
    if cell.cfg.config().modulation == Modulation::Ofsk {
        if spec.wants(Metric::Pmd) {
            out.push(binomial(key, "pmd", c.misses, c.h1, wall));
        }
        if spec.wants(Metric::Pfa) {
            out.push(binomial(key, "pfa", c.false_alarms, c.h0, wall));
        }
    }
    out
}

/// Thresholds hitting each nominal false-alarm level under the exact
/// noise-only model of device 1.
fn roc_thresholds(setup: &CellSetup, targets: &[f64]) -> Result<Vec<f64>> {
    let model = ofsk_model(&setup.cfg, &setup.map, 1, false, setup.noise_var, RateModel::Covariance);
    targets
        .iter()
        .map(|&t| if t >= 1.0 { Ok(0.0) } else { pfa_target_threshold(&model, t) })
        .collect()
}

fn roc_records(key: &CellKey, targets: &[f64], c: &CellCounts, wall: u64) -> Vec<MetricRecord> {
    let mut out = Vec::new();
    for (i, t) in targets.iter().enumerate() {
        out.push(binomial(key, &format!("roc_pfa@{t}"), c.roc_h0_above[i], c.h0, wall));
        out.push(binomial(key, &format!("roc_pd@{t}"), c.roc_h1_above[i], c.h1, wall));
    }
    out
}

/// Theory next to simulation where the non-coherent models describe the
/// simulated detector: the null-bin detector without a carrier offset. The
/// shared-bin models assume each slot's bins see only that slot's landing,
/// which the overlapping post-cancellation residual does not satisfy.
fn analytic_records(spec: &SweepSpec, cell: &Cell, setup: &CellSetup, key: &CellKey) -> Result<Vec<MetricRecord>> {
    let mut out = Vec::new();
    if cell.cfo.eps != 0.0 || setup.mode != DetectMode::Nulls {
        return Ok(out);
    }
    let cfg = &setup.cfg;
    let c = cfg.config();
    let p = cfg.p() as f64;
    match c.modulation {
        Modulation::Ofsk => {
            let (mut pmd, mut pfa) = (0.0, 0.0);
            for dev in 1..=cfg.p() {
                let model = ofsk_model(cfg, &setup.map, dev, false, setup.noise_var, RateModel::Covariance);
                let (m, f) = model.error_point(setup.thresholds[dev - 1])?;
                pmd += m / p;
                pfa += f / p;
            }
            let pe = 0.5 * (pmd + pfa);
            if spec.wants(Metric::BdBer) {
                out.push(MetricRecord::analytic(key, "bd_ber", pe));
            }
            if spec.wants(Metric::Pmd) {
                out.push(MetricRecord::analytic(key, "pmd", pmd));
            }
            if spec.wants(Metric::Pfa) {
                out.push(MetricRecord::analytic(key, "pfa", pfa));
            }
            if spec.wants(Metric::Roc) && setup.mode == DetectMode::Nulls {
                let model = ofsk_model(cfg, &setup.map, 1, false, setup.noise_var, RateModel::Covariance);
                for (&t, g) in spec.roc_pfa.iter().zip(roc_thresholds(setup, &spec.roc_pfa)?) {
                    let (m, f) = if t >= 1.0 { (0.0, 1.0) } else { model.error_point(g)? };
                    out.push(MetricRecord::analytic(key, &format!("roc_pfa@{t}"), f));
                    out.push(MetricRecord::analytic(key, &format!("roc_pd@{t}"), 1.0 - m));
                }
            }
        }
        Modulation::Mfsk => {
            if spec.wants(Metric::BdBer) {
                let mut pe = 0.0;
                for dev in 1..=cfg.p() {
                    pe += mfsk_model(cfg, &setup.map, dev, false, setup.noise_var, RateModel::Covariance).pe()? / p;
                }
                out.push(MetricRecord::analytic(key, "bd_ber", pe));
            }
            // The reference channel is the direct link alone, so each data
            // bin is Rayleigh-faded BPSK.
            if spec.wants(Metric::PrimaryBer) && c.scheme == Scheme::FullyOrthogonal && c.sic_error_var_h == 0.0 {
                let g = c.channel_profile.direct.iter().sum::<f64>() / setup.noise_var;
                out.push(MetricRecord::analytic(key, "primary_ber", 0.5 * (1.0 - (g / (1.0 + g)).sqrt())));
            }
        }
    }
    Ok(out)
}

/// Ensemble-mean sum-rates with normal-approximation intervals.
fn rate_records(spec: &SweepSpec, cell: &Cell, snr_db: f64, key: &CellKey) -> Result<Vec<MetricRecord>> {
    let start = Instant::now();
    let cfg = &cell.cfg;
    let c = cfg.config();
    let map = AllocationMap::build(cfg);
    let noise_var = cfg.noise_variance(snr_db);
    let interference = if cell.sic {
        SharedInterference::Residual { var_h: c.sic_error_var_h, var_x: c.sic_error_var_x }
    } else {
        SharedInterference::Direct
    };
    let mut rng = cell_rng(c.seed, &format!("{}|rate", key.stream_key()), 0);
    let n = spec.rate_realizations.max(1);
    let (mut bd, mut pr, mut tot) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..n {
        let real = draw(&c.channel_profile, cfg.p(), 0.0, &mut rng);
        let r = sum_rate(&map, &real, &c.alpha, noise_var, c.subcarrier_spacing_hz, interference);
        bd.push(r.r_bd);
        pr.push(r.r_primary);
        tot.push(r.r_total);
    }
    let wall = start.elapsed().as_millis() as u64;
    let rec = |metric: &str, v: &[f64]| {
        let (mean, lo, hi) = mean_interval(v, Z95);
        MetricRecord {
            key: key.clone(),
            metric: metric.into(),
            value: mean,
            ci_lo: lo,
            ci_hi: hi,
            trials: n as u64,
            source: Source::Analytic,
            wall_time_ms: wall,
        }
    };
    Ok(vec![rec("sum_rate_total", &tot), rec("sum_rate_bd", &bd), rec("sum_rate_primary", &pr)])
}

/// Runs one cell's OFSK detector at explicit thresholds and returns the
/// empirical `(pfa, pd)` pairs.
pub fn run_roc(cell: &Cell, snr_db: f64, thresholds: &[f64]) -> Result<Vec<(f64, f64)>> {
    if cell.cfg.config().modulation != Modulation::Ofsk {
        return Err(Error::InvalidConfig("ROC needs an OFSK cell".into()));
    }
    let mut setup = cell_setup(cell, snr_db, DetectMode::Nulls)?;
    setup.roc_thresholds = thresholds.to_vec();
    let c = setup.simulate(cell.cfg.config().num_trials)?;
    Ok((0..thresholds.len())
        .map(|i| (c.roc_h0_above[i] as f64 / c.h0.max(1) as f64, c.roc_h1_above[i] as f64 / c.h1.max(1) as f64))
        .collect())
}

/// Device bit-error rate of the simultaneous-access baseline for one cell.
pub fn run_sa_baseline(cell: &Cell, snr_db: f64) -> Result<MetricRecord> {
    let start = Instant::now();
    let setup = cell_setup(cell, snr_db, DetectMode::Baseline)?;
    let c = setup.simulate(cell.cfg.config().num_trials)?;
    Ok(binomial(&cell.baseline_key(snr_db), "bd_ber", c.bd_errors, c.bd_decisions, start.elapsed().as_millis() as u64))
}

/// Simulated counts of one cell, for callers that need raw tallies.
pub fn simulate_cell(spec: &SweepSpec, cell: &Cell, snr_db: f64) -> Result<CellCounts> {
    let setup = cell_setup(cell, snr_db, detect_mode(spec, cell))?;
    setup.simulate(cell.cfg.config().num_trials)
}
