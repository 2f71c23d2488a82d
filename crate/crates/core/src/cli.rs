//! Command-line front end. `main` only parses arguments and maps the outcome
//! to an exit code; everything here is callable from tests.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{validate, ConfigFile, Modulation, Scheme};
use crate::error::{Error, Result};
use crate::harness::presets::preset;
use crate::harness::record::{build_id, config_hash, write_artifacts, Manifest};
use crate::harness::sweep::{run_sweep, SweepSpec};
use crate::ofdm::AllocationMap;

pub const OUT_ENV: &str = "SRLINKSIM_OUT";

/// Exit status for anything wrong with the requested configuration.
pub const EXIT_CONFIG: i32 = 2;
/// Exit status for failures while running a valid configuration.
pub const EXIT_RUN: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "srlinksim", version, about = "Link-level simulator for multi-device OFDM backscatter")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a config or preset and print the cells it expands to.
    Validate(Source),
    /// Run a sweep and write metrics.csv and manifest.json.
    Run(RunArgs),
    /// Print the subcarrier allocation of a configuration as JSON.
    DumpAllocation(DumpArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

impl Switch {
    fn on(self) -> bool {
        self == Switch::On
    }
}

#[derive(Debug, Args)]
pub struct Source {
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    pub preset: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, value_enum)]
    pub sic: Option<Switch>,
    #[arg(long, allow_hyphen_values = true)]
    pub cfo: Option<f64>,
    #[arg(long, value_enum)]
    pub cfo_compensate: Option<Switch>,
}

#[derive(Debug, Args)]
pub struct DumpArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub scheme: Option<Scheme>,
    #[arg(long)]
    pub modulation: Option<Modulation>,
    #[arg(long = "n")]
    pub n: Option<usize>,
    #[arg(long = "p")]
    pub p: Option<usize>,
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fully-orthogonal" | "fo" => Ok(Scheme::FullyOrthogonal),
            "semi-orthogonal" | "so" => Ok(Scheme::SemiOrthogonal),
            other => Err(Error::InvalidConfig(format!("unknown scheme `{other}`"))),
        }
    }
}

impl std::str::FromStr for Modulation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ofsk" => Ok(Modulation::Ofsk),
            "mfsk" => Ok(Modulation::Mfsk),
            other => Err(Error::InvalidConfig(format!("unknown modulation `{other}`"))),
        }
    }
}

/// A failure together with the exit status it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: Error,
}

impl Failure {
    fn config(error: Error) -> Self {
        Self { code: EXIT_CONFIG, error }
    }
    fn run(error: Error) -> Self {
        Self { code: EXIT_RUN, error }
    }
}

pub fn load_spec(source: &Source) -> Result<SweepSpec> {
    match (&source.preset, &source.config) {
        (Some(name), _) => preset(name),
        (None, Some(path)) => SweepSpec::from_file(&ConfigFile::load(path)?),
        (None, None) => Err(Error::InvalidConfig("either --preset or --config is required".into())),
    }
}

pub fn apply_overrides(spec: &mut SweepSpec, o: &Overrides) {
    if let Some(seed) = o.seed {
        spec.base.seed = seed;
    }
    if let Some(t) = o.trials {
        spec.base.num_trials = t;
    }
    if let Some(s) = o.sic {
        spec.sic = vec![s.on()];
    }
    if o.cfo.is_some() || o.cfo_compensate.is_some() {
        let mut eps: Vec<f64> = Vec::new();
        let mut comp: Vec<bool> = Vec::new();
        for m in &spec.cfo {
            if !eps.contains(&m.eps) {
                eps.push(m.eps);
            }
            if !comp.contains(&m.compensate) {
                comp.push(m.compensate);
            }
        }
        if let Some(e) = o.cfo {
            eps = vec![e];
            spec.base.cfo_normalized = e;
        }
        if let Some(c) = o.cfo_compensate {
            comp = vec![c.on()];
        }
        spec.set_cfo(&eps, &comp);
    }
}

/// Output directory, with the environment variable taking precedence.
pub fn resolve_out(flag: &Path) -> PathBuf {
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => flag.to_path_buf(),
    }
}

/// Summary of a completed run.
#[derive(Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub cells: usize,
    pub records: usize,
}

pub fn cmd_run(args: &RunArgs) -> std::result::Result<RunSummary, Failure> {
    let mut spec = load_spec(&args.source).map_err(Failure::config)?;
    apply_overrides(&mut spec, &args.overrides);
    spec.cells().map_err(Failure::config)?;
    let out_dir = resolve_out(&args.out);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build()
        .map_err(|e| Failure::run(Error::InvalidConfig(e.to_string())))?;
    let threads = pool.current_num_threads();
    let start = Instant::now();
    let output = pool.install(|| run_sweep(&spec)).map_err(Failure::run)?;

    let config = serde_json::to_value(&spec).map_err(|e| Failure::run(Error::Parse(e.to_string())))?;
    let manifest = Manifest {
        preset: args.source.preset.clone(),
        config_hash: config_hash(&config),
        seed: spec.base.seed,
        build_id: build_id(),
        cells: output.cells,
        records: output.records.len(),
        threads,
        wall_time_ms: start.elapsed().as_millis() as u64,
        config,
    };
    write_artifacts(&out_dir, &output.records, &manifest).map_err(Failure::run)?;
    Ok(RunSummary { out_dir, cells: output.cells, records: output.records.len() })
}

/// Lists the cells a source expands to, one line each.
pub fn cmd_validate(source: &Source) -> Result<String> {
    let spec = load_spec(source)?;
    let cells = spec.cells()?;
    let mut out = String::new();
    for cell in &cells {
        let k = cell.key(0.0);
        let d = cell.cfg.derived();
        out.push_str(&format!(
            "{} {} N={} P={} alpha={} sic={} cfo={} data={} nulls_per_device={}\n",
            k.scheme, k.modulation, k.n, k.p, k.alpha, k.sic, k.cfo, d.n_data, d.n_null_per_device
        ));
    }
    out.push_str(&format!("{} cells x {} SNR points\n", cells.len(), spec.base.snr_db_grid.len()));
    Ok(out)
}

pub fn cmd_dump_allocation(args: &DumpArgs) -> Result<String> {
    let file = match &args.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let mut c = file.system_config();
    if let Some(s) = args.scheme {
        c.scheme = s;
    }
    if let Some(m) = args.modulation {
        c.modulation = m;
    }
    if let Some(n) = args.n {
        c.n_subcarriers = n;
    }
    if let Some(p) = args.p {
        let alpha = c.alpha.first().map_or(0.25, |a| a.re);
        c = c.with_devices(p, alpha);
    }
    let cfg = validate(c)?;
    serde_json::to_string_pretty(&AllocationMap::build(&cfg).dump()).map_err(|e| Error::Parse(e.to_string()))
}

/// Runs a parsed command line, printing results, and returns the exit code.
pub fn execute(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Validate(src) => cmd_validate(src).map(|s| print!("{s}")).map_err(Failure::config),
        Command::DumpAllocation(args) => cmd_dump_allocation(args).map(|s| println!("{s}")).map_err(Failure::config),
        Command::Run(args) => cmd_run(args).map(|s| {
            println!("wrote {} records for {} cells to {}", s.records, s.cells, s.out_dir.display());
        }),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.error);
            f.code
        }
    }
}
