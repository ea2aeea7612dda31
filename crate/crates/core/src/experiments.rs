//! Experiment configs, seeded scheme × scenario sweeps and result files.
//!
//! Output layout under the output directory:
//!
//! * `results.csv` — one row per (scenario, scheme, seed), columns [`CSV_HEADER`]
//! * `metadata.toml` — the resolved config; loads back with [`load_config`]
//! * `runs/<tag>.csv` — per-epoch series of meta-learning runs, columns [`EPOCH_HEADER`]
//! * `solutions/<tag>.toml` — the returned solution, see [`StoredSolution`]

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{grid_oracle_tiny, random_phases_baseline, run_diagonal_baseline};
use crate::channel::{dbm_to_watts, generate_channel_set, FadingParams, NodeGeometry};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::metaopt::{run_algorithm1, EpochLog, MetaConfig, MetaMode, Problem, SurfaceLayout, TrainFailure, TrainResult};
use crate::scalar::Complex;
use crate::sysmodel::{
    constraint_residuals, evaluate_rates, Architecture, Budgets, ConstraintResiduals, MagnitudeMode, Solution,
};

pub const CONFIG_VERSION: u32 = 1;

/// Caps the sweep worker pool; defaults to the number of CPUs.
pub const WORKERS_ENV: &str = "BDRIS_WORKERS";

pub const CSV_HEADER: &str = "scheme,seed,N,M,G,best_sum_rate,R1,R2,max_residual,best_objective,initial_sum_rate,wall_time_seconds,epochs_run,status";

pub const EPOCH_HEADER: &str =
    "epoch,mean_loss,best_so_far,mean_sum_rate,l_rate,l_threshold,l_norm,l_ris,l_power,smn_updated";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Meta-learner on the configured surface.
    BdRis,
    /// Meta-learner on a diagonal surface of the same size.
    DiagonalRis,
    RandomPhases,
    GridOracle,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::BdRis, Scheme::DiagonalRis, Scheme::RandomPhases, Scheme::GridOracle];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::BdRis => "bd-ris",
            Scheme::DiagonalRis => "diagonal-ris",
            Scheme::RandomPhases => "random-phases",
            Scheme::GridOracle => "grid-oracle",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<_> = Scheme::ALL.iter().map(|k| k.name()).collect();
            Error::Config(format!("unknown scheme {s:?}, expected one of {}", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    M,
    N,
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "M" | "m" => Ok(Axis::M),
            "N" | "n" => Ok(Axis::N),
            _ => Err(Error::Config(format!("sweep axis must be M or N, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub vary: Axis,
    pub values: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// `N`, BS antennas.
    pub antennas: usize,
    /// `M`, surface elements.
    pub elements: usize,
    /// `G`; ignored when `group_sizes` is given.
    pub groups: usize,
    /// Explicit `M_g`; must sum to `elements`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group_sizes: Option<Vec<usize>>,
    pub architecture: Architecture,
    pub magnitude_mode: MagnitudeMode,
    pub p_max_dbm: [f64; 2],
    /// Rate thresholds, bits/s/Hz.
    pub r_th: [f64; 2],
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            antennas: 4,
            elements: 8,
            groups: 2,
            group_sizes: None,
            architecture: Architecture::GroupConnected,
            magnitude_mode: MagnitudeMode::Exponential,
            p_max_dbm: [23.0, 23.0],
            r_th: [1.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub seeds: Vec<u64>,
    pub schemes: Vec<Scheme>,
    pub output_dir: PathBuf,
    /// Samples drawn by the random-phases scheme.
    pub random_trials: usize,
    /// Phase levels of the grid oracle.
    pub oracle_levels: usize,
    pub system: SystemConfig,
    pub geometry: NodeGeometry,
    pub fading: FadingParams,
    pub meta: MetaConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            seeds: (0..10).collect(),
            schemes: vec![Scheme::BdRis, Scheme::DiagonalRis],
            output_dir: PathBuf::from("results"),
            random_trials: 100,
            oracle_levels: 16,
            system: SystemConfig::default(),
            geometry: NodeGeometry::default(),
            fading: FadingParams::default(),
            meta: MetaConfig::default(),
            sweep: None,
        }
    }
}

/// A config problem, optionally tied to the key that caused it.
fn invalid(key: &str, msg: String) -> (String, String) {
    (key.to_string(), msg)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.check().map_err(|(_, msg)| Error::Config(msg))
    }

    fn check(&self) -> std::result::Result<(), (String, String)> {
        if self.version != CONFIG_VERSION {
            return Err(invalid("version", format!("unsupported config version {}, expected {CONFIG_VERSION}", self.version)));
        }
        if self.seeds.is_empty() {
            return Err(invalid("seeds", "seeds must not be empty".into()));
        }
        if self.schemes.is_empty() {
            return Err(invalid("schemes", "schemes must not be empty".into()));
        }
        if self.random_trials == 0 {
            return Err(invalid("random_trials", "random_trials must be at least 1".into()));
        }
        if self.oracle_levels == 0 {
            return Err(invalid("oracle_levels", "oracle_levels must be at least 1".into()));
        }
        let s = &self.system;
        for (key, v) in [("antennas", s.antennas), ("elements", s.elements), ("groups", s.groups)] {
            if v == 0 {
                return Err(invalid(key, format!("{key} must be at least 1")));
            }
        }
        if let Some(sizes) = &s.group_sizes {
            let total: usize = sizes.iter().sum();
            if total != s.elements || sizes.contains(&0) {
                return Err(invalid(
                    "group_sizes",
                    format!("group_sizes {sizes:?} must be positive and sum to elements = {}", s.elements),
                ));
            }
            if matches!(&self.sweep, Some(SweepSpec { vary: Axis::M, .. })) {
                return Err(invalid("group_sizes", "explicit group_sizes cannot be combined with an M sweep".into()));
            }
        }
        if s.r_th.iter().chain(&s.p_max_dbm).any(|v| !v.is_finite()) || s.r_th.iter().any(|&v| v < 0.0) {
            return Err(invalid("r_th", "rate thresholds must be finite and non-negative".into()));
        }
        if let Some(sw) = &self.sweep {
            if sw.values.is_empty() || sw.values.contains(&0) {
                return Err(invalid("values", "sweep values must be a non-empty list of positive integers".into()));
            }
        }
        for (n, m) in self.scenarios() {
            self.layout(m).map_err(|e| invalid("elements", format!("scenario N = {n}, M = {m}: {e}")))?;
        }
        self.meta.validate().map_err(|e| invalid("meta", e.to_string()))?;
        self.geometry.validate().map_err(|e| invalid("geometry", e.to_string()))?;
        self.fading.validate().map_err(|e| invalid("fading", e.to_string()))?;
        Ok(())
    }

    /// `(N, M)` points, in sweep order.
    pub fn scenarios(&self) -> Vec<(usize, usize)> {
        let (n, m) = (self.system.antennas, self.system.elements);
        match &self.sweep {
            None => vec![(n, m)],
            Some(SweepSpec { vary: Axis::M, values }) => values.iter().map(|&v| (n, v)).collect(),
            Some(SweepSpec { vary: Axis::N, values }) => values.iter().map(|&v| (v, m)).collect(),
        }
    }

    /// Surface layout of the configured architecture with `m` elements.
    pub fn layout(&self, m: usize) -> Result<SurfaceLayout> {
        let s = &self.system;
        match &s.group_sizes {
            Some(sizes) if m == s.elements => {
                let layout = SurfaceLayout {
                    architecture: s.architecture,
                    group_sizes: sizes.clone(),
                    magnitude_mode: s.magnitude_mode,
                };
                layout.with_phases::<f64>(sizes.iter().map(|&g| CMatrix::zeros(g, g)).collect())?;
                Ok(layout)
            }
            _ => SurfaceLayout::new(s.architecture, m, s.groups, s.magnitude_mode),
        }
    }

    pub fn budgets(&self) -> Budgets<f64> {
        let s = &self.system;
        Budgets {
            p_max: s.p_max_dbm.map(dbm_to_watts),
            r_th: s.r_th,
        }
    }

    /// Channel draw for `seed` at `(n, m)` and the problem it defines. The
    /// channel depends only on `(seed, n, m)`, never on the scheme.
    pub fn problem(&self, seed: u64, n: usize, m: usize) -> Result<Problem<f64>> {
        let mut rng = stream_rng(seed, 0);
        let ch = generate_channel_set(&self.geometry, &self.fading, n, m, &mut rng)?;
        Problem::new(ch, self.fading.noise_power_watts(), self.budgets(), self.layout(m)?)
    }

    /// Literal variant: strict loss, SMN update and selection, unit-modulus entries.
    pub fn strict_paper(mut self) -> Self {
        self.meta.mode = MetaMode::StrictPaper;
        self.system.magnitude_mode = MagnitudeMode::UnitModulus;
        self
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }
}

/// Independent ChaCha stream per purpose: 0 channel, 1 meta-learner,
/// 2 random-phase sampling.
fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn line_of(src: &str, key: &str) -> Option<usize> {
    src.lines().position(|l| {
        let t = l.trim_start();
        t.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
    })
}

/// Parses and validates config text; `origin` names the source in errors.
pub fn parse_config(src: &str, origin: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(src).map_err(|e| Error::Config(format!("{origin}: {e}")))?;
    cfg.check().map_err(|(key, msg)| match line_of(src, &key) {
        Some(line) => Error::Config(format!("{origin}:{}: {msg}\n  | {}", line + 1, src.lines().nth(line).unwrap_or(""))),
        None => Error::Config(format!("{origin}: {msg}")),
    })?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let src = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&src, &path.display().to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scheme: Scheme,
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    /// Number of surface blocks.
    pub g: usize,
    /// Sum rate of the returned (feasible) solution.
    pub best_sum_rate: f64,
    pub r1: f64,
    pub r2: f64,
    /// Largest constraint residual of the returned solution.
    pub max_residual: f64,
    /// Best penalized objective `−L` seen during training; equals
    /// `best_sum_rate` for non-learning schemes.
    pub best_objective: f64,
    pub initial_sum_rate: f64,
    pub wall_time_seconds: f64,
    pub epochs_run: usize,
    /// `ok`, or the failure message.
    pub status: String,
}

impl ResultRow {
    pub fn tag(&self) -> String {
        format!("{}_n{}_m{}_seed{}", self.scheme, self.n, self.m, self.seed)
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn to_record(&self) -> Vec<String> {
        vec![
            self.scheme.to_string(),
            self.seed.to_string(),
            self.n.to_string(),
            self.m.to_string(),
            self.g.to_string(),
            num(self.best_sum_rate),
            num(self.r1),
            num(self.r2),
            num(self.max_residual),
            num(self.best_objective),
            num(self.initial_sum_rate),
            num(self.wall_time_seconds),
            self.epochs_run.to_string(),
            self.status.clone(),
        ]
    }

    pub fn from_record(f: &csv::StringRecord) -> Result<Self> {
        if f.len() != 14 {
            return Err(Error::Config(format!("result row needs 14 fields, got {}", f.len())));
        }
        let bad = |what: &str| Error::Config(format!("bad {what} in result row {f:?}"));
        let int = |i: usize, what: &str| f[i].parse::<usize>().map_err(|_| bad(what));
        let real = |i: usize, what: &str| f[i].parse::<f64>().map_err(|_| bad(what));
        Ok(Self {
            scheme: f[0].parse()?,
            seed: f[1].parse().map_err(|_| bad("seed"))?,
            n: int(2, "N")?,
            m: int(3, "M")?,
            g: int(4, "G")?,
            best_sum_rate: real(5, "best_sum_rate")?,
            r1: real(6, "R1")?,
            r2: real(7, "R2")?,
            max_residual: real(8, "max_residual")?,
            best_objective: real(9, "best_objective")?,
            initial_sum_rate: real(10, "initial_sum_rate")?,
            wall_time_seconds: real(11, "wall_time_seconds")?,
            epochs_run: int(12, "epochs_run")?,
            status: f[13].to_string(),
        })
    }
}

/// 17 significant digits: parses back to the identical `f64`.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// One finished run: its row, epoch series and returned solution.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub row: ResultRow,
    pub epochs: Vec<EpochLog<f64>>,
    pub solution: Option<Solution<f64>>,
}

/// Plain-data copy of a [`Solution`] with its realized blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoredSolution {
    pub architecture: Architecture,
    pub group_sizes: Vec<usize>,
    pub magnitude_mode: MagnitudeMode,
    /// `[p11, p12, p2]`, watts.
    pub p: [f64; 3],
    /// Rows of the `N x 3` beamformer matrix.
    pub w_re: Vec<Vec<f64>>,
    pub w_im: Vec<Vec<f64>>,
    pub blocks_re: Vec<Vec<Vec<f64>>>,
    pub blocks_im: Vec<Vec<Vec<f64>>>,
}

fn rows_of(a: &CMatrix<f64>) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let (r, c) = a.shape();
    let re = (0..r).map(|i| (0..c).map(|j| a.get(i, j).re).collect()).collect();
    let im = (0..r).map(|i| (0..c).map(|j| a.get(i, j).im).collect()).collect();
    (re, im)
}

fn from_rows(re: &[Vec<f64>], im: &[Vec<f64>]) -> Result<CMatrix<f64>> {
    let r = re.len();
    let c = re.first().map_or(0, Vec::len);
    if im.len() != r || re.iter().chain(im).any(|row| row.len() != c) {
        return Err(Error::ShapeMismatch("stored matrix rows are ragged".into()));
    }
    let mut a = CMatrix::zeros(r, c);
    for i in 0..r {
        for j in 0..c {
            a.set(i, j, Complex::new(re[i][j], im[i][j]));
        }
    }
    Ok(a)
}

impl StoredSolution {
    pub fn from_solution(sol: &Solution<f64>) -> Self {
        let (w_re, w_im) = rows_of(&sol.w);
        let (blocks_re, blocks_im) = sol.phi.blocks().iter().map(rows_of).unzip();
        Self {
            architecture: sol.phi.architecture(),
            group_sizes: sol.phi.group_sizes().to_vec(),
            magnitude_mode: sol.phi.magnitude_mode(),
            p: sol.p,
            w_re,
            w_im,
            blocks_re,
            blocks_im,
        }
    }

    pub fn to_solution(&self) -> Result<Solution<f64>> {
        let w = from_rows(&self.w_re, &self.w_im)?;
        if self.blocks_re.len() != self.blocks_im.len() {
            return Err(Error::ShapeMismatch("stored block lists differ in length".into()));
        }
        let blocks = self
            .blocks_re
            .iter()
            .zip(&self.blocks_im)
            .map(|(re, im)| from_rows(re, im))
            .collect::<Result<Vec<_>>>()?;
        let layout = SurfaceLayout {
            architecture: self.architecture,
            group_sizes: self.group_sizes.clone(),
            magnitude_mode: self.magnitude_mode,
        };
        let phi = layout.with_phases(self.group_sizes.iter().map(|&g| CMatrix::zeros(g, g)).collect())?;
        Solution::new(w, self.p, phi.with_projected_blocks(blocks)?)
    }
}

fn finish_row(
    base: ResultRow,
    sol: &Solution<f64>,
    problem: &Problem<f64>,
) -> Result<(ResultRow, ConstraintResiduals<f64>)> {
    let r = evaluate_rates(sol, &problem.channels, problem.noise_power)?;
    let res = constraint_residuals(sol, &problem.channels, problem.noise_power, &problem.budgets)?;
    Ok((
        ResultRow {
            best_sum_rate: r.total,
            r1: r.r1,
            r2: r.r2,
            max_residual: res.max_violation(),
            ..base
        },
        res,
    ))
}

/// Runs one scheme on the channel of `(seed, n, m)`. Failures are recorded in
/// the row's status instead of being returned.
pub fn run_one(cfg: &ExperimentConfig, scheme: Scheme, seed: u64, n: usize, m: usize) -> RunRecord {
    let start = Instant::now();
    let base = ResultRow {
        scheme,
        seed,
        n,
        m,
        g: 0,
        best_sum_rate: f64::NAN,
        r1: f64::NAN,
        r2: f64::NAN,
        max_residual: f64::NAN,
        best_objective: f64::NAN,
        initial_sum_rate: f64::NAN,
        wall_time_seconds: 0.0,
        epochs_run: 0,
        status: "ok".into(),
    };
    let failed = |mut row: ResultRow, e: &Error, epochs: Vec<EpochLog<f64>>| {
        row.status = format!("failed: {e}");
        row.epochs_run = epochs.len();
        row.wall_time_seconds = start.elapsed().as_secs_f64();
        RunRecord {
            row,
            epochs,
            solution: None,
        }
    };
    let problem = match cfg.problem(seed, n, m) {
        Ok(p) => p,
        Err(e) => return failed(base, &e, Vec::new()),
    };
    let diag_blocks = m;
    let trained = |r: std::result::Result<TrainResult<f64>, TrainFailure<f64>>, g: usize| match r {
        Ok(t) => {
            let base = ResultRow {
                g,
                best_objective: t.best_objective,
                initial_sum_rate: t.initial_sum_rate,
                epochs_run: t.per_epoch.len(),
                ..base.clone()
            };
            match finish_row(base.clone(), &t.best_solution, &problem) {
                Ok((row, _)) => Ok((row, t.per_epoch, t.best_solution)),
                Err(e) => Err((base, e, t.per_epoch)),
            }
        }
        Err(f) => Err((ResultRow { g, ..base.clone() }, f.error, f.per_epoch)),
    };
    let outcome = match scheme {
        Scheme::BdRis => {
            let mut rng = stream_rng(seed, 1);
            trained(run_algorithm1(&problem, &cfg.meta, &mut rng), problem.surface.group_sizes.len())
        }
        Scheme::DiagonalRis => {
            let mut rng = stream_rng(seed, 1);
            trained(run_diagonal_baseline(&problem, &cfg.meta, &mut rng), diag_blocks)
        }
        Scheme::RandomPhases | Scheme::GridOracle => {
            let result = if scheme == Scheme::RandomPhases {
                random_phases_baseline(&problem, cfg.random_trials, &mut stream_rng(seed, 2))
                    .map(|b| (b, problem.surface.group_sizes.len()))
            } else {
                problem
                    .with_surface(SurfaceLayout::diagonal(m))
                    .and_then(|p| grid_oracle_tiny(&p, cfg.oracle_levels))
                    .map(|b| (b, diag_blocks))
            };
            match result {
                Ok((b, g)) => {
                    let base = ResultRow {
                        g,
                        best_objective: b.sum_rate,
                        ..base.clone()
                    };
                    match finish_row(base.clone(), &b.solution, &problem) {
                        Ok((row, _)) => Ok((row, Vec::new(), b.solution)),
                        Err(e) => Err((base, e, Vec::new())),
                    }
                }
                Err(e) => Err((base.clone(), e, Vec::new())),
            }
        }
    };
    match outcome {
        Ok((mut row, epochs, sol)) => {
            row.wall_time_seconds = start.elapsed().as_secs_f64();
            RunRecord {
                row,
                epochs,
                solution: Some(sol),
            }
        }
        Err((row, e, epochs)) => failed(row, &e, epochs),
    }
}

/// Worker count from [`WORKERS_ENV`], else the available parallelism.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Every scenario × scheme × seed, on a bounded worker pool. Records come
/// back sorted by `(N, M, scheme, seed)` whatever the execution order.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    run_sweep_with(cfg, &|_| {})
}

/// [`run_sweep`] with a callback invoked as each run finishes.
pub fn run_sweep_with(cfg: &ExperimentConfig, progress: &(dyn Fn(&ResultRow) + Sync)) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let jobs: Vec<(Scheme, u64, usize, usize)> = cfg
        .scenarios()
        .into_iter()
        .flat_map(|(n, m)| {
            cfg.schemes
                .iter()
                .flat_map(move |&s| cfg.seeds.iter().map(move |&seed| (s, seed, n, m)))
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let mut records: Vec<RunRecord> = pool.install(|| {
        jobs.par_iter()
            .map(|&(s, seed, n, m)| {
                let r = run_one(cfg, s, seed, n, m);
                progress(&r.row);
                r
            })
            .collect()
    });
    records.sort_by(|a, b| {
        let key = |r: &ResultRow| (r.n, r.m, r.scheme, r.seed);
        key(&a.row).cmp(&key(&b.row))
    });
    Ok(records)
}

fn csv_text(header: &str, rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    // writes into a Vec cannot fail
    w.write_record(header.split(',')).expect("in-memory csv");
    for r in rows {
        w.write_record(&r).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv fields are utf-8")
}

pub fn results_csv(records: &[RunRecord]) -> String {
    csv_text(CSV_HEADER, records.iter().map(|r| r.row.to_record()))
}

pub fn epochs_csv(epochs: &[EpochLog<f64>]) -> String {
    let rows = epochs.iter().map(|e| {
        let b = &e.breakdown;
        vec![
            e.epoch.to_string(),
            num(e.mean_loss),
            num(e.best_so_far),
            num(e.mean_sum_rate),
            num(b.l_rate),
            num(b.l_threshold),
            num(b.l_norm),
            num(b.l_ris),
            num(b.l_power),
            u8::from(e.smn_updated).to_string(),
        ]
    });
    csv_text(EPOCH_HEADER, rows)
}

pub fn metadata_toml(cfg: &ExperimentConfig) -> Result<String> {
    Ok(format!(
        "# bdris run metadata: the resolved config of this run; loads back as a config.\n\
         # code version: {}\n\
         # channel seed stream 0, meta-learner stream 1, random phases stream 2 (ChaCha8).\n\
         # diagonal-ris shares every meta setting with bd-ris and differs only in the surface.\n\
         # best_sum_rate is the sum rate of the projected feasible solution.\n\
         # wall_time_seconds is the only column that varies between identical runs.\n\n{}",
        env!("CARGO_PKG_VERSION"),
        cfg.to_toml()?
    ))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes the result table, metadata, epoch series and solutions into `dir`.
pub fn emit_results(records: &[RunRecord], cfg: &ExperimentConfig, dir: impl AsRef<Path>) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no result rows to emit".into()));
    }
    let dir = dir.as_ref();
    create_dir(dir)?;
    write(&dir.join("results.csv"), &results_csv(records))?;
    write(&dir.join("metadata.toml"), &metadata_toml(cfg)?)?;
    let runs = dir.join("runs");
    let sols = dir.join("solutions");
    for r in records {
        if !r.epochs.is_empty() {
            create_dir(&runs)?;
            write(&runs.join(format!("{}.csv", r.row.tag())), &epochs_csv(&r.epochs))?;
        }
        if let Some(sol) = &r.solution {
            create_dir(&sols)?;
            let text = toml::to_string(&StoredSolution::from_solution(sol))
                .map_err(|e| Error::Config(format!("cannot serialize solution: {e}")))?;
            write(&sols.join(format!("{}.toml", r.row.tag())), &text)?;
        }
    }
    Ok(())
}

pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let path = path.as_ref();
    let csv_err = |e: csv::Error| Error::Config(format!("{}: {e}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    if r.headers().map_err(csv_err)?.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(Error::Config(format!("{}: unexpected header", path.display())));
    }
    r.records().map(|rec| ResultRow::from_record(&rec.map_err(csv_err)?)).collect()
}

pub fn read_solution(path: impl AsRef<Path>) -> Result<Solution<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let stored: StoredSolution =
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    stored.to_solution()
}

/// Mean `best_sum_rate` of successful rows per `(N, M, scheme)`.
pub fn scheme_means(rows: &[ResultRow]) -> Vec<((usize, usize, Scheme), f64, usize)> {
    let mut acc: std::collections::BTreeMap<(usize, usize, Scheme), (f64, usize)> = Default::default();
    for r in rows.iter().filter(|r| r.is_ok()) {
        let e = acc.entry((r.n, r.m, r.scheme)).or_default();
        e.0 += r.best_sum_rate;
        e.1 += 1;
    }
    acc.into_iter().map(|(k, (s, c))| (k, s / c as f64, c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults() {
        let cfg = parse_config("", "empty").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert!((cfg.budgets().p_max[0] - 0.199_526_231_496_887_9).abs() < 1e-15);
        assert!((cfg.fading.noise_power_watts() - 1e-11).abs() < 1e-24);
    }

    #[test]
    fn group_sum_mismatch_reports_line() {
        let src = "seeds = [1]\n[system]\nelements = 8\ngroup_sizes = [4, 5]\n";
        let err = parse_config(src, "cfg.toml").unwrap_err().to_string();
        assert!(err.contains("cfg.toml:4"), "{err}");
        assert!(err.contains("sum to elements"), "{err}");
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = parse_config("[meta]\nepoch = 3\n", "x").unwrap_err().to_string();
        assert!(err.contains("epoch"), "{err}");
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn negative_counts_rejected() {
        assert!(parse_config("[meta]\nepochs = -1\n", "x").is_err());
        assert!(parse_config("seeds = []\n", "x").unwrap_err().to_string().contains("seeds"));
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.sweep = Some(SweepSpec {
            vary: Axis::M,
            values: vec![4, 8],
        });
        cfg.meta.penalty_weights.ris = 0.123_456_789_012_345_6;
        let text = metadata_toml(&cfg).unwrap();
        assert_eq!(parse_config(&text, "meta").unwrap(), cfg);
    }

    #[test]
    fn row_csv_round_trip() {
        let row = ResultRow {
            scheme: Scheme::DiagonalRis,
            seed: 3,
            n: 4,
            m: 8,
            g: 8,
            best_sum_rate: 5.123_456_789_012_345,
            r1: 1.0 / 3.0,
            r2: std::f64::consts::PI,
            max_residual: 1e-17,
            best_objective: -0.5,
            initial_sum_rate: f64::NAN,
            wall_time_seconds: 0.25,
            epochs_run: 300,
            status: "failed: a, b".into(),
        };
        let back = ResultRow::from_record(&csv::StringRecord::from(row.to_record())).unwrap();
        assert_eq!(back.best_sum_rate, row.best_sum_rate);
        assert_eq!(back.r1, row.r1);
        assert!(back.initial_sum_rate.is_nan());
        assert_eq!(back.status, row.status);
        assert_eq!(back.tag(), "diagonal-ris_n4_m8_seed3");
    }
}
