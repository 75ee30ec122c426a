//! Monte Carlo ensembles over noise realizations.
//!
//! Realization `i` always draws from the ChaCha8 stream `(master_seed, i)`,
//! so every output depends only on the seed and the realization count.
//! Work is spread over a rayon pool, results are collected in index order
//! and reduced sequentially, which keeps sums bit-identical for any worker
//! count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dynamics::{self, DriveTemplate, Levels, SystemSpec, TimeGrid};
use crate::error::{FelError, Result};
use crate::noise::{self, ColoredNoise, FrequencyGrid, NoiseTrace, PsdSpec};
use crate::pulse::{self, Envelope, StochasticPulse};
use crate::stats::mean_stderr;

pub const DEFAULT_REALIZATIONS: usize = 5000;

/// Environment variable consulted for the worker count when none is given.
pub const WORKERS_ENV: &str = "FELSIM_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EnsembleConfig {
    pub n_realizations: usize,
    pub master_seed: u64,
    /// Thread count; 0 picks the number of available cores.
    pub workers: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            n_realizations: DEFAULT_REALIZATIONS,
            master_seed: 0,
            workers: 0,
        }
    }
}

impl EnsembleConfig {
    pub fn new(n_realizations: usize, master_seed: u64, workers: usize) -> Result<Self> {
        let cfg = EnsembleConfig {
            n_realizations,
            master_seed,
            workers,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_realizations == 0 {
            return Err(FelError::Config("need at least one realization".into()));
        }
        Ok(())
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| FelError::Config(format!("cannot start worker pool: {e}")))
    }

    /// Evaluate `f(i)` for every realization index, in index order.
    fn map_realizations<T: Send>(&self, f: impl Fn(usize) -> T + Sync + Send) -> Result<Vec<T>> {
        let pool = self.pool()?;
        Ok(pool.install(|| (0..self.n_realizations).into_par_iter().map(f).collect()))
    }
}

/// Random stream of realization `index`.
pub fn realization_rng(master_seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index as u64);
    rng
}

/// Statistical character of the lower-transition field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldNoise {
    FourierLimited,
    Chaotic(PsdSpec),
    /// Constant modulus with Wiener phase; `gamma` is the line FWHM.
    PhaseDiffusion {
        gamma: f64,
    },
}

impl FieldNoise {
    pub fn coherence_time(&self) -> Option<f64> {
        match self {
            FieldNoise::FourierLimited => None,
            FieldNoise::Chaotic(spec) => Some(noise::coherence_time(spec)),
            FieldNoise::PhaseDiffusion { gamma } => Some(2.0 / gamma),
        }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, FieldNoise::FourierLimited)
    }
}

/// How to build the drive of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveRecipe {
    pub s_envelope: Envelope,
    pub s_noise: FieldNoise,
    /// Upper-transition envelope (three-level systems only).
    pub d_envelope: Option<Envelope>,
    pub t_final: f64,
    /// Overrides the default RK4 step bound.
    pub max_step: Option<f64>,
}

impl DriveRecipe {
    pub fn new(s_envelope: Envelope, s_noise: FieldNoise, d_envelope: Option<Envelope>) -> Self {
        DriveRecipe {
            s_envelope,
            s_noise,
            d_envelope,
            t_final: dynamics::DEFAULT_T_FINAL,
            max_step: None,
        }
    }

    pub fn time_grid(&self, system: &SystemSpec) -> Result<TimeGrid> {
        let step = self
            .max_step
            .unwrap_or_else(|| dynamics::default_step(system, self.s_noise.coherence_time()));
        match self.s_noise {
            FieldNoise::Chaotic(spec) => {
                let fgrid = FrequencyGrid::for_spec(&spec, self.t_final)?;
                TimeGrid::aligned(self.t_final, step, fgrid.time_step())
            }
            _ => TimeGrid::with_max_step(self.t_final, step),
        }
    }

    fn validate(&self, system: &SystemSpec) -> Result<()> {
        system.validate()?;
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return Err(FelError::Config(format!(
                "t_final must be positive, got {}",
                self.t_final
            )));
        }
        if let Some(step) = self.max_step {
            if !(step.is_finite() && step > 0.0) {
                return Err(FelError::Config(format!(
                    "step must be positive, got {step}"
                )));
            }
        }
        match (system.levels, &self.d_envelope) {
            (Levels::Two, Some(_)) => Err(FelError::Config(
                "a two-level system takes no upper-transition envelope".into(),
            )),
            (Levels::Three, None) => Err(FelError::Config(
                "a three-level system needs an upper-transition envelope".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Per-realization noise source shared by all workers.
enum NoiseSource {
    None,
    Colored(ColoredNoise),
    Phase { gamma: f64 },
}

impl NoiseSource {
    fn new(recipe: &DriveRecipe) -> Result<Self> {
        Ok(match recipe.s_noise {
            FieldNoise::FourierLimited => NoiseSource::None,
            FieldNoise::Chaotic(spec) => {
                let fgrid = FrequencyGrid::for_spec(&spec, recipe.t_final)?;
                NoiseSource::Colored(ColoredNoise::new(spec, fgrid)?)
            }
            FieldNoise::PhaseDiffusion { gamma } => NoiseSource::Phase { gamma },
        })
    }

    /// Whether a drawn trace can be reused on any integration grid.
    fn grid_independent(&self) -> bool {
        !matches!(self, NoiseSource::Phase { .. })
    }

    /// Phase diffusion is sampled directly on the RK4 stage grid.
    fn draw(&self, master_seed: u64, index: usize, grid: TimeGrid) -> Result<Option<NoiseTrace>> {
        let mut rng = realization_rng(master_seed, index);
        match self {
            NoiseSource::None => Ok(None),
            NoiseSource::Colored(c) => Ok(Some(c.sample(&mut rng))),
            NoiseSource::Phase { gamma } => noise::sample_phase_diffusion(
                *gamma,
                0.5 * grid.dt(),
                2 * grid.n_steps + 1,
                &mut rng,
            )
            .map(Some),
        }
    }
}

/// Ensemble means of the Auger yields at one parameter point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointResult {
    pub q2_mean: f64,
    pub q2_stderr: f64,
    pub q3_mean: f64,
    pub q3_stderr: f64,
    /// Realizations averaged (1 for a Fourier-limited drive).
    pub n: usize,
}

impl PointResult {
    fn from_samples(q2: &[f64], q3: &[f64]) -> Self {
        let (q2_mean, q2_stderr) = mean_stderr(q2);
        let (q3_mean, q3_stderr) = mean_stderr(q3);
        PointResult {
            q2_mean,
            q2_stderr,
            q3_mean,
            q3_stderr,
            n: q2.len(),
        }
    }
}

fn tag(err: FelError, index: usize) -> FelError {
    match err {
        FelError::Integration { time, message, .. } => FelError::Integration {
            realization: Some(index),
            time,
            message,
        },
        other => other,
    }
}

/// Ensemble average of `Q₂` and `Q₃` for one system and drive recipe.
///
/// Fails on the first (lowest-index) realization whose integration fails.
pub fn run_point(
    system: &SystemSpec,
    recipe: &DriveRecipe,
    config: &EnsembleConfig,
) -> Result<PointResult> {
    let mut out = run_detuning_points(system, recipe, config, &[(system.delta_s, system.delta_d)])?;
    out.pop().expect("one point requested")
}

/// Evaluate several detuning pairs `(Δ_s, Δ_d)` with common random
/// numbers: every point sees the same noise realization, and points whose
/// step sizes agree share one drive. Each entry fails independently.
fn run_detuning_points(
    system: &SystemSpec,
    recipe: &DriveRecipe,
    config: &EnsembleConfig,
    detunings: &[(f64, f64)],
) -> Result<Vec<Result<PointResult>>> {
    config.validate()?;
    recipe.validate(system)?;
    let source = NoiseSource::new(recipe)?;
    let systems: Vec<SystemSpec> = detunings
        .iter()
        .map(|&(delta_s, delta_d)| SystemSpec {
            delta_s,
            delta_d,
            ..*system
        })
        .collect();
    let mut grids: Vec<TimeGrid> = Vec::new();
    let mut slot = Vec::with_capacity(systems.len());
    for sys in &systems {
        let grid = recipe.time_grid(sys)?;
        let k = match grids.iter().position(|g| *g == grid) {
            Some(k) => k,
            None => {
                grids.push(grid);
                grids.len() - 1
            }
        };
        slot.push(k);
    }
    let templates = grids
        .iter()
        .map(|&g| DriveTemplate::new(system, &recipe.s_envelope, recipe.d_envelope.as_ref(), g))
        .collect::<Result<Vec<_>>>()?;

    let evaluate = |index: usize| -> Vec<Result<(f64, f64)>> {
        let mut out: Vec<Option<Result<(f64, f64)>>> = vec![None; systems.len()];
        let mut shared: Option<Result<Option<NoiseTrace>>> = None;
        for (k, template) in templates.iter().enumerate() {
            let grid = template.grid();
            let drawn;
            let noise = if source.grid_independent() {
                shared.get_or_insert_with(|| source.draw(config.master_seed, index, grid))
            } else {
                drawn = source.draw(config.master_seed, index, grid);
                &drawn
            };
            let drive = noise
                .as_ref()
                .map_err(Clone::clone)
                .and_then(|noise| template.realize(noise.as_ref()));
            for (p, sys) in systems.iter().enumerate().filter(|(p, _)| slot[*p] == k) {
                out[p] = Some(match &drive {
                    Ok(drive) => dynamics::integrate(sys, drive)
                        .map(|s| (s.q2, s.q3))
                        .map_err(|e| tag(e, index)),
                    Err(e) => Err(e.clone()),
                });
            }
        }
        out.into_iter()
            .map(|r| r.expect("every point has a grid"))
            .collect()
    };

    let per_realization: Vec<Vec<Result<(f64, f64)>>> = if recipe.s_noise.is_deterministic() {
        vec![evaluate(0)]
    } else {
        config.map_realizations(evaluate)?
    };

    Ok((0..systems.len())
        .map(|p| {
            let mut q2 = Vec::with_capacity(per_realization.len());
            let mut q3 = Vec::with_capacity(per_realization.len());
            for r in &per_realization {
                let (a, b) = r[p].clone()?;
                q2.push(a);
                q3.push(b);
            }
            Ok(PointResult::from_samples(&q2, &q3))
        })
        .collect())
}

/// Quantity varied along a scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScanVariable {
    DeltaS,
    DeltaD,
    /// `χ = σ_ω·τ_s`; needs chaotic noise and a Gaussian lower envelope.
    Chi,
    OmegaS0,
    OmegaD0,
}

impl ScanVariable {
    pub const ALL: [ScanVariable; 5] = [
        ScanVariable::DeltaS,
        ScanVariable::DeltaD,
        ScanVariable::Chi,
        ScanVariable::OmegaS0,
        ScanVariable::OmegaD0,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScanVariable::DeltaS => "delta_s",
            ScanVariable::DeltaD => "delta_d",
            ScanVariable::Chi => "chi",
            ScanVariable::OmegaS0 => "omega_s0",
            ScanVariable::OmegaD0 => "omega_d0",
        }
    }
}

impl std::str::FromStr for ScanVariable {
    type Err = FelError;

    fn from_str(s: &str) -> Result<Self> {
        ScanVariable::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| FelError::Config(format!("unknown scan variable '{s}'")))
    }
}

impl std::fmt::Display for ScanVariable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSpec {
    pub variable: ScanVariable,
    pub grid: Vec<f64>,
    /// Template; the scanned field is overwritten per point.
    pub system: SystemSpec,
    pub recipe: DriveRecipe,
}

impl ScanSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(FelError::Config("scan grid is empty".into()));
        }
        if self.grid.iter().any(|v| !v.is_finite()) {
            return Err(FelError::Config("scan grid values must be finite".into()));
        }
        let up = self.grid.windows(2).all(|w| w[1] > w[0]);
        let down = self.grid.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return Err(FelError::Config(
                "scan grid must be strictly monotone".into(),
            ));
        }
        match self.variable {
            ScanVariable::Chi => {
                if !matches!(self.recipe.s_noise, FieldNoise::Chaotic(_)) {
                    return Err(FelError::Config("a chi scan needs chaotic noise".into()));
                }
                if self.recipe.s_envelope.tau().is_none() {
                    return Err(FelError::Config(
                        "a chi scan needs a gaussian lower-transition envelope".into(),
                    ));
                }
                if self.grid.iter().any(|&c| c <= 0.0) {
                    return Err(FelError::Config("chi values must be positive".into()));
                }
            }
            ScanVariable::OmegaS0 | ScanVariable::OmegaD0 => {
                if self.grid.iter().any(|&c| c < 0.0) {
                    return Err(FelError::Config(
                        "Rabi frequencies must be non-negative".into(),
                    ));
                }
            }
            ScanVariable::DeltaS | ScanVariable::DeltaD => {}
        }
        if self.system.levels == Levels::Two
            && matches!(self.variable, ScanVariable::DeltaD | ScanVariable::OmegaD0)
        {
            return Err(FelError::Config(format!(
                "cannot scan {} on a two-level system",
                self.variable
            )));
        }
        self.recipe.validate(&self.system)
    }

    /// System and recipe at scan value `x`.
    pub fn point(&self, x: f64) -> Result<(SystemSpec, DriveRecipe)> {
        let mut system = self.system;
        let mut recipe = self.recipe.clone();
        match self.variable {
            ScanVariable::DeltaS => system.delta_s = x,
            ScanVariable::DeltaD => system.delta_d = x,
            ScanVariable::OmegaS0 => system.omega_s0 = x,
            ScanVariable::OmegaD0 => system.omega_d0 = x,
            ScanVariable::Chi => {
                let tau = recipe.s_envelope.tau().ok_or_else(|| {
                    FelError::Config("a chi scan needs a gaussian lower-transition envelope".into())
                })?;
                let FieldNoise::Chaotic(spec) = recipe.s_noise else {
                    return Err(FelError::Config("a chi scan needs chaotic noise".into()));
                };
                recipe.s_noise = FieldNoise::Chaotic(PsdSpec::new(spec.kind, x / tau)?);
            }
        }
        Ok((system, recipe))
    }
}

/// One scan grid point; `result` holds the error when the point failed.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub x: f64,
    pub result: std::result::Result<PointResult, FelError>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub variable: ScanVariable,
    pub points: Vec<ScanPoint>,
    pub master_seed: u64,
    /// Stable hash of the scan specification and ensemble size.
    pub config_hash: u64,
}

impl ScanResult {
    pub fn x(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.x).collect()
    }

    fn column(&self, f: impl Fn(&PointResult) -> f64) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| p.result.as_ref().map(&f).unwrap_or(f64::NAN))
            .collect()
    }

    pub fn q2_mean(&self) -> Vec<f64> {
        self.column(|r| r.q2_mean)
    }

    pub fn q2_stderr(&self) -> Vec<f64> {
        self.column(|r| r.q2_stderr)
    }

    pub fn q3_mean(&self) -> Vec<f64> {
        self.column(|r| r.q3_mean)
    }

    pub fn q3_stderr(&self) -> Vec<f64> {
        self.column(|r| r.q3_stderr)
    }

    pub fn failures(&self) -> impl Iterator<Item = (f64, &FelError)> {
        self.points
            .iter()
            .filter_map(|p| p.result.as_ref().err().map(|e| (p.x, e)))
    }

    pub fn is_complete(&self) -> bool {
        self.failures().next().is_none()
    }
}

/// FNV-1a over a byte string; stable across platforms and releases.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Evaluate every grid point of `scan`. Detuning scans share one drive per
/// realization across the grid; other scans rebuild the drive per point
/// with the same realization streams. Failed points are kept and flagged.
pub fn run_scan(scan: &ScanSpec, config: &EnsembleConfig) -> Result<ScanResult> {
    scan.validate()?;
    config.validate()?;
    let config_hash = stable_hash(format!("{scan:?}|{}", config.n_realizations).as_bytes());
    let results: Vec<std::result::Result<PointResult, FelError>> = match scan.variable {
        ScanVariable::DeltaS | ScanVariable::DeltaD => {
            let pairs: Vec<(f64, f64)> = scan
                .grid
                .iter()
                .map(|&x| match scan.variable {
                    ScanVariable::DeltaS => (x, scan.system.delta_d),
                    _ => (scan.system.delta_s, x),
                })
                .collect();
            run_detuning_points(&scan.system, &scan.recipe, config, &pairs)?
        }
        _ => scan
            .grid
            .iter()
            .map(|&x| {
                let (system, recipe) = scan.point(x)?;
                run_point(&system, &recipe, config)
            })
            .collect(),
    };
    for (x, r) in scan.grid.iter().zip(&results) {
        if let Err(e) = r {
            log::warn!("{} = {x}: {e}", scan.variable);
        }
    }
    Ok(ScanResult {
        variable: scan.variable,
        points: scan
            .grid
            .iter()
            .zip(results)
            .map(|(&x, result)| ScanPoint { x, result })
            .collect(),
        master_seed: config.master_seed,
        config_hash,
    })
}

/// Noise realizations `0..n` on the default grid for `[0, t_final]`.
pub fn generate_traces(
    spec: &PsdSpec,
    t_final: f64,
    config: &EnsembleConfig,
) -> Result<Vec<NoiseTrace>> {
    config.validate()?;
    let noise = ColoredNoise::new(*spec, FrequencyGrid::for_spec(spec, t_final)?)?;
    config.map_realizations(|i| noise.sample(&mut realization_rng(config.master_seed, i)))
}

/// Chaotic pulses `0..n` with envelope `envelope` and peak mean intensity
/// `i0`, truncated to `[0, t_final]`.
pub fn generate_pulses(
    envelope: &Envelope,
    i0: f64,
    spec: &PsdSpec,
    t_final: f64,
    config: &EnsembleConfig,
) -> Result<Vec<StochasticPulse>> {
    config.validate()?;
    let noise = ColoredNoise::new(*spec, FrequencyGrid::for_spec(spec, t_final)?)?;
    config
        .map_realizations(|i| {
            let trace = noise.sample(&mut realization_rng(config.master_seed, i));
            pulse::make_pulse(envelope, i0, &trace, t_final)
        })?
        .into_iter()
        .collect()
}

/// Phase-diffusion pulses `0..n` sampled with step `dt`.
pub fn generate_pdm_pulses(
    envelope: &Envelope,
    i0: f64,
    gamma: f64,
    dt: f64,
    t_final: f64,
    config: &EnsembleConfig,
) -> Result<Vec<StochasticPulse>> {
    config.validate()?;
    config
        .map_realizations(|i| {
            let mut rng = realization_rng(config.master_seed, i);
            pulse::make_pdm_pulse(envelope, i0, gamma, dt, t_final, &mut rng)
        })?
        .into_iter()
        .collect()
}
