//! Density-matrix equations for a single Auger resonance (two levels) and
//! a double resonance ladder (three levels) in the rotating-wave picture,
//! propagated with fixed-step classical RK4.
//!
//! Populations decay into the Auger channels with rates `Γ₂` and `Γ₃`; the
//! accumulated yields `Q_j = Γ_j ∫σ_jj dt` are carried as extra ODE
//! components, so `Σσ_jj + ΣQ_j = 1` is a linear invariant that RK4
//! preserves to rounding error.

use num_complex::Complex64;

use crate::error::{FelError, Result};
use crate::noise::NoiseTrace;
use crate::pulse::Envelope;

/// Allowed drift of `Σσ_jj + ΣQ_j` from 1.
pub const CONSERVATION_TOLERANCE: f64 = 1e-6;

/// Default simulation window, in units of `Γ₂⁻¹`.
pub const DEFAULT_T_FINAL: f64 = 32.0;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Levels {
    Two,
    Three,
}

/// Atomic parameters, all in units of `Γ₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemSpec {
    pub levels: Levels,
    pub gamma2: f64,
    pub gamma3: f64,
    /// Peak Rabi frequency of the lower (stochastic) transition.
    pub omega_s0: f64,
    /// Peak Rabi frequency of the upper (deterministic) transition.
    pub omega_d0: f64,
    /// `Δ_s = ω₂₁ − ω_s`.
    pub delta_s: f64,
    /// `Δ_d = ω₃₂ − ω_d`.
    pub delta_d: f64,
}

impl SystemSpec {
    pub fn two_level(omega_s0: f64, delta_s: f64) -> Self {
        SystemSpec {
            levels: Levels::Two,
            gamma2: 1.0,
            gamma3: 0.0,
            omega_s0,
            omega_d0: 0.0,
            delta_s,
            delta_d: 0.0,
        }
    }

    pub fn three_level(omega_s0: f64, omega_d0: f64, gamma3: f64) -> Self {
        SystemSpec {
            levels: Levels::Three,
            gamma2: 1.0,
            gamma3,
            omega_s0,
            omega_d0,
            delta_s: 0.0,
            delta_d: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.gamma2,
            self.gamma3,
            self.omega_s0,
            self.omega_d0,
            self.delta_s,
            self.delta_d,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(FelError::Config("system parameters must be finite".into()));
        }
        if self.gamma2 <= 0.0 {
            return Err(FelError::Config(format!(
                "gamma2 must be positive, got {}",
                self.gamma2
            )));
        }
        if self.gamma3 < 0.0 || self.omega_s0 < 0.0 || self.omega_d0 < 0.0 {
            return Err(FelError::Config(
                "gamma3 and peak Rabi frequencies must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Coherence decay rates `Γᵢⱼ = (Γᵢ + Γⱼ)/2` with `Γ₁ = 0`.
    pub fn gamma12(&self) -> f64 {
        0.5 * self.gamma2
    }

    pub fn gamma23(&self) -> f64 {
        0.5 * (self.gamma2 + self.gamma3)
    }

    pub fn gamma13(&self) -> f64 {
        0.5 * self.gamma3
    }

    /// Largest peak Rabi frequency or detuning entering the Hamiltonian.
    fn max_frequency(&self) -> f64 {
        match self.levels {
            Levels::Two => self.omega_s0.max(self.delta_s.abs()),
            Levels::Three => self
                .omega_s0
                .max(self.omega_d0)
                .max(self.delta_s.abs())
                .max(self.delta_d.abs())
                .max((self.delta_s + self.delta_d).abs()),
        }
    }
}

/// Uniform integration grid on `[0, t_final]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_final: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, n_steps: usize) -> Result<Self> {
        if !(t_final.is_finite() && t_final > 0.0) || n_steps == 0 {
            return Err(FelError::Config(format!(
                "need t_final > 0 and at least one step, got {t_final}, {n_steps}"
            )));
        }
        Ok(TimeGrid { t_final, n_steps })
    }

    /// Smallest number of equal steps no longer than `max_step`.
    pub fn with_max_step(t_final: f64, max_step: f64) -> Result<Self> {
        if !(max_step.is_finite() && max_step > 0.0) {
            return Err(FelError::Config(format!(
                "step must be positive, got {max_step}"
            )));
        }
        let n = (t_final / max_step - 1e-9).ceil().max(1.0) as usize;
        TimeGrid::new(t_final, n)
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.n_steps as f64
    }

    /// Like [`TimeGrid::with_max_step`], but when `t_final` is a whole
    /// number of `sample_dt` intervals every sample time also lands on a
    /// step boundary, so a linearly interpolated input is smooth inside
    /// each step.
    pub fn aligned(t_final: f64, max_step: f64, sample_dt: f64) -> Result<Self> {
        let samples = (t_final / sample_dt).round();
        if samples < 1.0 || ((t_final / sample_dt) - samples).abs() > 1e-6 {
            return TimeGrid::with_max_step(t_final, max_step);
        }
        let per_sample = (sample_dt / max_step - 1e-9).ceil().max(1.0);
        TimeGrid::new(t_final, samples as usize * per_sample as usize)
    }

    /// The same window with twice as many steps.
    pub fn halved(&self) -> Self {
        TimeGrid {
            t_final: self.t_final,
            n_steps: 2 * self.n_steps,
        }
    }
}

/// Default RK4 step `min(T_c/20, 0.02, 0.05/ω_max)`, where `ω_max` is the
/// largest of the peak Rabi frequencies and the detunings `|Δ_s|`, `|Δ_d|`,
/// `|Δ_s + Δ_d|`. `coherence_time` is `None` for Fourier-limited drives.
pub fn default_step(system: &SystemSpec, coherence_time: Option<f64>) -> f64 {
    let mut dt: f64 = 0.02;
    if let Some(tc) = coherence_time {
        dt = dt.min(tc / 20.0);
    }
    let omega = system.max_frequency();
    if omega > 0.0 {
        dt = dt.min(0.05 / omega);
    }
    dt
}

/// Rabi frequencies sampled at every RK4 stage time (`2·n_steps + 1`
/// samples spaced `dt/2`).
#[derive(Debug, Clone, PartialEq)]
pub struct DriveTraces {
    omega_s: Vec<Complex64>,
    omega_d: Option<Vec<f64>>,
    grid: TimeGrid,
}

impl DriveTraces {
    pub fn new(omega_s: Vec<Complex64>, omega_d: Option<Vec<f64>>, grid: TimeGrid) -> Result<Self> {
        let want = 2 * grid.n_steps + 1;
        if omega_s.len() != want || omega_d.as_ref().is_some_and(|d| d.len() != want) {
            return Err(FelError::GridMismatch(format!(
                "drive traces must hold {want} half-step samples"
            )));
        }
        Ok(DriveTraces {
            omega_s,
            omega_d,
            grid,
        })
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn omega_s(&self) -> &[Complex64] {
        &self.omega_s
    }

    pub fn omega_d(&self) -> Option<&[f64]> {
        self.omega_d.as_deref()
    }

    /// Sample time of half-step index `j`.
    pub fn time(&self, j: usize) -> f64 {
        0.5 * j as f64 * self.grid.dt()
    }
}

/// Sample `Ω_s(t) = Ω_s⁽⁰⁾√f_s(t)·ζ(t)` and, for three levels,
/// `Ω_d(t) = Ω_d⁽⁰⁾√f_d(t)` at every RK4 stage time. A missing noise trace
/// gives the Fourier-limited field (`ζ ≡ 1`); the trace is linearly
/// interpolated between its own grid points.
pub fn build_drive(
    system: &SystemSpec,
    s_envelope: &Envelope,
    s_noise: Option<&NoiseTrace>,
    d_envelope: Option<&Envelope>,
    grid: TimeGrid,
) -> Result<DriveTraces> {
    DriveTemplate::new(system, s_envelope, d_envelope, grid)?.realize(s_noise)
}

/// Deterministic part of a drive on one grid: the envelope amplitudes
/// `Ω⁽⁰⁾√f(t)` at every RK4 stage time. Noise is applied per realization.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveTemplate {
    amp_s: Vec<f64>,
    omega_d: Option<Vec<f64>>,
    grid: TimeGrid,
}

impl DriveTemplate {
    pub fn new(
        system: &SystemSpec,
        s_envelope: &Envelope,
        d_envelope: Option<&Envelope>,
        grid: TimeGrid,
    ) -> Result<Self> {
        system.validate()?;
        let half = 0.5 * grid.dt();
        let samples = 2 * grid.n_steps + 1;
        let amp_s = (0..samples)
            .map(|j| system.omega_s0 * s_envelope.eval(j as f64 * half).sqrt())
            .collect();
        let omega_d = match (system.levels, d_envelope) {
            (Levels::Two, None) => None,
            (Levels::Two, Some(_)) => {
                return Err(FelError::Config(
                    "a two-level system takes no upper-transition drive".into(),
                ))
            }
            (Levels::Three, None) => {
                return Err(FelError::Config(
                    "a three-level system needs an upper-transition envelope".into(),
                ))
            }
            (Levels::Three, Some(env)) => Some(
                (0..samples)
                    .map(|j| system.omega_d0 * env.eval(j as f64 * half).sqrt())
                    .collect(),
            ),
        };
        Ok(DriveTemplate {
            amp_s,
            omega_d,
            grid,
        })
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    /// Multiply the lower-transition amplitude by one noise realization.
    pub fn realize(&self, s_noise: Option<&NoiseTrace>) -> Result<DriveTraces> {
        let half = 0.5 * self.grid.dt();
        let omega_s = match s_noise {
            Some(noise) => {
                if noise.duration() + 1e-9 < self.grid.t_final {
                    return Err(FelError::GridMismatch(format!(
                        "noise covers [0, {:.4}] but integration runs to {:.4}",
                        noise.duration(),
                        self.grid.t_final
                    )));
                }
                let z = noise.samples();
                let last = z.len() - 1;
                let ratio = half / noise.dt();
                self.amp_s
                    .iter()
                    .enumerate()
                    .map(|(j, &amp)| {
                        let x = j as f64 * ratio;
                        let k = (x as usize).min(last);
                        let zeta = if k == last {
                            z[last]
                        } else {
                            let frac = x - k as f64;
                            z[k] * (1.0 - frac) + z[k + 1] * frac
                        };
                        zeta * amp
                    })
                    .collect()
            }
            None => self
                .amp_s
                .iter()
                .map(|&amp| Complex64::new(amp, 0.0))
                .collect(),
        };
        DriveTraces::new(omega_s, self.omega_d.clone(), self.grid)
    }
}

/// Rotating-frame density matrix plus accumulated Auger yields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityState {
    pub sigma11: f64,
    pub sigma22: f64,
    pub sigma33: f64,
    pub sigma12: Complex64,
    pub sigma23: Complex64,
    pub sigma13: Complex64,
    pub q2: f64,
    pub q3: f64,
}

impl DensityState {
    /// Atom in its ground state, no yield yet.
    pub fn ground() -> Self {
        DensityState {
            sigma11: 1.0,
            sigma22: 0.0,
            sigma33: 0.0,
            sigma12: Complex64::new(0.0, 0.0),
            sigma23: Complex64::new(0.0, 0.0),
            sigma13: Complex64::new(0.0, 0.0),
            q2: 0.0,
            q3: 0.0,
        }
    }

    /// `Σσ_jj + ΣQ_j`, equal to 1 for an exact solution.
    pub fn total_probability(&self) -> f64 {
        self.sigma11 + self.sigma22 + self.sigma33 + self.q2 + self.q3
    }

    /// Populations within `[-tol, 1+tol]` and `|σᵢⱼ|² ≤ σᵢᵢσⱼⱼ + tol`.
    pub fn is_physical(&self, tol: f64) -> bool {
        let pops = [self.sigma11, self.sigma22, self.sigma33];
        pops.iter().all(|p| *p >= -tol && *p <= 1.0 + tol)
            && self.sigma12.norm_sqr() <= self.sigma11 * self.sigma22 + tol
            && self.sigma23.norm_sqr() <= self.sigma22 * self.sigma33 + tol
            && self.sigma13.norm_sqr() <= self.sigma11 * self.sigma33 + tol
    }

    fn is_finite(&self) -> bool {
        [
            self.sigma11,
            self.sigma22,
            self.sigma33,
            self.sigma12.re,
            self.sigma12.im,
            self.sigma23.re,
            self.sigma23.im,
            self.sigma13.re,
            self.sigma13.im,
            self.q2,
            self.q3,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

type TwoState = [f64; 5];
type ThreeState = [f64; 11];

#[inline(always)]
fn axpy<const N: usize>(y: &[f64; N], k: &[f64; N], h: f64) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        out[i] += h * k[i];
    }
    out
}

/// One classical RK4 step; `f(y, j)` evaluates the derivative with the
/// drive at half-step sample `j`.
#[inline(always)]
fn rk4_step<const N: usize>(
    y: &[f64; N],
    j: usize,
    dt: f64,
    f: &impl Fn(&[f64; N], usize) -> [f64; N],
) -> [f64; N] {
    let k1 = f(y, j);
    let k2 = f(&axpy(y, &k1, 0.5 * dt), j + 1);
    let k3 = f(&axpy(y, &k2, 0.5 * dt), j + 1);
    let k4 = f(&axpy(y, &k3, dt), j + 2);
    let mut out = *y;
    for i in 0..N {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
    }
    out
}

#[inline(always)]
fn two_level_rhs(y: &TwoState, omega: Complex64, delta: f64, gamma: f64) -> TwoState {
    let (s11, s22) = (y[0], y[1]);
    let s12 = Complex64::new(y[2], y[3]);
    let flow = 2.0 * (omega.conj() * s12).im;
    let d12 = Complex64::new(-0.5 * gamma, delta) * s12 + I * omega * (s22 - s11);
    [flow, -gamma * s22 - flow, d12.re, d12.im, gamma * s22]
}

fn two_to_state(y: &TwoState) -> DensityState {
    DensityState {
        sigma11: y[0],
        sigma22: y[1],
        sigma12: Complex64::new(y[2], y[3]),
        q2: y[4],
        ..DensityState::ground()
    }
}

struct ThreeRates {
    gamma2: f64,
    gamma3: f64,
    c12: Complex64,
    c23: Complex64,
    c13: Complex64,
}

#[inline(always)]
fn three_level_rhs(y: &ThreeState, os: Complex64, od: f64, r: &ThreeRates) -> ThreeState {
    let (s11, s22, s33) = (y[0], y[1], y[2]);
    let s12 = Complex64::new(y[3], y[4]);
    let s23 = Complex64::new(y[5], y[6]);
    let s13 = Complex64::new(y[7], y[8]);
    let lower = 2.0 * (os.conj() * s12).im;
    let upper = 2.0 * (s23 * od).im;
    let d12 = r.c12 * s12 + I * (os * (s22 - s11) - s13 * od);
    let d23 = r.c23 * s23 + I * (os.conj() * s13 + (s33 - s22) * od);
    let d13 = r.c13 * s13 + I * (os * s23 - s12 * od);
    [
        lower,
        -r.gamma2 * s22 - lower + upper,
        -r.gamma3 * s33 - upper,
        d12.re,
        d12.im,
        d23.re,
        d23.im,
        d13.re,
        d13.im,
        r.gamma2 * s22,
        r.gamma3 * s33,
    ]
}

fn three_to_state(y: &ThreeState) -> DensityState {
    DensityState {
        sigma11: y[0],
        sigma22: y[1],
        sigma33: y[2],
        sigma12: Complex64::new(y[3], y[4]),
        sigma23: Complex64::new(y[5], y[6]),
        sigma13: Complex64::new(y[7], y[8]),
        q2: y[9],
        q3: y[10],
    }
}

fn check_final(state: DensityState, t: f64) -> Result<DensityState> {
    let drift = state.total_probability() - 1.0;
    if !state.is_finite() || drift.abs() > CONSERVATION_TOLERANCE {
        return Err(FelError::Integration {
            realization: None,
            time: t,
            message: format!(
                "probability drift {drift:.3e} (state {state:?}); reduce the step size"
            ),
        });
    }
    Ok(state)
}

/// Propagate from the ground state, calling `observer(t, state)` at every
/// grid time including `t = 0`.
pub fn integrate_observed(
    system: &SystemSpec,
    drive: &DriveTraces,
    mut observer: impl FnMut(f64, &DensityState),
) -> Result<DensityState> {
    system.validate()?;
    let grid = drive.grid();
    let dt = grid.dt();
    let os = drive.omega_s();
    match system.levels {
        Levels::Two => {
            if drive.omega_d().is_some() {
                return Err(FelError::Config(
                    "two-level integration got an upper-transition drive".into(),
                ));
            }
            let (delta, gamma) = (system.delta_s, system.gamma2);
            let rhs = |y: &TwoState, j: usize| two_level_rhs(y, os[j], delta, gamma);
            let mut y: TwoState = [1.0, 0.0, 0.0, 0.0, 0.0];
            observer(0.0, &two_to_state(&y));
            for k in 0..grid.n_steps {
                y = rk4_step(&y, 2 * k, dt, &rhs);
                observer((k + 1) as f64 * dt, &two_to_state(&y));
            }
            check_final(two_to_state(&y), grid.t_final)
        }
        Levels::Three => {
            let od = drive.omega_d().ok_or_else(|| {
                FelError::Config("three-level integration needs an upper-transition drive".into())
            })?;
            let rates = ThreeRates {
                gamma2: system.gamma2,
                gamma3: system.gamma3,
                c12: Complex64::new(-system.gamma12(), system.delta_s),
                c23: Complex64::new(-system.gamma23(), system.delta_d),
                c13: Complex64::new(-system.gamma13(), system.delta_s + system.delta_d),
            };
            let rhs = |y: &ThreeState, j: usize| three_level_rhs(y, os[j], od[j], &rates);
            let mut y: ThreeState = [0.0; 11];
            y[0] = 1.0;
            observer(0.0, &three_to_state(&y));
            for k in 0..grid.n_steps {
                y = rk4_step(&y, 2 * k, dt, &rhs);
                observer((k + 1) as f64 * dt, &three_to_state(&y));
            }
            check_final(three_to_state(&y), grid.t_final)
        }
    }
}

/// Final state of the single-resonance equations.
pub fn integrate_two_level(system: &SystemSpec, drive: &DriveTraces) -> Result<DensityState> {
    if system.levels != Levels::Two {
        return Err(FelError::Config("expected a two-level system".into()));
    }
    integrate_observed(system, drive, |_, _| {})
}

/// Final state of the double-resonance ladder equations.
pub fn integrate_three_level(system: &SystemSpec, drive: &DriveTraces) -> Result<DensityState> {
    if system.levels != Levels::Three {
        return Err(FelError::Config("expected a three-level system".into()));
    }
    integrate_observed(system, drive, |_, _| {})
}

/// Dispatch on `system.levels`.
pub fn integrate(system: &SystemSpec, drive: &DriveTraces) -> Result<DensityState> {
    integrate_observed(system, drive, |_, _| {})
}

/// Dressed states of a stationary, strongly driven transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DressedStates {
    pub omega_plus: f64,
    pub omega_minus: f64,
    /// `ω₊ − ω₋ = √(Δ² + 4Ω²)`.
    pub splitting: f64,
    /// `|⟨·|−⟩| / |⟨·|+⟩|`, the relative weight of the two probe paths.
    pub mixing_ratio: f64,
}

pub fn dressed_eigensystem(omega_rabi: f64, delta: f64) -> DressedStates {
    let root = (delta * delta + 4.0 * omega_rabi * omega_rabi).sqrt();
    let omega_plus = -0.5 * delta + 0.5 * root;
    let omega_minus = -0.5 * delta - 0.5 * root;
    // |sin θ±| = Ω/√(ω±² + Ω²) from tan θ± = ∓Ω/ω±
    let w2 = omega_rabi * omega_rabi;
    let plus = omega_plus * omega_plus + w2;
    let minus = omega_minus * omega_minus + w2;
    let mixing_ratio = if minus == 0.0 {
        1.0
    } else {
        (plus / minus).sqrt()
    };
    DressedStates {
        omega_plus,
        omega_minus,
        splitting: root,
        mixing_ratio,
    }
}
