//! Stationary complex Gaussian colored noise.
//!
//! A realization is drawn in the frequency domain: every grid frequency
//! `ω_k` receives an independent circular complex Gaussian amplitude with
//! variance `δω·P_Λ(ω_k)`, and an unnormalized inverse DFT turns the
//! amplitudes into time samples `ζ(t_j)`. `P_Λ` is the PSD folded onto
//! the grid span Λ (the spectrum of the continuous process sampled every
//! `2π/Λ`), so the samples carry the exact autocorrelation at every grid
//! lag and `⟨|ζ|²⟩ = Σ δω P_Λ(ω_k) ≈ 1`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};

use crate::error::{FelError, Result};

/// Spectral family of the noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PsdKind {
    /// Exponentially correlated noise (Lorentzian line).
    Lorentzian,
    /// Gaussian-correlated noise.
    Gaussian,
    /// Hyperbolic-secant correlated noise.
    Sech,
}

impl PsdKind {
    pub const ALL: [PsdKind; 3] = [PsdKind::Lorentzian, PsdKind::Gaussian, PsdKind::Sech];

    pub fn name(self) -> &'static str {
        match self {
            PsdKind::Lorentzian => "lorentzian",
            PsdKind::Gaussian => "gaussian",
            PsdKind::Sech => "sech",
        }
    }
}

impl std::str::FromStr for PsdKind {
    type Err = FelError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lorentzian" | "exponential" | "exp" => Ok(PsdKind::Lorentzian),
            "gaussian" | "gauss" => Ok(PsdKind::Gaussian),
            "sech" => Ok(PsdKind::Sech),
            other => Err(FelError::Config(format!("unknown PSD kind '{other}'"))),
        }
    }
}

/// Power spectral density of the noise, centered on the carrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdSpec {
    pub kind: PsdKind,
    /// Width parameter σ_ω, in units of Γ₂.
    pub sigma_omega: f64,
}

impl PsdSpec {
    pub fn new(kind: PsdKind, sigma_omega: f64) -> Result<Self> {
        let spec = PsdSpec { kind, sigma_omega };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_omega.is_finite() && self.sigma_omega > 0.0) {
            return Err(FelError::Config(format!(
                "sigma_omega must be positive and finite, got {}",
                self.sigma_omega
            )));
        }
        Ok(())
    }
}

/// Evaluate the unit-area PSD at detuning `omega` from the carrier.
pub fn psd_value(spec: &PsdSpec, omega: f64) -> f64 {
    let s = spec.sigma_omega;
    let w = omega / s;
    match spec.kind {
        PsdKind::Lorentzian => 1.0 / (s * PI * (w * w + 1.0)),
        PsdKind::Gaussian => (-0.5 * w * w).exp() / (s * (2.0 * PI).sqrt()),
        PsdKind::Sech => sech(PI * w) / s,
    }
}

/// PSD folded onto one period of width `span`: `Σ_m P(ω + mΛ)`.
pub fn folded_psd(spec: &PsdSpec, omega: f64, span: f64) -> f64 {
    let s = spec.sigma_omega;
    match spec.kind {
        PsdKind::Lorentzian => {
            let a = 2.0 * PI * s / span;
            a.sinh() / (span * (a.cosh() - (2.0 * PI * omega / span).cos()))
        }
        // both tails fall off exponentially; a few images are exact to
        // rounding for any span that passes the grid checks
        PsdKind::Gaussian | PsdKind::Sech => (-6..=6)
            .map(|m| psd_value(spec, omega + m as f64 * span))
            .sum(),
    }
}

/// Closed-form modulus of the first-order degree of coherence at delay `v`.
pub fn theoretical_g1(spec: &PsdSpec, v: f64) -> f64 {
    let x = (v * spec.sigma_omega).abs();
    match spec.kind {
        PsdKind::Lorentzian => (-x).exp(),
        PsdKind::Gaussian => (-0.5 * x * x).exp(),
        PsdKind::Sech => sech(0.5 * x),
    }
}

/// Coherence time `T_c = ∫|g¹(v)|² dv`.
pub fn coherence_time(spec: &PsdSpec) -> f64 {
    let inv = 1.0 / spec.sigma_omega;
    match spec.kind {
        PsdKind::Lorentzian => inv,
        PsdKind::Gaussian => PI.sqrt() * inv,
        PsdKind::Sech => 4.0 * inv,
    }
}

/// FWHM of the PSD (the noise bandwidth γ).
pub fn noise_bandwidth(spec: &PsdSpec) -> f64 {
    let s = spec.sigma_omega;
    match spec.kind {
        PsdKind::Lorentzian => 2.0 * s,
        PsdKind::Gaussian => 2.0 * s * (2.0 * 2f64.ln()).sqrt(),
        PsdKind::Sech => 2.0 * s * 2f64.acosh() / PI,
    }
}

pub(crate) fn sech(x: f64) -> f64 {
    // 1/cosh overflows gracefully to 0 for large |x|
    1.0 / x.cosh()
}

/// Uniform frequency grid of `n_points` samples with spacing `delta_omega`.
///
/// The implied time grid has step `2π/Λ` and period `2π/δω`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    pub n_points: usize,
    pub delta_omega: f64,
}

impl FrequencyGrid {
    pub fn new(n_points: usize, delta_omega: f64) -> Result<Self> {
        if n_points < 2 || !n_points.is_multiple_of(2) {
            return Err(FelError::Config(format!(
                "grid size must be a positive even integer, got {n_points}"
            )));
        }
        if !(delta_omega.is_finite() && delta_omega > 0.0) {
            return Err(FelError::Config(format!(
                "grid step must be positive, got {delta_omega}"
            )));
        }
        Ok(FrequencyGrid {
            n_points,
            delta_omega,
        })
    }

    /// Default sizing for a simulation window `[0, t_final]`.
    ///
    /// The span covers the larger of `32σ_ω`, the `δt ≤ T_c/20` bound and
    /// `8·2π/T_f`, enlarged so that `T_f` is a whole number `K` of time
    /// steps; the point count is the next power of two at or above `4K`,
    /// which keeps `δω ≤ 2π/(4T_f)`.
    pub fn for_spec(spec: &PsdSpec, t_final: f64) -> Result<Self> {
        spec.validate()?;
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(FelError::Config(format!(
                "t_final must be positive, got {t_final}"
            )));
        }
        let span = [
            32.0 * spec.sigma_omega,
            // small margin keeps the δt bound strict after rounding
            40.0 * PI / coherence_time(spec) * (1.0 + 1e-9),
            16.0 * PI / t_final,
        ]
        .into_iter()
        .fold(0.0, f64::max);
        let steps = (span * t_final / (2.0 * PI)).ceil().max(1.0);
        let span = 2.0 * PI * steps / t_final;
        let n = ((4.0 * steps) as usize).max(2).next_power_of_two();
        FrequencyGrid::new(n, span / n as f64)
    }

    /// Total frequency span Λ.
    pub fn span(&self) -> f64 {
        self.n_points as f64 * self.delta_omega
    }

    /// Time step of the synthesized trace.
    pub fn time_step(&self) -> f64 {
        2.0 * PI / self.span()
    }

    /// Period of the synthesized trace.
    pub fn duration(&self) -> f64 {
        2.0 * PI / self.delta_omega
    }

    /// Angular frequency of FFT bin `k` (standard FFT ordering).
    pub fn omega(&self, k: usize) -> f64 {
        let n = self.n_points;
        let signed = if k < n / 2 {
            k as f64
        } else {
            k as f64 - n as f64
        };
        signed * self.delta_omega
    }

    /// Check the sizing invariants against a PSD.
    pub fn validate_for(&self, spec: &PsdSpec) -> Result<()> {
        spec.validate()?;
        if self.span() < 16.0 * spec.sigma_omega {
            return Err(FelError::Config(format!(
                "frequency span {:.4} narrower than 16 sigma_omega = {:.4}",
                self.span(),
                16.0 * spec.sigma_omega
            )));
        }
        let tc = coherence_time(spec);
        if self.time_step() > tc / 20.0 {
            return Err(FelError::Config(format!(
                "time step {:.5} exceeds T_c/20 = {:.5}",
                self.time_step(),
                tc / 20.0
            )));
        }
        Ok(())
    }
}

/// One realization of a unit-variance complex noise process on a uniform
/// time grid starting at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTrace {
    samples: Vec<Complex64>,
    dt: f64,
}

impl NoiseTrace {
    pub fn new(samples: Vec<Complex64>, dt: f64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(FelError::InsufficientData(
                "a trace needs at least two samples".into(),
            ));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(FelError::Config(format!(
                "trace step must be positive, got {dt}"
            )));
        }
        Ok(NoiseTrace { samples, dt })
    }

    /// Deterministic trace `ζ ≡ 1`, the noiseless limit.
    pub fn constant(len: usize, dt: f64) -> Self {
        NoiseTrace {
            samples: vec![Complex64::new(1.0, 0.0); len.max(2)],
            dt,
        }
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Time of the last sample.
    pub fn duration(&self) -> f64 {
        (self.samples.len() - 1) as f64 * self.dt
    }

    /// Linear interpolation between grid samples; `t` is clamped to the
    /// sampled range.
    pub fn at(&self, t: f64) -> Complex64 {
        let x = (t / self.dt).max(0.0);
        let last = self.samples.len() - 1;
        let k = (x.floor() as usize).min(last);
        if k == last {
            return self.samples[last];
        }
        let frac = x - k as f64;
        self.samples[k] * (1.0 - frac) + self.samples[k + 1] * frac
    }
}

/// Reusable synthesizer: spectral amplitudes and an FFT plan for one
/// (PSD, grid) pair. Cheap to clone and safe to share between threads.
#[derive(Clone)]
pub struct ColoredNoise {
    spec: PsdSpec,
    grid: FrequencyGrid,
    amplitudes: Arc<Vec<f64>>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for ColoredNoise {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ColoredNoise")
            .field("spec", &self.spec)
            .field("grid", &self.grid)
            .finish()
    }
}

impl ColoredNoise {
    pub fn new(spec: PsdSpec, grid: FrequencyGrid) -> Result<Self> {
        grid.validate_for(&spec)?;
        // per-quadrature standard deviation sqrt(δω P_Λ / 2)
        let span = grid.span();
        let amplitudes = (0..grid.n_points)
            .map(|k| {
                (grid.delta_omega * folded_psd(&spec, grid.omega(k), span)).sqrt() * FRAC_1_SQRT_2
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_inverse(grid.n_points);
        Ok(ColoredNoise {
            spec,
            grid,
            amplitudes: Arc::new(amplitudes),
            fft,
        })
    }

    pub fn spec(&self) -> &PsdSpec {
        &self.spec
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    /// Discrete-grid variance `Σ δω P_Λ(ω_k)`.
    pub fn discrete_variance(&self) -> f64 {
        self.amplitudes.iter().map(|a| 2.0 * a * a).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> NoiseTrace {
        let mut buf: Vec<Complex64> = self
            .amplitudes
            .iter()
            .map(|&a| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(a * re, a * im)
            })
            .collect();
        self.fft.process(&mut buf);
        NoiseTrace {
            samples: buf,
            dt: self.grid.time_step(),
        }
    }
}

/// Draw one noise realization for `spec` on `grid`.
pub fn sample_noise<R: Rng + ?Sized>(
    spec: &PsdSpec,
    grid: &FrequencyGrid,
    rng: &mut R,
) -> Result<NoiseTrace> {
    Ok(ColoredNoise::new(*spec, *grid)?.sample(rng))
}

/// Unit-modulus phase-diffusion trace `e^{iφ(t)}` with `φ` a Wiener process
/// whose Lorentzian line has FWHM `gamma`. The start phase is uniform.
pub fn sample_phase_diffusion<R: Rng + ?Sized>(
    gamma: f64,
    dt: f64,
    len: usize,
    rng: &mut R,
) -> Result<NoiseTrace> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(FelError::Config(format!(
            "phase-diffusion bandwidth must be positive, got {gamma}"
        )));
    }
    let kick = (gamma * dt).sqrt();
    let mut phase = rng.random::<f64>() * 2.0 * PI;
    let mut samples = Vec::with_capacity(len);
    for _ in 0..len {
        samples.push(Complex64::from_polar(1.0, phase));
        let n: f64 = rng.sample(StandardNormal);
        phase += kick * n;
    }
    NoiseTrace::new(samples, dt)
}

/// Ensemble estimate of `|g¹(v)|` with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct G1Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// Empirical degree of first-order coherence at a delay of `lag` samples.
///
/// The lagged product `ζ(t)ζ*(t+v)` is averaged over realizations and over
/// every `t` with `t + v` on the grid, then normalized by the matching
/// mean intensities. The standard error comes from the spread of the
/// per-realization contributions (delta method on the ratio).
pub fn empirical_g1(traces: &[NoiseTrace], lag: usize) -> Result<G1Estimate> {
    if traces.len() < 2 {
        return Err(FelError::InsufficientData(format!(
            "empirical g1 needs at least 2 traces, got {}",
            traces.len()
        )));
    }
    let len = traces[0].len();
    let dt = traces[0].dt();
    if traces.iter().any(|t| t.len() != len || t.dt() != dt) {
        return Err(FelError::GridMismatch(
            "traces do not share one grid".into(),
        ));
    }
    if lag >= len {
        return Err(FelError::InsufficientData(format!(
            "lag {lag} does not fit a trace of {len} samples"
        )));
    }
    let m = (len - lag) as f64;
    let per: Vec<(Complex64, f64, f64)> = traces
        .iter()
        .map(|tr| {
            let s = tr.samples();
            let mut a = Complex64::new(0.0, 0.0);
            let mut b = 0.0;
            let mut c = 0.0;
            for k in 0..len - lag {
                a += s[k] * s[k + lag].conj();
                b += s[k].norm_sqr();
                c += s[k + lag].norm_sqr();
            }
            (a / m, b / m, c / m)
        })
        .collect();
    let n = per.len() as f64;
    let a_mean = per.iter().map(|p| p.0).sum::<Complex64>() / n;
    let b_mean = per.iter().map(|p| p.1).sum::<f64>() / n;
    let c_mean = per.iter().map(|p| p.2).sum::<f64>() / n;
    let norm = (b_mean * c_mean).sqrt();
    if norm <= 0.0 {
        return Err(FelError::InsufficientData("traces carry no power".into()));
    }
    let value = a_mean.norm() / norm;
    let phase = if a_mean.norm() > 0.0 {
        a_mean.conj() / a_mean.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let a_proj = (a_mean * phase).re;
    let var = per
        .iter()
        .map(|&(a, b, c)| {
            let da = (a * phase).re - a_proj;
            let psi = da / norm - 0.5 * value * ((b - b_mean) / b_mean + (c - c_mean) / c_mean);
            psi * psi
        })
        .sum::<f64>()
        / (n - 1.0);
    Ok(G1Estimate {
        value,
        stderr: (var / n).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn psd_values_at_center() {
        let g = PsdSpec::new(PsdKind::Gaussian, 1.0).unwrap();
        assert_relative_eq!(psd_value(&g, 0.0), 1.0 / (2.0 * PI).sqrt(), epsilon = 1e-15);
        let s = PsdSpec::new(PsdKind::Sech, 1.0).unwrap();
        assert_relative_eq!(psd_value(&s, 0.0), 1.0, epsilon = 1e-15);
        let l = PsdSpec::new(PsdKind::Lorentzian, 2.0).unwrap();
        assert_relative_eq!(psd_value(&l, 0.0), 1.0 / (2.0 * PI), epsilon = 1e-15);
    }

    #[test]
    fn g1_closed_forms() {
        let g = PsdSpec::new(PsdKind::Gaussian, 1.0).unwrap();
        assert_eq!(theoretical_g1(&g, 0.0), 1.0);
        assert_relative_eq!(theoretical_g1(&g, 1.0), (-0.5f64).exp(), epsilon = 1e-15);
        let s = PsdSpec::new(PsdKind::Sech, 2.0).unwrap();
        assert_relative_eq!(
            theoretical_g1(&s, 1.0),
            0.648_054_273_663_885_3,
            epsilon = 1e-12
        );
    }

    #[test]
    fn coherence_times_and_bandwidths() {
        let g2 = PsdSpec::new(PsdKind::Gaussian, 2.0).unwrap();
        assert_relative_eq!(coherence_time(&g2), PI.sqrt() / 2.0, epsilon = 1e-15);
        let l1 = PsdSpec::new(PsdKind::Lorentzian, 1.0).unwrap();
        assert_eq!(coherence_time(&l1), 1.0);
        assert_eq!(noise_bandwidth(&l1), 2.0);
        let s4 = PsdSpec::new(PsdKind::Sech, 4.0).unwrap();
        assert_eq!(coherence_time(&s4), 1.0);
        let g1 = PsdSpec::new(PsdKind::Gaussian, 1.0).unwrap();
        assert_relative_eq!(noise_bandwidth(&g1), 2.354_820_045_030_949, epsilon = 1e-12);
        let s1 = PsdSpec::new(PsdKind::Sech, 1.0).unwrap();
        assert_relative_eq!(
            noise_bandwidth(&s1),
            0.838_401_436_557_965_4,
            epsilon = 1e-12
        );
    }

    /// Simpson quadrature, independent of the closed forms above.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(a + i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn coherence_time_matches_quadrature() {
        for kind in PsdKind::ALL {
            let spec = PsdSpec::new(kind, 1.7).unwrap();
            let tc = simpson(|v| theoretical_g1(&spec, v).powi(2), -60.0, 60.0, 200_000);
            assert_relative_eq!(tc, coherence_time(&spec), max_relative = 1e-8);
        }
    }

    #[test]
    fn bandwidth_is_psd_fwhm() {
        for kind in PsdKind::ALL {
            let spec = PsdSpec::new(kind, 1.3).unwrap();
            let half = 0.5 * noise_bandwidth(&spec);
            assert_relative_eq!(
                psd_value(&spec, half) / psd_value(&spec, 0.0),
                0.5,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn psd_unit_area() {
        // the Lorentzian tail beyond ±12σ holds 2/π·atan(1/12) of the mass
        for kind in PsdKind::ALL {
            let spec = PsdSpec::new(kind, 0.8).unwrap();
            let s = spec.sigma_omega;
            let inner = simpson(|w| psd_value(&spec, w), -12.0 * s, 12.0 * s, 100_000);
            let expected = match kind {
                PsdKind::Lorentzian => 1.0 - 2.0 / PI * (1.0f64 / 12.0).atan(),
                _ => 1.0,
            };
            assert!((inner - expected).abs() < 1e-6, "{kind:?}: {inner}");
        }
    }

    #[test]
    fn rejects_bad_sigma() {
        assert!(PsdSpec::new(PsdKind::Gaussian, -1.0).is_err());
        assert!(PsdSpec::new(PsdKind::Gaussian, 0.0).is_err());
        assert!(PsdSpec::new(PsdKind::Gaussian, f64::NAN).is_err());
    }

    #[test]
    fn default_grid_meets_invariants() {
        for kind in PsdKind::ALL {
            for sigma in [0.3, 1.0, 3.3, 10.0] {
                let spec = PsdSpec::new(kind, sigma).unwrap();
                let grid = FrequencyGrid::for_spec(&spec, 32.0).unwrap();
                grid.validate_for(&spec).unwrap();
                assert!(grid.n_points.is_power_of_two());
                assert!(grid.duration() >= 4.0 * 32.0 - 1e-9);
                let noise = ColoredNoise::new(spec, grid).unwrap();
                let var = noise.discrete_variance();
                assert!((var - 1.0).abs() < 1e-9, "{kind:?} {sigma}: {var}");
            }
        }
    }

    #[test]
    fn folded_lorentzian_matches_image_sum() {
        let spec = PsdSpec::new(PsdKind::Lorentzian, 1.3).unwrap();
        let span = 40.0;
        for omega in [0.0, 3.1, -17.5, 20.0] {
            let m_max = 200_000;
            // images beyond ±m_max add about 2σ/(π Λ² m_max)
            let brute: f64 = (-m_max..=m_max)
                .map(|m| psd_value(&spec, omega + m as f64 * span))
                .sum::<f64>()
                + 2.0 * 1.3 / (PI * span * span * m_max as f64);
            assert_relative_eq!(folded_psd(&spec, omega, span), brute, max_relative = 1e-8);
        }
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let spec = PsdSpec::new(PsdKind::Gaussian, 1.0).unwrap();
        let narrow = FrequencyGrid::new(64, 0.2).unwrap();
        assert!(matches!(
            narrow.validate_for(&spec),
            Err(FelError::Config(_))
        ));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(sample_noise(&spec, &narrow, &mut rng).is_err());
        assert!(FrequencyGrid::new(63, 0.1).is_err());
    }

    #[test]
    fn single_trace_is_gaussian() {
        let spec = PsdSpec::new(PsdKind::Gaussian, 1.0).unwrap();
        // long period so the ~10⁶ samples span ~1.8·10⁴ coherence times
        let grid = FrequencyGrid::new(1 << 20, 2e-4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let trace = sample_noise(&spec, &grid, &mut rng).unwrap();
        let xs: Vec<f64> = trace.samples().iter().map(|z| z.re).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let m3 = xs.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
        let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
        let skew = m3 / m2.powf(1.5);
        let kurt = m4 / (m2 * m2);
        assert!(n >= 1e5);
        assert!(skew.abs() < 0.1, "skew {skew}");
        assert!((kurt - 3.0).abs() < 0.2, "kurtosis {kurt}");
        assert!((m2 - 0.5).abs() < 0.05, "quadrature variance {m2}");
    }

    #[test]
    fn interpolation_hits_samples_and_midpoints() {
        let s = vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(2.0, -2.0),
            Complex64::new(4.0, 0.0),
        ];
        let tr = NoiseTrace::new(s, 0.5).unwrap();
        assert_eq!(tr.at(0.5), Complex64::new(2.0, -2.0));
        assert_eq!(tr.at(0.25), Complex64::new(1.0, -1.0));
        assert_eq!(tr.at(10.0), Complex64::new(4.0, 0.0));
        assert_eq!(tr.at(-1.0), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn g1_needs_two_traces() {
        let tr = NoiseTrace::constant(16, 0.1);
        assert!(matches!(
            empirical_g1(std::slice::from_ref(&tr), 1),
            Err(FelError::InsufficientData(_))
        ));
        let g = empirical_g1(&[tr.clone(), tr], 0).unwrap();
        assert_eq!(g.value, 1.0);
    }

    #[test]
    fn phase_diffusion_has_unit_modulus() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tr = sample_phase_diffusion(0.7, 0.01, 1000, &mut rng).unwrap();
        assert!(tr.samples().iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        assert!(sample_phase_diffusion(0.0, 0.01, 10, &mut rng).is_err());
    }
}
