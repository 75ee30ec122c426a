//! Stochastic pulses: colored noise under a deterministic envelope, and the
//! chaotic-light statistics used to validate them.

use std::f64::consts::PI;
use std::ops::Range;

use num_complex::Complex64;
use rand::Rng;
use rustfft::FftPlanner;
use statrs::function::gamma::gamma_lr;

use crate::error::{FelError, Result};
use crate::noise::{sample_phase_diffusion, NoiseTrace};
use crate::stats;

/// Stand-in for `M` when every pulse carries the same energy.
pub const M_CAP: f64 = 1e12;

/// One Gaussian term `weight·exp[-(t-center)²/width²]` of a composite profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianComponent {
    pub weight: f64,
    pub center: f64,
    pub width: f64,
}

/// Asymmetric multi-hump profile built from Gaussians, rescaled to peak 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile2 {
    components: Vec<GaussianComponent>,
    scale: f64,
    peak_time: f64,
}

impl Profile2 {
    pub fn new(components: Vec<GaussianComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(FelError::Config(
                "profile needs at least one component".into(),
            ));
        }
        for c in &components {
            if !(c.weight > 0.0 && c.width > 0.0 && c.center.is_finite()) {
                return Err(FelError::Config(format!("invalid profile component {c:?}")));
            }
        }
        let raw = |t: f64| -> f64 {
            components
                .iter()
                .map(|c| c.weight * (-((t - c.center) / c.width).powi(2)).exp())
                .sum()
        };
        let lo = components
            .iter()
            .map(|c| c.center - 4.0 * c.width)
            .fold(f64::INFINITY, f64::min);
        let hi = components
            .iter()
            .map(|c| c.center + 4.0 * c.width)
            .fold(f64::NEG_INFINITY, f64::max);
        let n = 20_000;
        let h = (hi - lo) / n as f64;
        let best = (0..=n)
            .map(|i| lo + i as f64 * h)
            .max_by(|a, b| raw(*a).total_cmp(&raw(*b)))
            .unwrap_or(lo);
        // golden-section refinement inside the bracketing cells
        let (mut a, mut b) = (best - h, best + h);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if raw(c) > raw(d) {
                b = d;
            } else {
                a = c;
            }
        }
        let peak_time = 0.5 * (a + b);
        Ok(Profile2 {
            scale: 1.0 / raw(peak_time),
            components,
            peak_time,
        })
    }

    /// The standard three-Gaussian construction around `t0`.
    pub fn standard(t0: f64) -> Self {
        let c = |weight, offset, width| GaussianComponent {
            weight,
            center: t0 + offset,
            width,
        };
        Profile2::new(vec![c(1.0, -2.0, 1.5), c(0.7, 0.0, 2.0), c(0.5, 2.5, 1.2)])
            .expect("standard profile components are valid")
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn peak_time(&self) -> f64 {
        self.peak_time
    }

    fn eval(&self, t: f64) -> f64 {
        self.scale
            * self
                .components
                .iter()
                .map(|c| c.weight * (-((t - c.center) / c.width).powi(2)).exp())
                .sum::<f64>()
    }
}

/// Deterministic intensity envelope `f(t)` with peak value 1.
#[derive(Debug, Clone, PartialEq)]
pub enum Envelope {
    /// `exp[-(t-t0)²/τ²]`.
    Gaussian {
        tau: f64,
        t0: f64,
    },
    Profile2(Profile2),
    /// 1 on `[start, end]` with raised-cosine ramps over 5% of the length.
    Flat {
        start: f64,
        end: f64,
    },
}

impl Envelope {
    pub fn gaussian(tau: f64, t0: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0 && t0.is_finite()) {
            return Err(FelError::Config(format!(
                "gaussian envelope needs tau > 0 and finite t0, got tau={tau}, t0={t0}"
            )));
        }
        Ok(Envelope::Gaussian { tau, t0 })
    }

    pub fn flat(start: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite() && end > start) {
            return Err(FelError::Config(format!(
                "flat envelope needs start < end, got [{start}, {end}]"
            )));
        }
        Ok(Envelope::Flat { start, end })
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Envelope::Gaussian { tau, t0 } => (-((t - t0) / tau).powi(2)).exp(),
            Envelope::Profile2(p) => p.eval(t),
            Envelope::Flat { start, end } => {
                if t <= *start || t >= *end {
                    return 0.0;
                }
                let ramp = 0.05 * (end - start);
                let edge = (t - start).min(end - t);
                if edge >= ramp {
                    1.0
                } else {
                    0.5 * (1.0 - (PI * edge / ramp).cos())
                }
            }
        }
    }

    /// Duration parameter τ of a Gaussian envelope.
    pub fn tau(&self) -> Option<f64> {
        match self {
            Envelope::Gaussian { tau, .. } => Some(*tau),
            _ => None,
        }
    }

    /// Time of the envelope maximum.
    pub fn peak_time(&self) -> f64 {
        match self {
            Envelope::Gaussian { t0, .. } => *t0,
            Envelope::Profile2(p) => p.peak_time(),
            Envelope::Flat { start, end } => 0.5 * (start + end),
        }
    }

    /// Whether the envelope has decayed below `1e-4` at both ends of
    /// `[0, t_final]`.
    pub fn fits_window(&self, t_final: f64) -> bool {
        self.eval(0.0) < 1e-4 && self.eval(t_final) < 1e-4
    }

    /// Numerical FWHM of the envelope on `[0, t_final]`.
    pub fn fwhm(&self, t_final: f64) -> Option<f64> {
        let n = 20_001;
        let h = t_final / (n - 1) as f64;
        let x: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
        let y: Vec<f64> = x.iter().map(|&t| self.eval(t)).collect();
        stats::fwhm(&x, &y)
    }
}

/// Complex field amplitude of one pulse on a uniform grid from `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticPulse {
    amplitude: Vec<Complex64>,
    dt: f64,
    peak_intensity: f64,
}

impl StochasticPulse {
    pub fn amplitude(&self) -> &[Complex64] {
        &self.amplitude
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn peak_intensity(&self) -> f64 {
        self.peak_intensity
    }

    pub fn len(&self) -> usize {
        self.amplitude.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitude.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn intensity(&self, k: usize) -> f64 {
        self.amplitude[k].norm_sqr()
    }

    pub fn intensities(&self) -> Vec<f64> {
        self.amplitude.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Index of the grid sample closest to `t`.
    pub fn index_of(&self, t: f64) -> usize {
        ((t / self.dt).round().max(0.0) as usize).min(self.amplitude.len() - 1)
    }
}

fn check_intensity(i0: f64) -> Result<()> {
    if !(i0.is_finite() && i0 >= 0.0) {
        return Err(FelError::Config(format!(
            "peak intensity must be non-negative, got {i0}"
        )));
    }
    Ok(())
}

/// `𝓔(t_k) = ζ(t_k)·√(I⁰ f(t_k))` on the noise grid, for `t_k ∈ [0, t_final]`.
pub fn make_pulse(
    env: &Envelope,
    i0: f64,
    noise: &NoiseTrace,
    t_final: f64,
) -> Result<StochasticPulse> {
    check_intensity(i0)?;
    if noise.duration() + 1e-12 < t_final {
        return Err(FelError::GridMismatch(format!(
            "noise trace covers [0, {:.4}] but the pulse needs [0, {t_final:.4}]",
            noise.duration()
        )));
    }
    let dt = noise.dt();
    let len = (t_final / dt + 1e-9).floor() as usize + 1;
    let amplitude = noise.samples()[..len]
        .iter()
        .enumerate()
        .map(|(k, z)| z * (i0 * env.eval(k as f64 * dt)).sqrt())
        .collect();
    Ok(StochasticPulse {
        amplitude,
        dt,
        peak_intensity: i0,
    })
}

/// Phase-diffusion pulse: constant modulus `√(I⁰ f)` with a Wiener phase
/// whose line FWHM is `gamma`.
pub fn make_pdm_pulse<R: Rng + ?Sized>(
    env: &Envelope,
    i0: f64,
    gamma: f64,
    dt: f64,
    t_final: f64,
    rng: &mut R,
) -> Result<StochasticPulse> {
    let len = (t_final / dt + 1e-9).floor() as usize + 1;
    let phase = sample_phase_diffusion(gamma, dt, len, rng)?;
    make_pulse(env, i0, &phase, t_final)
}

fn common_grid(pulses: &[StochasticPulse], min: usize) -> Result<(usize, f64)> {
    if pulses.len() < min {
        return Err(FelError::InsufficientData(format!(
            "need at least {min} pulses, got {}",
            pulses.len()
        )));
    }
    let len = pulses[0].len();
    let dt = pulses[0].dt();
    if pulses.iter().any(|p| p.len() != len || p.dt() != dt) {
        return Err(FelError::GridMismatch(
            "pulses do not share one grid".into(),
        ));
    }
    Ok((len, dt))
}

/// Ensemble mean intensity `⟨I(t_k)⟩`.
pub fn mean_intensity_profile(pulses: &[StochasticPulse]) -> Result<Vec<f64>> {
    let (len, _) = common_grid(pulses, 1)?;
    let n = pulses.len() as f64;
    Ok((0..len)
        .map(|k| pulses.iter().map(|p| p.intensity(k)).sum::<f64>() / n)
        .collect())
}

/// `⟨I^r⟩/⟨I⟩^r` at one grid time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentRatio {
    pub index: usize,
    pub time: f64,
    pub r: u32,
    pub ratio: f64,
}

/// Empirical intensity moment ratios at the requested grid indices for
/// `r = 1..=r_max`. Indices where the mean intensity is negligible are
/// skipped; one warning summarizes how many.
pub fn intensity_moment_ratios(
    pulses: &[StochasticPulse],
    indices: &[usize],
    r_max: u32,
) -> Result<Vec<MomentRatio>> {
    let (len, dt) = common_grid(pulses, 2)?;
    let profile = mean_intensity_profile(pulses)?;
    let peak = profile.iter().cloned().fold(0.0, f64::max);
    let n = pulses.len() as f64;
    let mut out = Vec::new();
    let mut skipped = 0usize;
    for &k in indices {
        if k >= len {
            return Err(FelError::GridMismatch(format!(
                "time index {k} outside a pulse of {len} samples"
            )));
        }
        let mean = profile[k];
        if mean.is_nan() || mean <= 1e-9 * peak {
            skipped += 1;
            continue;
        }
        for r in 1..=r_max {
            let moment = pulses
                .iter()
                .map(|p| p.intensity(k).powi(r as i32))
                .sum::<f64>()
                / n;
            out.push(MomentRatio {
                index: k,
                time: k as f64 * dt,
                r,
                ratio: moment / mean.powi(r as i32),
            });
        }
    }
    if skipped > 0 {
        log::warn!(
            "skipped {skipped} of {} times where the mean intensity is negligible",
            indices.len()
        );
    }
    Ok(out)
}

/// Goodness of fit of the intensity at one time to a negative exponential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdfCheck {
    /// Maximum distance between the empirical CDF of `I/⟨I⟩` and `1 - e^{-x}`.
    pub max_cdf_deviation: f64,
    /// Median of `I/⟨I⟩` (ln 2 for an exponential law).
    pub median: f64,
}

pub fn intensity_pdf_check(pulses: &[StochasticPulse], index: usize) -> Result<PdfCheck> {
    let (len, _) = common_grid(pulses, 2)?;
    if index >= len {
        return Err(FelError::GridMismatch(format!(
            "time index {index} out of range"
        )));
    }
    let mut x: Vec<f64> = pulses.iter().map(|p| p.intensity(index)).collect();
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    if mean.is_nan() || mean <= 0.0 {
        return Err(FelError::InsufficientData(
            "mean intensity vanishes at the requested time".into(),
        ));
    }
    x.iter_mut().for_each(|v| *v /= mean);
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let max_cdf_deviation = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = 1.0 - (-v).exp();
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    let m = x.len();
    let median = if m % 2 == 1 {
        x[m / 2]
    } else {
        0.5 * (x[m / 2 - 1] + x[m / 2])
    };
    Ok(PdfCheck {
        max_cdf_deviation,
        median,
    })
}

/// Pulse energy samples and the mode number `M = ⟨W⟩²/var(W)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyStats {
    pub energies: Vec<f64>,
    pub mean: f64,
    pub m: f64,
    /// Max CDF distance of `W/⟨W⟩` to Gamma(M, M); `None` when `M` is capped.
    pub gamma_cdf_deviation: Option<f64>,
}

pub fn pulse_energy_stats(pulses: &[StochasticPulse]) -> Result<EnergyStats> {
    let (_, dt) = common_grid(pulses, 2)?;
    let energies: Vec<f64> = pulses
        .iter()
        .map(|p| stats::trapezoid(&p.intensities(), dt))
        .collect();
    let n = energies.len() as f64;
    let mean = energies.iter().sum::<f64>() / n;
    let var = energies.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / n;
    if var.is_nan() || var <= 1e-24 * mean * mean || mean.abs() < f64::MIN_POSITIVE {
        return Ok(EnergyStats {
            energies,
            mean,
            m: M_CAP,
            gamma_cdf_deviation: None,
        });
    }
    let m = (mean * mean / var).min(M_CAP);
    let mut x: Vec<f64> = energies.iter().map(|w| w / mean).collect();
    x.sort_by(f64::total_cmp);
    let dev = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = gamma_lr(m, m * v);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    Ok(EnergyStats {
        energies,
        mean,
        m,
        gamma_cdf_deviation: Some(dev),
    })
}

/// Ensemble energy spectral density, normalized to unit area.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergySpectrum {
    /// Ascending angular frequencies relative to the carrier.
    pub omega: Vec<f64>,
    pub density: Vec<f64>,
    pub fwhm: Option<f64>,
}

/// `⟨|FT 𝓔(ω)|²⟩` over the ensemble. Each pulse is zero-padded to at least
/// four times its length before transforming.
pub fn energy_spectral_density(pulses: &[StochasticPulse]) -> Result<EnergySpectrum> {
    let (len, dt) = common_grid(pulses, 1)?;
    let n = (4 * len).next_power_of_two();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let mut acc = vec![0.0; n];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for p in pulses {
        buf[..len].copy_from_slice(p.amplitude());
        buf[len..]
            .iter_mut()
            .for_each(|z| *z = Complex64::new(0.0, 0.0));
        fft.process(&mut buf);
        for (a, z) in acc.iter_mut().zip(&buf) {
            *a += z.norm_sqr();
        }
    }
    // the forward kernel e^{-iωt} makes bin k sit at ω = -2πk/(nδt) in
    // the e^{+iωt} convention of the field; reorder to ascending ω
    let d_omega = 2.0 * PI / (n as f64 * dt);
    let half = n as isize / 2;
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let signed = if (k as isize) < half {
                k as isize
            } else {
                k as isize - n as isize
            };
            (-(signed as f64) * d_omega, acc[k])
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum::<f64>() * d_omega;
    if total.is_nan() || total <= 0.0 {
        return Err(FelError::InsufficientData("pulses carry no energy".into()));
    }
    let omega: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let density: Vec<f64> = pairs.iter().map(|p| p.1 / total).collect();
    let fwhm = stats::fwhm(&omega, &density);
    Ok(EnergySpectrum {
        omega,
        density,
        fwhm,
    })
}

/// Closed-form bandwidth of a Gaussian pulse with Gaussian-correlated noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bandwidth {
    /// `χ = σ_ω τ_s`.
    pub chi: f64,
    /// Fourier limit `2√ln2/τ_s`.
    pub fourier_limited: f64,
    /// Noise bandwidth `γ = 2√(2 ln 2) σ_ω`.
    pub fluctuation: f64,
    /// `Δω_s = Δω_min √(1 + 2χ²)`.
    pub total: f64,
}

pub fn bandwidth_formula(tau_s: f64, sigma_omega: f64) -> Result<Bandwidth> {
    if !(tau_s > 0.0 && sigma_omega >= 0.0) {
        return Err(FelError::Config(format!(
            "need tau_s > 0 and sigma_omega >= 0, got {tau_s}, {sigma_omega}"
        )));
    }
    let chi = sigma_omega * tau_s;
    let fourier_limited = 2.0 * 2f64.ln().sqrt() / tau_s;
    Ok(Bandwidth {
        chi,
        fourier_limited,
        fluctuation: 2.0 * (2.0 * 2f64.ln()).sqrt() * sigma_omega,
        total: fourier_limited * (1.0 + 2.0 * chi * chi).sqrt(),
    })
}

/// Integrated normalized autocovariance of the intensity of one pulse over
/// the sample range `window`, up to `max_lag` samples each side. For a
/// stationary chaotic field this tends to `∫|g¹|² dv = T_c`.
pub fn intensity_correlation_width(
    pulse: &StochasticPulse,
    window: Range<usize>,
    max_lag: usize,
) -> Result<f64> {
    if window.end > pulse.len() || window.len() <= 2 * max_lag {
        return Err(FelError::InsufficientData(format!(
            "window {window:?} too short for lag {max_lag}"
        )));
    }
    let intensity: Vec<f64> = pulse.intensities()[window].to_vec();
    let n = intensity.len();
    let mean = intensity.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = intensity.iter().map(|v| v - mean).collect();
    let autocov = |lag: usize| -> f64 {
        (0..n - lag).map(|k| dev[k] * dev[k + lag]).sum::<f64>() / (n - lag) as f64
    };
    let c0 = autocov(0);
    if c0.is_nan() || c0 <= 0.0 {
        return Err(FelError::InsufficientData(
            "intensity does not fluctuate".into(),
        ));
    }
    let rho: Vec<f64> = (0..=max_lag).map(|l| autocov(l) / c0).collect();
    // symmetric trapezoid over [-max_lag, max_lag]
    let inner: f64 = rho[1..max_lag].iter().sum();
    Ok(pulse.dt() * (rho[0] + 2.0 * inner + rho[max_lag]))
}
