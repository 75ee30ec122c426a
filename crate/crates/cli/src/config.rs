//! Run configuration: a TOML document with `[noise]`, `[pulse]`, `[system]`,
//! `[ensemble]` and `[scan]` sections. All quantities are in units of Γ₂.
//!
//! Parsing collects every error instead of stopping at the first one, and
//! rejects keys it does not know.

use std::fmt;

use felsim::dynamics::DEFAULT_T_FINAL;
use felsim::ensemble::DEFAULT_REALIZATIONS;
use felsim::noise::coherence_time;
use felsim::pulse::Profile2;
use felsim::{
    DriveRecipe, Envelope, FieldNoise, Levels, PsdKind, PsdSpec, ScanSpec, ScanVariable, SystemSpec,
};
use serde::Serialize;
use toml::{Table, Value};

/// One problem found in a configuration, addressed by `[section].key`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

/// Every error found while parsing one document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl ConfigErrors {
    pub fn mentions(&self, path: &str) -> bool {
        self.0.iter().any(|e| e.path == path)
    }
}

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} configuration error(s):", self.0.len())?;
        for e in &self.0 {
            writeln!(f, "  {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    /// Fourier-limited field.
    None,
    Gaussian,
    Lorentzian,
    Sech,
    PhaseDiffusion,
}

impl NoiseKind {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "none" | "fourier-limited" => NoiseKind::None,
            "gaussian" => NoiseKind::Gaussian,
            "lorentzian" => NoiseKind::Lorentzian,
            "sech" => NoiseKind::Sech,
            "phase-diffusion" | "pdm" => NoiseKind::PhaseDiffusion,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::None => "none",
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Lorentzian => "lorentzian",
            NoiseKind::Sech => "sech",
            NoiseKind::PhaseDiffusion => "phase-diffusion",
        }
    }

    pub fn psd_kind(self) -> Option<PsdKind> {
        match self {
            NoiseKind::Gaussian => Some(PsdKind::Gaussian),
            NoiseKind::Lorentzian => Some(PsdKind::Lorentzian),
            NoiseKind::Sech => Some(PsdKind::Sech),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseSection {
    pub kind: Vec<NoiseKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_omega: Option<Vec<f64>>,
    /// Alternative to `sigma_omega`: `χ = σ_ω τ_s`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chi: Option<Vec<f64>>,
    /// Phase-diffusion linewidth; defaults to `2√(2 ln 2) σ_ω`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Also run a Fourier-limited reference with the same envelope.
    pub reference: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvelopeKind {
    Gaussian,
    Flat,
    Profile2,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PulseSection {
    pub envelope: EnvelopeKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_s: Option<f64>,
    pub t0: f64,
    pub t_final: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flat_start: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flat_end: Option<f64>,
    /// Gaussian duration of the upper-transition field.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_d: Option<f64>,
    pub t0_d: f64,
    /// Peak mean intensity for pulse statistics.
    pub intensity: f64,
    /// Highest moment order for pulse statistics.
    pub max_order: u32,
    /// Sampling step of phase-diffusion pulses.
    pub sample_dt: f64,
    /// Largest g¹ lag, in coherence times.
    pub g1_span: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemSection {
    pub levels: u8,
    pub gamma3: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub omega_s0: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_d0: Option<f64>,
    pub delta_s: f64,
    pub delta_d: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_step: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSection {
    pub realizations: usize,
    pub seed: u64,
    /// Not echoed: outputs must not depend on it.
    #[serde(skip)]
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanSection {
    #[serde(serialize_with = "variable_name")]
    pub variable: ScanVariable,
    pub values: Vec<f64>,
}

fn variable_name<S: serde::Serializer>(v: &ScanVariable, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(v.name())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub noise: NoiseSection,
    pub pulse: PulseSection,
    pub system: SystemSection,
    pub ensemble: EnsembleSection,
    pub scan: ScanSection,
    /// Non-fatal findings, e.g. an envelope that is still on at `t = 0`.
    #[serde(skip)]
    pub warnings: Vec<String>,
}

/// One concrete field and Rabi frequency out of the configured series.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    /// Distinguishes sibling output files; empty for the only variant.
    pub label: String,
    /// `(name, value)` pairs describing the variant.
    pub params: Vec<(String, String)>,
    pub kind: NoiseKind,
    pub noise: FieldNoise,
    pub omega_s0: f64,
    pub is_reference: bool,
}

struct Section {
    name: &'static str,
    table: Table,
}

impl Section {
    fn take(root: &mut Table, name: &'static str, errors: &mut Vec<ConfigError>) -> Self {
        let table = match root.remove(name) {
            None => Table::new(),
            Some(Value::Table(t)) => t,
            Some(_) => {
                errors.push(err(&format!("[{name}]"), "must be a table"));
                Table::new()
            }
        };
        Section { name, table }
    }

    fn path(&self, key: &str) -> String {
        format!("[{}].{key}", self.name)
    }

    fn f64(&mut self, key: &str, errors: &mut Vec<ConfigError>) -> Option<f64> {
        let v = self.table.remove(key)?;
        match as_f64(&v) {
            Some(x) if x.is_finite() => Some(x),
            _ => {
                errors.push(err(&self.path(key), "expected a finite number"));
                None
            }
        }
    }

    fn f64_list(&mut self, key: &str, errors: &mut Vec<ConfigError>) -> Option<Vec<f64>> {
        let v = self.table.remove(key)?;
        let items = match &v {
            Value::Array(a) => a.iter().map(as_f64).collect::<Option<Vec<f64>>>(),
            other => as_f64(other).map(|x| vec![x]),
        };
        match items {
            Some(xs) if !xs.is_empty() && xs.iter().all(|x| x.is_finite()) => Some(xs),
            _ => {
                errors.push(err(
                    &self.path(key),
                    "expected a finite number or a non-empty list of numbers",
                ));
                None
            }
        }
    }

    fn int(&mut self, key: &str, errors: &mut Vec<ConfigError>) -> Option<i64> {
        match self.table.remove(key)? {
            Value::Integer(i) => Some(i),
            _ => {
                errors.push(err(&self.path(key), "expected an integer"));
                None
            }
        }
    }

    fn bool(&mut self, key: &str, errors: &mut Vec<ConfigError>) -> Option<bool> {
        match self.table.remove(key)? {
            Value::Boolean(b) => Some(b),
            _ => {
                errors.push(err(&self.path(key), "expected true or false"));
                None
            }
        }
    }

    fn strings(&mut self, key: &str, errors: &mut Vec<ConfigError>) -> Option<Vec<String>> {
        let v = self.table.remove(key)?;
        let items = match &v {
            Value::String(s) => Some(vec![s.clone()]),
            Value::Array(a) => a
                .iter()
                .map(|x| x.as_str().map(str::to_owned))
                .collect::<Option<Vec<_>>>(),
            _ => None,
        };
        match items {
            Some(xs) if !xs.is_empty() => Some(xs),
            _ => {
                errors.push(err(
                    &self.path(key),
                    "expected a string or a list of strings",
                ));
                None
            }
        }
    }

    fn string(&mut self, key: &str, errors: &mut Vec<ConfigError>) -> Option<String> {
        match self.table.remove(key)? {
            Value::String(s) => Some(s),
            _ => {
                errors.push(err(&self.path(key), "expected a string"));
                None
            }
        }
    }

    fn finish(self, errors: &mut Vec<ConfigError>) {
        for key in self.table.keys() {
            errors.push(err(&self.path(key), "unknown key"));
        }
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn err(path: &str, message: &str) -> ConfigError {
    ConfigError {
        path: path.to_owned(),
        message: message.to_owned(),
    }
}

fn check(errors: &mut Vec<ConfigError>, ok: bool, path: &str, message: &str) {
    if !ok {
        errors.push(err(path, message));
    }
}

/// Line number (1-based) of a byte offset.
fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parse and validate a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    let mut root: Table = match text.parse::<Table>() {
        Ok(t) => t,
        Err(e) => {
            let line = e.span().map(|s| line_of(text, s.start)).unwrap_or(0);
            return Err(ConfigErrors(vec![err(
                "",
                &format!("syntax error at line {line}: {}", e.message()),
            )]));
        }
    };
    let mut errors = Vec::new();

    let mut s = Section::take(&mut root, "pulse", &mut errors);
    let envelope = match s.string("envelope", &mut errors).as_deref() {
        None | Some("gaussian") => EnvelopeKind::Gaussian,
        Some("flat") => EnvelopeKind::Flat,
        Some("profile2") => EnvelopeKind::Profile2,
        Some(other) => {
            errors.push(err(
                "[pulse].envelope",
                &format!("unknown envelope '{other}' (gaussian, flat, profile2)"),
            ));
            EnvelopeKind::Gaussian
        }
    };
    let t_final = s.f64("t_final", &mut errors).unwrap_or(DEFAULT_T_FINAL);
    check(
        &mut errors,
        t_final > 0.0,
        "[pulse].t_final",
        "must be positive",
    );
    let tau_s = s.f64("tau_s", &mut errors);
    let t0 = s.f64("t0", &mut errors).unwrap_or(0.5 * t_final);
    let flat_start = s.f64("flat_start", &mut errors);
    let flat_end = s.f64("flat_end", &mut errors);
    let tau_d = s.f64("tau_d", &mut errors);
    let t0_d = s.f64("t0_d", &mut errors).unwrap_or(t0);
    let intensity = s.f64("intensity", &mut errors).unwrap_or(1.0);
    let max_order = s.int("max_order", &mut errors).unwrap_or(5);
    let sample_dt = s.f64("sample_dt", &mut errors).unwrap_or(0.01);
    let g1_span = s.f64("g1_span", &mut errors).unwrap_or(3.0);
    s.finish(&mut errors);
    match envelope {
        EnvelopeKind::Gaussian => match tau_s {
            None => errors.push(err("[pulse].tau_s", "required for a gaussian envelope")),
            Some(t) => check(&mut errors, t > 0.0, "[pulse].tau_s", "must be positive"),
        },
        EnvelopeKind::Flat => {
            let (a, b) = (flat_start.unwrap_or(0.0), flat_end.unwrap_or(t_final));
            check(
                &mut errors,
                0.0 <= a && a < b && b <= t_final,
                "[pulse].flat_end",
                "need 0 <= flat_start < flat_end <= t_final",
            );
        }
        EnvelopeKind::Profile2 => {}
    }
    if envelope != EnvelopeKind::Flat {
        check(
            &mut errors,
            flat_start.is_none() && flat_end.is_none(),
            "[pulse].flat_start",
            "only used with envelope = \"flat\"",
        );
    }
    check(
        &mut errors,
        (0.0..=t_final).contains(&t0),
        "[pulse].t0",
        "must lie in [0, t_final]",
    );
    check(
        &mut errors,
        (0.0..=t_final).contains(&t0_d),
        "[pulse].t0_d",
        "must lie in [0, t_final]",
    );
    if let Some(t) = tau_d {
        check(&mut errors, t > 0.0, "[pulse].tau_d", "must be positive");
    }
    check(
        &mut errors,
        intensity >= 0.0,
        "[pulse].intensity",
        "must be non-negative",
    );
    check(
        &mut errors,
        (1..=10).contains(&max_order),
        "[pulse].max_order",
        "must be in 1..=10",
    );
    check(
        &mut errors,
        sample_dt > 0.0,
        "[pulse].sample_dt",
        "must be positive",
    );
    check(
        &mut errors,
        g1_span > 0.0,
        "[pulse].g1_span",
        "must be positive",
    );
    let pulse = PulseSection {
        envelope,
        tau_s,
        t0,
        t_final,
        flat_start: (envelope == EnvelopeKind::Flat).then(|| flat_start.unwrap_or(0.0)),
        flat_end: (envelope == EnvelopeKind::Flat).then(|| flat_end.unwrap_or(t_final)),
        tau_d,
        t0_d,
        intensity,
        max_order: max_order.clamp(1, 10) as u32,
        sample_dt,
        g1_span,
    };

    let mut s = Section::take(&mut root, "noise", &mut errors);
    let kind: Vec<NoiseKind> = s
        .strings("kind", &mut errors)
        .unwrap_or_else(|| vec!["none".into()])
        .iter()
        .filter_map(|k| {
            let parsed = NoiseKind::parse(k);
            if parsed.is_none() {
                errors.push(err(
                    "[noise].kind",
                    &format!(
                        "unknown noise kind '{k}' (none, gaussian, lorentzian, sech, phase-diffusion)"
                    ),
                ));
            }
            parsed
        })
        .collect();
    let sigma_omega = s.f64_list("sigma_omega", &mut errors);
    let chi = s.f64_list("chi", &mut errors);
    let gamma = s.f64("gamma", &mut errors);
    let reference = s.bool("reference", &mut errors).unwrap_or(false);
    s.finish(&mut errors);
    if let Some(xs) = &sigma_omega {
        check(
            &mut errors,
            xs.iter().all(|&x| x > 0.0),
            "[noise].sigma_omega",
            "must be positive",
        );
    }
    if let Some(xs) = &chi {
        check(
            &mut errors,
            xs.iter().all(|&x| x > 0.0),
            "[noise].chi",
            "must be positive",
        );
        check(
            &mut errors,
            envelope == EnvelopeKind::Gaussian,
            "[noise].chi",
            "needs a gaussian envelope (chi = sigma_omega * tau_s)",
        );
    }
    if sigma_omega.is_some() && chi.is_some() {
        errors.push(err(
            "[noise].chi",
            "give either sigma_omega or chi, not both",
        ));
    }
    if let Some(g) = gamma {
        check(&mut errors, g > 0.0, "[noise].gamma", "must be positive");
    }
    let stochastic = kind.iter().any(|k| *k != NoiseKind::None);
    let needs_width = kind
        .iter()
        .any(|k| k.psd_kind().is_some() || (*k == NoiseKind::PhaseDiffusion && gamma.is_none()));
    if needs_width && sigma_omega.is_none() && chi.is_none() {
        errors.push(err(
            "[noise].sigma_omega",
            "required (or chi) for stochastic noise",
        ));
    }
    if !stochastic && reference {
        errors.push(err("[noise].reference", "needs a stochastic noise kind"));
    }
    let noise = NoiseSection {
        kind,
        sigma_omega,
        chi,
        gamma,
        reference,
    };

    let mut s = Section::take(&mut root, "system", &mut errors);
    let levels = s.int("levels", &mut errors).unwrap_or(2);
    check(
        &mut errors,
        levels == 2 || levels == 3,
        "[system].levels",
        "must be 2 or 3",
    );
    let gamma3 = s.f64("gamma3", &mut errors).unwrap_or(1.0);
    check(
        &mut errors,
        gamma3 >= 0.0,
        "[system].gamma3",
        "must be non-negative",
    );
    let omega_s0 = s.f64_list("omega_s0", &mut errors);
    if let Some(xs) = &omega_s0 {
        check(
            &mut errors,
            xs.iter().all(|&x| x >= 0.0),
            "[system].omega_s0",
            "must be non-negative",
        );
    }
    let omega_d0 = s.f64("omega_d0", &mut errors);
    if let Some(o) = omega_d0 {
        check(
            &mut errors,
            o >= 0.0,
            "[system].omega_d0",
            "must be non-negative",
        );
    }
    if levels == 3 {
        check(
            &mut errors,
            omega_d0.is_some(),
            "[system].omega_d0",
            "required for levels = 3",
        );
        check(
            &mut errors,
            tau_d.is_some(),
            "[pulse].tau_d",
            "required for levels = 3",
        );
    } else {
        check(
            &mut errors,
            omega_d0.is_none(),
            "[system].omega_d0",
            "only used with levels = 3",
        );
    }
    let delta_s = s.f64("delta_s", &mut errors).unwrap_or(0.0);
    let delta_d = s.f64("delta_d", &mut errors).unwrap_or(0.0);
    let max_step = s.f64("max_step", &mut errors);
    if let Some(h) = max_step {
        check(
            &mut errors,
            h > 0.0,
            "[system].max_step",
            "must be positive",
        );
    }
    s.finish(&mut errors);
    let system = SystemSection {
        levels: if levels == 3 { 3 } else { 2 },
        gamma3,
        omega_s0: omega_s0.unwrap_or_default(),
        omega_d0,
        delta_s,
        delta_d,
        max_step,
    };

    let mut s = Section::take(&mut root, "ensemble", &mut errors);
    let realizations = s
        .int("realizations", &mut errors)
        .unwrap_or(DEFAULT_REALIZATIONS as i64);
    check(
        &mut errors,
        realizations >= 1,
        "[ensemble].realizations",
        "must be at least 1",
    );
    let seed = s.int("seed", &mut errors).unwrap_or(0);
    check(
        &mut errors,
        seed >= 0,
        "[ensemble].seed",
        "must be non-negative",
    );
    let workers = s.int("workers", &mut errors).unwrap_or(0);
    check(
        &mut errors,
        workers >= 0,
        "[ensemble].workers",
        "must be non-negative",
    );
    s.finish(&mut errors);
    let ensemble = EnsembleSection {
        realizations: realizations.max(1) as usize,
        seed: seed.max(0) as u64,
        workers: workers.max(0) as usize,
    };

    let mut s = Section::take(&mut root, "scan", &mut errors);
    let variable = match s.string("variable", &mut errors) {
        None => ScanVariable::DeltaS,
        Some(name) => name.parse().unwrap_or_else(|_| {
            errors.push(err(
                "[scan].variable",
                &format!(
                    "unknown scan variable '{name}' (delta_s, delta_d, chi, omega_s0, omega_d0)"
                ),
            ));
            ScanVariable::DeltaS
        }),
    };
    let values = s.f64_list("values", &mut errors);
    let start = s.f64("start", &mut errors);
    let stop = s.f64("stop", &mut errors);
    let step = s.f64("step", &mut errors);
    s.finish(&mut errors);
    let values = match (values, start, stop, step) {
        (Some(v), None, None, None) => v,
        (Some(v), ..) => {
            errors.push(err(
                "[scan].values",
                "give either values or start/stop/step",
            ));
            v
        }
        (None, None, None, None) => range(-20.0, 20.0, 0.5),
        (None, Some(a), Some(b), Some(h)) if h > 0.0 && b > a => range(a, b, h),
        (None, ..) => {
            errors.push(err(
                "[scan].step",
                "start, stop and step are all required, with step > 0 and stop > start",
            ));
            vec![0.0]
        }
    };
    let monotone = values.windows(2).all(|w| w[1] > w[0]) || values.windows(2).all(|w| w[1] < w[0]);
    check(
        &mut errors,
        monotone,
        "[scan].values",
        "must be strictly monotone",
    );
    match variable {
        ScanVariable::Chi => {
            check(
                &mut errors,
                noise.chi.is_none() && noise.sigma_omega.is_none(),
                "[scan].variable",
                "a chi scan takes no [noise].chi or [noise].sigma_omega",
            );
            check(
                &mut errors,
                noise.kind.iter().all(|k| k.psd_kind().is_some()),
                "[scan].variable",
                "a chi scan needs gaussian, lorentzian or sech noise",
            );
            check(
                &mut errors,
                envelope == EnvelopeKind::Gaussian,
                "[scan].variable",
                "a chi scan needs a gaussian envelope",
            );
            check(
                &mut errors,
                values.iter().all(|&v| v > 0.0),
                "[scan].values",
                "chi must be positive",
            );
        }
        ScanVariable::OmegaS0 => check(
            &mut errors,
            system.omega_s0.len() <= 1,
            "[scan].variable",
            "cannot scan omega_s0 while [system].omega_s0 is a list",
        ),
        ScanVariable::DeltaD | ScanVariable::OmegaD0 => check(
            &mut errors,
            system.levels == 3,
            "[scan].variable",
            "only available with levels = 3",
        ),
        ScanVariable::DeltaS => {}
    }
    let scan = ScanSection { variable, values };

    for key in root.keys() {
        errors.push(err(&format!("[{key}]"), "unknown section"));
    }
    if !errors.is_empty() {
        return Err(ConfigErrors(errors));
    }

    let mut config = RunConfig {
        noise,
        pulse,
        system,
        ensemble,
        scan,
        warnings: Vec::new(),
    };
    config.warnings = config.cross_checks();
    Ok(config)
}

fn range(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| start + k as f64 * step).collect()
}

impl RunConfig {
    fn cross_checks(&self) -> Vec<String> {
        let mut out = Vec::new();
        let t_final = self.pulse.t_final;
        if let Ok(env) = self.s_envelope() {
            if !env.fits_window(t_final) {
                out.push(format!(
                    "lower-transition envelope is not negligible at 0 or t_final = {t_final} (f > 1e-4)"
                ));
            }
        }
        if let Some(Ok(env)) = self.d_envelope() {
            if !env.fits_window(t_final) {
                out.push(format!(
                    "upper-transition envelope is not negligible at 0 or t_final = {t_final} (f > 1e-4)"
                ));
            }
        }
        if self.system.levels == 3 {
            let strongest_s = self.system.omega_s0.iter().cloned().fold(0.0, f64::max);
            let pumped_upper = self.system.omega_d0.unwrap_or(0.0) > strongest_s;
            if let (Some(ts), Some(td)) = (self.pulse.tau_s, self.pulse.tau_d) {
                if pumped_upper && td <= ts {
                    out.push(format!(
                        "pump (tau_d = {td}) should be longer than the probe (tau_s = {ts}) for a clean doublet"
                    ));
                }
            }
        }
        out
    }

    pub fn levels(&self) -> Levels {
        if self.system.levels == 3 {
            Levels::Three
        } else {
            Levels::Two
        }
    }

    pub fn s_envelope(&self) -> felsim::Result<Envelope> {
        let p = &self.pulse;
        match p.envelope {
            EnvelopeKind::Gaussian => Envelope::gaussian(p.tau_s.unwrap_or(f64::NAN), p.t0),
            EnvelopeKind::Flat => {
                Envelope::flat(p.flat_start.unwrap_or(0.0), p.flat_end.unwrap_or(p.t_final))
            }
            EnvelopeKind::Profile2 => Ok(Envelope::Profile2(Profile2::standard(p.t0))),
        }
    }

    pub fn d_envelope(&self) -> Option<felsim::Result<Envelope>> {
        (self.system.levels == 3)
            .then(|| Envelope::gaussian(self.pulse.tau_d.unwrap_or(f64::NAN), self.pulse.t0_d))
    }

    /// Noise widths `σ_ω` of the series, with the configured value as label.
    fn widths(&self) -> Vec<(String, f64)> {
        if let Some(chi) = &self.noise.chi {
            let tau = self.pulse.tau_s.unwrap_or(f64::NAN);
            chi.iter().map(|&c| (format!("chi={c}"), c / tau)).collect()
        } else if let Some(s) = &self.noise.sigma_omega {
            s.iter().map(|&v| (format!("sigma_omega={v}"), v)).collect()
        } else {
            vec![(String::new(), f64::NAN)]
        }
    }

    /// All field/Rabi-frequency combinations, followed by the
    /// Fourier-limited references when requested.
    pub fn variants(&self) -> felsim::Result<Vec<Variant>> {
        let widths = self.widths();
        let mut out = Vec::new();
        let multi_kind = self.noise.kind.len() > 1;
        let multi_width = widths.len() > 1;
        let multi_omega = self.system.omega_s0.len() > 1;
        // pulse statistics need no Rabi frequency
        let omegas = if self.system.omega_s0.is_empty() {
            vec![f64::NAN]
        } else {
            self.system.omega_s0.clone()
        };
        for omega in omegas {
            let omega_label = format!("omega_s0={omega}");
            for &kind in &self.noise.kind {
                let width_list: Vec<(String, f64)> = if kind == NoiseKind::None {
                    vec![(String::new(), f64::NAN)]
                } else {
                    widths.clone()
                };
                for (width_label, sigma) in width_list {
                    let noise = self.field_noise(kind, sigma)?;
                    let mut parts = Vec::new();
                    if multi_kind {
                        parts.push(format!("kind={}", kind.name()));
                    }
                    if multi_width && kind != NoiseKind::None {
                        parts.push(width_label.clone());
                    }
                    if multi_omega {
                        parts.push(omega_label.clone());
                    }
                    if parts.is_empty() && self.noise.reference {
                        parts.push(kind.name().to_owned());
                    }
                    out.push(Variant {
                        label: parts.join("."),
                        params: self.params(kind, &width_label, sigma, omega),
                        kind,
                        noise,
                        omega_s0: omega,
                        is_reference: false,
                    });
                }
            }
            if self.noise.reference {
                let mut label = "fourier-limited".to_owned();
                if multi_omega {
                    label = format!("{label}.{omega_label}");
                }
                out.push(Variant {
                    label,
                    params: self.params(NoiseKind::None, "", f64::NAN, omega),
                    kind: NoiseKind::None,
                    noise: FieldNoise::FourierLimited,
                    omega_s0: omega,
                    is_reference: true,
                });
            }
        }
        Ok(out)
    }

    fn params(
        &self,
        kind: NoiseKind,
        width_label: &str,
        sigma: f64,
        omega: f64,
    ) -> Vec<(String, String)> {
        let mut p = vec![("kind".to_owned(), kind.name().to_owned())];
        if kind != NoiseKind::None && sigma.is_finite() {
            if let Some((name, value)) = width_label.split_once('=') {
                p.push((name.to_owned(), value.to_owned()));
            }
            if width_label.starts_with("chi=") {
                p.push(("sigma_omega".into(), format!("{sigma}")));
            } else if let Some(tau) = self.pulse.tau_s {
                p.push(("chi".into(), format!("{}", sigma * tau)));
            }
        }
        if let Some(tau) = self.pulse.tau_s {
            p.push(("tau_s".into(), format!("{tau}")));
        }
        if omega.is_finite() {
            p.push(("omega_s0".into(), format!("{omega}")));
        }
        p
    }

    fn field_noise(&self, kind: NoiseKind, sigma: f64) -> felsim::Result<FieldNoise> {
        Ok(match kind {
            NoiseKind::None => FieldNoise::FourierLimited,
            NoiseKind::PhaseDiffusion => FieldNoise::PhaseDiffusion {
                gamma: self
                    .noise
                    .gamma
                    .unwrap_or(2.0 * (2.0 * 2f64.ln()).sqrt() * sigma),
            },
            k => FieldNoise::Chaotic(PsdSpec::new(k.psd_kind().expect("chaotic kind"), sigma)?),
        })
    }

    pub fn system_spec(&self, omega_s0: f64) -> SystemSpec {
        let s = &self.system;
        let mut spec = match self.levels() {
            Levels::Two => SystemSpec::two_level(omega_s0, s.delta_s),
            Levels::Three => SystemSpec::three_level(omega_s0, s.omega_d0.unwrap_or(0.0), s.gamma3),
        };
        spec.delta_s = s.delta_s;
        spec.delta_d = s.delta_d;
        spec
    }

    pub fn recipe(&self, noise: FieldNoise) -> felsim::Result<DriveRecipe> {
        let d_envelope = self.d_envelope().transpose()?;
        let mut recipe = DriveRecipe::new(self.s_envelope()?, noise, d_envelope);
        recipe.t_final = self.pulse.t_final;
        recipe.max_step = self.system.max_step;
        Ok(recipe)
    }

    /// Scan over `[scan]` for one variant. A chi scan uses the variant's
    /// noise kind with a placeholder width that each point replaces.
    pub fn scan_spec(&self, variant: &Variant) -> felsim::Result<ScanSpec> {
        let noise = match (self.scan.variable, variant.kind.psd_kind()) {
            (ScanVariable::Chi, Some(kind)) => FieldNoise::Chaotic(PsdSpec::new(kind, 1.0)?),
            _ => variant.noise,
        };
        Ok(ScanSpec {
            variable: self.scan.variable,
            grid: self.scan.values.clone(),
            system: self.system_spec(variant.omega_s0),
            recipe: self.recipe(noise)?,
        })
    }

    /// Coherence time of a variant's field, if stochastic.
    pub fn coherence_time(variant: &Variant) -> Option<f64> {
        match variant.noise {
            FieldNoise::Chaotic(spec) => Some(coherence_time(&spec)),
            FieldNoise::PhaseDiffusion { gamma } => Some(2.0 / gamma),
            FieldNoise::FourierLimited => None,
        }
    }

    /// The effective configuration as TOML; re-parses to an equal config.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}
