//! Subcommand implementations shared by the binary and the tests.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use felsim::analysis::{extract_doublet_with, fwhm_vs_chi, splitting_vs_chi};
use felsim::ensemble::{
    generate_pdm_pulses, generate_pulses, generate_traces, realization_rng, run_scan, WORKERS_ENV,
};
use felsim::noise::{empirical_g1, sample_phase_diffusion, theoretical_g1};
use felsim::pulse::{
    bandwidth_formula, energy_spectral_density, intensity_moment_ratios, intensity_pdf_check,
    mean_intensity_profile, pulse_energy_stats,
};
use felsim::{
    Curve, CurveFeatures, EnsembleConfig, FieldNoise, Levels, NoiseTrace, PsdKind, ScanVariable,
    StochasticPulse,
};

use crate::config::{parse_config, EnvelopeKind, RunConfig, Variant};
use crate::table::{read_table, sibling, write_table, Cell, Provenance, Report};
use crate::units::Units;

/// Overrides and output settings common to the simulation commands.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub realizations: Option<usize>,
    pub workers: Option<usize>,
    pub units: Option<Units>,
}

/// Worker count: the flag, then the environment variable, then the config.
pub fn resolve_workers(flag: Option<usize>, env: Option<&str>, config: usize) -> Result<usize> {
    if let Some(w) = flag {
        return Ok(w);
    }
    match env.map(str::trim).filter(|s| !s.is_empty()) {
        Some(s) => s
            .parse()
            .with_context(|| format!("{WORKERS_ENV} must be a non-negative integer, got '{s}'")),
        None => Ok(config),
    }
}

/// Read a configuration file, or a bundled preset given as `preset:NAME`.
pub fn load_config(source: &str) -> Result<RunConfig> {
    let text = match source.strip_prefix("preset:") {
        Some(name) => crate::presets::find(name)
            .with_context(|| format!("unknown preset '{name}'"))?
            .text
            .to_owned(),
        None => std::fs::read_to_string(source).with_context(|| format!("reading {source}"))?,
    };
    Ok(parse_config(&text)?)
}

fn apply_overrides(config: &mut RunConfig, opts: &RunOptions) -> Result<EnsembleConfig> {
    if let Some(seed) = opts.seed {
        config.ensemble.seed = seed;
    }
    if let Some(n) = opts.realizations {
        config.ensemble.realizations = n;
    }
    let env = std::env::var(WORKERS_ENV).ok();
    let workers = resolve_workers(opts.workers, env.as_deref(), config.ensemble.workers)?;
    config.ensemble.workers = workers;
    Ok(EnsembleConfig::new(
        config.ensemble.realizations,
        config.ensemble.seed,
        workers,
    )?)
}

fn provenance(
    command: &str,
    config: &RunConfig,
    variant: Option<&Variant>,
    opts: &RunOptions,
) -> Provenance {
    let mut notes = Vec::new();
    if let Some(u) = &opts.units {
        notes.extend(u.header());
    }
    Provenance {
        command: command.into(),
        master_seed: Some(config.ensemble.seed),
        realizations: Some(config.ensemble.realizations),
        params: variant.map(|v| v.params.clone()).unwrap_or_default(),
        notes,
        config: Some(config.echo()),
    }
}

fn output_path(out: &Path, variant: &Variant) -> PathBuf {
    sibling(out, &variant.label)
}

/// Scan every variant of the configuration. `levels` is the system the
/// command expects (two for `single-scan`, three for `dr-scan`).
pub fn scan(mut config: RunConfig, opts: &RunOptions, levels: Levels) -> Result<Report> {
    let command = match levels {
        Levels::Two => "single-scan",
        Levels::Three => "dr-scan",
    };
    if config.levels() != levels {
        bail!(
            "{command} needs [system].levels = {}",
            if levels == Levels::Two { 2 } else { 3 }
        );
    }
    if config.system.omega_s0.is_empty() {
        bail!("{command} needs [system].omega_s0");
    }
    let ensemble = apply_overrides(&mut config, opts)?;
    let mut report = Report {
        warnings: config.warnings.clone(),
        ..Default::default()
    };
    let variable = config.scan.variable;
    let mut columns = vec![
        variable.name().to_owned(),
        "q2_mean".into(),
        "q2_stderr".into(),
    ];
    if levels == Levels::Three {
        columns.extend(["q3_mean".into(), "q3_stderr".into()]);
    }
    columns.push("n".into());
    let unit_column = opts.units.and_then(|_| match variable {
        ScanVariable::Chi => None,
        v => Some(format!("{}_mev", v.name())),
    });
    if let Some(c) = &unit_column {
        columns.push(c.clone());
    }
    let column_refs: Vec<&str> = columns.iter().map(String::as_str).collect();

    for variant in config.variants()? {
        if variable == ScanVariable::Chi && variant.kind.psd_kind().is_none() {
            continue;
        }
        let spec = config.scan_spec(&variant)?;
        log::info!("{command} {}: {} points", variant.label, spec.grid.len());
        let result = run_scan(&spec, &ensemble)?;
        let mut rows = Vec::with_capacity(result.points.len());
        for p in &result.points {
            let mut row = vec![Cell::Num(p.x)];
            match &p.result {
                Ok(r) => {
                    row.extend([r.q2_mean.into(), r.q2_stderr.into()]);
                    if levels == Levels::Three {
                        row.extend([r.q3_mean.into(), r.q3_stderr.into()]);
                    }
                    row.push(r.n.into());
                }
                Err(e) => {
                    let width = if levels == Levels::Three { 4 } else { 2 };
                    row.extend(std::iter::repeat_n(Cell::Num(f64::NAN), width));
                    row.push(Cell::Int(0));
                    report.failures.push(format!(
                        "{} {} = {}: {e}",
                        variant.label,
                        variable.name(),
                        p.x
                    ));
                }
            }
            if let Some(u) = &opts.units {
                if unit_column.is_some() {
                    row.push(Cell::Num(u.energy_mev(p.x)));
                }
            }
            rows.push(row);
        }
        let mut prov = provenance(command, &config, Some(&variant), opts);
        prov.params
            .push(("variable".into(), variable.name().into()));
        prov.notes
            .push(format!("config_hash: {:#018x}", result.config_hash));
        let path = output_path(&opts.out, &variant);
        write_table(&path, &prov, &column_refs, &rows)?;
        report.files.push(path);
    }
    Ok(report)
}

fn factorial(r: u32) -> f64 {
    (1..=r).map(f64::from).product()
}

/// Pulse statistics: moment ratios at the pulse peak (main file), plus
/// `.profile`, `.esd`, `.g1` and `.energy` siblings per variant.
pub fn pulse_stats(mut config: RunConfig, opts: &RunOptions) -> Result<Report> {
    let ensemble = apply_overrides(&mut config, opts)?;
    let mut report = Report {
        warnings: config.warnings.clone(),
        ..Default::default()
    };
    let env = config.s_envelope()?;
    let p = config.pulse.clone();
    let variants: Vec<Variant> = config
        .variants()?
        .into_iter()
        .filter(|v| !v.is_reference && v.noise != FieldNoise::FourierLimited)
        .collect();
    if variants.is_empty() {
        bail!("pulse-stats needs a stochastic [noise].kind");
    }
    for variant in &variants {
        let (pulses, traces): (Vec<StochasticPulse>, Vec<NoiseTrace>) = match variant.noise {
            FieldNoise::Chaotic(spec) => (
                generate_pulses(&env, p.intensity, &spec, p.t_final, &ensemble)?,
                generate_traces(&spec, p.t_final, &ensemble)?,
            ),
            FieldNoise::PhaseDiffusion { gamma } => {
                let pulses = generate_pdm_pulses(
                    &env,
                    p.intensity,
                    gamma,
                    p.sample_dt,
                    p.t_final,
                    &ensemble,
                )?;
                let len = pulses[0].len();
                let traces = (0..ensemble.n_realizations)
                    .map(|i| {
                        let mut rng = realization_rng(ensemble.master_seed, i);
                        sample_phase_diffusion(gamma, p.sample_dt, len, &mut rng)
                    })
                    .collect::<felsim::Result<Vec<_>>>()?;
                (pulses, traces)
            }
            FieldNoise::FourierLimited => unreachable!("filtered above"),
        };
        let base = output_path(&opts.out, variant);
        let prov = provenance("pulse-stats", &config, Some(variant), opts);
        let dt = pulses[0].dt();
        let center = pulses[0].index_of(env.peak_time());

        let ratios = intensity_moment_ratios(&pulses, &[center], p.max_order)?;
        let pdf = intensity_pdf_check(&pulses, center)?;
        let mut main = prov.clone();
        main.notes.push(format!(
            "intensity_pdf: max_cdf_deviation = {}, median = {}",
            crate::table::format_f64(pdf.max_cdf_deviation),
            crate::table::format_f64(pdf.median)
        ));
        let rows: Vec<Vec<Cell>> = ratios
            .iter()
            .map(|m| {
                vec![
                    m.r.into(),
                    m.time.into(),
                    m.ratio.into(),
                    factorial(m.r).into(),
                ]
            })
            .collect();
        write_table(&base, &main, &["r", "time", "ratio", "factorial"], &rows)?;
        report.files.push(base.clone());

        let profile = mean_intensity_profile(&pulses)?;
        let all: Vec<usize> = (0..pulses[0].len()).collect();
        let mut by_index = vec![vec![f64::NAN; p.max_order as usize]; all.len()];
        for m in intensity_moment_ratios(&pulses, &all, p.max_order)? {
            by_index[m.index][m.r as usize - 1] = m.ratio;
        }
        let mut columns: Vec<String> =
            vec!["time".into(), "mean_intensity".into(), "envelope".into()];
        columns.extend((2..=p.max_order).map(|r| format!("ratio_r{r}")));
        if opts.units.is_some() {
            columns.push("time_fs".into());
        }
        let rows: Vec<Vec<Cell>> = all
            .iter()
            .map(|&k| {
                let t = k as f64 * dt;
                let mut row = vec![
                    t.into(),
                    profile[k].into(),
                    (p.intensity * env.eval(t)).into(),
                ];
                row.extend(by_index[k][1..].iter().map(|&r| Cell::Num(r)));
                if let Some(u) = &opts.units {
                    row.push((t * u.time_fs()).into());
                }
                row
            })
            .collect();
        let refs: Vec<&str> = columns.iter().map(String::as_str).collect();
        let path = sibling(&base, "profile");
        write_table(&path, &prov, &refs, &rows)?;
        report.files.push(path);

        let esd = energy_spectral_density(&pulses)?;
        let mut esd_prov = prov.clone();
        esd_prov.notes.push(format!(
            "fwhm: {}",
            esd.fwhm.map_or("absent".into(), crate::table::format_f64)
        ));
        if let (Some(tau), FieldNoise::Chaotic(spec)) = (env.tau(), variant.noise) {
            if spec.kind == PsdKind::Gaussian {
                let b = bandwidth_formula(tau, spec.sigma_omega)?;
                esd_prov.notes.push(format!(
                    "bandwidth_formula: chi = {}, fourier_limited = {}, total = {}",
                    crate::table::format_f64(b.chi),
                    crate::table::format_f64(b.fourier_limited),
                    crate::table::format_f64(b.total)
                ));
            }
        }
        let mut columns = vec!["omega", "density"];
        if opts.units.is_some() {
            columns.push("omega_mev");
        }
        let rows: Vec<Vec<Cell>> = esd
            .omega
            .iter()
            .zip(&esd.density)
            .map(|(&w, &d)| {
                let mut row = vec![w.into(), d.into()];
                if let Some(u) = &opts.units {
                    row.push(u.energy_mev(w).into());
                }
                row
            })
            .collect();
        let path = sibling(&base, "esd");
        write_table(&path, &esd_prov, &columns, &rows)?;
        report.files.push(path);

        let tc = RunConfig::coherence_time(variant).unwrap_or(1.0);
        let trace_dt = traces[0].dt();
        let max_lag = ((p.g1_span * tc / trace_dt).ceil() as usize).min(traces[0].len() - 1);
        let mut rows = Vec::with_capacity(max_lag + 1);
        for lag in 0..=max_lag {
            let v = lag as f64 * trace_dt;
            let g = empirical_g1(&traces, lag)?;
            let theory = match variant.noise {
                FieldNoise::Chaotic(spec) => theoretical_g1(&spec, v),
                FieldNoise::PhaseDiffusion { gamma } => (-0.5 * gamma * v).exp(),
                FieldNoise::FourierLimited => 1.0,
            };
            rows.push(vec![
                v.into(),
                g.value.into(),
                g.stderr.into(),
                theory.into(),
            ]);
        }
        let mut g1_prov = prov.clone();
        g1_prov
            .notes
            .push(format!("coherence_time: {}", crate::table::format_f64(tc)));
        let path = sibling(&base, "g1");
        write_table(
            &path,
            &g1_prov,
            &["lag", "g1", "g1_stderr", "theory"],
            &rows,
        )?;
        report.files.push(path);

        let energy = pulse_energy_stats(&pulses)?;
        let mut e_prov = prov.clone();
        e_prov.notes.push(format!(
            "energy: mean = {}, m = {}, gamma_cdf_deviation = {}",
            crate::table::format_f64(energy.mean),
            crate::table::format_f64(energy.m),
            energy
                .gamma_cdf_deviation
                .map_or("absent".into(), crate::table::format_f64)
        ));
        let rows: Vec<Vec<Cell>> = energy
            .energies
            .iter()
            .enumerate()
            .map(|(i, &w)| vec![i.into(), w.into()])
            .collect();
        let path = sibling(&base, "energy");
        write_table(&path, &e_prov, &["realization", "energy"], &rows)?;
        report.files.push(path);
    }
    if config.pulse.envelope == EnvelopeKind::Flat && config.noise.chi.is_some() {
        report
            .warnings
            .push("chi is defined for gaussian envelopes only".into());
    }
    Ok(report)
}

/// Options of the `analyze` command.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnalyzeOptions {
    pub inputs: Vec<PathBuf>,
    pub out: PathBuf,
    /// Fourier-limited curve whose separation normalizes the splitting.
    pub reference: Option<PathBuf>,
    /// Column to analyze; picked from the file when absent.
    pub column: Option<String>,
    pub smooth: bool,
}

/// Curve stored in a table: first column against the analyzed column,
/// with the matching `_stderr` column when there is one. Rows whose value
/// is not finite (failed scan points) are dropped.
pub fn curve_from_table(path: &Path, column: Option<&str>) -> Result<(Curve, crate::table::Table)> {
    let table = read_table(path)?;
    if table.headers.len() < 2 {
        bail!("{}: need at least two columns", path.display());
    }
    let name = match column {
        Some(c) => c.to_owned(),
        None if table.headers[0] == "delta_d" && table.column_index("q3_mean").is_some() => {
            "q3_mean".into()
        }
        None if table.column_index("q2_mean").is_some() => "q2_mean".into(),
        None => table.headers[1].clone(),
    };
    let x = table.numeric(0)?;
    let y = table
        .column(&name)
        .with_context(|| path.display().to_string())?;
    let se = name
        .strip_suffix("_mean")
        .map(|stem| format!("{stem}_stderr"))
        .and_then(|c| table.column(&c).ok());
    let keep: Vec<usize> = (0..x.len())
        .filter(|&i| x[i].is_finite() && y[i].is_finite())
        .collect();
    let pick = |v: &[f64]| keep.iter().map(|&i| v[i]).collect::<Vec<f64>>();
    let curve = Curve::new(pick(&x), pick(&y), se.as_deref().map(pick))
        .with_context(|| format!("{}: invalid curve", path.display()))?;
    Ok((curve, table))
}

fn chi_of(table: &crate::table::Table) -> Option<f64> {
    table.param("chi").and_then(|c| c.parse().ok())
}

/// Doublet and Lorentzian features of each input, one row per file.
pub fn analyze(opts: &AnalyzeOptions) -> Result<Report> {
    if opts.inputs.is_empty() {
        bail!("analyze needs at least one input file");
    }
    let mut report = Report::default();
    let reference = match &opts.reference {
        Some(path) => {
            let (curve, _) = curve_from_table(path, opts.column.as_deref())?;
            let f = extract_doublet_with(&curve, opts.smooth);
            if !f.has_doublet() {
                bail!("{}: reference curve has no doublet", path.display());
            }
            Some(f)
        }
        None => None,
    };
    let mut analyzed: Vec<(PathBuf, Option<f64>, CurveFeatures)> = Vec::new();
    for path in &opts.inputs {
        match curve_from_table(path, opts.column.as_deref()) {
            Ok((curve, table)) => analyzed.push((
                path.clone(),
                chi_of(&table),
                extract_doublet_with(&curve, opts.smooth),
            )),
            Err(e) => report.failures.push(format!("{}: {e:#}", path.display())),
        }
    }
    let mut rows = Vec::new();
    for (path, chi, f) in &analyzed {
        let peak = |i: usize| -> [Cell; 3] {
            [
                f.peak_positions.get(i).copied().into(),
                f.peak_heights.get(i).copied().into(),
                f.fwhm_per_peak.get(i).copied().flatten().into(),
            ]
        };
        let normalized = match (&reference, f.separation) {
            (Some(r), Some(s)) => r.separation.map(|rs| s / rs),
            _ => None,
        };
        let fit = f.lorentzian_fit.as_ref();
        let mut row = vec![
            Cell::Text(path.display().to_string()),
            (*chi).into(),
            f.peak_positions.len().into(),
        ];
        row.extend(peak(0));
        row.extend(peak(1));
        row.extend([
            f.separation.into(),
            normalized.into(),
            f.depth.into(),
            f.minimum_position.into(),
            f.mean_fwhm().into(),
            fit.map(|l| l.center).into(),
            fit.map(|l| l.width).into(),
            fit.map(|l| l.amplitude).into(),
            fit.map(|l| l.residual).into(),
            fit.map(|l| l.apex_residual).into(),
        ]);
        rows.push(row);
    }
    let mut notes = Vec::new();
    if let Some(r) = &reference {
        notes.push(format!(
            "reference_separation: {}",
            r.separation
                .map_or("absent".into(), crate::table::format_f64)
        ));
    }
    let with_chi: Vec<(f64, CurveFeatures)> = analyzed
        .iter()
        .filter_map(|(_, chi, f)| chi.map(|c| (c, f.clone())))
        .collect();
    if with_chi.len() == analyzed.len() && !with_chi.is_empty() {
        let chis: Vec<f64> = with_chi.iter().map(|p| p.0).collect();
        let features: Vec<CurveFeatures> = with_chi.iter().map(|p| p.1.clone()).collect();
        if let Some(r) = &reference {
            if let Ok(points) = splitting_vs_chi(&chis, &features, r.separation.unwrap_or(f64::NAN))
            {
                let absent = points
                    .iter()
                    .filter(|p| p.normalized_splitting.is_none())
                    .count();
                notes.push(format!(
                    "splitting_vs_chi: {} points, {absent} without doublet",
                    points.len()
                ));
            }
        }
        match fwhm_vs_chi(&chis, &features) {
            Ok(fit) => notes.push(format!(
                "fwhm_vs_chi: slope = {}, intercept = {}, r_squared = {}, slope_stderr = {}",
                crate::table::format_f64(fit.slope),
                crate::table::format_f64(fit.intercept),
                crate::table::format_f64(fit.r_squared),
                crate::table::format_f64(fit.slope_stderr)
            )),
            Err(e) => notes.push(format!("fwhm_vs_chi: not fitted ({e})")),
        }
    }
    let prov = Provenance {
        command: "analyze".into(),
        notes,
        ..Default::default()
    };
    let columns = [
        "file",
        "chi",
        "n_peaks",
        "peak1_position",
        "peak1_height",
        "peak1_fwhm",
        "peak2_position",
        "peak2_height",
        "peak2_fwhm",
        "separation",
        "normalized_splitting",
        "depth",
        "minimum_position",
        "mean_fwhm",
        "fit_center",
        "fit_width",
        "fit_amplitude",
        "fit_residual",
        "fit_apex_residual",
    ];
    write_table(&opts.out, &prov, &columns, &rows)?;
    report.files.push(opts.out.clone());
    Ok(report)
}
