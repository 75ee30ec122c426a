//! Observables of yield-versus-detuning curves: Lorentzian fits, peak
//! positions, doublet separation, per-peak widths and doublet depth.

use crate::ensemble::ScanResult;
use crate::error::{FelError, Result};
use crate::stats::{self, LinearFit};

const MAX_ITERATIONS: usize = 200;
const RELATIVE_TOLERANCE: f64 = 1e-10;
/// Minimum prominence of a peak relative to the curve maximum.
const MIN_RELATIVE_PROMINENCE: f64 = 0.01;
/// Minimum prominence in units of the local standard error.
const NOISE_FLOOR_SIGMAS: f64 = 3.0;

/// Which yield of a scan to analyze.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Observable {
    Q2,
    Q3,
}

/// Sampled curve `y(x)` with optional standard errors; `x` strictly
/// increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    x: Vec<f64>,
    y: Vec<f64>,
    stderr: Vec<f64>,
}

impl Curve {
    pub fn new(x: Vec<f64>, y: Vec<f64>, stderr: Option<Vec<f64>>) -> Result<Self> {
        let stderr = stderr.unwrap_or_else(|| vec![0.0; x.len()]);
        if x.len() != y.len() || x.len() != stderr.len() {
            return Err(FelError::Shape("curve columns differ in length".into()));
        }
        if x.len() < 3 {
            return Err(FelError::InsufficientData(format!(
                "a curve needs at least 3 points, got {}",
                x.len()
            )));
        }
        if x.iter().chain(&y).chain(&stderr).any(|v| !v.is_finite()) {
            return Err(FelError::Shape("curve contains non-finite values".into()));
        }
        if stderr.iter().any(|&s| s < 0.0) {
            return Err(FelError::Shape(
                "standard errors must be non-negative".into(),
            ));
        }
        let mut idx: Vec<usize> = (0..x.len()).collect();
        idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
        let x: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(FelError::Shape("curve abscissae must be distinct".into()));
        }
        Ok(Curve {
            x,
            y: idx.iter().map(|&i| y[i]).collect(),
            stderr: idx.iter().map(|&i| stderr[i]).collect(),
        })
    }

    /// The computed points of a scan; failed points are dropped.
    pub fn from_scan(scan: &ScanResult, observable: Observable) -> Result<Self> {
        let mut x = Vec::new();
        let mut y = Vec::new();
        let mut se = Vec::new();
        for p in &scan.points {
            if let Ok(r) = &p.result {
                x.push(p.x);
                let (m, s) = match observable {
                    Observable::Q2 => (r.q2_mean, r.q2_stderr),
                    Observable::Q3 => (r.q3_mean, r.q3_stderr),
                };
                y.push(m);
                se.push(s);
            }
        }
        Curve::new(x, y, Some(se))
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn stderr(&self) -> &[f64] {
        &self.stderr
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Three-point moving average (end points kept).
    pub fn smoothed(&self) -> Curve {
        let mut y = self.y.clone();
        for (i, w) in self.y.windows(3).enumerate() {
            y[i + 1] = (w[0] + w[1] + w[2]) / 3.0;
        }
        Curve {
            x: self.x.clone(),
            y,
            stderr: self.stderr.clone(),
        }
    }

    pub fn max(&self) -> f64 {
        self.y.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Least-squares Lorentzian `A(w/2)²/((x−c)² + (w/2)²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzianFit {
    pub center: f64,
    /// Full width at half maximum `w`.
    pub width: f64,
    pub amplitude: f64,
    /// RMS deviation over all points divided by the curve maximum.
    pub residual: f64,
    /// RMS deviation over points at or above half maximum, divided by the
    /// curve maximum.
    pub apex_residual: f64,
    pub iterations: usize,
}

pub fn lorentzian(x: f64, center: f64, width: f64, amplitude: f64) -> f64 {
    let g2 = 0.25 * width * width;
    amplitude * g2 / ((x - center).powi(2) + g2)
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let mut m = [[0.0; 4]; 3];
    for i in 0..3 {
        m[i][..3].copy_from_slice(&a[i]);
        m[i][3] = b[i];
    }
    for col in 0..3 {
        let piv = (col..3).max_by(|&p, &q| m[p][col].abs().total_cmp(&m[q][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        for row in 0..3 {
            if row != col {
                let pivot = m[col];
                let f = m[row][col] / pivot[col];
                for (v, p) in m[row][col..].iter_mut().zip(&pivot[col..]) {
                    *v -= f * p;
                }
            }
        }
    }
    Some([m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]])
}

fn lorentzian_cost(x: &[f64], y: &[f64], p: &[f64; 3]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&xi, &yi)| (yi - lorentzian(xi, p[1], p[2], p[0])).powi(2))
        .sum()
}

/// Damped Gauss-Newton (Levenberg-Marquardt) fit started from the grid
/// maximum, its FWHM and height. Fails on curves with more than one
/// significant peak and when the iteration budget runs out.
pub fn fit_lorentzian(curve: &Curve) -> Result<LorentzianFit> {
    let peaks = find_peaks(curve, false);
    if peaks.len() > 1 {
        return Err(FelError::Shape(format!(
            "curve has {} significant peaks, a Lorentzian needs one (at {:?})",
            peaks.len(),
            peaks.iter().map(|p| p.position).collect::<Vec<_>>()
        )));
    }
    let (x, y) = (curve.x(), curve.y());
    let top = stats::argmax(y).ok_or_else(|| FelError::Fit("empty curve".into()))?;
    let peak = y[top];
    if peak <= 0.0 {
        return Err(FelError::Fit("curve maximum is not positive".into()));
    }
    let span = x[x.len() - 1] - x[0];
    let w0 = stats::fwhm(x, y).unwrap_or(0.25 * span).max(1e-6 * span);
    // parameters: amplitude, center, width
    let mut p = [peak, x[top], w0];
    let mut cost = lorentzian_cost(x, y, &p);
    let mut lambda = 1e-3;
    let mut converged = cost == 0.0;
    let mut iterations = 0;
    while !converged && iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        let g = 0.5 * p[2];
        for (&xi, &yi) in x.iter().zip(y) {
            let d = xi - p[1];
            let den = d * d + g * g;
            let f = p[0] * g * g / den;
            let j = [
                g * g / den,
                2.0 * p[0] * g * g * d / (den * den),
                p[0] * g * d * d / (den * den),
            ];
            let r = yi - f;
            for a in 0..3 {
                jtr[a] += j[a] * r;
                for b in 0..3 {
                    jtj[a][b] += j[a] * j[b];
                }
            }
        }
        loop {
            let mut damped = jtj;
            for (a, row) in damped.iter_mut().enumerate() {
                row[a] += lambda * jtj[a][a].max(1e-300);
            }
            let Some(step) = solve3(damped, jtr) else {
                lambda *= 10.0;
                if lambda > 1e20 {
                    converged = true;
                    break;
                }
                continue;
            };
            let trial = [p[0] + step[0], p[1] + step[1], (p[2] + step[2]).abs()];
            let trial_cost = lorentzian_cost(x, y, &trial);
            if trial_cost.is_finite() && trial_cost <= cost {
                let rel_step = (0..3)
                    .map(|a| (step[a] / p[a].abs().max(1e-300)).abs())
                    .fold(0.0, f64::max);
                let gain = (cost - trial_cost) / cost.max(f64::MIN_POSITIVE);
                p = trial;
                cost = trial_cost;
                lambda = (lambda / 10.0).max(1e-12);
                if gain < RELATIVE_TOLERANCE || rel_step < RELATIVE_TOLERANCE || cost == 0.0 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e20 {
                // no downhill direction left: stationary point
                converged = true;
                break;
            }
        }
    }
    if !converged {
        return Err(FelError::Fit(format!(
            "no convergence after {MAX_ITERATIONS} iterations (center {:.6}, width {:.6}, amplitude {:.6}, cost {cost:.3e})",
            p[1], p[2], p[0]
        )));
    }
    let rms = |keep: &dyn Fn(f64) -> bool| -> f64 {
        let sel: Vec<f64> = x
            .iter()
            .zip(y)
            .filter(|(_, &yi)| keep(yi))
            .map(|(&xi, &yi)| (yi - lorentzian(xi, p[1], p[2], p[0])).powi(2))
            .collect();
        (sel.iter().sum::<f64>() / sel.len().max(1) as f64).sqrt() / peak
    };
    Ok(LorentzianFit {
        center: p[1],
        width: p[2],
        amplitude: p[0],
        residual: rms(&|_| true),
        apex_residual: rms(&|yi| yi >= 0.5 * peak),
        iterations,
    })
}

/// A significant local maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    /// Grid index of the sampled maximum.
    pub index: usize,
    /// Parabolic-interpolated position.
    pub position: f64,
    /// Sampled height.
    pub height: f64,
    pub prominence: f64,
}

fn parabolic_vertex(x: &[f64], y: &[f64], i: usize) -> f64 {
    if i == 0 || i + 1 >= x.len() {
        return x[i];
    }
    let (x0, x1, x2) = (x[i - 1], x[i], x[i + 1]);
    let (y0, y1, y2) = (y[i - 1], y[i], y[i + 1]);
    let num = (x1 - x0).powi(2) * (y1 - y2) - (x1 - x2).powi(2) * (y1 - y0);
    let den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0);
    if den == 0.0 {
        return x1;
    }
    (x1 - 0.5 * num / den).clamp(x0, x2)
}

/// Significant interior local maxima, highest first; equal heights are
/// ordered by increasing `|x|`. A maximum counts when its prominence
/// exceeds both 3 standard errors and 1% of the curve maximum.
pub fn find_peaks(curve: &Curve, smooth: bool) -> Vec<Peak> {
    let smoothed;
    let c = if smooth {
        smoothed = curve.smoothed();
        &smoothed
    } else {
        curve
    };
    let (x, y) = (c.x(), c.y());
    let n = y.len();
    let floor = MIN_RELATIVE_PROMINENCE * c.max().max(0.0);
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if y[i] > y[i - 1] {
            // extend across a plateau
            let mut j = i;
            while j + 1 < n && y[j + 1] == y[i] {
                j += 1;
            }
            if j + 1 < n && y[j + 1] < y[i] {
                let h = y[i];
                let mut left_min = h;
                let mut k = i;
                while k > 0 && y[k - 1] <= h {
                    k -= 1;
                    left_min = left_min.min(y[k]);
                }
                let left_edge = k == 0;
                let mut right_min = h;
                let mut k = j;
                while k + 1 < n && y[k + 1] <= h {
                    k += 1;
                    right_min = right_min.min(y[k]);
                }
                let right_edge = k + 1 == n;
                // a side that runs to the grid edge does not bound the peak
                let prominence = match (left_edge, right_edge) {
                    (true, true) => h - left_min.min(right_min),
                    (true, false) => h - right_min,
                    (false, true) => h - left_min,
                    (false, false) => h - left_min.max(right_min),
                };
                let threshold = floor.max(NOISE_FLOOR_SIGMAS * c.stderr()[i]);
                if prominence > threshold {
                    let mid = (i + j) / 2;
                    let position = if i == j {
                        parabolic_vertex(x, y, i)
                    } else {
                        0.5 * (x[i] + x[j])
                    };
                    peaks.push(Peak {
                        index: mid,
                        position,
                        height: h,
                        prominence,
                    });
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks.sort_by(|a, b| {
        b.height
            .total_cmp(&a.height)
            .then(a.position.abs().total_cmp(&b.position.abs()))
    });
    peaks
}

/// Features of a yield curve. Doublet fields are `None` when fewer than
/// two significant peaks exist.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveFeatures {
    /// Dominant peaks ordered by position (at most two).
    pub peak_positions: Vec<f64>,
    pub peak_heights: Vec<f64>,
    pub fwhm_per_peak: Vec<Option<f64>>,
    pub separation: Option<f64>,
    /// `(max − min)/max` with `min` the inter-peak minimum.
    pub depth: Option<f64>,
    /// Position of the inter-peak minimum.
    pub minimum_position: Option<f64>,
    pub lorentzian_fit: Option<LorentzianFit>,
}

impl CurveFeatures {
    pub fn has_doublet(&self) -> bool {
        self.separation.is_some()
    }

    /// Mean FWHM of the two doublet peaks.
    pub fn mean_fwhm(&self) -> Option<f64> {
        if !self.has_doublet() {
            return None;
        }
        let (a, b) = (self.fwhm_per_peak[0]?, self.fwhm_per_peak[1]?);
        Some(0.5 * (a + b))
    }
}

/// Width of a peak: the outer flank crosses half the peak height, the
/// inner flank crosses half way between the peak and `inner_min`. A
/// missing crossing is replaced by the other half-width.
fn peak_width(
    curve: &Curve,
    peak: &Peak,
    outward: isize,
    inner: Option<(usize, f64)>,
) -> Option<f64> {
    let (x, y) = (curve.x(), curve.y());
    let n = x.len();
    let outer_limit = if outward > 0 { n - 1 } else { 0 };
    let outer = stats::walk_to_level(x, y, peak.index, outward, 0.5 * peak.height, outer_limit)
        .map(|c| (c - peak.position).abs());
    let inner = match inner {
        Some((limit, min)) => {
            stats::walk_to_level(x, y, peak.index, -outward, 0.5 * (peak.height + min), limit)
        }
        None => {
            let limit = if outward > 0 { 0 } else { n - 1 };
            stats::walk_to_level(x, y, peak.index, -outward, 0.5 * peak.height, limit)
        }
    }
    .map(|c| (c - peak.position).abs());
    match (outer, inner) {
        (Some(a), Some(b)) => Some(a + b),
        (Some(a), None) => Some(2.0 * a),
        (None, Some(b)) => Some(2.0 * b),
        (None, None) => None,
    }
    .filter(|w| *w > 0.0)
}

/// Doublet analysis with peak detection on the raw grid.
pub fn extract_doublet(curve: &Curve) -> CurveFeatures {
    extract_doublet_with(curve, false)
}

/// Doublet analysis; `smooth` applies a 3-point moving average before
/// peak detection.
pub fn extract_doublet_with(curve: &Curve, smooth: bool) -> CurveFeatures {
    let peaks = find_peaks(curve, smooth);
    let y = curve.y();
    if peaks.len() < 2 {
        let single = peaks.first().copied().or_else(|| {
            let i = stats::argmax(y)?;
            Some(Peak {
                index: i,
                position: parabolic_vertex(curve.x(), y, i),
                height: y[i],
                prominence: 0.0,
            })
        });
        let (positions, heights, widths) = match single {
            Some(p) => (
                vec![p.position],
                vec![p.height],
                vec![peak_width(curve, &p, 1, None)],
            ),
            None => (vec![], vec![], vec![]),
        };
        return CurveFeatures {
            peak_positions: positions,
            peak_heights: heights,
            fwhm_per_peak: widths,
            separation: None,
            depth: None,
            minimum_position: None,
            lorentzian_fit: fit_lorentzian(curve).ok(),
        };
    }
    let (mut a, mut b) = (peaks[0], peaks[1]);
    if a.index > b.index {
        std::mem::swap(&mut a, &mut b);
    }
    let (mi, min) = (a.index..=b.index)
        .map(|i| (i, y[i]))
        .min_by(|p, q| p.1.total_cmp(&q.1))
        .expect("non-empty range");
    let max = a.height.max(b.height);
    let depth = if max > 0.0 {
        ((max - min) / max).clamp(0.0, 1.0)
    } else {
        0.0
    };
    CurveFeatures {
        peak_positions: vec![a.position, b.position],
        peak_heights: vec![a.height, b.height],
        fwhm_per_peak: vec![
            peak_width(curve, &a, -1, Some((mi, min))),
            peak_width(curve, &b, 1, Some((mi, min))),
        ],
        separation: Some(b.position - a.position),
        depth: Some(depth),
        minimum_position: Some(curve.x()[mi]),
        lorentzian_fit: None,
    }
}

/// Doublet observables at one `χ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplittingPoint {
    pub chi: f64,
    /// Separation over the reference separation; `None` without a doublet.
    pub normalized_splitting: Option<f64>,
    pub depth: Option<f64>,
}

/// Normalize doublet separations to `reference_separation` (usually the
/// Fourier-limited value). The smallest `χ` must show a doublet.
pub fn splitting_vs_chi(
    chi: &[f64],
    features: &[CurveFeatures],
    reference_separation: f64,
) -> Result<Vec<SplittingPoint>> {
    if chi.len() != features.len() || chi.is_empty() {
        return Err(FelError::Shape("need one feature set per chi value".into()));
    }
    if !(reference_separation.is_finite() && reference_separation > 0.0) {
        return Err(FelError::Fit(format!(
            "reference separation must be positive, got {reference_separation}"
        )));
    }
    let first = (0..chi.len())
        .min_by(|&a, &b| chi[a].total_cmp(&chi[b]))
        .expect("non-empty");
    if !features[first].has_doublet() {
        return Err(FelError::Shape(format!(
            "no resolvable doublet at the smallest chi = {}",
            chi[first]
        )));
    }
    Ok(chi
        .iter()
        .zip(features)
        .map(|(&c, f)| SplittingPoint {
            chi: c,
            normalized_splitting: f.separation.map(|s| s / reference_separation),
            depth: f.depth,
        })
        .collect())
}

/// Least-squares line through the mean doublet FWHM versus `χ`; curves
/// without a doublet are skipped, at least 4 points must remain.
pub fn fwhm_vs_chi(chi: &[f64], features: &[CurveFeatures]) -> Result<LinearFit> {
    if chi.len() != features.len() {
        return Err(FelError::Shape("need one feature set per chi value".into()));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = chi
        .iter()
        .zip(features)
        .filter_map(|(&c, f)| f.mean_fwhm().map(|w| (c, w)))
        .unzip();
    if xs.len() < 4 {
        return Err(FelError::InsufficientData(format!(
            "FWHM trend needs at least 4 resolved doublets, got {}",
            xs.len()
        )));
    }
    stats::linear_fit(&xs, &ys).ok_or_else(|| FelError::Fit("degenerate chi grid".into()))
}
