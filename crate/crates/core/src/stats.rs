//! Small numeric helpers shared by the statistics and analysis code.

/// Mean and standard error of the mean (sample standard deviation / √n).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Ordinary least-squares line `y = slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Standard error of the slope.
    pub slope_stderr: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - slope * a - intercept).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    let slope_stderr = if n > 2 {
        (ss_res / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some(LinearFit {
        slope,
        intercept,
        r_squared,
        slope_stderr,
    })
}

/// Position where the segment `(x0, y0)–(x1, y1)` crosses `level`.
pub fn crossing(x0: f64, y0: f64, x1: f64, y1: f64, level: f64) -> f64 {
    if y1 == y0 {
        return 0.5 * (x0 + x1);
    }
    x0 + (level - y0) * (x1 - x0) / (y1 - y0)
}

/// First crossing of `level` walking from `peak` in direction `step`
/// (±1), stopping before index `limit` is passed. Returns the
/// interpolated abscissa.
pub fn walk_to_level(
    x: &[f64],
    y: &[f64],
    peak: usize,
    step: isize,
    level: f64,
    limit: usize,
) -> Option<f64> {
    let mut i = peak;
    loop {
        let j = i as isize + step;
        if j < 0 || j as usize >= x.len() {
            return None;
        }
        let j = j as usize;
        if (step > 0 && j > limit) || (step < 0 && j < limit) {
            return None;
        }
        if y[j] <= level {
            return Some(crossing(x[i], y[i], x[j], y[j], level));
        }
        i = j;
    }
}

/// Full width at half maximum of the global peak of a sampled curve,
/// with linear interpolation between straddling samples.
pub fn fwhm(x: &[f64], y: &[f64]) -> Option<f64> {
    let peak = argmax(y)?;
    let half = 0.5 * y[peak];
    let left = walk_to_level(x, y, peak, -1, half, 0)?;
    let right = walk_to_level(x, y, peak, 1, half, x.len() - 1)?;
    Some(right - left)
}

pub fn argmax(y: &[f64]) -> Option<usize> {
    y.iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
}

/// Trapezoidal integral of uniformly spaced samples.
pub fn trapezoid(y: &[f64], dx: f64) -> f64 {
    match y.len() {
        0 | 1 => 0.0,
        n => dx * (y[1..n - 1].iter().sum::<f64>() + 0.5 * (y[0] + y[n - 1])),
    }
}
