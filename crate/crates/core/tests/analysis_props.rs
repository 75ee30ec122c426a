use approx::assert_relative_eq;
use felsim::analysis::{extract_doublet, fit_lorentzian, lorentzian};
use felsim::Curve;
use proptest::prelude::*;

fn symmetric_grid(half: f64, step: f64) -> Vec<f64> {
    let n = (half / step).round() as i64;
    (-n..=n).map(|k| k as f64 * step).collect()
}

fn doublet(x: &[f64], c: f64, split: f64, w: (f64, f64), h: (f64, f64), floor: f64) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            floor
                + lorentzian(v, c - split / 2.0, w.0, h.0)
                + lorentzian(v, c + split / 2.0, w.1, h.1)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn doublet_mirror_symmetry(
        c in -3.0f64..3.0,
        split in 8.0f64..24.0,
        w0 in 1.0f64..4.0,
        w1 in 1.0f64..4.0,
        h0 in 0.2f64..1.0,
        h1 in 0.2f64..1.0,
        floor in 0.0f64..0.05,
    ) {
        let x = symmetric_grid(30.0, 0.25);
        let y = doublet(&x, c, split, (w0, w1), (h0, h1), floor);
        let mirrored_x: Vec<f64> = x.iter().rev().map(|v| -v).collect();
        let mirrored_y: Vec<f64> = y.iter().rev().copied().collect();
        let f = extract_doublet(&Curve::new(x, y, None).unwrap());
        let g = extract_doublet(&Curve::new(mirrored_x, mirrored_y, None).unwrap());
        prop_assert_eq!(f.has_doublet(), g.has_doublet());
        prop_assume!(f.has_doublet());
        let tol = 1e-9;
        prop_assert!((f.peak_positions[0] + g.peak_positions[1]).abs() < tol);
        prop_assert!((f.peak_positions[1] + g.peak_positions[0]).abs() < tol);
        prop_assert!((f.separation.unwrap() - g.separation.unwrap()).abs() < tol);
        prop_assert!((f.depth.unwrap() - g.depth.unwrap()).abs() < tol);
        prop_assert_eq!(f.fwhm_per_peak[0].is_some(), g.fwhm_per_peak[1].is_some());
        prop_assert_eq!(f.fwhm_per_peak[1].is_some(), g.fwhm_per_peak[0].is_some());
        if let (Some(a), Some(b)) = (f.fwhm_per_peak[0], g.fwhm_per_peak[1]) {
            prop_assert!((a - b).abs() < tol);
        }
        if let (Some(a), Some(b)) = (f.fwhm_per_peak[1], g.fwhm_per_peak[0]) {
            prop_assert!((a - b).abs() < tol);
        }
    }

    #[test]
    fn depth_is_bounded(
        c in -3.0f64..3.0,
        split in 4.0f64..24.0,
        w0 in 0.5f64..6.0,
        w1 in 0.5f64..6.0,
        h0 in 0.05f64..1.0,
        h1 in 0.05f64..1.0,
        floor in 0.0f64..0.2,
    ) {
        let x = symmetric_grid(30.0, 0.5);
        let y = doublet(&x, c, split, (w0, w1), (h0, h1), floor);
        let f = extract_doublet(&Curve::new(x, y, None).unwrap());
        if let Some(v) = f.depth {
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert!(v < 1.0);
            prop_assert!(f.separation.unwrap() >= 0.0);
        }
        for w in f.fwhm_per_peak.iter().flatten() {
            prop_assert!(*w > 0.0);
        }
    }

    #[test]
    fn depth_reaches_one_only_at_a_zero_minimum(
        left in 0.1f64..1.0,
        right in 0.1f64..1.0,
        gap in 1usize..6,
    ) {
        // two triangular bumps with `gap` zeros between them
        let mut y = vec![0.0, 0.5 * left, left, 0.5 * left];
        y.extend(std::iter::repeat_n(0.0, gap));
        y.extend([0.5 * right, right, 0.5 * right, 0.0]);
        let x: Vec<f64> = (0..y.len()).map(|i| i as f64).collect();
        let f = extract_doublet(&Curve::new(x.clone(), y.clone(), None).unwrap());
        prop_assert_eq!(f.depth, Some(1.0));

        let lifted: Vec<f64> = y.iter().map(|v| v + 1e-3).collect();
        let f = extract_doublet(&Curve::new(x, lifted, None).unwrap());
        prop_assert!(f.depth.unwrap() < 1.0);
    }

    #[test]
    fn lorentzian_fit_is_scale_equivariant(
        center in -5.0f64..5.0,
        width in 1.0f64..8.0,
        amp in 0.05f64..1.0,
        wobble in 0.0f64..0.02,
        scale in 1e-3f64..1e3,
    ) {
        let x = symmetric_grid(30.0, 0.5);
        let y: Vec<f64> = x
            .iter()
            .map(|&v| lorentzian(v, center, width, amp) * (1.0 + wobble * (0.7 * v).sin()))
            .collect();
        let scaled: Vec<f64> = y.iter().map(|v| v * scale).collect();
        let a = fit_lorentzian(&Curve::new(x.clone(), y, None).unwrap()).unwrap();
        let b = fit_lorentzian(&Curve::new(x, scaled, None).unwrap()).unwrap();
        prop_assert!((a.center - b.center).abs() < 1e-6 * width);
        prop_assert!((a.width - b.width).abs() < 1e-6 * width);
        prop_assert!((b.amplitude / (a.amplitude * scale) - 1.0).abs() < 1e-6);
        prop_assert!((a.residual - b.residual).abs() < 1e-6 * a.residual.max(1e-9));
    }
}

#[test]
fn exact_lorentzian_is_recovered() {
    let x = symmetric_grid(20.0, 0.25);
    let y: Vec<f64> = x.iter().map(|&v| lorentzian(v, 1.5, 3.0, 0.4)).collect();
    let fit = fit_lorentzian(&Curve::new(x, y, None).unwrap()).unwrap();
    assert!(fit.residual < 1e-8);
    assert_relative_eq!(fit.center, 1.5, epsilon = 1e-8);
    assert_relative_eq!(fit.width, 3.0, epsilon = 1e-8);
    assert_relative_eq!(fit.amplitude, 0.4, epsilon = 1e-8);
}

#[test]
fn synthetic_symmetric_doublet() {
    let x = symmetric_grid(30.0, 0.25);
    let y = doublet(&x, 0.0, 20.0, (2.0, 2.0), (1.0, 1.0), 0.0);
    let f = extract_doublet(&Curve::new(x, y.clone(), None).unwrap());
    assert_relative_eq!(f.separation.unwrap(), 20.0, epsilon = 0.05);
    let max = y.iter().cloned().fold(f64::MIN, f64::max);
    let mid = y[y.len() / 2];
    assert_relative_eq!(f.depth.unwrap(), (max - mid) / max, epsilon = 1e-12);
    assert_eq!(f.minimum_position, Some(0.0));
}
