use std::f64::consts::PI;

use flatlens::farfield::{ntff, pattern_metrics, ContourSpec};
use flatlens::fdtd::{build_simulation, source_line, PhasorField, Polarization, SimulationConfig};
use flatlens::medium::{CircularLuneburg, Vacuum};
use flatlens::{wavelength_mm, Error, Medium};
use num_complex::Complex64;

const F_GHZ: f64 = 32.0;
const STEP: f64 = 0.25;

fn run(medium: &dyn Medium, sources: &[(f64, f64)], pol: Polarization, padding: f64) -> PhasorField {
    let mut cfg = SimulationConfig::new(F_GHZ);
    cfg.padding_mm = Some(padding);
    cfg.polarization = pol;
    let src: Vec<_> = sources.iter().map(|&p| source_line(p, 1.0, pol)).collect();
    let f = build_simulation(medium, &cfg, &src).unwrap().run_cw().unwrap();
    assert!(f.converged);
    f
}

#[test]
fn line_source_is_isotropic_with_exact_level() {
    let lambda = wavelength_mm(F_GHZ);
    let k = 2.0 * PI / lambda;
    for pol in [Polarization::Te, Polarization::Tm] {
        let field = run(&Vacuum, &[(0.0, 0.0)], pol, lambda);
        let pat = ntff(&field, &ContourSpec::default(), STEP).unwrap();
        let exact = k / 4.0 * (2.0 / (PI * k)).sqrt();
        let mut worst: f64 = 0.0;
        for v in &pat.values {
            worst = worst.max((20.0 * (v.norm() / exact).log10()).abs());
        }
        assert!(worst < 0.5, "{pol:?}: {worst:.3} dB off the analytic level");
        // Phase of the far field: F = -(kA/4) sqrt(2/(pi k)) exp(j pi/4).
        let expected = -exact * Complex64::from_polar(1.0, PI / 4.0);
        let dphi = (pat.values[719] / expected).arg().abs();
        assert!(dphi < 0.1, "{pol:?}: phase off by {dphi}");
        assert!(matches!(
            pattern_metrics(&pat, None),
            Err(Error::DegeneratePattern(_)) | Ok(_)
        ));
    }
}

#[test]
fn two_element_array_factor() {
    let lambda = wavelength_mm(F_GHZ);
    let d = lambda / 4.0;
    let field = run(&Vacuum, &[(-d, 0.0), (d, 0.0)], Polarization::Te, lambda);
    let pat = ntff(&field, &ContourSpec::default(), STEP).unwrap();
    let peak = pat.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    for (phi, v) in pat.phi_deg.iter().zip(&pat.values) {
        let af = (PI / 2.0 * phi.to_radians().sin()).cos().abs();
        if af < 0.1 {
            continue;
        }
        worst = worst.max((20.0 * (v.norm() / peak / af).log10()).abs());
    }
    assert!(worst < 0.5, "array factor mismatch {worst:.3} dB");
    let m = pattern_metrics(&pat, None);
    // Broadside front and back are equal, so the pattern has two maxima.
    assert!(m.is_err());
    let near = |deg: f64| {
        let k = pat.phi_deg.iter().position(|&p| (p - deg).abs() < 1e-9).unwrap();
        pat.values[k].norm() / peak
    };
    assert!(near(90.0) < 0.05 && near(-90.0) < 0.05);
    assert!((near(0.0) - 1.0).abs() < 0.01);
}

#[test]
fn transform_is_linear() {
    let lambda = wavelength_mm(F_GHZ);
    let field = run(&Vacuum, &[(1.0, -2.0)], Polarization::Te, lambda);
    let a = ntff(&field, &ContourSpec::default(), STEP).unwrap();
    let b = ntff(&field.scaled(Complex64::new(2.0, 0.0)), &ContourSpec::default(), STEP).unwrap();
    for (x, y) in a.values.iter().zip(&b.values) {
        assert_eq!(y.norm(), 2.0 * x.norm());
    }
}

#[test]
fn contour_placement_does_not_matter() {
    let lambda = wavelength_mm(F_GHZ);
    let lens = CircularLuneburg { radius: 12.0 };
    let field = run(&lens, &[(3.0, -12.5)], Polarization::Te, 1.5 * lambda);
    let a = ntff(&field, &ContourSpec { margin_cells: 3 }, STEP).unwrap();
    let b = ntff(&field, &ContourSpec { margin_cells: 8 }, STEP).unwrap();
    let peak = a.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    for (x, y) in a.values.iter().zip(&b.values) {
        if 20.0 * (x.norm() / peak).log10() < -30.0 {
            continue;
        }
        worst = worst.max((20.0 * (y.norm() / x.norm()).log10()).abs());
    }
    eprintln!("contour change {worst:.4} dB");
    assert!(worst < 0.2, "{worst} dB");
}

#[test]
fn contour_must_clear_the_absorber() {
    let lambda = wavelength_mm(F_GHZ);
    let field = run(&Vacuum, &[(0.0, 0.0)], Polarization::Te, 0.2 * lambda);
    assert!(matches!(
        ntff(&field, &ContourSpec { margin_cells: 10 }, STEP),
        Err(Error::Config(_))
    ));
    assert!(ntff(&field, &ContourSpec { margin_cells: 0 }, STEP).is_err());
}

#[test]
fn luneburg_rim_feed_collimates_on_axis() {
    let lens = CircularLuneburg { radius: 16.0 };
    let field = run(&lens, &[(0.0, -16.5)], Polarization::Te, 6.0);
    let pat = ntff(&field, &ContourSpec::default(), STEP).unwrap();
    let m = pattern_metrics(&pat, None).unwrap();
    assert!(m.peak_deg.abs() < 1.0, "{m:?}");
    // Offset feed steers the beam to the opposite side.
    let field = run(&lens, &[(4.0, -15.9)], Polarization::Te, 6.0);
    let m = pattern_metrics(&ntff(&field, &ContourSpec::default(), STEP).unwrap(), None).unwrap();
    assert!(m.peak_deg < -5.0, "{m:?}");
}
