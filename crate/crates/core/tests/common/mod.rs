//! Oracles and measurements shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use flatlens::fdtd::{build_simulation, source_line, Polarization, SimulationConfig, YeeState};
use flatlens::medium::Vacuum;
use flatlens::{wavelength_mm, Rect};
use num_complex::Complex64;

pub const F_GHZ: f64 = 32.0;

/// J0 by the Bessel integral, composite Simpson.
pub fn bessel_j0_quad(x: f64) -> f64 {
    let n = 2000;
    let h = PI / n as f64;
    let f = |t: f64| (x * t.sin()).cos();
    let mut s = f(0.0) + f(PI);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(k as f64 * h);
    }
    s * h / 3.0 / PI
}

/// H0^(2)(x) from the large-argument series, good to ~1e-9 for x > 10.
pub fn hankel2_0(x: f64) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    let mut term = 1.0;
    for k in 0..12 {
        if k > 0 {
            let m = (2 * k - 1) as f64;
            term *= -(m * m) / (k as f64 * 8.0 * x);
        }
        sum += Complex64::new(0.0, -1.0).powi(k) * term;
    }
    let phase = Complex64::from_polar(1.0, -(x - PI / 4.0));
    (2.0 / (PI * x)).sqrt() * phase * sum
}

pub fn box_config(half: f64) -> SimulationConfig {
    let mut c = SimulationConfig::new(F_GHZ);
    c.domain = Some(Rect {
        y_min: -half,
        y_max: half,
        z_min: -half,
        z_max: half,
    });
    c
}

pub struct GreenCheck {
    pub samples: usize,
    pub worst: f64,
    pub periods: usize,
    pub converged: bool,
}

/// Free-space line source against `-(kA/4) H0^(2)(k rho)`: worst relative
/// magnitude error along six rays, radii from 2 wavelengths to 2 cells
/// short of the absorber.
pub fn green_check(pol: Polarization) -> GreenCheck {
    let lambda = wavelength_mm(F_GHZ);
    let k = 2.0 * PI / lambda;
    let mut cfg = box_config(5.0 * lambda);
    cfg.polarization = pol;
    let src = source_line((0.0, 0.0), 1.0, pol);
    let field = build_simulation(&Vacuum, &cfg, &[src]).unwrap().run_cw().unwrap();
    let g = field.grid;
    let edge = (g.i0 - g.pml - 2) as f64 * g.delta;
    let mut worst: f64 = 0.0;
    let mut samples = 0;
    let dirs: [(i64, i64); 6] = [(0, 1), (0, -1), (1, 0), (-1, 0), (1, 1), (-1, -1)];
    for (di, dj) in dirs {
        for step in 1i64.. {
            let (i, j) = (g.i0 as i64 + di * step, g.j0 as i64 + dj * step);
            let rho = g.delta * step as f64 * ((di * di + dj * dj) as f64).sqrt();
            let (y, z) = ((i - g.i0 as i64) as f64 * g.delta, (j - g.j0 as i64) as f64 * g.delta);
            if y.abs() > edge || z.abs() > edge {
                break;
            }
            if rho < 2.0 * lambda {
                continue;
            }
            let expected = k / 4.0 * hankel2_0(k * rho).norm();
            let got = field.u_at(i as usize, j as usize).norm();
            worst = worst.max((got / expected - 1.0).abs());
            samples += 1;
        }
    }
    GreenCheck {
        samples,
        worst,
        periods: field.periods,
        converged: field.converged,
    }
}

/// Peak boundary reflection of a Gaussian-modulated pulse, dB relative to
/// the incident peak: a small domain against a large reference domain.
pub fn cpml_reflection_db() -> f64 {
    let lambda = wavelength_mm(F_GHZ);
    let small = box_config(1.5 * lambda);
    let large = box_config(10.0 * lambda);
    let src = source_line((0.0, 0.0), 1.0, Polarization::Te);
    let mut a = build_simulation(&Vacuum, &small, &[src]).unwrap();
    let mut b = build_simulation(&Vacuum, &large, &[src]).unwrap();
    assert_eq!(a.steps_per_period(), b.steps_per_period());
    let n = a.steps_per_period() as f64;
    let probes = [(0.0, lambda), (0.0, -lambda), (0.7 * lambda, 0.7 * lambda)];
    let node = |st: &YeeState, y: f64, z: f64| {
        let (i, j) = st.grid().nearest_node(y, z);
        (i as usize, j as usize)
    };
    let pa: Vec<_> = probes.iter().map(|&(y, z)| node(&a, y, z)).collect();
    let pb: Vec<_> = probes.iter().map(|&(y, z)| node(&b, y, z)).collect();

    let (t0, w) = (4.0 * n, n);
    let mut incident: f64 = 0.0;
    let mut reflected: f64 = 0.0;
    for step in 0..(12.0 * n) as usize {
        let t = step as f64 + 0.5;
        let drive = (-((t - t0) / w).powi(2)).exp() * (2.0 * PI * (t - t0) / n).cos();
        a.step_with_drive(drive).unwrap();
        b.step_with_drive(drive).unwrap();
        for (&(ia, ja), &(ib, jb)) in pa.iter().zip(&pb) {
            let ua = a.u_at(ia, ja);
            let ub = b.u_at(ib, jb);
            incident = incident.max(ub.abs());
            reflected = reflected.max((ua - ub).abs());
        }
    }
    20.0 * (reflected / incident).log10()
}
