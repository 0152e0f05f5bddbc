//! Near-to-far-field transform and pattern metrics.
//!
//! The far field is written `u(rho, phi) ~ F(phi) exp(-j k rho) / sqrt(rho)`
//! with `phi` measured from +z towards +y. `F` comes from the Kirchhoff
//! integral of `u` and its normal derivative over a rectangle of grid lines
//! enclosing every source and scatterer:
//!
//! ```text
//! F(phi) = P * sum_contour [ j k (n . r) u - du/dn ] exp(j k r . r') dl
//! P      = -(j/4) sqrt(2 / (pi k)) exp(j pi/4)
//! ```
//!
//! In vacuum the in-plane fields give the derivatives directly:
//! `du/dz = -j k a` and `du/dy = j k b`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fdtd::{build_simulation, source_line, PhasorField, SimulationConfig};
use crate::io::sig9;
use crate::lens::LensSpec;
use crate::medium::Medium;

pub const DEFAULT_ANGLE_STEP_DEG: f64 = 0.25;

/// Floor for the back-lobe level in the front-to-back ratio.
const BACK_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    /// Gap between the enclosed region and the contour, cells.
    pub margin_cells: usize,
}

impl Default for ContourSpec {
    fn default() -> Self {
        Self { margin_cells: 4 }
    }
}

/// Contour placed on the grid: node index bounds and their coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourBox {
    pub i_lo: usize,
    pub i_hi: usize,
    pub j_lo: usize,
    pub j_hi: usize,
    pub y_min: f64,
    pub y_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

/// Uniform angles over (-180, 180] degrees.
pub fn angle_grid(step_deg: f64) -> Result<Vec<f64>> {
    let n = (360.0 / step_deg).round();
    if !(step_deg > 0.0) || n < 4.0 || (n * step_deg - 360.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "angle step {step_deg} deg must divide 360 into at least 4 samples"
        )));
    }
    let n = n as usize;
    Ok((1..=n).map(|k| -180.0 + k as f64 * step_deg).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FarFieldPattern {
    pub phi_deg: Vec<f64>,
    pub values: Vec<Complex64>,
    pub frequency_ghz: f64,
    pub contour: Option<ContourBox>,
}

impl FarFieldPattern {
    /// Pattern from samples on a uniform full-circle grid.
    pub fn from_samples(phi_deg: Vec<f64>, values: Vec<Complex64>, frequency_ghz: f64) -> Result<Self> {
        let p = Self {
            phi_deg,
            values,
            frequency_ghz,
            contour: None,
        };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<()> {
        let n = self.phi_deg.len();
        if n < 4 || n != self.values.len() {
            return Err(Error::InvalidSpec("pattern needs matching angle and value arrays".into()));
        }
        let step = 360.0 / n as f64;
        for (k, &phi) in self.phi_deg.iter().enumerate() {
            if (phi - (-180.0 + (k + 1) as f64 * step)).abs() > 1e-9 {
                return Err(Error::InvalidSpec(
                    "pattern angles must be uniform over (-180, 180]".into(),
                ));
            }
        }
        if self.values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidSpec("pattern amplitudes must be finite".into()));
        }
        Ok(())
    }

    pub fn step_deg(&self) -> f64 {
        360.0 / self.phi_deg.len() as f64
    }

    pub fn power(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// `20 log10 |F|` relative to the pattern maximum.
    pub fn mag_db(&self) -> Vec<f64> {
        let p = self.power();
        let peak = p.iter().cloned().fold(0.0, f64::max);
        p.iter()
            .map(|&v| {
                if peak == 0.0 {
                    0.0
                } else {
                    10.0 * (v.max(BACK_FLOOR * peak) / peak).log10()
                }
            })
            .collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    /// Pattern reflected about phi = 0.
    pub fn mirrored(&self) -> Self {
        let n = self.values.len();
        // phi_k = -180 + (k+1) s, so -phi_k is sample n - 2 - k (mod n).
        let values = (0..n).map(|k| self.values[(2 * n - 2 - k) % n]).collect();
        Self {
            values,
            ..self.clone()
        }
    }

    /// `phi_deg,re,im,mag_db`; magnitudes are 20 log10 relative to the peak.
    pub fn to_csv(&self) -> String {
        let db = self.mag_db();
        let mut out = String::from("phi_deg,re,im,mag_db\n");
        for ((phi, v), d) in self.phi_deg.iter().zip(&self.values).zip(db) {
            out.push_str(&format!("{},{},{},{}\n", sig9(*phi), sig9(v.re), sig9(v.im), sig9(d)));
        }
        out
    }
}

/// Place the contour `margin_cells` outside the field's exclusion region.
pub fn place_contour(field: &PhasorField, spec: &ContourSpec) -> Result<ContourBox> {
    if spec.margin_cells == 0 {
        return Err(Error::Config("contour margin must be at least one cell".into()));
    }
    let g = &field.grid;
    let ex = field.exclusion;
    let m = spec.margin_cells as i64;
    let i_lo = (ex.y_min / g.delta).floor() as i64 + g.i0 as i64 - m;
    let i_hi = (ex.y_max / g.delta).ceil() as i64 + g.i0 as i64 + m;
    let j_lo = (ex.z_min / g.delta).floor() as i64 + g.j0 as i64 - m;
    let j_hi = (ex.z_max / g.delta).ceil() as i64 + g.j0 as i64 + m;
    let lo = g.pml as i64 + 2;
    if i_lo < lo || j_lo < lo || i_hi > g.ny as i64 - 1 - lo || j_hi > g.nz as i64 - 1 - lo {
        return Err(Error::Config(format!(
            "contour with {} cells margin reaches the absorbing layer; increase padding",
            spec.margin_cells
        )));
    }
    let (i_lo, i_hi, j_lo, j_hi) = (i_lo as usize, i_hi as usize, j_lo as usize, j_hi as usize);
    Ok(ContourBox {
        i_lo,
        i_hi,
        j_lo,
        j_hi,
        y_min: g.y(i_lo as f64),
        y_max: g.y(i_hi as f64),
        z_min: g.z(j_lo as f64),
        z_max: g.z(j_hi as f64),
    })
}

struct ContourSample {
    y: f64,
    z: f64,
    ny: f64,
    nz: f64,
    weight: f64,
    u: Complex64,
    dudn: Complex64,
}

fn contour_samples(field: &PhasorField, c: &ContourBox, k: f64) -> Vec<ContourSample> {
    let g = &field.grid;
    let nz = g.nz;
    let jk = Complex64::new(0.0, k);
    let at = |v: &[Complex64], i: usize, j: usize| v[i * nz + j];
    let mut out = Vec::new();
    // Leapfrog time differencing scales the in-plane phasors by
    // sin(w dt/2)/(w dt/2) relative to the exact derivative of u.
    let half = PI / field.steps_per_period as f64;
    let time_fix = half / half.sin();
    // Fourth-order interpolation from the half-cell positions onto the node.
    let (w1, w3) = (9.0 / 16.0, -1.0 / 16.0);
    let mut push = |i: usize, j: usize, ny: f64, nzn: f64, end: bool| {
        let a = time_fix
            * (w1 * (at(&field.a, i, j - 1) + at(&field.a, i, j))
                + w3 * (at(&field.a, i, j - 2) + at(&field.a, i, j + 1)));
        let b = time_fix
            * (w1 * (at(&field.b, i - 1, j) + at(&field.b, i, j))
                + w3 * (at(&field.b, i - 2, j) + at(&field.b, i + 1, j)));
        out.push(ContourSample {
            y: g.y(i as f64),
            z: g.z(j as f64),
            ny,
            nz: nzn,
            weight: if end { 0.5 * g.delta } else { g.delta },
            u: at(&field.u, i, j),
            dudn: jk * (b * ny - a * nzn),
        });
    };
    for i in c.i_lo..=c.i_hi {
        let end = i == c.i_lo || i == c.i_hi;
        push(i, c.j_lo, 0.0, -1.0, end);
        push(i, c.j_hi, 0.0, 1.0, end);
    }
    for j in c.j_lo..=c.j_hi {
        let end = j == c.j_lo || j == c.j_hi;
        push(c.i_lo, j, -1.0, 0.0, end);
        push(c.i_hi, j, 1.0, 0.0, end);
    }
    out
}

/// Far-field amplitude on a uniform angle grid of `step_deg`.
pub fn ntff(field: &PhasorField, contour: &ContourSpec, step_deg: f64) -> Result<FarFieldPattern> {
    let angles = angle_grid(step_deg)?;
    let c = place_contour(field, contour)?;
    let k = 2.0 * PI / crate::wavelength_mm(field.frequency_ghz);
    let samples = contour_samples(field, &c, k);
    let pref = Complex64::new(0.0, -0.25)
        * (2.0 / (PI * k)).sqrt()
        * Complex64::from_polar(1.0, PI / 4.0);
    let jk = Complex64::new(0.0, k);
    let values = angles
        .iter()
        .map(|&deg| {
            let (sp, cp) = deg.to_radians().sin_cos();
            let mut acc = Complex64::new(0.0, 0.0);
            for s in &samples {
                let ndotr = s.ny * sp + s.nz * cp;
                let kern = Complex64::from_polar(s.weight, k * (s.y * sp + s.z * cp));
                acc += (jk * ndotr * s.u - s.dudn) * kern;
            }
            pref * acc
        })
        .collect();
    let pattern = FarFieldPattern {
        phi_deg: angles,
        values,
        frequency_ghz: field.frequency_ghz,
        contour: Some(c),
    };
    pattern.check()?;
    Ok(pattern)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternMetrics {
    pub peak_deg: f64,
    pub hpbw_deg: f64,
    /// Highest sidelobe relative to the peak; `None` when there is none.
    pub sll_db: Option<f64>,
    pub f2b_db: f64,
    pub dir2d_db: f64,
    /// Peak level drop against the reference pattern; `None` without one.
    pub scan_loss_db: Option<f64>,
}

impl PatternMetrics {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }
}

fn wrap(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}

/// Where the main beam is looked for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BeamWindow {
    /// Anywhere on the circle.
    #[default]
    Full,
    /// Only `|phi| < 90` deg, the half-space the lens radiates into. Lobes
    /// behind the feed plane still count as sidelobes and back radiation.
    Forward,
}

impl BeamWindow {
    fn admits(self, phi_deg: f64) -> bool {
        match self {
            Self::Full => true,
            Self::Forward => phi_deg.abs() < 90.0,
        }
    }
}

fn beam_peak(pattern: &FarFieldPattern, p: &[f64], window: BeamWindow) -> Option<(usize, f64)> {
    p.iter()
        .enumerate()
        .filter(|(k, _)| window.admits(pattern.phi_deg[*k]))
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, &v)| (k, v))
}

/// Scalar metrics of a pattern; powers in dB are 10 log10 ratios.
pub fn pattern_metrics(
    pattern: &FarFieldPattern,
    reference: Option<&FarFieldPattern>,
) -> Result<PatternMetrics> {
    pattern_metrics_in(pattern, reference, BeamWindow::Full)
}

/// As [`pattern_metrics`], with the main beam (and the reference peak)
/// restricted to `window`. A sidelobe outside the window may then exceed the
/// beam, giving a positive SLL.
pub fn pattern_metrics_in(
    pattern: &FarFieldPattern,
    reference: Option<&FarFieldPattern>,
    window: BeamWindow,
) -> Result<PatternMetrics> {
    pattern.check()?;
    let p = pattern.power();
    let n = p.len();
    let step = pattern.step_deg();
    let (ipk, pk) = beam_peak(pattern, &p, window)
        .ok_or_else(|| Error::DegeneratePattern("no samples inside the beam window".into()))?;
    let pmin = p.iter().cloned().fold(f64::INFINITY, f64::min);
    let pmax = p.iter().cloned().fold(0.0, f64::max);
    if !(pk > 0.0) || (pmax - pmin) <= 1e-9 * pmax {
        return Err(Error::DegeneratePattern("pattern is flat".into()));
    }

    // Half-power crossings, interpolated in dB.
    let db = |v: f64| 10.0 * (v.max(BACK_FLOOR * pk) / pk).log10();
    let crossing = |dir: i64| -> Result<f64> {
        for s in 1..n as i64 {
            let cur = p[wrap(ipk as i64 + dir * s, n)];
            if cur < 0.5 * pk {
                let prev = p[wrap(ipk as i64 + dir * (s - 1), n)];
                let (d0, d1) = (db(prev), db(cur));
                let frac = (-3.010_299_956_639_812 - d0) / (d1 - d0);
                return Ok((s as f64 - 1.0 + frac) * step);
            }
        }
        Err(Error::DegeneratePattern("main beam never drops to half power".into()))
    };
    let hpbw = crossing(1)? + crossing(-1)?;

    // Nulls: first rise of the pattern walking away from the peak.
    let null = |dir: i64| -> i64 {
        let mut s = 0;
        while s < n as i64 {
            let here = p[wrap(ipk as i64 + dir * s, n)];
            let next = p[wrap(ipk as i64 + dir * (s + 1), n)];
            if next > here {
                break;
            }
            s += 1;
        }
        s
    };
    let (right, left) = (null(1), null(-1));
    let lobe_width = (right + left + 1) as usize;
    let mut sll: Option<f64> = None;
    if lobe_width < n {
        for s in right + 1..n as i64 - left {
            let k = wrap(ipk as i64 + s, n);
            let before = p[wrap(k as i64 - 1, n)];
            let after = p[wrap(k as i64 + 1, n)];
            if window.admits(pattern.phi_deg[k]) && p[k] >= pk * (1.0 - 1e-9) {
                return Err(Error::DegeneratePattern(format!(
                    "second maximum at {} deg equals the peak",
                    pattern.phi_deg[k]
                )));
            }
            if p[k] > before && p[k] >= after {
                let level = db(p[k]);
                sll = Some(sll.map_or(level, |v: f64| v.max(level)));
            }
        }
    }

    // Sub-sample peak position from a parabola through the dB values.
    let (l, r) = (db(p[wrap(ipk as i64 - 1, n)]), db(p[wrap(ipk as i64 + 1, n)]));
    let curv = l + r;
    let shift = if curv < 0.0 { 0.5 * (l - r) / curv } else { 0.0 };
    let mut peak_deg = pattern.phi_deg[ipk] + shift.clamp(-0.5, 0.5) * step;
    if peak_deg > 180.0 {
        peak_deg -= 360.0;
    } else if peak_deg <= -180.0 {
        peak_deg += 360.0;
    }

    let back = p[wrap(ipk as i64 + (n / 2) as i64, n)].max(BACK_FLOOR * pk);
    let f2b = 10.0 * (pk / back).log10();
    let total: f64 = p.iter().sum::<f64>() * step.to_radians();
    let dir2d = 10.0 * (2.0 * PI * pk / total).log10();

    let scan_loss = match reference {
        Some(r) => {
            let rp = beam_peak(r, &r.power(), window).map_or(0.0, |(_, v)| v);
            if !(rp > 0.0) {
                return Err(Error::DegeneratePattern("reference pattern is zero".into()));
            }
            Some(10.0 * (rp / pk).log10())
        }
        None => None,
    };

    Ok(PatternMetrics {
        peak_deg,
        hpbw_deg: hpbw,
        sll_db: sll,
        f2b_db: f2b,
        dir2d_db: dir2d,
        scan_loss_db: scan_loss,
    })
}

/// Everything needed to turn a feed position into a pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSetup {
    pub sim: SimulationConfig,
    /// Feed distance below the lens face, mm.
    pub focal_standoff_mm: f64,
    pub contour: ContourSpec,
    pub angle_step_deg: f64,
    pub amplitude: f64,
    pub beam_window: BeamWindow,
}

impl ScanSetup {
    pub fn new(sim: SimulationConfig) -> Self {
        Self {
            sim,
            focal_standoff_mm: 28.0,
            contour: ContourSpec::default(),
            angle_step_deg: DEFAULT_ANGLE_STEP_DEG,
            amplitude: 1.0,
            beam_window: BeamWindow::Forward,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScanEntry {
    pub offset_mm: f64,
    pub pattern: FarFieldPattern,
    pub metrics: PatternMetrics,
    pub converged: bool,
    pub periods: usize,
    pub convergence_metric: f64,
}

/// Simulate one feed position and return its far-field pattern.
pub fn feed_pattern(
    spec: &LensSpec,
    medium: &dyn Medium,
    offset_mm: f64,
    setup: &ScanSetup,
) -> Result<(FarFieldPattern, PhasorField)> {
    let z = -(spec.half_thickness() + setup.focal_standoff_mm);
    let src = source_line((offset_mm, z), setup.amplitude, setup.sim.polarization);
    let field = build_simulation(medium, &setup.sim, &[src])?.run_cw()?;
    let pattern = ntff(&field, &setup.contour, setup.angle_step_deg)?;
    Ok((pattern, field))
}

/// One simulation per feed offset; scan loss is taken against offset 0 when present.
pub fn sweep_feeds(
    spec: &LensSpec,
    medium: &dyn Medium,
    offsets: &[f64],
    setup: &ScanSetup,
) -> Result<Vec<ScanEntry>> {
    for &o in offsets {
        if !(o.abs() < spec.radius()) {
            return Err(Error::Domain {
                quantity: "feed offset",
                value: o,
                min: -spec.radius(),
                max: spec.radius(),
            });
        }
    }
    let run = |&o: &f64| feed_pattern(spec, medium, o, setup).map(|(p, f)| (o, p, f));

    #[cfg(feature = "parallel")]
    let runs: Vec<_> = {
        use rayon::prelude::*;
        offsets.par_iter().map(run).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let runs: Vec<_> = offsets.iter().map(run).collect::<Result<_>>()?;

    let reference = runs
        .iter()
        .find(|(o, _, _)| *o == 0.0)
        .map(|(_, p, _)| p.clone());
    runs.into_iter()
        .map(|(offset_mm, pattern, field)| {
            let metrics = pattern_metrics_in(&pattern, reference.as_ref(), setup.beam_window)?;
            Ok(ScanEntry {
                offset_mm,
                pattern,
                metrics,
                converged: field.converged,
                periods: field.periods,
                convergence_metric: field.metric,
            })
        })
        .collect()
}
