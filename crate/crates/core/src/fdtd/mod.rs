//! 2D FDTD on the y–z cross-section with CPML walls and phasor extraction.
//!
//! Both polarizations share one scalar formulation. The out-of-plane
//! component `u` lives on nodes `(i, j)`, `a` on `(i, j + 1/2)` and `b` on
//! `(i + 1/2, j)`:
//!
//! ```text
//! du/dt = (c/alpha_u) (db/dy - da/dz) - source
//! da/dt = -(c/alpha_a) du/dz
//! db/dt =  (c/alpha_b) du/dy
//! ```
//!
//! TE: `u = Ex`, `a = eta0 Hy`, `b = eta0 Hz`, `alpha = (eps_xx, mu_yy, mu_zz)`.
//! TM: `u = eta0 Hx`, `a = -Ey`, `b = -Ez`, `alpha = (mu_xx, eps_yy, eps_zz)`.
//!
//! Lengths are mm. A line source of amplitude `A` volts (`eta0 I` for an
//! electric current `I`, or a magnetic current for TM) radiates
//! `u = -(k A / 4) H0^(2)(k rho)` in free space under `exp(+j omega t)`.

mod cpml;
mod phasor;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::medium::{Medium, Rect};
use crate::wavelength_mm;

use cpml::CpmlAxis;
pub use phasor::{read_phasor_binary, FieldComponent, PhasorDump, PhasorField};

/// Phasor accumulators are sampled this many times per source period.
pub const DFT_SAMPLES_PER_PERIOD: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    /// Out-of-plane electric field (Ex, Hy, Hz).
    #[default]
    Te,
    /// Out-of-plane magnetic field (Hx, Ey, Ez).
    Tm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub frequency_ghz: f64,
    /// Cells per wavelength at the highest index in the medium.
    pub cells_per_wavelength: f64,
    /// Free-space margin around the medium and sources; one wavelength if unset.
    pub padding_mm: Option<f64>,
    /// Explicit non-absorbing region, overriding the automatic one.
    pub domain: Option<Rect>,
    pub pml_cells: usize,
    pub cfl: f64,
    pub tolerance: f64,
    pub max_periods: usize,
    pub ramp_periods: usize,
    pub polarization: Polarization,
}

impl SimulationConfig {
    pub fn new(frequency_ghz: f64) -> Self {
        Self {
            frequency_ghz,
            cells_per_wavelength: 20.0,
            padding_mm: None,
            domain: None,
            pml_cells: 10,
            cfl: 0.99,
            tolerance: 1e-3,
            max_periods: 600,
            ramp_periods: 5,
            polarization: Polarization::Te,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.frequency_ghz.is_finite() && self.frequency_ghz > 0.0) {
            return bad(format!("frequency must be positive, got {}", self.frequency_ghz));
        }
        if !(self.cells_per_wavelength >= 10.0) {
            return bad(format!(
                "cells_per_wavelength must be at least 10, got {}",
                self.cells_per_wavelength
            ));
        }
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return bad(format!("CFL factor must lie in (0, 1), got {}", self.cfl));
        }
        if !(self.tolerance > 0.0) {
            return bad(format!("tolerance must be positive, got {}", self.tolerance));
        }
        if self.pml_cells == 0 {
            return bad("pml_cells must be at least 1".into());
        }
        if self.max_periods < self.ramp_periods + 2 {
            return bad(format!(
                "max_periods ({}) must exceed the ramp ({}) by at least 2",
                self.max_periods, self.ramp_periods
            ));
        }
        if let Some(p) = self.padding_mm {
            if !(p >= 0.0) {
                return bad(format!("padding must be non-negative, got {p}"));
            }
        }
        Ok(())
    }

    pub fn wavelength_mm(&self) -> f64 {
        wavelength_mm(self.frequency_ghz)
    }
}

/// Continuous-wave line source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub y: f64,
    pub z: f64,
    /// Line-current amplitude scaled by eta0, volts.
    pub amplitude: f64,
    pub polarization: Polarization,
}

/// Out-of-plane line source at `position` (y, z) in mm.
pub fn source_line(position: (f64, f64), amplitude: f64, polarization: Polarization) -> SourceSpec {
    SourceSpec {
        y: position.0,
        z: position.1,
        amplitude,
        polarization,
    }
}

/// Uniform Yee grid. Node `(i, j)` is at `((i - i0) delta, (j - j0) delta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimGrid {
    pub delta: f64,
    pub ny: usize,
    pub nz: usize,
    pub i0: usize,
    pub j0: usize,
    pub pml: usize,
}

impl SimGrid {
    pub fn y(&self, i: f64) -> f64 {
        (i - self.i0 as f64) * self.delta
    }

    pub fn z(&self, j: f64) -> f64 {
        (j - self.j0 as f64) * self.delta
    }

    pub fn len(&self) -> usize {
        self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn nearest_node(&self, y: f64, z: f64) -> (i64, i64) {
        (
            (y / self.delta).round() as i64 + self.i0 as i64,
            (z / self.delta).round() as i64 + self.j0 as i64,
        )
    }

    /// Node strictly inside the non-absorbing region.
    pub fn is_interior(&self, i: i64, j: i64) -> bool {
        let p = self.pml as i64;
        i > p && i < self.ny as i64 - 1 - p && j > p && j < self.nz as i64 - 1 - p
    }
}

#[derive(Debug, Clone, Copy)]
struct PlacedSource {
    index: usize,
    /// `cu * amplitude / delta`.
    gain: f64,
}

/// Complete solver state. Owned by one simulation.
pub struct YeeState {
    config: SimulationConfig,
    grid: SimGrid,
    exclusion: Rect,
    courant: f64,
    steps_per_period: usize,
    omega_dt: f64,
    step: u64,

    cu: Vec<f64>,
    ca: Vec<f64>,
    cb: Vec<f64>,
    u: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,

    psi_uy: Vec<f64>,
    psi_uz: Vec<f64>,
    psi_az: Vec<f64>,
    psi_by: Vec<f64>,
    pml_y: CpmlAxis,
    pml_z: CpmlAxis,

    sources: Vec<PlacedSource>,

    acc_u: Vec<Complex64>,
    acc_a: Vec<Complex64>,
    acc_b: Vec<Complex64>,
}

/// Set up grid, material coefficients and sources.
pub fn build_simulation(
    medium: &dyn Medium,
    config: &SimulationConfig,
    sources: &[SourceSpec],
) -> Result<YeeState> {
    config.validate()?;
    for s in sources {
        if s.polarization != config.polarization {
            return Err(Error::Config(format!(
                "source at ({}, {}) is {:?} but the simulation is {:?}",
                s.y, s.z, s.polarization, config.polarization
            )));
        }
        if !(s.y.is_finite() && s.z.is_finite() && s.amplitude.is_finite()) {
            return Err(Error::Config("source parameters must be finite".into()));
        }
    }
    let (eps_max, mu_max) = medium.peak_material();
    if !(eps_max >= 1.0) || !(mu_max > 0.0) {
        return Err(Error::Config(format!(
            "invalid material map: peak permittivity {eps_max} < 1"
        )));
    }

    let lambda0 = config.wavelength_mm();
    let index_max = (eps_max * mu_max.max(1.0)).sqrt();
    let delta = lambda0 / (config.cells_per_wavelength * index_max);
    let pml = config.pml_cells;

    let mut exclusion = medium.extent();
    for s in sources {
        let p = Rect::point(s.y, s.z);
        exclusion = Some(exclusion.map_or(p, |e| e.union(&p)));
    }
    let exclusion = exclusion.unwrap_or(Rect::point(0.0, 0.0));
    let region = match config.domain {
        Some(d) => d,
        None => {
            let pad = config.padding_mm.unwrap_or(lambda0);
            Rect {
                y_min: exclusion.y_min - pad,
                y_max: exclusion.y_max + pad,
                z_min: exclusion.z_min - pad,
                z_max: exclusion.z_max + pad,
            }
        }
    };
    if !(region.y_max > region.y_min && region.z_max > region.z_min) {
        return Err(Error::Config("computational region is empty".into()));
    }

    // Symmetric in y about the axis so mirrored feeds see mirrored grids.
    let half_y = region.y_min.abs().max(region.y_max.abs());
    let my = (half_y / delta).ceil() as usize + pml;
    let j_lo = (region.z_min / delta).floor() as i64 - pml as i64;
    let j_hi = (region.z_max / delta).ceil() as i64 + pml as i64;
    let grid = SimGrid {
        delta,
        ny: 2 * my + 1,
        nz: (j_hi - j_lo + 1) as usize,
        i0: my,
        j0: (-j_lo) as usize,
        pml,
    };

    // Time step: an integer number of steps per period, a multiple of the DFT stride.
    let max_courant = config.cfl / 2f64.sqrt();
    let raw = lambda0 / (delta * max_courant);
    let steps_per_period =
        ((raw / DFT_SAMPLES_PER_PERIOD as f64).ceil() as usize).max(1) * DFT_SAMPLES_PER_PERIOD;
    let courant = lambda0 / (delta * steps_per_period as f64);
    let omega_dt = 2.0 * PI / steps_per_period as f64;

    let (ny, nz) = (grid.ny, grid.nz);
    let n = grid.len();
    let mut cu = vec![0.0; n];
    let mut ca = vec![0.0; n];
    let mut cb = vec![0.0; n];
    for i in 0..ny {
        let y = grid.y(i as f64);
        let yh = grid.y(i as f64 + 0.5);
        for j in 0..nz {
            let z = grid.z(j as f64);
            let zh = grid.z(j as f64 + 0.5);
            let node = medium.material_at(y, z);
            let at_a = medium.material_at(y, zh);
            let at_b = medium.material_at(yh, z);
            let (au, aa, ab) = match config.polarization {
                Polarization::Te => (node.eps_xx, at_a.mu_yy, at_b.mu_zz),
                Polarization::Tm => (node.mu_xx, at_a.eps_yy, at_b.eps_zz),
            };
            if !(au > 0.0 && aa > 0.0 && ab > 0.0) {
                return Err(Error::Config(format!(
                    "non-positive material coefficient at ({y}, {z})"
                )));
            }
            let k = i * nz + j;
            cu[k] = courant / au;
            ca[k] = courant / aa;
            cb[k] = courant / ab;
        }
    }

    let mut placed = Vec::with_capacity(sources.len());
    for s in sources {
        let (i, j) = grid.nearest_node(s.y, s.z);
        if !grid.is_interior(i, j) {
            return Err(Error::Config(format!(
                "source at ({}, {}) mm lies in or beyond the absorbing layer",
                s.y, s.z
            )));
        }
        let index = i as usize * nz + j as usize;
        placed.push(PlacedSource {
            index,
            gain: cu[index] * s.amplitude / delta,
        });
    }

    Ok(YeeState {
        config: *config,
        grid,
        exclusion,
        courant,
        steps_per_period,
        omega_dt,
        step: 0,
        cu,
        ca,
        cb,
        u: vec![0.0; n],
        a: vec![0.0; n],
        b: vec![0.0; n],
        psi_uy: vec![0.0; n],
        psi_uz: vec![0.0; n],
        psi_az: vec![0.0; n],
        psi_by: vec![0.0; n],
        pml_y: CpmlAxis::new(ny, pml, courant, omega_dt),
        pml_z: CpmlAxis::new(nz, pml, courant, omega_dt),
        sources: placed,
        acc_u: vec![Complex64::new(0.0, 0.0); n],
        acc_a: vec![Complex64::new(0.0, 0.0); n],
        acc_b: vec![Complex64::new(0.0, 0.0); n],
    })
}

impl YeeState {
    pub fn grid(&self) -> &SimGrid {
        &self.grid
    }

    pub fn config(&self) -> &SimulationConfig {
        &self.config
    }

    pub fn steps_per_period(&self) -> usize {
        self.steps_per_period
    }

    /// `c dt / delta`.
    pub fn courant(&self) -> f64 {
        self.courant
    }

    pub fn dt_seconds(&self) -> f64 {
        1.0 / (self.config.frequency_ghz * 1e9 * self.steps_per_period as f64)
    }

    pub fn timestep(&self) -> u64 {
        self.step
    }

    /// Region the NTFF contour has to enclose: medium extent plus sources.
    pub fn exclusion(&self) -> Rect {
        self.exclusion
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn u_at(&self, i: usize, j: usize) -> f64 {
        self.u[i * self.grid.nz + j]
    }

    /// Mutable access to the out-of-plane field, for injecting initial conditions.
    pub fn u_mut(&mut self) -> &mut [f64] {
        &mut self.u
    }

    /// Discrete field energy in normalized units (alpha-weighted sum of squares).
    pub fn energy(&self) -> f64 {
        let s = self.courant;
        let mut e = 0.0;
        for k in 0..self.u.len() {
            e += s / self.cu[k] * self.u[k] * self.u[k]
                + s / self.ca[k] * self.a[k] * self.a[k]
                + s / self.cb[k] * self.b[k] * self.b[k];
        }
        0.5 * e
    }

    fn source_waveform(&self, t_steps: f64) -> f64 {
        let phase = self.omega_dt * t_steps;
        let ramp_len = (self.config.ramp_periods * self.steps_per_period) as f64;
        let ramp = if t_steps >= ramp_len || ramp_len == 0.0 {
            1.0
        } else {
            0.5 * (1.0 - (PI * t_steps / ramp_len).cos())
        };
        ramp * phase.cos()
    }

    /// Advance one time step with the continuous-wave sources.
    pub fn step(&mut self) -> Result<()> {
        let n = self.step as f64;
        let drive = self.source_waveform(n + 0.5);
        self.advance(drive);
        self.check_finite()
    }

    /// Advance one step with an explicit source multiplier instead of the CW waveform.
    pub fn step_with_drive(&mut self, drive: f64) -> Result<()> {
        self.advance(drive);
        self.check_finite()
    }

    fn check_finite(&self) -> Result<()> {
        let nz = self.grid.nz;
        let centre = self.grid.i0 * nz + self.grid.j0;
        let probes = self.sources.iter().map(|s| s.index).chain([centre]);
        for k in probes {
            if !(self.u[k].is_finite() && self.a[k].is_finite() && self.b[k].is_finite()) {
                return Err(Error::Instability { step: self.step });
            }
        }
        Ok(())
    }

    fn advance(&mut self, drive: f64) {
        self.update_a();
        self.update_b();
        self.update_u();
        for s in &self.sources {
            self.u[s.index] -= s.gain * drive;
        }
        self.step += 1;
        let stride = self.steps_per_period / DFT_SAMPLES_PER_PERIOD;
        if self.step % stride as u64 == 0 {
            self.accumulate();
        }
    }

    fn update_a(&mut self) {
        let (ny, nz) = (self.grid.ny, self.grid.nz);
        let pz = &self.pml_z.half;
        for i in 0..ny {
            let row = i * nz..(i + 1) * nz;
            let u = &self.u[row.clone()];
            let ca = &self.ca[row.clone()];
            let a = &mut self.a[row.clone()];
            for j in 0..nz - 1 {
                a[j] -= ca[j] * (u[j + 1] - u[j]);
            }
            let psi = &mut self.psi_az[row];
            for &j in &pz.active {
                let d = u[j + 1] - u[j];
                psi[j] = pz.b[j] * psi[j] + pz.c[j] * d;
                a[j] -= ca[j] * (d * pz.kinv_minus_one[j] + psi[j]);
            }
        }
    }

    fn update_b(&mut self) {
        let (ny, nz) = (self.grid.ny, self.grid.nz);
        for i in 0..ny - 1 {
            let (lo, hi) = self.u.split_at(( i + 1) * nz);
            let u0 = &lo[i * nz..];
            let u1 = &hi[..nz];
            let row = i * nz..(i + 1) * nz;
            let cb = &self.cb[row.clone()];
            let b = &mut self.b[row.clone()];
            for j in 0..nz {
                b[j] += cb[j] * (u1[j] - u0[j]);
            }
        }
        let py = &self.pml_y.half;
        for &i in &py.active {
            let row = i * nz..(i + 1) * nz;
            let u0 = &self.u[row.clone()];
            let u1 = &self.u[(i + 1) * nz..(i + 2) * nz];
            let cb = &self.cb[row.clone()];
            let b = &mut self.b[row.clone()];
            let psi = &mut self.psi_by[row];
            let (kb, bb, cc) = (py.kinv_minus_one[i], py.b[i], py.c[i]);
            for j in 0..nz {
                let d = u1[j] - u0[j];
                psi[j] = bb * psi[j] + cc * d;
                b[j] += cb[j] * (d * kb + psi[j]);
            }
        }
    }

    fn update_u(&mut self) {
        let (ny, nz) = (self.grid.ny, self.grid.nz);
        let pz = &self.pml_z.node;
        for i in 1..ny - 1 {
            let row = i * nz..(i + 1) * nz;
            let b0 = &self.b[(i - 1) * nz..i * nz];
            let b1 = &self.b[row.clone()];
            let a = &self.a[row.clone()];
            let cu = &self.cu[row.clone()];
            let u = &mut self.u[row.clone()];
            for j in 1..nz - 1 {
                u[j] += cu[j] * ((b1[j] - b0[j]) - (a[j] - a[j - 1]));
            }
            let psi = &mut self.psi_uz[row];
            for &j in &pz.active {
                if j == 0 || j == nz - 1 {
                    continue;
                }
                let d = a[j] - a[j - 1];
                psi[j] = pz.b[j] * psi[j] + pz.c[j] * d;
                u[j] -= cu[j] * (d * pz.kinv_minus_one[j] + psi[j]);
            }
        }
        let py = &self.pml_y.node;
        for &i in &py.active {
            if i == 0 || i == ny - 1 {
                continue;
            }
            let row = i * nz..(i + 1) * nz;
            let b0 = &self.b[(i - 1) * nz..i * nz];
            let b1 = &self.b[row.clone()];
            let cu = &self.cu[row.clone()];
            let u = &mut self.u[row.clone()];
            let psi = &mut self.psi_uy[row];
            let (kb, bb, cc) = (py.kinv_minus_one[i], py.b[i], py.c[i]);
            for j in 1..nz - 1 {
                let d = b1[j] - b0[j];
                psi[j] = bb * psi[j] + cc * d;
                u[j] += cu[j] * (d * kb + psi[j]);
            }
        }
    }

    /// Add the current samples to the running single-frequency transform.
    /// `u` sits at `step dt`, `a` and `b` half a step earlier.
    fn accumulate(&mut self) {
        let t = self.step as f64;
        let wu = Complex64::from_polar(1.0, -self.omega_dt * t);
        let wh = Complex64::from_polar(1.0, -self.omega_dt * (t - 0.5));
        for (acc, &v) in self.acc_u.iter_mut().zip(&self.u) {
            *acc += wu * v;
        }
        for (acc, &v) in self.acc_a.iter_mut().zip(&self.a) {
            *acc += wh * v;
        }
        for (acc, &v) in self.acc_b.iter_mut().zip(&self.b) {
            *acc += wh * v;
        }
    }

    fn reset_accumulators(&mut self) {
        let zero = Complex64::new(0.0, 0.0);
        self.acc_u.fill(zero);
        self.acc_a.fill(zero);
        self.acc_b.fill(zero);
    }

    /// Relative L2 change of the `u` phasor between two periods, non-absorbing region only.
    fn change_metric(&self, current: &[Complex64], previous: &[Complex64]) -> f64 {
        let g = &self.grid;
        let (mut diff, mut norm) = (0.0, 0.0);
        for i in g.pml..g.ny - g.pml {
            for j in g.pml..g.nz - g.pml {
                let k = i * g.nz + j;
                diff += (current[k] - previous[k]).norm_sqr();
                norm += current[k].norm_sqr();
            }
        }
        if norm == 0.0 {
            0.0
        } else {
            (diff / norm).sqrt()
        }
    }

    /// Drive the CW sources until the phasors settle.
    ///
    /// After the ramp, every whole period is transformed and compared with the
    /// previous one; the run stops when the relative change drops below the
    /// tolerance or `max_periods` is reached (then `converged` is false).
    pub fn run_cw(&mut self) -> Result<PhasorField> {
        let n = self.steps_per_period;
        let scale = 2.0 / DFT_SAMPLES_PER_PERIOD as f64;
        let mut previous: Option<Vec<Complex64>> = None;
        let mut history = Vec::new();
        let mut metric = f64::INFINITY;
        let mut converged = false;
        let mut periods = 0;

        while periods < self.config.max_periods {
            self.reset_accumulators();
            for _ in 0..n {
                self.step()?;
            }
            periods += 1;
            if self.acc_u.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                return Err(Error::Instability { step: self.step });
            }
            if periods < self.config.ramp_periods {
                continue;
            }
            let current: Vec<Complex64> = self.acc_u.iter().map(|c| c * scale).collect();
            if let Some(prev) = &previous {
                metric = self.change_metric(&current, prev);
                history.push(metric);
                if metric <= self.config.tolerance {
                    converged = true;
                    previous = Some(current);
                    break;
                }
            }
            previous = Some(current);
        }

        let u = previous.unwrap_or_else(|| vec![Complex64::new(0.0, 0.0); self.grid.len()]);
        Ok(PhasorField {
            grid: self.grid,
            polarization: self.config.polarization,
            frequency_ghz: self.config.frequency_ghz,
            steps_per_period: self.steps_per_period,
            exclusion: self.exclusion,
            u,
            a: self.acc_a.iter().map(|c| c * scale).collect(),
            b: self.acc_b.iter().map(|c| c * scale).collect(),
            metric,
            converged,
            periods,
            metric_history: history,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::medium::{Block, CircularLuneburg, Vacuum};

    fn small_config() -> SimulationConfig {
        let mut c = SimulationConfig::new(32.0);
        c.padding_mm = Some(5.0);
        c
    }

    #[test]
    fn vacuum_spacing_and_timestep() {
        let cfg = SimulationConfig::new(32.0);
        let s = source_line((0.0, 0.0), 1.0, Polarization::Te);
        let st = build_simulation(&Vacuum, &cfg, &[s]).unwrap();
        let lambda0: f64 = 299.792_458 / 32.0;
        assert!((lambda0 - 9.368_514_3).abs() < 1e-6);
        assert!(st.grid().delta <= 0.468_43 + 1e-9);
        assert!((st.grid().delta - lambda0 / 20.0).abs() < 1e-12);
        // Stability bound, c dt <= cfl delta / sqrt(2).
        assert!(st.courant() <= 0.99 / 2f64.sqrt());
        assert_eq!(st.steps_per_period() % DFT_SAMPLES_PER_PERIOD, 0);
    }

    #[test]
    fn lens_spacing_scales_with_peak_index() {
        let block = Block {
            rect: Rect {
                y_min: -2.0,
                y_max: 2.0,
                z_min: -1.0,
                z_max: 1.0,
            },
            eps: 16.0,
        };
        let st = build_simulation(&block, &small_config(), &[]).unwrap();
        let lambda0: f64 = 299.792_458 / 32.0;
        assert!((st.grid().delta - lambda0 / 80.0).abs() < 1e-12);
    }

    #[test]
    fn timestep_arithmetic() {
        // delta = 0.1 mm, factor 0.99: dt = 0.99 * 1e-4 m / (c sqrt 2).
        let dt = 0.99 * 1e-4 / (299_792_458.0 * 2f64.sqrt());
        assert!((dt - 2.335_067_793e-13).abs() < 1e-21);
        // The rounded figure usually quoted is within 0.1 %.
        assert!((dt / 2.3335e-13 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn zero_source_stays_zero() {
        let s = source_line((0.0, 0.0), 0.0, Polarization::Te);
        let mut st = build_simulation(&Vacuum, &small_config(), &[s]).unwrap();
        for _ in 0..300 {
            st.step().unwrap();
        }
        assert!(st.u().iter().all(|&v| v == 0.0));
        assert_eq!(st.energy(), 0.0);
    }

    #[test]
    fn zero_source_converges_at_first_check() {
        let s = source_line((0.0, 0.0), 0.0, Polarization::Te);
        let mut st = build_simulation(&Vacuum, &small_config(), &[s]).unwrap();
        let field = st.run_cw().unwrap();
        assert!(field.converged);
        assert_eq!(field.metric_history.len(), 1);
        assert_eq!(field.periods, st.config().ramp_periods + 1);
        assert!(field.u.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn rejects_source_in_absorber() {
        let mut cfg = small_config();
        cfg.domain = Some(Rect {
            y_min: -5.0,
            y_max: 5.0,
            z_min: -5.0,
            z_max: 5.0,
        });
        let s = source_line((0.0, 5.3), 1.0, Polarization::Te);
        assert!(matches!(
            build_simulation(&Vacuum, &cfg, &[s]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn rejects_bad_config_and_maps() {
        let mut cfg = small_config();
        cfg.cells_per_wavelength = 4.0;
        assert!(cfg.validate().is_err());
        let mut cfg = small_config();
        cfg.cfl = 1.0;
        assert!(cfg.validate().is_err());
        let s = source_line((0.0, 0.0), 1.0, Polarization::Tm);
        assert!(build_simulation(&Vacuum, &small_config(), &[s]).is_err());

        struct Thin;
        impl Medium for Thin {
            fn material_at(&self, _: f64, _: f64) -> crate::DiagonalTensorPair {
                crate::DiagonalTensorPair::isotropic(0.5)
            }
            fn extent(&self) -> Option<Rect> {
                None
            }
            fn peak_material(&self) -> (f64, f64) {
                (0.5, 1.0)
            }
        }
        assert!(build_simulation(&Thin, &small_config(), &[]).is_err());
    }

    #[test]
    fn superluminal_cells_blow_up() {
        let block = Block {
            rect: Rect {
                y_min: -3.0,
                y_max: 3.0,
                z_min: -3.0,
                z_max: 3.0,
            },
            eps: 0.02,
        };
        let s = source_line((0.0, 0.0), 1.0, Polarization::Te);
        let mut st = build_simulation(&block, &small_config(), &[s]).unwrap();
        let err = st.run_cw().unwrap_err();
        assert!(matches!(err, Error::Instability { .. }), "{err}");
    }

    #[test]
    fn lossless_energy_stays_bounded() {
        let s = source_line((0.0, -22.0), 1.0, Polarization::Te);
        let mut cfg = small_config();
        cfg.cells_per_wavelength = 10.0;
        let mut st = build_simulation(&CircularLuneburg { radius: 20.0 }, &cfg, &[s]).unwrap();
        let n = st.steps_per_period();
        let mut peak: f64 = 0.0;
        let mut late: f64 = 0.0;
        for p in 0..200 {
            for _ in 0..n {
                st.step().unwrap();
            }
            let e = st.energy();
            assert!(e.is_finite());
            if p < 100 {
                peak = peak.max(e);
            } else {
                late = late.max(e);
            }
        }
        assert!(peak > 0.0);
        assert!(late < 1.5 * peak, "energy grew from {peak} to {late}");
    }
}
