//! TOML configuration driving the whole pipeline.
//!
//! ```toml
//! [lens]
//! radius_mm = 32.0
//! half_thickness_mm = 4.0
//! weight_amplitude = 1.0
//! weight_period_mm = 10.0
//! eps_floor = 1.0
//!
//! [stack]
//! n_layers = 17
//! layer_thickness_mm = 0.508
//! pixel_pitch_mm = 1.6
//! pixels_per_side = 41
//! # calibration = "cells.csv"   (relative to this file; placeholder if absent)
//!
//! [sim]
//! frequency_ghz = 32.0
//! polarization = "te"
//! feed_offsets_mm = [0.0, 8.0, 16.0, 24.0]
//! focal_standoff_mm = 28.0
//!
//! [output]
//! directory = "out"
//! phasor_format = "csv"
//! ```
//!
//! Every key has a default, so an empty file is a valid configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::discretize::{CalibrationTable, StackGeometry};
use crate::error::{Error, Result};
use crate::farfield::{BeamWindow, ContourSpec, ScanSetup, DEFAULT_ANGLE_STEP_DEG};
use crate::fdtd::{Polarization, SimulationConfig};
use crate::lens::{LensSpec, RadiusMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LensSection {
    pub radius_mm: f64,
    pub half_thickness_mm: f64,
    pub weight_amplitude: f64,
    pub weight_period_mm: f64,
    /// Lower clamp of the reduced permittivity.
    pub eps_floor: f64,
    pub radius_mode: RadiusMode,
}

impl Default for LensSection {
    fn default() -> Self {
        Self {
            radius_mm: 32.0,
            half_thickness_mm: 4.0,
            weight_amplitude: 1.0,
            weight_period_mm: 10.0,
            eps_floor: 1.0,
            radius_mode: RadiusMode::Literal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StackSection {
    pub n_layers: usize,
    pub layer_thickness_mm: f64,
    pub pixel_pitch_mm: f64,
    pub pixels_per_side: usize,
    pub calibration: Option<PathBuf>,
}

impl Default for StackSection {
    fn default() -> Self {
        let g = StackGeometry::default();
        Self {
            n_layers: g.n_layers,
            layer_thickness_mm: g.layer_thickness_mm,
            pixel_pitch_mm: g.pixel_pitch_mm,
            pixels_per_side: g.pixels_per_side,
            calibration: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub frequency_ghz: f64,
    pub polarization: Polarization,
    pub cells_per_wavelength: f64,
    pub padding_mm: Option<f64>,
    pub pml_cells: usize,
    pub cfl: f64,
    pub tolerance: f64,
    pub max_periods: usize,
    pub ramp_periods: usize,
    pub feed_offsets_mm: Vec<f64>,
    pub focal_standoff_mm: f64,
    pub angle_step_deg: f64,
    pub contour_margin_cells: usize,
    pub beam_window: BeamWindow,
}

impl Default for SimSection {
    fn default() -> Self {
        let s = SimulationConfig::new(32.0);
        Self {
            frequency_ghz: s.frequency_ghz,
            polarization: s.polarization,
            cells_per_wavelength: s.cells_per_wavelength,
            padding_mm: s.padding_mm,
            pml_cells: s.pml_cells,
            cfl: s.cfl,
            tolerance: s.tolerance,
            max_periods: s.max_periods,
            ramp_periods: s.ramp_periods,
            feed_offsets_mm: vec![0.0, 8.0, 16.0, 24.0],
            focal_standoff_mm: 28.0,
            angle_step_deg: DEFAULT_ANGLE_STEP_DEG,
            contour_margin_cells: ContourSpec::default().margin_cells,
            beam_window: BeamWindow::Forward,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhasorFormat {
    #[default]
    Csv,
    Binary,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub phasor_format: PhasorFormat,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            phasor_format: PhasorFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub lens: LensSection,
    pub stack: StackSection,
    pub sim: SimSection,
    pub output: OutputSection,
}

/// A configuration that passed every check, with its derived objects.
#[derive(Debug, Clone)]
pub struct ValidatedConfig {
    pub raw: PipelineConfig,
    pub spec: LensSpec,
    pub geometry: StackGeometry,
    pub calibration: CalibrationTable,
    pub scan: ScanSetup,
}

fn key_error(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key}: {msg}"))
}

impl PipelineConfig {
    /// Parse TOML text; relative file references resolve against the directory of `path`.
    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string().trim_end().to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let Some(c) = &cfg.stack.calibration {
            if c.is_relative() {
                cfg.stack.calibration = Some(base.join(c));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(path, &text)
    }

    pub fn lens_spec(&self) -> Result<LensSpec> {
        let l = &self.lens;
        let checks: [(&str, f64, bool, &str); 5] = [
            ("lens.radius_mm", l.radius_mm, l.radius_mm > 0.0, "must be positive"),
            (
                "lens.half_thickness_mm",
                l.half_thickness_mm,
                l.half_thickness_mm > 0.0 && l.half_thickness_mm < l.radius_mm,
                "must lie in (0, radius_mm)",
            ),
            ("lens.weight_amplitude", l.weight_amplitude, l.weight_amplitude > 0.0, "must be positive"),
            (
                "lens.weight_period_mm",
                l.weight_period_mm,
                l.weight_period_mm > 2.0 * l.half_thickness_mm,
                "must exceed 2 half_thickness_mm so the weight stays positive",
            ),
            ("lens.eps_floor", l.eps_floor, l.eps_floor >= 1.0, "must be at least 1"),
        ];
        for (key, v, ok, msg) in checks {
            if !v.is_finite() || !ok {
                return Err(key_error(key, format!("{v} {msg}")));
            }
        }
        LensSpec::new(
            l.radius_mm,
            l.half_thickness_mm,
            l.weight_amplitude,
            l.weight_period_mm,
            l.eps_floor,
        )
    }

    pub fn simulation(&self) -> Result<SimulationConfig> {
        let s = &self.sim;
        let cfg = SimulationConfig {
            frequency_ghz: s.frequency_ghz,
            cells_per_wavelength: s.cells_per_wavelength,
            padding_mm: s.padding_mm,
            domain: None,
            pml_cells: s.pml_cells,
            cfl: s.cfl,
            tolerance: s.tolerance,
            max_periods: s.max_periods,
            ramp_periods: s.ramp_periods,
            polarization: s.polarization,
        };
        cfg.validate().map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("sim: {m}")),
            other => other,
        })?;
        Ok(cfg)
    }

    /// Check everything and load referenced files, before any stage runs.
    pub fn validate(&self) -> Result<ValidatedConfig> {
        let spec = self.lens_spec()?;
        let st = &self.stack;
        let geometry = StackGeometry {
            n_layers: st.n_layers,
            layer_thickness_mm: st.layer_thickness_mm,
            pixel_pitch_mm: st.pixel_pitch_mm,
            pixels_per_side: st.pixels_per_side,
        };
        geometry.check_against(&spec).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("stack: {m}")),
            other => other,
        })?;
        let calibration = match &st.calibration {
            Some(path) => {
                if !path.is_file() {
                    return Err(key_error(
                        "stack.calibration",
                        format!("file {} does not exist", path.display()),
                    ));
                }
                CalibrationTable::load(path)?
            }
            None => CalibrationTable::placeholder(),
        };
        let sim = self.simulation()?;
        let s = &self.sim;
        if s.feed_offsets_mm.is_empty() {
            return Err(key_error("sim.feed_offsets_mm", "needs at least one offset"));
        }
        for &o in &s.feed_offsets_mm {
            if !(o.is_finite() && o.abs() < spec.radius()) {
                return Err(key_error(
                    "sim.feed_offsets_mm",
                    format!("offset {o} is outside (-radius_mm, radius_mm)"),
                ));
            }
        }
        if !(s.focal_standoff_mm.is_finite() && s.focal_standoff_mm > 0.0) {
            return Err(key_error("sim.focal_standoff_mm", format!("{} must be positive", s.focal_standoff_mm)));
        }
        crate::farfield::angle_grid(s.angle_step_deg)
            .map_err(|_| key_error("sim.angle_step_deg", format!("{} must divide 360", s.angle_step_deg)))?;
        if s.contour_margin_cells == 0 {
            return Err(key_error("sim.contour_margin_cells", "must be at least 1"));
        }
        let scan = ScanSetup {
            sim,
            focal_standoff_mm: s.focal_standoff_mm,
            contour: ContourSpec {
                margin_cells: s.contour_margin_cells,
            },
            angle_step_deg: s.angle_step_deg,
            amplitude: 1.0,
            beam_window: s.beam_window,
        };
        Ok(ValidatedConfig {
            raw: self.clone(),
            spec,
            geometry,
            calibration,
            scan,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
