//! File-producing pipeline stages. Each stage writes into its own directory
//! under the output root and finishes with a `manifest.json` listing every
//! file it wrote with its SHA-256.
//!
//! Units: lengths mm, frequencies GHz, angles degrees. Power ratios (SLL,
//! F2B, scan loss, directivity) are 10 log10; pattern magnitudes
//! (`mag_db`) are 20 log10 of the field.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{PhasorFormat, ValidatedConfig};
use crate::discretize::{assign_unit_cells, build_layer_stack, clamp_report, export_stack, reconstruct_map, ClampReport};
use crate::error::{Error, Result};
use crate::farfield::{feed_pattern, pattern_metrics_in, sweep_feeds, PatternMetrics, ScanEntry};
use crate::fdtd::{FieldComponent, PhasorField};
use crate::io::{sha256_hex, sig9, write_bytes, write_text};
use crate::lens::{sample_material, Grid2, LensProfile, MapData, MaterialMap, ProfileOptions};
use crate::retrieval::{params_to_csv, parse_sweep_csv, retrieve_sweep};

/// Collects files for one stage and writes its manifest.
#[derive(Debug)]
struct Outputs {
    stage: &'static str,
    dir: PathBuf,
    files: BTreeMap<String, (String, usize)>,
}

#[derive(Serialize)]
struct ManifestEntry<'a> {
    path: &'a str,
    sha256: &'a str,
    bytes: usize,
}

#[derive(Serialize)]
struct Manifest<'a> {
    stage: &'a str,
    version: &'a str,
    files: Vec<ManifestEntry<'a>>,
}

impl Outputs {
    fn new(root: &Path, stage: &'static str) -> Self {
        Self {
            stage,
            dir: root.join(stage),
            files: BTreeMap::new(),
        }
    }

    fn record(&mut self, path: &Path, bytes: &[u8]) {
        let rel = path
            .strip_prefix(&self.dir)
            .unwrap_or(path)
            .to_string_lossy()
            .replace('\\', "/");
        self.files.insert(rel, (sha256_hex(bytes), bytes.len()));
    }

    fn text(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        write_text(&path, contents)?;
        self.record(&path, contents.as_bytes());
        Ok(())
    }

    fn bytes(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        write_bytes(&path, contents)?;
        self.record(&path, contents);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let s = serde_json::to_string_pretty(value).expect("serializable") + "\n";
        self.text(name, &s)
    }

    /// Pick up files written by other code into this stage directory.
    fn adopt(&mut self, paths: &[PathBuf]) -> Result<()> {
        for p in paths {
            let bytes = std::fs::read(p).map_err(|e| Error::io(p, e))?;
            self.record(p, &bytes);
        }
        Ok(())
    }

    fn finish(self) -> Result<StageReport> {
        let manifest = Manifest {
            stage: self.stage,
            version: env!("CARGO_PKG_VERSION"),
            files: self
                .files
                .iter()
                .map(|(p, (h, n))| ManifestEntry {
                    path: p,
                    sha256: h,
                    bytes: *n,
                })
                .collect(),
        };
        let path = self.dir.join("manifest.json");
        let s = serde_json::to_string_pretty(&manifest).expect("serializable") + "\n";
        write_text(&path, &s)?;
        let mut files: Vec<PathBuf> = self.files.keys().map(|k| self.dir.join(k)).collect();
        files.push(path);
        Ok(StageReport { dir: self.dir, files })
    }
}

/// What a stage wrote.
#[derive(Debug, Clone)]
pub struct StageReport {
    pub dir: PathBuf,
    /// Every file, the manifest last.
    pub files: Vec<PathBuf>,
}

fn profile(cfg: &ValidatedConfig, options: ProfileOptions) -> Result<LensProfile> {
    LensProfile::new(cfg.spec, options.with_radius_mode(cfg.raw.lens.radius_mode))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MapStats {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MaterialSummary {
    /// Weighted reduced permittivity at the lens centre.
    pub center_eps: f64,
    /// Weighted reduced permittivity on the flat face above the centre.
    pub surface_eps: f64,
    pub surface_eps_unweighted: f64,
    pub grid: Grid2,
    pub tensor_eps_yy: MapStats,
    pub reduced: MapStats,
    pub weighted: MapStats,
}

fn stats(map: &MaterialMap) -> MapStats {
    let vals: Vec<f64> = match map.data() {
        MapData::Scalar(v) => v.clone(),
        MapData::Tensor(v) => v.iter().map(|t| t.eps_yy).collect(),
    };
    MapStats {
        min: vals.iter().cloned().fold(f64::INFINITY, f64::min),
        max: vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Full tensor, reduced and reduced + weighted maps on the default lens grid.
pub fn cmd_material(cfg: &ValidatedConfig, root: &Path) -> Result<(StageReport, MaterialSummary)> {
    let grid = Grid2::for_lens(&cfg.spec);
    let tensor = sample_material(&profile(cfg, ProfileOptions::TENSOR)?, &grid)?;
    let reduced_p = profile(cfg, ProfileOptions::REDUCED)?;
    let weighted_p = profile(cfg, ProfileOptions::WEIGHTED)?;
    let reduced = sample_material(&reduced_p, &grid)?;
    let weighted = sample_material(&weighted_p, &grid)?;
    let b = cfg.spec.half_thickness();
    let summary = MaterialSummary {
        center_eps: weighted.lookup(0.0, 0.0).eps_yy,
        surface_eps: weighted_p.eval_scalar(0.0, b),
        surface_eps_unweighted: reduced_p.eval_scalar(0.0, b),
        grid,
        tensor_eps_yy: stats(&tensor),
        reduced: stats(&reduced),
        weighted: stats(&weighted),
    };
    let mut out = Outputs::new(root, "material");
    out.text("material_tensor.csv", &tensor.to_csv())?;
    out.text("material_reduced.csv", &reduced.to_csv())?;
    out.text("material_weighted.csv", &weighted.to_csv())?;
    out.json("material_summary.json", &summary)?;
    Ok((out.finish()?, summary))
}

/// Weighted profile quantised to the configured stack.
pub fn cmd_discretize(cfg: &ValidatedConfig, root: &Path) -> Result<(StageReport, ClampReport)> {
    let stack = build_layer_stack(&profile(cfg, ProfileOptions::WEIGHTED)?, &cfg.geometry)?;
    let stack = assign_unit_cells(&stack, &cfg.calibration)?;
    let report = clamp_report(&stack)?;
    let mut out = Outputs::new(root, "discretize");
    let written = export_stack(&stack, &out.dir)?;
    out.adopt(&written)?;
    out.text("calibration_used.csv", &cfg.calibration.to_csv())?;
    out.text("reconstructed_map.csv", &reconstruct_map(&stack)?.to_csv())?;
    Ok((out.finish()?, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MaterialSource {
    Continuous,
    Discretized,
}

impl MaterialSource {
    fn as_str(self) -> &'static str {
        match self {
            Self::Continuous => "continuous",
            Self::Discretized => "discretized",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub converged: bool,
    pub periods: usize,
    pub metric: f64,
    pub tolerance: f64,
    pub steps_per_period: usize,
    pub delta_mm: f64,
    pub ny: usize,
    pub nz: usize,
    pub history: Vec<f64>,
}

impl ConvergenceReport {
    fn of(field: &PhasorField, tolerance: f64) -> Self {
        Self {
            converged: field.converged,
            periods: field.periods,
            metric: field.metric,
            tolerance,
            steps_per_period: field.steps_per_period,
            delta_mm: field.grid.delta,
            ny: field.grid.ny,
            nz: field.grid.nz,
            history: field.metric_history.clone(),
        }
    }
}

fn require_converged(field: &PhasorField) -> Result<()> {
    if field.converged {
        Ok(())
    } else {
        Err(Error::NotConverged {
            periods: field.periods,
            metric: field.metric,
        })
    }
}

/// The weighted lens as a medium: continuous, or the reconstructed stack.
pub fn lens_medium(cfg: &ValidatedConfig, source: MaterialSource) -> Result<Box<dyn crate::Medium + Send + Sync>> {
    let p = profile(cfg, ProfileOptions::WEIGHTED)?;
    Ok(match source {
        MaterialSource::Continuous => Box::new(p),
        MaterialSource::Discretized => {
            let stack = assign_unit_cells(&build_layer_stack(&p, &cfg.geometry)?, &cfg.calibration)?;
            Box::new(reconstruct_map(&stack)?)
        }
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateResult {
    pub source: MaterialSource,
    pub convergence: ConvergenceReport,
    pub metrics: PatternMetrics,
}

/// Centred feed under the weighted lens: phasors, convergence and pattern.
pub fn cmd_simulate(cfg: &ValidatedConfig, source: MaterialSource, root: &Path) -> Result<(StageReport, SimulateResult)> {
    let stage = format!("simulate ({})", source.as_str());
    let medium = lens_medium(cfg, source)?;
    let (pattern, field) = feed_pattern(&cfg.spec, medium.as_ref(), 0.0, &cfg.scan).map_err(|e| e.in_stage(&stage))?;
    require_converged(&field).map_err(|e| e.in_stage(&stage))?;
    let metrics = pattern_metrics_in(&pattern, None, cfg.scan.beam_window).map_err(|e| e.in_stage(&stage))?;
    let result = SimulateResult {
        source,
        convergence: ConvergenceReport::of(&field, cfg.scan.sim.tolerance),
        metrics,
    };
    let mut out = Outputs::new(
        root,
        match source {
            MaterialSource::Continuous => "simulate_continuous",
            MaterialSource::Discretized => "simulate_discretized",
        },
    );
    let fmt = cfg.raw.output.phasor_format;
    for c in FieldComponent::ALL {
        let name = c.name(field.polarization);
        if matches!(fmt, PhasorFormat::Csv | PhasorFormat::Both) {
            out.text(&format!("phasor_{name}.csv"), &field.to_csv(c))?;
        }
        if matches!(fmt, PhasorFormat::Binary | PhasorFormat::Both) {
            out.bytes(&format!("phasor_{name}.bin"), &field.to_binary(c))?;
        }
    }
    out.json("convergence.json", &result.convergence)?;
    out.text("pattern.csv", &pattern.to_csv())?;
    out.json("metrics.json", &result.metrics)?;
    Ok((out.finish()?, result))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, sig9)
}

/// `offset_mm,peak_deg,hpbw_deg,sll_db,f2b_db,scan_loss_db`; empty cells for absent values.
pub fn scan_table_csv(entries: &[ScanEntry]) -> String {
    let mut s = String::from("offset_mm,peak_deg,hpbw_deg,sll_db,f2b_db,scan_loss_db\n");
    for e in entries {
        let m = &e.metrics;
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            sig9(e.offset_mm),
            sig9(m.peak_deg),
            sig9(m.hpbw_deg),
            opt(m.sll_db),
            sig9(m.f2b_db),
            opt(m.scan_loss_db)
        ));
    }
    s
}

fn offset_tag(o: f64) -> String {
    let s = format!("{o}");
    s.replace('-', "m").replace('.', "p")
}

fn run_scan(cfg: &ValidatedConfig, options: ProfileOptions, label: &str) -> Result<Vec<ScanEntry>> {
    let stage = format!("scan ({label})");
    let medium = profile(cfg, options)?;
    let entries = sweep_feeds(&cfg.spec, &medium, &cfg.raw.sim.feed_offsets_mm, &cfg.scan)
        .map_err(|e| e.in_stage(&stage))?;
    if let Some(e) = entries.iter().find(|e| !e.converged) {
        return Err(Error::NotConverged {
            periods: e.periods,
            metric: e.convergence_metric,
        }
        .in_stage(format!("{stage}, offset {} mm", e.offset_mm)));
    }
    Ok(entries)
}

fn write_scan(out: &mut Outputs, prefix: &str, entries: &[ScanEntry]) -> Result<()> {
    out.text(&format!("{prefix}scan_table.csv"), &scan_table_csv(entries))?;
    for e in entries {
        out.text(
            &format!("{prefix}pattern_offset_{}.csv", offset_tag(e.offset_mm)),
            &e.pattern.to_csv(),
        )?;
    }
    Ok(())
}

/// Feed sweep under the weighted continuous lens.
pub fn cmd_scan(cfg: &ValidatedConfig, root: &Path) -> Result<(StageReport, Vec<ScanEntry>)> {
    let entries = run_scan(cfg, ProfileOptions::WEIGHTED, "weighted")?;
    let mut out = Outputs::new(root, "scan");
    write_scan(&mut out, "", &entries)?;
    Ok((out.finish()?, entries))
}

#[derive(Debug, Clone, Serialize)]
pub struct AbRow {
    pub offset_mm: f64,
    pub weighted: PatternMetrics,
    pub unweighted: PatternMetrics,
}

impl AbRow {
    /// Highest sidelobe, with "no sidelobe" counted as minus infinity.
    fn sll(m: &PatternMetrics) -> f64 {
        m.sll_db.unwrap_or(f64::NEG_INFINITY)
    }

    pub fn sll_not_worse(&self) -> bool {
        Self::sll(&self.weighted) <= Self::sll(&self.unweighted)
    }

    pub fn sll_lower(&self) -> bool {
        Self::sll(&self.weighted) < Self::sll(&self.unweighted)
    }

    pub fn f2b_higher(&self) -> bool {
        self.weighted.f2b_db > self.unweighted.f2b_db
    }

    pub fn peak_shift_deg(&self) -> f64 {
        (self.weighted.peak_deg - self.unweighted.peak_deg).abs()
    }
}

pub fn ab_table_csv(rows: &[AbRow]) -> String {
    let mut s = String::from(
        "offset_mm,peak_w_deg,peak_u_deg,sll_w_db,sll_u_db,f2b_w_db,f2b_u_db,scan_loss_w_db,scan_loss_u_db,sll_not_worse,f2b_higher\n",
    );
    for r in rows {
        let (w, u) = (&r.weighted, &r.unweighted);
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            sig9(r.offset_mm),
            sig9(w.peak_deg),
            sig9(u.peak_deg),
            opt(w.sll_db),
            opt(u.sll_db),
            sig9(w.f2b_db),
            sig9(u.f2b_db),
            opt(w.scan_loss_db),
            opt(u.scan_loss_db),
            r.sll_not_worse(),
            r.f2b_higher()
        ));
    }
    s
}

/// Feed sweep with and without the weighting function, side by side.
pub fn cmd_ab_weighting(cfg: &ValidatedConfig, root: &Path) -> Result<(StageReport, Vec<AbRow>)> {
    let w = run_scan(cfg, ProfileOptions::WEIGHTED, "weighted")?;
    let u = run_scan(cfg, ProfileOptions::REDUCED, "unweighted")?;
    let rows: Vec<AbRow> = w
        .iter()
        .zip(&u)
        .map(|(a, b)| AbRow {
            offset_mm: a.offset_mm,
            weighted: a.metrics,
            unweighted: b.metrics,
        })
        .collect();
    let mut out = Outputs::new(root, "ab_weighting");
    write_scan(&mut out, "weighted/", &w)?;
    write_scan(&mut out, "unweighted/", &u)?;
    out.text("ab_table.csv", &ab_table_csv(&rows))?;
    Ok((out.finish()?, rows))
}

/// Effective parameters from a measured or simulated S-parameter sweep.
pub fn cmd_retrieve(input: &Path, branch: Option<i32>, root: &Path) -> Result<StageReport> {
    let text = std::fs::read_to_string(input).map_err(|e| Error::io(input, e))?;
    let responses = parse_sweep_csv(input, &text)?;
    let params = retrieve_sweep(&responses, branch).map_err(|e| e.in_stage("retrieve"))?;
    let mut out = Outputs::new(root, "retrieve");
    out.text("retrieved.csv", &params_to_csv(&responses, &params))?;
    out.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::PipelineConfig;
    use crate::retrieval::{slab_sparams, sweep_to_csv};
    use num_complex::Complex64;

    fn cfg() -> ValidatedConfig {
        PipelineConfig::default().validate().unwrap()
    }

    #[test]
    fn material_stage_summary_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let (rep, s) = cmd_material(&cfg(), dir.path()).unwrap();
        assert!((15.5..=16.0).contains(&s.center_eps), "{}", s.center_eps);
        assert!(s.surface_eps_unweighted > 1.0);
        assert!(s.surface_eps < s.surface_eps_unweighted);
        assert_eq!(rep.files.len(), 5);
        let m: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(rep.files.last().unwrap()).unwrap()).unwrap();
        let files = m["files"].as_array().unwrap();
        assert_eq!(files.len(), 4);
        for f in files {
            let bytes = std::fs::read(rep.dir.join(f["path"].as_str().unwrap())).unwrap();
            assert_eq!(f["sha256"].as_str().unwrap(), sha256_hex(&bytes));
        }
    }

    #[test]
    fn discretize_stage_is_deterministic() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let (ra, report) = cmd_discretize(&cfg(), a.path()).unwrap();
        let (rb, _) = cmd_discretize(&cfg(), b.path()).unwrap();
        assert!(report.fraction < 0.15);
        assert_eq!(ra.files.len(), rb.files.len());
        // 17 layers, summary, calibration, reconstruction, manifest.
        assert_eq!(ra.files.len(), 21);
        for (x, y) in ra.files.iter().zip(&rb.files) {
            assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap(), "{}", x.display());
        }
    }

    #[test]
    fn retrieve_stage_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let sweep: Vec<_> = (0..=10)
            .map(|k| slab_sparams(Complex64::new(4.0, 0.0), Complex64::new(1.0, 0.0), 0.508, 30.0 + k as f64).unwrap())
            .collect();
        let input = dir.path().join("sweep.csv");
        std::fs::write(&input, sweep_to_csv(&sweep)).unwrap();
        let rep = cmd_retrieve(&input, None, dir.path()).unwrap();
        let text = std::fs::read_to_string(rep.dir.join("retrieved.csv")).unwrap();
        assert_eq!(text.lines().count(), 12);
        assert!(cmd_retrieve(&dir.path().join("missing.csv"), None, dir.path()).is_err());
    }

    #[test]
    fn offset_tags_are_file_safe() {
        assert_eq!(offset_tag(8.0), "8");
        assert_eq!(offset_tag(-2.5), "m2p5");
    }
}
