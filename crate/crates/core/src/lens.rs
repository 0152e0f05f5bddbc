//! Material profile of the flattened Luneburg lens.
//!
//! The sphere of radius `R` is squeezed along z into a disc of half-thickness
//! `b` by the column mapping `z' = b z / sqrt(R^2 - y^2)`, `y' = y`. The
//! transformed medium is a diagonal tensor pair whose y/z factors are the two
//! roots of `lambda^2 + B lambda + C = 0`, with
//!
//! ```text
//! B = -[ b^2/(R^2 - y'^2) + 1 + z'^2 y'^2/(R^2 - y'^2)^2 ]
//! C =    b^2/(R^2 - y'^2)
//! ```
//!
//! and a common scale `s = sqrt(R^2 - y'^2)/b`. The permittivity carries an
//! extra factor of the Luneburg profile `eps(r) = 2 - (r/R)^2`.
//!
//! For fabrication the tensor is collapsed to the scalar `eps_yy` with unit
//! permeability, then optionally weighted by `a cos(pi z'/d)` so the flat faces
//! approach free space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::sig9;
use crate::medium::{DiagonalTensorPair, Medium, Rect};

/// Width of the rim band treated as vacuum, as a fraction of `R`.
pub const EDGE_TOLERANCE_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LensSpec {
    radius: f64,
    half_thickness: f64,
    weight_amplitude: f64,
    weight_period: f64,
    eps_floor: f64,
}

impl Default for LensSpec {
    /// R = 32 mm, b = 4 mm, a = 1, d = 10 mm, floor 1.
    fn default() -> Self {
        Self {
            radius: 32.0,
            half_thickness: 4.0,
            weight_amplitude: 1.0,
            weight_period: 10.0,
            eps_floor: 1.0,
        }
    }
}

impl LensSpec {
    pub fn new(
        radius: f64,
        half_thickness: f64,
        weight_amplitude: f64,
        weight_period: f64,
        eps_floor: f64,
    ) -> Result<Self> {
        let all = [radius, half_thickness, weight_amplitude, weight_period, eps_floor];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("all parameters must be finite".into()));
        }
        if radius <= 0.0 {
            return Err(Error::InvalidSpec(format!("R must be positive, got {radius}")));
        }
        if half_thickness <= 0.0 || half_thickness >= radius {
            return Err(Error::InvalidSpec(format!(
                "b must lie in (0, R), got b = {half_thickness} with R = {radius}"
            )));
        }
        if weight_amplitude <= 0.0 {
            return Err(Error::InvalidSpec(format!(
                "a must be positive, got {weight_amplitude}"
            )));
        }
        if weight_period <= 2.0 * half_thickness {
            return Err(Error::InvalidSpec(format!(
                "weight must stay positive across the lens: need d > 2b, got d = {weight_period}, b = {half_thickness}"
            )));
        }
        if eps_floor < 1.0 {
            return Err(Error::InvalidSpec(format!(
                "permittivity floor must be >= 1, got {eps_floor}"
            )));
        }
        Ok(Self {
            radius,
            half_thickness,
            weight_amplitude,
            weight_period,
            eps_floor,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn half_thickness(&self) -> f64 {
        self.half_thickness
    }

    pub fn weight_amplitude(&self) -> f64 {
        self.weight_amplitude
    }

    pub fn weight_period(&self) -> f64 {
        self.weight_period
    }

    pub fn eps_floor(&self) -> f64 {
        self.eps_floor
    }

    pub fn edge_tolerance(&self) -> f64 {
        EDGE_TOLERANCE_FRACTION * self.radius
    }

    /// `eps_yy` at the lens centre, `2 R / b`. Also the ceiling of reduced profiles.
    pub fn center_eps(&self) -> f64 {
        2.0 * self.radius / self.half_thickness
    }

    pub fn footprint(&self) -> Rect {
        Rect {
            y_min: -self.radius,
            y_max: self.radius,
            z_min: -self.half_thickness,
            z_max: self.half_thickness,
        }
    }
}

/// Luneburg permittivity `2 - (r/R)^2`.
pub fn luneburg_eps(r: f64, radius: f64) -> Result<f64> {
    if !(0.0..=radius).contains(&r) {
        return Err(Error::Domain {
            quantity: "r",
            value: r,
            min: 0.0,
            max: radius,
        });
    }
    let t = r / radius;
    Ok(2.0 - t * t)
}

fn column_half_height(y: f64, spec: &LensSpec) -> Result<f64> {
    let r = spec.radius;
    if !(y.abs() < r) {
        return Err(Error::SingularColumn { y: y.abs(), radius: r });
    }
    Ok((r * r - y * y).sqrt())
}

/// Sphere coordinates to flattened-lens coordinates.
pub fn forward_map(y: f64, z: f64, spec: &LensSpec) -> Result<(f64, f64)> {
    let w = column_half_height(y, spec)?;
    Ok((y, spec.half_thickness * z / w))
}

/// Flattened-lens coordinates back to sphere coordinates.
pub fn inverse_map(y: f64, z: f64, spec: &LensSpec) -> Result<(f64, f64)> {
    let w = column_half_height(y, spec)?;
    Ok((y, z * w / spec.half_thickness))
}

/// Roots of `lambda^2 + B lambda + C = 0` at one point of the flattened lens.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenFactors {
    pub plus: f64,
    pub minus: f64,
    pub b_coef: f64,
    pub c_coef: f64,
}

pub fn eigen_factors(y: f64, z: f64, spec: &LensSpec) -> EigenFactors {
    let b = spec.half_thickness;
    let w2 = spec.radius * spec.radius - y * y;
    let c = b * b / w2;
    let cross = z * z * y * y / (w2 * w2);
    let neg_b = c + 1.0 + cross;
    let (plus, minus) = if cross == 0.0 {
        // The quadratic factors as (lambda - 1)(lambda - C).
        (c.max(1.0), c.min(1.0))
    } else {
        let plus = 0.5 * (neg_b + (neg_b * neg_b - 4.0 * c).sqrt());
        (plus, c / plus)
    };
    EigenFactors {
        plus,
        minus,
        b_coef: -neg_b,
        c_coef: c,
    }
}

/// Which radius feeds the Luneburg factor of the transformed permittivity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RadiusMode {
    /// `sqrt(y'^2 + z'^2)`, evaluated in the flattened coordinates.
    #[default]
    Literal,
    /// Radius of the sphere point that maps onto `(y', z')`.
    Preimage,
}

/// Full transformed tensors at `(y', z')`, Luneburg factor from the literal radius.
pub fn compute_tensors(y: f64, z: f64, spec: &LensSpec) -> Result<DiagonalTensorPair> {
    compute_tensors_with(y, z, spec, RadiusMode::Literal)
}

pub fn compute_tensors_with(
    y: f64,
    z: f64,
    spec: &LensSpec,
    mode: RadiusMode,
) -> Result<DiagonalTensorPair> {
    let limit = spec.radius - spec.edge_tolerance();
    if !(y.abs() < limit) {
        return Err(Error::EdgeSingularity { y: y.abs(), limit });
    }
    let b = spec.half_thickness;
    if !(z.abs() <= b) {
        return Err(Error::Domain {
            quantity: "z'",
            value: z,
            min: -b,
            max: b,
        });
    }
    let r = spec.radius;
    let w = (r * r - y * y).sqrt();
    let scale = w / b;
    let radius = match mode {
        RadiusMode::Literal => (y * y + z * z).sqrt(),
        RadiusMode::Preimage => {
            let z0 = z * w / b;
            (y * y + z0 * z0).sqrt()
        }
    }
    .min(r);
    let eps = luneburg_eps(radius, r)?;
    let f = eigen_factors(y, z, spec);
    Ok(DiagonalTensorPair {
        eps_xx: eps * scale,
        eps_yy: eps * scale * f.plus,
        eps_zz: eps * scale * f.minus,
        mu_xx: scale,
        mu_yy: scale * f.plus,
        mu_zz: scale * f.minus,
    })
}

/// Collapse the tensor to its `eps_yy` component; permeability becomes 1.
pub fn reduce_anisotropy(pair: &DiagonalTensorPair) -> f64 {
    pair.eps_yy
}

/// `max(floor, a cos(pi z'/d) eps)`.
pub fn apply_weighting(eps: f64, z: f64, spec: &LensSpec) -> Result<f64> {
    let weight = spec.weight_amplitude * (std::f64::consts::PI * z.abs() / spec.weight_period).cos();
    if !(weight > 0.0) {
        return Err(Error::InvalidSpec(format!(
            "weight a cos(pi z'/d) = {weight} is not positive at z' = {z}"
        )));
    }
    Ok((weight * eps).max(spec.eps_floor))
}

/// Which processing steps a sampled profile goes through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileOptions {
    pub reduce: bool,
    pub weight: bool,
    pub radius_mode: RadiusMode,
}

impl ProfileOptions {
    pub const TENSOR: Self = Self {
        reduce: false,
        weight: false,
        radius_mode: RadiusMode::Literal,
    };
    pub const REDUCED: Self = Self {
        reduce: true,
        weight: false,
        radius_mode: RadiusMode::Literal,
    };
    pub const WEIGHTED: Self = Self {
        reduce: true,
        weight: true,
        radius_mode: RadiusMode::Literal,
    };

    pub fn with_radius_mode(mut self, mode: RadiusMode) -> Self {
        self.radius_mode = mode;
        self
    }
}

/// The continuous lens medium: a spec plus the processing options.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LensProfile {
    spec: LensSpec,
    options: ProfileOptions,
}

impl LensProfile {
    pub fn new(spec: LensSpec, options: ProfileOptions) -> Result<Self> {
        if options.weight && !options.reduce {
            return Err(Error::InvalidSpec(
                "weighting applies only to the anisotropy-reduced permittivity".into(),
            ));
        }
        Ok(Self { spec, options })
    }

    pub fn spec(&self) -> &LensSpec {
        &self.spec
    }

    pub fn options(&self) -> ProfileOptions {
        self.options
    }

    /// Material at `(y', z')`; vacuum outside the footprint and in the rim band.
    ///
    /// Reduced profiles are bounded to `[floor, center_eps]`.
    pub fn eval(&self, y: f64, z: f64) -> DiagonalTensorPair {
        let spec = &self.spec;
        if y.abs() >= spec.radius - spec.edge_tolerance() || z.abs() > spec.half_thickness {
            return DiagonalTensorPair::VACUUM;
        }
        let Ok(pair) = compute_tensors_with(y, z, spec, self.options.radius_mode) else {
            return DiagonalTensorPair::VACUUM;
        };
        if !self.options.reduce {
            return pair;
        }
        let mut eps = reduce_anisotropy(&pair);
        if self.options.weight {
            // d > 2b is checked when the spec is built, so the weight is positive here.
            eps = apply_weighting(eps, z, spec).unwrap_or(spec.eps_floor);
        }
        DiagonalTensorPair::isotropic(eps.clamp(spec.eps_floor, spec.center_eps()))
    }

    pub fn eval_scalar(&self, y: f64, z: f64) -> f64 {
        self.eval(y, z).eps_yy
    }
}

impl Medium for LensProfile {
    fn material_at(&self, y: f64, z: f64) -> DiagonalTensorPair {
        self.eval(y, z)
    }

    fn extent(&self) -> Option<Rect> {
        Some(self.spec.footprint())
    }

    fn peak_material(&self) -> (f64, f64) {
        if self.options.reduce {
            return (self.spec.center_eps(), 1.0);
        }
        let (ny, nz) = (1025, 129);
        let r = self.spec.radius;
        let b = self.spec.half_thickness;
        let mut peak = (1.0f64, 1.0f64);
        for i in 0..ny {
            let y = -r + 2.0 * r * i as f64 / (ny - 1) as f64;
            for j in 0..nz {
                let z = -b + 2.0 * b * j as f64 / (nz - 1) as f64;
                let m = self.eval(y, z);
                peak = (peak.0.max(m.max_eps()), peak.1.max(m.max_mu()));
            }
        }
        peak
    }
}

/// Uniform rectangular sampling of the y–z plane. Node `(i, j)` sits at
/// `(y0 + i dy, z0 + j dz)`; storage is y-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2 {
    pub y0: f64,
    pub z0: f64,
    pub dy: f64,
    pub dz: f64,
    pub ny: usize,
    pub nz: usize,
}

impl Grid2 {
    /// Grid centred on the origin with a node at (0, 0), covering at least
    /// `[-half_y, half_y] x [-half_z, half_z]`.
    pub fn centered(half_y: f64, half_z: f64, spacing: f64) -> Self {
        let my = (half_y / spacing).ceil() as usize;
        let mz = (half_z / spacing).ceil() as usize;
        Self {
            y0: -(my as f64) * spacing,
            z0: -(mz as f64) * spacing,
            dy: spacing,
            dz: spacing,
            ny: 2 * my + 1,
            nz: 2 * mz + 1,
        }
    }

    /// Default sampling for a lens: spacing b/16 with a 2 mm margin.
    pub fn for_lens(spec: &LensSpec) -> Self {
        Self::centered(
            spec.radius + 2.0,
            spec.half_thickness + 2.0,
            spec.half_thickness / 16.0,
        )
    }

    pub fn len(&self) -> usize {
        self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn y(&self, i: usize) -> f64 {
        self.y0 + i as f64 * self.dy
    }

    pub fn z(&self, j: usize) -> f64 {
        self.z0 + j as f64 * self.dz
    }

    pub fn y_max(&self) -> f64 {
        self.y(self.ny.saturating_sub(1))
    }

    pub fn z_max(&self) -> f64 {
        self.z(self.nz.saturating_sub(1))
    }

    pub fn nearest(&self, y: f64, z: f64) -> Option<(usize, usize)> {
        let fi = ((y - self.y0) / self.dy).round();
        let fj = ((z - self.z0) / self.dz).round();
        if fi < 0.0 || fj < 0.0 || fi >= self.ny as f64 || fj >= self.nz as f64 {
            return None;
        }
        Some((fi as usize, fj as usize))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MapData {
    Tensor(Vec<DiagonalTensorPair>),
    /// Isotropic permittivity with unit permeability.
    Scalar(Vec<f64>),
}

impl MapData {
    fn len(&self) -> usize {
        match self {
            MapData::Tensor(v) => v.len(),
            MapData::Scalar(v) => v.len(),
        }
    }

    fn at(&self, idx: usize) -> DiagonalTensorPair {
        match self {
            MapData::Tensor(v) => v[idx],
            MapData::Scalar(v) => DiagonalTensorPair::isotropic(v[idx]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MapMetadata {
    pub spec: Option<LensSpec>,
    pub reduced: bool,
    pub weighted: bool,
}

/// Material sampled node-by-node on a [`Grid2`]. Lookups between nodes use
/// the nearest node; points off the grid are vacuum.
#[derive(Debug, Clone)]
pub struct MaterialMap {
    grid: Grid2,
    data: MapData,
    metadata: MapMetadata,
    extent: Option<Rect>,
    peak: (f64, f64),
}

impl MaterialMap {
    pub fn new(grid: Grid2, data: MapData, metadata: MapMetadata) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::Config(format!(
                "map has {} nodes but grid has {}",
                data.len(),
                grid.len()
            )));
        }
        let mut extent: Option<Rect> = None;
        let mut peak = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for i in 0..grid.ny {
            for j in 0..grid.nz {
                let m = data.at(i * grid.nz + j);
                peak = (peak.0.max(m.max_eps()), peak.1.max(m.max_mu()));
                if !m.is_vacuum() {
                    let p = Rect::point(grid.y(i), grid.z(j));
                    extent = Some(extent.map_or(p, |e| e.union(&p)));
                }
            }
        }
        Ok(Self {
            grid,
            data,
            metadata,
            extent,
            peak,
        })
    }

    pub fn grid(&self) -> &Grid2 {
        &self.grid
    }

    pub fn data(&self) -> &MapData {
        &self.data
    }

    pub fn metadata(&self) -> &MapMetadata {
        &self.metadata
    }

    pub fn node(&self, i: usize, j: usize) -> DiagonalTensorPair {
        self.data.at(i * self.grid.nz + j)
    }

    pub fn lookup(&self, y: f64, z: f64) -> DiagonalTensorPair {
        match self.grid.nearest(y, z) {
            Some((i, j)) => self.node(i, j),
            None => DiagonalTensorPair::VACUUM,
        }
    }

    /// CSV dump, y outer loop, nine significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match &self.data {
            MapData::Tensor(_) => {
                out.push_str("y_mm,z_mm,eps_xx,eps_yy,eps_zz,mu_xx,mu_yy,mu_zz\n")
            }
            MapData::Scalar(_) => out.push_str("y_mm,z_mm,eps,mu\n"),
        }
        for i in 0..self.grid.ny {
            for j in 0..self.grid.nz {
                let idx = i * self.grid.nz + j;
                out.push_str(&sig9(self.grid.y(i)));
                out.push(',');
                out.push_str(&sig9(self.grid.z(j)));
                match &self.data {
                    MapData::Tensor(v) => {
                        for c in v[idx].components() {
                            out.push(',');
                            out.push_str(&sig9(c));
                        }
                    }
                    MapData::Scalar(v) => {
                        out.push(',');
                        out.push_str(&sig9(v[idx]));
                        out.push(',');
                        out.push_str(&sig9(1.0));
                    }
                }
                out.push('\n');
            }
        }
        out
    }
}

impl Medium for MaterialMap {
    fn material_at(&self, y: f64, z: f64) -> DiagonalTensorPair {
        self.lookup(y, z)
    }

    fn extent(&self) -> Option<Rect> {
        self.extent
    }

    fn peak_material(&self) -> (f64, f64) {
        self.peak
    }
}

/// Evaluate `profile` at every node of `grid`.
pub fn sample_material(profile: &LensProfile, grid: &Grid2) -> Result<MaterialMap> {
    let spec = profile.spec();
    let max_spacing = spec.half_thickness / 8.0;
    if grid.dy > max_spacing * (1.0 + 1e-12) || grid.dz > max_spacing * (1.0 + 1e-12) {
        return Err(Error::Config(format!(
            "grid spacing ({}, {}) mm is coarser than b/8 = {max_spacing} mm",
            grid.dy, grid.dz
        )));
    }
    let fp = spec.footprint();
    let slack_y = 0.5 * grid.dy;
    let slack_z = 0.5 * grid.dz;
    if grid.y0 > fp.y_min + slack_y
        || grid.y_max() < fp.y_max - slack_y
        || grid.z0 > fp.z_min + slack_z
        || grid.z_max() < fp.z_max - slack_z
    {
        return Err(Error::Config(
            "grid does not cover the lens footprint".into(),
        ));
    }
    let opts = profile.options();
    let data = if opts.reduce {
        let mut v = Vec::with_capacity(grid.len());
        for i in 0..grid.ny {
            for j in 0..grid.nz {
                v.push(profile.eval_scalar(grid.y(i), grid.z(j)));
            }
        }
        MapData::Scalar(v)
    } else {
        let mut v = Vec::with_capacity(grid.len());
        for i in 0..grid.ny {
            for j in 0..grid.nz {
                v.push(profile.eval(grid.y(i), grid.z(j)));
            }
        }
        MapData::Tensor(v)
    };
    MaterialMap::new(
        *grid,
        data,
        MapMetadata {
            spec: Some(*spec),
            reduced: opts.reduce,
            weighted: opts.weight,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_spec() -> LensSpec {
        LensSpec::default()
    }

    #[test]
    fn luneburg_profile_values() {
        assert_eq!(luneburg_eps(0.0, 32.0).unwrap(), 2.0);
        assert_eq!(luneburg_eps(32.0, 32.0).unwrap(), 1.0);
        assert_eq!(luneburg_eps(16.0, 32.0).unwrap(), 1.75);
        assert!(matches!(luneburg_eps(-1e-9, 32.0), Err(Error::Domain { .. })));
        assert!(matches!(luneburg_eps(32.1, 32.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn forward_map_examples() {
        let s = reference_spec();
        assert_eq!(forward_map(0.0, 0.0, &s).unwrap(), (0.0, 0.0));
        assert_eq!(forward_map(0.0, 32.0, &s).unwrap(), (0.0, 4.0));
        let (y, z) = forward_map(16.0, 10.0, &s).unwrap();
        assert_eq!(y, 16.0);
        // 4 * 10 / sqrt(32^2 - 16^2) = 40 / sqrt(768)
        assert!((z - 1.443_375_672_974_064_4).abs() < 1e-12);
        assert!(matches!(
            forward_map(32.0, 0.0, &s),
            Err(Error::SingularColumn { .. })
        ));
    }

    #[test]
    fn inverse_map_examples() {
        let s = reference_spec();
        assert_eq!(inverse_map(0.0, 4.0, &s).unwrap(), (0.0, 32.0));
        assert_eq!(inverse_map(0.0, 0.0, &s).unwrap(), (0.0, 0.0));
        let (y, z) = inverse_map(16.0, 1.44338, &s).unwrap();
        assert_eq!(y, 16.0);
        assert!((z - 10.0).abs() < 1e-4);
        let (_, z) = inverse_map(16.0, 40.0 / 768f64.sqrt(), &s).unwrap();
        assert!((z - 10.0).abs() < 1e-9);
        assert!(inverse_map(-32.0, 0.0, &s).is_err());
    }

    #[test]
    fn tensors_at_origin() {
        let t = compute_tensors(0.0, 0.0, &reference_spec()).unwrap();
        assert_eq!((t.eps_xx, t.eps_yy, t.eps_zz), (16.0, 16.0, 0.25));
        assert_eq!((t.mu_xx, t.mu_yy, t.mu_zz), (8.0, 8.0, 0.125));
    }

    #[test]
    fn tensors_on_axis_off_centre() {
        let s = reference_spec();
        let t = compute_tensors(0.0, 2.0, &s).unwrap();
        // (2 - (2/32)^2) * 8 * 1
        assert!((t.eps_yy - 15.968_75).abs() < 1e-12);
        for z in [-4.0, -1.3, 0.7, 3.99] {
            let f = eigen_factors(0.0, z, &s);
            assert_eq!(f.plus, 1.0);
            assert_eq!(f.minus, 1.0 / 64.0);
            let t = compute_tensors(0.0, z, &s).unwrap();
            assert_eq!(t.eps_xx, t.eps_yy);
        }
    }

    #[test]
    fn tensors_refuse_rim_band() {
        let s = reference_spec();
        let limit = 32.0 - s.edge_tolerance();
        assert!(matches!(
            compute_tensors(limit, 0.0, &s),
            Err(Error::EdgeSingularity { .. })
        ));
        assert!(compute_tensors(limit - 1e-6, 0.0, &s).is_ok());
    }

    #[test]
    fn preimage_radius_differs_off_axis() {
        let s = reference_spec();
        let lit = compute_tensors_with(10.0, 3.0, &s, RadiusMode::Literal).unwrap();
        let pre = compute_tensors_with(10.0, 3.0, &s, RadiusMode::Preimage).unwrap();
        // Pre-image radius: z = 3 sqrt(924)/4 = 22.8 mm, so r = 25.1 mm.
        let z0 = 3.0 * 924f64.sqrt() / 4.0;
        let r0 = (100.0 + z0 * z0).sqrt();
        let ratio = pre.eps_yy / lit.eps_yy;
        let expected = luneburg_eps(r0, 32.0).unwrap() / luneburg_eps(109f64.sqrt(), 32.0).unwrap();
        assert!((ratio - expected).abs() < 1e-12);
        assert_eq!(pre.mu_yy, lit.mu_yy);
    }

    #[test]
    fn reduction_picks_eps_yy() {
        let s = reference_spec();
        assert_eq!(reduce_anisotropy(&compute_tensors(0.0, 0.0, &s).unwrap()), 16.0);
        assert_eq!(reduce_anisotropy(&DiagonalTensorPair::VACUUM), 1.0);
        assert!((reduce_anisotropy(&compute_tensors(0.0, 2.0, &s).unwrap()) - 15.968_75).abs() < 1e-12);
    }

    #[test]
    fn weighting_examples() {
        let s = reference_spec();
        assert_eq!(apply_weighting(16.0, 0.0, &s).unwrap(), 16.0);
        // cos(0.4 pi) = 0.30901699437494745
        assert!((apply_weighting(10.0, 4.0, &s).unwrap() - 3.090_169_943_749_474).abs() < 1e-12);
        assert_eq!(apply_weighting(1.05, 4.0, &s).unwrap(), 1.0);
    }

    #[test]
    fn spec_validation() {
        assert!(LensSpec::new(32.0, 4.0, 1.0, 10.0, 1.0).is_ok());
        assert!(LensSpec::new(32.0, 16.0, 1.0, 30.0, 1.0).is_err());
        assert!(LensSpec::new(32.0, 32.0, 1.0, 100.0, 1.0).is_err());
        assert!(LensSpec::new(32.0, 4.0, 0.0, 10.0, 1.0).is_err());
        assert!(LensSpec::new(32.0, 4.0, 1.0, 8.0, 1.0).is_err());
        assert!(LensSpec::new(32.0, 4.0, 1.0, 10.0, 0.9).is_err());
        assert!(LensSpec::new(-1.0, 4.0, 1.0, 10.0, 1.0).is_err());
        assert!(LensSpec::new(f64::NAN, 4.0, 1.0, 10.0, 1.0).is_err());
    }

    #[test]
    fn weighting_needs_reduction() {
        let opts = ProfileOptions {
            reduce: false,
            weight: true,
            radius_mode: RadiusMode::Literal,
        };
        assert!(LensProfile::new(reference_spec(), opts).is_err());
    }

    #[test]
    fn sampled_weighted_profile() {
        let s = reference_spec();
        let profile = LensProfile::new(s, ProfileOptions::WEIGHTED).unwrap();
        let map = sample_material(&profile, &Grid2::for_lens(&s)).unwrap();
        let c = map.lookup(0.0, 0.0).eps_yy;
        assert!((15.5..=16.0).contains(&c), "centre {c}");
        // Flat face on the axis: 15.875 * cos(0.4 pi).
        let face = map.lookup(0.0, 4.0).eps_yy;
        assert!((face - 15.875 * 0.309_016_994_374_947_45).abs() < 1e-9, "face {face}");
        // Towards the rim the profile falls to the floor.
        assert!(map.lookup(31.75, 0.0).eps_yy < 1.05);
        for y in [32.0, 33.0, -32.5] {
            assert!(map.lookup(y, 0.0).is_vacuum());
        }
        let MapData::Scalar(v) = map.data() else {
            panic!("reduced map must be scalar")
        };
        assert!(v.iter().all(|&e| (1.0..=16.0).contains(&e)));
    }

    #[test]
    fn sampling_rejects_coarse_or_small_grids() {
        let s = reference_spec();
        let profile = LensProfile::new(s, ProfileOptions::WEIGHTED).unwrap();
        assert!(sample_material(&profile, &Grid2::centered(34.0, 6.0, 0.6)).is_err());
        assert!(sample_material(&profile, &Grid2::centered(20.0, 6.0, 0.25)).is_err());
    }

    #[test]
    fn tensor_map_csv_layout() {
        let s = reference_spec();
        let profile = LensProfile::new(s, ProfileOptions::TENSOR).unwrap();
        let grid = Grid2::centered(33.0, 4.5, 0.5);
        let map = sample_material(&profile, &grid).unwrap();
        let csv = map.to_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "y_mm,z_mm,eps_xx,eps_yy,eps_zz,mu_xx,mu_yy,mu_zz"
        );
        assert_eq!(csv.lines().count(), grid.len() + 1);
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 8);
        // y outer loop: second row shares y with the first.
        let second: Vec<&str> = csv.lines().nth(2).unwrap().split(',').collect();
        assert_eq!(first[0], second[0]);
    }
}
