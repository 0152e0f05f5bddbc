//! Browser bindings for three quick, solver-free views of the lens:
//! the permittivity cross-section, one board of the layer stack, and an
//! S-parameter retrieval round trip. The FDTD stages are too slow for an
//! interactive page and are left to the command line.

use flatlens::discretize::{assign_unit_cells, build_layer_stack, CalibrationTable, CellFamily, StackGeometry};
use flatlens::lens::{sample_material, Grid2, MapData};
use flatlens::retrieval::{retrieve_sweep, slab_sparams};
use flatlens::{LensProfile, LensSpec, ProfileOptions};
use num_complex::Complex64;
use wasm_bindgen::prelude::*;

fn js(e: flatlens::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn options(reduce: bool, weight: bool) -> ProfileOptions {
    match (reduce, weight) {
        (_, true) => ProfileOptions::WEIGHTED,
        (true, false) => ProfileOptions::REDUCED,
        (false, false) => ProfileOptions::TENSOR,
    }
}

/// Row-major `ny x nz` permittivity samples plus the grid shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileImage {
    pub ny: usize,
    pub nz: usize,
    pub values: Vec<f64>,
}

/// `eps_yy` over the y-z cross-section; `weight` implies the reduced profile.
pub fn profile_image(
    radius: f64,
    half_thickness: f64,
    amplitude: f64,
    period: f64,
    weight: bool,
    samples_y: usize,
) -> flatlens::Result<ProfileImage> {
    let spec = LensSpec::new(radius, half_thickness, amplitude, period, 1.0)?;
    let profile = LensProfile::new(spec, options(true, weight))?;
    let spacing = 2.0 * radius / samples_y.clamp(16, 1024) as f64;
    let grid = Grid2::centered(radius, half_thickness, spacing);
    let map = sample_material(&profile, &grid)?;
    let values = match map.data() {
        MapData::Scalar(v) => v.clone(),
        MapData::Tensor(v) => v.iter().map(|t| t.eps_yy).collect(),
    };
    Ok(ProfileImage {
        ny: grid.ny,
        nz: grid.nz,
        values,
    })
}

/// Pixels of one board of the default stack: achieved permittivity and a
/// family code per pixel (0 patch, 1 perforated, 2 air, +3 when clamped).
pub fn stack_layer(layer: usize, weight: bool) -> flatlens::Result<(Vec<f64>, Vec<u8>)> {
    let geometry = StackGeometry::default();
    if layer >= geometry.n_layers {
        return Err(flatlens::Error::Config(format!(
            "layer {layer} out of range 0..{}",
            geometry.n_layers
        )));
    }
    let profile = LensProfile::new(LensSpec::default(), options(true, weight))?;
    let stack = assign_unit_cells(&build_layer_stack(&profile, &geometry)?, &CalibrationTable::placeholder())?;
    let cells = &stack.assignments.as_ref().expect("assigned")[layer];
    let eps = cells.iter().map(|c| c.achieved_eps).collect();
    let codes = cells
        .iter()
        .map(|c| {
            let f = match c.family {
                CellFamily::Patch => 0,
                CellFamily::Perforated => 1,
                CellFamily::Air => 2,
            };
            f + if c.clamped { 3 } else { 0 }
        })
        .collect();
    Ok((eps, codes))
}

/// Synthesise a lossy slab sweep and retrieve it. Returns interleaved
/// `[f, eps_re, eps_im, mu_re, mu_im, n_re]` per frequency.
pub fn retrieval_round_trip(
    eps_re: f64,
    eps_im: f64,
    thickness_mm: f64,
    f_lo: f64,
    f_hi: f64,
    points: usize,
) -> flatlens::Result<Vec<f64>> {
    let points = points.clamp(2, 2001);
    let eps = Complex64::new(eps_re, -eps_im.abs());
    let mut responses = Vec::with_capacity(points);
    for k in 0..points {
        let f = f_lo + (f_hi - f_lo) * k as f64 / (points - 1) as f64;
        responses.push(slab_sparams(eps, Complex64::new(1.0, 0.0), thickness_mm, f)?);
    }
    let params = retrieve_sweep(&responses, None)?;
    let mut out = Vec::with_capacity(points * 6);
    for (r, p) in responses.iter().zip(&params) {
        out.extend_from_slice(&[r.frequency_ghz, p.eps.re, p.eps.im, p.mu.re, p.mu.im, p.n.re]);
    }
    Ok(out)
}

#[wasm_bindgen]
pub struct Image {
    ny: usize,
    nz: usize,
    values: Vec<f64>,
}

#[wasm_bindgen]
impl Image {
    #[wasm_bindgen(getter)]
    pub fn ny(&self) -> usize {
        self.ny
    }

    #[wasm_bindgen(getter)]
    pub fn nz(&self) -> usize {
        self.nz
    }

    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }
}

#[wasm_bindgen(js_name = profileImage)]
pub fn profile_image_js(
    radius: f64,
    half_thickness: f64,
    amplitude: f64,
    period: f64,
    weight: bool,
    samples_y: usize,
) -> Result<Image, JsError> {
    let p = profile_image(radius, half_thickness, amplitude, period, weight, samples_y).map_err(js)?;
    Ok(Image {
        ny: p.ny,
        nz: p.nz,
        values: p.values,
    })
}

#[wasm_bindgen(js_name = stackLayerEps)]
pub fn stack_layer_eps_js(layer: usize, weight: bool) -> Result<Vec<f64>, JsError> {
    stack_layer(layer, weight).map(|(e, _)| e).map_err(js)
}

#[wasm_bindgen(js_name = stackLayerFamilies)]
pub fn stack_layer_families_js(layer: usize, weight: bool) -> Result<Vec<u8>, JsError> {
    stack_layer(layer, weight).map(|(_, c)| c).map_err(js)
}

#[wasm_bindgen(js_name = retrievalRoundTrip)]
pub fn retrieval_round_trip_js(
    eps_re: f64,
    eps_im: f64,
    thickness_mm: f64,
    f_lo: f64,
    f_hi: f64,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    retrieval_round_trip(eps_re, eps_im, thickness_mm, f_lo, f_hi, points).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_image_is_symmetric_and_peaks_at_centre() {
        let p = profile_image(32.0, 4.0, 1.0, 10.0, true, 128).unwrap();
        assert_eq!(p.values.len(), p.ny * p.nz);
        let c = p.values[(p.ny / 2) * p.nz + p.nz / 2];
        assert!((15.5..=16.0).contains(&c));
        for i in 0..p.ny {
            for j in 0..p.nz {
                assert_eq!(p.values[i * p.nz + j], p.values[(p.ny - 1 - i) * p.nz + j]);
            }
        }
        assert!(profile_image(32.0, 16.0, 1.0, 30.0, true, 64).is_err());
    }

    #[test]
    fn stack_layer_codes() {
        let (eps, codes) = stack_layer(8, true).unwrap();
        assert_eq!(eps.len(), 41 * 41);
        assert_eq!(codes[0], 2);
        assert_eq!(codes[20 * 41 + 20], 0);
        assert!(stack_layer(17, true).is_err());
    }

    #[test]
    fn retrieval_recovers_lossy_slab() {
        let out = retrieval_round_trip(4.0, 0.05, 0.508, 30.0, 40.0, 11).unwrap();
        assert_eq!(out.len(), 66);
        for row in out.chunks(6) {
            assert!((row[1] - 4.0).abs() < 1e-6 && (row[2] + 0.05).abs() < 1e-6, "{row:?}");
        }
    }
}
