//! Effective-parameter retrieval from normal-incidence slab S-parameters.
//!
//! Convention: time dependence `exp(+j w t)`, so a wave travelling through
//! a slab of index `n` and thickness `d` picks up `P = exp(-j n k0 d)` and a
//! passive medium has `Im n <= 0`. Reference planes sit on the slab faces.
//!
//! ```text
//! G   = (z - 1) / (z + 1)
//! S11 = G (1 - P^2) / (1 - G^2 P^2)
//! S21 = P (1 - G^2) / (1 - G^2 P^2)
//! ```

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::sig9;

/// Below this |S21| the slab is treated as opaque.
pub const OPAQUE_LIMIT: f64 = 1e-12;
/// Both terms of the impedance quotient below this: z is undetermined.
const DEGENERATE_LIMIT: f64 = 1e-9;
/// Denominator of the impedance quotient below this: z is poorly conditioned.
const LOW_CONFIDENCE_LIMIT: f64 = 1e-5;

fn j() -> Complex64 {
    Complex64::new(0.0, 1.0)
}

fn k0(frequency_ghz: f64) -> f64 {
    2.0 * PI / crate::wavelength_mm(frequency_ghz)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlabResponse {
    pub frequency_ghz: f64,
    pub s11: Complex64,
    pub s21: Complex64,
    pub thickness_mm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveParams {
    pub n: Complex64,
    pub z: Complex64,
    pub eps: Complex64,
    pub mu: Complex64,
    /// Branch of the complex logarithm used for `Re n`.
    pub m: i32,
    /// False near Fabry-Perot points where `z` is ill-conditioned.
    pub confident: bool,
}

/// Passive branches: `Im n <= 0` (then `Re n >= 0`), `Re z >= 0`.
fn index_and_impedance(eps: Complex64, mu: Complex64) -> (Complex64, Complex64) {
    let mut n = (eps * mu).sqrt();
    if n.im > 0.0 || (n.im == 0.0 && n.re < 0.0) {
        n = -n;
    }
    let mut z = (mu / eps).sqrt();
    if z.re < 0.0 {
        z = -z;
    }
    (n, z)
}

fn check_geometry(thickness_mm: f64, frequency_ghz: f64) -> Result<()> {
    if !(thickness_mm > 0.0 && thickness_mm.is_finite()) {
        return Err(Error::InvalidSpec(format!("slab thickness must be positive, got {thickness_mm}")));
    }
    if !(frequency_ghz > 0.0 && frequency_ghz.is_finite()) {
        return Err(Error::InvalidSpec(format!("frequency must be positive, got {frequency_ghz}")));
    }
    Ok(())
}

/// Exact S-parameters of a homogeneous slab in vacuum.
pub fn slab_sparams(eps: Complex64, mu: Complex64, thickness_mm: f64, frequency_ghz: f64) -> Result<SlabResponse> {
    check_geometry(thickness_mm, frequency_ghz)?;
    let (n, z) = index_and_impedance(eps, mu);
    let g = (z - 1.0) / (z + 1.0);
    let p = (-j() * n * k0(frequency_ghz) * thickness_mm).exp();
    let den = 1.0 - g * g * p * p;
    Ok(SlabResponse {
        frequency_ghz,
        s11: g * (1.0 - p * p) / den,
        s21: p * (1.0 - g * g) / den,
        thickness_mm,
    })
}

/// One layer of a stack: permittivity, permeability, thickness in mm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layer {
    pub eps: Complex64,
    pub mu: Complex64,
    pub thickness_mm: f64,
}

/// Cascaded ABCD matrices of a layer stack between vacuum half-spaces.
/// The reported thickness is the total.
pub fn stacked_sparams(layers: &[Layer], frequency_ghz: f64) -> Result<SlabResponse> {
    if layers.is_empty() {
        return Err(Error::InvalidSpec("layer stack is empty".into()));
    }
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let mut m = [[one, zero], [zero, one]];
    let mut total = 0.0;
    for l in layers {
        check_geometry(l.thickness_mm, frequency_ghz)?;
        let (n, z) = index_and_impedance(l.eps, l.mu);
        let th = n * k0(frequency_ghz) * l.thickness_mm;
        let (c, s) = (th.cos(), th.sin());
        let layer = [[c, j() * z * s], [j() * s / z, c]];
        m = [
            [
                m[0][0] * layer[0][0] + m[0][1] * layer[1][0],
                m[0][0] * layer[0][1] + m[0][1] * layer[1][1],
            ],
            [
                m[1][0] * layer[0][0] + m[1][1] * layer[1][0],
                m[1][0] * layer[0][1] + m[1][1] * layer[1][1],
            ],
        ];
        total += l.thickness_mm;
    }
    let [[a, b], [c, d]] = m;
    let den = a + b + c + d;
    Ok(SlabResponse {
        frequency_ghz,
        s11: (a + b - c - d) / den,
        s21: 2.0 / den,
        thickness_mm: total,
    })
}

/// Impedance, transmission term and confidence from one response.
fn impedance(r: &SlabResponse) -> Result<(Complex64, Complex64, bool)> {
    check_geometry(r.thickness_mm, r.frequency_ghz)?;
    if !(r.s21.norm() > OPAQUE_LIMIT) {
        return Err(Error::OpaqueSlab(r.s21.norm()));
    }
    let (s11, s21) = (r.s11, r.s21);
    let num = (1.0 + s11) * (1.0 + s11) - s21 * s21;
    let den = (1.0 - s11) * (1.0 - s11) - s21 * s21;
    if num.norm() < DEGENERATE_LIMIT && den.norm() < DEGENERATE_LIMIT {
        // Matched and transparent: no reflection to read the impedance from.
        let z = Complex64::new(1.0, 0.0);
        return Ok((z, s21, false));
    }
    let mut z = (num / den).sqrt();
    if z.re < 0.0 {
        z = -z;
    }
    let g = (z - 1.0) / (z + 1.0);
    let p = s21 / (1.0 - s11 * g);
    Ok((z, p, den.norm() >= LOW_CONFIDENCE_LIMIT))
}

fn assemble(p: Complex64, z: Complex64, m: i32, kd: f64, confident: bool) -> EffectiveParams {
    let phi = -p.arg();
    let n = Complex64::new((phi + 2.0 * PI * m as f64) / kd, p.norm().ln() / kd);
    EffectiveParams {
        n,
        z,
        eps: n / z,
        mu: n * z,
        m,
        confident,
    }
}

/// Invert one response. Without a hint the branch must satisfy
/// `Re n >= 0` and `Re(n) k0 d <= pi` uniquely (electrically thin slab).
pub fn retrieve_params(response: &SlabResponse, hint: Option<i32>) -> Result<EffectiveParams> {
    let (z, p, confident) = impedance(response)?;
    let kd = k0(response.frequency_ghz) * response.thickness_mm;
    let m = match hint {
        Some(m) => m,
        None => {
            let phi = -p.arg();
            let fits = |m: i32| {
                let th = phi + 2.0 * PI * m as f64;
                th >= 0.0 && th <= PI
            };
            let candidates: Vec<i32> = (-1..=1).filter(|&m| fits(m)).collect();
            if candidates.len() != 1 {
                let near: Vec<i32> = (0..=1).filter(|&m| phi + 2.0 * PI * m as f64 >= 0.0).collect();
                return Err(Error::BranchAmbiguity { candidates: near });
            }
            candidates[0]
        }
    };
    Ok(assemble(p, z, m, kd, confident))
}

/// Invert a frequency-ordered sweep, carrying the branch by phase continuity.
pub fn retrieve_sweep(responses: &[SlabResponse], hint: Option<i32>) -> Result<Vec<EffectiveParams>> {
    for w in responses.windows(2) {
        if !(w[1].frequency_ghz > w[0].frequency_ghz) {
            return Err(Error::InvalidSpec(format!(
                "sweep frequencies must increase strictly ({} then {})",
                w[0].frequency_ghz, w[1].frequency_ghz
            )));
        }
    }
    let mut out = Vec::with_capacity(responses.len());
    let Some(first) = responses.first() else {
        return Ok(out);
    };
    let anchor = retrieve_params(first, hint)?;
    let kd0 = k0(first.frequency_ghz) * first.thickness_mm;
    let mut theta_prev = anchor.n.re * kd0;
    let mut f_prev = first.frequency_ghz;
    out.push(anchor);
    for r in &responses[1..] {
        let (z, p, confident) = impedance(r)?;
        let kd = k0(r.frequency_ghz) * r.thickness_mm;
        let phi = -p.arg();
        let predicted = theta_prev * r.frequency_ghz / f_prev;
        let m = ((predicted - phi) / (2.0 * PI)).round() as i32;
        let theta = phi + 2.0 * PI * m as f64;
        if (theta - theta_prev).abs() > PI {
            return Err(Error::UndersampledSweep {
                f_lo: f_prev,
                f_hi: r.frequency_ghz,
                step: theta - theta_prev,
            });
        }
        out.push(assemble(p, z, m, kd, confident));
        theta_prev = theta;
        f_prev = r.frequency_ghz;
    }
    Ok(out)
}

/// Read `f_ghz,s11_re,s11_im,s21_re,s21_im,t_mm`.
pub fn parse_sweep_csv(path: &Path, text: &str) -> Result<Vec<SlabResponse>> {
    let bad = |m: String| Error::Parse {
        path: path.to_path_buf(),
        message: m,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let want = ["f_ghz", "s11_re", "s11_im", "s21_re", "s21_im", "t_mm"];
    if headers.iter().collect::<Vec<_>>() != want {
        return Err(bad(format!("expected header {}", want.join(","))));
    }
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let v: Vec<f64> = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(format!("row {}: {e}", line + 2)))?;
        out.push(SlabResponse {
            frequency_ghz: v[0],
            s11: Complex64::new(v[1], v[2]),
            s21: Complex64::new(v[3], v[4]),
            thickness_mm: v[5],
        });
    }
    Ok(out)
}

pub fn sweep_to_csv(responses: &[SlabResponse]) -> String {
    let mut s = String::from("f_ghz,s11_re,s11_im,s21_re,s21_im,t_mm\n");
    for r in responses {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            sig9(r.frequency_ghz),
            sig9(r.s11.re),
            sig9(r.s11.im),
            sig9(r.s21.re),
            sig9(r.s21.im),
            sig9(r.thickness_mm)
        ));
    }
    s
}

/// `f_ghz,n_re,n_im,z_re,z_im,eps_re,eps_im,mu_re,mu_im,m`.
pub fn params_to_csv(responses: &[SlabResponse], params: &[EffectiveParams]) -> String {
    let mut s = String::from("f_ghz,n_re,n_im,z_re,z_im,eps_re,eps_im,mu_re,mu_im,m\n");
    for (r, p) in responses.iter().zip(params) {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            sig9(r.frequency_ghz),
            sig9(p.n.re),
            sig9(p.n.im),
            sig9(p.z.re),
            sig9(p.z.im),
            sig9(p.eps.re),
            sig9(p.eps.im),
            sig9(p.mu.re),
            sig9(p.mu.im),
            p.m
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn vacuum_slab() {
        let r = slab_sparams(c(1.0), c(1.0), 3.0, 35.0).unwrap();
        assert!(r.s11.norm() < 1e-15);
        let expected = Complex64::from_polar(1.0, -k0(35.0) * 3.0);
        assert!((r.s21 - expected).norm() < 1e-14);
        let p = retrieve_params(&slab_sparams(c(1.0), c(1.0), 0.508, 35.0).unwrap(), None).unwrap();
        for v in [p.n, p.z, p.eps, p.mu] {
            assert!((v - 1.0).norm() < 1e-9);
        }
        assert_eq!(p.m, 0);
    }

    #[test]
    fn matched_and_half_wave_slabs_do_not_reflect() {
        let r = slab_sparams(c(4.0), c(4.0), 1.3, 31.0).unwrap();
        assert!(r.s11.norm() < 1e-15);
        let lambda = crate::wavelength_mm(30.0);
        let r = slab_sparams(c(4.0), c(1.0), lambda / 4.0, 30.0).unwrap();
        assert!(r.s11.norm() < 1e-14);
        // Half-wave slab: z cannot be read off, flagged and reported as 1.
        let p = retrieve_params(&r, Some(0)).unwrap();
        assert!(!p.confident);
        assert_eq!(p.z, c(1.0));
    }

    #[test]
    fn thin_slab_round_trip() {
        let lambda = crate::wavelength_mm(32.0);
        let r = slab_sparams(c(4.0), c(1.0), lambda / 20.0, 32.0).unwrap();
        let p = retrieve_params(&r, None).unwrap();
        assert!((p.eps - 4.0).norm() < 1e-6);
        assert!((p.mu - 1.0).norm() < 1e-6);
        assert!(p.confident);
        let r = slab_sparams(c(10.0), c(1.0), 0.508, 35.0).unwrap();
        let p = retrieve_params(&r, None).unwrap();
        assert!((p.eps - 10.0).norm() < 1e-6);
        assert_eq!(p.m, 0);
    }

    #[test]
    fn lossy_slab_keeps_passive_sign() {
        let eps = Complex64::new(6.0, -0.4);
        let r = slab_sparams(eps, c(1.0), 0.508, 35.0).unwrap();
        assert!(r.s11.norm_sqr() + r.s21.norm_sqr() < 1.0);
        let p = retrieve_params(&r, None).unwrap();
        assert!(p.n.im < 0.0);
        assert!((p.eps - eps).norm() < 1e-9);
    }

    #[test]
    fn thick_slab_needs_a_hint() {
        // Electrical length of 1.5 pi: no branch lands in [0, pi].
        let t = 1.5 * PI / (4.0 * k0(30.0));
        let r = slab_sparams(c(16.0), c(1.0), t, 30.0).unwrap();
        assert!(matches!(
            retrieve_params(&r, None),
            Err(Error::BranchAmbiguity { .. })
        ));
        let m = 1;
        let p = retrieve_params(&r, Some(m)).unwrap();
        assert!((p.eps - 16.0).norm() < 1e-6);
    }

    #[test]
    fn opaque_slab_is_rejected() {
        let r = SlabResponse {
            frequency_ghz: 30.0,
            s11: c(-1.0),
            s21: c(0.0),
            thickness_mm: 1.0,
        };
        assert!(matches!(retrieve_params(&r, None), Err(Error::OpaqueSlab(_))));
    }

    #[test]
    fn sweep_tracks_branch_and_flags_gaps() {
        let freqs: Vec<f64> = (0..=40).map(|k| 30.0 + 0.25 * k as f64).collect();
        let sweep: Vec<_> = freqs
            .iter()
            .map(|&f| slab_sparams(c(16.0), c(1.0), 6.0, f).unwrap())
            .collect();
        let theta0 = 4.0 * k0(30.0) * 6.0;
        let m0 = ((theta0 + PI) / (2.0 * PI)).floor() as i32;
        let out = retrieve_sweep(&sweep, Some(m0)).unwrap();
        for p in &out {
            assert!((p.eps - 16.0).norm() < 1e-6, "{p:?}");
        }
        assert!(out.last().unwrap().m >= m0);

        let sparse = [sweep[0], sweep[40]];
        assert!(matches!(
            retrieve_sweep(&sparse, Some(m0)),
            Err(Error::UndersampledSweep { .. })
        ));
        let single = retrieve_sweep(&sweep[..1], Some(m0)).unwrap();
        assert_eq!(single[0], retrieve_params(&sweep[0], Some(m0)).unwrap());
        assert!(retrieve_sweep(&[sweep[1], sweep[0]], None).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let sweep: Vec<_> = [30.0, 31.0]
            .iter()
            .map(|&f| slab_sparams(c(2.0), c(1.0), 0.508, f).unwrap())
            .collect();
        let text = sweep_to_csv(&sweep);
        let back = parse_sweep_csv(Path::new("in.csv"), &text).unwrap();
        assert_eq!(back.len(), 2);
        assert!((back[1].s21 - sweep[1].s21).norm() < 1e-8);
        let out = params_to_csv(&back, &retrieve_sweep(&back, None).unwrap());
        assert!(out.starts_with("f_ghz,n_re,n_im,z_re,z_im,eps_re,eps_im,mu_re,mu_im,m\n"));
        assert!(parse_sweep_csv(Path::new("x"), "a,b\n1,2\n").is_err());
    }

    #[test]
    fn single_layer_stack_matches_slab() {
        let l = Layer {
            eps: c(3.0),
            mu: c(1.0),
            thickness_mm: 0.9,
        };
        let a = stacked_sparams(&[l], 33.0).unwrap();
        let b = slab_sparams(c(3.0), c(1.0), 0.9, 33.0).unwrap();
        assert!((a.s11 - b.s11).norm() < 1e-12);
        assert!((a.s21 - b.s21).norm() < 1e-12);
    }
}
