//! Steady-state phasors and their on-disk formats.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Polarization, SimGrid};
use crate::error::{Error, Result};
use crate::io::sig9;
use crate::medium::Rect;

const MAGIC: &[u8; 4] = b"FLPH";
const VERSION: u16 = 1;
const HEADER_LEN: usize = 32;

/// Which of the three solver fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldComponent {
    /// Out-of-plane field on nodes.
    U,
    /// In-plane field along y-normal edges, offset half a cell in z.
    A,
    /// In-plane field offset half a cell in y.
    B,
}

impl FieldComponent {
    pub const ALL: [FieldComponent; 3] = [Self::U, Self::A, Self::B];

    /// Physical name of the component for the given polarization.
    pub fn name(self, pol: Polarization) -> &'static str {
        match (pol, self) {
            (Polarization::Te, Self::U) => "ex",
            (Polarization::Te, Self::A) => "hy",
            (Polarization::Te, Self::B) => "hz",
            (Polarization::Tm, Self::U) => "hx",
            (Polarization::Tm, Self::A) => "ey",
            (Polarization::Tm, Self::B) => "ez",
        }
    }

    fn code(self) -> u16 {
        match self {
            Self::U => 0,
            Self::A => 1,
            Self::B => 2,
        }
    }

    fn from_code(c: u16) -> Option<Self> {
        match c {
            0 => Some(Self::U),
            1 => Some(Self::A),
            2 => Some(Self::B),
            _ => None,
        }
    }

    /// Offset of the sample from its node, in cells (y, z).
    pub fn offset(self) -> (f64, f64) {
        match self {
            Self::U => (0.0, 0.0),
            Self::A => (0.0, 0.5),
            Self::B => (0.5, 0.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PhasorField {
    pub grid: SimGrid,
    pub polarization: Polarization,
    pub frequency_ghz: f64,
    pub steps_per_period: usize,
    /// Medium extent plus sources.
    pub exclusion: Rect,
    pub u: Vec<Complex64>,
    pub a: Vec<Complex64>,
    pub b: Vec<Complex64>,
    /// Last relative change between successive periods.
    pub metric: f64,
    pub converged: bool,
    pub periods: usize,
    pub metric_history: Vec<f64>,
}

impl PhasorField {
    pub fn component(&self, c: FieldComponent) -> &[Complex64] {
        match c {
            FieldComponent::U => &self.u,
            FieldComponent::A => &self.a,
            FieldComponent::B => &self.b,
        }
    }

    pub fn u_at(&self, i: usize, j: usize) -> Complex64 {
        self.u[i * self.grid.nz + j]
    }

    /// Out-of-plane phasor at the node nearest to (y, z).
    pub fn u_near(&self, y: f64, z: f64) -> Option<Complex64> {
        let (i, j) = self.grid.nearest_node(y, z);
        if i < 0 || j < 0 || i >= self.grid.ny as i64 || j >= self.grid.nz as i64 {
            return None;
        }
        Some(self.u_at(i as usize, j as usize))
    }

    pub fn scaled(&self, factor: Complex64) -> PhasorField {
        let mut out = self.clone();
        for v in out.u.iter_mut().chain(&mut out.a).chain(&mut out.b) {
            *v *= factor;
        }
        out
    }

    /// `y_mm,z_mm,re,im`, one row per sample, y-major.
    pub fn to_csv(&self, c: FieldComponent) -> String {
        let g = &self.grid;
        let (oy, oz) = c.offset();
        let data = self.component(c);
        let mut out = String::with_capacity(g.len() * 64);
        out.push_str("y_mm,z_mm,re,im\n");
        for i in 0..g.ny {
            for j in 0..g.nz {
                let v = data[i * g.nz + j];
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    sig9(g.y(i as f64 + oy)),
                    sig9(g.z(j as f64 + oz)),
                    sig9(v.re),
                    sig9(v.im)
                ));
            }
        }
        out
    }

    /// 32-byte header (`FLPH`, version, component, ny, nz, dy, dz) then
    /// little-endian `re, im` pairs in y-major order.
    pub fn to_binary(&self, c: FieldComponent) -> Vec<u8> {
        let g = &self.grid;
        let data = self.component(c);
        let mut out = Vec::with_capacity(HEADER_LEN + data.len() * 16);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&c.code().to_le_bytes());
        out.extend_from_slice(&(g.ny as u32).to_le_bytes());
        out.extend_from_slice(&(g.nz as u32).to_le_bytes());
        out.extend_from_slice(&g.delta.to_le_bytes());
        out.extend_from_slice(&g.delta.to_le_bytes());
        for v in data {
            out.extend_from_slice(&v.re.to_le_bytes());
            out.extend_from_slice(&v.im.to_le_bytes());
        }
        out
    }
}

/// Decoded binary phasor dump.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasorDump {
    pub component: FieldComponent,
    pub ny: usize,
    pub nz: usize,
    pub dy: f64,
    pub dz: f64,
    pub values: Vec<Complex64>,
}

pub fn read_phasor_binary(path: &Path, bytes: &[u8]) -> Result<PhasorDump> {
    let bad = |m: &str| Error::Parse {
        path: path.to_path_buf(),
        message: m.to_string(),
    };
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(bad("not a phasor dump"));
    }
    let u16_at = |k: usize| u16::from_le_bytes([bytes[k], bytes[k + 1]]);
    let u32_at = |k: usize| u32::from_le_bytes(bytes[k..k + 4].try_into().unwrap());
    let f64_at = |k: usize| f64::from_le_bytes(bytes[k..k + 8].try_into().unwrap());
    if u16_at(4) != VERSION {
        return Err(bad("unsupported version"));
    }
    let component = FieldComponent::from_code(u16_at(6)).ok_or_else(|| bad("unknown component"))?;
    let ny = u32_at(8) as usize;
    let nz = u32_at(12) as usize;
    let (dy, dz) = (f64_at(16), f64_at(24));
    let n = ny * nz;
    if bytes.len() != HEADER_LEN + 16 * n {
        return Err(bad("payload length does not match header"));
    }
    let values = (0..n)
        .map(|k| {
            let o = HEADER_LEN + 16 * k;
            Complex64::new(f64_at(o), f64_at(o + 8))
        })
        .collect();
    Ok(PhasorDump {
        component,
        ny,
        nz,
        dy,
        dz,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field() -> PhasorField {
        let grid = SimGrid {
            delta: 0.25,
            ny: 3,
            nz: 2,
            i0: 1,
            j0: 0,
            pml: 0,
        };
        let u: Vec<_> = (0..6).map(|k| Complex64::new(k as f64, -(k as f64) / 3.0)).collect();
        PhasorField {
            grid,
            polarization: Polarization::Tm,
            frequency_ghz: 32.0,
            steps_per_period: 40,
            exclusion: Rect::point(0.0, 0.0),
            a: u.iter().map(|c| c * 2.0).collect(),
            b: u.iter().map(|c| c * 3.0).collect(),
            u,
            metric: 0.0,
            converged: true,
            periods: 1,
            metric_history: vec![],
        }
    }

    #[test]
    fn binary_round_trip() {
        let f = field();
        let bytes = f.to_binary(FieldComponent::A);
        assert_eq!(bytes.len(), 32 + 6 * 16);
        let d = read_phasor_binary(Path::new("x"), &bytes).unwrap();
        assert_eq!(d.component, FieldComponent::A);
        assert_eq!((d.ny, d.nz), (3, 2));
        assert_eq!(d.dy, 0.25);
        assert_eq!(d.values, f.a);
        assert!(read_phasor_binary(Path::new("x"), &bytes[..40]).is_err());
    }

    #[test]
    fn csv_layout() {
        let f = field();
        assert_eq!(FieldComponent::U.name(Polarization::Tm), "hx");
        assert_eq!(FieldComponent::B.name(Polarization::Te), "hz");
        let csv = f.to_csv(FieldComponent::B);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "y_mm,z_mm,re,im");
        assert_eq!(lines.len(), 7);
        // b sits half a cell up in y from node (0, 0) at y = -0.25.
        assert!(lines[1].starts_with("-1.25000000e-1,0.00000000e0,"));
    }

    #[test]
    fn scaling_is_linear() {
        let f = field();
        let g = f.scaled(Complex64::new(0.0, 2.0));
        assert_eq!(g.u[3], f.u[3] * Complex64::new(0.0, 2.0));
        assert_eq!(g.grid, f.grid);
    }
}
