//! Media that the solver can sample: anything that returns a diagonal
//! material tensor at a point of the y–z plane.

use serde::{Deserialize, Serialize};

/// Relative permittivity and permeability along the three axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagonalTensorPair {
    pub eps_xx: f64,
    pub eps_yy: f64,
    pub eps_zz: f64,
    pub mu_xx: f64,
    pub mu_yy: f64,
    pub mu_zz: f64,
}

impl DiagonalTensorPair {
    pub const VACUUM: Self = Self::isotropic(1.0);

    /// Scalar permittivity with unit permeability.
    pub const fn isotropic(eps: f64) -> Self {
        Self {
            eps_xx: eps,
            eps_yy: eps,
            eps_zz: eps,
            mu_xx: 1.0,
            mu_yy: 1.0,
            mu_zz: 1.0,
        }
    }

    pub fn max_eps(&self) -> f64 {
        self.eps_xx.max(self.eps_yy).max(self.eps_zz)
    }

    pub fn max_mu(&self) -> f64 {
        self.mu_xx.max(self.mu_yy).max(self.mu_zz)
    }

    pub fn is_vacuum(&self) -> bool {
        *self == Self::VACUUM
    }

    pub fn components(&self) -> [f64; 6] {
        [
            self.eps_xx,
            self.eps_yy,
            self.eps_zz,
            self.mu_xx,
            self.mu_yy,
            self.mu_zz,
        ]
    }
}

/// Axis-aligned rectangle in the y–z plane, mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub y_min: f64,
    pub y_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl Rect {
    pub fn point(y: f64, z: f64) -> Self {
        Self {
            y_min: y,
            y_max: y,
            z_min: z,
            z_max: z,
        }
    }

    pub fn union(&self, other: &Rect) -> Rect {
        Rect {
            y_min: self.y_min.min(other.y_min),
            y_max: self.y_max.max(other.y_max),
            z_min: self.z_min.min(other.z_min),
            z_max: self.z_max.max(other.z_max),
        }
    }

    pub fn contains(&self, y: f64, z: f64) -> bool {
        y >= self.y_min && y <= self.y_max && z >= self.z_min && z <= self.z_max
    }
}

pub trait Medium: Sync {
    fn material_at(&self, y: f64, z: f64) -> DiagonalTensorPair;

    /// Bounding box of the non-vacuum region, `None` for empty space.
    fn extent(&self) -> Option<Rect>;

    /// Largest relative permittivity and permeability anywhere in the medium.
    fn peak_material(&self) -> (f64, f64);
}

impl<M: Medium + ?Sized> Medium for &M {
    fn material_at(&self, y: f64, z: f64) -> DiagonalTensorPair {
        (**self).material_at(y, z)
    }
    fn extent(&self) -> Option<Rect> {
        (**self).extent()
    }
    fn peak_material(&self) -> (f64, f64) {
        (**self).peak_material()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Vacuum;

impl Medium for Vacuum {
    fn material_at(&self, _y: f64, _z: f64) -> DiagonalTensorPair {
        DiagonalTensorPair::VACUUM
    }
    fn extent(&self) -> Option<Rect> {
        None
    }
    fn peak_material(&self) -> (f64, f64) {
        (1.0, 1.0)
    }
}

/// Uncompressed circular Luneburg cross-section, eps = 2 - (r/R)^2 inside r < R.
#[derive(Debug, Clone, Copy)]
pub struct CircularLuneburg {
    pub radius: f64,
}

impl Medium for CircularLuneburg {
    fn material_at(&self, y: f64, z: f64) -> DiagonalTensorPair {
        let r2 = (y * y + z * z) / (self.radius * self.radius);
        if r2 < 1.0 {
            DiagonalTensorPair::isotropic(2.0 - r2)
        } else {
            DiagonalTensorPair::VACUUM
        }
    }
    fn extent(&self) -> Option<Rect> {
        Some(Rect {
            y_min: -self.radius,
            y_max: self.radius,
            z_min: -self.radius,
            z_max: self.radius,
        })
    }
    fn peak_material(&self) -> (f64, f64) {
        (2.0, 1.0)
    }
}

/// A homogeneous isotropic rectangle in vacuum. Mostly useful in tests.
#[derive(Debug, Clone, Copy)]
pub struct Block {
    pub rect: Rect,
    pub eps: f64,
}

impl Medium for Block {
    fn material_at(&self, y: f64, z: f64) -> DiagonalTensorPair {
        if self.rect.contains(y, z) {
            DiagonalTensorPair::isotropic(self.eps)
        } else {
            DiagonalTensorPair::VACUUM
        }
    }
    fn extent(&self) -> Option<Rect> {
        Some(self.rect)
    }
    fn peak_material(&self) -> (f64, f64) {
        (self.eps.max(1.0), 1.0)
    }
}
