//! Design and verification toolkit for a flattened Luneburg lens.
//!
//! The pipeline runs from the transformed material profile ([`lens`]),
//! through quantisation into a stack of printed-circuit layers
//! ([`discretize`]), to a 2D frequency-domain check with an FDTD solver
//! ([`fdtd`]) and a near-to-far-field transform ([`farfield`]). Effective
//! parameters of unit cells are recovered from slab S-parameters in
//! [`retrieval`]. [`pipeline`] wires everything to files.

pub mod config;
pub mod discretize;
pub mod error;
pub mod farfield;
pub mod fdtd;
pub mod io;
pub mod lens;
pub mod medium;
pub mod pipeline;
pub mod retrieval;

pub use error::{Error, ErrorKind, Result};
pub use lens::{LensProfile, LensSpec, MaterialMap, ProfileOptions};
pub use medium::{DiagonalTensorPair, Medium, Rect};

/// Speed of light, mm/ns (so wavelength in mm is this over GHz).
pub const C0_MM_PER_NS: f64 = 299.792_458;

/// Free-space impedance, ohm.
pub const ETA0: f64 = 376.730_313_668;

pub fn wavelength_mm(frequency_ghz: f64) -> f64 {
    C0_MM_PER_NS / frequency_ghz
}
