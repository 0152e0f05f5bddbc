//! Convolutional PML coefficients along one axis.
//!
//! All coefficients are dimensionless: conductivities enter as
//! `sigma dt / eps0`, which for the usual optimal grading is
//! `0.8 (m + 1) S depth^m` with `S = c dt / delta`.

const GRADING_ORDER: i32 = 3;
const KAPPA_MAX: f64 = 2.0;
/// CFS shift as a fraction of `omega eps0`.
const ALPHA_FRACTION: f64 = 0.1;

#[derive(Debug, Clone)]
pub(crate) struct AxisProfile {
    /// `1/kappa - 1`; zero outside the absorber.
    pub kinv_minus_one: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    /// Indices inside the absorber.
    pub active: Vec<usize>,
}

#[derive(Debug, Clone)]
pub(crate) struct CpmlAxis {
    /// Profiles at integer (node) positions, length `n`.
    pub node: AxisProfile,
    /// Profiles at half-integer positions `k + 1/2`, length `n - 1`.
    pub half: AxisProfile,
}

impl CpmlAxis {
    pub fn new(n: usize, pml: usize, courant: f64, omega_dt: f64) -> Self {
        let depth = |x: f64| -> f64 {
            let lo = pml as f64;
            let hi = (n - 1 - pml) as f64;
            let d = if x < lo {
                (lo - x) / pml as f64
            } else if x > hi {
                (x - hi) / pml as f64
            } else {
                0.0
            };
            d.clamp(0.0, 1.0)
        };
        let build = |positions: Vec<f64>| -> AxisProfile {
            let mut p = AxisProfile {
                kinv_minus_one: vec![0.0; positions.len()],
                b: vec![0.0; positions.len()],
                c: vec![0.0; positions.len()],
                active: Vec::new(),
            };
            for (k, &x) in positions.iter().enumerate() {
                let d = depth(x);
                if d <= 0.0 {
                    continue;
                }
                let g = d.powi(GRADING_ORDER);
                let sigma = 0.8 * f64::from(GRADING_ORDER + 1) * courant * g;
                let kappa = 1.0 + (KAPPA_MAX - 1.0) * g;
                let alpha = ALPHA_FRACTION * omega_dt * (1.0 - d);
                let b = (-(sigma / kappa + alpha)).exp();
                p.kinv_minus_one[k] = 1.0 / kappa - 1.0;
                p.b[k] = b;
                p.c[k] = sigma / (kappa * (sigma + kappa * alpha)) * (b - 1.0);
                p.active.push(k);
            }
            p
        };
        let node = build((0..n).map(|k| k as f64).collect());
        let half = build((0..n.saturating_sub(1)).map(|k| k as f64 + 0.5).collect());
        Self { node, half }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_is_transparent() {
        let ax = CpmlAxis::new(50, 8, 0.6, 0.05);
        for k in 8..=41 {
            assert_eq!(ax.node.b[k], 0.0);
            assert_eq!(ax.node.c[k], 0.0);
            assert_eq!(ax.node.kinv_minus_one[k], 0.0);
        }
        assert_eq!(ax.node.active.len(), 16);
        assert_eq!(ax.half.active.len(), 16);
        // Grading is symmetric.
        for k in 0..8 {
            assert!((ax.node.b[k] - ax.node.b[49 - k]).abs() < 1e-15);
            assert!((ax.half.c[k] - ax.half.c[48 - k]).abs() < 1e-15);
        }
        // Deeper cells absorb more.
        assert!(ax.node.b[0] < ax.node.b[5]);
    }
}
