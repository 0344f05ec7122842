//! Model parameters and quadrature settings shared by every estimator.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Parameters of the critical equation: dimension, coupling, time and ball radius.
///
/// Construction enforces `d >= 3`, `0 < kappa < (d-2)/2` (strict), `t > 0`, `R > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    d: usize,
    kappa: f64,
    t: f64,
    r: f64,
}

impl ModelParams {
    pub fn new(d: usize, kappa: f64, t: f64, r: f64) -> Result<Self> {
        check_dimension(d)?;
        check_coupling(d, kappa)?;
        if !(t.is_finite() && t > 0.0) {
            return domain(format!("time t must be positive and finite, got {t}"));
        }
        if !(r.is_finite() && r > 0.0) {
            return domain(format!("radius R must be positive and finite, got {r}"));
        }
        Ok(Self { d, kappa, t, r })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn radius(&self) -> f64 {
        self.r
    }

    pub fn with_kappa(&self, kappa: f64) -> Result<Self> {
        Self::new(self.d, kappa, self.t, self.r)
    }

    pub fn with_time(&self, t: f64) -> Result<Self> {
        Self::new(self.d, self.kappa, t, self.r)
    }

    pub fn with_radius(&self, r: f64) -> Result<Self> {
        Self::new(self.d, self.kappa, self.t, r)
    }

    /// Upper end of the admissible coupling range, `(d-2)/2`.
    pub fn critical_kappa(d: usize) -> f64 {
        (d as f64 - 2.0) / 2.0
    }
}

pub(crate) fn check_dimension(d: usize) -> Result<()> {
    if d < 3 {
        return domain(format!("dimension must be at least 3, got {d}"));
    }
    Ok(())
}

/// Coupling must lie strictly inside `(0, (d-2)/2)`; the boundary is rejected.
pub(crate) fn check_coupling(d: usize, kappa: f64) -> Result<()> {
    let kc = ModelParams::critical_kappa(d);
    if !(kappa.is_finite() && kappa > 0.0 && kappa < kc) {
        return domain(format!(
            "coupling kappa={kappa} outside the model range 0 < kappa < (d-2)/2 = {kc} for d={d}"
        ));
    }
    Ok(())
}

/// Tolerances for adaptive quadrature of oscillatory Bessel integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    /// Number of Bessel-zero blocks integrated directly before the tail treatment starts.
    pub tail_zero_blocks: usize,
}

impl QuadratureSpec {
    pub fn new(
        abs_tol: f64,
        rel_tol: f64,
        max_subdivisions: usize,
        tail_zero_blocks: usize,
    ) -> Result<Self> {
        if !(abs_tol > 0.0 && rel_tol > 0.0) {
            return domain("quadrature tolerances must be positive");
        }
        if max_subdivisions < 1 {
            return domain("max_subdivisions must be at least 1");
        }
        if tail_zero_blocks < 4 {
            return domain("tail_zero_blocks must be at least 4");
        }
        Ok(Self {
            abs_tol,
            rel_tol,
            max_subdivisions,
            tail_zero_blocks,
        })
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-10,
            max_subdivisions: 200,
            tail_zero_blocks: 64,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_boundary_coupling() {
        assert!(ModelParams::new(3, 0.5, 1.0, 1.0).is_err());
        assert!(ModelParams::new(3, 0.0, 1.0, 1.0).is_err());
        assert!(ModelParams::new(3, 0.4999, 1.0, 1.0).is_ok());
        assert!(ModelParams::new(5, 1.49, 1.0, 1.0).is_ok());
    }

    #[test]
    fn rejects_low_dimension_and_bad_time() {
        assert!(ModelParams::new(2, 0.1, 1.0, 1.0).is_err());
        assert!(ModelParams::new(3, 0.1, 0.0, 1.0).is_err());
        assert!(ModelParams::new(3, 0.1, 1.0, -1.0).is_err());
        assert!(ModelParams::new(3, 0.1, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn quadrature_spec_invariants() {
        assert!(QuadratureSpec::new(1e-12, 1e-9, 100, 3).is_err());
        assert!(QuadratureSpec::new(0.0, 1e-9, 100, 8).is_err());
        assert!(QuadratureSpec::new(1e-12, 1e-9, 0, 8).is_err());
        assert!(QuadratureSpec::new(1e-12, 1e-9, 1, 4).is_ok());
    }
}
