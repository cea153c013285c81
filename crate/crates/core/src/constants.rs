//! Gamma and Beta functions and the semiclassical constants
//! L_{γ,d} = (2π)^{−d} ∫ (1 − |ξ|²)₊^γ dξ = Γ(γ+1) / ((4π)^{d/2} Γ(γ+1+d/2)).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::integrate;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

fn lanczos(x: f64) -> f64 {
    if x < 0.5 {
        return PI / ((PI * x).sin() * lanczos(1.0 - x));
    }
    let x = x - 1.0;
    let mut t = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        t += c / (x + i as f64);
    }
    let w = x + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * w.powf(x + 0.5) * (-w).exp() * t
}

/// Γ(x) for x > 0.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("gamma needs a finite positive argument, got {x}")));
    }
    if x == x.floor() && x <= 171.0 {
        return Ok((1..x as u64).map(|k| k as f64).product());
    }
    Ok(lanczos(x))
}

/// B(p, q) = Γ(p)Γ(q)/Γ(p+q).
pub fn beta_fn(p: f64, q: f64) -> Result<f64> {
    if !(p > 0.0 && q > 0.0) {
        return Err(Error::Domain(format!("beta needs positive arguments, got ({p}, {q})")));
    }
    Ok(gamma_fn(p)? * gamma_fn(q)? / gamma_fn(p + q)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemiclassicalConstant {
    pub gamma: f64,
    pub d: u32,
    pub value: f64,
}

pub fn semiclassical(gamma: f64, d: u32) -> Result<SemiclassicalConstant> {
    if !(gamma >= 0.0) {
        return Err(Error::Domain(format!("gamma must be nonnegative, got {gamma}")));
    }
    if d == 0 {
        return Err(Error::Domain("dimension must be positive".into()));
    }
    let half = 0.5 * d as f64;
    let value = gamma_fn(gamma + 1.0)? / ((4.0 * PI).powf(half) * gamma_fn(gamma + 1.0 + half)?);
    Ok(SemiclassicalConstant { gamma, d, value })
}

/// L^cl_{γ,d}.
pub fn l_classical(gamma: f64, d: u32) -> Result<f64> {
    semiclassical(gamma, d).map(|c| c.value)
}

/// B(γ−3/2, 2)/B(γ−3/2, 5/2), the coefficient of the boundary term in the
/// Aizenman-Lieb lift; tends to 1 as γ → 3/2.
pub fn boundary_ratio(gamma: f64) -> Result<f64> {
    if !(gamma > 1.5) {
        return Err(Error::Domain(format!("need gamma > 3/2, got {gamma}")));
    }
    let e = gamma - 1.5;
    // B(e, 2)/B(e, 5/2) = Γ(2) Γ(e + 5/2) / (Γ(e + 2) Γ(5/2)).
    Ok(gamma_fn(e + 2.5)? / (gamma_fn(e + 2.0)? * gamma_fn(2.5)?))
}

/// One identity evaluated on both sides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl IdentityCheck {
    fn new(name: String, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let rel_error = (lhs - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE);
        Self { name, lhs, rhs, rel_error, tolerance, passed: rel_error <= tolerance }
    }
}

/// L_{γ,d−1} · L_{γ+(d−1)/2,1} against L_{γ,d}.
pub fn product_identity(gamma: f64, d: u32) -> Result<IdentityCheck> {
    if d < 2 {
        return Err(Error::Domain("product identity needs d >= 2".into()));
    }
    let lhs = l_classical(gamma, d - 1)? * l_classical(gamma + 0.5 * (d - 1) as f64, 1)?;
    let rhs = l_classical(gamma, d)?;
    Ok(IdentityCheck::new(format!("product gamma={gamma} d={d}"), lhs, rhs, 1e-12))
}

/// (3/16)·B(γ−3/2, 3)/B(γ−3/2, 5/2) against L_{γ,1}.
pub fn beta_ratio_identity(gamma: f64) -> Result<IdentityCheck> {
    let e = gamma - 1.5;
    let lhs = 3.0 / 16.0 * beta_fn(e, 3.0)? / beta_fn(e, 2.5)?;
    let rhs = l_classical(gamma, 1)?;
    Ok(IdentityCheck::new(format!("beta ratio gamma={gamma}"), lhs, rhs, 1e-12))
}

/// L_{γ,d} from quadrature of its defining integral (d = 1, 2).
pub fn l_classical_quadrature(gamma: f64, d: u32) -> Result<f64> {
    match d {
        1 => Ok(integrate(|t| (1.0 - t * t).max(0.0).powf(gamma), -1.0, 1.0, 1e-14) / (2.0 * PI)),
        2 => Ok(integrate(|r| (1.0 - r * r).max(0.0).powf(gamma) * r, 0.0, 1.0, 1e-14) / (2.0 * PI)),
        _ => Err(Error::Domain(format!("quadrature check supports d = 1, 2, got {d}"))),
    }
}

/// Full audit: the 3/16 value, product and Beta-ratio identities, and the
/// quadrature cross-check.
pub fn audit() -> Result<Vec<IdentityCheck>> {
    let mut out = vec![IdentityCheck::new("L(3/2,1) = 3/16".into(), l_classical(1.5, 1)?, 3.0 / 16.0, 1e-14)];
    for gamma in [1.5, 2.0, 3.0] {
        for d in [2, 3] {
            out.push(product_identity(gamma, d)?);
        }
    }
    for gamma in [1.6, 1.75, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0] {
        out.push(beta_ratio_identity(gamma)?);
    }
    for gamma in [0.0, 0.5, 1.5, 2.0, 3.0] {
        for d in [1, 2] {
            out.push(IdentityCheck::new(
                format!("quadrature gamma={gamma} d={d}"),
                l_classical_quadrature(gamma, d)?,
                l_classical(gamma, d)?,
                1e-9,
            ));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn gamma_values() {
        assert_eq!(gamma_fn(1.0).unwrap(), 1.0);
        assert_eq!(gamma_fn(5.0).unwrap(), 24.0);
        assert!(rel(gamma_fn(2.5).unwrap(), 0.75 * PI.sqrt()) < 1e-14);
        assert!(rel(gamma_fn(0.5).unwrap(), PI.sqrt()) < 1e-14);
        // 30-digit references.
        assert!(rel(gamma_fn(3.7).unwrap(), 4.170_651_783_796_604_030_086_984_944_69) < 1e-13);
        assert!(rel(gamma_fn(1.0 / 3.0).unwrap(), 2.678_938_534_707_747_633_655_692_940_97) < 1e-13);
        assert!(rel(gamma_fn(10.3).unwrap(), 716_430.689_062_376_406_625_383_355_584) < 1e-13);
    }

    #[test]
    fn gamma_domain() {
        assert!(gamma_fn(0.0).is_err());
        assert!(gamma_fn(-1.5).is_err());
        assert!(beta_fn(0.0, 1.0).is_err());
    }

    #[test]
    fn beta_values() {
        assert!(rel(beta_fn(1.0, 1.0).unwrap(), 1.0) < 1e-15);
        assert!(rel(beta_fn(1.0, 2.0).unwrap(), 0.5) < 1e-15);
        let q = integrate(|t| (1.0 - t).powf(1.5) / t.sqrt(), 0.0, 1.0, 1e-13);
        assert!(rel(beta_fn(0.5, 2.5).unwrap(), q) < 1e-10);
        assert!(rel(beta_fn(0.5, 2.5).unwrap(), 1.178_097_245_096_172_464_423_491_268_73) < 1e-13);
    }

    #[test]
    fn classical_constants() {
        assert!((l_classical(1.5, 1).unwrap() - 3.0 / 16.0).abs() < 1e-14);
        assert!((l_classical(0.0, 1).unwrap() - 1.0 / PI).abs() < 1e-14);
        // d = 2, γ = 1: (2π)^{-2} · π/2 = 1/(8π).
        assert!(rel(l_classical(1.0, 2).unwrap(), 1.0 / (8.0 * PI)) < 1e-14);
    }

    #[test]
    fn boundary_ratio_limit() {
        let r = boundary_ratio(1.5 + 1e-8).unwrap();
        assert!((r - 1.0).abs() < 1e-7);
        assert!(boundary_ratio(1.5).is_err());
        let direct = beta_fn(0.5, 2.0).unwrap() / beta_fn(0.5, 2.5).unwrap();
        assert!(rel(boundary_ratio(2.0).unwrap(), direct) < 1e-13);
    }

    #[test]
    fn audit_passes() {
        for c in audit().unwrap() {
            assert!(c.passed, "{c:?}");
        }
    }

    proptest! {
        #[test]
        fn recurrence(x in 0.05f64..40.0) {
            let a = gamma_fn(x + 1.0).unwrap();
            let b = x * gamma_fn(x).unwrap();
            prop_assert!(rel(a, b) < 1e-12);
        }

        #[test]
        fn beta_symmetry(p in 0.1f64..8.0, q in 0.1f64..8.0) {
            prop_assert!(rel(beta_fn(p, q).unwrap(), beta_fn(q, p).unwrap()) < 1e-13);
        }

        #[test]
        fn beta_ratio_identity_holds(g in 1.51f64..6.0) {
            prop_assert!(beta_ratio_identity(g).unwrap().passed);
        }
    }
}
