//! The Neumann Laplacian on the half-plane {x₁ > 0} against the lifted
//! bound Σλ^γ ≤ L_{γ,2}∫V^{γ+1} + ½L_{γ,1}∫μ₁(x′)^{γ+1/2}dx′ ≤ 2L_{γ,2}∫V^{γ+1},
//! where μ₁(x′) is the ground state energy of the Neumann problem on the
//! half-line with potential V(·, x′).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::l_classical;
use crate::error::{Error, Result};
use crate::fdoracle::{assemble_2d_halfplane, negative_eigs};
use crate::hermitian::HermitianMatrix;
use crate::inequalities::{InequalityName, InequalityReport};
use crate::model::{sort_dedup, PotentialSpec, Problem, ScalarProfile};
use crate::quadrature::{GL5_NODES, GL5_WEIGHTS};
use crate::spectrum::{find_spectrum, SearchOptions};
use crate::Tolerances;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Potential2d {
    /// V(x₁, x′) = v(x₁)·w(x′).
    Separable { x1: ScalarProfile, x2: ScalarProfile },
    /// Bilinear interpolation of `values[i][j]` at (x1[i], x2[j]), zero outside.
    Tabulated { x1: Vec<f64>, x2: Vec<f64>, values: Vec<Vec<f64>> },
}

impl Potential2d {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Separable { x1, x2 } => {
                x1.validate()?;
                x2.validate()
            }
            Self::Tabulated { x1, x2, values } => {
                let increasing = |a: &[f64]| a.len() >= 2 && a.windows(2).all(|w| w[0] < w[1]);
                if !increasing(x1) || !increasing(x2) {
                    return Err(Error::InvalidProfile(
                        "tabulated axes need at least two strictly increasing entries".into(),
                    ));
                }
                if values.len() != x1.len() || values.iter().any(|r| r.len() != x2.len()) {
                    return Err(Error::InvalidProfile(format!(
                        "tabulated values must be {}x{}",
                        x1.len(),
                        x2.len()
                    )));
                }
                if x1.iter().chain(x2).chain(values.iter().flatten()).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidProfile("tabulated entries must be finite".into()));
                }
                Ok(())
            }
        }
    }

    pub fn value(&self, a: f64, b: f64) -> f64 {
        match self {
            Self::Separable { x1, x2 } => x1.value(a) * x2.value(b),
            Self::Tabulated { x1, x2, values } => {
                let (Some((i, s)), Some((j, t))) = (locate(x1, a), locate(x2, b)) else {
                    return 0.0;
                };
                let v = |p: usize, q: usize| values[p][q];
                (1.0 - s) * ((1.0 - t) * v(i, j) + t * v(i, j + 1))
                    + s * ((1.0 - t) * v(i + 1, j) + t * v(i + 1, j + 1))
            }
        }
    }

    fn breakpoints(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Self::Separable { x1, x2 } => (x1.breakpoints(), x2.breakpoints()),
            Self::Tabulated { x1, x2, .. } => (x1.clone(), x2.clone()),
        }
    }

    /// The half-line profile x₁ ↦ V(x₁, x′).
    fn slice(&self, xp: f64) -> ScalarProfile {
        match self {
            Self::Separable { x1, x2 } => x1.scaled(x2.value(xp)),
            Self::Tabulated { x1, .. } => {
                ScalarProfile::Tabulated { abscissae: x1.clone(), values: x1.iter().map(|&a| self.value(a, xp)).collect() }
            }
        }
    }
}

/// Cell index and local coordinate of x on a strictly increasing axis.
fn locate(axis: &[f64], x: f64) -> Option<(usize, f64)> {
    let (first, last) = (axis[0], *axis.last().unwrap());
    if x < first || x > last {
        return None;
    }
    let k = axis.partition_point(|&a| a <= x).clamp(1, axis.len() - 1);
    Some((k - 1, (x - axis[k - 1]) / (axis[k] - axis[k - 1])))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2d {
    pub h: f64,
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfspaceCase {
    pub potential: Potential2d,
    pub gamma: f64,
    pub grid: Grid2d,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl HalfspaceCase {
    pub fn with_step(&self, h: f64) -> Self {
        Self { grid: Grid2d { h, ..self.grid }, ..self.clone() }
    }

    fn sample_sup(&self, step: f64) -> (f64, f64, f64) {
        let Grid2d { l1, l2, .. } = self.grid;
        let n1 = (l1 / step).round() as usize;
        let n2 = (2.0 * l2 / step).round() as usize;
        let (mut lo, mut hi, mut edge) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
        for i in 0..=n1 {
            for j in 0..=n2 {
                let v = self.potential.value(i as f64 * step, -l2 + j as f64 * step);
                lo = lo.min(v);
                hi = hi.max(v);
                if i == n1 || j == 0 || j == n2 {
                    edge = edge.max(v.abs());
                }
            }
        }
        (lo, hi, edge)
    }

    pub fn validate(&self) -> Result<()> {
        self.potential.validate()?;
        if !(self.gamma >= 1.5) {
            return Err(Error::Domain(format!("half-space bound needs gamma >= 3/2, got {}", self.gamma)));
        }
        let Grid2d { h, l1, l2 } = self.grid;
        if !(h > 0.0 && l1 > 0.0 && l2 > 0.0) {
            return Err(Error::Grid("grid step and lengths must be positive".into()));
        }
        let (lo, hi, edge) = self.sample_sup(0.25 * h);
        if lo < 0.0 {
            return Err(Error::Hypothesis(format!("potential takes the negative value {lo} on the grid")));
        }
        if edge > 1e-10 * hi.max(f64::MIN_POSITIVE) {
            return Err(Error::Grid(format!(
                "potential reaches {edge} on the rectangle edge; enlarge L1 or L2"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfspaceReport {
    pub gamma: f64,
    pub grid: Grid2d,
    pub nodes: (usize, usize),
    /// Negative eigenvalues −λ of the discrete operator, ascending, with multiplicity.
    pub eigenvalues: Vec<(f64, usize)>,
    pub lhs: f64,
    /// L_{γ,2}∫V^{γ+1}.
    pub bulk: f64,
    /// ½L_{γ,1}∫μ₁^{γ+1/2}dx′.
    pub boundary: f64,
    pub rhs_intermediate: f64,
    pub rhs_doubled: f64,
    /// 2^{γ+1}L_{γ,2}∫V^{γ+1}, from reflecting V to the whole plane.
    pub rhs_reflection: f64,
    pub mu1: Vec<(f64, f64)>,
    pub intermediate: InequalityReport,
    pub doubled: InequalityReport,
    pub doubled_dominates: bool,
}

/// Composite Gauss-Legendre over [0, L1]×[−L2, L2], split at breakpoints.
fn potential_power_integral(v: &Potential2d, p: f64, l1: f64, l2: f64) -> f64 {
    let (b1, b2) = v.breakpoints();
    let cuts = |lo: f64, hi: f64, br: &[f64]| {
        let mut c: Vec<f64> = br.iter().copied().filter(|&x| x > lo && x < hi).collect();
        c.extend([lo, hi]);
        sort_dedup(&mut c);
        let mut out = Vec::new();
        for w in c.windows(2) {
            let n = ((w[1] - w[0]) / 0.02).ceil().max(1.0) as usize;
            let d = (w[1] - w[0]) / n as f64;
            for k in 0..n {
                let a = w[0] + k as f64 * d;
                out.extend(GL5_NODES.iter().zip(&GL5_WEIGHTS).map(|(&t, &wt)| (a + 0.5 * d * (t + 1.0), 0.5 * d * wt)));
            }
        }
        out
    };
    let q1 = cuts(0.0, l1, &b1);
    let q2 = cuts(-l2, l2, &b2);
    q1.par_iter()
        .map(|&(x, wx)| q2.iter().map(|&(y, wy)| wy * v.value(x, y).max(0.0).powf(p)).sum::<f64>() * wx)
        .sum()
}

fn ground_energy(profile: ScalarProfile, tol: &Tolerances) -> Result<f64> {
    if profile.sup_abs() == 0.0 {
        return Ok(0.0);
    }
    let prob = Problem::with_tolerances(PotentialSpec::scalar(1, profile), HermitianMatrix::zeros(1), *tol)?;
    let spec = find_spectrum(&prob, &SearchOptions::new(*tol))?;
    Ok(spec.ground().map_or(0.0, |g| g.lambda))
}

pub fn verify_lifted_bound(case: &HalfspaceCase) -> Result<HalfspaceReport> {
    case.validate()?;
    let Grid2d { h, l1, l2 } = case.grid;
    let gamma = case.gamma;
    let v = &case.potential;
    let (mut b1, mut b2) = v.breakpoints();
    b1.retain(|&x| (0.0..=l1).contains(&x));
    b2.retain(|&x| (-l2..=l2).contains(&x));
    let (s1, s2) = support_extent(case);
    b1.extend(s1);
    b2.extend(s2);
    sort_dedup(&mut b1);
    sort_dedup(&mut b2);
    let op = assemble_2d_halfplane(&|a, b| v.value(a, b), &b1, &b2, h, l1, l2)?;
    let eigenvalues = negative_eigs(&op, usize::MAX, 0.0);
    let lhs: f64 = eigenvalues.iter().map(|&(e, m)| m as f64 * (-e).powf(gamma)).sum();

    let n1 = (l1 / h).round() as usize;
    let n2 = op.size / n1;
    let columns: Vec<f64> = (0..n2).map(|j| -l2 + (j + 1) as f64 * h).collect();
    let mu1 = columns
        .par_iter()
        .map(|&xp| ground_energy(v.slice(xp), &case.tolerances).map(|m| (xp, m)))
        .collect::<Result<Vec<_>>>()?;

    let bulk = l_classical(gamma, 2)? * potential_power_integral(v, gamma + 1.0, l1, l2);
    let boundary = 0.5 * l_classical(gamma, 1)? * h * mu1.iter().map(|&(_, m)| m.powf(gamma + 0.5)).sum::<f64>();
    let rhs_intermediate = bulk + boundary;
    let rhs_doubled = 2.0 * bulk;
    let rhs_reflection = 2f64.powf(gamma + 1.0) * bulk;

    let t = &case.tolerances;
    let name = InequalityName::Halfspace { gamma, d: 2 };
    let flags = [("psd_ok", true), ("gamma_ok", gamma >= 1.5), ("d_is_2", true)];
    let intermediate = InequalityReport::new(name.clone(), lhs, rhs_intermediate, &flags, t.verdict_rel, t.saturation_rel)
        .with_note("intermediate bound with the boundary term");
    let doubled = InequalityReport::new(name, lhs, rhs_doubled, &flags, t.verdict_rel, t.saturation_rel)
        .with_note("doubled bound");
    let dominance_tol = t.verdict_rel * rhs_doubled.max(1.0);
    Ok(HalfspaceReport {
        gamma,
        grid: case.grid,
        nodes: (n1, n2),
        eigenvalues,
        lhs,
        bulk,
        boundary,
        rhs_intermediate,
        rhs_doubled,
        rhs_reflection,
        mu1,
        intermediate,
        doubled,
        doubled_dominates: rhs_doubled >= rhs_intermediate - dominance_tol,
    })
}

/// Bounding box of {V > 0} on the sampling grid, widened by one sample.
fn support_extent(case: &HalfspaceCase) -> ([f64; 2], [f64; 2]) {
    let Grid2d { h, l1, l2 } = case.grid;
    let q = 0.25 * h;
    let n1 = (l1 / q).round() as usize;
    let n2 = (2.0 * l2 / q).round() as usize;
    let (mut a1, mut c1, mut a2, mut c2) = (f64::INFINITY, 0.0f64, f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..=n1 {
        for j in 0..=n2 {
            let (x, y) = (i as f64 * q, -l2 + j as f64 * q);
            if case.potential.value(x, y) > 0.0 {
                a1 = a1.min(x);
                c1 = c1.max(x);
                a2 = a2.min(y);
                c2 = c2.max(y);
            }
        }
    }
    if !a1.is_finite() {
        return ([0.0, l1], [-l2, l2]);
    }
    ([0.0, (c1 + q).min(l1)], [(a2 - q).max(-l2), (c2 + q).min(l2)])
}

/// Runs at h and h/2; the second element is true when both slacks of the
/// intermediate bound share a sign.
pub fn verify_two_resolutions(case: &HalfspaceCase) -> Result<(HalfspaceReport, HalfspaceReport, bool)> {
    let coarse = verify_lifted_bound(case)?;
    let fine = verify_lifted_bound(&case.with_step(0.5 * case.grid.h))?;
    let same = coarse.intermediate.slack.signum() == fine.intermediate.slack.signum();
    Ok((coarse, fine, same))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn box_case(height: f64, h: f64) -> HalfspaceCase {
        HalfspaceCase {
            potential: Potential2d::Separable {
                x1: ScalarProfile::Box { height, left: 0.0, right: 1.0 },
                x2: ScalarProfile::Box { height: 1.0, left: -1.0, right: 1.0 },
            },
            gamma: 1.5,
            grid: Grid2d { h, l1: 3.0, l2: 3.0 },
            tolerances: Tolerances::default(),
        }
    }

    #[test]
    fn zero_potential_is_trivial() {
        let mut c = box_case(0.0, 0.1);
        c.potential = Potential2d::Separable {
            x1: ScalarProfile::Box { height: 0.0, left: 0.0, right: 1.0 },
            x2: ScalarProfile::Box { height: 1.0, left: -1.0, right: 1.0 },
        };
        let r = verify_lifted_bound(&c).unwrap();
        assert!(r.eigenvalues.is_empty());
        assert_eq!((r.lhs, r.rhs_intermediate, r.rhs_doubled), (0.0, 0.0, 0.0));
    }

    #[test]
    fn bulk_integral_of_separable_box() {
        let v = Potential2d::Separable {
            x1: ScalarProfile::Box { height: 3.0, left: 0.0, right: 1.0 },
            x2: ScalarProfile::Box { height: 2.0, left: -1.0, right: 0.5 },
        };
        let got = potential_power_integral(&v, 2.5, 3.0, 3.0);
        assert!((got - 6f64.powf(2.5) * 1.5).abs() < 1e-10 * got);
    }

    #[test]
    fn bilinear_interpolation() {
        let v = Potential2d::Tabulated { x1: vec![0.0, 1.0], x2: vec![0.0, 2.0], values: vec![vec![0.0, 2.0], vec![4.0, 6.0]] };
        v.validate().unwrap();
        assert!((v.value(0.5, 1.0) - 3.0).abs() < 1e-15);
        assert_eq!(v.value(1.5, 1.0), 0.0);
        let bad = Potential2d::Tabulated { x1: vec![0.0, 1.0], x2: vec![0.0, 2.0], values: vec![vec![0.0]] };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn box_well_holds_at_two_resolutions() {
        let (a, b, same) = verify_two_resolutions(&box_case(8.0, 0.1)).unwrap();
        assert_eq!(b.nodes, (60, 119));
        for r in [&a, &b] {
            assert!(r.lhs > 0.0);
            assert!(r.intermediate.slack > 0.0, "{:?}", r.intermediate);
            assert!(r.doubled_dominates);
            assert!(r.rhs_reflection > r.rhs_doubled);
        }
        assert!(same);
    }

    #[test]
    fn column_energies_match_scalar_box() {
        let r = verify_lifted_bound(&box_case(8.0, 0.125)).unwrap();
        let inside: Vec<f64> = r.mu1.iter().filter(|p| p.0.abs() < 0.9).map(|p| p.1).collect();
        let outside = r.mu1.iter().filter(|p| p.0.abs() > 1.1).all(|p| p.1 == 0.0);
        assert!(outside);
        // Neumann box of depth 8 on [0, 1): k tan(q) = κ with q² + κ² = 8.
        let mu = inside[0];
        let (kappa, q) = (mu.sqrt(), (8.0 - mu).sqrt());
        assert!((q * q.tan() - kappa).abs() < 1e-7);
        assert!(inside.iter().all(|&m| (m - mu).abs() < 1e-12));
    }

    #[test]
    fn grid_cap_is_enforced() {
        let err = verify_lifted_bound(&box_case(8.0, 0.025)).unwrap_err();
        assert!(err.to_string().contains("coarser"));
    }

    #[test]
    fn rejects_negative_and_escaping_potentials() {
        assert!(verify_lifted_bound(&box_case(-1.0, 0.1)).is_err());
        let mut c = box_case(1.0, 0.1);
        c.grid.l2 = 1.0;
        assert!(verify_lifted_bound(&c).is_err());
        let mut g = box_case(1.0, 0.1);
        g.gamma = 1.0;
        assert!(verify_lifted_bound(&g).is_err());
    }
}
