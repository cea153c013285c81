//! Commutation transform at the ground state.
//!
//! With F₁ the Riccati solution at λ₁, Q₁ = d/dx − F₁ factors
//! Q₁*Q₁ = 𝓗 + λ₁ and Q₁Q₁* = −d² − W + λ₁ with W = V + 2F₁'. The
//! partner operator carries a Dirichlet condition at 0 and has the original
//! negative spectrum without −λ₁. F₁' comes from the Riccati identity
//! F₁' = λ₁ − F₁² − V, so W = 2λ₁ − 2F₁² − V.

use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::fdoracle::{assemble_1d_with, levels, negative_eigs, LeftBoundary};
use crate::hermitian::{CMatrix, EigenDecomposition, HermitianMatrix};
use crate::model::Problem;
use crate::propagator::{continue_scalar, frames_at, propagate, RiccatiTrace};
use crate::quadrature::{GL5_NODES, GL5_WEIGHTS};
use crate::spectrum::Spectrum;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DarbouxResult {
    pub lambda1: f64,
    pub kappa1: usize,
    pub abscissae: Vec<f64>,
    pub w_samples: Vec<HermitianMatrix>,
    pub residual_max: f64,
    /// F₁(b) with the eigenvalues at −√λ₁ snapped exactly.
    pub f_b: HermitianMatrix,
    /// Number of F₁(b) eigenvalues snapped to −√λ₁.
    pub decaying_dim: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

fn w_from(f: &HermitianMatrix, v: &HermitianMatrix, lambda: f64) -> HermitianMatrix {
    f.square().scale(-2.0).shift(2.0 * lambda).sub(v)
}

/// Builds W on the trace grid. Refuses traces with residual above 1e-6·scale.
pub fn transform(prob: &Problem, spec: &Spectrum, trace: &RiccatiTrace) -> Result<DarbouxResult> {
    let ground = spec.ground().ok_or(Error::EmptySpectrum)?;
    let scale = prob.spectral_bound();
    let limit = 1e-6 * scale;
    if trace.max_residual() > limit {
        return Err(Error::ResidualTooLarge { residual: trace.max_residual(), limit });
    }
    if (trace.lambda - ground.lambda).abs() > 1e-8 * scale {
        return Err(Error::InvalidProblem(format!(
            "trace computed at lambda = {} but the ground state is {}",
            trace.lambda, ground.lambda
        )));
    }
    let lambda1 = trace.lambda;
    let w_samples = trace
        .abscissae
        .iter()
        .zip(&trace.f_samples)
        .map(|(&x, f)| w_from(f, &prob.potential_at(x), lambda1))
        .collect();

    let tol = prob.tolerances;
    let fb = propagate(prob, lambda1, &tol)?.f_b;
    let (f_b, decaying_dim) = snap(&fb, lambda1, &tol);
    let mut warnings = Vec::new();
    if decaying_dim != ground.multiplicity {
        warnings.push(format!(
            "F(b) has {decaying_dim} eigenvalues at -sqrt(lambda1) but the ground multiplicity is {}",
            ground.multiplicity
        ));
    }
    Ok(DarbouxResult {
        lambda1,
        kappa1: ground.multiplicity,
        abscissae: trace.abscissae.clone(),
        w_samples,
        residual_max: trace.max_residual(),
        f_b,
        decaying_dim,
        warnings,
    })
}

fn snap(fb: &HermitianMatrix, lambda: f64, tol: &Tolerances) -> (HermitianMatrix, usize) {
    let k = lambda.sqrt();
    let thr = tol.mult_rel * (1.0 + fb.op_norm());
    let e = fb.eig();
    let mut count = 0;
    let vals: Vec<f64> = e
        .eigenvalues
        .iter()
        .map(|&mu| {
            if (mu + k).abs() <= thr {
                count += 1;
                -k
            } else {
                mu
            }
        })
        .collect();
    (e.rebuild(vals), count)
}

/// Eigen-decomposition of the stored F₁(b), with values that rounding
/// moved off −√λ₁ put back exactly.
fn snapped_eig(res: &DarbouxResult) -> EigenDecomposition {
    let k = res.lambda1.sqrt();
    let mut e = res.f_b.eig();
    for mu in &mut e.eigenvalues {
        if (*mu + k).abs() <= 1e-10 * (1.0 + k) {
            *mu = -k;
        }
    }
    e
}

/// Evaluates F₁ at sorted points: frames on [0, b] and the closed-form
/// continuation beyond.
pub struct GroundRiccati<'a> {
    prob: &'a Problem,
    lambda: f64,
    eig_b: EigenDecomposition,
}

impl<'a> GroundRiccati<'a> {
    pub fn new(prob: &'a Problem, res: &DarbouxResult) -> Self {
        Self { prob, lambda: res.lambda1, eig_b: snapped_eig(res) }
    }

    fn beyond(&self, x: f64, map: impl Fn(f64) -> f64) -> Result<HermitianMatrix> {
        let t = x - self.prob.truncation_radius;
        let vals = self
            .eig_b
            .eigenvalues
            .iter()
            .map(|&mu| continue_scalar(mu, self.lambda, t).map(&map))
            .collect::<Result<Vec<f64>>>()?;
        Ok(self.eig_b.rebuild(vals))
    }

    /// F₁ at each point of `xs` (sorted ascending).
    pub fn riccati(&self, xs: &[f64]) -> Result<Vec<HermitianMatrix>> {
        self.map(xs, |f, _| f.clone(), |mu| mu)
    }

    /// W = 2λ₁ − 2F₁² − V at each point of `xs` (sorted ascending).
    pub fn transformed_potential(&self, xs: &[f64]) -> Result<Vec<HermitianMatrix>> {
        let l = self.lambda;
        self.map(xs, |f, v| w_from(f, v, l), |mu| 2.0 * l - 2.0 * mu * mu)
    }

    fn map(
        &self,
        xs: &[f64],
        inside: impl Fn(&HermitianMatrix, &HermitianMatrix) -> HermitianMatrix,
        outside: impl Fn(f64) -> f64 + Copy,
    ) -> Result<Vec<HermitianMatrix>> {
        let b = self.prob.truncation_radius;
        let split = xs.partition_point(|&x| x <= b);
        let mut out = Vec::with_capacity(xs.len());
        if split > 0 {
            let states = frames_at(self.prob, self.lambda, &xs[..split], &self.prob.tolerances)?;
            for (s, &x) in states.iter().zip(xs) {
                let raw = s.raw_riccati().ok_or(Error::Pole { x, norm: f64::INFINITY })?;
                let f = HermitianMatrix::symmetrized(raw);
                out.push(inside(&f, &self.prob.potential_at(x)));
            }
        }
        for &x in &xs[split..] {
            out.push(self.beyond(x, outside)?);
        }
        Ok(out)
    }
}

/// Original spectrum without the ground level against the Dirichlet oracle
/// spectrum of W.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IsospectralityReport {
    /// λ values (with multiplicity) of the original problem, ground removed.
    pub expected: Vec<f64>,
    /// λ values of the Dirichlet problem for W.
    pub transformed: Vec<f64>,
    pub counts_match: bool,
    pub max_abs_mismatch: f64,
    pub max_rel_mismatch: f64,
    pub h: f64,
    pub length: f64,
    /// Levels below this λ are excluded from both lists.
    pub lambda_floor: f64,
}

/// Runs the Dirichlet oracle on W at step h and length L.
pub fn dirichlet_spectrum(res: &DarbouxResult, prob: &Problem, h: f64, length: f64) -> Result<Spectrum> {
    let ev = GroundRiccati::new(prob, res);
    let mut eval = |xs: &[f64]| -> Result<Vec<CMatrix>> {
        Ok(ev.transformed_potential(xs)?.into_iter().map(HermitianMatrix::into_matrix).collect())
    };
    let mut op = assemble_1d_with(
        prob.dim(),
        &LeftBoundary::Dirichlet,
        h,
        length,
        &prob.potential.breakpoints(),
        length,
        &mut eval,
    )?;
    op.lower_hint = Some(-2.0 * prob.spectral_bound() - 1.0);
    Ok(levels(&negative_eigs(&op, usize::MAX, 0.0), prob.dim()))
}

pub fn verify_isospectrality(
    res: &DarbouxResult,
    prob: &Problem,
    spec: &Spectrum,
    h: f64,
    length: f64,
    lambda_floor: f64,
) -> Result<IsospectralityReport> {
    let transformed: Vec<f64> = dirichlet_spectrum(res, prob, h, length)?
        .flattened()
        .into_iter()
        .filter(|&l| l > lambda_floor)
        .collect();
    let expected: Vec<f64> =
        spec.without_ground().flattened().into_iter().filter(|&l| l > lambda_floor).collect();
    let counts_match = expected.len() == transformed.len();
    let (mut abs, mut rel) = (0.0_f64, 0.0_f64);
    for (a, b) in expected.iter().zip(&transformed) {
        abs = abs.max((a - b).abs());
        rel = rel.max((a - b).abs() / a.abs().max(1e-300));
    }
    Ok(IsospectralityReport {
        expected,
        transformed,
        counts_match,
        max_abs_mismatch: abs,
        max_rel_mismatch: rel,
        h,
        length,
        lambda_floor,
    })
}

/// (3/16)∫Tr W² against (3/16)∫Tr V² − ½(2κ₁−N)λ₁^{3/2} − ¾λ₁Tr𝔖 + ¼Tr𝔖³.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TelescopeReport {
    pub lhs: f64,
    pub rhs: f64,
    pub abs_error: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Contribution of (b, ∞) to (3/16)∫Tr W², in closed form.
    pub tail: f64,
}

/// ∫_b^∞ Tr W² from the eigenvalues μ of F₁(b): each non-decaying branch
/// contributes 4k³(2/3 − r + r³/3), r = μ/k; snapped branches give 0.
fn tail_integral(res: &DarbouxResult) -> f64 {
    let k = res.lambda1.sqrt();
    snapped_eig(res)
        .eigenvalues
        .iter()
        .filter(|&&mu| mu != -k)
        .map(|&mu| {
            let r = mu / k;
            4.0 * k.powi(3) * (2.0 / 3.0 - r + r.powi(3) / 3.0)
        })
        .sum()
}

pub fn telescoped_rhs_check(res: &DarbouxResult, prob: &Problem) -> Result<TelescopeReport> {
    let ev = GroundRiccati::new(prob, res);
    // Composite five-point Gauss rule on panels of width ≤ 0.01 per piece.
    let mut xs = Vec::new();
    let mut ws = Vec::new();
    for (lo, hi) in prob.pieces() {
        let panels = (((hi - lo) / 0.01).ceil() as usize).max(4);
        let w = (hi - lo) / panels as f64;
        for p in 0..panels {
            let c = lo + (p as f64 + 0.5) * w;
            for (t, g) in GL5_NODES.iter().zip(GL5_WEIGHTS) {
                xs.push(c + 0.5 * w * t);
                ws.push(0.5 * w * g);
            }
        }
    }
    let inner: f64 = if xs.is_empty() {
        0.0
    } else {
        ev.transformed_potential(&xs)?.iter().zip(&ws).map(|(w, g)| g * w.trace_power(2)).sum()
    };
    let tail = tail_integral(res);
    let lhs = 3.0 / 16.0 * (inner + tail);
    let n = prob.dim() as f64;
    let l = res.lambda1;
    let s = &prob.boundary;
    let rhs = 3.0 / 16.0 * crate::inequalities::trace_power_integral(prob, 2.0)?
        - 0.5 * (2.0 * res.kappa1 as f64 - n) * l.powf(1.5)
        - 0.75 * l * s.trace()
        + 0.25 * s.trace_power(3);
    let tolerance = 1e-6 * lhs.abs().max(rhs.abs()).max(1.0);
    let abs_error = (lhs - rhs).abs();
    Ok(TelescopeReport { lhs, rhs, abs_error, tolerance, passed: abs_error <= tolerance, tail: 3.0 / 16.0 * tail })
}

/// Eigenvalues of F₁(x) for x ≥ b (limit and decay checks).
pub fn riccati_eigenvalues_beyond(res: &DarbouxResult, prob: &Problem, x: f64) -> Result<Vec<f64>> {
    Ok(GroundRiccati::new(prob, res).riccati(&[x])?[0].eigenvalues())
}

/// Full pipeline from a problem and its spectrum.
pub fn transform_problem(prob: &Problem, spec: &Spectrum) -> Result<DarbouxResult> {
    let trace = crate::spectrum::ground_state_flow(prob, spec, &prob.tolerances)?;
    transform(prob, spec, &trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PotentialSpec, ScalarProfile};
    use crate::spectrum::{find_spectrum, SearchOptions};

    fn solve(p: &Problem) -> Spectrum {
        find_spectrum(p, &SearchOptions::default()).unwrap()
    }

    #[test]
    fn example_one_gives_zero_w() {
        let p = Problem::free(HermitianMatrix::scalar(1, -1.0));
        let s = solve(&p);
        let r = transform_problem(&p, &s).unwrap();
        assert!(r.w_samples.iter().all(|w| w.op_norm() < 1e-8));
        let t = telescoped_rhs_check(&r, &p).unwrap();
        assert!(t.passed && t.rhs.abs() < 1e-8, "{t:?}");
    }

    #[test]
    fn no_ground_state_is_an_error() {
        let p = Problem::free(HermitianMatrix::zeros(1));
        assert!(matches!(transform_problem(&p, &Spectrum::empty(1)), Err(Error::EmptySpectrum)));
    }

    #[test]
    fn double_ground_state_is_removed_entirely() {
        let p = Problem::free(HermitianMatrix::scalar(2, -1.0));
        let s = solve(&p);
        let r = transform_problem(&p, &s).unwrap();
        assert_eq!(r.decaying_dim, 2);
        let iso = verify_isospectrality(&r, &p, &s, 0.01, 30.0, 1e-3).unwrap();
        assert!(iso.transformed.is_empty() && iso.counts_match);
    }

    #[test]
    fn second_level_survives() {
        let p = Problem::free(HermitianMatrix::from_real_diagonal(&[-1.0, -0.5]));
        let s = solve(&p);
        let r = transform_problem(&p, &s).unwrap();
        let iso = verify_isospectrality(&r, &p, &s, 0.01, 60.0, 1e-3).unwrap();
        assert!(iso.counts_match, "{iso:?}");
        assert!((iso.transformed[0] - 0.25).abs() < 1e-3);
        let t = telescoped_rhs_check(&r, &p).unwrap();
        assert!(t.passed, "{t:?}");
    }

    #[test]
    fn box_well_isospectral_and_telescoped() {
        let p = Problem::new(
            PotentialSpec::scalar(1, ScalarProfile::Box { height: 12.0, left: 0.0, right: 1.5 }),
            HermitianMatrix::scalar(1, 0.3),
        )
        .unwrap();
        let s = solve(&p);
        assert!(s.count() >= 2);
        let r = transform_problem(&p, &s).unwrap();
        assert!(r.w_samples.iter().any(|w| w.get(0, 0).re < 0.0));
        let iso = verify_isospectrality(&r, &p, &s, 0.005, 30.0, 1e-3).unwrap();
        assert!(iso.counts_match, "{iso:?}");
        assert!(iso.max_abs_mismatch < 1e-3, "{iso:?}");
        let t = telescoped_rhs_check(&r, &p).unwrap();
        assert!(t.passed, "{t:?}");
    }

    #[test]
    fn limit_matrix_beyond_support() {
        let w = crate::model::real_matrix(&[&[4.0, 1.0], &[1.0, 3.0]]);
        let spec = PotentialSpec::zero(2).with_term(ScalarProfile::Box { height: 1.0, left: 0.0, right: 1.0 }, w);
        let p = Problem::new(spec, HermitianMatrix::from_real_diagonal(&[-0.2, 0.1])).unwrap();
        let s = solve(&p);
        let r = transform_problem(&p, &s).unwrap();
        let k = r.lambda1.sqrt();
        let ev = riccati_eigenvalues_beyond(&r, &p, p.truncation_radius + 20.0 / k).unwrap();
        let minus = ev.iter().filter(|&&e| (e + k).abs() < 1e-6).count();
        let plus = ev.iter().filter(|&&e| (e - k).abs() < 1e-6).count();
        assert_eq!((minus, plus), (r.kappa1, 2 - r.kappa1));
        // Gap to +√λ₁ shrinks like e^{−2√λ₁ t}.
        let gap = |t: f64| {
            let e = riccati_eigenvalues_beyond(&r, &p, p.truncation_radius + t / k).unwrap();
            (e[1] - k).abs()
        };
        let slope = (gap(6.0).ln() - gap(2.0).ln()) / (4.0 / k);
        assert!((slope / (-2.0 * k) - 1.0).abs() < 0.2, "slope {slope}");
    }
}
