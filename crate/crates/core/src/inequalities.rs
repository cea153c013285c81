//! Left- and right-hand sides of the half-line Lieb-Thirring inequalities
//! for a computed spectrum, with slack and verdict.
//!
//! An empty negative spectrum gives LHS = 0: the λ₁ terms are dropped.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::constants::{boundary_ratio, l_classical};
use crate::error::{Error, Result};
use crate::model::Problem;
use crate::quadrature::integrate_pieces;
use crate::spectrum::Spectrum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InequalityName {
    LtMain,
    LtSNonpos,
    AizenmanLieb { gamma: f64 },
    NeumannScalar { gamma: f64 },
    NeumannMatrix { gamma: f64 },
    Channels,
    Halfspace { gamma: f64, d: u32 },
}

impl fmt::Display for InequalityName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::LtMain => write!(f, "lt_main"),
            Self::LtSNonpos => write!(f, "lt_s_nonpos"),
            Self::AizenmanLieb { gamma } => write!(f, "aizenman_lieb({gamma})"),
            Self::NeumannScalar { gamma } => write!(f, "neumann_scalar({gamma})"),
            Self::NeumannMatrix { gamma } => write!(f, "neumann_matrix({gamma})"),
            Self::Channels => write!(f, "channels"),
            Self::Halfspace { gamma, d } => write!(f, "halfspace({gamma},{d})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Saturated,
    Violated,
    OutsideHypotheses,
}

impl Verdict {
    pub fn is_ok(self) -> bool {
        matches!(self, Self::Holds | Self::Saturated)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Holds => "holds",
            Self::Saturated => "saturated",
            Self::Violated => "violated",
            Self::OutsideHypotheses => "outside hypotheses",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub name: InequalityName,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub verdict: Verdict,
    /// Verdict from the numbers alone, before hypotheses are applied.
    pub numerical_verdict: Verdict,
    pub hypothesis_flags: BTreeMap<String, bool>,
    pub verdict_tol: f64,
    pub saturation_tol: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl InequalityReport {
    /// Builds a report using the relative verdict and saturation tolerances.
    pub fn new(
        name: InequalityName,
        lhs: f64,
        rhs: f64,
        flags: &[(&str, bool)],
        verdict_rel: f64,
        saturation_rel: f64,
    ) -> Self {
        let scale = lhs.abs().max(rhs.abs()).max(1.0);
        let verdict_tol = verdict_rel * scale;
        let saturation_tol = saturation_rel * scale;
        let slack = rhs - lhs;
        let numerical_verdict = if slack.abs() <= saturation_tol {
            Verdict::Saturated
        } else if slack >= -verdict_tol {
            Verdict::Holds
        } else {
            Verdict::Violated
        };
        let hypothesis_flags: BTreeMap<String, bool> =
            flags.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let verdict = if hypothesis_flags.values().all(|&v| v) {
            numerical_verdict
        } else {
            Verdict::OutsideHypotheses
        };
        Self {
            name,
            lhs,
            rhs,
            slack,
            verdict,
            numerical_verdict,
            hypothesis_flags,
            verdict_tol,
            saturation_tol,
            notes: Vec::new(),
        }
    }

    pub fn hypotheses_hold(&self) -> bool {
        self.hypothesis_flags.values().all(|&v| v)
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}

/// ∫₀^∞ Tr V² and, optionally, ∫₀^∞ Tr V^{γ+1/2}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialIntegrals {
    pub tr_v2: f64,
    pub gamma: Option<f64>,
    pub tr_v_power: Option<f64>,
}

fn integral_tolerance(prob: &Problem) -> f64 {
    let v = prob.potential.max_norm();
    1e-10 * (v * v * prob.truncation_radius * prob.dim() as f64).max(1.0)
}

/// ∫₀^b Tr V(x)^p dx with negative eigenvalues clamped for fractional p.
pub fn trace_power_integral(prob: &Problem, p: f64) -> Result<f64> {
    let integer = p.fract() == 0.0 && p >= 0.0;
    let min = prob.potential.min_eigenvalue();
    if !integer && min < -1e-12 {
        return Err(Error::Domain(format!(
            "fractional power {p} of an indefinite potential (min eigenvalue {min})"
        )));
    }
    let pieces = prob.pieces();
    let tol = integral_tolerance(prob);
    Ok(integrate_pieces(
        |x, lo, hi| {
            let v = prob.potential.evaluate_in_piece(x, lo, hi);
            if integer {
                v.trace_power(p as u32)
            } else {
                v.eigenvalues().iter().map(|&e| e.max(0.0).powf(p)).sum()
            }
        },
        &pieces,
        tol,
    ))
}

pub fn potential_integrals(prob: &Problem, gamma: Option<f64>) -> Result<PotentialIntegrals> {
    let tr_v2 = trace_power_integral(prob, 2.0)?;
    let tr_v_power = gamma.map(|g| trace_power_integral(prob, g + 0.5)).transpose()?;
    Ok(PotentialIntegrals { tr_v2, gamma, tr_v_power })
}

fn trace_s3(prob: &Problem) -> f64 {
    prob.boundary.trace_power(3)
}

/// (1/2)(2κ₁ − N)λ₁^γ + Σ_{n≥2} κₙλₙ^γ, and λ₁ (0 when empty).
fn eigen_terms(spec: &Spectrum, n: usize, gamma: f64) -> (f64, f64) {
    match spec.ground() {
        None => (0.0, 0.0),
        Some(g) => {
            let ground = 0.5 * (2.0 * g.multiplicity as f64 - n as f64) * g.lambda.powf(gamma);
            (ground + spec.excited_power_sum(gamma), g.lambda)
        }
    }
}

fn report(prob: &Problem, name: InequalityName, lhs: f64, rhs: f64, flags: &[(&str, bool)]) -> InequalityReport {
    let t = &prob.tolerances;
    let r = InequalityReport::new(name, lhs, rhs, flags, t.verdict_rel, t.saturation_rel);
    if r.verdict == Verdict::OutsideHypotheses {
        let failed: Vec<&str> = flags.iter().filter(|f| !f.1).map(|f| f.0).collect();
        r.with_note(format!("hypotheses not met: {}", failed.join(", ")))
    } else {
        r
    }
}

fn empty_note(r: InequalityReport, spec: &Spectrum) -> InequalityReport {
    if spec.is_empty() {
        r.with_note("empty negative spectrum: LHS taken as 0")
    } else {
        r
    }
}

/// (3/4)λ₁Tr𝔖 + (1/2)(2κ₁−N)λ₁^{3/2} + Σ_{n≥2}κₙλₙ^{3/2} ≤ (3/16)∫TrV² + (1/4)Tr𝔖³.
pub fn lt_main(spec: &Spectrum, prob: &Problem) -> Result<InequalityReport> {
    let n = prob.dim();
    let (terms, l1) = eigen_terms(spec, n, 1.5);
    let lhs = 0.75 * l1 * prob.boundary.trace() + terms;
    let rhs = 3.0 / 16.0 * trace_power_integral(prob, 2.0)? + 0.25 * trace_s3(prob);
    let flags = [("psd_ok", prob.potential.is_psd())];
    Ok(empty_note(report(prob, InequalityName::LtMain, lhs, rhs, &flags), spec))
}

/// The same LHS against (3/16)∫TrV², valid when Tr𝔖³ ≤ 0.
pub fn lt_s_nonpos(spec: &Spectrum, prob: &Problem) -> Result<InequalityReport> {
    let n = prob.dim();
    let (terms, l1) = eigen_terms(spec, n, 1.5);
    let lhs = 0.75 * l1 * prob.boundary.trace() + terms;
    let rhs = 3.0 / 16.0 * trace_power_integral(prob, 2.0)?;
    let flags = [("psd_ok", prob.potential.is_psd()), ("trS3_nonpos", trace_s3(prob) <= 1e-12)];
    Ok(empty_note(report(prob, InequalityName::LtSNonpos, lhs, rhs, &flags), spec))
}

/// Aizenman-Lieb lift to γ ≥ 3/2; at γ = 3/2 the Beta ratio is its limit 1.
pub fn aizenman_lieb(spec: &Spectrum, prob: &Problem, gamma: f64) -> Result<InequalityReport> {
    if !(gamma >= 1.5) {
        return Err(Error::Domain(format!("aizenman_lieb needs gamma >= 3/2, got {gamma}")));
    }
    let ratio = if gamma == 1.5 { 1.0 } else { boundary_ratio(gamma)? };
    let n = prob.dim();
    let (terms, l1) = eigen_terms(spec, n, gamma);
    let lhs = ratio * 0.75 * l1.powf(gamma - 0.5) * prob.boundary.trace() + terms;
    let rhs = l_classical(gamma, 1)? * trace_power_integral(prob, gamma + 0.5)?;
    let flags = [
        ("psd_ok", prob.potential.is_psd()),
        ("trS3_nonpos", trace_s3(prob) <= 1e-12),
        ("gamma_ok", gamma >= 1.5),
    ];
    Ok(empty_note(report(prob, InequalityName::AizenmanLieb { gamma }, lhs, rhs, &flags), spec))
}

/// Scalar Neumann form: (1/2)λ₁^γ + Σ_{n≥2}λₙ^γ ≤ L_{γ,1}∫V^{γ+1/2}.
pub fn neumann_scalar(spec: &Spectrum, prob: &Problem, gamma: f64) -> Result<InequalityReport> {
    if !(gamma >= 1.5) {
        return Err(Error::Domain(format!("neumann_scalar needs gamma >= 3/2, got {gamma}")));
    }
    let lhs = match spec.ground() {
        None => 0.0,
        Some(g) => 0.5 * g.lambda.powf(gamma) + spec.excited_power_sum(gamma),
    };
    let rhs = l_classical(gamma, 1)? * trace_power_integral(prob, gamma + 0.5)?;
    let flags = [
        ("n_is_1", prob.dim() == 1),
        ("s_is_zero", prob.boundary.op_norm() == 0.0),
        ("psd_ok", prob.potential.is_psd()),
    ];
    Ok(empty_note(report(prob, InequalityName::NeumannScalar { gamma }, lhs, rhs, &flags), spec))
}

/// Matrix Neumann form (𝔖 = 0): (1/2)(2κ₁−N)λ₁^γ + Σ_{n≥2}κₙλₙ^γ ≤ L_{γ,1}∫TrV^{γ+1/2}.
pub fn neumann_matrix(spec: &Spectrum, prob: &Problem, gamma: f64) -> Result<InequalityReport> {
    if !(gamma >= 1.5) {
        return Err(Error::Domain(format!("neumann_matrix needs gamma >= 3/2, got {gamma}")));
    }
    let (lhs, _) = eigen_terms(spec, prob.dim(), gamma);
    let rhs = l_classical(gamma, 1)? * trace_power_integral(prob, gamma + 0.5)?;
    let flags = [("s_is_zero", prob.boundary.op_norm() == 0.0), ("psd_ok", prob.potential.is_psd())];
    Ok(empty_note(report(prob, InequalityName::NeumannMatrix { gamma }, lhs, rhs, &flags), spec))
}

/// Channel-wise form for diagonal V and 𝔖.
pub fn channels(per_channel: &[Spectrum], prob: &Problem) -> Result<InequalityReport> {
    if !prob.is_decoupled() {
        return Err(Error::Hypothesis("channels needs diagonal V and boundary matrix".into()));
    }
    if per_channel.len() != prob.dim() {
        return Err(Error::DimensionMismatch { expected: prob.dim(), found: per_channel.len() });
    }
    let sigma = prob.boundary.diagonal();
    let mut lhs = 0.0;
    for (s, sj) in per_channel.iter().zip(&sigma) {
        if let Some(g) = s.ground() {
            // Scalar channels are simple; a repeated entry would be a solver artifact.
            let l = g.lambda;
            lhs += 0.75 * l * sj + 0.5 * l.powf(1.5) + (g.multiplicity as f64 - 1.0) * l.powf(1.5);
            lhs += s.excited_power_sum(1.5);
        }
    }
    let rhs = 3.0 / 16.0 * trace_power_integral(prob, 2.0)? + 0.25 * trace_s3(prob);
    let flags = [("diagonal", true), ("psd_ok", prob.potential.is_psd())];
    Ok(report(prob, InequalityName::Channels, lhs, rhs, &flags))
}

/// Channel report next to the matrix report on the same problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelComparison {
    pub channels: InequalityReport,
    pub lt_main: InequalityReport,
}

pub fn compare_channels(per_channel: &[Spectrum], whole: &Spectrum, prob: &Problem) -> Result<ChannelComparison> {
    Ok(ChannelComparison { channels: channels(per_channel, prob)?, lt_main: lt_main(whole, prob)? })
}

/// Every report that applies to the problem: lt_main, lt_s_nonpos when
/// Tr𝔖³ ≤ 0, Aizenman-Lieb at each γ, the Neumann forms when 𝔖 = 0 and
/// the channel form when diagonal (per-channel spectra supplied).
pub fn applicable_reports(
    spec: &Spectrum,
    prob: &Problem,
    gammas: &[f64],
    per_channel: Option<&[Spectrum]>,
) -> Result<Vec<InequalityReport>> {
    let mut out = vec![lt_main(spec, prob)?];
    let psd = prob.potential.is_psd();
    if trace_s3(prob) <= 1e-12 {
        out.push(lt_s_nonpos(spec, prob)?);
        for &g in gammas {
            if psd || (g + 0.5).fract() == 0.0 {
                out.push(aizenman_lieb(spec, prob, g)?);
            }
        }
    }
    if prob.boundary.op_norm() == 0.0 {
        for &g in gammas {
            if psd || (g + 0.5).fract() == 0.0 {
                if prob.dim() == 1 {
                    out.push(neumann_scalar(spec, prob, g)?);
                } else {
                    out.push(neumann_matrix(spec, prob, g)?);
                }
            }
        }
    }
    if let Some(parts) = per_channel {
        if prob.is_decoupled() {
            out.push(channels(parts, prob)?);
        }
    }
    Ok(out)
}
