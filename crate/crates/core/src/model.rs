//! Declarative description of a half-line problem: the potential as a sum of
//! scalar profiles times constant Hermitian weights, the Robin boundary
//! matrix, and the truncation radius beyond which V is treated as zero.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::hermitian::{CMatrix, HermitianMatrix};

/// Which one-sided limit to take at a discontinuity of a profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// A scalar shape g(x). Amplitudes are energies, positions are lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarProfile {
    /// `height` on [left, right), zero elsewhere.
    Box { height: f64, left: f64, right: f64 },
    Gaussian { amplitude: f64, center: f64, width: f64 },
    /// depth / cosh²((x - center) / width)
    PoschlTeller { depth: f64, center: f64, width: f64 },
    /// Linear interpolation on strictly increasing abscissae, zero outside.
    Tabulated { abscissae: Vec<f64>, values: Vec<f64> },
}

impl ScalarProfile {
    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidProfile(format!("{what} must be finite")))
            }
        };
        match self {
            Self::Box { height, left, right } => {
                finite(*height, "box height")?;
                finite(*left, "box left")?;
                finite(*right, "box right")?;
                if left >= right {
                    return Err(Error::InvalidProfile(format!(
                        "box needs left < right, got [{left}, {right}]"
                    )));
                }
            }
            Self::Gaussian { amplitude, center, width } => {
                finite(*amplitude, "gaussian amplitude")?;
                finite(*center, "gaussian center")?;
                if !(width.is_finite() && *width > 0.0) {
                    return Err(Error::InvalidProfile("gaussian width must be positive".into()));
                }
            }
            Self::PoschlTeller { depth, center, width } => {
                finite(*depth, "poschl_teller depth")?;
                finite(*center, "poschl_teller center")?;
                if !(width.is_finite() && *width > 0.0) {
                    return Err(Error::InvalidProfile(
                        "poschl_teller width must be positive".into(),
                    ));
                }
            }
            Self::Tabulated { abscissae, values } => {
                if abscissae.len() != values.len() || abscissae.len() < 2 {
                    return Err(Error::InvalidProfile(
                        "tabulated profile needs at least two (x, value) pairs of equal length"
                            .into(),
                    ));
                }
                if abscissae.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::InvalidProfile(
                        "tabulated abscissae must be strictly increasing".into(),
                    ));
                }
                for &v in abscissae.iter().chain(values) {
                    finite(v, "tabulated entry")?;
                }
            }
        }
        Ok(())
    }

    pub fn value(&self, x: f64) -> f64 {
        self.value_sided(x, Side::Right)
    }

    pub fn value_sided(&self, x: f64, side: Side) -> f64 {
        match self {
            Self::Box { height, left, right } => {
                let inside = match side {
                    Side::Right => *left <= x && x < *right,
                    Side::Left => *left < x && x <= *right,
                };
                if inside {
                    *height
                } else {
                    0.0
                }
            }
            Self::Gaussian { amplitude, center, width } => {
                let z = (x - center) / width;
                amplitude * (-0.5 * z * z).exp()
            }
            Self::PoschlTeller { depth, center, width } => {
                let c = ((x - center) / width).cosh();
                depth / (c * c)
            }
            Self::Tabulated { abscissae, values } => {
                let first = abscissae[0];
                let last = *abscissae.last().unwrap();
                let outside = match side {
                    Side::Right => x < first || x >= last,
                    Side::Left => x <= first || x > last,
                };
                if outside {
                    return 0.0;
                }
                let k = abscissae.partition_point(|&a| a <= x).clamp(1, abscissae.len() - 1);
                let (x0, x1) = (abscissae[k - 1], abscissae[k]);
                let t = (x - x0) / (x1 - x0);
                values[k - 1] * (1.0 - t) + values[k] * t
            }
        }
    }

    /// Points where the profile (or its derivative) jumps.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Self::Box { left, right, .. } => vec![*left, *right],
            Self::Tabulated { abscissae, .. } => abscissae.clone(),
            _ => Vec::new(),
        }
    }

    /// Breakpoints plus peak locations, for sampling suprema.
    pub fn feature_points(&self) -> Vec<f64> {
        match self {
            Self::Gaussian { center, .. } | Self::PoschlTeller { center, .. } => vec![*center],
            _ => self.breakpoints(),
        }
    }

    /// Upper bound on |g| over [x, ∞); nonincreasing in x.
    pub fn tail_envelope(&self, x: f64) -> f64 {
        match self {
            Self::Box { height, right, .. } => {
                if x < *right {
                    height.abs()
                } else {
                    0.0
                }
            }
            Self::Gaussian { amplitude, center, width } => {
                if x <= *center {
                    amplitude.abs()
                } else {
                    let z = (x - center) / width;
                    amplitude.abs() * (-0.5 * z * z).exp()
                }
            }
            Self::PoschlTeller { depth, center, width } => {
                if x <= *center {
                    depth.abs()
                } else {
                    let c = ((x - center) / width).cosh();
                    depth.abs() / (c * c)
                }
            }
            Self::Tabulated { abscissae, values } => {
                let last = *abscissae.last().unwrap();
                if x >= last {
                    return 0.0;
                }
                let here = self.value(x).abs();
                abscissae
                    .iter()
                    .zip(values)
                    .filter(|(a, _)| **a > x)
                    .fold(here, |m, (_, v)| m.max(v.abs()))
            }
        }
    }

    /// Largest |g| on [0, ∞).
    pub fn sup_abs(&self) -> f64 {
        match self {
            Self::Box { height, right, .. } => {
                if *right > 0.0 {
                    height.abs()
                } else {
                    0.0
                }
            }
            Self::Gaussian { .. } | Self::PoschlTeller { .. } => {
                self.tail_envelope(0.0).max(0.0)
            }
            Self::Tabulated { .. } => self.tail_envelope(0.0),
        }
    }

    /// Whether the last table entry leaves a jump at the end of the support.
    fn open_tail(&self, eps: f64) -> Option<f64> {
        match self {
            Self::Tabulated { values, .. } => {
                let v = *values.last().unwrap();
                (v.abs() > eps).then_some(v)
            }
            _ => None,
        }
    }

    /// s² g(s x).
    pub fn rescaled(&self, s: f64) -> Self {
        let s2 = s * s;
        match self {
            Self::Box { height, left, right } => {
                Self::Box { height: height * s2, left: left / s, right: right / s }
            }
            Self::Gaussian { amplitude, center, width } => Self::Gaussian {
                amplitude: amplitude * s2,
                center: center / s,
                width: width / s,
            },
            Self::PoschlTeller { depth, center, width } => Self::PoschlTeller {
                depth: depth * s2,
                center: center / s,
                width: width / s,
            },
            Self::Tabulated { abscissae, values } => Self::Tabulated {
                abscissae: abscissae.iter().map(|a| a / s).collect(),
                values: values.iter().map(|v| v * s2).collect(),
            },
        }
    }

    /// c · g(x).
    pub fn scaled(&self, c: f64) -> Self {
        match self {
            Self::Box { height, left, right } => {
                Self::Box { height: height * c, left: *left, right: *right }
            }
            Self::Gaussian { amplitude, center, width } => {
                Self::Gaussian { amplitude: amplitude * c, center: *center, width: *width }
            }
            Self::PoschlTeller { depth, center, width } => {
                Self::PoschlTeller { depth: depth * c, center: *center, width: *width }
            }
            Self::Tabulated { abscissae, values } => Self::Tabulated {
                abscissae: abscissae.clone(),
                values: values.iter().map(|v| v * c).collect(),
            },
        }
    }

    pub fn is_piecewise_constant(&self) -> bool {
        matches!(self, Self::Box { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialTerm {
    pub profile: ScalarProfile,
    pub weight: HermitianMatrix,
}

/// V(x) = Σₖ gₖ(x) Aₖ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub dim: usize,
    #[serde(default)]
    pub terms: Vec<PotentialTerm>,
    #[serde(default)]
    pub require_psd: bool,
}

impl PotentialSpec {
    pub fn zero(dim: usize) -> Self {
        Self { dim, terms: Vec::new(), require_psd: false }
    }

    pub fn new(dim: usize, terms: Vec<PotentialTerm>) -> Result<Self> {
        let spec = Self { dim, terms, require_psd: false };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_term(mut self, profile: ScalarProfile, weight: HermitianMatrix) -> Self {
        self.terms.push(PotentialTerm { profile, weight });
        self
    }

    /// Scalar profile times the identity.
    pub fn scalar(dim: usize, profile: ScalarProfile) -> Self {
        Self::zero(dim).with_term(profile, HermitianMatrix::identity(dim))
    }

    /// One profile per channel on the diagonal.
    pub fn diagonal(profiles: Vec<ScalarProfile>) -> Self {
        let dim = profiles.len();
        let mut spec = Self::zero(dim);
        for (j, p) in profiles.into_iter().enumerate() {
            let mut d = vec![0.0; dim];
            d[j] = 1.0;
            spec.terms.push(PotentialTerm {
                profile: p,
                weight: HermitianMatrix::from_real_diagonal(&d),
            });
        }
        spec
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidProblem("dim must be at least 1".into()));
        }
        for t in &self.terms {
            t.profile.validate()?;
            if t.weight.dim() != self.dim {
                return Err(Error::DimensionMismatch { expected: self.dim, found: t.weight.dim() });
            }
        }
        Ok(())
    }

    pub fn evaluate(&self, x: f64) -> HermitianMatrix {
        self.evaluate_sided(x, Side::Right)
    }

    pub fn evaluate_sided(&self, x: f64, side: Side) -> HermitianMatrix {
        let mut acc = CMatrix::zeros(self.dim, self.dim);
        for t in &self.terms {
            let g = t.profile.value_sided(x, side);
            if g != 0.0 {
                acc += t.weight.as_matrix() * Complex64::new(g, 0.0);
            }
        }
        HermitianMatrix::symmetrized(acc)
    }

    /// Evaluates inside the piece [lo, hi], taking inward limits at its ends.
    pub fn evaluate_in_piece(&self, x: f64, lo: f64, hi: f64) -> HermitianMatrix {
        if x >= hi {
            self.evaluate_sided(hi, Side::Left)
        } else if x <= lo {
            self.evaluate_sided(lo, Side::Right)
        } else {
            self.evaluate(x)
        }
    }

    /// Mean of the one-sided limits; equals `evaluate` away from jumps.
    pub fn evaluate_average(&self, x: f64) -> HermitianMatrix {
        let l = self.evaluate_sided(x, Side::Left);
        let r = self.evaluate_sided(x, Side::Right);
        l.add(&r).scale(0.5)
    }

    /// Sorted, deduplicated breakpoints inside (0, ∞).
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self
            .terms
            .iter()
            .flat_map(|t| t.profile.breakpoints())
            .filter(|&x| x > 0.0)
            .collect();
        sort_dedup(&mut pts);
        pts
    }

    /// Upper bound on the operator norm of V over [x, ∞).
    pub fn envelope(&self, x: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.profile.tail_envelope(x) * t.weight.op_norm())
            .sum()
    }

    /// Smallest b with ‖V(x)‖ ≤ eps for every x > b.
    pub fn effective_support(&self, eps: f64) -> Result<f64> {
        if !(eps > 0.0) {
            return Err(Error::Domain("tail tolerance must be positive".into()));
        }
        for t in &self.terms {
            if let Some(v) = t.profile.open_tail(eps) {
                return Err(Error::UnboundedSupport { value: v });
            }
        }
        let mut cands = vec![0.0];
        cands.extend(self.breakpoints());
        let Some(first_ok) = cands.iter().position(|&c| self.envelope(c) <= eps) else {
            // Smooth tail beyond the last breakpoint.
            let lo = *cands.last().unwrap();
            let mut hi = lo.max(1.0);
            while self.envelope(hi) > eps {
                hi *= 2.0;
                if hi > 1e9 {
                    return Err(Error::UnboundedSupport { value: self.envelope(hi) });
                }
            }
            return Ok(self.bisect_envelope(lo, hi, eps, &cands));
        };
        if first_ok == 0 {
            return Ok(0.0);
        }
        Ok(self.bisect_envelope(cands[first_ok - 1], cands[first_ok], eps, &cands))
    }

    fn bisect_envelope(&self, mut lo: f64, mut hi: f64, eps: f64, snap: &[f64]) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.envelope(mid) <= eps {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        snap.iter()
            .copied()
            .find(|&c| (c - hi).abs() <= 1e-12 * (1.0 + c.abs()) && self.envelope(c) <= eps)
            .unwrap_or(hi)
    }

    /// Dense audit abscissae on [0, end]: uniform samples plus both sides of
    /// every feature point.
    pub fn audit_points(&self, end: f64, count: usize) -> Vec<f64> {
        let mut pts: Vec<f64> = (0..=count).map(|i| end * i as f64 / count as f64).collect();
        for t in &self.terms {
            for p in t.profile.feature_points() {
                if (0.0..=end).contains(&p) {
                    pts.push(p);
                }
            }
        }
        sort_dedup(&mut pts);
        pts
    }

    fn audit_matrices(&self, end: f64) -> Vec<HermitianMatrix> {
        let mut out = Vec::new();
        for x in self.audit_points(end, 2000) {
            out.push(self.evaluate_sided(x, Side::Left));
            out.push(self.evaluate_sided(x, Side::Right));
        }
        out
    }

    /// Sampled sup of ‖V(x)‖.
    pub fn max_norm(&self) -> f64 {
        let end = self.audit_end();
        self.audit_matrices(end).iter().map(|v| v.op_norm()).fold(0.0, f64::max)
    }

    /// Sampled sup of the largest eigenvalue of V(x) (zero floor).
    pub fn max_eigenvalue(&self) -> f64 {
        let end = self.audit_end();
        self.audit_matrices(end).iter().map(|v| v.max_eigenvalue()).fold(0.0, f64::max)
    }

    /// Sampled minimum eigenvalue of V(x) over the support.
    pub fn min_eigenvalue(&self) -> f64 {
        let end = self.audit_end();
        self.audit_matrices(end).iter().map(|v| v.min_eigenvalue()).fold(f64::INFINITY, f64::min)
    }

    /// V(x) ≥ -1e-10 · max‖V‖ on the audit grid.
    pub fn is_psd(&self) -> bool {
        let scale = self.max_norm();
        self.min_eigenvalue() >= -1e-10 * scale
    }

    fn audit_end(&self) -> f64 {
        let bound = self.sup_abs_bound();
        if bound == 0.0 {
            return 0.0;
        }
        self.effective_support(1e-14 * bound).unwrap_or_else(|_| {
            self.breakpoints().last().copied().unwrap_or(1.0)
        })
    }

    fn sup_abs_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.profile.sup_abs() * t.weight.op_norm()).sum()
    }

    pub fn is_diagonal(&self) -> bool {
        self.terms.iter().all(|t| t.weight.is_diagonal(0.0))
    }

    pub fn is_piecewise_constant(&self) -> bool {
        self.terms.iter().all(|t| t.profile.is_piecewise_constant())
    }

    /// x ↦ s² V(s x).
    pub fn rescaled(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .map(|t| PotentialTerm { profile: t.profile.rescaled(s), weight: t.weight.clone() })
                .collect(),
            require_psd: self.require_psd,
        }
    }

    /// Weights replaced by U* Aₖ U.
    pub fn conjugated(&self, u: &CMatrix) -> Self {
        Self {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .map(|t| PotentialTerm {
                    profile: t.profile.clone(),
                    weight: t.weight.conjugate_by(u),
                })
                .collect(),
            require_psd: self.require_psd,
        }
    }

    /// Scalar potential seen by channel j of a diagonal potential.
    pub fn channel(&self, j: usize) -> PotentialSpec {
        let mut spec = PotentialSpec::zero(1);
        spec.require_psd = self.require_psd;
        for t in &self.terms {
            let w = t.weight.get(j, j).re;
            if w != 0.0 {
                spec.terms.push(PotentialTerm {
                    profile: t.profile.clone(),
                    weight: HermitianMatrix::scalar(1, w),
                });
            }
        }
        spec
    }
}

pub(crate) fn sort_dedup(pts: &mut Vec<f64>) {
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + b.abs()));
}

/// The half-line operator -d²/dx² - V(x) with φ'(0) = 𝔖 φ(0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub potential: PotentialSpec,
    pub boundary: HermitianMatrix,
    /// b: V is treated as exactly zero beyond this point.
    pub truncation_radius: f64,
    /// Absolute tail tolerance used to pick b.
    pub tail_tolerance: f64,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl Problem {
    pub fn new(potential: PotentialSpec, boundary: HermitianMatrix) -> Result<Self> {
        Self::with_tolerances(potential, boundary, Tolerances::default())
    }

    pub fn with_tolerances(
        potential: PotentialSpec,
        boundary: HermitianMatrix,
        tolerances: Tolerances,
    ) -> Result<Self> {
        potential.validate()?;
        if boundary.dim() != potential.dim {
            return Err(Error::DimensionMismatch { expected: potential.dim, found: boundary.dim() });
        }
        let scale = potential.sup_abs_bound();
        let tail = if scale > 0.0 { tolerances.tail_rel * scale } else { tolerances.tail_rel };
        let b = potential.effective_support(tail)?;
        Ok(Self { potential, boundary, truncation_radius: b, tail_tolerance: tail, tolerances })
    }

    /// Free problem V ≡ 0.
    pub fn free(boundary: HermitianMatrix) -> Self {
        let dim = boundary.dim();
        Self::new(PotentialSpec::zero(dim), boundary).expect("free problem is valid")
    }

    /// Overrides b; it may only grow past the effective support.
    pub fn with_truncation(mut self, b: f64) -> Result<Self> {
        let min = self.potential.effective_support(self.tail_tolerance)?;
        if !(b >= min) {
            return Err(Error::InvalidProblem(format!(
                "truncation radius {b} is inside the effective support {min}"
            )));
        }
        self.truncation_radius = b;
        Ok(self)
    }

    /// Overrides the absolute tail tolerance and recomputes b.
    pub fn with_tail_tolerance(mut self, eps: f64) -> Result<Self> {
        self.truncation_radius = self.potential.effective_support(eps)?;
        self.tail_tolerance = eps;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.potential.dim
    }

    /// Checks the invariant ‖V(x)‖ ≤ ε_tail on samples beyond b.
    pub fn validate(&self) -> Result<()> {
        self.potential.validate()?;
        if self.boundary.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: self.boundary.dim() });
        }
        let b = self.truncation_radius;
        for i in 1..=200 {
            let x = b + i as f64 * (1.0 + b) / 50.0;
            let n = self.potential.evaluate(x).op_norm();
            if n > self.tail_tolerance {
                return Err(Error::InvalidProblem(format!(
                    "|V({x})| = {n:e} exceeds the tail tolerance beyond b = {b}"
                )));
            }
        }
        Ok(())
    }

    /// V(x) with the truncation applied.
    pub fn potential_at(&self, x: f64) -> HermitianMatrix {
        if x > self.truncation_radius {
            HermitianMatrix::zeros(self.dim())
        } else {
            self.potential.evaluate(x)
        }
    }

    /// Upper bound for every λ with -λ in the spectrum:
    /// sup λmax(V) + (max(0, -λmin(𝔖)))² + 1.
    pub fn spectral_bound(&self) -> f64 {
        let robin = (-self.boundary.min_eigenvalue()).max(0.0);
        self.potential.max_eigenvalue() + robin * robin + 1.0
    }

    /// Pieces [x_k, x_{k+1}] of [0, b] on which V is smooth.
    pub fn pieces(&self) -> Vec<(f64, f64)> {
        let b = self.truncation_radius;
        let mut pts = vec![0.0];
        pts.extend(self.potential.breakpoints().into_iter().filter(|&x| x < b));
        pts.push(b);
        sort_dedup(&mut pts);
        pts.windows(2).filter(|w| w[1] > w[0]).map(|w| (w[0], w[1])).collect()
    }

    pub fn is_decoupled(&self) -> bool {
        self.potential.is_diagonal() && self.boundary.is_diagonal(0.0)
    }

    /// V(x) → s² V(s x), 𝔖 → s 𝔖.
    pub fn rescaled(&self, s: f64) -> Result<Self> {
        let mut p = Self::with_tolerances(
            self.potential.rescaled(s),
            self.boundary.scale(s),
            self.tolerances,
        )?;
        p.tail_tolerance = self.tail_tolerance * s * s;
        p.truncation_radius = self.truncation_radius / s;
        Ok(p)
    }

    /// (U* 𝔖 U, U* Aₖ U).
    pub fn conjugated(&self, u: &CMatrix) -> Self {
        Self {
            potential: self.potential.conjugated(u),
            boundary: self.boundary.conjugate_by(u),
            ..self.clone()
        }
    }

    /// Scalar problem of channel j (diagonal problems only).
    pub fn channel(&self, j: usize) -> Result<Self> {
        if !self.is_decoupled() {
            return Err(Error::Hypothesis("channel split needs diagonal V and 𝔖".into()));
        }
        let s = HermitianMatrix::scalar(1, self.boundary.get(j, j).re);
        let mut p = Self::with_tolerances(self.potential.channel(j), s, self.tolerances)?;
        p.truncation_radius = self.truncation_radius.max(p.truncation_radius);
        Ok(p)
    }
}

/// Real diagonal helper for tests and builders.
pub fn real_matrix(rows: &[&[f64]]) -> HermitianMatrix {
    let n = rows.len();
    let a = DMatrix::from_fn(n, n, |j, k| Complex64::new(rows[j][k], 0.0));
    HermitianMatrix::symmetrized(a)
}
