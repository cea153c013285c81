//! Negative eigenvalues from the matching condition −√λ ∈ spec F(b; λ).
//!
//! F(b; λ) + √λ𝕀 is increasing in λ but has poles, so the roots are located
//! on the Lagrangian frame (M(b), M'(b) + √λ M(b)) instead. Every eigenvalue
//! g of F + √λ is encoded as the phase ψ = 2·atan(g) ∈ (−π, π]; the phases
//! rotate monotonically counterclockwise in λ, roots are upward crossings
//! of ψ = 0 and poles are wraps through ψ = π. Crossing counts between two
//! λ values depend only on the phase multisets, so branch labels never
//! need to be tracked.
//!
//! When b lies far past the bulk of the potential, a root can occupy a λ
//! window much narrower than the scan spacing. The scan total is therefore
//! compared with a conjugate-point count, and if they differ the levels
//! are bisected from the count directly.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::hermitian::{CMatrix, HermitianMatrix};
use crate::model::Problem;
use crate::propagator::{self, piecewise_grid, riccati_flow, RiccatiTrace, ShootingState};

/// One distinct eigenvalue −λ with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub lambda: f64,
    pub multiplicity: usize,
}

/// Distinct negative eigenvalues −λ₁ < −λ₂ < … with multiplicities,
/// stored with λ decreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub dim: usize,
    pub entries: Vec<Level>,
    /// κ₁, zero when the spectrum is empty.
    pub ground_multiplicity: usize,
    /// Eigenvalues with λ below this floor are not resolved.
    pub resolution_floor: f64,
    pub warnings: Vec<String>,
}

impl Spectrum {
    pub fn empty(dim: usize) -> Self {
        Self { dim, entries: Vec::new(), ground_multiplicity: 0, resolution_floor: 0.0, warnings: Vec::new() }
    }

    /// Builds from arbitrary levels, merging equal λ and sorting.
    pub fn from_levels(dim: usize, mut levels: Vec<Level>, merge_tol: f64) -> Self {
        levels.sort_by(|a, b| b.lambda.total_cmp(&a.lambda));
        let mut entries: Vec<Level> = Vec::new();
        for l in levels {
            match entries.last_mut() {
                Some(last) if (last.lambda - l.lambda).abs() <= merge_tol => {
                    let total = last.multiplicity + l.multiplicity;
                    last.lambda = (last.lambda * last.multiplicity as f64
                        + l.lambda * l.multiplicity as f64)
                        / total as f64;
                    last.multiplicity = total;
                }
                _ => entries.push(l),
            }
        }
        let ground_multiplicity = entries.first().map_or(0, |l| l.multiplicity);
        Self { dim, entries, ground_multiplicity, resolution_floor: 0.0, warnings: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ground(&self) -> Option<Level> {
        self.entries.first().copied()
    }

    /// Eigenvalue count with multiplicity.
    pub fn count(&self) -> usize {
        self.entries.iter().map(|l| l.multiplicity).sum()
    }

    /// λ values repeated by multiplicity, decreasing.
    pub fn flattened(&self) -> Vec<f64> {
        self.entries
            .iter()
            .flat_map(|l| std::iter::repeat(l.lambda).take(l.multiplicity))
            .collect()
    }

    /// Σ_{n≥2} κₙ λₙ^γ.
    pub fn excited_power_sum(&self, gamma: f64) -> f64 {
        self.entries.iter().skip(1).map(|l| l.multiplicity as f64 * l.lambda.powf(gamma)).sum()
    }

    /// Σₙ κₙ λₙ^γ.
    pub fn power_sum(&self, gamma: f64) -> f64 {
        self.entries.iter().map(|l| l.multiplicity as f64 * l.lambda.powf(gamma)).sum()
    }

    /// Spectrum with the ground level removed.
    pub fn without_ground(&self) -> Self {
        let entries: Vec<Level> = self.entries.iter().skip(1).copied().collect();
        Self {
            dim: self.dim,
            ground_multiplicity: entries.first().map_or(0, |l| l.multiplicity),
            entries,
            resolution_floor: self.resolution_floor,
            warnings: self.warnings.clone(),
        }
    }

    /// Multiset union (channel decoupling).
    pub fn union(dim: usize, parts: &[Spectrum], merge_tol: f64) -> Self {
        let levels = parts.iter().flat_map(|s| s.entries.iter().copied()).collect();
        let mut s = Self::from_levels(dim, levels, merge_tol);
        s.resolution_floor = parts.iter().map(|p| p.resolution_floor).fold(0.0, f64::max);
        s
    }
}

/// Sorted eigenvalues of F(b; λ) + √λ𝕀 on a λ grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchTable {
    pub lambda_grid: Vec<f64>,
    pub branch_values: Vec<Vec<f64>>,
}

/// Scan controls. Defaults come from [`Tolerances`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub scan_points: usize,
    /// Absolute lower end; defaults to `lambda_min_rel` × spectral bound.
    pub lambda_min: Option<f64>,
    /// Absolute upper end; defaults to the spectral bound.
    pub lambda_max: Option<f64>,
    pub tolerances: Tolerances,
}

impl SearchOptions {
    pub fn new(tolerances: Tolerances) -> Self {
        Self { scan_points: tolerances.scan_points, lambda_min: None, lambda_max: None, tolerances }
    }
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self::new(Tolerances::default())
    }
}

/// Eigenvalues of F(b; λ) + √λ𝕀, ascending. Zeros mark eigenvalues.
pub fn matching_values(prob: &Problem, lambda: f64, tol: &Tolerances) -> Result<Vec<f64>> {
    let p = propagator::propagate(prob, lambda, tol)?;
    Ok(p.f_b.shift(lambda.sqrt()).eigenvalues())
}

fn wrap(angle: f64) -> f64 {
    let w = angle.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

fn min_singular(m: &CMatrix) -> f64 {
    let g = HermitianMatrix::symmetrized(m.adjoint() * m);
    g.min_eigenvalue().max(0.0).sqrt()
}

/// Matching phases ψⱼ = 2·atan(gⱼ), gⱼ the eigenvalues of F(b) + √λ,
/// computed without inverting M(b).
pub fn phases_from_state(state: &ShootingState, lambda: f64) -> Vec<f64> {
    let k = Complex64::new(lambda.sqrt(), 0.0);
    frame_phases(&state.m, &(&state.mp + &state.m * k))
}

/// Phases 2·atan of the eigenvalues of x z⁻¹ for a Lagrangian frame
/// (z; x). A phase sits at 0 mod 2π exactly where x is singular.
fn frame_phases(z: &CMatrix, x: &CMatrix) -> Vec<f64> {
    let n = z.ncols();
    let mut stacked = CMatrix::zeros(2 * n, n);
    stacked.rows_mut(0, n).copy_from(z);
    stacked.rows_mut(n, n).copy_from(x);
    let q = stacked.qr().q();
    let zq = q.rows(0, n).into_owned();
    let xq = q.rows(n, n).into_owned();

    // Among N + 1 rotated charts one keeps every frame angle at least
    // π/(2N + 2) away from the chart's pole.
    let mut best = (f64::NEG_INFINITY, 0.0, zq.clone(), xq.clone());
    for j in 0..=n {
        let alpha = j as f64 * PI / (n as f64 + 1.0);
        let (s, c) = alpha.sin_cos();
        let za = &zq * Complex64::new(c, 0.0) + &xq * Complex64::new(s, 0.0);
        let sv = min_singular(&za);
        if sv > best.0 {
            let xa = &xq * Complex64::new(c, 0.0) - &zq * Complex64::new(s, 0.0);
            best = (sv, alpha, za, xa);
        }
    }
    let (_, alpha, za, xa) = best;
    let inv = za.try_inverse().unwrap_or_else(|| DMatrix::identity(n, n));
    let g = HermitianMatrix::symmetrized(xa * inv);
    let mut psi: Vec<f64> =
        g.eigenvalues().iter().map(|&v| wrap(2.0 * (v.atan() + alpha))).collect();
    psi.sort_by(f64::total_cmp);
    psi
}

pub fn matching_phases(prob: &Problem, lambda: f64, tol: &Tolerances) -> Result<Vec<f64>> {
    let (state, _) = if prob.potential.is_piecewise_constant() {
        propagator::transfer_state(prob, lambda)?
    } else {
        propagator::propagate_state(prob, lambda, tol)?
    };
    Ok(phases_from_state(&state, lambda))
}

/// Number of upward crossings of ψ ≡ 0 (mod 2π) between two phase sets,
/// and the total phase advance.
///
/// The lift is chosen so that the total advance lies in [0, 2π); callers
/// keep intervals short enough for that to be the true advance.
pub fn count_crossings(before: &[f64], after: &[f64]) -> (usize, f64) {
    let n = before.len();
    let mut lifted: Vec<f64> = after.iter().copied().chain(after.iter().map(|v| v + 2.0 * PI)).collect();
    lifted.sort_by(f64::total_cmp);
    let base: f64 = lifted[..n].iter().sum::<f64>() - before.iter().sum::<f64>();
    // Allow tiny negative advance from rounding.
    let shift = ((-base - 1e-9) / (2.0 * PI)).ceil().clamp(0.0, n as f64) as usize;
    let window = &lifted[shift..shift + n];
    let advance = base + 2.0 * PI * shift as f64;
    let floor_sum = |vals: &[f64]| -> i64 { vals.iter().map(|v| (v / (2.0 * PI)).floor() as i64).sum() };
    let crossings = floor_sum(window) - floor_sum(before);
    (crossings.max(0) as usize, advance)
}

/// Net crossings of ψ ≡ 0 (mod 2π) and the advance, for the lift of
/// smallest total movement. Callers keep the movement below π.
fn signed_crossings(before: &[f64], after: &[f64]) -> (i64, f64) {
    let n = before.len();
    let mut lifted: Vec<f64> = after
        .iter()
        .flat_map(|&v| [v - 2.0 * PI, v, v + 2.0 * PI])
        .collect();
    lifted.sort_by(f64::total_cmp);
    let total: f64 = before.iter().sum();
    let best = (0..=2 * n)
        .map(|s| (s, lifted[s..s + n].iter().sum::<f64>() - total))
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .expect("nonempty");
    let floor_sum = |vals: &[f64]| -> i64 { vals.iter().map(|v| (v / (2.0 * PI)).floor() as i64).sum() };
    (floor_sum(&lifted[best.0..best.0 + n]) - floor_sum(before), best.1)
}

/// Number of eigenvalues −λₙ < −λ, with multiplicity: zeros of det M(x)
/// on (0, b] plus the eigenvalues of F(b) below −√λ, which continue to
/// zeros beyond b.
pub fn eigenvalue_count(prob: &Problem, lambda: f64, tol: &Tolerances) -> Result<usize> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    let scale = (lambda + prob.potential.max_norm()).max(1.0).sqrt();
    let inv_scale = Complex64::new(1.0 / scale, 0.0);
    let mut max_step = 0.25 / scale;
    for _ in 0..4 {
        let trace = propagator::frame_trace(prob, lambda, tol, max_step)?;
        let phases: Vec<Vec<f64>> = trace.iter().map(|s| frame_phases(&(&s.mp * inv_scale), &s.m)).collect();
        let mut zeros = 0_i64;
        let mut resolved = true;
        for w in phases.windows(2) {
            let (c, adv) = signed_crossings(&w[0], &w[1]);
            if adv.abs() > 0.5 * PI {
                resolved = false;
                break;
            }
            zeros += c;
        }
        if resolved {
            let end = trace.last().expect("trace has the frame at b");
            let k = Complex64::new(lambda.sqrt(), 0.0);
            let h = HermitianMatrix::symmetrized(end.m.adjoint() * (&end.mp + &end.m * k));
            let tail = h.eigenvalues().iter().filter(|&&v| v < 0.0).count();
            return Ok(zeros.max(0) as usize + tail);
        }
        max_step *= 0.25;
    }
    Err(Error::Domain(format!("conjugate points unresolved at lambda = {lambda}")))
}

/// Levels in (lo, hi] by bisection on the eigenvalue count.
fn count_levels(prob: &Problem, lo: f64, hi: f64, tol: &Tolerances) -> Result<Vec<Level>> {
    fn split(
        prob: &Problem,
        (a, na): (f64, usize),
        (b, nb): (f64, usize),
        tol: &Tolerances,
        out: &mut Vec<Level>,
    ) -> Result<()> {
        if na <= nb {
            return Ok(());
        }
        let mid = 0.5 * (a + b);
        if b - a <= tol.bisect_rel * b || mid <= a || mid >= b {
            out.push(Level { lambda: mid, multiplicity: na - nb });
            return Ok(());
        }
        let nm = eigenvalue_count(prob, mid, tol)?;
        split(prob, (a, na), (mid, nm), tol, out)?;
        split(prob, (mid, nm), (b, nb), tol, out)
    }
    let mut out = Vec::new();
    let (na, nb) = (eigenvalue_count(prob, lo, tol)?, eigenvalue_count(prob, hi, tol)?);
    split(prob, (lo, na), (hi, nb), tol, &mut out)?;
    Ok(out)
}

fn scan_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let points = points.max(8);
    let geo_end = (0.05 * hi).max(lo * 2.0).min(hi);
    let n_geo = points / 4;
    let n_lin = points - n_geo;
    let mut grid = Vec::with_capacity(points + 1);
    let ratio = (geo_end / lo).ln();
    for i in 0..n_geo {
        grid.push(lo * (ratio * i as f64 / n_geo as f64).exp());
    }
    for i in 0..=n_lin {
        grid.push(geo_end + (hi - geo_end) * i as f64 / n_lin as f64);
    }
    grid.dedup();
    grid
}

struct Scanner<'a> {
    prob: &'a Problem,
    tol: Tolerances,
}

impl Scanner<'_> {
    fn phase(&self, lambda: f64) -> Result<Vec<f64>> {
        matching_phases(self.prob, lambda, &self.tol)
    }

    /// Splits (a, b] until each piece advances by less than π/2.
    fn refine(
        &self,
        a: (f64, Vec<f64>),
        b: (f64, Vec<f64>),
        depth: usize,
        out: &mut Vec<(f64, f64, usize, Vec<f64>, Vec<f64>)>,
    ) -> Result<()> {
        let (count, adv) = count_crossings(&a.1, &b.1);
        if adv <= 0.5 * PI || depth == 0 || b.0 - a.0 <= 1e-14 * b.0 {
            if count > 0 {
                out.push((a.0, b.0, count, a.1, b.1));
            }
            return Ok(());
        }
        let mid = 0.5 * (a.0 + b.0);
        let pm = self.phase(mid)?;
        self.refine(a, (mid, pm.clone()), depth - 1, out)?;
        self.refine((mid, pm), b, depth - 1, out)
    }

    /// Bisects a root-bearing interval down to leaves of relative width
    /// `bisect_rel`.
    fn isolate(
        &self,
        lo: f64,
        hi: f64,
        count: usize,
        plo: Vec<f64>,
        phi: Vec<f64>,
        leaves: &mut Vec<(f64, f64, usize)>,
    ) -> Result<()> {
        if count == 0 {
            return Ok(());
        }
        if hi - lo <= self.tol.bisect_rel * hi {
            leaves.push((lo, hi, count));
            return Ok(());
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            leaves.push((lo, hi, count));
            return Ok(());
        }
        let pm = self.phase(mid)?;
        let (left, _) = count_crossings(&plo, &pm);
        let (right, _) = count_crossings(&pm, &phi);
        self.isolate(lo, mid, left, plo, pm.clone(), leaves)?;
        self.isolate(mid, hi, right, pm, phi, leaves)
    }
}

/// All negative eigenvalues −λ with λ in (λ_min, λ_max].
pub fn find_spectrum(prob: &Problem, opts: &SearchOptions) -> Result<Spectrum> {
    let tol = opts.tolerances;
    let bound = prob.spectral_bound();
    let hi = opts.lambda_max.unwrap_or(bound);
    let lo = opts.lambda_min.unwrap_or(tol.lambda_min_rel * bound);
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Domain(format!("invalid search window ({lo}, {hi})")));
    }
    let scanner = Scanner { prob, tol };
    let grid = scan_grid(lo, hi, opts.scan_points);
    let phases: Vec<Vec<f64>> =
        grid.par_iter().map(|&l| scanner.phase(l)).collect::<Result<_>>()?;

    let mut brackets = Vec::new();
    for i in 0..grid.len() - 1 {
        scanner.refine(
            (grid[i], phases[i].clone()),
            (grid[i + 1], phases[i + 1].clone()),
            40,
            &mut brackets,
        )?;
    }

    let leaves: Vec<Vec<(f64, f64, usize)>> = brackets
        .into_par_iter()
        .map(|(a, b, c, pa, pb)| {
            let mut leaves = Vec::new();
            scanner.isolate(a, b, c, pa, pb, &mut leaves).map(|_| leaves)
        })
        .collect::<Result<_>>()?;
    let mut levels: Vec<Level> = leaves
        .into_iter()
        .flatten()
        .map(|(a, b, c)| Level { lambda: 0.5 * (a + b), multiplicity: c })
        .collect();
    // Roots confined to windows narrower than the scan spacing are found
    // from the count instead.
    let expected = eigenvalue_count(prob, lo, &tol)?.saturating_sub(eigenvalue_count(prob, hi, &tol)?);
    if levels.iter().map(|l| l.multiplicity).sum::<usize>() != expected {
        levels = count_levels(prob, lo, hi, &tol)?;
    }

    let mut spec = Spectrum::from_levels(prob.dim(), levels, tol.cluster_rel * bound);
    spec.resolution_floor = lo;
    for lvl in &spec.entries {
        if lvl.multiplicity > prob.dim() {
            spec.warnings.push(format!(
                "multiplicity {} at lambda = {} exceeds N = {}",
                lvl.multiplicity,
                lvl.lambda,
                prob.dim()
            ));
        }
        if let Some(k) = kernel_multiplicity(prob, lvl.lambda, &tol) {
            if k != lvl.multiplicity {
                spec.warnings.push(format!(
                    "kernel dimension {k} disagrees with crossing count {} at lambda = {}",
                    lvl.multiplicity, lvl.lambda
                ));
            }
        }
    }
    if let Some(last) = spec.entries.last() {
        if last.lambda < 100.0 * lo {
            spec.warnings.push(format!(
                "smallest eigenvalue {} is close to the resolution floor {lo}",
                last.lambda
            ));
        }
    }
    Ok(spec)
}

/// dim ker(F(b; λ) + √λ𝕀) at threshold `mult_rel`·(1 + ‖F(b)‖).
pub fn kernel_multiplicity(prob: &Problem, lambda: f64, tol: &Tolerances) -> Option<usize> {
    let p = propagator::propagate(prob, lambda, tol).ok()?;
    let thr = tol.mult_rel * (1.0 + p.f_b.op_norm());
    Some(p.f_b.shift(lambda.sqrt()).kernel_dim(thr))
}

/// Branch values on a λ grid; singular points are nudged by one part in 10⁹.
pub fn branch_table(prob: &Problem, grid: &[f64], tol: &Tolerances) -> Result<BranchTable> {
    let mut rows = Vec::with_capacity(grid.len());
    let mut used = Vec::with_capacity(grid.len());
    for &l in grid {
        let mut lambda = l;
        let mut row = None;
        for _ in 0..8 {
            match matching_values(prob, lambda, tol) {
                Ok(v) => {
                    row = Some(v);
                    break;
                }
                Err(Error::SingularEndpoint { .. }) => lambda *= 1.0 + 1e-9,
                Err(e) => return Err(e),
            }
        }
        let row = row.ok_or(Error::SingularEndpoint { lambda, condition: f64::INFINITY })?;
        used.push(lambda);
        rows.push(row);
    }
    Ok(BranchTable { lambda_grid: used, branch_values: rows })
}

/// Riccati flow at the ground state λ₁ over [0, b].
pub fn ground_state_flow(prob: &Problem, spec: &Spectrum, tol: &Tolerances) -> Result<RiccatiTrace> {
    let ground = spec.ground().ok_or(Error::EmptySpectrum)?;
    let grid = piecewise_grid(prob, 0.01);
    match riccati_flow(prob, ground.lambda, &grid, tol) {
        Err(Error::Pole { .. }) => {
            let lambda = refine_root(prob, ground.lambda, tol)?;
            riccati_flow(prob, lambda, &grid, tol)
        }
        other => other,
    }
}

/// Re-brackets a root at machine-level relative width.
pub fn refine_root(prob: &Problem, lambda: f64, tol: &Tolerances) -> Result<f64> {
    let mut t = *tol;
    t.bisect_rel = 1e-15;
    let scanner = Scanner { prob, tol: t };
    let width = (1e-6 * lambda).max(1e-14);
    let (lo, hi) = (lambda - width, lambda + width);
    let (plo, phi) = (scanner.phase(lo)?, scanner.phase(hi)?);
    let (count, _) = count_crossings(&plo, &phi);
    if count == 0 {
        return Ok(lambda);
    }
    let mut leaves = Vec::new();
    scanner.isolate(lo, hi, count, plo, phi, &mut leaves)?;
    Ok(leaves.first().map_or(lambda, |l| 0.5 * (l.0 + l.1)))
}
