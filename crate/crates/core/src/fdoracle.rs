//! Finite-element eigenvalue oracle on a truncated interval.
//!
//! The quadratic form ∫|φ'|² − (Vφ, φ) + (𝔖φ(0), φ(0)) is discretized with
//! piecewise-linear elements and a lumped (trapezoid) mass, then folded
//! to an ordinary banded Hermitian matrix. Eigenvalues come from inertia
//! counts of banded LDL* factorizations and bisection, so no dense solve
//! is needed. A real 2D half-plane variant with a Neumann edge serves the
//! half-space checks.

use nalgebra::ComplexField;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hermitian::{CMatrix, HermitianMatrix};
use crate::model::{sort_dedup, Problem};
use crate::quadrature::{GL5_NODES, GL5_WEIGHTS};
use crate::spectrum::{Level, Spectrum};

/// Largest half-plane grid accepted (x₁ nodes × x′ nodes).
pub const MAX_GRID_2D: (usize, usize) = (60, 120);

/// Banded Hermitian matrix from a form discretization.
#[derive(Debug, Clone)]
pub struct DiscreteOperator<T> {
    pub size: usize,
    /// Half-bandwidth in scalar entries.
    pub bandwidth: usize,
    /// `diagonals[d][i]` = A[i, i + d].
    diagonals: Vec<Vec<T>>,
    pub h: f64,
    pub length: f64,
    /// Known lower bound for the spectrum, if any.
    pub lower_hint: Option<f64>,
}

impl<T: ComplexField<RealField = f64> + Copy> DiscreteOperator<T> {
    fn empty(size: usize, bandwidth: usize, h: f64, length: f64) -> Self {
        let diagonals = (0..=bandwidth).map(|d| vec![T::zero(); size.saturating_sub(d)]).collect();
        Self { size, bandwidth, diagonals, h, length, lower_hint: None }
    }

    fn add(&mut self, i: usize, j: usize, v: T) {
        let (r, c, v) = if j >= i { (i, j, v) } else { (j, i, v.conjugate()) };
        self.diagonals[c - r][r] += v;
    }

    /// Entry A[i, j].
    pub fn get(&self, i: usize, j: usize) -> T {
        let (r, c, conj) = if j >= i { (i, j, false) } else { (j, i, true) };
        if c - r > self.bandwidth {
            return T::zero();
        }
        let v = self.diagonals[c - r][r];
        if conj {
            v.conjugate()
        } else {
            v
        }
    }

    fn row_radius(&self, i: usize) -> f64 {
        let lo = i.saturating_sub(self.bandwidth);
        let hi = (i + self.bandwidth).min(self.size - 1);
        (lo..=hi).filter(|&j| j != i).map(|j| self.get(i, j).modulus()).sum()
    }

    /// Gershgorin interval.
    pub fn gershgorin(&self) -> (f64, f64) {
        (0..self.size).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
            let c = self.get(i, i).real();
            let r = self.row_radius(i);
            (lo.min(c - r), hi.max(c + r))
        })
    }

    /// Number of eigenvalues strictly below σ (Sylvester inertia of A − σ).
    pub fn count_below(&self, sigma: f64) -> usize {
        let n = self.size;
        let w = self.bandwidth + 1;
        let mut win = vec![T::zero(); w * w];
        let fill = |win: &mut [T], p: usize, q: usize, gi: usize, gj: usize| {
            win[p * w + q] = if gj < n { self.get(gi, gj) } else { T::zero() };
            if gi == gj {
                win[p * w + q] = if gi < n { win[p * w + q] - T::from_real(sigma) } else { T::one() };
            }
        };
        for p in 0..w {
            for q in p..w {
                fill(&mut win, p, q, p, q);
            }
        }
        let (glo, ghi) = self.gershgorin();
        let tiny = f64::EPSILON * (glo.abs().max(ghi.abs()) + sigma.abs()).max(1.0);
        let mut row0 = vec![T::zero(); w];
        let mut count = 0;
        for i in 0..n {
            let mut d = win[0].real();
            if d.abs() < tiny {
                d = -tiny;
            }
            if d < 0.0 {
                count += 1;
            }
            row0.copy_from_slice(&win[..w]);
            let inv = T::from_real(1.0 / d);
            for p in 1..w {
                let bp = row0[p].conjugate() * inv;
                for q in p..w {
                    win[(p - 1) * w + (q - 1)] = win[p * w + q] - bp * row0[q];
                }
            }
            let g = i + w;
            for p in 0..w {
                fill(&mut win, p, w - 1, i + 1 + p, g);
            }
        }
        count
    }

    /// Dense copy, for small test matrices.
    pub fn to_dense(&self) -> nalgebra::DMatrix<T> {
        nalgebra::DMatrix::from_fn(self.size, self.size, |i, j| self.get(i, j))
    }
}

/// Eigenvalues E < −`floor`, ascending, clustered with gap 1e-7·scale,
/// at most `count_cap` of them (the lowest).
pub fn negative_eigs<T: ComplexField<RealField = f64> + Copy>(
    op: &DiscreteOperator<T>,
    count_cap: usize,
    floor: f64,
) -> Vec<(f64, usize)> {
    let top = -floor.abs();
    let total = op.count_below(top);
    if total == 0 || count_cap == 0 {
        return Vec::new();
    }
    let (glo, ghi) = op.gershgorin();
    let mut lo = glo;
    if let Some(hint) = op.lower_hint {
        if hint > glo && op.count_below(hint) == 0 {
            lo = hint;
        }
    }
    let lo = lo - 1e-9 * lo.abs().max(1.0);
    let width_tol = (1e-13 * lo.abs()).max(64.0 * f64::EPSILON * glo.abs().max(ghi.abs()));
    let mut leaves: Vec<(f64, usize)> = Vec::new();
    let mut stack = vec![(lo, top, 0usize, total)];
    while let Some((a, b, ca, cb)) = stack.pop() {
        if cb <= ca || ca >= count_cap {
            continue;
        }
        let mid = 0.5 * (a + b);
        if b - a <= width_tol || mid <= a || mid >= b {
            leaves.push((mid, cb - ca));
            continue;
        }
        let cm = op.count_below(mid);
        stack.push((mid, b, cm, cb));
        stack.push((a, mid, ca, cm));
    }
    leaves.sort_by(|x, y| x.0.total_cmp(&y.0));
    let scale = leaves.first().map_or(1.0, |l| l.0.abs().max(1.0));
    let mut out: Vec<(f64, usize)> = Vec::new();
    for (e, k) in leaves {
        match out.last_mut() {
            Some(last) if (e - last.0).abs() <= 1e-7 * scale => {
                let t = last.1 + k;
                last.0 = (last.0 * last.1 as f64 + e * k as f64) / t as f64;
                last.1 = t;
            }
            _ => out.push((e, k)),
        }
    }
    let mut kept = 0;
    out.retain(|l| {
        let keep = kept < count_cap;
        kept += l.1;
        keep
    });
    out
}

/// Boundary condition at x = 0.
#[derive(Debug, Clone)]
pub enum LeftBoundary {
    Robin(HermitianMatrix),
    Dirichlet,
}

/// Number of cells m = L/h, which must be an integer ≥ 16.
pub fn cell_count(h: f64, length: f64) -> Result<usize> {
    if !(h > 0.0 && length > 0.0) {
        return Err(Error::Grid(format!("need h > 0 and L > 0, got h = {h}, L = {length}")));
    }
    let m = (length / h).round();
    if (m * h - length).abs() > 1e-9 * length {
        return Err(Error::Grid(format!("L = {length} is not a multiple of h = {h}")));
    }
    if m < 16.0 {
        return Err(Error::Grid(format!("only {m} cells; at least 16 are required")));
    }
    Ok(m as usize)
}

/// Smallest multiple of h that is ≥ `length`.
pub fn round_length(h: f64, length: f64) -> f64 {
    (length / h - 1e-9).ceil() * h
}

/// Dual-cell averages of a matrix function at nodes 0..=m, with Gauss
/// points split at breakpoints. Nodes beyond `support_end` get zero.
fn node_averages(
    dim: usize,
    m: usize,
    h: f64,
    breakpoints: &[f64],
    support_end: f64,
    eval: &mut dyn FnMut(&[f64]) -> Result<Vec<CMatrix>>,
) -> Result<Vec<CMatrix>> {
    let length = m as f64 * h;
    let mut xs = Vec::new();
    let mut owners: Vec<(usize, f64)> = Vec::new();
    for i in 0..=m {
        let xi = i as f64 * h;
        let a = (xi - 0.5 * h).max(0.0);
        let b = (xi + 0.5 * h).min(length).min(support_end);
        if b <= a {
            continue;
        }
        let mut cuts = vec![a, b];
        cuts.extend(breakpoints.iter().copied().filter(|&p| p > a && p < b));
        sort_dedup(&mut cuts);
        for win in cuts.windows(2) {
            let (c, r) = (0.5 * (win[0] + win[1]), 0.5 * (win[1] - win[0]));
            for (t, w) in GL5_NODES.iter().zip(GL5_WEIGHTS) {
                xs.push(c + r * t);
                owners.push((i, w * r));
            }
        }
    }
    let values = if xs.is_empty() { Vec::new() } else { eval(&xs)? };
    if values.len() != xs.len() {
        return Err(Error::DimensionMismatch { expected: xs.len(), found: values.len() });
    }
    let mut acc = vec![CMatrix::zeros(dim, dim); m + 1];
    for ((i, w), v) in owners.into_iter().zip(values) {
        acc[i] += v * Complex64::new(w, 0.0);
    }
    for (i, a) in acc.iter_mut().enumerate() {
        let wi = if i == 0 || i == m { 0.5 * h } else { h };
        *a /= Complex64::new(wi, 0.0);
    }
    Ok(acc)
}

/// Assembles the folded form for an N-channel problem with potential given
/// through a batch evaluator. Dirichlet at L always; at 0 per `left`.
pub fn assemble_1d_with(
    dim: usize,
    left: &LeftBoundary,
    h: f64,
    length: f64,
    breakpoints: &[f64],
    support_end: f64,
    eval: &mut dyn FnMut(&[f64]) -> Result<Vec<CMatrix>>,
) -> Result<DiscreteOperator<Complex64>> {
    let m = cell_count(h, length)?;
    if let LeftBoundary::Robin(s) = left {
        if s.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: s.dim() });
        }
    }
    let v = node_averages(dim, m, h, breakpoints, support_end, eval)?;
    let first = match left {
        LeftBoundary::Robin(_) => 0,
        LeftBoundary::Dirichlet => 1,
    };
    let nodes = m - first;
    let mut op = DiscreteOperator::empty(nodes * dim, dim, h, length);
    let weight = |i: usize| if i == 0 { 0.5 * h } else { h };
    let c = |z: f64| Complex64::new(z, 0.0);
    for i in first..m {
        let row = (i - first) * dim;
        for a in 0..dim {
            op.add(row + a, row + a, c(2.0 / (h * h)));
            for b in a..dim {
                op.add(row + a, row + b, -v[i][(a, b)]);
            }
            if i + 1 < m {
                let off = -1.0 / (h * (weight(i) * weight(i + 1)).sqrt());
                op.add(row + a, row + dim + a, c(off));
            }
        }
        if i == 0 {
            if let LeftBoundary::Robin(s) = left {
                for a in 0..dim {
                    for b in a..dim {
                        op.add(a, b, s.get(a, b) * (2.0 / h));
                    }
                }
            }
        }
    }
    Ok(op)
}

fn problem_evaluator(prob: &Problem) -> impl FnMut(&[f64]) -> Result<Vec<CMatrix>> + '_ {
    move |xs: &[f64]| Ok(xs.iter().map(|&x| prob.potential_at(x).into_matrix()).collect())
}

fn with_hint(mut op: DiscreteOperator<Complex64>, prob: &Problem) -> DiscreteOperator<Complex64> {
    op.lower_hint = Some(-2.0 * prob.spectral_bound() - 1.0);
    op
}

/// Robin problem on [0, L] with Dirichlet at L.
pub fn assemble_1d(prob: &Problem, h: f64, length: f64) -> Result<DiscreteOperator<Complex64>> {
    check_length(prob, length)?;
    let op = assemble_1d_with(
        prob.dim(),
        &LeftBoundary::Robin(prob.boundary.clone()),
        h,
        length,
        &prob.potential.breakpoints(),
        prob.truncation_radius,
        &mut problem_evaluator(prob),
    )?;
    Ok(with_hint(op, prob))
}

/// Same potential with Dirichlet conditions at both ends.
pub fn assemble_1d_dirichlet(prob: &Problem, h: f64, length: f64) -> Result<DiscreteOperator<Complex64>> {
    check_length(prob, length)?;
    let op = assemble_1d_with(
        prob.dim(),
        &LeftBoundary::Dirichlet,
        h,
        length,
        &prob.potential.breakpoints(),
        prob.truncation_radius,
        &mut problem_evaluator(prob),
    )?;
    Ok(with_hint(op, prob))
}

fn check_length(prob: &Problem, length: f64) -> Result<()> {
    if length < prob.truncation_radius {
        return Err(Error::Grid(format!(
            "L = {length} is shorter than the support radius {}",
            prob.truncation_radius
        )));
    }
    Ok(())
}

/// Negative levels −λ as a [`Spectrum`] (λ decreasing).
pub fn levels(eigs: &[(f64, usize)], dim: usize) -> Spectrum {
    let levels = eigs.iter().map(|&(e, k)| Level { lambda: -e, multiplicity: k }).collect();
    Spectrum::from_levels(dim, levels, 0.0)
}

/// Eigenvalue error constant of the discretization, in units of the
/// squared spectral bound: |λ_h − λ| ≤ C·bound²·h².
pub const ERROR_CONSTANT_REL: f64 = 0.0625;

/// max(1e-6, C·h²) for comparing oracle and shooting eigenvalues.
pub fn discretization_tolerance(prob: &Problem, h: f64) -> f64 {
    let b = prob.spectral_bound();
    (ERROR_CONSTANT_REL * b * b * h * h).max(1e-6)
}

/// Oracle spectrum of a problem at step h and length L.
pub fn oracle_spectrum(prob: &Problem, h: f64, length: f64) -> Result<Spectrum> {
    let op = assemble_1d(prob, h, length)?;
    let mut s = levels(&negative_eigs(&op, usize::MAX, 0.0), prob.dim());
    s.resolution_floor = 0.0;
    Ok(s)
}

/// L = b + 12/√λ_min, λ_min from a coarse run, clamped to [b + 10, b + 200]
/// and rounded up to a multiple of h.
pub fn default_truncation(prob: &Problem, h: f64) -> Result<f64> {
    let b = prob.truncation_radius;
    let hc = 0.05_f64.max(h);
    let lc = round_length(hc, b + 60.0);
    let coarse = oracle_spectrum(prob, hc, lc)?;
    let extra = match coarse.entries.last() {
        Some(l) if l.lambda > 0.0 => 12.0 / l.lambda.sqrt(),
        _ => 20.0,
    };
    Ok(round_length(h, b + extra.clamp(10.0, 200.0)))
}

/// Real half-plane operator −Δ − V on [0, L₁) × (−L₂, L₂): Neumann at
/// x₁ = 0, Dirichlet elsewhere. Nodes are ordered x′-major so that the
/// half-bandwidth equals the number of x₁ nodes.
pub fn assemble_2d_halfplane(
    v2: &dyn Fn(f64, f64) -> f64,
    breaks1: &[f64],
    breaks2: &[f64],
    h: f64,
    l1: f64,
    l2: f64,
) -> Result<DiscreteOperator<f64>> {
    let n1 = grid_count(h, l1)?;
    let n2 = 2 * grid_count(h, l2)? - 1;
    if n1 > MAX_GRID_2D.0 || n2 > MAX_GRID_2D.1 {
        return Err(Error::Grid(format!(
            "grid {n1}x{n2} exceeds the {}x{} cap; use a coarser h",
            MAX_GRID_2D.0, MAX_GRID_2D.1
        )));
    }
    let ext1 = breaks1.iter().copied().fold(0.0, f64::max);
    let (lo2, hi2) = breaks2.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, &x| (a.0.min(x), a.1.max(x)));
    if ext1 / h < 8.0 - 1e-9 || (hi2 - lo2) / h < 8.0 - 1e-9 {
        return Err(Error::Grid("fewer than 8 grid nodes across the support".into()));
    }
    let x2 = |j: usize| -l2 + (j + 1) as f64 * h;
    let w1 = |i: usize| if i == 0 { 0.5 * h } else { h };
    let mut op = DiscreteOperator::<f64>::empty(n1 * n2, n1, h, l1);
    for j in 0..n2 {
        for i in 0..n1 {
            let k = j * n1 + i;
            let xa = (i as f64 * h - 0.5 * h).max(0.0);
            let xb = i as f64 * h + 0.5 * h;
            let (ya, yb) = (x2(j) - 0.5 * h, x2(j) + 0.5 * h);
            let avg = cell_integral(v2, xa, xb, ya, yb, breaks1, breaks2) / (w1(i) * h);
            op.add(k, k, 4.0 / (h * h) - avg);
            if i + 1 < n1 {
                op.add(k, k + 1, -1.0 / (h * (w1(i) * w1(i + 1)).sqrt()));
            }
            if j + 1 < n2 {
                op.add(k, k + n1, -1.0 / (h * h));
            }
        }
    }
    let vmax = breaks_sup(v2, l1, l2, h);
    op.lower_hint = Some(-vmax - 1.0);
    Ok(op)
}

fn grid_count(h: f64, l: f64) -> Result<usize> {
    if !(h > 0.0 && l > 0.0) {
        return Err(Error::Grid("grid step and lengths must be positive".into()));
    }
    let n = (l / h).round();
    if (n * h - l).abs() > 1e-9 * l {
        return Err(Error::Grid(format!("length {l} is not a multiple of h = {h}")));
    }
    Ok(n as usize)
}

fn breaks_sup(v2: &dyn Fn(f64, f64) -> f64, l1: f64, l2: f64, h: f64) -> f64 {
    let q = 0.25 * h;
    let n1 = (l1 / q) as usize;
    let n2 = (2.0 * l2 / q) as usize;
    let mut s: f64 = 0.0;
    for i in 0..=n1 {
        for j in 0..=n2 {
            s = s.max(v2(i as f64 * q, -l2 + j as f64 * q));
        }
    }
    s
}

fn split(a: f64, b: f64, breaks: &[f64]) -> Vec<f64> {
    let mut cuts = vec![a, b];
    cuts.extend(breaks.iter().copied().filter(|&p| p > a && p < b));
    sort_dedup(&mut cuts);
    cuts
}

fn cell_integral(
    f: &dyn Fn(f64, f64) -> f64,
    xa: f64,
    xb: f64,
    ya: f64,
    yb: f64,
    bx: &[f64],
    by: &[f64],
) -> f64 {
    let cx = split(xa, xb, bx);
    let cy = split(ya, yb, by);
    let mut total = 0.0;
    for wx in cx.windows(2) {
        let (mx, rx) = (0.5 * (wx[0] + wx[1]), 0.5 * (wx[1] - wx[0]));
        for wy in cy.windows(2) {
            let (my, ry) = (0.5 * (wy[0] + wy[1]), 0.5 * (wy[1] - wy[0]));
            for (tx, gx) in GL5_NODES.iter().zip(GL5_WEIGHTS) {
                for (ty, gy) in GL5_NODES.iter().zip(GL5_WEIGHTS) {
                    total += gx * gy * rx * ry * f(mx + rx * tx, my + ry * ty);
                }
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PotentialSpec, ScalarProfile};
    use nalgebra::DMatrix;

    fn dense_eigs(op: &DiscreteOperator<Complex64>) -> Vec<f64> {
        HermitianMatrix::symmetrized(op.to_dense()).eigenvalues()
    }

    #[test]
    fn inertia_count_matches_dense_solve() {
        let s = crate::model::real_matrix(&[&[-0.7, 0.2], &[0.2, 0.3]]);
        let spec = PotentialSpec::zero(2).with_term(
            ScalarProfile::Gaussian { amplitude: 3.0, center: 0.4, width: 0.3 },
            crate::model::real_matrix(&[&[1.0, 0.5], &[0.5, 2.0]]),
        );
        let p = Problem::new(spec, s).unwrap().with_truncation(4.0).unwrap();
        let op = assemble_1d(&p, 0.1, 4.0).unwrap();
        let eigs = dense_eigs(&op);
        for sigma in [-5.0, -1.0, -0.3, 0.0, 10.0, 100.0] {
            let exact = eigs.iter().filter(|&&e| e < sigma).count();
            assert_eq!(op.count_below(sigma), exact, "sigma = {sigma}");
        }
        let found = negative_eigs(&op, usize::MAX, 0.0);
        let neg: Vec<f64> = eigs.into_iter().filter(|&e| e < 0.0).collect();
        assert_eq!(found.len(), neg.len());
        for ((e, _), x) in found.iter().zip(&neg) {
            assert!((e - x).abs() < 1e-9);
        }
    }

    #[test]
    fn free_neumann_has_no_negative_spectrum() {
        let p = Problem::free(HermitianMatrix::zeros(1)).with_truncation(1.0).unwrap();
        let op = assemble_1d(&p, 0.01, 10.0).unwrap();
        assert!(negative_eigs(&op, 10, 0.0).is_empty());
    }

    #[test]
    fn robin_ground_state() {
        let p = Problem::free(HermitianMatrix::scalar(1, -1.0));
        let e = negative_eigs(&assemble_1d(&p, 0.01, 40.0).unwrap(), 10, 0.0);
        assert_eq!(e.len(), 1);
        assert!((e[0].0 + 1.0).abs() < 1e-3);
    }

    #[test]
    fn degenerate_ground_state_is_merged() {
        let p = Problem::free(HermitianMatrix::scalar(2, -1.0));
        let e = negative_eigs(&assemble_1d(&p, 0.01, 30.0).unwrap(), 10, 0.0);
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].1, 2);
    }

    #[test]
    fn two_level_robin_problem() {
        let p = Problem::free(HermitianMatrix::from_real_diagonal(&[-1.0, -0.5]));
        let e = negative_eigs(&assemble_1d(&p, 0.01, 60.0).unwrap(), 10, 0.0);
        assert_eq!(e.len(), 2);
        assert!((e[0].0 + 1.0).abs() < 1e-3 && (e[1].0 + 0.25).abs() < 1e-3);
    }

    #[test]
    fn box_well_second_order() {
        let p = Problem::new(
            PotentialSpec::scalar(1, ScalarProfile::Box { height: 4.0, left: 0.0, right: 1.0 }),
            HermitianMatrix::zeros(1),
        )
        .unwrap();
        let a = oracle_spectrum(&p, 0.02, 30.0).unwrap().flattened();
        let b = oracle_spectrum(&p, 0.01, 30.0).unwrap().flattened();
        let c = oracle_spectrum(&p, 0.005, 30.0).unwrap().flattened();
        assert_eq!(a.len(), c.len());
        let ratio = (a[0] - b[0]) / (b[0] - c[0]);
        assert!((2.5..6.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn diagonal_problem_is_block_diagonal() {
        let p = Problem::new(
            PotentialSpec::diagonal(vec![
                ScalarProfile::Box { height: 3.0, left: 0.0, right: 1.0 },
                ScalarProfile::Box { height: 6.0, left: 0.0, right: 0.5 },
            ]),
            HermitianMatrix::from_real_diagonal(&[-0.3, 0.2]),
        )
        .unwrap();
        let whole = oracle_spectrum(&p, 0.01, 20.0).unwrap().flattened();
        let mut parts: Vec<f64> = (0..2)
            .flat_map(|j| {
                let c = p.channel(j).unwrap();
                oracle_spectrum(&c, 0.01, 20.0).unwrap().flattened()
            })
            .collect();
        parts.sort_by(|a, b| b.total_cmp(a));
        assert_eq!(whole.len(), parts.len());
        for (a, b) in whole.iter().zip(&parts) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn rejects_bad_grids() {
        let p = Problem::free(HermitianMatrix::scalar(1, -1.0));
        assert!(assemble_1d(&p, 0.3, 1.0).is_err());
        assert!(assemble_1d(&p, 0.1, 1.0).is_err());
        assert!(cell_count(0.1, 2.0).is_ok());
    }

    #[test]
    fn halfplane_zero_potential() {
        let v = |_: f64, _: f64| 0.0;
        let op = assemble_2d_halfplane(&v, &[1.0], &[-1.0, 1.0], 0.1, 2.0, 2.0).unwrap();
        assert!(negative_eigs(&op, 10, 0.0).is_empty());
    }

    #[test]
    fn halfplane_separable_is_sum_of_pieces() {
        // Discrete separability: E = e₁ + e₂ for the 1D factors.
        let (h, l1, l2) = (0.1, 3.0, 3.0);
        let v = |x: f64, y: f64| {
            let a = if x < 1.0 { 6.0 } else { 0.0 };
            let b = if y.abs() < 1.0 { 5.0 } else { 0.0 };
            a + b
        };
        let op = assemble_2d_halfplane(&v, &[1.0], &[-1.0, 1.0], h, l1, l2).unwrap();
        let e2 = negative_eigs(&op, 1, 0.0)[0].0;
        let n1 = 30;
        let n2 = 59;
        let w1 = |i: usize| if i == 0 { 0.5 * h } else { h };
        let a1 = DMatrix::from_fn(n1, n1, |i, j| {
            if i == j {
                2.0 / (h * h) - if (i as f64) * h < 1.0 - 1e-9 { 6.0 } else if ((i as f64) * h - 1.0).abs() < 1e-9 { 3.0 } else { 0.0 }
            } else if i.abs_diff(j) == 1 {
                -1.0 / (h * (w1(i) * w1(j)).sqrt())
            } else {
                0.0
            }
        });
        let a2 = DMatrix::from_fn(n2, n2, |i, j| {
            let y = -l2 + (i + 1) as f64 * h;
            if i == j {
                2.0 / (h * h) - if y.abs() < 1.0 - 1e-9 { 5.0 } else if (y.abs() - 1.0).abs() < 1e-9 { 2.5 } else { 0.0 }
            } else if i.abs_diff(j) == 1 {
                -1.0 / (h * h)
            } else {
                0.0
            }
        });
        let m1 = a1.symmetric_eigenvalues().min();
        let m2 = a2.symmetric_eigenvalues().min();
        assert!((e2 - (m1 + m2)).abs() < 1e-8, "{e2} vs {}", m1 + m2);
    }

    #[test]
    fn halfplane_grid_cap() {
        let v = |_: f64, _: f64| 1.0;
        let r = assemble_2d_halfplane(&v, &[1.0], &[-1.0, 1.0], 0.01, 2.0, 2.0);
        assert!(matches!(r, Err(Error::Grid(_))));
    }
}
