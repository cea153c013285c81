//! Shooting from x = 0 to the truncation radius b.
//!
//! The fundamental matrix solution M of -M'' - V M = -λ M with M(0) = 𝕀,
//! M'(0) = 𝔖 is integrated as the linear first-order system for the stacked
//! frame [M; M'] with an embedded 5(4) Runge-Kutta pair. The frame is
//! right-multiplied by R⁻¹ from a thin QR factorization at checkpoints; the
//! Riccati variable F = M' M⁻¹ does not see this.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::hermitian::{hermitian_defect, CMatrix, HermitianMatrix};
use crate::model::{sort_dedup, Problem};

/// Stacked solution frame at a point x.
#[derive(Debug, Clone)]
pub struct ShootingState {
    pub x: f64,
    /// M(x), up to right multiplication by an invertible matrix.
    pub m: CMatrix,
    /// M'(x), same right factor as `m`.
    pub mp: CMatrix,
    /// Accumulated log |det R| of the renormalizations.
    pub renorm_log: f64,
}

impl ShootingState {
    pub fn initial(boundary: &HermitianMatrix) -> Self {
        let n = boundary.dim();
        Self { x: 0.0, m: CMatrix::identity(n, n), mp: boundary.as_matrix().clone(), renorm_log: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    fn frame_norm_sqr(&self) -> f64 {
        self.m.iter().chain(self.mp.iter()).map(|z| z.norm_sqr()).sum()
    }

    /// ‖M*M' − M'*M‖ relative to ‖[M; M']‖².
    pub fn wronskian_defect(&self) -> f64 {
        let w = self.m.adjoint() * &self.mp - self.mp.adjoint() * &self.m;
        let n: f64 = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        n / self.frame_norm_sqr().max(f64::MIN_POSITIVE)
    }

    /// Replaces the frame by its orthonormal QR factor. Returns
    /// min |R_ii| / max |R_ii| as a rank estimate.
    pub fn renormalize(&mut self) -> f64 {
        let n = self.dim();
        let mut stacked = CMatrix::zeros(2 * n, n);
        stacked.rows_mut(0, n).copy_from(&self.m);
        stacked.rows_mut(n, n).copy_from(&self.mp);
        let qr = stacked.qr();
        let r = qr.r();
        let q = qr.q();
        let diag: Vec<f64> = (0..n).map(|j| r[(j, j)].norm()).collect();
        self.renorm_log += diag.iter().map(|d| d.ln()).sum::<f64>();
        self.m = q.rows(0, n).into_owned();
        self.mp = q.rows(n, n).into_owned();
        let max = diag.iter().copied().fold(0.0, f64::max);
        let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
        if max > 0.0 {
            min / max
        } else {
            0.0
        }
    }

    /// Condition number of M.
    pub fn m_condition(&self) -> f64 {
        let sv = self.m.clone().singular_values();
        let max = sv.iter().copied().fold(0.0, f64::max);
        let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
        if min <= 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    /// F = M' M⁻¹ before symmetrization.
    pub fn raw_riccati(&self) -> Option<CMatrix> {
        let inv = self.m.clone().try_inverse()?;
        Some(&self.mp * inv)
    }
}

/// Per-run integration diagnostics.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PropagationDiagnostics {
    pub steps: usize,
    pub rejected: usize,
    pub renormalizations: usize,
    /// Largest relative Wronskian defect seen at any checkpoint.
    pub max_wronskian: f64,
    /// Smallest rank estimate of the stacked frame.
    pub min_rank_ratio: f64,
    /// Hermiticity defect of F(b) before symmetrization, relative to 1 + ‖F‖.
    pub hermitian_defect: f64,
    /// Condition number of M(b).
    pub endpoint_condition: f64,
}

impl PropagationDiagnostics {
    fn new() -> Self {
        Self { min_rank_ratio: 1.0, ..Default::default() }
    }
}

/// F(b; λ) with its diagnostics.
#[derive(Debug, Clone)]
pub struct Propagation {
    pub f_b: HermitianMatrix,
    pub state: ShootingState,
    pub diagnostics: PropagationDiagnostics,
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates the frame through the smooth pieces of a problem.
struct Integrator<'a> {
    prob: &'a Problem,
    lambda: f64,
    tol: Tolerances,
    renorm_every: usize,
    diag: PropagationDiagnostics,
    since_renorm: usize,
    h_hint: f64,
    h_max: f64,
    trace: Option<Vec<ShootingState>>,
}

impl<'a> Integrator<'a> {
    fn new(prob: &'a Problem, lambda: f64, tol: Tolerances) -> Self {
        let vmax = prob.potential.max_norm();
        let freq = (lambda.abs() + vmax + 1.0).sqrt();
        Self {
            prob,
            lambda,
            tol,
            renorm_every: tol.renorm_every.max(1),
            diag: PropagationDiagnostics::new(),
            since_renorm: 0,
            h_hint: 0.05 / freq,
            h_max: f64::INFINITY,
            trace: None,
        }
    }

    /// (λ − V(x)) evaluated with inward limits on the piece.
    fn coefficient(&self, x: f64, lo: f64, hi: f64) -> CMatrix {
        let v = if lo >= self.prob.truncation_radius {
            CMatrix::zeros(self.prob.dim(), self.prob.dim())
        } else {
            self.prob.potential.evaluate_in_piece(x, lo, hi).into_matrix()
        };
        let n = v.nrows();
        CMatrix::identity(n, n) * Complex64::new(self.lambda, 0.0) - v
    }

    fn checkpoint(&mut self, state: &mut ShootingState, force: bool) {
        self.since_renorm += 1;
        let big = state.frame_norm_sqr().sqrt() > self.tol.renorm_threshold;
        if force || big || self.since_renorm >= self.renorm_every {
            self.diag.max_wronskian = self.diag.max_wronskian.max(state.wronskian_defect());
            let r = state.renormalize();
            self.diag.min_rank_ratio = self.diag.min_rank_ratio.min(r);
            self.diag.renormalizations += 1;
            self.since_renorm = 0;
        }
    }

    /// One DOPRI5 attempt; returns the new frame and the error ratio.
    fn attempt(&self, s: &ShootingState, h: f64, lo: f64, hi: f64) -> (CMatrix, CMatrix, f64) {
        let mut km: Vec<CMatrix> = Vec::with_capacity(7);
        let mut kp: Vec<CMatrix> = Vec::with_capacity(7);
        for stage in 0..7 {
            let mut m = s.m.clone();
            let mut mp = s.mp.clone();
            for j in 0..stage {
                let a = A[stage][j];
                if a != 0.0 {
                    let f = Complex64::new(h * a, 0.0);
                    m += &km[j] * f;
                    mp += &kp[j] * f;
                }
            }
            let x = s.x + C[stage] * h;
            let q = self.coefficient(x, lo, hi);
            km.push(mp);
            kp.push(q * m);
        }
        let mut m_new = s.m.clone();
        let mut mp_new = s.mp.clone();
        let mut em = CMatrix::zeros(s.m.nrows(), s.m.ncols());
        let mut ep = em.clone();
        for j in 0..7 {
            let b = if j < 6 { A[6][j] } else { 0.0 };
            if b != 0.0 {
                m_new += &km[j] * Complex64::new(h * b, 0.0);
                mp_new += &kp[j] * Complex64::new(h * b, 0.0);
            }
            if E[j] != 0.0 {
                em += &km[j] * Complex64::new(h * E[j], 0.0);
                ep += &kp[j] * Complex64::new(h * E[j], 0.0);
            }
        }
        let err: f64 = em.iter().chain(ep.iter()).map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let norm_old = s.frame_norm_sqr().sqrt();
        let norm_new: f64 =
            m_new.iter().chain(mp_new.iter()).map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let scale = self.tol.ode_atol + self.tol.ode_rtol * norm_old.max(norm_new);
        (m_new, mp_new, err / scale)
    }

    /// Advances `state` from its x to `target`, staying inside [lo, hi].
    fn advance(&mut self, state: &mut ShootingState, target: f64, lo: f64, hi: f64) -> Result<()> {
        let mut h = self.h_hint.min(target - state.x);
        while state.x < target {
            h = h.min(self.h_max);
            let remaining = target - state.x;
            let last = h >= remaining * (1.0 - 1e-12);
            let step = if last { remaining } else { h };
            if self.diag.steps + self.diag.rejected > self.tol.ode_max_steps {
                return Err(Error::Domain(format!(
                    "step budget exhausted at x = {} (lambda = {})",
                    state.x, self.lambda
                )));
            }
            let (m, mp, ratio) = self.attempt(state, step, lo, hi);
            if !ratio.is_finite() {
                self.diag.rejected += 1;
                h = step * 0.2;
                continue;
            }
            if ratio <= 1.0 {
                state.m = m;
                state.mp = mp;
                state.x = if last { target } else { state.x + step };
                self.diag.steps += 1;
                self.checkpoint(state, false);
                if let Some(t) = self.trace.as_mut() {
                    t.push(state.clone());
                }
                let grow = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
                if !last {
                    h = step * grow;
                    self.h_hint = h;
                }
            } else {
                self.diag.rejected += 1;
                h = step * (0.9 * ratio.powf(-0.2)).clamp(0.1, 0.9);
            }
        }
        Ok(())
    }

    /// Frames at the requested nodes (sorted, ≥ 0); integration beyond b
    /// uses V = 0.
    fn run(&mut self, nodes: &[f64]) -> Result<Vec<ShootingState>> {
        let mut state = ShootingState::initial(&self.prob.boundary);
        let end = nodes.last().copied().unwrap_or(0.0).max(0.0);
        let mut pieces = self.prob.pieces();
        let b = self.prob.truncation_radius;
        if end > b {
            pieces.push((b, end));
        }
        let mut out = Vec::with_capacity(nodes.len());
        let mut idx = 0;
        while idx < nodes.len() && nodes[idx] <= 0.0 {
            out.push(state.clone());
            idx += 1;
        }
        for (lo, hi) in pieces {
            if idx >= nodes.len() {
                break;
            }
            while idx < nodes.len() && nodes[idx] <= hi {
                self.advance(&mut state, nodes[idx], lo, hi)?;
                out.push(state.clone());
                idx += 1;
            }
            if idx < nodes.len() && state.x < hi {
                self.advance(&mut state, hi, lo, hi)?;
            }
        }
        Ok(out)
    }
}

/// Frame at b with diagnostics.
pub fn propagate_state(
    prob: &Problem,
    lambda: f64,
    tol: &Tolerances,
) -> Result<(ShootingState, PropagationDiagnostics)> {
    let mut integ = Integrator::new(prob, lambda, *tol);
    let mut states = integ.run(&[prob.truncation_radius])?;
    let mut state = states.pop().expect("one node");
    integ.checkpoint(&mut state, true);
    Ok((state, integ.diag))
}

/// F(b; λ) = M'(b) M(b)⁻¹, symmetrized.
pub fn propagate(prob: &Problem, lambda: f64, tol: &Tolerances) -> Result<Propagation> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    let (state, diagnostics) = propagate_state(prob, lambda, tol)?;
    finish(state, diagnostics, lambda, tol)
}

fn finish(
    state: ShootingState,
    mut diagnostics: PropagationDiagnostics,
    lambda: f64,
    tol: &Tolerances,
) -> Result<Propagation> {
    let condition = state.m_condition();
    diagnostics.endpoint_condition = condition;
    if !(condition <= tol.singular_condition) {
        return Err(Error::SingularEndpoint { lambda, condition });
    }
    let raw = state
        .raw_riccati()
        .ok_or(Error::SingularEndpoint { lambda, condition: f64::INFINITY })?;
    let f = HermitianMatrix::symmetrized(raw.clone());
    diagnostics.hermitian_defect = hermitian_defect(&raw) / (1.0 + f.op_norm());
    Ok(Propagation { f_b: f, state, diagnostics })
}

/// Exact propagation for piecewise-constant potentials: on each piece the
/// frame is advanced by cosh/cos blocks of λ − V.
pub fn propagate_transfer(prob: &Problem, lambda: f64, tol: &Tolerances) -> Result<Propagation> {
    let (state, diag) = transfer_state(prob, lambda)?;
    finish(state, diag, lambda, tol)
}

/// Frame at b from the transfer-matrix path.
pub fn transfer_state(prob: &Problem, lambda: f64) -> Result<(ShootingState, PropagationDiagnostics)> {
    transfer_walk(prob, lambda, 4.0, f64::INFINITY, |_| {})
}

/// Exact cos/cosh steps no longer than `max_dx` or `max_angle`·|λ − V|^{-1/2};
/// `visit` sees the frame after every step.
fn transfer_walk(
    prob: &Problem,
    lambda: f64,
    max_angle: f64,
    max_dx: f64,
    mut visit: impl FnMut(&ShootingState),
) -> Result<(ShootingState, PropagationDiagnostics)> {
    if !prob.potential.is_piecewise_constant() {
        return Err(Error::Domain("transfer-matrix path needs box profiles only".into()));
    }
    let n = prob.dim();
    let mut state = ShootingState::initial(&prob.boundary);
    let mut diag = PropagationDiagnostics::new();
    for (lo, hi) in prob.pieces() {
        let v = prob.potential.evaluate(0.5 * (lo + hi));
        let q = v.scale(-1.0).shift(lambda).eig();
        let qmax = q.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let pieces = (((hi - lo) * qmax.sqrt()) / max_angle).max((hi - lo) / max_dx).ceil().max(1.0) as usize;
        let dx = (hi - lo) / pieces as f64;
        let mut cs = Vec::with_capacity(n);
        let mut ss = Vec::with_capacity(n);
        let mut qs = Vec::with_capacity(n);
        for &qq in &q.eigenvalues {
            let (c, s) = if qq > 0.0 {
                let k = qq.sqrt();
                ((k * dx).cosh(), (k * dx).sinh() / k)
            } else if qq < 0.0 {
                let k = (-qq).sqrt();
                ((k * dx).cos(), (k * dx).sin() / k)
            } else {
                (1.0, dx)
            };
            cs.push(c);
            ss.push(s);
            qs.push(qq * s);
        }
        let block = |vals: &[f64]| q.rebuild(vals.iter().copied()).into_matrix();
        let (cm, sm, qm) = (block(&cs), block(&ss), block(&qs));
        for _ in 0..pieces {
            let m = &cm * &state.m + &sm * &state.mp;
            let mp = &qm * &state.m + &cm * &state.mp;
            state.m = m;
            state.mp = mp;
            state.x += dx;
            diag.steps += 1;
            diag.max_wronskian = diag.max_wronskian.max(state.wronskian_defect());
            diag.min_rank_ratio = diag.min_rank_ratio.min(state.renormalize());
            diag.renormalizations += 1;
            visit(&state);
        }
    }
    state.x = prob.truncation_radius;
    Ok((state, diag))
}

/// Frames along [0, b] with steps of at most `max_step`, starting with the
/// frame at 0 and ending with the frame at b.
pub fn frame_trace(prob: &Problem, lambda: f64, tol: &Tolerances, max_step: f64) -> Result<Vec<ShootingState>> {
    let mut out = vec![ShootingState::initial(&prob.boundary)];
    if prob.potential.is_piecewise_constant() {
        let freq = (lambda.abs() + prob.potential.max_norm() + 1.0).sqrt();
        let angle = (max_step * freq).min(4.0);
        let (last, _) = transfer_walk(prob, lambda, angle, max_step, |s| out.push(s.clone()))?;
        if let Some(end) = out.last_mut() {
            *end = last;
        }
        return Ok(out);
    }
    let mut integ = Integrator::new(prob, lambda, *tol);
    integ.h_max = max_step;
    integ.trace = Some(Vec::new());
    let mut states = integ.run(&[prob.truncation_radius])?;
    out.extend(integ.trace.take().unwrap_or_default());
    out.extend(states.pop());
    Ok(out)
}

/// Scalar continuation f(x, μ) of a Riccati eigenvalue past the support,
/// with t = x − b. Written with e = exp(−2√λ t) so that t → ∞ is stable.
pub fn continue_scalar(mu: f64, lambda: f64, t: f64) -> Result<f64> {
    let k = lambda.sqrt();
    if t == 0.0 {
        return Ok(mu);
    }
    if mu == -k {
        return Ok(-k);
    }
    let e = (-2.0 * k * t).exp();
    let num = (k + mu) - e * (k - mu);
    let den = (k + mu) + e * (k - mu);
    if !(den > 0.0) {
        return Err(Error::Pole { x: t, norm: f64::INFINITY });
    }
    Ok(k * num / den)
}

/// F(x) for x ≥ b: f applied to the eigenvalues of F(b), eigenvectors kept.
pub fn continue_beyond_support(
    f_b: &HermitianMatrix,
    lambda: f64,
    b: f64,
    x: f64,
) -> Result<HermitianMatrix> {
    if x < b {
        return Err(Error::Domain(format!("continuation needs x >= b, got {x} < {b}")));
    }
    if !(lambda > 0.0) {
        return Err(Error::Domain("lambda must be positive".into()));
    }
    let e = f_b.eig();
    let mut vals = Vec::with_capacity(e.dim());
    for &mu in &e.eigenvalues {
        vals.push(continue_scalar(mu, lambda, x - b).map_err(|_| Error::Pole { x, norm: f64::INFINITY })?);
    }
    Ok(e.rebuild(vals))
}

/// Sampled Riccati flow on [0, b] at a fixed λ.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RiccatiTrace {
    pub lambda: f64,
    pub abscissae: Vec<f64>,
    pub f_samples: Vec<HermitianMatrix>,
    /// ‖F' + F² + V − λ𝕀‖ with F' from finite differences inside each
    /// smooth piece.
    pub residuals: Vec<f64>,
    /// Hermiticity defect of F before symmetrization, relative to 1 + ‖F‖.
    pub hermitian_defects: Vec<f64>,
    pub diagnostics: PropagationDiagnostics,
}

impl RiccatiTrace {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_hermitian_defect(&self) -> f64 {
        self.hermitian_defects.iter().copied().fold(0.0, f64::max)
    }
}

/// Uniform sub-grid of every smooth piece of [0, b], spacing at most `h`.
pub fn piecewise_grid(prob: &Problem, h: f64) -> Vec<f64> {
    let mut pts = vec![0.0];
    for (lo, hi) in prob.pieces() {
        let n = (((hi - lo) / h).ceil() as usize).max(8);
        for i in 1..=n {
            pts.push(lo + (hi - lo) * i as f64 / n as f64);
        }
    }
    sort_dedup(&mut pts);
    pts
}

/// Fornberg weights for the first derivative at `x0` from `xs`.
fn derivative_weights(x0: f64, xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut c = vec![vec![0.0; 2]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(1);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|r| r[1]).collect()
}

/// Riccati flow F = M'M⁻¹ sampled on `grid` (nodes in [0, b]).
pub fn riccati_flow(
    prob: &Problem,
    lambda: f64,
    grid: &[f64],
    tol: &Tolerances,
) -> Result<RiccatiTrace> {
    let mut nodes = grid.to_vec();
    sort_dedup(&mut nodes);
    let mut integ = Integrator::new(prob, lambda, *tol);
    let states = integ.run(&nodes)?;
    let mut f_samples = Vec::with_capacity(nodes.len());
    let mut defects = Vec::with_capacity(nodes.len());
    for s in &states {
        let cond = s.m_condition();
        let raw = match s.raw_riccati() {
            Some(r) if cond <= tol.singular_condition => r,
            _ => return Err(Error::Pole { x: s.x, norm: f64::INFINITY }),
        };
        let f = HermitianMatrix::symmetrized(raw.clone());
        let norm = f.op_norm();
        if norm > tol.pole_norm {
            return Err(Error::Pole { x: s.x, norm });
        }
        defects.push(hermitian_defect(&raw) / (1.0 + norm));
        f_samples.push(f);
    }

    // Residuals: derivative stencils never straddle a breakpoint.
    let pieces = prob.pieces();
    let mut residuals = vec![0.0; nodes.len()];
    let n = prob.dim();
    for (i, &x) in nodes.iter().enumerate() {
        let (lo, hi) = pieces
            .iter()
            .copied()
            .find(|&(lo, hi)| x >= lo && x <= hi)
            .unwrap_or((prob.truncation_radius, f64::INFINITY));
        let first = nodes.partition_point(|&y| y < lo);
        let last = nodes.partition_point(|&y| y <= hi);
        let members: Vec<usize> = (first..last).collect();
        if members.len() < 3 {
            continue;
        }
        let pos = members.iter().position(|&j| j == i).unwrap();
        let width = 7.min(members.len());
        let start = pos.saturating_sub(width / 2).min(members.len() - width);
        let stencil = &members[start..start + width];
        let xs: Vec<f64> = stencil.iter().map(|&j| nodes[j]).collect();
        let w = derivative_weights(x, &xs);
        let mut fp = CMatrix::zeros(n, n);
        for (&j, wj) in stencil.iter().zip(&w) {
            fp += f_samples[j].as_matrix() * Complex64::new(*wj, 0.0);
        }
        let v = if lo >= prob.truncation_radius {
            CMatrix::zeros(n, n)
        } else {
            prob.potential.evaluate_in_piece(x, lo, hi).into_matrix()
        };
        let f = f_samples[i].as_matrix();
        let r = fp + f * f + v - CMatrix::identity(n, n) * Complex64::new(lambda, 0.0);
        residuals[i] = HermitianMatrix::symmetrized(r).op_norm();
    }

    Ok(RiccatiTrace {
        lambda,
        abscissae: nodes,
        f_samples,
        residuals,
        hermitian_defects: defects,
        diagnostics: integ.diag,
    })
}

/// Frames at arbitrary sorted nodes (used by the commutation transform).
pub fn frames_at(prob: &Problem, lambda: f64, nodes: &[f64], tol: &Tolerances) -> Result<Vec<ShootingState>> {
    Integrator::new(prob, lambda, *tol).run(nodes)
}

/// Propagation with a different checkpoint cadence (renormalization
/// invariance checks).
pub fn propagate_with_cadence(
    prob: &Problem,
    lambda: f64,
    tol: &Tolerances,
    every: usize,
) -> Result<Propagation> {
    let mut t = *tol;
    t.renorm_every = every;
    propagate(prob, lambda, &t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PotentialSpec, ScalarProfile};

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn box_problem(v0: f64, a: f64, sigma: f64) -> Problem {
        Problem::new(
            PotentialSpec::scalar(1, ScalarProfile::Box { height: v0, left: 0.0, right: a }),
            HermitianMatrix::scalar(1, sigma),
        )
        .unwrap()
    }

    #[test]
    fn constant_solution_is_fixed_point() {
        let sigma = -0.7;
        let p = Problem::free(HermitianMatrix::scalar(2, sigma)).with_truncation(3.0).unwrap();
        let f = propagate(&p, sigma * sigma, &tol()).unwrap().f_b;
        assert!(f.sub(&HermitianMatrix::scalar(2, sigma)).frobenius_norm() < 1e-9);
    }

    #[test]
    fn neumann_free_gives_tanh() {
        let p = Problem::free(HermitianMatrix::zeros(2)).with_truncation(1.0).unwrap();
        let f = propagate(&p, 1.0, &tol()).unwrap().f_b;
        let expected = HermitianMatrix::scalar(2, 1.0_f64.tanh());
        assert!(f.sub(&expected).frobenius_norm() < 1e-10);
        assert!((f.get(0, 0).re - 0.7616).abs() < 1e-4);
    }

    /// Scalar box well: closed-form cos/sin propagation through the box.
    #[test]
    fn scalar_box_matches_closed_form() {
        let (v0, a, sigma, lambda) = (4.0, 1.0, 0.3, 1.5_f64);
        let p = box_problem(v0, a, sigma);
        let k = (v0 - lambda).sqrt();
        let m = (k * a).cos() + sigma * (k * a).sin() / k;
        let mp = -k * (k * a).sin() + sigma * (k * a).cos();
        let exact = mp / m;
        let rk = propagate(&p, lambda, &tol()).unwrap().f_b.get(0, 0).re;
        let tm = propagate_transfer(&p, lambda, &tol()).unwrap().f_b.get(0, 0).re;
        assert!((rk - exact).abs() < 1e-8, "{rk} vs {exact}");
        assert!((tm - exact).abs() < 1e-12, "{tm} vs {exact}");
    }

    #[test]
    fn matrix_box_transfer_agrees_with_rk() {
        let w = crate::model::real_matrix(&[&[3.0, 1.0], &[1.0, 2.0]]);
        let spec = PotentialSpec::zero(2)
            .with_term(ScalarProfile::Box { height: 1.0, left: 0.0, right: 1.0 }, w)
            .with_term(
                ScalarProfile::Box { height: 2.0, left: 0.5, right: 2.0 },
                HermitianMatrix::from_real_diagonal(&[1.0, 0.0]),
            );
        let s = crate::model::real_matrix(&[&[-0.5, 0.2], &[0.2, 0.4]]);
        let p = Problem::new(spec, s).unwrap();
        for lambda in [0.3, 1.1, 2.7] {
            let a = propagate(&p, lambda, &tol()).unwrap();
            let b = propagate_transfer(&p, lambda, &tol()).unwrap();
            let scale = 1.0 + a.f_b.op_norm();
            assert!(a.f_b.sub(&b.f_b).op_norm() < 1e-8 * scale);
            assert!(a.diagnostics.max_wronskian < 1e-8);
            assert!(a.diagnostics.hermitian_defect < 1e-8);
        }
    }

    #[test]
    fn continuation_cases() {
        let lambda: f64 = 2.0;
        let k = lambda.sqrt();
        let f = HermitianMatrix::scalar(1, -k);
        let out = continue_beyond_support(&f, lambda, 1.0, 7.0).unwrap();
        assert!((out.get(0, 0).re + k).abs() < 1e-15);
        let z = HermitianMatrix::zeros(1);
        let far = continue_beyond_support(&z, lambda, 1.0, 60.0).unwrap();
        assert!((far.get(0, 0).re - k).abs() < 1e-14);
        let m = crate::model::real_matrix(&[&[0.3, 0.1], &[0.1, -0.2]]);
        assert_eq!(continue_beyond_support(&m, lambda, 1.0, 1.0).unwrap(), m.eig().reconstruct());
    }

    #[test]
    fn continuation_beyond_pole_is_an_error() {
        let f = HermitianMatrix::scalar(1, -3.0);
        assert!(matches!(
            continue_beyond_support(&f, 1.0, 0.0, 10.0),
            Err(Error::Pole { .. })
        ));
    }

    #[test]
    fn continuation_is_monotone_in_mu() {
        let lambda = 1.3;
        for t in [0.1, 0.5, 2.0] {
            let mut prev = f64::NEG_INFINITY;
            for i in 0..40 {
                let mu = -1.1 + 0.1 * i as f64;
                let v = continue_scalar(mu, lambda, t).unwrap();
                assert!(v > prev);
                prev = v;
            }
        }
    }

    #[test]
    fn matching_point_agrees_with_continuation() {
        let spec = PotentialSpec::scalar(
            2,
            ScalarProfile::Box { height: 0.5, left: 0.0, right: 1.0 },
        );
        let s = crate::model::real_matrix(&[&[0.6, 0.3], &[0.3, 0.4]]);
        let short = Problem::new(spec, s).unwrap();
        let long = short.clone().with_truncation(2.5).unwrap();
        let lambda = 0.8;
        let fb = propagate(&short, lambda, &tol()).unwrap().f_b;
        let direct = propagate(&long, lambda, &tol()).unwrap().f_b;
        let cont = continue_beyond_support(&fb, lambda, 1.0, 2.5).unwrap();
        assert!(direct.sub(&cont).op_norm() < 1e-7);
    }

    #[test]
    fn renormalization_cadence_invariance() {
        let p = Problem::new(
            PotentialSpec::scalar(1, ScalarProfile::Gaussian { amplitude: 6.0, center: 1.0, width: 0.6 }),
            HermitianMatrix::scalar(1, 0.5),
        )
        .unwrap();
        for lambda in [0.2, 2.0, 5.0] {
            let a = propagate_with_cadence(&p, lambda, &tol(), 8).unwrap().f_b;
            let b = propagate_with_cadence(&p, lambda, &tol(), 4).unwrap().f_b;
            assert!(a.sub(&b).op_norm() <= 1e-9 * (1.0 + a.op_norm()));
        }
    }

    #[test]
    fn riccati_stationary_flow() {
        let p = Problem::free(HermitianMatrix::scalar(2, -1.0)).with_truncation(2.0).unwrap();
        let grid = piecewise_grid(&p, 0.05);
        let tr = riccati_flow(&p, 1.0, &grid, &tol()).unwrap();
        for f in &tr.f_samples {
            assert!(f.sub(&HermitianMatrix::scalar(2, -1.0)).op_norm() < 1e-10);
        }
        assert!(tr.max_residual() < 1e-9);
    }

    #[test]
    fn riccati_tanh_flow() {
        let p = Problem::free(HermitianMatrix::zeros(1)).with_truncation(3.0).unwrap();
        let grid = piecewise_grid(&p, 0.01);
        let tr = riccati_flow(&p, 1.0, &grid, &tol()).unwrap();
        for (x, f) in tr.abscissae.iter().zip(&tr.f_samples) {
            assert!((f.get(0, 0).re - x.tanh()).abs() < 1e-9);
        }
        assert!(tr.max_residual() < 1e-7);
    }

    #[test]
    fn diagonal_flow_stays_diagonal() {
        let (sigma, alpha) = (-1.0, -0.5);
        let s = HermitianMatrix::from_real_diagonal(&[sigma, -alpha * sigma]);
        let p = Problem::free(s).with_truncation(2.0).unwrap();
        let grid = piecewise_grid(&p, 0.02);
        let tr = riccati_flow(&p, sigma * sigma, &grid, &tol()).unwrap();
        for (x, f) in tr.abscissae.iter().zip(&tr.f_samples) {
            assert!(f.is_diagonal(1e-10));
            assert!((f.get(0, 0).re - sigma).abs() < 1e-10);
            let second = continue_scalar(-alpha * sigma, 1.0, *x).unwrap();
            assert!((f.get(1, 1).re - second).abs() < 1e-9);
        }
    }

    #[test]
    fn fornberg_weights_centered() {
        let w = derivative_weights(0.0, &[-1.0, 0.0, 1.0]);
        assert!((w[0] + 0.5).abs() < 1e-15 && w[1].abs() < 1e-15 && (w[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_nonpositive_lambda() {
        let p = Problem::free(HermitianMatrix::zeros(1));
        assert!(propagate(&p, 0.0, &tol()).is_err());
    }
}
