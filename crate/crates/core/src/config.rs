//! Tolerance defaults shared by every module.
//!
//! Every numerical threshold used by the pipeline lives here so that
//! callers (and the CLI `--tol-*` flags) can override any of them.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Largest Hermiticity defect that construction symmetrizes away.
    pub hermitian_defect: f64,
    /// Jacobi sweeps stop once the off-diagonal Frobenius norm falls below
    /// this multiple of the full norm.
    pub jacobi_rel: f64,
    pub jacobi_max_sweeps: usize,

    /// Runge-Kutta relative and absolute step tolerances.
    pub ode_rtol: f64,
    pub ode_atol: f64,
    pub ode_max_steps: usize,
    /// Renormalize after this many accepted steps.
    pub renorm_every: usize,
    /// Renormalize immediately once the frame norm exceeds this.
    pub renorm_threshold: f64,
    /// Condition number of M(b) beyond which F(b) is not returned.
    pub singular_condition: f64,
    /// Riccati flow is declared to hit a pole once |F| exceeds this.
    pub pole_norm: f64,

    /// Number of lambda grid points in the spectral scan.
    pub scan_points: usize,
    /// Lower end of the scan, in units of the spectral bound.
    pub lambda_min_rel: f64,
    /// Relative bracket width at which root bisection stops.
    pub bisect_rel: f64,
    /// Distinct roots closer than this (times the spectral bound) merge.
    pub cluster_rel: f64,
    /// Kernel dimension threshold for F(b) + sqrt(lambda), times (1 + |F(b)|).
    pub mult_rel: f64,

    /// Inequality verdicts.
    pub verdict_rel: f64,
    pub saturation_rel: f64,

    /// Adaptive quadrature absolute tolerance, times the potential scale.
    pub quad_rel: f64,

    /// Default tail tolerance, in units of max |V|.
    pub tail_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            hermitian_defect: 1e-12,
            jacobi_rel: 1e-15,
            jacobi_max_sweeps: 64,
            ode_rtol: 1e-10,
            ode_atol: 1e-12,
            ode_max_steps: 2_000_000,
            renorm_every: 8,
            renorm_threshold: 1e6,
            singular_condition: 1e12,
            pole_norm: 1e8,
            scan_points: 400,
            lambda_min_rel: 1e-9,
            bisect_rel: 1e-11,
            cluster_rel: 1e-7,
            mult_rel: 1e-6,
            verdict_rel: 1e-7,
            saturation_rel: 1e-6,
            quad_rel: 1e-11,
            tail_rel: 1e-10,
        }
    }
}
