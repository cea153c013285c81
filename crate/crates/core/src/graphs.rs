//! Star graphs with N semi-infinite edges joined at one vertex.
//!
//! Only couplings of the form φ'(0) = 𝔖φ(0) are representable. Couplings
//! with a Dirichlet component, such as the δ coupling that imposes
//! continuity of values at the vertex, fall outside this family.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian::HermitianMatrix;
use crate::model::{PotentialSpec, Problem, ScalarProfile};
use crate::spectrum::{find_spectrum, SearchOptions, Spectrum};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CouplingSpec {
    /// Independent Robin conditions φⱼ'(0) = σⱼφⱼ(0).
    RobinDecoupled { sigma: Vec<f64> },
    /// Common derivative φⱼ'(0) = c with Σⱼφⱼ(0) = βc.
    DeltaPrime { beta: f64 },
    Custom { matrix: HermitianMatrix },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarGraph {
    pub edges: usize,
    /// One entry per edge; `None` is a free edge.
    pub edge_potentials: Vec<Option<ScalarProfile>>,
    pub coupling: CouplingSpec,
}

impl StarGraph {
    pub fn validate(&self) -> Result<()> {
        if self.edges == 0 {
            return Err(Error::InvalidProblem("a star graph needs at least one edge".into()));
        }
        if self.edge_potentials.len() != self.edges {
            return Err(Error::DimensionMismatch { expected: self.edges, found: self.edge_potentials.len() });
        }
        for p in self.edge_potentials.iter().flatten() {
            p.validate()?;
        }
        coupling_matrix(&self.coupling, self.edges).map(|_| ())
    }

    pub fn is_diagonal(&self) -> bool {
        match &self.coupling {
            CouplingSpec::RobinDecoupled { .. } => true,
            CouplingSpec::DeltaPrime { .. } => self.edges == 1,
            CouplingSpec::Custom { matrix } => matrix.is_diagonal(0.0),
        }
    }
}

/// 𝔖 for a coupling on N edges.
pub fn coupling_matrix(c: &CouplingSpec, n: usize) -> Result<HermitianMatrix> {
    match c {
        CouplingSpec::RobinDecoupled { sigma } => {
            if sigma.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: sigma.len() });
            }
            Ok(HermitianMatrix::from_real_diagonal(sigma))
        }
        CouplingSpec::DeltaPrime { beta } => {
            if *beta == 0.0 || !beta.is_finite() {
                return Err(Error::InvalidProblem(format!("delta-prime strength must be nonzero, got {beta}")));
            }
            let rows = vec![vec![1.0 / beta; n]; n];
            HermitianMatrix::from_real_rows(&rows, &Default::default())
        }
        CouplingSpec::Custom { matrix } => {
            if matrix.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, found: matrix.dim() });
            }
            Ok(matrix.clone())
        }
    }
}

/// The half-line problem with diagonal potential diag(v₁, …, v_N).
pub fn graph_problem(g: &StarGraph) -> Result<Problem> {
    g.validate()?;
    let n = g.edges;
    let mut spec = PotentialSpec::zero(n);
    for (j, p) in g.edge_potentials.iter().enumerate() {
        if let Some(profile) = p {
            let mut d = vec![0.0; n];
            d[j] = 1.0;
            spec = spec.with_term(profile.clone(), HermitianMatrix::from_real_diagonal(&d));
        }
    }
    Problem::new(spec, coupling_matrix(&g.coupling, n)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSpectrum {
    pub spectrum: Spectrum,
    /// Per-edge scalar spectra, present for diagonal couplings.
    pub per_channel: Option<Vec<Spectrum>>,
}

pub fn graph_spectrum(g: &StarGraph, opts: &SearchOptions) -> Result<GraphSpectrum> {
    let prob = graph_problem(g)?;
    let spectrum = find_spectrum(&prob, opts)?;
    let per_channel = if prob.is_decoupled() {
        let parts = (0..g.edges)
            .map(|j| find_spectrum(&prob.channel(j)?, opts))
            .collect::<Result<Vec<_>>>()?;
        Some(parts)
    } else {
        None
    };
    Ok(GraphSpectrum { spectrum, per_channel })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fdoracle::oracle_spectrum;

    fn free(n: usize, coupling: CouplingSpec) -> StarGraph {
        StarGraph { edges: n, edge_potentials: vec![None; n], coupling }
    }

    #[test]
    fn robin_decoupled_matrix() {
        let s = coupling_matrix(&CouplingSpec::RobinDecoupled { sigma: vec![-1.0, -2.0] }, 2).unwrap();
        assert_eq!(s.diagonal(), vec![-1.0, -2.0]);
        assert!(s.is_diagonal(0.0));
    }

    #[test]
    fn delta_prime_conditions_by_substitution() {
        let beta = 2.0;
        let s = coupling_matrix(&CouplingSpec::DeltaPrime { beta }, 2).unwrap();
        assert!((s.get(0, 1).re - 0.5).abs() < 1e-15 && (s.get(0, 0).re - 0.5).abs() < 1e-15);
        // φ'(0) = 𝔖φ(0) yields a common derivative c with Σφ(0) = βc.
        let phi = [0.7, -0.2, 1.3];
        let s3 = coupling_matrix(&CouplingSpec::DeltaPrime { beta }, 3).unwrap();
        let d: Vec<f64> = (0..3).map(|j| (0..3).map(|k| s3.get(j, k).re * phi[k]).sum()).collect();
        assert!((d[0] - d[1]).abs() < 1e-15 && (d[1] - d[2]).abs() < 1e-15);
        assert!((phi.iter().sum::<f64>() - beta * d[0]).abs() < 1e-14);
        assert!(coupling_matrix(&CouplingSpec::DeltaPrime { beta: 0.0 }, 2).is_err());
    }

    #[test]
    fn custom_passes_through() {
        let m = crate::model::real_matrix(&[&[1.0, 0.5], &[0.5, -1.0]]);
        assert_eq!(coupling_matrix(&CouplingSpec::Custom { matrix: m.clone() }, 2).unwrap(), m);
        assert!(coupling_matrix(&CouplingSpec::Custom { matrix: m }, 3).is_err());
    }

    #[test]
    fn three_free_robin_edges() {
        let g = free(3, CouplingSpec::RobinDecoupled { sigma: vec![-1.0; 3] });
        let r = graph_spectrum(&g, &SearchOptions::default()).unwrap();
        assert_eq!(r.spectrum.entries.len(), 1);
        assert_eq!(r.spectrum.ground_multiplicity, 3);
        assert!((r.spectrum.entries[0].lambda - 1.0).abs() < 1e-9);
        assert_eq!(r.per_channel.unwrap().len(), 3);
    }

    #[test]
    fn delta_prime_negative_beta() {
        let beta = -1.6;
        let g = free(2, CouplingSpec::DeltaPrime { beta });
        let r = graph_spectrum(&g, &SearchOptions::default()).unwrap();
        assert_eq!(r.spectrum.count(), 1);
        assert!((r.spectrum.entries[0].lambda - (2.0 / beta).powi(2)).abs() < 1e-9);
        assert!(r.per_channel.is_none());
    }

    #[test]
    fn wells_on_two_edges_match_oracle() {
        let g = StarGraph {
            edges: 3,
            edge_potentials: vec![
                Some(ScalarProfile::Box { height: 4.0, left: 0.0, right: 1.0 }),
                Some(ScalarProfile::Box { height: 2.0, left: 0.0, right: 1.5 }),
                None,
            ],
            coupling: CouplingSpec::DeltaPrime { beta: 3.0 },
        };
        let r = graph_spectrum(&g, &SearchOptions::default()).unwrap();
        let p = graph_problem(&g).unwrap();
        let o = oracle_spectrum(&p, 0.005, 40.0).unwrap();
        let a = r.spectrum.flattened();
        let b: Vec<f64> = o.flattened().into_iter().filter(|&l| l > 1e-2).collect();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-3, "{x} vs {y}");
        }
    }

    #[test]
    fn edge_relabeling_invariance() {
        let profiles = [
            Some(ScalarProfile::Box { height: 4.0, left: 0.0, right: 1.0 }),
            Some(ScalarProfile::Gaussian { amplitude: 3.0, center: 0.5, width: 0.4 }),
            None,
        ];
        let m = crate::model::real_matrix(&[&[-0.5, 0.3, 0.1], &[0.3, 0.2, -0.2], &[0.1, -0.2, -0.1]]);
        let perm = [2usize, 0, 1];
        let permuted = {
            let rows: Vec<Vec<f64>> =
                (0..3).map(|j| (0..3).map(|k| m.get(perm[j], perm[k]).re).collect()).collect();
            HermitianMatrix::from_real_rows(&rows, &Default::default()).unwrap()
        };
        let g1 = StarGraph { edges: 3, edge_potentials: profiles.to_vec(), coupling: CouplingSpec::Custom { matrix: m } };
        let g2 = StarGraph {
            edges: 3,
            edge_potentials: perm.iter().map(|&j| profiles[j].clone()).collect(),
            coupling: CouplingSpec::Custom { matrix: permuted },
        };
        let a = graph_spectrum(&g1, &SearchOptions::default()).unwrap().spectrum.flattened();
        let b = graph_spectrum(&g2, &SearchOptions::default()).unwrap().spectrum.flattened();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn robin_graph_is_union_of_edges() {
        let g = StarGraph {
            edges: 2,
            edge_potentials: vec![Some(ScalarProfile::Box { height: 6.0, left: 0.0, right: 1.0 }), None],
            coupling: CouplingSpec::RobinDecoupled { sigma: vec![0.4, -0.8] },
        };
        let r = graph_spectrum(&g, &SearchOptions::default()).unwrap();
        let union = Spectrum::union(2, r.per_channel.as_ref().unwrap(), 1e-9);
        assert_eq!(r.spectrum.flattened().len(), union.flattened().len());
        for (x, y) in r.spectrum.flattened().iter().zip(union.flattened()) {
            assert!((x - y).abs() < 1e-8);
        }
    }
}
