//! Problem files.
//!
//! A file holds exactly one of `[problem]`, `[graph]` or `[halfspace]`,
//! plus optional `[tolerances]`, `[search]`, `[verify]` and `[oracle]`
//! blocks. Matrices are either a flat row-major list of `[re, im]` pairs
//! or a table `{ rows = [[...]], imag = [[...]] }` with `imag` optional.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use halfline::graphs::{CouplingSpec, StarGraph};
use halfline::halfspace::HalfspaceCase;
use halfline::hermitian::CMatrix;
use halfline::Complex64;
use halfline::{HermitianMatrix, PotentialSpec, PotentialTerm, Problem, ScalarProfile, SearchOptions, Tolerances};
use serde::{Deserialize, Serialize};

/// Version stamped into every report and accepted in input files.
pub const SCHEMA_VERSION: u32 = 1;

fn current_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixInput {
    Pairs(Vec<[f64; 2]>),
    Rows {
        rows: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        imag: Option<Vec<Vec<f64>>>,
    },
}

impl MatrixInput {
    pub fn to_hermitian(&self, tol: &Tolerances) -> Result<HermitianMatrix> {
        let m = match self {
            Self::Pairs(pairs) => {
                let n = (pairs.len() as f64).sqrt().round() as usize;
                if n * n != pairs.len() || n == 0 {
                    bail!("a matrix needs n² [re, im] pairs, got {}", pairs.len());
                }
                CMatrix::from_fn(n, n, |i, j| Complex64::new(pairs[i * n + j][0], pairs[i * n + j][1]))
            }
            Self::Rows { rows, imag } => {
                let n = rows.len();
                let square = |r: &[Vec<f64>]| r.len() == n && r.iter().all(|row| row.len() == n);
                if n == 0 || !square(rows) || imag.as_ref().is_some_and(|im| !square(im)) {
                    bail!("matrix rows must form a nonempty square array");
                }
                CMatrix::from_fn(n, n, |i, j| {
                    Complex64::new(rows[i][j], imag.as_ref().map_or(0.0, |im| im[i][j]))
                })
            }
        };
        Ok(HermitianMatrix::new(m, tol)?)
    }
}

impl From<&HermitianMatrix> for MatrixInput {
    fn from(m: &HermitianMatrix) -> Self {
        Self::Pairs(m.to_row_major_pairs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermInput {
    pub profile: ScalarProfile,
    pub weight: MatrixInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemBlock {
    pub boundary: MatrixInput,
    #[serde(default)]
    pub terms: Vec<TermInput>,
    #[serde(default)]
    pub require_psd: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgePotential {
    pub edge: usize,
    pub profile: ScalarProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphBlock {
    pub edges: usize,
    pub coupling: CouplingSpec,
    #[serde(default)]
    pub potentials: Vec<EdgePotential>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchBlock {
    pub scan_points: Option<usize>,
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyBlock {
    #[serde(default)]
    pub gammas: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleBlock {
    pub h: Option<f64>,
    #[serde(rename = "L")]
    pub length: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default = "current_version")]
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halfspace: Option<HalfspaceCase>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub search: SearchBlock,
    #[serde(default)]
    pub verify: VerifyBlock,
    #[serde(default)]
    pub oracle: OracleBlock,
}

/// A parsed file together with its raw table, kept for sweeps.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub file: ProblemFile,
    pub raw: toml::Table,
}

pub fn parse_str(text: &str) -> Result<Loaded> {
    let file: ProblemFile = toml::from_str(text).map_err(|e| anyhow!("{e}"))?;
    file.check()?;
    let raw: toml::Table = toml::from_str(text).map_err(|e| anyhow!("{e}"))?;
    Ok(Loaded { file, raw })
}

pub fn load(path: &Path) -> Result<Loaded> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn from_table(raw: toml::Table) -> Result<ProblemFile> {
    let text = toml::to_string(&raw)?;
    let file: ProblemFile = toml::from_str(&text).map_err(|e| anyhow!("{e}"))?;
    file.check()?;
    Ok(file)
}

impl ProblemFile {
    fn check(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            bail!("unsupported schema_version {} (expected {SCHEMA_VERSION})", self.schema_version);
        }
        let blocks = [self.problem.is_some(), self.graph.is_some(), self.halfspace.is_some()];
        match blocks.iter().filter(|&&b| b).count() {
            1 => Ok(()),
            0 => bail!("the file needs one of [problem], [graph] or [halfspace]"),
            _ => bail!("[problem], [graph] and [halfspace] are mutually exclusive"),
        }
    }

    pub fn from_problem(prob: &Problem) -> Self {
        let terms = prob
            .potential
            .terms
            .iter()
            .map(|t| TermInput { profile: t.profile.clone(), weight: (&t.weight).into() })
            .collect();
        Self {
            schema_version: SCHEMA_VERSION,
            name: None,
            problem: Some(ProblemBlock {
                boundary: (&prob.boundary).into(),
                terms,
                require_psd: prob.potential.require_psd,
                truncation_radius: Some(prob.truncation_radius),
                tail_tolerance: Some(prob.tail_tolerance),
            }),
            graph: None,
            halfspace: None,
            tolerances: prob.tolerances,
            search: SearchBlock::default(),
            verify: VerifyBlock::default(),
            oracle: OracleBlock::default(),
        }
    }

    /// The half-line problem of a `[problem]` or `[graph]` file.
    pub fn half_line(&self, tol: &Tolerances) -> Result<Problem> {
        if let Some(g) = &self.graph {
            let mut prob = halfline::graphs::graph_problem(&self.star_graph(g)?)?;
            prob.tolerances = *tol;
            return Ok(prob);
        }
        let p = self.problem.as_ref().ok_or_else(|| anyhow!("this command needs a [problem] or [graph] block"))?;
        let boundary = p.boundary.to_hermitian(tol).context("problem.boundary")?;
        let terms = p
            .terms
            .iter()
            .enumerate()
            .map(|(k, t)| {
                let weight = t.weight.to_hermitian(tol).with_context(|| format!("problem.terms[{k}].weight"))?;
                Ok(PotentialTerm { profile: t.profile.clone(), weight })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut spec = PotentialSpec::new(boundary.dim(), terms)?;
        spec.require_psd = p.require_psd;
        let mut prob = Problem::with_tolerances(spec, boundary, *tol)?;
        if let Some(eps) = p.tail_tolerance {
            prob = prob.with_tail_tolerance(eps)?;
        }
        if let Some(b) = p.truncation_radius {
            prob = prob.with_truncation(b)?;
        }
        Ok(prob)
    }

    pub fn star_graph(&self, g: &GraphBlock) -> Result<StarGraph> {
        let mut edge_potentials = vec![None; g.edges];
        for p in &g.potentials {
            let slot = edge_potentials
                .get_mut(p.edge)
                .ok_or_else(|| anyhow!("graph.potentials: edge {} out of range 0..{}", p.edge, g.edges))?;
            if slot.is_some() {
                bail!("graph.potentials: edge {} listed twice", p.edge);
            }
            *slot = Some(p.profile.clone());
        }
        Ok(StarGraph { edges: g.edges, edge_potentials, coupling: g.coupling.clone() })
    }

    pub fn search_options(&self, tol: &Tolerances) -> SearchOptions {
        let mut o = SearchOptions::new(*tol);
        if let Some(n) = self.search.scan_points {
            o.scan_points = n;
        }
        o.lambda_min = self.search.lambda_min;
        o.lambda_max = self.search.lambda_max;
        o
    }

    pub fn gammas(&self) -> Vec<f64> {
        if self.verify.gammas.is_empty() {
            vec![1.5, 2.0, 3.0]
        } else {
            self.verify.gammas.clone()
        }
    }
}

/// Sets a numeric leaf addressed by a dotted path; array elements are
/// addressed by index, as in `problem.terms.0.profile.height`.
pub fn set_numeric(raw: &mut toml::Table, path: &str, value: f64) -> Result<()> {
    let keys: Vec<&str> = path.split('.').collect();
    let root = raw.get_mut(keys[0]).ok_or_else(|| anyhow!("no key `{}` in the file", keys[0]))?;
    set_in(root, &keys[1..], path, value)
}

fn set_in(slot: &mut toml::Value, keys: &[&str], path: &str, value: f64) -> Result<()> {
    let Some((key, rest)) = keys.split_first() else {
        return assign(slot, path, value);
    };
    let child = match slot {
        toml::Value::Table(t) => t.get_mut(*key),
        toml::Value::Array(a) => key.parse::<usize>().ok().and_then(|i| a.get_mut(i)),
        _ => None,
    };
    let child = child.ok_or_else(|| anyhow!("`{path}` does not resolve at `{key}`"))?;
    set_in(child, rest, path, value)
}

fn assign(slot: &mut toml::Value, path: &str, value: f64) -> Result<()> {
    match slot {
        toml::Value::Float(f) => *f = value,
        toml::Value::Integer(i) => {
            if value.fract() != 0.0 {
                bail!("`{path}` is an integer and cannot take {value}");
            }
            *i = value as i64;
        }
        _ => bail!("`{path}` is not a numeric leaf"),
    }
    Ok(())
}

/// `start:stop:count` (inclusive, evenly spaced) or a comma list.
pub fn parse_values(spec: &str) -> Result<Vec<f64>> {
    let num = |s: &str| s.trim().parse::<f64>().with_context(|| format!("`{s}` is not a number"));
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [a, b, n] = parts[..] else {
            bail!("range must be start:stop:count, got `{spec}`");
        };
        let (a, b) = (num(a)?, num(b)?);
        let n: usize = n.trim().parse().with_context(|| format!("`{n}` is not a count"))?;
        return Ok(match n {
            0 => bail!("range count must be positive"),
            1 => vec![a],
            _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
        });
    }
    spec.split(',').map(num).collect()
}
