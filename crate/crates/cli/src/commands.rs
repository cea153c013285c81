//! One function per subcommand. Each returns the rendered result and the
//! status that decides the exit code.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use halfline::constants::audit;
use halfline::darboux::{telescoped_rhs_check, transform_problem, verify_isospectrality};
use halfline::fdoracle::{default_truncation, discretization_tolerance, oracle_spectrum, round_length};
use halfline::graphs::graph_spectrum;
use halfline::halfspace::{verify_lifted_bound, verify_two_resolutions, HalfspaceCase, HalfspaceReport};
use halfline::inequalities::{applicable_reports, InequalityReport, Verdict};
use halfline::{find_spectrum, Problem, Spectrum, Tolerances};
use serde::Serialize;
use serde_json::json;

use crate::corpus;
use crate::output::{num, Rendered};
use crate::schema::{self, Loaded, ProblemFile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Ok,
    Hypothesis,
    Violation,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Self::Ok => 0,
            Self::Hypothesis => 2,
            Self::Violation => 3,
        }
    }
}

pub struct Outcome {
    pub rendered: Rendered,
    pub status: Status,
}

/// Settings shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Common {
    pub input: Option<PathBuf>,
    pub seed: Option<u64>,
    pub gammas: Vec<f64>,
    pub grid_h: Option<f64>,
    pub grid_l: Option<f64>,
    /// `--tol-*` overrides, keyed by field name.
    pub tol_overrides: Vec<(String, f64)>,
}

impl Common {
    fn load(&self) -> Result<Loaded> {
        let path = self.input.as_ref().ok_or_else(|| anyhow!("--input <FILE> is required for this command"))?;
        schema::load(path)
    }

    fn tolerances(&self, file: &ProblemFile) -> Result<Tolerances> {
        apply_overrides(file.tolerances, &self.tol_overrides)
    }

    fn gammas(&self, file: &ProblemFile) -> Vec<f64> {
        if self.gammas.is_empty() {
            file.gammas()
        } else {
            self.gammas.clone()
        }
    }
}

pub fn apply_overrides(tol: Tolerances, overrides: &[(String, f64)]) -> Result<Tolerances> {
    let mut v = serde_json::to_value(tol)?;
    let map = v.as_object_mut().expect("tolerances serialize to a map");
    let known: Vec<String> = map.keys().map(|k| k.replace('_', "-")).collect();
    for (key, value) in overrides {
        let slot = map.get_mut(key).ok_or_else(|| {
            anyhow!("unknown tolerance `--tol-{}`; known: {}", key.replace('_', "-"), known.join(", "))
        })?;
        *slot = if slot.is_u64() {
            if value.fract() != 0.0 || *value < 0.0 {
                bail!("--tol-{} takes a nonnegative integer", key.replace('_', "-"));
            }
            json!(*value as u64)
        } else {
            json!(value)
        };
    }
    Ok(serde_json::from_value(v)?)
}

/// Maps core hypothesis errors to exit code 2, everything else to 1.
pub fn error_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<halfline::Error>() {
        Some(halfline::Error::Hypothesis(_)) => 2,
        _ => 1,
    }
}

fn spectrum_rows(r: &mut Rendered, spec: &Spectrum) {
    for (k, l) in spec.entries.iter().enumerate() {
        r.row(vec![(k + 1).to_string(), num(l.lambda), l.multiplicity.to_string()]);
    }
}

#[derive(Serialize)]
struct ProblemSummary {
    dim: usize,
    truncation_radius: f64,
    spectral_bound: f64,
    decoupled: bool,
}

fn summary(p: &Problem) -> ProblemSummary {
    ProblemSummary {
        dim: p.dim(),
        truncation_radius: p.truncation_radius,
        spectral_bound: p.spectral_bound(),
        decoupled: p.is_decoupled(),
    }
}

pub fn solve(c: &Common) -> Result<Outcome> {
    let l = c.load()?;
    let tol = c.tolerances(&l.file)?;
    let prob = l.file.half_line(&tol)?;
    let spec = find_spectrum(&prob, &l.file.search_options(&tol))?;
    let mut r = Rendered::new("solve", &json!({ "problem": summary(&prob), "spectrum": spec }), &["k", "lambda", "multiplicity"])?;
    spectrum_rows(&mut r, &spec);
    Ok(Outcome { rendered: r, status: Status::Ok })
}

fn verdict_status(reports: &[&InequalityReport]) -> Status {
    if reports.iter().any(|r| r.verdict == Verdict::Violated) {
        Status::Violation
    } else if !reports.is_empty() && reports.iter().all(|r| r.verdict == Verdict::OutsideHypotheses) {
        Status::Hypothesis
    } else {
        Status::Ok
    }
}

fn report_row(r: &InequalityReport) -> Vec<String> {
    let flags: Vec<String> = r.hypothesis_flags.iter().map(|(k, v)| format!("{k}={v}")).collect();
    vec![r.name.to_string(), num(r.lhs), num(r.rhs), num(r.slack), r.verdict.to_string(), flags.join(";")]
}

const REPORT_HEADER: [&str; 6] = ["inequality", "lhs", "rhs", "slack", "verdict", "hypotheses"];

/// Spectrum and every applicable report for a half-line or graph file.
fn evaluate(file: &ProblemFile, c: &Common) -> Result<(Problem, Spectrum, Vec<InequalityReport>)> {
    let tol = c.tolerances(file)?;
    let prob = file.half_line(&tol)?;
    let opts = file.search_options(&tol);
    let spec = find_spectrum(&prob, &opts)?;
    let per_channel = if prob.is_decoupled() {
        Some((0..prob.dim()).map(|j| find_spectrum(&prob.channel(j)?, &opts)).collect::<halfline::Result<Vec<_>>>()?)
    } else {
        None
    };
    let reports = applicable_reports(&spec, &prob, &c.gammas(file), per_channel.as_deref())?;
    Ok((prob, spec, reports))
}

pub fn verify(c: &Common) -> Result<Outcome> {
    let l = c.load()?;
    if l.file.halfspace.is_some() {
        return halfspace(c, false);
    }
    let (prob, spec, reports) = evaluate(&l.file, c)?;
    let mut r = Rendered::new(
        "verify",
        &json!({ "problem": summary(&prob), "spectrum": spec, "reports": reports }),
        &REPORT_HEADER,
    )?;
    for rep in &reports {
        r.row(report_row(rep));
    }
    Ok(Outcome { rendered: r, status: verdict_status(&reports.iter().collect::<Vec<_>>()) })
}

#[derive(Serialize)]
struct SweepPoint {
    value: f64,
    slack: Option<f64>,
    verdict: Option<Verdict>,
    reports: Vec<InequalityReport>,
}

pub struct SweepArgs<'a> {
    pub param: &'a str,
    pub values: &'a str,
    pub metric: Option<&'a str>,
    pub series_out: Option<&'a Path>,
}

pub fn sweep(c: &Common, s: &SweepArgs) -> Result<Outcome> {
    let l = c.load()?;
    let values = schema::parse_values(s.values)?;
    let metric = s.metric.unwrap_or(if l.file.halfspace.is_some() { "halfspace" } else { "lt_main" });
    let mut points = Vec::with_capacity(values.len());
    for &v in &values {
        let mut raw = l.raw.clone();
        schema::set_numeric(&mut raw, s.param, v)?;
        let file = schema::from_table(raw).with_context(|| format!("{} = {v}", s.param))?;
        let reports = if let Some(case) = &file.halfspace {
            let rep = verify_lifted_bound(&halfspace_case(case, c, &file)?)?;
            vec![rep.intermediate, rep.doubled]
        } else {
            evaluate(&file, c)?.2
        };
        let hit = reports.iter().find(|r| r.name.to_string().starts_with(metric));
        points.push(SweepPoint { value: v, slack: hit.map(|r| r.slack), verdict: hit.map(|r| r.verdict), reports });
    }
    if points.iter().all(|p| p.slack.is_none()) {
        bail!("no report named `{metric}` at any sweep value");
    }
    let series = match s.series_out {
        Some(p) => p.to_path_buf(),
        None => {
            let input = c.input.as_ref().expect("input was loaded");
            input.with_extension("sweep.csv")
        }
    };
    let mut w = csv::Writer::from_path(&series).with_context(|| format!("writing {}", series.display()))?;
    w.write_record([s.param, "slack"])?;
    for p in &points {
        if let Some(slack) = p.slack {
            w.write_record([num(p.value), num(slack)])?;
        }
    }
    w.flush()?;
    let body = json!({ "parameter": s.param, "metric": metric, "series_file": series, "points": points });
    let mut r = Rendered::new("sweep", &body, &[s.param, "slack", "verdict"])?;
    for p in &points {
        r.row(vec![
            num(p.value),
            p.slack.map_or("-".into(), num),
            p.verdict.map_or("missing".into(), |v| v.to_string()),
        ]);
    }
    let all: Vec<&InequalityReport> = points.iter().flat_map(|p| &p.reports).collect();
    Ok(Outcome { rendered: r, status: verdict_status(&all) })
}

fn grid_choice(c: &Common, file: &ProblemFile, prob: &Problem, default_h: f64) -> Result<(f64, f64)> {
    let h = c.grid_h.or(file.oracle.h).unwrap_or(default_h);
    let length = match c.grid_l.or(file.oracle.length) {
        Some(len) => round_length(h, len),
        None => default_truncation(prob, h)?,
    };
    Ok((h, length))
}

pub fn darboux(c: &Common) -> Result<Outcome> {
    let l = c.load()?;
    let tol = c.tolerances(&l.file)?;
    let prob = l.file.half_line(&tol)?;
    let spec = find_spectrum(&prob, &l.file.search_options(&tol))?;
    if spec.is_empty() {
        return Err(halfline::Error::Hypothesis("the operator has no negative eigenvalue to remove".into()).into());
    }
    let res = transform_problem(&prob, &spec)?;
    let (h, length) = grid_choice(c, &l.file, &prob, 0.01)?;
    let floor = 1e-3;
    let iso = verify_isospectrality(&res, &prob, &spec, h, length, floor)?;
    let tele = telescoped_rhs_check(&res, &prob)?;
    let iso_tol = discretization_tolerance(&prob, h);
    let iso_ok = iso.counts_match && iso.max_abs_mismatch <= iso_tol;
    let body = json!({
        "lambda1": res.lambda1,
        "kappa1": res.kappa1,
        "residual_max": res.residual_max,
        "decaying_dim": res.decaying_dim,
        "warnings": res.warnings,
        "isospectrality": iso,
        "isospectrality_tolerance": iso_tol,
        "telescope": tele,
    });
    let mut r = Rendered::new("darboux", &body, &["k", "expected", "transformed", "abs_diff"])?;
    for (k, e) in iso.expected.iter().enumerate() {
        let t = iso.transformed.get(k).copied();
        r.row(vec![
            (k + 1).to_string(),
            num(*e),
            t.map_or("-".into(), num),
            t.map_or("-".into(), |t| num((t - e).abs())),
        ]);
    }
    let status = if iso_ok && tele.passed { Status::Ok } else { Status::Violation };
    Ok(Outcome { rendered: r, status })
}

pub fn graph(c: &Common) -> Result<Outcome> {
    let l = c.load()?;
    let g = l.file.graph.as_ref().ok_or_else(|| anyhow!("`graph` needs a [graph] block"))?;
    let tol = c.tolerances(&l.file)?;
    let star = l.file.star_graph(g)?;
    let res = graph_spectrum(&star, &l.file.search_options(&tol))?;
    let mut r = Rendered::new("graph", &res, &["k", "lambda", "multiplicity"])?;
    spectrum_rows(&mut r, &res.spectrum);
    Ok(Outcome { rendered: r, status: Status::Ok })
}

fn halfspace_case(case: &HalfspaceCase, c: &Common, file: &ProblemFile) -> Result<HalfspaceCase> {
    let mut case = case.clone();
    case.tolerances = c.tolerances(file)?;
    if let Some(&g) = c.gammas.first() {
        case.gamma = g;
    }
    if let Some(h) = c.grid_h {
        case.grid.h = h;
    }
    if let Some(len) = c.grid_l {
        case.grid.l1 = len;
        case.grid.l2 = len;
    }
    Ok(case)
}

fn halfspace_rows(r: &mut Rendered, rep: &HalfspaceReport) {
    for ir in [&rep.intermediate, &rep.doubled] {
        let mut row = vec![num(rep.grid.h)];
        row.extend(report_row(ir));
        r.row(row);
    }
}

pub fn halfspace(c: &Common, two_resolutions: bool) -> Result<Outcome> {
    let l = c.load()?;
    let case = l.file.halfspace.as_ref().ok_or_else(|| anyhow!("`halfspace` needs a [halfspace] block"))?;
    let case = halfspace_case(case, c, &l.file)?;
    let mut header = vec!["h"];
    header.extend(REPORT_HEADER);
    let (reports, consistent) = if two_resolutions {
        let (a, b, same) = verify_two_resolutions(&case)?;
        (vec![a, b], Some(same))
    } else {
        (vec![verify_lifted_bound(&case)?], None)
    };
    let body = json!({ "reports": reports, "consistent_slack_sign": consistent });
    let mut r = Rendered::new("halfspace", &body, &header)?;
    for rep in &reports {
        halfspace_rows(&mut r, rep);
    }
    let verdicts: Vec<&InequalityReport> = reports.iter().flat_map(|x| [&x.intermediate, &x.doubled]).collect();
    let mut status = verdict_status(&verdicts);
    if consistent == Some(false) || reports.iter().any(|x| !x.doubled_dominates) {
        status = status.max(Status::Violation);
    }
    Ok(Outcome { rendered: r, status })
}

pub fn oracle_compare(c: &Common, floor: f64) -> Result<Outcome> {
    let (file, prob, spec) = match (&c.input, c.seed) {
        (Some(_), _) => {
            let l = c.load()?;
            let tol = c.tolerances(&l.file)?;
            let prob = l.file.half_line(&tol)?;
            let spec = find_spectrum(&prob, &l.file.search_options(&tol))?;
            (l.file, prob, spec)
        }
        (None, Some(seed)) => {
            let e = corpus::corpus(seed, 1).pop().expect("one entry");
            (ProblemFile::from_problem(&e.problem), e.problem, e.spectrum)
        }
        (None, None) => bail!("oracle-compare needs --input <FILE> or --seed <N>"),
    };
    let (h, length) = grid_choice(c, &file, &prob, 0.005)?;
    let oracle = oracle_spectrum(&prob, h, length)?;
    let a = spec.flattened();
    let b: Vec<f64> = oracle.flattened().into_iter().filter(|&x| x > floor).collect();
    let tol = discretization_tolerance(&prob, h);
    let mut worst: f64 = 0.0;
    let mut r = Rendered::new("oracle-compare", &json!(null), &["k", "shooting", "oracle", "abs_diff", "flag"])?;
    for k in 0..a.len().max(b.len()) {
        let (x, y) = (a.get(k).copied(), b.get(k).copied());
        let (diff, flag) = match (x, y) {
            (Some(x), Some(y)) => {
                let d = (x - y).abs();
                worst = worst.max(d);
                (num(d), if d > tol { "MISMATCH" } else { "ok" })
            }
            _ => ("-".into(), "UNMATCHED"),
        };
        r.row(vec![(k + 1).to_string(), x.map_or("-".into(), num), y.map_or("-".into(), num), diff, flag.into()]);
    }
    let passed = a.len() == b.len() && worst <= tol;
    r.json = json!({
        "problem": file,
        "h": h,
        "L": length,
        "floor": floor,
        "tolerance": tol,
        "shooting": a,
        "oracle": b,
        "max_abs_mismatch": worst,
        "passed": passed,
    });
    Ok(Outcome { rendered: r, status: if passed { Status::Ok } else { Status::Violation } })
}

pub fn constants_audit() -> Result<Outcome> {
    let checks = audit()?;
    let mut r = Rendered::new("constants-audit", &checks, &["identity", "lhs", "rhs", "rel_error", "passed"])?;
    for ch in &checks {
        r.row(vec![ch.name.clone(), num(ch.lhs), num(ch.rhs), format!("{:.3e}", ch.rel_error), ch.passed.to_string()]);
    }
    let status = if checks.iter().all(|c| c.passed) { Status::Ok } else { Status::Violation };
    Ok(Outcome { rendered: r, status })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_overrides() {
        let t = apply_overrides(Tolerances::default(), &[("verdict_rel".into(), 1e-3), ("scan_points".into(), 50.0)])
            .unwrap();
        assert_eq!(t.verdict_rel, 1e-3);
        assert_eq!(t.scan_points, 50);
        let err = apply_overrides(Tolerances::default(), &[("nope".into(), 1.0)]).unwrap_err().to_string();
        assert!(err.contains("--tol-nope"));
        assert!(apply_overrides(Tolerances::default(), &[("scan_points".into(), 2.5)]).is_err());
    }

    #[test]
    fn hypothesis_errors_map_to_two() {
        let e: anyhow::Error = halfline::Error::Hypothesis("x".into()).into();
        assert_eq!(error_code(&e), 2);
        assert_eq!(error_code(&anyhow!("parse")), 1);
    }
}
