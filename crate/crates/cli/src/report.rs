//! JSON analysis report.

use std::collections::BTreeMap;

use serde::Serialize;

use collsym::noether::NoetherSymmetry;
use collsym::poly::Poly;
use collsym::symmetry::{PointSymmetry, TimeFunction};
use collsym::verifier::ResidualReport;

use crate::spec::ProblemSpec;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub tool: ToolInfo,
    /// Excluded from determinism comparisons.
    pub generated_at: String,
    pub seed: u64,
    pub spec: ProblemSpec,
    pub system: SystemInfo,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lie: Option<LieSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noether: Option<NoetherSection>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub invariants: Vec<InvariantCheck>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub solver: Vec<SolverCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reparam: Option<ReparamSection>,
    pub errors: Vec<String>,
    pub pass: bool,
}

impl AnalysisReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Every check verdict in document order.
    pub fn verdicts(&self) -> Vec<(String, Status)> {
        let mut out = vec![];
        if let Some(l) = &self.lie {
            out.extend(l.symmetries.iter().map(|s| (format!("lie {}", s.label), s.verification.status)));
        }
        if let Some(n) = &self.noether {
            for s in &n.symmetries {
                out.push((format!("noether {} symmetry", s.symmetry.label), s.symmetry.verification.status));
                out.push((format!("noether {} condition", s.symmetry.label), s.condition.status));
                out.extend(s.drift.iter().enumerate().map(|(k, d)| (format!("noether {} drift {k}", s.symmetry.label), d.status)));
            }
        }
        out.extend(self.invariants.iter().map(|c| (format!("invariant {} eps {} ic {}", c.label, c.eps, c.initial_condition), c.check.status)));
        out.extend(self.solver.iter().map(|c| (format!("solver ic {}", c.initial_condition), c.check.status)));
        if let Some(r) = &self.reparam {
            out.push(("reparam round trip".into(), r.round_trip.status));
            out.extend(r.twin.iter().enumerate().map(|(k, c)| (format!("reparam twin {k}"), c.status)));
        }
        out
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl Default for ToolInfo {
    fn default() -> Self {
        ToolInfo { name: "collsym".into(), version: env!("CARGO_PKG_VERSION").into() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SystemInfo {
    pub dimension: usize,
    pub metric: String,
    pub potential: String,
    pub profile: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// The check could not run, e.g. a flow left the domain.
    Skipped,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<ResidualReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    pub fn from_report(r: ResidualReport) -> Self {
        Check { status: if r.pass { Status::Pass } else { Status::Fail }, residual: Some(r), note: None }
    }

    pub fn failed(note: impl Into<String>) -> Self {
        Check { status: Status::Fail, residual: None, note: Some(note.into()) }
    }

    pub fn skipped(note: impl Into<String>) -> Self {
        Check { status: Status::Skipped, residual: None, note: Some(note.into()) }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LieSection {
    pub count: usize,
    pub rank: Option<usize>,
    pub symmetries: Vec<SymmetryEntry>,
    pub diagnostics: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct NoetherSection {
    pub count: usize,
    pub symmetries: Vec<NoetherEntry>,
    pub diagnostics: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct NoetherEntry {
    pub symmetry: SymmetryEntry,
    pub gauge: String,
    pub gauge_terms: Vec<TermRecord>,
    pub first_integral: String,
    pub condition: Check,
    pub drift: Vec<Check>,
}

/// One term τ(t)·p(x) of ξ or τ(t)·Qⁱ(x) of η.
#[derive(Clone, Debug, Serialize)]
pub struct TermRecord {
    pub time: FunctionRecord,
    pub space: Vec<Vec<(f64, Vec<u32>)>>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionRecord {
    Polynomial { coefficients: Vec<f64>, text: String },
    OmegaIntegral { scale: f64, text: String },
    /// Component of a linear flow solved numerically from t0.
    Numeric { component: usize, t0: f64, initial: Vec<f64>, text: String },
}

impl From<&TimeFunction> for FunctionRecord {
    fn from(f: &TimeFunction) -> Self {
        let text = f.describe();
        match f {
            TimeFunction::Polynomial(c) => FunctionRecord::Polynomial { coefficients: c.clone(), text },
            TimeFunction::OmegaIntegral { scale, .. } => FunctionRecord::OmegaIntegral { scale: *scale, text },
            TimeFunction::Flow { flow, z0, component } => {
                FunctionRecord::Numeric { component: *component, t0: flow.t0(), initial: z0.iter().copied().collect(), text }
            }
        }
    }
}

fn terms(p: &Poly<f64>) -> Vec<(f64, Vec<u32>)> {
    p.terms().map(|(e, c)| (*c, e.clone())).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct SymmetryEntry {
    pub label: String,
    pub case: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    pub generator: String,
    pub closed_form: bool,
    pub xi: Vec<TermRecord>,
    pub eta: Vec<TermRecord>,
    pub constants: BTreeMap<String, f64>,
    pub functions: BTreeMap<String, FunctionRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub invariant: Option<String>,
    pub verification: Check,
}

impl SymmetryEntry {
    pub fn new(sym: &PointSymmetry, verification: Check) -> Self {
        let g = &sym.generator;
        SymmetryEntry {
            label: sym.label(),
            case: sym.case.to_string(),
            source: sym.source.clone(),
            generator: sym.describe(),
            closed_form: g.is_closed_form(),
            xi: g.xi.iter().map(|(f, p)| TermRecord { time: f.into(), space: vec![terms(p)] }).collect(),
            eta: g.eta.iter().map(|(f, q)| TermRecord { time: f.into(), space: q.iter().map(terms).collect() }).collect(),
            constants: sym.constants.clone(),
            functions: sym.functions.iter().map(|(k, f)| (k.clone(), f.into())).collect(),
            invariant: sym.invariant.map(|i| i.describe()),
            verification,
        }
    }
}

pub fn gauge_terms(sym: &NoetherSymmetry) -> Vec<TermRecord> {
    sym.gauge.iter().map(|(f, p)| TermRecord { time: f.into(), space: vec![terms(p)] }).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct InvariantCheck {
    pub label: String,
    pub invariant: String,
    pub eps: f64,
    pub initial_condition: usize,
    pub check: Check,
    /// Largest relative change of the invariant along the group orbit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub invariant_change: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolverCheck {
    pub initial_condition: usize,
    pub t_span: (f64, f64),
    pub steps: usize,
    pub check: Check,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReparamSection {
    pub direction: String,
    pub input: String,
    pub paired: String,
    pub t_range: (f64, f64),
    pub s_range: (f64, f64),
    pub closed_form: bool,
    pub round_trip: Check,
    pub twin: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<String>,
}
