//! classify → verify orchestration.

use std::time::SystemTime;

use collsym::engine::{ClassifyOptions, TimeWindow};
use collsym::fields::OmegaProfile;
use collsym::geometry::MetricSpace;
use collsym::lie::classify_lie;
use collsym::noether::{classify_noether, noether_integral};
use collsym::reparam::{self, damped_to_timedep, map_trajectory, timedep_to_damped, DampingProfile, Direction, Path, TimeMap};
use collsym::symmetry::PointSymmetry;
use collsym::verifier::{
    self, check_determining_eqs, check_integral_drift, check_noether_condition, independence_rank, push_solution, refinement_gap, ResidualReport,
    SampleSpec, System, Trajectory,
};

use crate::report::*;
use crate::spec::{InitialCondition, Problem, Profile};

const DRIFT_SAMPLES: usize = 400;
const PUSH_SAMPLES: usize = 60;
const TABLE_ROWS: usize = 201;
const TWIN_SAMPLES: usize = 200;
const ROUND_TRIP_TOL: f64 = 1e-8;

/// Command-line overrides of spec fields.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub lie: bool,
    pub noether: bool,
}

impl Overrides {
    pub fn apply(&self, problem: &mut Problem) {
        if let Some(s) = self.seed {
            problem.seed = s;
            problem.spec.seed = Some(s);
        }
        if let Some(t) = self.tol {
            problem.spec.verification.tolerance = t;
        }
        if self.lie || self.noether {
            problem.spec.analysis.lie = self.lie;
            problem.spec.analysis.noether = self.noether;
        }
    }
}

fn timestamp() -> String {
    humantime::format_rfc3339_seconds(SystemTime::now()).to_string()
}

fn default_conditions(n: usize) -> Vec<InitialCondition> {
    if n == 1 {
        return vec![InitialCondition { x: vec![1.0], v: vec![0.5] }];
    }
    let mut a = InitialCondition { x: vec![0.0; n], v: vec![0.0; n] };
    a.x[0] = 1.0;
    a.x[1] = 0.2;
    a.v[0] = 0.1;
    a.v[1] = 1.0;
    let mut b = InitialCondition { x: vec![0.0; n], v: vec![0.0; n] };
    b.x[0] = -0.8;
    b.x[n - 1] += 0.9;
    b.v[1] = -0.7;
    b.v[n - 1] += 0.4;
    vec![a, b]
}

fn conditions(problem: &Problem) -> Vec<InitialCondition> {
    let ics = &problem.spec.verification.initial_conditions;
    if ics.is_empty() {
        default_conditions(problem.space.dim())
    } else {
        ics.clone()
    }
}

fn describe_space(space: &MetricSpace<f64>) -> String {
    if space.is_euclidean() {
        format!("E^{}", space.dim())
    } else {
        format!("user metric, n = {}, {} collineations", space.dim(), space.catalog().len())
    }
}

fn check_of(r: collsym::error::Result<ResidualReport>) -> Check {
    match r {
        Ok(r) => Check::from_report(r),
        Err(e) => Check::failed(e.to_string()),
    }
}

struct Context<'a> {
    problem: &'a Problem,
    system: System,
    samples: SampleSpec,
    trajectories: Vec<Option<Trajectory>>,
}

/// Runs the requested analyses and verifies every emitted item.
pub fn run_analyze(problem: &Problem) -> AnalysisReport {
    let spec = &problem.spec;
    let mut report = AnalysisReport {
        schema_version: SCHEMA_VERSION,
        tool: ToolInfo::default(),
        generated_at: timestamp(),
        seed: problem.seed,
        spec: spec.clone(),
        system: SystemInfo {
            dimension: problem.space.dim(),
            metric: describe_space(&problem.space),
            potential: problem.potential.name(),
            profile: match &problem.profile {
                Profile::Omega(w) => format!("omega = {}", w.name()),
                Profile::Damping { phi, interval } => format!("damping phi = {} on [{}, {}]", phi.name(), interval.0, interval.1),
            },
        },
        lie: None,
        noether: None,
        invariants: vec![],
        solver: vec![],
        reparam: None,
        errors: vec![],
        pass: true,
    };
    if let Profile::Omega(omega) = &problem.profile {
        if spec.analysis.lie || spec.analysis.noether {
            analyze_omega(problem, omega, &mut report);
        }
    }
    if spec.analysis.reparam {
        match reparam_section(problem) {
            Ok((section, _)) => report.reparam = Some(section),
            Err(e) => report.errors.push(format!("reparam: {e}")),
        }
    }
    report.pass = report.errors.is_empty() && report.verdicts().iter().all(|(_, s)| *s != Status::Fail);
    report
}

fn analyze_omega(problem: &Problem, omega: &OmegaProfile<f64>, report: &mut AnalysisReport) {
    let spec = &problem.spec;
    let v = &spec.verification;
    let opts = ClassifyOptions { seed: problem.seed, ..ClassifyOptions::default() };
    let window = match TimeWindow::new(omega, &opts) {
        Ok(w) => w,
        Err(e) => {
            report.errors.push(e.to_string());
            return;
        }
    };
    let system = System::new(problem.space.clone(), problem.potential.clone(), omega.clone());
    let samples = SampleSpec { count: v.samples, seed: problem.seed, t_range: window.sample_range(), ..SampleSpec::default() };
    let span = v.t_span.map_or((window.lo.max(1.0), window.hi.min(10.0)), |[a, b]| (a, b));
    let mut ctx = Context { problem, system, samples, trajectories: vec![] };
    if v.enabled {
        for (k, ic) in conditions(problem).iter().enumerate() {
            let traj = verifier::integrate(&ctx.system, &ic.x, &ic.v, span, v.solver_tol);
            let check = match &traj {
                Ok(t) => {
                    let gap = refinement_gap(&ctx.system, &ic.x, &ic.v, span, v.solver_tol);
                    let steps = t.steps();
                    let check = check_of(gap.map(|g| ResidualReport::from_values("refinement", &[g], 10.0 * v.solver_tol, problem.seed)));
                    SolverCheck { initial_condition: k, t_span: span, steps, check }
                }
                Err(e) => SolverCheck { initial_condition: k, t_span: span, steps: 0, check: Check::skipped(e.to_string()) },
            };
            report.solver.push(check);
            ctx.trajectories.push(traj.ok());
        }
    }
    let catalog = problem.space.catalog();
    if spec.analysis.lie {
        match classify_lie(&problem.space, &problem.potential, omega, &catalog, &opts) {
            Ok(c) => {
                let symmetries: Vec<SymmetryEntry> = c.symmetries.iter().map(|s| SymmetryEntry::new(s, ctx.verify_generator(s))).collect();
                let gens: Vec<_> = c.symmetries.iter().map(|s| &s.generator).collect();
                let rank = if gens.is_empty() { Some(0) } else { independence_rank(&gens, problem.seed).ok() };
                for s in &c.symmetries {
                    ctx.push_checks(s, report);
                }
                report.lie = Some(LieSection { count: symmetries.len(), rank, symmetries, diagnostics: c.diagnostics });
            }
            Err(e) => report.errors.push(format!("lie: {e}")),
        }
    }
    if spec.analysis.noether {
        match classify_noether(&problem.space, &problem.potential, omega, &catalog, &opts) {
            Ok(c) => {
                let entries = c
                    .symmetries
                    .iter()
                    .map(|s| {
                        let integral = noether_integral(s, &problem.space, &problem.potential, omega);
                        let (condition, drift) = if v.enabled {
                            let cond = check_of(check_noether_condition(s, &ctx.system, &ctx.samples));
                            let drift = ctx
                                .trajectories
                                .iter()
                                .map(|t| match t {
                                    Some(t) => check_of(check_integral_drift(&integral, t, DRIFT_SAMPLES, v.drift_tolerance)),
                                    None => Check::skipped("no trajectory"),
                                })
                                .collect();
                            (cond, drift)
                        } else {
                            (Check::skipped("verification disabled"), vec![])
                        };
                        NoetherEntry {
                            symmetry: SymmetryEntry::new(&s.symmetry, ctx.verify_generator(&s.symmetry)),
                            gauge: s.describe_gauge(),
                            gauge_terms: gauge_terms(s),
                            first_integral: integral.describe(),
                            condition,
                            drift,
                        }
                    })
                    .collect::<Vec<_>>();
                report.noether = Some(NoetherSection { count: entries.len(), symmetries: entries, diagnostics: c.diagnostics });
            }
            Err(e) => report.errors.push(format!("noether: {e}")),
        }
    }
}

impl Context<'_> {
    fn verify_generator(&self, s: &PointSymmetry) -> Check {
        let v = &self.problem.spec.verification;
        if !v.enabled {
            return Check::skipped("verification disabled");
        }
        match check_determining_eqs(&s.generator, &self.system, &self.samples) {
            Ok(mut r) => {
                r.tolerance = v.tolerance;
                r.pass = r.max < v.tolerance && r.max.is_finite();
                Check::from_report(r)
            }
            Err(e) => Check::failed(e.to_string()),
        }
    }

    fn push_checks(&self, s: &PointSymmetry, report: &mut AnalysisReport) {
        let v = &self.problem.spec.verification;
        let Some(inv) = s.invariant else { return };
        if !v.enabled {
            return;
        }
        for (k, traj) in self.trajectories.iter().enumerate() {
            let Some(traj) = traj else { continue };
            for &eps in &v.push_eps {
                let (check, change) = match push_solution(s, traj, eps, PUSH_SAMPLES) {
                    Ok(p) => {
                        let change = p.report.parts.get("invariant_change").copied();
                        let mut r = p.report;
                        r.tolerance = v.tolerance;
                        r.pass = r.max < v.tolerance && r.max.is_finite();
                        (Check::from_report(r), change)
                    }
                    Err(e) => (Check::skipped(e.to_string()), None),
                };
                report.invariants.push(InvariantCheck { label: s.label(), invariant: inv.describe(), eps, initial_condition: k, check, invariant_change: change });
            }
        }
    }
}

/// Paired profile and time map for the problem's ω or φ, with the
/// (t, S(t), ω) table as CSV text.
pub fn reparam_section(problem: &Problem) -> collsym::error::Result<(ReparamSection, String)> {
    let v = &problem.spec.verification;
    let seed = problem.seed;
    let (direction, input, map, omega, phi) = match &problem.profile {
        Profile::Omega(w) => {
            let (lo, hi) = w.interval();
            let (map, phi) = timedep_to_damped(w, (lo, hi))?;
            ("timedep_to_damped", format!("omega = {}", w.name()), map, w.clone(), phi)
        }
        Profile::Damping { phi, interval } => {
            let (map, w) = damped_to_timedep(phi, *interval)?;
            ("damped_to_timedep", format!("phi = {}", phi.name()), map, w, phi.clone())
        }
    };
    let round_trip = round_trip(&problem.profile, &map, &omega, &phi, seed);
    let system = System::new(problem.space.clone(), problem.potential.clone(), omega.clone());
    let twin = if v.enabled {
        conditions(problem).iter().map(|ic| twin_check(&problem.profile, &system, &map, &phi, ic, v.solver_tol, v.tolerance, seed)).collect()
    } else {
        vec![]
    };
    let table = time_table(&map, &omega)?;
    let paired = match &problem.profile {
        Profile::Omega(_) => format!("phi = {}", describe_damping(&phi, &map)),
        Profile::Damping { .. } => format!("omega = {}", omega.name()),
    };
    let section = ReparamSection {
        direction: direction.into(),
        input,
        paired,
        t_range: map.t_range(),
        s_range: map.s_range(),
        closed_form: map.is_closed_form(),
        round_trip,
        twin,
        table: None,
    };
    Ok((section, table))
}

fn describe_damping(phi: &DampingProfile, map: &TimeMap) -> String {
    let (a, b) = map.t_range();
    let grid: Vec<f64> = (0..=20).map(|k| a + (b - a) * k as f64 / 20.0).collect();
    let vals: Vec<f64> = grid.iter().filter_map(|&t| phi.eval(t).ok()).collect();
    match vals.iter().copied().reduce(|x, y| if (x - y).abs() < 1e-9 * (1.0 + x.abs()) { x } else { f64::NAN }) {
        Some(c) if c.is_finite() => format!("{} (constant)", (c * 1e9).round() / 1e9),
        _ => phi.name(),
    }
}

fn grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..=n).map(move |k| lo + (hi - lo) * k as f64 / n as f64)
}

fn round_trip(profile: &Profile, map: &TimeMap, omega: &OmegaProfile<f64>, phi: &DampingProfile, seed: u64) -> Check {
    let result = (|| -> collsym::error::Result<Vec<f64>> {
        match profile {
            Profile::Omega(w) => {
                let (back_map, back) = damped_to_timedep(phi, map.t_range())?;
                let target = reparam::normalized_omega(w, map.s_range())?;
                let (lo, hi) = back_map.s_range();
                let (lo, hi) = (lo.max(target.interval().0), hi.min(target.interval().1));
                grid(lo, hi, TABLE_ROWS - 1).map(|s| Ok((back.eval(s)? - target.eval(s)?).abs() / target.eval(s)?.abs())).collect()
            }
            Profile::Damping { phi: input, interval } => {
                let (back_map, back) = timedep_to_damped(omega, map.s_range())?;
                let (lo, hi) = back_map.t_range();
                let (lo, hi) = (lo.max(interval.0), hi.min(interval.1));
                grid(lo, hi, TABLE_ROWS - 1).map(|t| Ok((back.eval(t)? - input.eval(t)?).abs() / (1.0 + input.eval(t)?.abs()))).collect()
            }
        }
    })();
    check_of(result.map(|vals| ResidualReport::from_values("round trip", &vals, ROUND_TRIP_TOL, seed)))
}

#[allow(clippy::too_many_arguments)]
fn twin_check(profile: &Profile, system: &System, map: &TimeMap, phi: &DampingProfile, ic: &InitialCondition, solver_tol: f64, tol: f64, seed: u64) -> Check {
    let result = (|| -> collsym::error::Result<f64> {
        match profile {
            Profile::Omega(_) => {
                let traj = verifier::integrate(system, &ic.x, &ic.v, map.s_range(), solver_tol)?;
                let damped = map_trajectory(&Path::from_trajectory(&traj, TWIN_SAMPLES), map, Direction::TimeDepToDamped)?;
                reparam::damped_residual(&damped, system, phi, solver_tol)
            }
            Profile::Damping { interval, .. } => {
                let traj = reparam::integrate_damped(system, phi, &ic.x, &ic.v, *interval, solver_tol)?;
                let mapped = map_trajectory(&traj.to_path(TWIN_SAMPLES), map, Direction::DampedToTimeDep)?;
                reparam::timedep_residual(&mapped, system, solver_tol)
            }
        }
    })();
    match result {
        Ok(r) => Check::from_report(ResidualReport::from_values("twin integration", &[r], tol, seed)),
        Err(e) => Check::skipped(e.to_string()),
    }
}

fn time_table(map: &TimeMap, omega: &OmegaProfile<f64>) -> collsym::error::Result<String> {
    let mut w = csv::Writer::from_writer(vec![]);
    let io = |e: csv::Error| collsym::error::Error::InvalidProfile(format!("csv: {e}"));
    w.write_record(["t", "S", "omega"]).map_err(io)?;
    let (a, b) = map.t_range();
    for t in grid(a, b, TABLE_ROWS - 1) {
        let s = map.s(t)?.clamp(map.s_range().0, map.s_range().1);
        w.write_record([format!("{t:.12e}"), format!("{s:.12e}"), format!("{:.12e}", omega.eval(s)?)]).map_err(io)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| io(e.into_error().into()))?).expect("ascii"))
}

/// Re-runs the analysis recorded in a report and compares verdicts.
pub fn reverify(report_json: &str, overrides: &Overrides) -> Result<(AnalysisReport, Vec<String>), String> {
    let value: serde_json::Value = serde_json::from_str(report_json).map_err(|e| format!("report is not valid JSON: {e}"))?;
    let spec: crate::spec::ProblemSpec =
        serde_json::from_value(value.get("spec").cloned().ok_or("report has no spec section")?).map_err(|e| format!("report spec: {e}"))?;
    let mut problem = spec.validate().map_err(|e| e.to_string())?;
    if let Some(seed) = value.get("seed").and_then(|s| s.as_u64()) {
        problem.seed = seed;
    }
    overrides.apply(&mut problem);
    let fresh = run_analyze(&problem);
    let mut mismatches: Vec<String> =
        fresh.verdicts().into_iter().filter(|(_, s)| *s == Status::Fail).map(|(name, _)| format!("{name}: fails on re-run")).collect();
    let now: serde_json::Value = serde_json::from_str(&fresh.to_json()).expect("own output parses");
    for key in ["lie", "noether"] {
        let labels = |v: &serde_json::Value| -> Vec<String> {
            let syms = v.get(key).and_then(|s| s.get("symmetries")).and_then(|s| s.as_array()).cloned().unwrap_or_default();
            syms.iter()
                .filter_map(|e| e.get("label").or_else(|| e.get("symmetry").and_then(|s| s.get("label"))).and_then(|l| l.as_str()).map(String::from))
                .collect()
        };
        let (before, after) = (labels(&value), labels(&now));
        if before != after {
            mismatches.push(format!("{key}: recorded symmetries {before:?}, re-run found {after:?}"));
        }
    }
    Ok((fresh, mismatches))
}
