//! Problem specification files (TOML) and their validation.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use collsym::fields::{OmegaProfile, ScalarField};
use collsym::geometry::{Collineation, CollineationClass, MetricSpace, Role};
use collsym::poly::Poly;
use collsym::reparam::DampingProfile;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid specification:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),
}

/// A polynomial term: coefficient and exponent vector.
pub type Term = (f64, Vec<u32>);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub space: SpaceSpec,
    pub potential: PotentialSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<OmegaSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping: Option<DampingSpec>,
    #[serde(default)]
    pub analysis: AnalysisSpec,
    #[serde(default)]
    pub verification: VerificationSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub dimension: usize,
    #[serde(default = "euclidean")]
    pub family: String,
    /// Row-major g_ij as term lists, for `family = "user"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Vec<Vec<Vec<Term>>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub collineations: Vec<CollineationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_box: Option<[f64; 2]>,
}

fn euclidean() -> String {
    "euclidean".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollineationSpec {
    pub name: String,
    /// gradient_kv, nongradient_kv, gradient_hv, affine or special_pc
    pub class: String,
    pub components: Vec<Vec<Term>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<Vec<Term>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    /// kepler, exceptional, quadratic, central_power or polynomial
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<Vec<Term>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_min: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OmegaSpec {
    /// power_law, inverse_square_affine, inverse_square_scaled, tabulated or constant
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DampingSpec {
    /// constant, power_law or tabulated
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    #[serde(default)]
    pub lie: bool,
    #[serde(default)]
    pub noether: bool,
    #[serde(default)]
    pub reparam: bool,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        AnalysisSpec { lie: true, noether: false, reparam: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialCondition {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationSpec {
    #[serde(default = "yes")]
    pub enabled: bool,
    /// Residual ceiling for symmetry conditions and trajectory comparisons.
    #[serde(default = "default_tol")]
    pub tolerance: f64,
    #[serde(default = "default_drift")]
    pub drift_tolerance: f64,
    #[serde(default = "default_solver_tol")]
    pub solver_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_span: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub initial_conditions: Vec<InitialCondition>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_eps")]
    pub push_eps: Vec<f64>,
}

fn yes() -> bool {
    true
}
fn default_tol() -> f64 {
    1e-6
}
fn default_drift() -> f64 {
    1e-7
}
fn default_solver_tol() -> f64 {
    1e-10
}
fn default_samples() -> usize {
    100
}
fn default_eps() -> Vec<f64> {
    vec![0.1, 0.3]
}

impl Default for VerificationSpec {
    fn default() -> Self {
        VerificationSpec {
            enabled: true,
            tolerance: default_tol(),
            drift_tolerance: default_drift(),
            solver_tol: default_solver_tol(),
            t_span: None,
            initial_conditions: vec![],
            samples: default_samples(),
            push_eps: default_eps(),
        }
    }
}

/// The time dependence of a validated problem.
#[derive(Clone, Debug)]
pub enum Profile {
    Omega(OmegaProfile<f64>),
    Damping { phi: DampingProfile, interval: (f64, f64) },
}

/// A validated problem ready to run.
#[derive(Clone, Debug)]
pub struct Problem {
    pub spec: ProblemSpec,
    pub seed: u64,
    pub space: MetricSpace<f64>,
    pub potential: ScalarField<f64>,
    pub profile: Profile,
}

pub fn parse_spec(path: &Path) -> Result<ProblemSpec, SpecError> {
    let text = std::fs::read_to_string(path).map_err(|e| SpecError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_spec_str(&text)
}

pub fn parse_spec_str(text: &str) -> Result<ProblemSpec, SpecError> {
    toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        SpecError::Parse { line, column, message: e.message().to_string() }
    })
}

// 1-based
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.chars().count(), |p| before[p + 1..].chars().count()) + 1;
    (line, column)
}

fn poly(n: usize, terms: &[Term], what: &str, errs: &mut Vec<String>) -> Option<Poly<f64>> {
    if let Some((_, e)) = terms.iter().find(|(_, e)| e.len() != n) {
        errs.push(format!("{what}: exponent vector {e:?} must have {n} entries"));
        return None;
    }
    Some(Poly::from_terms(n, terms.iter().cloned()))
}

fn need(v: Option<f64>, what: &str, errs: &mut Vec<String>) -> Option<f64> {
    if v.is_none() {
        errs.push(format!("{what} is required"));
    }
    v
}

fn interval(iv: Option<[f64; 2]>, what: &str, errs: &mut Vec<String>) -> Option<(f64, f64)> {
    let [lo, hi] = iv?;
    if !(lo < hi && lo.is_finite() && hi.is_finite()) {
        errs.push(format!("{what} [{lo}, {hi}] must be finite with lo < hi"));
        return None;
    }
    Some((lo, hi))
}

impl ProblemSpec {
    /// Checks every rule and builds the runtime objects; all violations are
    /// reported together.
    pub fn validate(&self) -> Result<Problem, SpecError> {
        let mut errs = vec![];
        let n = self.space.dimension;
        if n == 0 {
            errs.push("space.dimension must be at least 1".into());
        }
        let space = if n == 0 { None } else { self.build_space(&mut errs) };
        let potential = if n == 0 { None } else { self.build_potential(&mut errs) };

        let a = &self.analysis;
        if !(a.lie || a.noether || a.reparam) {
            errs.push("analysis: at least one of lie, noether, reparam must be enabled".into());
        }
        let profile = match (&self.omega, &self.damping) {
            (Some(_), Some(_)) => {
                errs.push("exactly one of [omega] and [damping] may be given, found both".into());
                None
            }
            (None, None) => {
                errs.push("exactly one of [omega] and [damping] must be given, found neither".into());
                None
            }
            (Some(w), None) => self.build_omega(w, &mut errs).map(Profile::Omega),
            (None, Some(d)) => {
                if a.lie || a.noether {
                    errs.push("lie and noether analyses need an [omega] profile; a [damping] spec supports reparam only".into());
                }
                self.build_damping(d, &mut errs)
            }
        };

        let v = &self.verification;
        for (name, val) in [("tolerance", v.tolerance), ("drift_tolerance", v.drift_tolerance), ("solver_tol", v.solver_tol)] {
            if !(val > 0.0 && val.is_finite()) {
                errs.push(format!("verification.{name} must be positive, got {val}"));
            }
        }
        if v.samples == 0 {
            errs.push("verification.samples must be positive".into());
        }
        if let Some(span) = v.t_span {
            interval(Some(span), "verification.t_span", &mut errs);
        }
        for (k, ic) in v.initial_conditions.iter().enumerate() {
            if ic.x.len() != n || ic.v.len() != n {
                errs.push(format!("verification.initial_conditions[{k}] must have x and v of length {n}"));
            }
        }
        if v.push_eps.iter().any(|e| !e.is_finite()) {
            errs.push("verification.push_eps must be finite".into());
        }

        if !errs.is_empty() {
            return Err(SpecError::Validation(errs));
        }
        Ok(Problem {
            spec: self.clone(),
            seed: self.seed.unwrap_or(collsym::verifier::DEFAULT_SEED),
            space: space.expect("validated"),
            potential: potential.expect("validated"),
            profile: profile.expect("validated"),
        })
    }

    fn build_space(&self, errs: &mut Vec<String>) -> Option<MetricSpace<f64>> {
        let s = &self.space;
        let n = s.dimension;
        match s.family.as_str() {
            "euclidean" => {
                if s.metric.is_some() || !s.collineations.is_empty() {
                    errs.push("space: metric and collineations apply to family = \"user\" only".into());
                }
                Some(MetricSpace::euclidean(n))
            }
            "user" => {
                let Some(rows) = &s.metric else {
                    errs.push("space.metric is required for family = \"user\"".into());
                    return None;
                };
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    errs.push(format!("space.metric must be {n}×{n}"));
                    return None;
                }
                let before = errs.len();
                let metric: Vec<Vec<Poly<f64>>> = rows
                    .iter()
                    .enumerate()
                    .map(|(i, r)| {
                        r.iter()
                            .enumerate()
                            .map(|(j, t)| poly(n, t, &format!("space.metric[{i}][{j}]"), errs).unwrap_or_else(|| Poly::zero(n)))
                            .collect()
                    })
                    .collect();
                let catalog: Vec<Collineation<f64>> = s.collineations.iter().filter_map(|c| collineation(n, c, errs)).collect();
                if errs.len() > before {
                    return None;
                }
                let bx = s.sample_box.unwrap_or([-2.0, 2.0]);
                match MetricSpace::user(metric, catalog, (bx[0], bx[1]), self.seed.unwrap_or(collsym::verifier::DEFAULT_SEED)) {
                    Ok(space) => Some(space),
                    Err(e) => {
                        errs.push(format!("space: {e}"));
                        None
                    }
                }
            }
            other => {
                errs.push(format!("space.family must be \"euclidean\" or \"user\", got \"{other}\""));
                None
            }
        }
    }

    fn build_potential(&self, errs: &mut Vec<String>) -> Option<ScalarField<f64>> {
        let p = &self.potential;
        let n = self.space.dimension;
        let field = match p.family.as_str() {
            "kepler" => ScalarField::kepler(),
            "exceptional" => ScalarField::exceptional(),
            "quadratic" => ScalarField::quadratic(),
            "central_power" => match ScalarField::central_power(need(p.n, "potential.n", errs)?) {
                Ok(f) => f,
                Err(e) => {
                    errs.push(format!("potential: {e}"));
                    return None;
                }
            },
            "polynomial" => {
                let Some(t) = &p.terms else {
                    errs.push("potential.terms is required for family = \"polynomial\"".into());
                    return None;
                };
                ScalarField::polynomial(poly(n, t, "potential.terms", errs)?)
            }
            other => {
                errs.push(format!("potential.family \"{other}\" is not one of kepler, exceptional, quadratic, central_power, polynomial"));
                return None;
            }
        };
        match p.r_min {
            Some(r) if !(r > 0.0) => {
                errs.push(format!("potential.r_min must be positive, got {r}"));
                None
            }
            Some(r) => Some(field.with_r_min(r)),
            None => Some(field),
        }
    }

    fn build_omega(&self, w: &OmegaSpec, errs: &mut Vec<String>) -> Option<OmegaProfile<f64>> {
        let classify = self.analysis.lie || self.analysis.noether;
        let built = match w.family.as_str() {
            "power_law" => OmegaProfile::power_law(need(w.a, "omega.a", errs)?),
            "inverse_square_affine" => {
                let (d1, d2) = (need(w.d1, "omega.d1", errs), need(w.d2, "omega.d2", errs));
                OmegaProfile::inverse_square_affine(d1?, d2?)
            }
            "inverse_square_scaled" => OmegaProfile::inverse_square_scaled(need(w.gamma, "omega.gamma", errs)?),
            "tabulated" => match (&w.t, &w.values) {
                (Some(t), Some(v)) => OmegaProfile::tabulated(t.clone(), v.clone()),
                _ => {
                    errs.push("omega.t and omega.values are required for family = \"tabulated\"".into());
                    return None;
                }
            },
            "constant" => {
                let c = need(w.value, "omega.value", errs)?;
                if classify {
                    errs.push("omega: a constant profile violates ω,t ≠ 0, which lie and noether analyses require".into());
                    return None;
                }
                Ok(OmegaProfile::constant(c))
            }
            other => {
                errs.push(format!("omega.family \"{other}\" is not one of power_law, inverse_square_affine, inverse_square_scaled, tabulated, constant"));
                return None;
            }
        };
        let mut profile = match built {
            Ok(p) => p,
            Err(e) => {
                errs.push(format!("omega: {e}"));
                return None;
            }
        };
        if let Some((lo, hi)) = interval(w.interval, "omega.interval", errs) {
            profile = match profile.with_interval(lo, hi) {
                Ok(p) => p,
                Err(e) => {
                    errs.push(format!("omega.interval: {e}"));
                    return None;
                }
            };
        } else if w.interval.is_some() {
            return None;
        }
        if self.analysis.reparam && w.interval.is_none() {
            errs.push("omega.interval is required for reparam".into());
        }
        Some(profile)
    }

    fn build_damping(&self, d: &DampingSpec, errs: &mut Vec<String>) -> Option<Profile> {
        let iv = interval(d.interval, "damping.interval", errs);
        if d.interval.is_none() {
            errs.push("damping.interval is required".into());
        }
        let phi = match d.family.as_str() {
            "constant" => DampingProfile::constant(need(d.c, "damping.c", errs)?),
            "power_law" => DampingProfile::power_law(need(d.b, "damping.b", errs)?),
            "tabulated" => match (&d.t, &d.values) {
                (Some(t), Some(v)) => match DampingProfile::tabulated(t.clone(), v.clone()) {
                    Ok(p) => p,
                    Err(e) => {
                        errs.push(format!("damping: {e}"));
                        return None;
                    }
                },
                _ => {
                    errs.push("damping.t and damping.values are required for family = \"tabulated\"".into());
                    return None;
                }
            },
            other => {
                errs.push(format!("damping.family \"{other}\" is not one of constant, power_law, tabulated"));
                return None;
            }
        };
        let interval = iv?;
        let (lo, hi) = phi.interval();
        if interval.0 < lo || interval.1 > hi || (matches!(d.family.as_str(), "power_law") && interval.0 <= 0.0) {
            errs.push(format!("damping.interval [{}, {}] lies outside the profile's domain", interval.0, interval.1));
            return None;
        }
        Some(Profile::Damping { phi, interval })
    }
}

fn collineation(n: usize, c: &CollineationSpec, errs: &mut Vec<String>) -> Option<Collineation<f64>> {
    let class = match c.class.as_str() {
        "gradient_kv" => CollineationClass::GradientKV,
        "nongradient_kv" => CollineationClass::NongradientKV,
        "gradient_hv" => CollineationClass::GradientHV,
        "affine" => CollineationClass::AffineCollineation,
        "special_pc" => CollineationClass::SpecialPC,
        other => {
            errs.push(format!("collineation {}: unknown class \"{other}\"", c.name));
            return None;
        }
    };
    if c.components.len() != n {
        errs.push(format!("collineation {}: expected {n} components, got {}", c.name, c.components.len()));
        return None;
    }
    let components: Option<Vec<Poly<f64>>> =
        c.components.iter().enumerate().map(|(i, t)| poly(n, t, &format!("collineation {} component {}", c.name, i + 1), errs)).collect();
    let potential = match &c.potential {
        Some(t) => Some(poly(n, t, &format!("collineation {} potential", c.name), errs)?),
        None => None,
    };
    let gradient = matches!(class, CollineationClass::GradientKV | CollineationClass::GradientHV | CollineationClass::SpecialPC);
    if gradient && potential.is_none() {
        errs.push(format!("collineation {}: class {} requires a potential", c.name, c.class));
    }
    let psi = match (class, c.psi) {
        (CollineationClass::GradientHV, None) => {
            errs.push(format!("collineation {}: gradient_hv requires psi", c.name));
            return None;
        }
        (_, p) => p.unwrap_or(0.0),
    };
    Some(Collineation { name: c.name.clone(), class, components: components?, potential, psi, role: Role::User })
}

#[cfg(test)]
mod tests {
    use super::*;

    const KEPLER: &str = r#"
[space]
dimension = 3

[potential]
family = "kepler"

[omega]
family = "power_law"
a = 1.0
"#;

    #[test]
    fn minimal_kepler() {
        let spec = parse_spec_str(KEPLER).unwrap();
        assert!(spec.analysis.lie && !spec.analysis.noether);
        let p = spec.validate().unwrap();
        assert_eq!(p.space.dim(), 3);
        assert!(matches!(p.profile, Profile::Omega(_)));
    }

    #[test]
    fn both_profiles_rejected() {
        let text = format!("{KEPLER}\n[damping]\nfamily = \"constant\"\nc = 0.5\ninterval = [1.0, 2.0]\n");
        let Err(SpecError::Validation(errs)) = parse_spec_str(&text).unwrap().validate() else { panic!() };
        assert!(errs.iter().any(|e| e.contains("exactly one")), "{errs:?}");
    }

    #[test]
    fn constant_omega_rejected() {
        let text = KEPLER.replace("family = \"power_law\"\na = 1.0", "family = \"constant\"\nvalue = 2.0");
        let Err(SpecError::Validation(errs)) = parse_spec_str(&text).unwrap().validate() else { panic!() };
        assert!(errs.iter().any(|e| e.contains("ω,t ≠ 0")), "{errs:?}");
    }

    #[test]
    fn violations_are_aggregated() {
        let text = r#"
[space]
dimension = 2
[potential]
family = "bogus"
[omega]
family = "power_law"
[verification]
tolerance = -1.0
initial_conditions = [{ x = [1.0], v = [0.0, 1.0] }]
"#;
        let Err(SpecError::Validation(errs)) = parse_spec_str(text).unwrap().validate() else { panic!() };
        assert_eq!(errs.len(), 4, "{errs:?}");
    }

    #[test]
    fn parse_error_has_position() {
        let Err(SpecError::Parse { line, column, .. }) = parse_spec_str("[space]\ndimension = 3\nfamily = \n") else { panic!() };
        assert_eq!((line, column), (3, 10));
        let Err(SpecError::Parse { line, .. }) = parse_spec_str("[space]\ndimension = 3\ncolour = 1\n") else { panic!() };
        assert_eq!(line, 3);
    }

    #[test]
    fn user_catalog() {
        let text = r#"
[space]
dimension = 2
family = "user"
metric = [[[[1.0, [0, 0]]], []], [[], [[1.0, [0, 0]]]]]
[[space.collineations]]
name = "rot"
class = "nongradient_kv"
components = [[[1.0, [0, 1]]], [[-1.0, [1, 0]]]]
[potential]
family = "quadratic"
[omega]
family = "power_law"
a = 1.0
"#;
        let p = parse_spec_str(text).unwrap().validate().unwrap();
        assert_eq!(p.space.catalog().len(), 1);
        let bad = text.replace("[-1.0, [1, 0]]", "[1.0, [1, 0]]");
        let Err(SpecError::Validation(errs)) = parse_spec_str(&bad).unwrap().validate() else { panic!() };
        assert!(errs[0].contains("rot"), "{errs:?}");
    }
}
