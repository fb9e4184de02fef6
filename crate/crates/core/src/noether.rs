//! Noether point symmetries of L = ½g_ijẋⁱẋʲ − ω(t)V(x) and their first
//! integrals.
//!
//! A Noether symmetry has ξ = ξ(t) and L_η g = ξ,t g, so η is built from a
//! KV or the HV. Case I keeps the coefficient of Y constant; Case II lets a
//! gradient Y = ∇S carry T(t), with gauge f = T,t S + K(t).

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DVector;

use crate::conditions::{self, ConditionForm};
use crate::engine::{ClassifyOptions, ConstrainedSystem, Deduper, RankProbe, SolutionSpace, TimeWindow};
use crate::error::{Error, Result};
use crate::fields::{OmegaProfile, ScalarField};
use crate::geometry::{Collineation, CollineationClass, MetricSpace};
use crate::poly::Poly;
use crate::symmetry::{CaseTag, FlowMatrix, Generator, PointSymmetry, TimeFunction};

/// Point symmetry plus gauge function f(t, x) = Σ τₐ(t)pₐ(x).
#[derive(Clone, Debug)]
pub struct NoetherSymmetry {
    pub symmetry: PointSymmetry,
    pub gauge: Vec<(TimeFunction, Poly<f64>)>,
}

impl NoetherSymmetry {
    pub fn label(&self) -> String {
        self.symmetry.label()
    }

    pub fn generator(&self) -> &Generator {
        &self.symmetry.generator
    }

    /// f and its partials (f,t, ∇f) at (t, x).
    pub fn gauge_jet(&self, t: f64, x: &[f64]) -> Result<(f64, f64, Vec<f64>)> {
        let (mut f, mut ft) = (0.0, 0.0);
        let mut grad = vec![0.0; x.len()];
        for (tau, p) in &self.gauge {
            let j = tau.jet(t)?;
            let pv = p.eval(x);
            f += j[0] * pv;
            ft += j[1] * pv;
            for (k, g) in grad.iter_mut().enumerate() {
                *g += j[0] * p.partial(k).eval(x);
            }
        }
        Ok((f, ft, grad))
    }

    pub fn describe_gauge(&self) -> String {
        let parts: Vec<String> = self
            .gauge
            .iter()
            .filter(|(tau, p)| !tau.is_zero() && !p.is_zero())
            .map(|(tau, p)| if p.degree() == 0 { format!("({})", tau.describe()) } else { format!("({})·S", tau.describe()) })
            .collect();
        if parts.is_empty() {
            "0".into()
        } else {
            parts.join(" + ")
        }
    }
}

/// Gauge function of a Noether symmetry as a standalone evaluator.
pub fn gauge_function(sym: &NoetherSymmetry) -> impl Fn(f64, &[f64]) -> Result<f64> + '_ {
    move |t, x| Ok(sym.gauge_jet(t, x)?.0)
}

/// I = ξ(½g_ijẋⁱẋʲ + ωV) − g_ij ηⁱẋʲ + f.
#[derive(Clone)]
pub struct FirstIntegral {
    pub source: String,
    symmetry: NoetherSymmetry,
    space: MetricSpace<f64>,
    v: ScalarField<f64>,
    omega: OmegaProfile<f64>,
}

impl fmt::Debug for FirstIntegral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FirstIntegral").field("source", &self.source).finish()
    }
}

impl FirstIntegral {
    pub fn eval(&self, t: f64, x: &[f64], xd: &[f64]) -> Result<f64> {
        let g = self.space.metric(x)?;
        let n = x.len();
        let gen = self.symmetry.generator();
        let xi = gen.xi(t, x)?;
        let eta = gen.eta(t, x)?;
        let (mut kin, mut p_eta) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                kin += 0.5 * g[i][j] * xd[i] * xd[j];
                p_eta += g[i][j] * eta[i] * xd[j];
            }
        }
        let f = self.symmetry.gauge_jet(t, x)?.0;
        Ok(xi * (kin + self.omega.eval(t)? * self.v.eval(x)?) - p_eta + f)
    }

    pub fn symmetry(&self) -> &NoetherSymmetry {
        &self.symmetry
    }

    pub fn describe(&self) -> String {
        format!("ξ(½|ẋ|² + ωV) − η·ẋ + f, X = {}, f = {}", self.symmetry.symmetry.describe(), self.symmetry.describe_gauge())
    }
}

pub fn noether_integral(sym: &NoetherSymmetry, space: &MetricSpace<f64>, v: &ScalarField<f64>, omega: &OmegaProfile<f64>) -> FirstIntegral {
    FirstIntegral { source: sym.label(), symmetry: sym.clone(), space: space.clone(), v: v.clone(), omega: omega.clone() }
}

#[derive(Debug, Clone, Default)]
pub struct NoetherClassification {
    pub symmetries: Vec<NoetherSymmetry>,
    pub diagnostics: Vec<String>,
}

/// All Noether point symmetries, de-duplicated in case order I, II.a, II.b.
pub fn classify_noether(
    space: &MetricSpace<f64>,
    v: &ScalarField<f64>,
    omega: &OmegaProfile<f64>,
    catalog: &[Collineation<f64>],
    opts: &ClassifyOptions,
) -> Result<NoetherClassification> {
    if omega.is_constant() {
        return Err(Error::UnsupportedOmega("constant ω: the classification needs ω,t ≠ 0".into()));
    }
    let window = TimeWindow::new(omega, opts)?;
    let n = space.dim();
    let mut out = NoetherClassification::default();
    let mut first = vec![];
    let mut second_a = vec![];
    let mut second_b = vec![];
    for (idx, y) in catalog.iter().enumerate() {
        if !matches!(y.class, CollineationClass::GradientKV | CollineationClass::NongradientKV | CollineationClass::GradientHV) {
            continue;
        }
        let seed = opts.seed.wrapping_add(idx as u64);
        match case_i(space, v, omega, y, &window, seed)? {
            Ok(s) => first.extend(s),
            Err(note) => out.diagnostics.push(note),
        }
        if !y.is_gradient() {
            continue;
        }
        match conditions::affine_in_potential(space, y, v, seed)? {
            Some((lambda, c)) => match case_ii_b(space, v, omega, y, lambda, c, &window, seed)? {
                Ok(s) => second_b.extend(s),
                Err(note) => out.diagnostics.push(note),
            },
            None => match case_ii_a(space, v, omega, y, &window, seed)? {
                Ok(s) => second_a.extend(s),
                Err(note) => out.diagnostics.push(note),
            },
        }
    }
    let probe = RankProbe::new(n, 40, window.sample_range(), opts.seed);
    let mut dedup = Deduper::new(probe);
    for s in first.into_iter().chain(second_a).chain(second_b) {
        if dedup.offer(s.generator())? {
            out.symmetries.push(s);
        } else {
            out.diagnostics.push(format!("{} {} dependent on earlier generators", s.label(), s.symmetry.describe()));
        }
    }
    Ok(out)
}

fn functions(sol: &SolutionSpace, z0: &DVector<f64>, names: &[(&str, usize)]) -> BTreeMap<String, TimeFunction> {
    names.iter().map(|(k, c)| (k.to_string(), TimeFunction::from_flow(&sol.flow, z0, *c))).collect()
}

type CaseResult = std::result::Result<Vec<NoetherSymmetry>, String>;

/// Case I: η = a₁Y, ξ,t = 2ψa₁, Y(V) + d₂V + c₂ = 0, ξ(ln ω),t + a₁(2ψ − d₂) = 0,
/// f = a₁c₂∫ω dt.
fn case_i(
    space: &MetricSpace<f64>,
    v: &ScalarField<f64>,
    omega: &OmegaProfile<f64>,
    y: &Collineation<f64>,
    window: &TimeWindow,
    seed: u64,
) -> Result<CaseResult> {
    let n = space.dim();
    let fit = conditions::potential_condition_solve(space, y, v, ConditionForm::NoetherKilling, seed)?;
    if !fit.feasible() {
        return Ok(Err(format!("{}: Y(V) + d₂V + c₂ = 0 infeasible (residual {:.2e})", y.name, fit.residual)));
    }
    let (d2, c2) = (fit.get("d2"), fit.get("c2"));
    // z = (a₁, ξ)
    let mut mat = FlowMatrix::new(2, omega);
    mat.a0[(1, 0)] = 2.0 * y.psi;
    let w = omega.clone();
    let coef = 2.0 * y.psi - d2;
    let sol = ConstrainedSystem::new(mat)
        .constrain(move |t| Ok(DVector::from_vec(vec![coef, w.log_deriv(t)?])))
        .solve(window)?;
    // a₁ ≡ 0 forces ξ(ln ω),t = 0, so ξ = 0: nothing to reject
    Ok(Ok(sol
        .initial_data()
        .into_iter()
        .map(|z0| {
            let fns = functions(&sol, &z0, &[("a1", 0), ("xi", 1)]);
            let a1 = z0[0];
            let generator = Generator::new(n)
                .with_xi(fns["xi"].clone(), Poly::constant(n, 1.0), "1")
                .with_eta(fns["a1"].clone(), y.components.clone(), y.name.clone());
            let constants = BTreeMap::from([("d2".to_string(), d2), ("c2".to_string(), c2), ("psi".to_string(), y.psi)]);
            let gauge = vec![(TimeFunction::OmegaIntegral { omega: omega.clone(), scale: a1 * c2 }, Poly::constant(n, 1.0))];
            NoetherSymmetry {
                symmetry: PointSymmetry { case: CaseTag::NoetherI, source: Some(y.name.clone()), generator, constants, functions: fns, invariant: None },
                gauge,
            }
        })
        .collect()))
}

fn gradient_symmetries(
    n: usize,
    y: &Collineation<f64>,
    sol: &SolutionSpace,
    case: CaseTag,
    constants: BTreeMap<String, f64>,
) -> Vec<NoetherSymmetry> {
    let s = y.potential.clone().unwrap_or_else(|| Poly::zero(n));
    sol.initial_data()
        .into_iter()
        .map(|z0| {
            let fns = functions(sol, &z0, &[("T", 0), ("T_t", 1), ("xi", 2), ("K", 3)]);
            let generator = Generator::new(n)
                .with_xi(fns["xi"].clone(), Poly::constant(n, 1.0), "1")
                .with_eta(fns["T"].clone(), y.components.clone(), y.name.clone());
            let gauge = vec![(fns["T_t"].clone(), s.clone()), (fns["K"].clone(), Poly::constant(n, 1.0))];
            NoetherSymmetry {
                symmetry: PointSymmetry { case, source: Some(y.name.clone()), generator, constants: constants.clone(), functions: fns, invariant: None },
                gauge,
            }
        })
        .collect()
}

/// Case II.a: Y = ∇S gradient KV/HV, Y(V) + (2ψ + d₁)V + mS + k = 0;
/// T,tt = mωT, ξ,t = 2ψT, ξ(ln ω),t = d₁T, K,t = kωT.
fn case_ii_a(
    space: &MetricSpace<f64>,
    v: &ScalarField<f64>,
    omega: &OmegaProfile<f64>,
    y: &Collineation<f64>,
    window: &TimeWindow,
    seed: u64,
) -> Result<CaseResult> {
    let fit = conditions::potential_condition_solve(space, y, v, ConditionForm::NoetherGradient, seed)?;
    if !fit.feasible() {
        return Ok(Err(format!("{}: gradient relation infeasible (residual {:.2e})", y.name, fit.residual)));
    }
    let (d1, m, k) = (fit.get("d1"), fit.get("m"), fit.get("k"));
    // z = (T, T', ξ, K)
    let mut mat = FlowMatrix::new(4, omega);
    mat.a0[(0, 1)] = 1.0;
    mat.a1[(1, 0)] = m;
    mat.a0[(2, 0)] = 2.0 * y.psi;
    mat.a1[(3, 0)] = k;
    let w = omega.clone();
    let sol = ConstrainedSystem::new(mat)
        .constrain(move |t| Ok(DVector::from_vec(vec![-d1, 0.0, w.log_deriv(t)?, 0.0])))
        .fix_initial(3)
        .solve(window)?;
    let constants = BTreeMap::from([("d1".to_string(), d1), ("m".to_string(), m), ("k".to_string(), k), ("psi".to_string(), y.psi)]);
    Ok(Ok(gradient_symmetries(space.dim(), y, &sol, CaseTag::NoetherIIa, constants)))
}

/// Case II.b: V = λS + c, Y(V) + (2ψ + d₂)V + k = 0;
/// T,tt = λω(d₂T − ξ(ln ω),t), ξ,t = 2ψT, K,t = kωT + (c/λ)T,tt.
#[allow(clippy::too_many_arguments)]
fn case_ii_b(
    space: &MetricSpace<f64>,
    v: &ScalarField<f64>,
    omega: &OmegaProfile<f64>,
    y: &Collineation<f64>,
    lambda: f64,
    c: f64,
    window: &TimeWindow,
    seed: u64,
) -> Result<CaseResult> {
    let fit = conditions::potential_condition_solve(space, y, v, ConditionForm::NoetherParallel, seed)?;
    if !fit.feasible() {
        return Ok(Err(format!("{}: parallel relation infeasible (residual {:.2e})", y.name, fit.residual)));
    }
    let (d2, k) = (fit.get("d2"), fit.get("k"));
    let mut mat = FlowMatrix::new(4, omega);
    mat.a0[(0, 1)] = 1.0;
    mat.a1[(1, 0)] = lambda * d2;
    mat.a2[(1, 2)] = -lambda;
    mat.a0[(2, 0)] = 2.0 * y.psi;
    mat.a1[(3, 0)] = k + c * d2;
    mat.a2[(3, 2)] = -c;
    let sol = ConstrainedSystem::new(mat).fix_initial(3).solve(window)?;
    let constants = BTreeMap::from([
        ("d2".to_string(), d2),
        ("k".to_string(), k),
        ("lambda".to_string(), lambda),
        ("c".to_string(), c),
        ("psi".to_string(), y.psi),
    ]);
    Ok(Ok(gradient_symmetries(space.dim(), y, &sol, CaseTag::NoetherIIb, constants)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::euclidean_catalog;

    fn run(n: usize, v: ScalarField<f64>, w: OmegaProfile<f64>) -> NoetherClassification {
        classify_noether(&MetricSpace::euclidean(n), &v, &w, &euclidean_catalog(n), &ClassifyOptions::default()).unwrap()
    }

    fn labels(c: &NoetherClassification) -> Vec<String> {
        c.symmetries.iter().map(|s| format!("{} {}", s.label(), s.symmetry.describe())).collect()
    }

    fn scaling(c: &NoetherClassification) -> &NoetherSymmetry {
        c.symmetries.iter().find(|s| s.symmetry.source.as_deref() == Some("H")).expect("scaling")
    }

    fn xi_poly(s: &NoetherSymmetry) -> Vec<f64> {
        match &s.symmetry.functions["xi"] {
            TimeFunction::Polynomial(c) => c.clone(),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn kepler_inverse_root_profile() {
        let out = run(3, ScalarField::kepler(), OmegaProfile::power_law(-0.5).unwrap());
        assert_eq!(out.symmetries.len(), 4, "{:?}", labels(&out));
        let h = scaling(&out);
        let xi = xi_poly(h);
        // X = 2t∂t + H after normalising a₁ = 1
        assert!(xi[0].abs() < 1e-10 && (xi[1] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn exceptional_rotations_only() {
        for a in [1.0, -0.5, 2.0] {
            let out = run(3, ScalarField::exceptional(), OmegaProfile::power_law(a).unwrap());
            assert_eq!(out.symmetries.len(), 3, "a = {a}: {:?}", labels(&out));
            assert!(out.symmetries.iter().all(|s| s.symmetry.source.as_deref().unwrap().starts_with('X')));
        }
    }

    #[test]
    fn central_power_scaling_profile() {
        let out = run(3, ScalarField::central_power(3.0).unwrap(), OmegaProfile::power_law(-2.5).unwrap());
        assert_eq!(out.symmetries.len(), 4, "{:?}", labels(&out));
        assert!((xi_poly(scaling(&out))[1] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn oscillator_one_dimension_has_five() {
        let out = run(1, ScalarField::quadratic(), OmegaProfile::power_law(1.0).unwrap());
        assert_eq!(out.symmetries.len(), 5, "{:?}", labels(&out));
    }

    #[test]
    fn gauge_of_power_law_case_i() {
        let w = OmegaProfile::power_law(2.0).unwrap();
        let sym = NoetherSymmetry {
            symmetry: PointSymmetry {
                case: CaseTag::NoetherI,
                source: None,
                generator: Generator::new(1),
                constants: BTreeMap::new(),
                functions: BTreeMap::new(),
                invariant: None,
            },
            gauge: vec![(TimeFunction::OmegaIntegral { omega: w, scale: 1.0 }, Poly::constant(1, 1.0))],
        };
        let f = gauge_function(&sym);
        assert!((f(2.0, &[0.3]).unwrap() - 8.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_integral_is_angular_momentum() {
        let out = run(2, ScalarField::kepler(), OmegaProfile::power_law(1.0).unwrap());
        let rot = out.symmetries.iter().find(|s| s.symmetry.source.as_deref() == Some("X12")).unwrap();
        let i = noether_integral(rot, &MetricSpace::euclidean(2), &ScalarField::kepler(), &OmegaProfile::power_law(1.0).unwrap());
        let (x, xd) = ([1.0, 2.0], [0.5, -1.5]);
        let l = x[0] * xd[1] - x[1] * xd[0];
        assert!((i.eval(1.7, &x, &xd).unwrap().abs() - l.abs()).abs() < 1e-12);
    }
}
