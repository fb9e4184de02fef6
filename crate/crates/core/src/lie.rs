//! Lie point symmetries of ẍⁱ + Γⁱⱼₖẋʲẋᵏ + ω(t)V'ⁱ = 0.
//!
//! Every generator has the form ξ = D(t) or C(t)S_J, η = T(t)Yⁱ, with Y a
//! collineation of the metric. For each candidate Y the determining
//! equations collapse to a linear ODE for the time coefficients plus
//! pointwise constraints, solved by [`crate::engine`].

use std::collections::BTreeMap;

use nalgebra::DVector;

use crate::conditions::{self, ConditionForm};
use crate::engine::{ClassifyOptions, ConstrainedSystem, Deduper, RankProbe, SolutionSpace, TimeWindow};
use crate::error::{Error, Result};
use crate::fields::{OmegaProfile, ScalarField};
use crate::geometry::{affine_closure, Collineation, CollineationClass, MetricSpace, Role};
use crate::poly::Poly;
use crate::symmetry::{CaseTag, FlowMatrix, Generator, Invariant, PointSymmetry, TimeFunction};

/// Symmetries plus notes on cases that were skipped or pruned.
#[derive(Debug, Clone, Default)]
pub struct LieClassification {
    pub symmetries: Vec<PointSymmetry>,
    pub diagnostics: Vec<String>,
}

/// All Lie point symmetries, de-duplicated by rank in case order
/// I.1, I.2, II, III, IV.
pub fn classify_lie(
    space: &MetricSpace<f64>,
    v: &ScalarField<f64>,
    omega: &OmegaProfile<f64>,
    catalog: &[Collineation<f64>],
    opts: &ClassifyOptions,
) -> Result<LieClassification> {
    if omega.is_constant() {
        return Err(Error::UnsupportedOmega("constant ω: the classification needs ω,t ≠ 0".into()));
    }
    let window = TimeWindow::new(omega, opts)?;
    let closure = affine_closure(space, catalog, opts.seed)?;
    let mut out = LieClassification::default();

    let mut candidates = case_i(omega, &window, space.dim())?;
    let (rigid, general, mut notes) = case_ii_split(space, v, omega, &closure, &window, opts)?;
    candidates.extend(rigid);
    candidates.extend(general);
    out.diagnostics.append(&mut notes);
    let (third, mut notes) = case_iii(space, v, omega, &closure, &window, opts)?;
    candidates.extend(third);
    out.diagnostics.append(&mut notes);
    match case_iv(space, v, omega, &closure, &window, opts) {
        Ok(fourth) => candidates.extend(fourth),
        Err(Error::CaseInapplicable(why)) => out.diagnostics.push(format!("case IV: {why}")),
        Err(e) => return Err(e),
    }

    let probe = RankProbe::new(space.dim(), 40, window.sample_range(), opts.seed);
    let mut dedup = Deduper::new(probe);
    for s in candidates {
        if dedup.offer(&s.generator)? {
            out.symmetries.push(s);
        } else {
            out.diagnostics.push(format!("{} {} dependent on earlier generators", s.label(), s.describe()));
        }
    }
    Ok(out)
}

fn state_functions(space: &SolutionSpace, z0: &DVector<f64>, names: &[(&str, usize)]) -> BTreeMap<String, TimeFunction> {
    names.iter().map(|(k, c)| (k.to_string(), TimeFunction::from_flow(&space.flow, z0, *c))).collect()
}

// constant entries plus (ln ω),t in column `l_at`
fn log_deriv_row(omega: &OmegaProfile<f64>, dim: usize, entries: Vec<(usize, f64)>, l_at: usize) -> impl Fn(f64) -> Result<DVector<f64>> + Send + Sync + 'static {
    let omega = omega.clone();
    move |t| {
        let mut r = DVector::zeros(dim);
        for &(i, c) in &entries {
            r[i] += c;
        }
        r[l_at] += omega.log_deriv(t)?;
        Ok(r)
    }
}

/// Case I.1: ξ = D(t) with D'' = 0 and D(ln ω),t + 2D,t = 0, so ω = 1/(d₁t+d₂)².
pub fn case_i(omega: &OmegaProfile<f64>, window: &TimeWindow, n: usize) -> Result<Vec<PointSymmetry>> {
    let mut m = FlowMatrix::new(2, omega);
    m.a0[(0, 1)] = 1.0;
    let space = ConstrainedSystem::new(m).constrain(log_deriv_row(omega, 2, vec![(1, 2.0)], 0)).solve(window)?;
    Ok(space
        .initial_data()
        .into_iter()
        .map(|z0| {
            let d = TimeFunction::from_flow(&space.flow, &z0, 0);
            let mut constants = BTreeMap::new();
            if let TimeFunction::Polynomial(c) = &d {
                constants.insert("d1".into(), c.get(1).copied().unwrap_or(0.0));
                constants.insert("d2".into(), c.first().copied().unwrap_or(0.0));
            }
            PointSymmetry {
                case: CaseTag::I1,
                source: None,
                generator: Generator::new(n).with_xi(d.clone(), Poly::constant(n, 1.0), "1"),
                constants,
                functions: BTreeMap::from([("D".to_string(), d)]),
                invariant: None,
            }
        })
        .collect())
}

fn is_dilation_like(y: &Collineation<f64>) -> bool {
    matches!(y.role, Role::Dilation)
}

/// Case II (gradient KV/HV) and Case I.2 (rigid members of the affine
/// algebra): ξ = D(t), η = T(t)Y with L_Y V' + d₀V' + mY = 0,
/// D(ln ω),t + 2D,t = d₀T, T,tt = mωT, D,tt = 2ψT,t.
///
/// Members that are not gradient KVs/HVs force T,t = 0. A gradient Y ∥ V'
/// has L_Y V' = 0 and enters with d₀ = m = 0. Solutions with T ≡ 0 belong
/// to Case I.1 and are dropped.
pub fn case_ii(
    space: &MetricSpace<f64>,
    v: &ScalarField<f64>,
    omega: &OmegaProfile<f64>,
    catalog: &[Collineation<f64>],
    window: &TimeWindow,
    opts: &ClassifyOptions,
) -> Result<Vec<PointSymmetry>> {
    let (mut a, b, _) = case_ii_split(space, v, omega, catalog, window, opts)?;
    a.extend(b);
    Ok(a)
}

#[allow(clippy::type_complexity)]
fn case_ii_split(
    space: &MetricSpace<f64>,
    v: &ScalarField<f64>,
    omega: &OmegaProfile<f64>,
    catalog: &[Collineation<f64>],
    window: &TimeWindow,
    opts: &ClassifyOptions,
) -> Result<(Vec<PointSymmetry>, Vec<PointSymmetry>, Vec<String>)> {
    let n = space.dim();
    let (mut rigid, mut general, mut notes) = (vec![], vec![], vec![]);
    for (idx, y) in catalog.iter().enumerate() {
        if y.class == CollineationClass::SpecialPC {
            continue;
        }
        let seed = opts.seed.wrapping_add(idx as u64);
        let gradient = y.is_gradient();
        let parallel = if gradient { conditions::parallel_factor(space, y, v, seed)? } else { None };
        let (d0, m) = if parallel.is_some() {
            (0.0, 0.0)
        } else {
            let form = if y.class == CollineationClass::AffineCollineation { ConditionForm::LieAffine } else { ConditionForm::LieGeneral };
            let sol = conditions::potential_condition_solve(space, y, v, form, seed)?;
            if !sol.feasible() {
                notes.push(format!("{}: L_Y V' relation infeasible (residual {:.2e})", y.name, sol.residual));
                continue;
            }
            let d0 = if form == ConditionForm::LieAffine { sol.get("d") } else { sol.get("d0") };
            let m = if form == ConditionForm::LieAffine { 0.0 } else { sol.get("m") };
            (d0, m)
        };
        let mut mat = FlowMatrix::new(4, omega);
        mat.a0[(0, 1)] = 1.0;
        mat.a0[(2, 3)] = 1.0;
        mat.a0[(3, 1)] = 2.0 * y.psi;
        mat.a1[(1, 0)] = m;
        let mut sys = ConstrainedSystem::new(mat).constrain(log_deriv_row(omega, 4, vec![(0, -d0), (3, 2.0)], 2));
        let is_rigid = !(gradient && matches!(y.class, CollineationClass::GradientKV | CollineationClass::GradientHV));
        if is_rigid {
            sys = sys.vanish(1);
        }
        let (sol, _) = sys.solve(window)?.reject_vanishing(0, window)?;
        let tag = if y.class == CollineationClass::AffineCollineation { CaseTag::I2 } else { CaseTag::II };
        for z0 in sol.initial_data() {
            let functions = state_functions(&sol, &z0, &[("T", 0), ("D", 2)]);
            let generator = Generator::new(n)
                .with_xi(functions["D"].clone(), Poly::constant(n, 1.0), "1")
                .with_eta(functions["T"].clone(), y.components.clone(), y.name.clone());
            let mut constants = BTreeMap::from([("d0".to_string(), d0), ("m".to_string(), m), ("psi".to_string(), y.psi)]);
            if let Some(k) = parallel {
                constants.insert("k".into(), k);
            }
            let invariant = if is_dilation_like(y) { scaling_invariant(&functions, d0) } else { None };
            let s = PointSymmetry { case: tag, source: Some(y.name.clone()), generator, constants, functions, invariant };
            if is_rigid && tag == CaseTag::I2 {
                rigid.push(s);
            } else {
                general.push(s);
            }
        }
    }
    Ok((rigid, general, notes))
}

/// X = ct∂t + H preserves r^{d₀}·t^{−d₀/c}.
fn scaling_invariant(functions: &BTreeMap<String, TimeFunction>, d0: f64) -> Option<Invariant> {
    let (TimeFunction::Polynomial(d), TimeFunction::Polynomial(t)) = (&functions["D"], &functions["T"]) else { return None };
    let c = *d.get(1)?;
    let tail_zero = d.first().map_or(true, |v| v.abs() < 1e-12) && d.iter().skip(2).all(|v| v.abs() < 1e-12);
    let t_const = t.len() == 1 && (t[0] - 1.0).abs() < 1e-12;
    if !tail_zero || !t_const || c.abs() < 1e-12 || d0.abs() < 1e-12 {
        return None;
    }
    Some(Invariant { r_power: d0, t_power: -d0 / c })
}

/// Case III: gradient KV/HV Y = kV'. Then ξ = D, η = TY with
/// T,tt = −(ω,t D + 2ωD,t)/k and D,tt = 2ψT,t. The T,t ≡ 0 part
/// reproduces Case II solutions and is rejected.
pub fn case_iii(
    space: &MetricSpace<f64>,
    v: &ScalarField<f64>,
    omega: &OmegaProfile<f64>,
    catalog: &[Collineation<f64>],
    window: &TimeWindow,
    opts: &ClassifyOptions,
) -> Result<(Vec<PointSymmetry>, Vec<String>)> {
    let n = space.dim();
    let (mut out, mut notes) = (vec![], vec![]);
    for (idx, y) in catalog.iter().enumerate() {
        if !y.is_gradient() || !matches!(y.class, CollineationClass::GradientKV | CollineationClass::GradientHV) {
            continue;
        }
        let Some(k) = conditions::parallel_factor(space, y, v, opts.seed.wrapping_add(idx as u64))? else { continue };
        let mut mat = FlowMatrix::new(4, omega);
        mat.a0[(0, 1)] = 1.0;
        mat.a0[(2, 3)] = 1.0;
        mat.a0[(3, 1)] = 2.0 * y.psi;
        mat.a2[(1, 2)] = -1.0 / k;
        mat.a1[(1, 3)] = -2.0 / k;
        let (sol, dropped) = ConstrainedSystem::new(mat).solve(window)?.reject_vanishing(1, window)?;
        if dropped > 0 {
            notes.push(format!("case III [{}]: {dropped} solution(s) with T,t = 0 rejected", y.name));
        }
        for z0 in sol.initial_data() {
            let functions = state_functions(&sol, &z0, &[("T", 0), ("D", 2)]);
            let generator = Generator::new(n)
                .with_xi(functions["D"].clone(), Poly::constant(n, 1.0), "1")
                .with_eta(functions["T"].clone(), y.components.clone(), y.name.clone());
            let constants = BTreeMap::from([("k".to_string(), k), ("psi".to_string(), y.psi)]);
            out.push(PointSymmetry { case: CaseTag::III, source: Some(y.name.clone()), generator, constants, functions, invariant: None });
        }
    }
    Ok((out, notes))
}

/// Case IV, Euclidean space with V' = κH: for each special projective
/// vector P_J, ξ = C(t)x_J and η = T(t)x_J H with C,t = T, T,t = −κωC.
pub fn case_iv(
    space: &MetricSpace<f64>,
    v: &ScalarField<f64>,
    omega: &OmegaProfile<f64>,
    catalog: &[Collineation<f64>],
    window: &TimeWindow,
    opts: &ClassifyOptions,
) -> Result<Vec<PointSymmetry>> {
    if !space.is_euclidean() {
        return Err(Error::CaseInapplicable("only instantiated in Euclidean space".into()));
    }
    let n = space.dim();
    let h = catalog
        .iter()
        .find(|y| y.role == Role::Dilation)
        .ok_or_else(|| Error::CaseInapplicable("catalog has no homothetic vector".into()))?;
    let k = conditions::parallel_factor(space, h, v, opts.seed)?
        .ok_or_else(|| Error::CaseInapplicable("V' is not a gradient HV".into()))?;
    let kappa = 1.0 / k;
    // ω = 1/(4t²) is outside the case
    let excluded = window.chebyshev(16).iter().all(|&t| omega.eval(t).map_or(false, |w| (4.0 * kappa * w * t * t - 1.0).abs() < 1e-10));
    if excluded {
        return Err(Error::CaseInapplicable("κω(t) = 1/(4t²) is excluded".into()));
    }
    let mut out = vec![];
    for p in catalog.iter().filter(|y| y.class == CollineationClass::SpecialPC) {
        let Role::Projective(j) = p.role else { continue };
        let mut mat = FlowMatrix::new(2, omega);
        mat.a0[(0, 1)] = 1.0;
        mat.a1[(1, 0)] = -kappa;
        let sol = ConstrainedSystem::new(mat).solve(window)?;
        let xj = Poly::var(n, j);
        let field: Vec<Poly<f64>> = (0..n).map(|i| xj.mul(&Poly::var(n, i))).collect();
        for z0 in sol.initial_data() {
            let functions = state_functions(&sol, &z0, &[("C", 0), ("T", 1)]);
            let generator = Generator::new(n)
                .with_xi(functions["C"].clone(), xj.clone(), format!("x{}", j + 1))
                .with_eta(functions["T"].clone(), field.clone(), format!("x{}·H", j + 1));
            let constants = BTreeMap::from([("kappa".to_string(), kappa), ("J".to_string(), (j + 1) as f64)]);
            out.push(PointSymmetry { case: CaseTag::IV, source: Some(p.name.clone()), generator, constants, functions, invariant: None });
        }
    }
    Ok(out)
}
