//! Potential conditions: linear relations between V, its gradient and a
//! collineation, solved for their constant coefficients.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::geometry::{Collineation, Matrix, MetricSpace, Role};
use crate::linalg;

/// Acceptance threshold for least-squares fits.
pub const FIT_TOL: f64 = 1e-8;
const MIN_SAMPLES: usize = 60;

/// Which linear relation to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ConditionForm {
    /// L_Y V' + d₀V' + mY = 0
    LieGeneral,
    /// L_Y V' + dV' = 0
    LieAffine,
    /// Y·∇V + d₂V + c₂ = 0
    NoetherKilling,
    /// Y·∇V + 2ψV + d₁V + mS + k = 0
    NoetherGradient,
    /// Y·∇V + (2ψ + d₂)V + k = 0
    NoetherParallel,
}

impl ConditionForm {
    pub fn unknowns(self) -> &'static [&'static str] {
        match self {
            ConditionForm::LieGeneral => &["d0", "m"],
            ConditionForm::LieAffine => &["d"],
            ConditionForm::NoetherKilling => &["d2", "c2"],
            ConditionForm::NoetherGradient => &["d1", "m", "k"],
            ConditionForm::NoetherParallel => &["d2", "k"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SolveStatus {
    ExactClosedForm,
    NumericLeastSquares,
    Infeasible,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSolution {
    pub status: SolveStatus,
    pub constants: BTreeMap<String, f64>,
    /// Relative residual of the fit over the sample set.
    pub residual: f64,
    /// The unknowns were not determined uniquely by the samples.
    pub degenerate: bool,
}

impl ConstraintSolution {
    pub fn feasible(&self) -> bool {
        self.status != SolveStatus::Infeasible
    }

    pub fn get(&self, name: &str) -> f64 {
        self.constants.get(name).copied().unwrap_or(0.0)
    }
}

/// V'ⁱ = gⁱʲV,ⱼ.
pub fn raised_gradient(space: &MetricSpace<f64>, v: &ScalarField<f64>, x: &[f64]) -> Result<Vec<f64>> {
    let grad = v.grad(x)?;
    if space.is_euclidean() {
        return Ok(grad);
    }
    let ginv = space.inverse_metric(x)?;
    Ok(ginv.iter().map(|row| row.iter().zip(&grad).map(|(a, b)| a * b).sum()).collect())
}

/// ∂ₖV'ⁱ as `[i][k]`.
pub fn raised_gradient_jacobian(space: &MetricSpace<f64>, v: &ScalarField<f64>, x: &[f64]) -> Result<Matrix<f64>> {
    let hess = v.hessian(x)?;
    if space.is_euclidean() {
        return Ok(hess);
    }
    let n = space.dim();
    let grad = v.grad(x)?;
    let ginv = space.inverse_metric(x)?;
    let dg = space.metric_partials(x);
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += ginv[i][j] * hess[j][k];
                // ∂ₖgⁱʲ = −gⁱᵃ ∂ₖg_ab gᵇʲ
                let mut dginv = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        dginv -= ginv[i][a] * dg[k][a][b] * ginv[b][j];
                    }
                }
                s += dginv * grad[j];
            }
            out[i][k] = s;
        }
    }
    Ok(out)
}

/// (L_Y V')ⁱ = Yᵏ∂ₖV'ⁱ − V'ᵏ∂ₖYⁱ.
pub fn lie_derivative_gradient(y: &Collineation<f64>, space: &MetricSpace<f64>, v: &ScalarField<f64>, x: &[f64]) -> Result<Vec<f64>> {
    let n = space.dim();
    let yv = y.eval(x);
    let vp = raised_gradient(space, v, x)?;
    let jac = raised_gradient_jacobian(space, v, x)?;
    Ok((0..n)
        .map(|i| {
            (0..n)
                .map(|k| yv[k] * jac[i][k] - vp[k] * y.components[i].partial(k).eval(x))
                .sum()
        })
        .collect())
}

/// Seeded sample points: x ∈ [−3, 3]ⁿ with r > 0.5 for Euclidean space, the
/// chart sampling box otherwise; points where V is singular are skipped.
pub fn condition_points(space: &MetricSpace<f64>, v: &ScalarField<f64>, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let n = space.dim();
    let mut out = Vec::with_capacity(count);
    if space.is_euclidean() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        while out.len() < count {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let r = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            if r > 0.5 && v.eval(&x).is_ok() {
                out.push(x);
            }
        }
    } else {
        let mut k = 0;
        while out.len() < count {
            for x in space.sample_points(count, seed.wrapping_add(k))? {
                if out.len() < count && v.eval(&x).is_ok() {
                    out.push(x);
                }
            }
            k += 1;
            if k > 50 {
                return Err(Error::OutOfChart("potential singular on the whole sampling box".into()));
            }
        }
    }
    Ok(out)
}

/// Solves the relation `form` between `y` and `v` for its constants.
///
/// Central potentials against the dilation or a rotation in Euclidean space
/// have closed-form answers; everything else is a least-squares fit over
/// seeded points, accepted when the relative residual is below [`FIT_TOL`].
pub fn potential_condition_solve(
    space: &MetricSpace<f64>,
    y: &Collineation<f64>,
    v: &ScalarField<f64>,
    form: ConditionForm,
    seed: u64,
) -> Result<ConstraintSolution> {
    let points = condition_points(space, v, MIN_SAMPLES, seed)?;
    let (a, b) = assemble(space, y, v, form, &points)?;
    let names = form.unknowns();
    if let Some(exact) = closed_form(space, y, v, form) {
        let x = DVector::from_iterator(names.len(), names.iter().map(|k| exact[*k]));
        let residual = linalg::relative_residual(&a, &x, &b);
        return Ok(ConstraintSolution {
            status: SolveStatus::ExactClosedForm,
            constants: exact.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            residual,
            degenerate: false,
        });
    }
    let degenerate = linalg::rank(&a, 1e-9) < a.ncols();
    let (x, residual) = linalg::lstsq(&a, &b);
    let scale = x.amax().max(1.0);
    let constants = names
        .iter()
        .zip(x.iter())
        .map(|(k, &c)| (k.to_string(), if c.abs() < 1e-9 * scale { 0.0 } else { c }))
        .collect();
    let status = if residual < FIT_TOL { SolveStatus::NumericLeastSquares } else { SolveStatus::Infeasible };
    Ok(ConstraintSolution { status, constants, residual, degenerate })
}

// rows stacked over points; unknown columns in `form.unknowns()` order
fn assemble(
    space: &MetricSpace<f64>,
    y: &Collineation<f64>,
    v: &ScalarField<f64>,
    form: ConditionForm,
    points: &[Vec<f64>],
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let n = space.dim();
    let cols = form.unknowns().len();
    let mut rows: Vec<Vec<f64>> = vec![];
    let mut rhs = vec![];
    for x in points {
        match form {
            ConditionForm::LieGeneral | ConditionForm::LieAffine => {
                let lv = lie_derivative_gradient(y, space, v, x)?;
                let vp = raised_gradient(space, v, x)?;
                let yv = y.eval(x);
                for i in 0..n {
                    let mut r = vec![vp[i]];
                    if form == ConditionForm::LieGeneral {
                        r.push(yv[i]);
                    }
                    rows.push(r);
                    rhs.push(-lv[i]);
                }
            }
            _ => {
                let vv = v.eval(x)?;
                space.metric(x)?;
                let grad = v.grad(x)?;
                let yv = y.eval(x);
                let ydv: f64 = yv.iter().zip(&grad).map(|(a, b)| a * b).sum();
                match form {
                    ConditionForm::NoetherKilling => {
                        rows.push(vec![vv, 1.0]);
                        rhs.push(-ydv);
                    }
                    ConditionForm::NoetherGradient => {
                        let s = y.potential.as_ref().map_or(0.0, |p| p.eval(x));
                        rows.push(vec![vv, s, 1.0]);
                        rhs.push(-(ydv + 2.0 * y.psi * vv));
                    }
                    ConditionForm::NoetherParallel => {
                        rows.push(vec![vv, 1.0]);
                        rhs.push(-(ydv + 2.0 * y.psi * vv));
                    }
                    _ => unreachable!(),
                }
            }
        }
    }
    let a = DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]);
    Ok((a, DVector::from_vec(rhs)))
}

fn closed_form(
    space: &MetricSpace<f64>,
    y: &Collineation<f64>,
    v: &ScalarField<f64>,
    form: ConditionForm,
) -> Option<BTreeMap<&'static str, f64>> {
    if !space.is_euclidean() {
        return None;
    }
    let (_, p) = v.radial_power()?;
    let m = |pairs: &[(&'static str, f64)]| Some(pairs.iter().copied().collect());
    match (&y.role, form) {
        (Role::Rotation(..), ConditionForm::LieGeneral) => m(&[("d0", 0.0), ("m", 0.0)]),
        (Role::Rotation(..), ConditionForm::LieAffine) => m(&[("d", 0.0)]),
        (Role::Rotation(..), ConditionForm::NoetherKilling) => m(&[("d2", 0.0), ("c2", 0.0)]),
        // L_H V' = (p − 2)V'; degenerate when V' ∥ H
        (Role::Dilation, ConditionForm::LieGeneral) if p != 2.0 => m(&[("d0", 2.0 - p), ("m", 0.0)]),
        (Role::Dilation, ConditionForm::LieAffine) => m(&[("d", 2.0 - p)]),
        // H·∇V = pV
        (Role::Dilation, ConditionForm::NoetherKilling) => m(&[("d2", -p), ("c2", 0.0)]),
        (Role::Dilation, ConditionForm::NoetherGradient) if p != 2.0 => m(&[("d1", -(p + 2.0)), ("m", 0.0), ("k", 0.0)]),
        (Role::Dilation, ConditionForm::NoetherParallel) if p == 2.0 => m(&[("d2", -(p + 2.0)), ("k", 0.0)]),
        _ => None,
    }
}

/// k with Y = kV' over the sample set, if the fit is exact.
pub fn parallel_factor(space: &MetricSpace<f64>, y: &Collineation<f64>, v: &ScalarField<f64>, seed: u64) -> Result<Option<f64>> {
    let points = condition_points(space, v, MIN_SAMPLES, seed)?;
    let mut a = vec![];
    let mut b = vec![];
    for x in &points {
        a.extend(raised_gradient(space, v, x)?);
        b.extend(y.eval(x));
    }
    let a = DMatrix::from_column_slice(a.len(), 1, &a);
    let b = DVector::from_vec(b);
    if a.norm() == 0.0 || b.norm() == 0.0 {
        return Ok(None);
    }
    let (k, r) = linalg::lstsq(&a, &b);
    Ok(if r < FIT_TOL && k[0].abs() > 1e-12 { Some(k[0]) } else { None })
}

/// (λ, c) with V = λS + c for the potential S of `y`, if exact.
pub fn affine_in_potential(space: &MetricSpace<f64>, y: &Collineation<f64>, v: &ScalarField<f64>, seed: u64) -> Result<Option<(f64, f64)>> {
    let Some(s) = &y.potential else { return Ok(None) };
    let points = condition_points(space, v, MIN_SAMPLES, seed)?;
    let mut a = DMatrix::zeros(points.len(), 2);
    let mut b = DVector::zeros(points.len());
    for (i, x) in points.iter().enumerate() {
        a[(i, 0)] = s.eval(x);
        a[(i, 1)] = 1.0;
        b[i] = v.eval(x)?;
    }
    if linalg::rank(&a, 1e-9) < 2 {
        return Ok(None);
    }
    let (sol, r) = linalg::lstsq(&a, &b);
    Ok(if r < FIT_TOL && sol[0].abs() > 1e-12 {
        let c = if sol[1].abs() < 1e-10 * sol[0].abs().max(1.0) { 0.0 } else { sol[1] };
        Some((sol[0], c))
    } else {
        None
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::euclidean_catalog;

    fn find(c: &[Collineation<f64>], name: &str) -> Collineation<f64> {
        c.iter().find(|y| y.name == name).unwrap().clone()
    }

    #[test]
    fn dilation_central_power() {
        let s = MetricSpace::euclidean(3);
        let c = euclidean_catalog(3);
        let v = ScalarField::central_power(3.0).unwrap();
        let sol = potential_condition_solve(&s, &find(&c, "H"), &v, ConditionForm::LieGeneral, 1).unwrap();
        assert_eq!(sol.status, SolveStatus::ExactClosedForm);
        assert_eq!(sol.get("d0"), -1.0);
        assert!(sol.residual < 1e-13);
    }

    #[test]
    fn rotation_central() {
        let s = MetricSpace::euclidean(3);
        let c = euclidean_catalog(3);
        let sol = potential_condition_solve(&s, &find(&c, "X12"), &ScalarField::kepler(), ConditionForm::LieGeneral, 1).unwrap();
        assert_eq!((sol.get("d0"), sol.get("m")), (0.0, 0.0));
        assert!(sol.residual < 1e-13);
    }

    #[test]
    fn translation_kepler_infeasible() {
        let s = MetricSpace::euclidean(3);
        let c = euclidean_catalog(3);
        let sol = potential_condition_solve(&s, &find(&c, "S1"), &ScalarField::kepler(), ConditionForm::LieGeneral, 1).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn translation_oscillator_numeric() {
        let s = MetricSpace::euclidean(2);
        let c = euclidean_catalog(2);
        let sol = potential_condition_solve(&s, &find(&c, "S2"), &ScalarField::quadratic(), ConditionForm::LieGeneral, 1).unwrap();
        assert_eq!(sol.status, SolveStatus::NumericLeastSquares);
        assert!(sol.get("d0").abs() < 1e-12 && (sol.get("m") + 1.0).abs() < 1e-12);
    }

    #[test]
    fn closed_forms_agree_with_least_squares() {
        // oracle: least squares on the same rows must reproduce the table
        let s = MetricSpace::euclidean(3);
        let c = euclidean_catalog(3);
        let h = find(&c, "H");
        let fields = [ScalarField::kepler(), ScalarField::exceptional(), ScalarField::central_power(3.0).unwrap()];
        for v in &fields {
            for form in [ConditionForm::LieGeneral, ConditionForm::LieAffine, ConditionForm::NoetherKilling, ConditionForm::NoetherGradient] {
                let exact = closed_form(&s, &h, v, form).unwrap();
                let pts = condition_points(&s, v, 60, 9).unwrap();
                let (a, b) = assemble(&s, &h, v, form, &pts).unwrap();
                let (x, r) = linalg::lstsq(&a, &b);
                assert!(r < 1e-10, "{} {form:?}", v.name());
                for (i, k) in form.unknowns().iter().enumerate() {
                    assert!((x[i] - exact[k]).abs() < 1e-8, "{} {form:?} {k}", v.name());
                }
            }
        }
    }

    #[test]
    fn oscillator_is_parallel_to_dilation() {
        let s = MetricSpace::euclidean(2);
        let c = euclidean_catalog(2);
        let h = find(&c, "H");
        let k = parallel_factor(&s, &h, &ScalarField::quadratic(), 3).unwrap().unwrap();
        assert!((k - 1.0).abs() < 1e-12);
        assert_eq!(parallel_factor(&s, &h, &ScalarField::kepler(), 3).unwrap(), None);
        let (l, c0) = affine_in_potential(&s, &h, &ScalarField::quadratic(), 3).unwrap().unwrap();
        assert!((l - 1.0).abs() < 1e-12 && c0 == 0.0);
    }

    #[test]
    fn lie_derivative_of_gradient_user_metric_matches_differences() {
        use crate::poly::Poly;
        let x1sq = Poly::from_terms(2, [(1.0, vec![2, 0])]);
        let metric = vec![vec![Poly::constant(2, 1.0), Poly::zero(2)], vec![Poly::zero(2), x1sq]];
        let s = MetricSpace::user(metric, vec![], (0.5, 3.0), 1).unwrap();
        let v = ScalarField::polynomial(Poly::from_terms(2, [(1.0, vec![2, 1]), (0.5, vec![0, 2])]));
        let x = [1.4, 0.7];
        let jac = raised_gradient_jacobian(&s, &v, &x).unwrap();
        let h = 1e-6;
        for k in 0..2 {
            let mut xp = x.to_vec();
            xp[k] += h;
            let mut xm = x.to_vec();
            xm[k] -= h;
            let (gp, gm) = (raised_gradient(&s, &v, &xp).unwrap(), raised_gradient(&s, &v, &xm).unwrap());
            for i in 0..2 {
                assert!(((gp[i] - gm[i]) / (2.0 * h) - jac[i][k]).abs() < 1e-7);
            }
        }
    }
}
