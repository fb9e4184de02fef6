//! Metric spaces, Christoffel symbols and the collineation catalog.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::poly::{bracket, eval_field, Poly, PolyField};
use crate::scalar::Scalar;

pub type Matrix<T> = Vec<Vec<T>>;
/// Index order `[i][j][k]` for Γⁱⱼₖ.
pub type Rank3<T> = Vec<Vec<Vec<T>>>;

/// Residual ceiling for user-supplied collineations.
pub const USER_COLLINEATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum CollineationClass {
    GradientKV,
    NongradientKV,
    GradientHV,
    AffineCollineation,
    SpecialPC,
}

impl CollineationClass {
    pub fn is_killing(self) -> bool {
        matches!(self, CollineationClass::GradientKV | CollineationClass::NongradientKV)
    }

    /// KVs, the HV and ACs all preserve the connection.
    pub fn is_affine(self) -> bool {
        !matches!(self, CollineationClass::SpecialPC)
    }
}

/// Where a catalog vector came from; used to pick closed-form answers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Role {
    Translation(usize),
    Rotation(usize, usize),
    Dilation,
    /// A_I = x_I ∂_I
    DiagonalAffine(usize),
    /// P_I = x_I xⁱ∂ᵢ
    Projective(usize),
    /// Obtained by bracketing two catalog members.
    Bracket(String, String),
    User,
}

#[derive(Clone, PartialEq)]
pub struct Collineation<T> {
    pub name: String,
    pub class: CollineationClass,
    pub components: PolyField<T>,
    /// S with Yⁱ = gⁱʲS,ⱼ for gradient classes.
    pub potential: Option<Poly<T>>,
    /// Homothety factor; zero for KVs.
    pub psi: T,
    pub role: Role,
}

impl<T: Scalar> fmt::Debug for Collineation<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {:?} (", self.name, self.class)?;
        for (i, c) in self.components.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl<T: Scalar> Collineation<T> {
    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn eval(&self, x: &[T]) -> Vec<T> {
        eval_field(&self.components, x)
    }

    /// Whether S is available so that Yⁱ = S'ⁱ.
    pub fn is_gradient(&self) -> bool {
        self.potential.is_some()
    }

    /// Human-readable vector field, e.g. `x2 ∂1 - x1 ∂2`.
    pub fn describe(&self) -> String {
        let parts: Vec<String> = self
            .components
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| if c.terms().count() > 1 { format!("({c}) ∂{}", i + 1) } else { format!("{c} ∂{}", i + 1) })
            .collect();
        if parts.is_empty() {
            "0".into()
        } else {
            parts.join(" + ")
        }
    }
}

#[derive(Clone, PartialEq)]
pub enum MetricFamily<T> {
    Euclidean,
    /// Polynomial metric with user-supplied collineations.
    UserCatalog { metric: Vec<Vec<Poly<T>>>, catalog: Vec<Collineation<T>> },
}

#[derive(Clone, PartialEq)]
pub struct MetricSpace<T> {
    n: usize,
    family: MetricFamily<T>,
    /// Box used for seeded sampling of the chart.
    sample_box: (T, T),
}

impl<T: Scalar> fmt::Debug for MetricFamily<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricFamily::Euclidean => write!(f, "Euclidean"),
            MetricFamily::UserCatalog { metric, catalog } => {
                let rows: Vec<Vec<String>> = metric.iter().map(|r| r.iter().map(|p| p.to_string()).collect()).collect();
                f.debug_struct("UserCatalog").field("metric", &rows).field("catalog", catalog).finish()
            }
        }
    }
}

impl<T: Scalar> fmt::Debug for MetricSpace<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MetricSpace(n={}, {:?})", self.n, self.family)
    }
}

impl<T: Scalar> MetricSpace<T> {
    pub fn euclidean(n: usize) -> Self {
        assert!(n >= 1, "dimension must be at least 1");
        MetricSpace { n, family: MetricFamily::Euclidean, sample_box: (T::lit(-5.0), T::lit(5.0)) }
    }

    /// A polynomial metric whose collineations are supplied by the user.
    /// Each vector is verified against its class identity at seeded chart
    /// points and rejected above [`USER_COLLINEATION_TOL`].
    pub fn user(metric: Vec<Vec<Poly<T>>>, catalog: Vec<Collineation<T>>, sample_box: (T, T), seed: u64) -> Result<Self> {
        let n = metric.len();
        if n == 0 || metric.iter().any(|row| row.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: metric.first().map_or(0, Vec::len) });
        }
        for i in 0..n {
            for j in 0..n {
                if metric[i][j] != metric[j][i] {
                    return Err(Error::OutOfChart(format!("metric is not symmetric in ({}, {})", i + 1, j + 1)));
                }
            }
        }
        if let Some(c) = catalog.iter().find(|c| c.dim() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: c.dim() });
        }
        let mut space = MetricSpace { n, family: MetricFamily::UserCatalog { metric, catalog: vec![] }, sample_box };
        let points = space.sample_points(50, seed)?;
        let tol = T::lit(USER_COLLINEATION_TOL);
        for c in &catalog {
            let residual = collineation_residual(c, &space, &points)?;
            if !(residual <= tol) {
                return Err(Error::InvalidCollineation {
                    name: c.name.clone(),
                    residual: residual.to_f64_lossy(),
                    tolerance: USER_COLLINEATION_TOL,
                });
            }
        }
        if let MetricFamily::UserCatalog { catalog: slot, .. } = &mut space.family {
            *slot = catalog;
        }
        Ok(space)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn family(&self) -> &MetricFamily<T> {
        &self.family
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self.family, MetricFamily::Euclidean)
    }

    pub fn sample_box(&self) -> (T, T) {
        self.sample_box
    }

    /// The collineations of the space: the built-in list for Eⁿ, the
    /// verified user list otherwise.
    pub fn catalog(&self) -> Vec<Collineation<T>> {
        match &self.family {
            MetricFamily::Euclidean => euclidean_catalog(self.n),
            MetricFamily::UserCatalog { catalog, .. } => catalog.clone(),
        }
    }

    fn check_dim(&self, x: &[T]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: x.len() });
        }
        Ok(())
    }

    /// g_ij(x); errors when g is not positive-definite there.
    pub fn metric(&self, x: &[T]) -> Result<Matrix<T>> {
        self.check_dim(x)?;
        match &self.family {
            MetricFamily::Euclidean => Ok(identity(self.n)),
            MetricFamily::UserCatalog { metric, .. } => {
                let g: Matrix<T> = metric.iter().map(|row| row.iter().map(|p| p.eval(x)).collect()).collect();
                if !is_positive_definite(&g) {
                    return Err(Error::OutOfChart(format!("metric not positive-definite at {:?}", to_f64(x))));
                }
                Ok(g)
            }
        }
    }

    pub fn inverse_metric(&self, x: &[T]) -> Result<Matrix<T>> {
        let g = self.metric(x)?;
        invert(&g).ok_or_else(|| Error::OutOfChart(format!("metric singular at {:?}", to_f64(x))))
    }

    /// ∂ₗg_ij as `[l][i][j]`.
    pub fn metric_partials(&self, x: &[T]) -> Rank3<T> {
        let n = self.n;
        match &self.family {
            MetricFamily::Euclidean => zeros3(n),
            MetricFamily::UserCatalog { metric, .. } => (0..n)
                .map(|l| (0..n).map(|i| (0..n).map(|j| metric[i][j].partial(l).eval(x)).collect()).collect())
                .collect(),
        }
    }

    // ∂ₘ∂ₗg_ij as [m][l][i][j]
    fn metric_d2(&self, x: &[T]) -> Vec<Rank3<T>> {
        let n = self.n;
        match &self.family {
            MetricFamily::Euclidean => vec![zeros3(n); n],
            MetricFamily::UserCatalog { metric, .. } => (0..n)
                .map(|m| {
                    (0..n)
                        .map(|l| (0..n).map(|i| (0..n).map(|j| metric[i][j].partial(l).partial(m).eval(x)).collect()).collect())
                        .collect()
                })
                .collect(),
        }
    }

    /// Seeded points inside the sampling box and the chart.
    pub fn sample_points(&self, count: usize, seed: u64) -> Result<Vec<Vec<T>>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = (self.sample_box.0.to_f64_lossy(), self.sample_box.1.to_f64_lossy());
        let mut out = Vec::with_capacity(count);
        let mut tries = 0;
        while out.len() < count {
            tries += 1;
            if tries > 100 * count + 1000 {
                return Err(Error::OutOfChart("could not sample chart points in the sampling box".into()));
            }
            let x: Vec<T> = (0..self.n).map(|_| T::lit(rng.gen_range(lo..hi))).collect();
            if self.metric(&x).is_ok() {
                out.push(x);
            }
        }
        Ok(out)
    }
}

/// Γⁱⱼₖ at `x`.
pub fn christoffel<T: Scalar>(space: &MetricSpace<T>, x: &[T]) -> Result<Rank3<T>> {
    let n = space.dim();
    let ginv = space.inverse_metric(x)?;
    if space.is_euclidean() {
        return Ok(zeros3(n));
    }
    let dg = space.metric_partials(x);
    let lower = lower_christoffel(&dg, n);
    Ok(raise(&ginv, &lower, n))
}

/// ∂ₗΓⁱⱼₖ as `[l][i][j][k]`.
pub fn christoffel_derivatives<T: Scalar>(space: &MetricSpace<T>, x: &[T]) -> Result<Vec<Rank3<T>>> {
    let n = space.dim();
    let ginv = space.inverse_metric(x)?;
    if space.is_euclidean() {
        return Ok(vec![zeros3(n); n]);
    }
    let dg = space.metric_partials(x);
    let ddg = space.metric_d2(x);
    let lower = lower_christoffel(&dg, n);
    let half = T::lit(0.5);
    (0..n)
        .map(|l| {
            // ∂ₗ gⁱᵐ = −gⁱᵃ (∂ₗ g_ab) gᵇᵐ
            let dginv: Matrix<T> = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|m| {
                            let mut s = T::zero();
                            for a in 0..n {
                                for b in 0..n {
                                    s -= ginv[i][a] * dg[l][a][b] * ginv[b][m];
                                }
                            }
                            s
                        })
                        .collect()
                })
                .collect();
            let dlower: Rank3<T> = (0..n)
                .map(|m| {
                    (0..n)
                        .map(|j| (0..n).map(|k| half * (ddg[l][j][m][k] + ddg[l][k][m][j] - ddg[l][m][j][k])).collect())
                        .collect()
                })
                .collect();
            let a = raise(&dginv, &lower, n);
            let b = raise(&ginv, &dlower, n);
            Ok((0..n)
                .map(|i| (0..n).map(|j| (0..n).map(|k| a[i][j][k] + b[i][j][k]).collect()).collect())
                .collect())
        })
        .collect()
}

// Γ_mjk = ½(∂ⱼg_mk + ∂ₖg_mj − ∂ₘg_jk)
fn lower_christoffel<T: Scalar>(dg: &Rank3<T>, n: usize) -> Rank3<T> {
    let half = T::lit(0.5);
    (0..n)
        .map(|m| (0..n).map(|j| (0..n).map(|k| half * (dg[j][m][k] + dg[k][m][j] - dg[m][j][k])).collect()).collect())
        .collect()
}

fn raise<T: Scalar>(ginv: &Matrix<T>, lower: &Rank3<T>, n: usize) -> Rank3<T> {
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| (0..n).map(|m| ginv[i][m] * lower[m][j][k]).sum()).collect()).collect())
        .collect()
}

/// (L_Y g)_ij = Yᵏ∂ₖg_ij + g_kj ∂ᵢYᵏ + g_ik ∂ⱼYᵏ.
pub fn lie_derivative_metric<T: Scalar>(y: &Collineation<T>, space: &MetricSpace<T>, x: &[T]) -> Result<Matrix<T>> {
    let n = space.dim();
    if y.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.dim() });
    }
    let g = space.metric(x)?;
    let dg = space.metric_partials(x);
    let yv = y.eval(x);
    let dy = jacobian(&y.components, x); // dy[k][i] = ∂ᵢYᵏ
    Ok((0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut s = T::zero();
                    for k in 0..n {
                        s += yv[k] * dg[k][i][j] + g[k][j] * dy[k][i] + g[i][k] * dy[k][j];
                    }
                    s
                })
                .collect()
        })
        .collect())
}

/// (L_Y Γ)ⁱⱼₖ = ∂ⱼ∂ₖYⁱ + Yˡ∂ₗΓⁱⱼₖ − Γˡⱼₖ∂ₗYⁱ + Γⁱₗₖ∂ⱼYˡ + Γⁱⱼₗ∂ₖYˡ.
pub fn lie_derivative_connection<T: Scalar>(y: &Collineation<T>, space: &MetricSpace<T>, x: &[T]) -> Result<Rank3<T>> {
    let n = space.dim();
    if y.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.dim() });
    }
    let gam = christoffel(space, x)?;
    let dgam = christoffel_derivatives(space, x)?;
    let yv = y.eval(x);
    let dy = jacobian(&y.components, x);
    let mut out = zeros3(n);
    for i in 0..n {
        for j in 0..n {
            let dj = y.components[i].partial(j);
            for k in 0..n {
                let mut s = dj.partial(k).eval(x);
                for l in 0..n {
                    s += yv[l] * dgam[l][i][j][k] - gam[l][j][k] * dy[i][l] + gam[i][l][k] * dy[l][j] + gam[i][j][l] * dy[l][k];
                }
                out[i][j][k] = s;
            }
        }
    }
    Ok(out)
}

/// Residual of the class identity of `y` maximized over `points`:
/// L_Y g = 0 (KV), L_Y g = 2ψg (HV), L_Y Γ = 0 (AC),
/// L_Y Γⁱⱼₖ = δⁱⱼφ,ₖ + δⁱₖφ,ⱼ (PC, with φ,ₖ recovered from the trace).
/// Gradient classes additionally check g_ij Yʲ = S,ᵢ.
pub fn collineation_residual<T: Scalar>(y: &Collineation<T>, space: &MetricSpace<T>, points: &[Vec<T>]) -> Result<T> {
    let n = space.dim();
    let two = T::lit(2.0);
    let mut worst = T::zero();
    for x in points {
        let r = match y.class {
            CollineationClass::GradientKV | CollineationClass::NongradientKV | CollineationClass::GradientHV => {
                let lg = lie_derivative_metric(y, space, x)?;
                let g = space.metric(x)?;
                let psi = if y.class == CollineationClass::GradientHV { y.psi } else { T::zero() };
                max_abs2(&lg, |i, j| two * psi * g[i][j])
            }
            CollineationClass::AffineCollineation => max_abs3(&lie_derivative_connection(y, space, x)?, |_, _, _| T::zero()),
            CollineationClass::SpecialPC => {
                let lc = lie_derivative_connection(y, space, x)?;
                let dphi = projective_one_form(&lc);
                max_abs3(&lc, |i, j, k| delta::<T>(i, j) * dphi[k] + delta::<T>(i, k) * dphi[j])
            }
        };
        worst = worst.max(r);
        if let Some(s) = &y.potential {
            let g = space.metric(x)?;
            let yv = y.eval(x);
            for i in 0..n {
                let lowered: T = (0..n).map(|j| g[i][j] * yv[j]).sum();
                worst = worst.max((lowered - s.partial(i).eval(x)).abs());
            }
        }
    }
    Ok(worst)
}

/// φ,ₖ from a projective Lie derivative: (L_Y Γ)ⁱᵢₖ = (n+1) φ,ₖ.
pub fn projective_one_form<T: Scalar>(lc: &Rank3<T>) -> Vec<T> {
    let n = lc.len();
    let np1 = T::from_usize(n + 1).unwrap();
    (0..n).map(|k| (0..n).map(|i| lc[i][i][k]).sum::<T>() / np1).collect()
}

/// The Euclidean list: translations S_I, rotations X_IJ, the homothety H,
/// diagonal affine collineations A_I and special projective collineations P_I.
pub fn euclidean_catalog<T: Scalar>(n: usize) -> Vec<Collineation<T>> {
    let x = |i: usize| Poly::<T>::var(n, i);
    let zero = || Poly::<T>::zero(n);
    let mut out = Vec::with_capacity(n * (n + 5) / 2 + 1);
    for i in 0..n {
        let mut c = vec![zero(); n];
        c[i] = Poly::constant(n, T::one());
        out.push(Collineation {
            name: format!("S{}", i + 1),
            class: CollineationClass::GradientKV,
            components: c,
            potential: Some(x(i)),
            psi: T::zero(),
            role: Role::Translation(i),
        });
    }
    for i in 0..n {
        for j in i + 1..n {
            // x_I ∂_J − x_J ∂_I
            let mut c = vec![zero(); n];
            c[j] = x(i);
            c[i] = x(j).scale(-T::one());
            out.push(Collineation {
                name: format!("X{}{}", i + 1, j + 1),
                class: CollineationClass::NongradientKV,
                components: c,
                potential: None,
                psi: T::zero(),
                role: Role::Rotation(i, j),
            });
        }
    }
    let r2 = (0..n).fold(Poly::zero(n), |acc, i| acc.add(&x(i).mul(&x(i)))).scale(T::lit(0.5));
    out.push(Collineation {
        name: "H".into(),
        class: CollineationClass::GradientHV,
        components: (0..n).map(x).collect(),
        potential: Some(r2),
        psi: T::one(),
        role: Role::Dilation,
    });
    for i in 0..n {
        let mut c = vec![zero(); n];
        c[i] = x(i);
        out.push(Collineation {
            name: format!("A{}", i + 1),
            class: CollineationClass::AffineCollineation,
            components: c,
            potential: Some(x(i).mul(&x(i)).scale(T::lit(0.5))),
            psi: T::zero(),
            role: Role::DiagonalAffine(i),
        });
    }
    for i in 0..n {
        out.push(Collineation {
            name: format!("P{}", i + 1),
            class: CollineationClass::SpecialPC,
            components: (0..n).map(|k| x(i).mul(&x(k))).collect(),
            potential: None,
            psi: T::zero(),
            role: Role::Projective(i),
        });
    }
    out
}

/// Closes the affine part (KVs, HV, ACs) of `catalog` under Lie brackets.
///
/// New vectors are kept only when they enlarge the span of the polynomial
/// coefficients; each is classified against the Lie-derivative identities
/// at seeded points. The original members come first, in order.
pub fn affine_closure<T: Scalar>(space: &MetricSpace<T>, catalog: &[Collineation<T>], seed: u64) -> Result<Vec<Collineation<T>>> {
    let tol = T::lit(1e-9);
    let points = space.sample_points(24, seed)?;
    let mut members: Vec<Collineation<T>> = catalog.iter().filter(|c| c.class.is_affine()).cloned().collect();
    let mut basis = SpanBasis::new(tol);
    for m in &members {
        basis.insert(&coefficients(&m.components));
    }
    let mut frontier = 0;
    while frontier < members.len() {
        let end = members.len();
        for a in 0..end {
            for b in frontier.max(a + 1)..end {
                let br: PolyField<T> = bracket(&members[a].components, &members[b].components)
                    .iter()
                    .map(|p| p.pruned(tol))
                    .collect();
                if br.iter().all(Poly::is_zero) || !basis.insert(&coefficients(&br)) {
                    continue;
                }
                let name = format!("[{},{}]", members[a].name, members[b].name);
                let role = Role::Bracket(members[a].name.clone(), members[b].name.clone());
                members.push(classify_field(space, br, name, role, &points)?);
            }
        }
        frontier = end;
    }
    let mut out = members;
    out.extend(catalog.iter().filter(|c| !c.class.is_affine()).cloned());
    Ok(out)
}

fn classify_field<T: Scalar>(
    space: &MetricSpace<T>,
    components: PolyField<T>,
    name: String,
    role: Role,
    points: &[Vec<T>],
) -> Result<Collineation<T>> {
    let tol = T::lit(1e-8);
    let n = space.dim();
    let potential = if space.is_euclidean() { euclidean_potential(&components) } else { None };
    // L_Y g = 2ψ g with ψ read off the trace at the first point
    let g0 = space.metric(&points[0])?;
    let lg0 = lie_derivative_metric(&Collineation {
        name: name.clone(),
        class: CollineationClass::AffineCollineation,
        components: components.clone(),
        potential: None,
        psi: T::zero(),
        role: role.clone(),
    }, space, &points[0])?;
    let ginv0 = invert(&g0).unwrap();
    let tr: T = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| ginv0[i][j] * lg0[j][i]).sum();
    let psi = tr / T::from_usize(2 * n).unwrap();
    let mut c = Collineation { name, class: CollineationClass::GradientHV, components, potential, psi, role };
    let is_kv = psi.abs() < tol;
    c.class = match (is_kv, c.potential.is_some()) {
        (true, true) => CollineationClass::GradientKV,
        (true, false) => CollineationClass::NongradientKV,
        _ => CollineationClass::GradientHV,
    };
    if is_kv {
        c.psi = T::zero();
    }
    if collineation_residual(&c, space, points)? > tol || (c.class == CollineationClass::GradientHV && c.potential.is_none()) {
        c.class = CollineationClass::AffineCollineation;
        c.psi = T::zero();
    }
    Ok(c)
}

/// S with ∂ᵢS = Yᵢ when the flat one-form is closed.
fn euclidean_potential<T: Scalar>(y: &[Poly<T>]) -> Option<Poly<T>> {
    let n = y.len();
    for i in 0..n {
        for j in i + 1..n {
            if !y[i].partial(j).sub(&y[j].partial(i)).pruned(T::lit(1e-12)).is_zero() {
                return None;
            }
        }
    }
    // integrate along the coordinate axes: each monomial c·xᵉ in Yᵢ
    // contributes c·xᵉ⁺¹ᵢ/(eᵢ+1) unless it depends on an earlier coordinate
    let mut s = Poly::zero(n);
    for i in 0..n {
        let terms = y[i].terms().filter(|(e, _)| e[..i].iter().all(|&k| k == 0)).map(|(e, &c)| {
            let mut e2 = e.clone();
            e2[i] += 1;
            (c / T::from_u32(e2[i]).unwrap(), e2)
        });
        s = s.add(&Poly::from_terms(n, terms));
    }
    Some(s)
}

/// Flattened coefficient vector over a shared monomial index.
fn coefficients<T: Scalar>(field: &[Poly<T>]) -> Vec<(usize, Vec<u32>, T)> {
    field.iter().enumerate().flat_map(|(i, p)| p.terms().map(move |(e, &c)| (i, e.clone(), c))).collect()
}

// Incremental Gram–Schmidt over sparse coefficient vectors.
struct SpanBasis<T> {
    rows: Vec<std::collections::BTreeMap<(usize, Vec<u32>), T>>,
    tol: T,
}

impl<T: Scalar> SpanBasis<T> {
    fn new(tol: T) -> Self {
        SpanBasis { rows: vec![], tol }
    }

    fn insert(&mut self, v: &[(usize, Vec<u32>, T)]) -> bool {
        let mut w: std::collections::BTreeMap<(usize, Vec<u32>), T> = std::collections::BTreeMap::new();
        for (i, e, c) in v {
            *w.entry((*i, e.clone())).or_insert_with(T::zero) += *c;
        }
        let scale = w.values().fold(T::zero(), |m, c| m.max(c.abs()));
        if scale == T::zero() {
            return false;
        }
        for _ in 0..2 {
            for r in &self.rows {
                let d: T = r.iter().map(|(k, c)| *c * w.get(k).copied().unwrap_or(T::zero())).sum();
                for (k, c) in r {
                    *w.entry(k.clone()).or_insert_with(T::zero) -= d * *c;
                }
            }
        }
        let nrm = w.values().map(|c| *c * *c).sum::<T>().sqrt();
        if nrm <= self.tol * scale {
            return false;
        }
        for c in w.values_mut() {
            *c /= nrm;
        }
        self.rows.push(w);
        true
    }
}

// dy[k][i] = ∂ᵢYᵏ
fn jacobian<T: Scalar>(y: &[Poly<T>], x: &[T]) -> Matrix<T> {
    y.iter().map(|p| (0..x.len()).map(|i| p.partial(i).eval(x)).collect()).collect()
}

fn delta<T: Scalar>(i: usize, j: usize) -> T {
    if i == j {
        T::one()
    } else {
        T::zero()
    }
}

fn identity<T: Scalar>(n: usize) -> Matrix<T> {
    (0..n).map(|i| (0..n).map(|j| delta(i, j)).collect()).collect()
}

fn zeros3<T: Scalar>(n: usize) -> Rank3<T> {
    vec![vec![vec![T::zero(); n]; n]; n]
}

fn max_abs2<T: Scalar>(m: &Matrix<T>, target: impl Fn(usize, usize) -> T) -> T {
    let mut w = T::zero();
    for (i, row) in m.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            w = w.max((v - target(i, j)).abs());
        }
    }
    w
}

fn max_abs3<T: Scalar>(m: &Rank3<T>, target: impl Fn(usize, usize, usize) -> T) -> T {
    let mut w = T::zero();
    for (i, a) in m.iter().enumerate() {
        for (j, b) in a.iter().enumerate() {
            for (k, &v) in b.iter().enumerate() {
                w = w.max((v - target(i, j, k)).abs());
            }
        }
    }
    w
}

fn to_f64<T: Scalar>(x: &[T]) -> Vec<f64> {
    x.iter().map(|v| v.to_f64_lossy()).collect()
}

fn is_positive_definite<T: Scalar>(g: &Matrix<T>) -> bool {
    // Cholesky
    let n = g.len();
    let mut l = vec![vec![T::zero(); n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: T = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = g[i][i] - s;
                if !(d > T::zero()) {
                    return false;
                }
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (g[i][j] - s) / l[j][j];
            }
        }
    }
    true
}

/// Gauss–Jordan inverse with partial pivoting.
pub fn invert<T: Scalar>(m: &Matrix<T>) -> Option<Matrix<T>> {
    let n = m.len();
    let mut a = m.clone();
    let mut inv = identity::<T>(n);
    let scale = m.iter().flatten().fold(T::zero(), |s, v| s.max(v.abs()));
    for col in 0..n {
        let piv = (col..n).max_by(|&r, &s| a[r][col].abs().partial_cmp(&a[s][col].abs()).unwrap())?;
        if a[piv][col].abs() <= T::epsilon() * scale * T::lit(16.0) {
            return None;
        }
        a.swap(col, piv);
        inv.swap(col, piv);
        let p = a[col][col];
        for j in 0..n {
            a[col][j] /= p;
            inv[col][j] /= p;
        }
        for r in 0..n {
            if r != col {
                let f = a[r][col];
                if f != T::zero() {
                    for j in 0..n {
                        a[r][j] = a[r][j] - f * a[col][j];
                        inv[r][j] = inv[r][j] - f * inv[col][j];
                    }
                }
            }
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_space() -> MetricSpace<f64> {
        // g = diag(1, x1²)
        let x1sq = Poly::from_terms(2, [(1.0, vec![2, 0])]);
        let metric = vec![vec![Poly::constant(2, 1.0), Poly::zero(2)], vec![Poly::zero(2), x1sq]];
        MetricSpace::user(metric, vec![], (0.5, 3.0), 1).unwrap()
    }

    #[test]
    fn catalog_counts() {
        assert_eq!(euclidean_catalog::<f64>(1).len(), 4);
        assert_eq!(euclidean_catalog::<f64>(3).len(), 13);
        let c = euclidean_catalog::<f64>(2);
        let rot = c.iter().find(|c| c.role == Role::Rotation(0, 1)).unwrap();
        assert_eq!(rot.eval(&[1.0, 0.0]), vec![0.0, 1.0]);
    }

    #[test]
    fn toy_christoffel() {
        let s = toy_space();
        let g = christoffel(&s, &[2.0, 0.3]).unwrap();
        // Γ²₁₂ = 1/x1, Γ¹₂₂ = −x1
        assert!((g[1][0][1] - 0.5).abs() < 1e-15);
        assert!((g[1][1][0] - 0.5).abs() < 1e-15);
        assert!((g[0][1][1] + 2.0).abs() < 1e-15);
    }

    #[test]
    fn toy_christoffel_derivatives_match_differences() {
        let s = toy_space();
        let x = [1.3, 0.2];
        let d = christoffel_derivatives(&s, &x).unwrap();
        let h = 1e-6;
        for l in 0..2 {
            let mut xp = x.to_vec();
            xp[l] += h;
            let mut xm = x.to_vec();
            xm[l] -= h;
            let (gp, gm) = (christoffel(&s, &xp).unwrap(), christoffel(&s, &xm).unwrap());
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        let fd = (gp[i][j][k] - gm[i][j][k]) / (2.0 * h);
                        assert!((fd - d[l][i][j][k]).abs() < 1e-7);
                    }
                }
            }
        }
    }

    #[test]
    fn out_of_chart() {
        let s = toy_space();
        assert!(matches!(christoffel(&s, &[0.0, 1.0]), Err(Error::OutOfChart(_))));
    }

    #[test]
    fn lie_derivative_examples() {
        let s = MetricSpace::<f64>::euclidean(2);
        let c = euclidean_catalog::<f64>(2);
        let h = c.iter().find(|c| c.name == "H").unwrap();
        assert_eq!(lie_derivative_metric(h, &s, &[0.3, 1.7]).unwrap(), vec![vec![2.0, 0.0], vec![0.0, 2.0]]);
        let a1 = c.iter().find(|c| c.name == "A1").unwrap();
        assert_eq!(lie_derivative_metric(a1, &s, &[1.0, 1.0]).unwrap(), vec![vec![2.0, 0.0], vec![0.0, 0.0]]);
        let p1 = c.iter().find(|c| c.name == "P1").unwrap();
        let lc = lie_derivative_connection(p1, &s, &[0.4, -0.9]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let want = delta::<f64>(0, j) * delta::<f64>(i, k) + delta::<f64>(0, k) * delta::<f64>(i, j);
                    assert_eq!(lc[i][j][k], want);
                }
            }
        }
    }

    #[test]
    fn user_collineation_verified_and_rejected() {
        // plane in polar-like chart g = diag(1, x1²): ∂2 is a Killing vector
        let x1sq = Poly::from_terms(2, [(1.0, vec![2, 0])]);
        let metric = vec![vec![Poly::constant(2, 1.0), Poly::zero(2)], vec![Poly::zero(2), x1sq]];
        let kv = Collineation {
            name: "rot".into(),
            class: CollineationClass::NongradientKV,
            components: vec![Poly::zero(2), Poly::constant(2, 1.0)],
            potential: None,
            psi: 0.0,
            role: Role::User,
        };
        assert!(MetricSpace::user(metric.clone(), vec![kv.clone()], (0.5, 3.0), 3).is_ok());
        let mut bad = kv;
        bad.components[0] = Poly::constant(2, 1.0);
        let e = MetricSpace::user(metric, vec![bad], (0.5, 3.0), 3).unwrap_err();
        assert!(matches!(e, Error::InvalidCollineation { .. }));
    }

    #[test]
    fn closure_adds_shears() {
        let s = MetricSpace::<f64>::euclidean(2);
        let full = affine_closure(&s, &euclidean_catalog(2), 7).unwrap();
        // gl(2) ⋉ R² has dimension 6; the catalog spans 5 of it
        let affine: Vec<_> = full.iter().filter(|c| c.class.is_affine()).collect();
        let mut basis = SpanBasis::new(1e-9);
        let rank = affine.iter().filter(|c| basis.insert(&coefficients(&c.components))).count();
        assert_eq!(rank, 6);
        let shear = full.iter().find(|c| matches!(c.role, Role::Bracket(..))).unwrap();
        assert_eq!(shear.class, CollineationClass::AffineCollineation);
        assert!(shear.potential.is_some());
        assert_eq!(full.iter().filter(|c| c.class == CollineationClass::SpecialPC).count(), 2);
    }

    #[test]
    fn euclidean_potential_integrates() {
        let x = Poly::<f64>::var(2, 0);
        let y = Poly::<f64>::var(2, 1);
        let s = euclidean_potential(&[y.clone(), x.clone()]).unwrap();
        assert_eq!(s, x.mul(&y));
        assert!(euclidean_potential(&[y.scale(-1.0), x]).is_none());
    }
}
