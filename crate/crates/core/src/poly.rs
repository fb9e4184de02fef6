//! Sparse multivariate polynomials in the coordinates x¹..xⁿ.
//!
//! Collineation components, gradient potentials and user metrics are all
//! polynomial, so derivatives and Lie brackets are exact.

use std::collections::BTreeMap;
use std::fmt;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Poly<T> {
    nvars: usize,
    // exponent vector -> coefficient, zero coefficients never stored
    terms: BTreeMap<Vec<u32>, T>,
}

impl<T: Scalar> Poly<T> {
    pub fn zero(nvars: usize) -> Self {
        Poly { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: T) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(c, vec![0; nvars]);
        p
    }

    /// The coordinate function xᵢ.
    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        Self::from_terms(nvars, [(T::one(), e)])
    }

    pub fn from_terms<I: IntoIterator<Item = (T, Vec<u32>)>>(nvars: usize, terms: I) -> Self {
        let mut p = Self::zero(nvars);
        for (c, e) in terms {
            assert_eq!(e.len(), nvars, "exponent vector length");
            p.add_term(c, e);
        }
        p
    }

    fn add_term(&mut self, c: T, e: Vec<u32>) {
        if c == T::zero() {
            return;
        }
        let entry = self.terms.entry(e).or_insert_with(T::zero);
        *entry += c;
        if *entry == T::zero() {
            self.terms.retain(|_, v| *v != T::zero());
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &T)> {
        self.terms.iter()
    }

    pub fn eval(&self, x: &[T]) -> T {
        debug_assert_eq!(x.len(), self.nvars);
        self.terms
            .iter()
            .map(|(e, &c)| {
                e.iter()
                    .zip(x)
                    .fold(c, |acc, (&k, &xi)| if k == 0 { acc } else { acc * xi.powi(k as i32) })
            })
            .sum()
    }

    pub fn partial(&self, k: usize) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, &c) in &self.terms {
            if e[k] == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[k] -= 1;
            out.add_term(c * T::from_u32(e[k]).unwrap(), e2);
        }
        out
    }

    pub fn gradient(&self) -> Vec<Self> {
        (0..self.nvars).map(|k| self.partial(k)).collect()
    }

    pub fn scale(&self, s: T) -> Self {
        Self::from_terms(self.nvars, self.terms.iter().map(|(e, &c)| (c * s, e.clone())))
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (e, &c) in &other.terms {
            out.add_term(c, e.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-T::one()))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e1, &c1) in &self.terms {
            for (e2, &c2) in &other.terms {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                out.add_term(c1 * c2, e);
            }
        }
        out
    }

    /// Largest absolute coefficient.
    pub fn max_coeff(&self) -> T {
        self.terms.values().fold(T::zero(), |m, c| m.max(c.abs()))
    }

    /// Drops coefficients below `tol` in absolute value.
    pub fn pruned(&self, tol: T) -> Self {
        Self::from_terms(
            self.nvars,
            self.terms.iter().filter(|(_, c)| c.abs() > tol).map(|(e, &c)| (c, e.clone())),
        )
    }
}

/// Polynomial vector field with components Yⁱ(x).
pub type PolyField<T> = Vec<Poly<T>>;

pub fn eval_field<T: Scalar>(field: &[Poly<T>], x: &[T]) -> Vec<T> {
    field.iter().map(|p| p.eval(x)).collect()
}

/// Lie bracket [U, W]ⁱ = Uᵏ∂ₖWⁱ − Wᵏ∂ₖUⁱ.
pub fn bracket<T: Scalar>(u: &[Poly<T>], w: &[Poly<T>]) -> PolyField<T> {
    let n = u.len();
    (0..n)
        .map(|i| {
            let mut acc = Poly::zero(n);
            for k in 0..n {
                acc = acc.add(&u[k].mul(&w[i].partial(k)));
                acc = acc.sub(&w[k].mul(&u[i].partial(k)));
            }
            acc
        })
        .collect()
}

impl<T: Scalar> fmt::Display for Poly<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, &c) in self.terms.iter().rev() {
            let neg = c < T::zero();
            let mag = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { '-' } else { '+' })?;
            }
            first = false;
            let monomial: Vec<String> = e
                .iter()
                .enumerate()
                .filter(|(_, &k)| k > 0)
                .map(|(i, &k)| if k == 1 { format!("x{}", i + 1) } else { format!("x{}^{}", i + 1, k) })
                .collect();
            if monomial.is_empty() {
                write!(f, "{}", mag)?;
            } else if mag == T::one() {
                write!(f, "{}", monomial.join("*"))?;
            } else {
                write!(f, "{}*{}", mag, monomial.join("*"))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_and_eval() {
        // p = 3 x1^2 x2 - x2 + 2
        let p = Poly::<f64>::from_terms(2, [(3.0, vec![2, 1]), (-1.0, vec![0, 1]), (2.0, vec![0, 0])]);
        assert_eq!(p.eval(&[2.0, 1.0]), 13.0);
        assert_eq!(p.partial(0).eval(&[2.0, 1.0]), 12.0);
        assert_eq!(p.partial(1).eval(&[2.0, 5.0]), 11.0);
        assert_eq!(p.degree(), 3);
    }

    #[test]
    fn cancellation_removes_terms() {
        let x = Poly::<f64>::var(2, 0);
        assert!(x.sub(&x).is_zero());
    }

    #[test]
    fn rotation_dilation_commute() {
        let x = Poly::<f64>::var(2, 0);
        let y = Poly::<f64>::var(2, 1);
        let rot = vec![y.scale(-1.0), x.clone()];
        let dil = vec![x.clone(), y.clone()];
        let b = bracket(&rot, &dil);
        assert!(b.iter().all(Poly::is_zero));
    }

    #[test]
    fn rotation_with_diagonal_affine_gives_shear() {
        let x = Poly::<f64>::var(2, 0);
        let y = Poly::<f64>::var(2, 1);
        let rot = vec![y.scale(-1.0), x.clone()];
        let a1 = vec![x.clone(), Poly::zero(2)];
        let b = bracket(&rot, &a1);
        // [-y d_x + x d_y, x d_x] = -y d_x - x d_y
        assert_eq!(b[0], y.scale(-1.0));
        assert_eq!(b[1], x.scale(-1.0));
    }

    #[test]
    fn display_is_readable() {
        let p = Poly::<f64>::from_terms(2, [(0.5, vec![2, 0]), (-1.0, vec![0, 1])]);
        assert_eq!(p.to_string(), "0.5*x1^2 - x2");
    }
}
