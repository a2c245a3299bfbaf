//! Coefficient fields `a_0` (drift) and `a_1..a_m` (diffusion columns).
//!
//! Indexing follows the SDE: `k = 0` is the drift, `k = 1..=m` are the
//! columns multiplying `dw_k`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub trait CoefficientField {
    /// State dimension `d`.
    fn dim(&self) -> usize;

    /// Number of driving Wiener processes `m`.
    fn noise_dim(&self) -> usize;

    /// `out = a_k(x)`.
    fn eval(&self, k: usize, x: &[f64], out: &mut [f64]);

    /// Whether [`CoefficientField::jacobian`] is available for every `k = 0..=m`.
    fn has_gradients(&self) -> bool {
        false
    }

    /// `out = ∇a_k(x)`, `out[(i, j)] = ∂a_{k,i} / ∂x_j`.
    fn jacobian(&self, _k: usize, _x: &[f64], _out: &mut Matrix) -> Result<()> {
        Err(Error::MissingGradients)
    }
}

impl<C: CoefficientField + ?Sized> CoefficientField for &C {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn noise_dim(&self) -> usize {
        (**self).noise_dim()
    }
    fn eval(&self, k: usize, x: &[f64], out: &mut [f64]) {
        (**self).eval(k, x, out)
    }
    fn has_gradients(&self) -> bool {
        (**self).has_gradients()
    }
    fn jacobian(&self, k: usize, x: &[f64], out: &mut Matrix) -> Result<()> {
        (**self).jacobian(k, x, out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub exponents: Vec<u32>,
    pub coefficient: f64,
}

/// A multivariate polynomial `Σ c · x^e`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    dim: usize,
    terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn new(dim: usize, terms: Vec<Monomial>) -> Result<Self> {
        for t in &terms {
            if t.exponents.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: t.exponents.len() });
            }
            if !t.coefficient.is_finite() {
                return Err(Error::NonFinite);
            }
        }
        Ok(Polynomial { dim, terms })
    }

    pub fn zero(dim: usize) -> Self {
        Polynomial { dim, terms: Vec::new() }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Polynomial { dim, terms: vec![Monomial { exponents: vec![0; dim], coefficient: c }] }
    }

    /// `Σ_j c_j x_j + c_0`.
    pub fn affine(constant: f64, linear: &[f64]) -> Self {
        let dim = linear.len();
        let mut terms = vec![Monomial { exponents: vec![0; dim], coefficient: constant }];
        for (j, &c) in linear.iter().enumerate() {
            let mut e = vec![0; dim];
            e[j] = 1;
            terms.push(Monomial { exponents: e, coefficient: c });
        }
        terms.retain(|t| t.coefficient != 0.0);
        Polynomial { dim, terms }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coefficient * t.exponents.iter().zip(x).map(|(&e, &v)| powu(v, e)).product::<f64>())
            .sum()
    }

    /// Symbolic partial derivative `∂/∂x_j`.
    pub fn derivative(&self, j: usize) -> Polynomial {
        let terms = self
            .terms
            .iter()
            .filter(|t| t.exponents[j] > 0)
            .map(|t| {
                let mut exponents = t.exponents.clone();
                exponents[j] -= 1;
                Monomial { exponents, coefficient: t.coefficient * t.exponents[j] as f64 }
            })
            .collect();
        Polynomial { dim: self.dim, terms }
    }
}

fn powu(x: f64, e: u32) -> f64 {
    let mut acc = 1.0;
    for _ in 0..e {
        acc *= x;
    }
    acc
}

/// Coefficients given componentwise by polynomials, with exact symbolic Jacobians.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialField {
    dim: usize,
    m: usize,
    /// `components[k][i]` = i-th component of `a_k`.
    components: Vec<Vec<Polynomial>>,
    /// `gradients[k][i * dim + j] = ∂a_{k,i}/∂x_j`.
    gradients: Vec<Vec<Polynomial>>,
}

impl PolynomialField {
    /// `components[0]` is the drift, `components[k]` the k-th diffusion column.
    pub fn new(dim: usize, components: Vec<Vec<Polynomial>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter { name: "dim", reason: "must be at least 1" });
        }
        if components.len() < 2 {
            return Err(Error::InvalidParameter { name: "m", reason: "need a drift and at least one diffusion column" });
        }
        for column in &components {
            if column.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: column.len() });
            }
            if let Some(p) = column.iter().find(|p| p.dim() != dim) {
                return Err(Error::DimensionMismatch { expected: dim, found: p.dim() });
            }
        }
        let gradients = components
            .iter()
            .map(|column| column.iter().flat_map(|p| (0..dim).map(move |j| p.derivative(j))).collect())
            .collect();
        Ok(PolynomialField { dim, m: components.len() - 1, components, gradients })
    }

    pub fn component(&self, k: usize, i: usize) -> &Polynomial {
        &self.components[k][i]
    }
}

impl CoefficientField for PolynomialField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn noise_dim(&self) -> usize {
        self.m
    }

    fn eval(&self, k: usize, x: &[f64], out: &mut [f64]) {
        for (o, p) in out.iter_mut().zip(&self.components[k]) {
            *o = p.eval(x);
        }
    }

    fn has_gradients(&self) -> bool {
        true
    }

    fn jacobian(&self, k: usize, x: &[f64], out: &mut Matrix) -> Result<()> {
        let d = self.dim;
        if out.rows() != d || out.cols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: out.rows() });
        }
        for i in 0..d {
            for j in 0..d {
                out[(i, j)] = self.gradients[k][i * d + j].eval(x);
            }
        }
        Ok(())
    }
}

/// Built-in coefficient fields.
pub mod presets {
    use super::*;

    /// All coefficients zero: every particle stays put.
    pub fn frozen(dim: usize, m: usize) -> Result<PolynomialField> {
        PolynomialField::new(dim, vec![vec![Polynomial::zero(dim); dim]; m + 1])
    }

    /// Standard Brownian motion: `a_0 = 0`, `a_k = e_k`, `m = d`.
    pub fn brownian(dim: usize) -> Result<PolynomialField> {
        scaled_identity_noise(vec![Polynomial::zero(dim); dim], dim, 1.0)
    }

    /// `a_0(x) = A x` with `a_k = σ e_k`, `m = d`.
    pub fn linear_drift(a: &Matrix, noise_scale: f64) -> Result<PolynomialField> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch { expected: a.rows(), found: a.cols() });
        }
        let drift = (0..a.rows()).map(|i| Polynomial::affine(0.0, a.row(i))).collect();
        scaled_identity_noise(drift, a.rows(), noise_scale)
    }

    fn scaled_identity_noise(drift: Vec<Polynomial>, dim: usize, scale: f64) -> Result<PolynomialField> {
        if !scale.is_finite() {
            return Err(Error::NonFinite);
        }
        let mut components = vec![drift];
        for k in 0..dim {
            components.push((0..dim).map(|i| Polynomial::constant(dim, if i == k { scale } else { 0.0 })).collect());
        }
        PolynomialField::new(dim, components)
    }

    /// `d = m = 2`: `a_0 = 0`, `a_1 = (1, 1/2)`, `a_2 = (0, 1 + x_1/2 + x_2/4)`.
    ///
    /// `(a_{k,1}(x))_k = (1, 0)` and `(⟨∇a_{k,2}(x), y⟩)_k = (0, y_1/2 + y_2/4)`
    /// are linearly independent unless `y` is orthogonal to `(1/2, 1/4)`, and
    /// `Σ_k a_{k,2}² ≥ 1/4` everywhere.
    pub fn example2() -> PolynomialField {
        let components = vec![
            vec![Polynomial::zero(2), Polynomial::zero(2)],
            vec![Polynomial::constant(2, 1.0), Polynomial::constant(2, 0.5)],
            vec![Polynomial::zero(2), Polynomial::affine(1.0, &[0.5, 0.25])],
        ];
        PolynomialField::new(2, components).expect("example2 preset is well-formed")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_eval_and_derivative() {
        // p = 3 x^2 y - y + 2
        let p = Polynomial::new(
            2,
            vec![
                Monomial { exponents: vec![2, 1], coefficient: 3.0 },
                Monomial { exponents: vec![0, 1], coefficient: -1.0 },
                Monomial { exponents: vec![0, 0], coefficient: 2.0 },
            ],
        )
        .unwrap();
        assert_eq!(p.eval(&[2.0, 3.0]), 36.0 - 3.0 + 2.0);
        assert_eq!(p.derivative(0).eval(&[2.0, 3.0]), 36.0);
        assert_eq!(p.derivative(1).eval(&[2.0, 3.0]), 12.0 - 1.0);
        assert!(Polynomial::new(2, vec![Monomial { exponents: vec![1], coefficient: 1.0 }]).is_err());
    }

    #[test]
    fn linear_drift_jacobian_is_the_matrix() {
        let a = Matrix::from_rows(&[[-1.0, 0.5], [0.25, -2.0]]).unwrap();
        let f = presets::linear_drift(&a, 0.1).unwrap();
        assert_eq!(f.noise_dim(), 2);
        let mut out = [0.0; 2];
        f.eval(0, &[1.0, 2.0], &mut out);
        assert_eq!(out, [0.0, -3.75]);
        let mut j = Matrix::zeros(2, 2);
        f.jacobian(0, &[0.3, 0.7], &mut j).unwrap();
        assert_eq!(j, a);
        f.eval(2, &[5.0, 5.0], &mut out);
        assert_eq!(out, [0.0, 0.1]);
        f.jacobian(1, &[5.0, 5.0], &mut j).unwrap();
        assert_eq!(j, Matrix::zeros(2, 2));
    }

    #[test]
    fn brownian_columns() {
        let f = presets::brownian(3).unwrap();
        assert_eq!(f.noise_dim(), 3);
        let mut out = [0.0; 3];
        f.eval(2, &[1.0, 2.0, 3.0], &mut out);
        assert_eq!(out, [0.0, 1.0, 0.0]);
        f.eval(0, &[1.0, 2.0, 3.0], &mut out);
        assert_eq!(out, [0.0; 3]);
    }

    #[test]
    fn rejects_ragged_fields() {
        assert!(PolynomialField::new(2, vec![vec![Polynomial::zero(2); 2]]).is_err());
        assert!(PolynomialField::new(2, vec![vec![Polynomial::zero(2); 2], vec![Polynomial::zero(2)]]).is_err());
    }
}
