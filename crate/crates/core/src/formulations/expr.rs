//! Real quadratic expressions and their complex counterparts.
//!
//! Complex quantities are pairs of real expressions; products follow
//! `(a + jb)(c + jd) = (ac - bd) + j(ad + bc)`.

use std::collections::BTreeMap;
use std::ops::{Add, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients smaller than this are dropped when an expression is canonicalized.
const COEFF_FLOOR: f64 = 1e-18;

/// `sum quad[k].2 * x_i * x_j + sum lin[k].1 * x_k + constant`, with `i <= j`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QuadExpr {
    pub quad: Vec<(usize, usize, f64)>,
    pub lin: Vec<(usize, f64)>,
    pub constant: f64,
}

impl QuadExpr {
    pub fn constant(c: f64) -> Self {
        QuadExpr { constant: c, ..Default::default() }
    }

    pub fn var(i: usize) -> Self {
        QuadExpr { lin: vec![(i, 1.0)], ..Default::default() }
    }

    fn from_maps(quad: BTreeMap<(usize, usize), f64>, lin: BTreeMap<usize, f64>, constant: f64) -> Self {
        QuadExpr {
            quad: quad.into_iter().filter(|(_, v)| v.abs() > COEFF_FLOOR).map(|((i, j), v)| (i, j, v)).collect(),
            lin: lin.into_iter().filter(|(_, v)| v.abs() > COEFF_FLOOR).collect(),
            constant,
        }
    }

    fn maps(&self) -> (BTreeMap<(usize, usize), f64>, BTreeMap<usize, f64>) {
        let mut q = BTreeMap::new();
        for &(i, j, v) in &self.quad {
            *q.entry((i, j)).or_insert(0.0) += v;
        }
        let mut l = BTreeMap::new();
        for &(i, v) in &self.lin {
            *l.entry(i).or_insert(0.0) += v;
        }
        (q, l)
    }

    pub fn degree(&self) -> u8 {
        if !self.quad.is_empty() {
            2
        } else if !self.lin.is_empty() {
            1
        } else {
            0
        }
    }

    pub fn is_zero(&self) -> bool {
        self.degree() == 0 && self.constant == 0.0
    }

    pub fn scale(&self, a: f64) -> Self {
        if a == 0.0 {
            return QuadExpr::default();
        }
        QuadExpr {
            quad: self.quad.iter().map(|&(i, j, v)| (i, j, a * v)).collect(),
            lin: self.lin.iter().map(|&(i, v)| (i, a * v)).collect(),
            constant: a * self.constant,
        }
    }

    pub fn add_scaled(&self, other: &QuadExpr, a: f64) -> Self {
        let (mut q, mut l) = self.maps();
        for &(i, j, v) in &other.quad {
            *q.entry((i, j)).or_insert(0.0) += a * v;
        }
        for &(i, v) in &other.lin {
            *l.entry(i).or_insert(0.0) += a * v;
        }
        QuadExpr::from_maps(q, l, self.constant + a * other.constant)
    }

    /// Product of two expressions of degree at most one each.
    pub fn mul(&self, other: &QuadExpr) -> Result<Self> {
        if self.degree() + other.degree() > 2 {
            return Err(Error::Unsupported(format!(
                "product of degree {} and degree {} expressions",
                self.degree(),
                other.degree()
            )));
        }
        if self.degree() == 2 {
            return Ok(self.scale(other.constant));
        }
        if other.degree() == 2 {
            return Ok(other.scale(self.constant));
        }
        let mut q = BTreeMap::new();
        for &(i, a) in &self.lin {
            for &(j, b) in &other.lin {
                let key = if i <= j { (i, j) } else { (j, i) };
                *q.entry(key).or_insert(0.0) += a * b;
            }
        }
        let mut l = BTreeMap::new();
        for &(i, a) in &self.lin {
            *l.entry(i).or_insert(0.0) += a * other.constant;
        }
        for &(j, b) in &other.lin {
            *l.entry(j).or_insert(0.0) += self.constant * b;
        }
        Ok(QuadExpr::from_maps(q, l, self.constant * other.constant))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let q: f64 = self.quad.iter().map(|&(i, j, v)| v * x[i] * x[j]).sum();
        let l: f64 = self.lin.iter().map(|&(i, v)| v * x[i]).sum();
        q + l + self.constant
    }

    /// Adds `scale * grad(x)` into `out`.
    pub fn add_gradient(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        for &(i, v) in &self.lin {
            out[i] += scale * v;
        }
        for &(i, j, v) in &self.quad {
            if i == j {
                out[i] += scale * 2.0 * v * x[i];
            } else {
                out[i] += scale * v * x[j];
                out[j] += scale * v * x[i];
            }
        }
    }

    /// Adds `scale * hessian` into `out`.
    pub fn add_hessian(&self, scale: f64, out: &mut DMatrix<f64>) {
        for &(i, j, v) in &self.quad {
            if i == j {
                out[(i, i)] += scale * 2.0 * v;
            } else {
                out[(i, j)] += scale * v;
                out[(j, i)] += scale * v;
            }
        }
    }

    pub fn variables(&self) -> impl Iterator<Item = usize> + '_ {
        self.lin.iter().map(|&(i, _)| i).chain(self.quad.iter().flat_map(|&(i, j, _)| [i, j]))
    }
}

/// Complex expression of degree at most two over real variables.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ComplexExpr {
    pub re: QuadExpr,
    pub im: QuadExpr,
}

impl ComplexExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Complex64) -> Self {
        ComplexExpr { re: QuadExpr::constant(c.re), im: QuadExpr::constant(c.im) }
    }

    pub fn var(re: usize, im: usize) -> Self {
        ComplexExpr { re: QuadExpr::var(re), im: QuadExpr::var(im) }
    }

    /// A complex quantity whose imaginary part is structurally zero.
    pub fn real_var(re: usize) -> Self {
        ComplexExpr { re: QuadExpr::var(re), im: QuadExpr::default() }
    }

    pub fn degree(&self) -> u8 {
        self.re.degree().max(self.im.degree())
    }

    pub fn conj(&self) -> Self {
        ComplexExpr { re: self.re.clone(), im: self.im.scale(-1.0) }
    }

    pub fn scale(&self, z: Complex64) -> Self {
        ComplexExpr {
            re: self.re.scale(z.re).add_scaled(&self.im, -z.im),
            im: self.im.scale(z.re).add_scaled(&self.re, z.im),
        }
    }

    pub fn mul(&self, other: &ComplexExpr) -> Result<Self> {
        let rr = self.re.mul(&other.re)?;
        let ii = self.im.mul(&other.im)?;
        let ri = self.re.mul(&other.im)?;
        let ir = self.im.mul(&other.re)?;
        Ok(ComplexExpr { re: rr.add_scaled(&ii, -1.0), im: ri.add_scaled(&ir, 1.0) })
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        Complex64::new(self.re.eval(x), self.im.eval(x))
    }
}

impl Add<&ComplexExpr> for ComplexExpr {
    type Output = ComplexExpr;
    fn add(self, rhs: &ComplexExpr) -> ComplexExpr {
        ComplexExpr { re: self.re.add_scaled(&rhs.re, 1.0), im: self.im.add_scaled(&rhs.im, 1.0) }
    }
}

impl Sub<&ComplexExpr> for ComplexExpr {
    type Output = ComplexExpr;
    fn sub(self, rhs: &ComplexExpr) -> ComplexExpr {
        ComplexExpr { re: self.re.add_scaled(&rhs.re, -1.0), im: self.im.add_scaled(&rhs.im, -1.0) }
    }
}

impl Neg for ComplexExpr {
    type Output = ComplexExpr;
    fn neg(self) -> ComplexExpr {
        ComplexExpr { re: self.re.scale(-1.0), im: self.im.scale(-1.0) }
    }
}

impl std::iter::Sum for ComplexExpr {
    fn sum<I: Iterator<Item = ComplexExpr>>(iter: I) -> ComplexExpr {
        iter.fold(ComplexExpr::zero(), |acc, e| acc + &e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    /// `expr = 0`
    Eq,
    /// `expr <= 0`
    Le,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub label: String,
    pub expr: QuadExpr,
    pub relation: Relation,
}

impl Constraint {
    pub fn eq(label: impl Into<String>, expr: QuadExpr) -> Self {
        Constraint { label: label.into(), expr, relation: Relation::Eq }
    }

    pub fn le(label: impl Into<String>, expr: QuadExpr) -> Self {
        Constraint { label: label.into(), expr, relation: Relation::Le }
    }

    /// `0 = 0`: no variables and a zero constant.
    pub fn is_removable(&self) -> bool {
        self.expr.is_zero()
    }

    /// Signed residual; positive values of an inequality are violations.
    pub fn residual(&self, x: &[f64]) -> f64 {
        self.expr.eval(x)
    }
}

/// Real and imaginary parts of a complex equality `expr = 0`.
pub fn realify(expr: &ComplexExpr, label: &str) -> Result<[Constraint; 2]> {
    if expr.degree() > 2 {
        return Err(Error::Unsupported(format!("{label}: degree above two")));
    }
    Ok([Constraint::eq(format!("{label}.re"), expr.re.clone()), Constraint::eq(format!("{label}.im"), expr.im.clone())])
}
