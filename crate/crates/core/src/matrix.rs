//! 2×2 matrices over exact rationals.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::ExactRational;

/// Row-major `[[a, b], [c, d]]`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mat2(pub [[ExactRational; 2]; 2]);

impl Mat2 {
    pub fn new(a: ExactRational, b: ExactRational, c: ExactRational, d: ExactRational) -> Self {
        Mat2([[a, b], [c, d]])
    }

    pub fn from_ints(a: i64, b: i64, c: i64, d: i64) -> Self {
        Self::new(a.into(), b.into(), c.into(), d.into())
    }

    pub fn identity() -> Self {
        Self::from_ints(1, 0, 0, 1)
    }

    pub fn zero() -> Self {
        Self::from_ints(0, 0, 0, 0)
    }

    pub fn diag(a: ExactRational, d: ExactRational) -> Self {
        Self::new(a, ExactRational::zero(), ExactRational::zero(), d)
    }

    pub fn get(&self, i: usize, j: usize) -> &ExactRational {
        &self.0[i][j]
    }

    pub fn det(&self) -> ExactRational {
        &self.0[0][0] * &self.0[1][1] - &self.0[0][1] * &self.0[1][0]
    }

    pub fn trace(&self) -> ExactRational {
        &self.0[0][0] + &self.0[1][1]
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        Self::new(m[0][0].clone(), m[1][0].clone(), m[0][1].clone(), m[1][1].clone())
    }

    pub fn scale(&self, s: &ExactRational) -> Self {
        let m = &self.0;
        Self::new(&m[0][0] * s, &m[0][1] * s, &m[1][0] * s, &m[1][1] * s)
    }

    pub fn inverse(&self) -> Result<Self> {
        let d = self.det();
        if d.is_zero() {
            return Err(Error::DegenerateForm);
        }
        let m = &self.0;
        let inv = d.recip();
        Ok(Self::new(
            &m[1][1] * &inv,
            -(&m[0][1] * &inv),
            -(&m[1][0] * &inv),
            &m[0][0] * &inv,
        ))
    }

    /// `g * self * g^-1`.
    pub fn conjugate_by(&self, g: &Mat2) -> Result<Self> {
        Ok(&(g * self) * &g.inverse()?)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().flatten().all(|x| x.is_zero())
    }

    pub fn entries(&self) -> impl Iterator<Item = &ExactRational> {
        self.0.iter().flatten()
    }
}

impl fmt::Display for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = &self.0;
        write!(f, "[[{},{}],[{},{}]]", m[0][0], m[0][1], m[1][0], m[1][1])
    }
}

impl fmt::Debug for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl<'a> Mul<&'a Mat2> for &'a Mat2 {
    type Output = Mat2;
    fn mul(self, rhs: &'a Mat2) -> Mat2 {
        let (a, b) = (&self.0, &rhs.0);
        let e = |i: usize, j: usize| &a[i][0] * &b[0][j] + &a[i][1] * &b[1][j];
        Mat2([[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]])
    }
}

impl<'a> Add<&'a Mat2> for &'a Mat2 {
    type Output = Mat2;
    fn add(self, rhs: &'a Mat2) -> Mat2 {
        let (a, b) = (&self.0, &rhs.0);
        let e = |i: usize, j: usize| &a[i][j] + &b[i][j];
        Mat2([[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]])
    }
}

impl<'a> Sub<&'a Mat2> for &'a Mat2 {
    type Output = Mat2;
    fn sub(self, rhs: &'a Mat2) -> Mat2 {
        let (a, b) = (&self.0, &rhs.0);
        let e = |i: usize, j: usize| &a[i][j] - &b[i][j];
        Mat2([[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]])
    }
}

impl Neg for &Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        self.scale(&ExactRational::from(-1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_roundtrip() {
        let g = Mat2::from_ints(2, 3, 1, 5);
        let gi = g.inverse().unwrap();
        assert_eq!(&g * &gi, Mat2::identity());
        assert!(Mat2::from_ints(1, 2, 2, 4).inverse().is_err());
    }

    #[test]
    fn conjugation_keeps_det_and_trace() {
        let j = Mat2::from_ints(1, 2, 3, -1);
        let g = Mat2::from_ints(3, 1, 0, 1);
        let c = j.conjugate_by(&g).unwrap();
        assert_eq!(c.det(), j.det());
        assert_eq!(c.trace(), j.trace());
    }
}
