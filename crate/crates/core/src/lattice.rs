//! The Bruhat–Tits tree of `PGL2(Q_p)`: homothety classes of lattices,
//! neighbors, distances and the function `m_[L](j)`.

use std::collections::{HashSet, VecDeque};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Mat2;
use crate::padic::{check_prime, inv_mod, pow_big, val_int, val_rat, PAdicContext, Sign};
use crate::rational::ExactRational;

/// Default limit on the number of vertices a ball enumeration may produce.
pub const DEFAULT_BALL_CAP: u128 = 1_000_000;

/// A half-integer stored as twice its value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HalfInteger {
    pub doubled: i64,
}

impl HalfInteger {
    pub fn from_doubled(doubled: i64) -> Self {
        Self { doubled }
    }

    pub fn from_int(n: i64) -> Self {
        Self { doubled: 2 * n }
    }

    pub fn is_integer(self) -> bool {
        self.doubled % 2 == 0
    }

    pub fn to_rational(self) -> ExactRational {
        ExactRational::new(self.doubled, 2)
    }
}

impl fmt::Display for HalfInteger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.doubled / 2)
        } else {
            write!(f, "{}/2", self.doubled)
        }
    }
}

/// A traceless matrix `[[a, b], [c, -a]]` with `q = a^2 + bc = -det` a nonzero
/// element of `Z_p`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SpecialEndomorphism {
    p: u64,
    a: ExactRational,
    b: ExactRational,
    c: ExactRational,
    q: ExactRational,
    alpha: u32,
    epsilon_class: Sign,
    // D*(a, b, c) for a common denominator D, and ord_p(D).
    ia: BigInt,
    ib: BigInt,
    ic: BigInt,
    shift: i64,
}

impl SpecialEndomorphism {
    pub fn new(p: u64, a: ExactRational, b: ExactRational, c: ExactRational) -> Result<Self> {
        check_prime(p)?;
        let q = &a * &a + &b * &c;
        if q.is_zero() {
            return Err(Error::DegenerateEndomorphism);
        }
        let ctx = PAdicContext::new(p, 1)?;
        let alpha = ctx.valuation(&q)?;
        if alpha < 0 {
            return Err(Error::NonIntegralNorm(q.to_string()));
        }
        let epsilon_class = ctx.chi_unit_part(&q)?;
        let den = a.denom().lcm(b.denom()).lcm(c.denom());
        let scale = |x: &ExactRational| x.numer() * (&den / x.denom());
        let shift = val_int(&den, p).unwrap() as i64;
        Ok(Self {
            p,
            ia: scale(&a),
            ib: scale(&b),
            ic: scale(&c),
            shift,
            a,
            b,
            c,
            q,
            alpha: alpha as u32,
            epsilon_class,
        })
    }

    pub fn from_ints(p: u64, a: i64, b: i64, c: i64) -> Result<Self> {
        Self::new(p, a.into(), b.into(), c.into())
    }

    pub fn from_matrix(p: u64, m: &Mat2) -> Result<Self> {
        if !m.trace().is_zero() {
            return Err(Error::NotTraceless);
        }
        Self::new(p, m.get(0, 0).clone(), m.get(0, 1).clone(), m.get(1, 0).clone())
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn a(&self) -> &ExactRational {
        &self.a
    }

    pub fn b(&self) -> &ExactRational {
        &self.b
    }

    pub fn c(&self) -> &ExactRational {
        &self.c
    }

    /// `q(j) = -det(j)`.
    pub fn q(&self) -> &ExactRational {
        &self.q
    }

    pub fn alpha(&self) -> u32 {
        self.alpha
    }

    /// `chi` of the unit part of `q(j)`.
    pub fn epsilon_class(&self) -> Sign {
        self.epsilon_class
    }

    pub fn matrix(&self) -> Mat2 {
        Mat2::new(self.a.clone(), self.b.clone(), self.c.clone(), -&self.a)
    }

    /// `g j g^-1`.
    pub fn conjugate(&self, g: &Mat2) -> Result<Self> {
        Self::from_matrix(self.p, &self.matrix().conjugate_by(g)?)
    }

    pub fn scaled(&self, s: &ExactRational) -> Result<Self> {
        Self::new(self.p, &self.a * s, &self.b * s, &self.c * s)
    }

    /// Half the trace form: `a a' + (b c' + c b')/2`.
    pub fn inner(&self, other: &SpecialEndomorphism) -> ExactRational {
        &self.a * &other.a + (&self.b * &other.c + &self.c * &other.b) / 2
    }

    pub fn anticommutes_with(&self, other: &SpecialEndomorphism) -> bool {
        let (x, y) = (self.matrix(), other.matrix());
        (&(&x * &y) + &(&y * &x)).is_zero()
    }
}

impl fmt::Display for SpecialEndomorphism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.matrix())
    }
}

impl fmt::Debug for SpecialEndomorphism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SpecialEndomorphism(p={}, {})", self.p, self.matrix())
    }
}

impl Serialize for SpecialEndomorphism {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.matrix().serialize(s)
    }
}

/// A vertex of the tree: the class of the lattice spanned by the columns of
/// `[[p^m, x], [0, 1]]`, with `x = r / p^k` reduced modulo `p^m Z_p`
/// (`0 <= r < p^(m+k)`, `k` minimal).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticeVertex {
    p: u64,
    m: i64,
    k: u32,
    r: BigInt,
}

impl LatticeVertex {
    /// The standard vertex `[Z_p e1 + Z_p e2]`.
    pub fn standard(p: u64) -> Self {
        Self { p, m: 0, k: 0, r: BigInt::zero() }
    }

    /// Class of `[[p^m, num/p^k], [0, 1]]` for any integer `num`.
    fn normalized(p: u64, m: i64, num: BigInt, k: i64) -> Self {
        debug_assert!(k >= 0);
        if m + k <= 0 {
            return Self { p, m, k: 0, r: BigInt::zero() };
        }
        let mut r = num.mod_floor(&pow_big(p, (m + k) as u32));
        let mut k = k;
        let pb = BigInt::from(p);
        while k > 0 && !r.is_zero() {
            let (qt, rem) = r.div_rem(&pb);
            if !rem.is_zero() {
                break;
            }
            r = qt;
            k -= 1;
        }
        if r.is_zero() {
            k = 0;
        }
        Self { p, m, k: k as u32, r }
    }

    /// Class of `[[p^m, x], [0, 1]]`.
    pub fn new(p: u64, m: i64, x: &ExactRational) -> Result<Self> {
        check_prime(p)?;
        Ok(Self::from_column_data(p, m, x))
    }

    fn from_column_data(p: u64, m: i64, x: &ExactRational) -> Self {
        if x.is_zero() {
            return Self { p, m, k: 0, r: BigInt::zero() };
        }
        let e = val_int(x.denom(), p).unwrap() as i64;
        let unit_den = x.denom() / pow_big(p, e as u32);
        if m + e <= 0 {
            return Self { p, m, k: 0, r: BigInt::zero() };
        }
        let modulus = pow_big(p, (m + e) as u32);
        let inv = inv_mod(&unit_den, &modulus).expect("prime-to-p denominator");
        Self::normalized(p, m, x.numer() * inv, e)
    }

    /// Class of the lattice spanned by the columns of `basis`.
    pub fn from_basis(p: u64, basis: &Mat2) -> Result<Self> {
        check_prime(p)?;
        if basis.det().is_zero() {
            return Err(Error::DegenerateForm);
        }
        let [[n11, n12], [n21, n22]] = basis.0.clone();
        // Put the entry of least valuation in the bottom row into column 2.
        let v = |x: &ExactRational| val_rat(x, p).unwrap_or(i64::MAX);
        let (c1, c2) = if v(&n21) < v(&n22) {
            ((n12, n22), (n11, n21))
        } else {
            ((n11, n21), (n12, n22))
        };
        let t = &c1.1 / &c2.1;
        let top_left = &c1.0 - &t * &c2.0;
        let x = &c2.0 / &c2.1;
        let m = val_rat(&(&top_left / &c2.1), p).unwrap();
        Ok(Self::from_column_data(p, m, &x))
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn m(&self) -> i64 {
        self.m
    }

    /// The reduced offset `x`.
    pub fn x(&self) -> ExactRational {
        ExactRational::new(self.r.clone(), pow_big(self.p, self.k))
    }

    /// The normalized basis matrix `[[p^m, x], [0, 1]]`.
    pub fn basis(&self) -> Mat2 {
        Mat2::new(
            ExactRational::prime_power(self.p, self.m),
            self.x(),
            ExactRational::zero(),
            ExactRational::one(),
        )
    }

    /// The class `g . [L]`.
    pub fn act(&self, g: &Mat2) -> Result<Self> {
        Self::from_basis(self.p, &(g * &self.basis()))
    }

    /// The `p+1` adjacent classes.
    pub fn neighbors(&self) -> Vec<LatticeVertex> {
        let p = self.p;
        let mut out = Vec::with_capacity(p as usize + 1);
        out.push(Self::normalized(p, self.m - 1, self.r.clone(), self.k as i64));
        // x + i p^m over the common denominator p^K
        let kk = (self.k as i64).max(-self.m);
        let base = &self.r * pow_big(p, (kk - self.k as i64) as u32);
        let step = pow_big(p, (self.m + kk) as u32);
        for i in 0..p {
            out.push(Self::normalized(p, self.m + 1, &base + &step * i, kk));
        }
        out
    }

    /// `ord_p(y - x)` where `y` is the offset of `other`, or `None` if equal.
    fn offset_val(&self, other: &LatticeVertex) -> Option<i64> {
        let kk = self.k.max(other.k);
        let a = &self.r * pow_big(self.p, kk - self.k);
        let b = &other.r * pow_big(self.p, kk - other.k);
        val_int(&(b - a), self.p).map(|v| v as i64 - kk as i64)
    }

    /// Graph distance, from the elementary divisors of `M1^-1 M2`.
    pub fn distance(&self, other: &LatticeVertex) -> u64 {
        let dm = other.m - self.m;
        let mut f = dm.min(0);
        if let Some(v) = self.offset_val(other) {
            f = f.min(v - self.m);
        }
        (dm - 2 * f) as u64
    }

    /// Ball of radius `radius`, each vertex once, in breadth-first order.
    pub fn ball(&self, radius: u32, cap: u128) -> Result<Vec<LatticeVertex>> {
        let needed = ball_size(self.p, radius);
        if needed > cap {
            return Err(Error::Resource { what: "ball vertices", needed, limit: cap });
        }
        let mut seen: HashSet<LatticeVertex> = HashSet::with_capacity(needed as usize);
        let mut order = Vec::with_capacity(needed as usize);
        let mut queue = VecDeque::new();
        seen.insert(self.clone());
        queue.push_back((self.clone(), 0u32));
        while let Some((v, d)) = queue.pop_front() {
            if d < radius {
                for w in v.neighbors() {
                    if seen.insert(w.clone()) {
                        queue.push_back((w, d + 1));
                    }
                }
            }
            order.push(v);
        }
        Ok(order)
    }
}

/// `1 + (p+1)(p^R - 1)/(p-1)`.
pub fn ball_size(p: u64, radius: u32) -> u128 {
    let p = p as u128;
    let mut pr: u128 = 1;
    for _ in 0..radius {
        pr = pr.saturating_mul(p);
    }
    1 + (p + 1).saturating_mul((pr - 1) / (p - 1))
}

pub fn ball_enumerate(center: &LatticeVertex, radius: u32) -> Result<Vec<LatticeVertex>> {
    center.ball(radius, DEFAULT_BALL_CAP)
}

impl fmt::Display for LatticeVertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}^{},{}],[0,1]]", self.p, self.m, self.x())
    }
}

impl fmt::Debug for LatticeVertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for LatticeVertex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("LatticeVertex", 2)?;
        st.serialize_field("m", &self.m)?;
        st.serialize_field("x", &self.x())?;
        st.end()
    }
}

#[derive(Deserialize)]
struct VertexRepr {
    m: i64,
    x: ExactRational,
}

impl LatticeVertex {
    /// Inverse of the JSON form `{m, x}`.
    pub fn from_json(p: u64, value: &serde_json::Value) -> Result<Self> {
        let repr: VertexRepr =
            serde_json::from_value(value.clone()).map_err(|e| Error::Parse(e.to_string()))?;
        Self::new(p, repr.m, &repr.x)
    }
}

/// Largest `r` with `j(L) ⊆ p^r L`: the minimal valuation of the entries of
/// `M^-1 j M`.
pub fn m_of(j: &SpecialEndomorphism, v: &LatticeVertex) -> i64 {
    debug_assert_eq!(j.p, v.p);
    let p = v.p;
    let k = v.k;
    let r = &v.r;
    let pk = pow_big(p, k);
    let pos = |x: &BigInt| val_int(x, p).map(|e| e as i64);
    let mut best = i64::MAX;
    // lower-left: c p^m
    if let Some(e) = pos(&j.ic) {
        best = best.min(e + v.m);
    }
    // diagonal: a - c x
    if let Some(e) = pos(&(&j.ia * &pk - &j.ic * r)) {
        best = best.min(e - k as i64);
    }
    // upper-right: (b + 2 a x - c x^2) / p^m
    let num = &j.ib * &pk * &pk + BigInt::from(2) * &j.ia * r * &pk - &j.ic * r * r;
    if let Some(e) = pos(&num) {
        best = best.min(e - 2 * k as i64 - v.m);
    }
    best - j.shift
}

/// `alpha/2 - m_[L](j)`, the distance from `[L]` to the fixed locus of `j`.
pub fn dist_to_fixed_locus(j: &SpecialEndomorphism, v: &LatticeVertex) -> HalfInteger {
    HalfInteger::from_doubled(j.alpha as i64 - 2 * m_of(j, v))
}

/// Index `[L : j L]` exponent check: whether `j(L) ⊆ L`.
pub fn preserves(j: &SpecialEndomorphism, v: &LatticeVertex) -> bool {
    m_of(j, v) >= 0
}

/// Whether every entry of a matrix is `p`-integral.
pub fn is_integral(m: &Mat2, p: u64) -> bool {
    m.entries().all(|x| x.is_zero() || val_rat(x, p).unwrap() >= 0)
}

/// Matrix of `j` in the normalized basis of `v`.
pub fn adapted(j: &SpecialEndomorphism, v: &LatticeVertex) -> Mat2 {
    let b = v.basis();
    &(&b.inverse().expect("basis is invertible") * &j.matrix()) * &b
}

/// Elementary divisor exponents `(e, f)`, `e >= f`, of an invertible rational
/// matrix.
pub fn elementary_divisors(m: &Mat2, p: u64) -> Result<(i64, i64)> {
    let det = m.det();
    let vd = val_rat(&det, p).ok_or(Error::DegenerateForm)?;
    let f = m
        .entries()
        .filter(|x| !x.is_zero())
        .map(|x| val_rat(x, p).unwrap())
        .min()
        .unwrap();
    Ok((vd - f, f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn v(p: u64, m: i64, x: ExactRational) -> LatticeVertex {
        LatticeVertex::new(p, m, &x).unwrap()
    }

    fn class_of(p: u64, a: i64, b: i64, c: i64, d: i64) -> LatticeVertex {
        LatticeVertex::from_basis(p, &Mat2::from_ints(a, b, c, d)).unwrap()
    }

    #[test]
    fn neighbors_of_standard_p3() {
        let o = LatticeVertex::standard(3);
        let n: HashSet<_> = o.neighbors().into_iter().collect();
        assert_eq!(n.len(), 4);
        for x in 0..3 {
            assert!(n.contains(&class_of(3, 3, x, 0, 1)));
        }
        assert!(n.contains(&class_of(3, 1, 0, 0, 3)));
        assert!(!n.contains(&o));
        assert_eq!(LatticeVertex::standard(5).neighbors().len(), 6);
    }

    #[test]
    fn normal_form_is_unique() {
        // same lattice, different bases
        assert_eq!(class_of(3, 3, 1, 0, 1), class_of(3, 3, 4, 0, 1));
        assert_eq!(class_of(3, 3, 1, 0, 1), class_of(3, 6, 2, 0, 2));
        assert_eq!(class_of(3, 1, 0, 0, 1), class_of(3, 0, 1, 1, 0));
        assert_eq!(class_of(5, 1, 0, 0, 5), v(5, -1, q(0, 1)));
        assert_eq!(v(3, -1, q(1, 3)), v(3, -1, q(0, 1)));
        assert_eq!(v(3, 1, q(1, 3)).x(), q(1, 3));
        assert_eq!(v(3, 0, q(1, 2)), v(3, 0, q(0, 1)));
        assert_eq!(v(3, 2, q(1, 2)).x(), q(5, 1));
    }

    #[test]
    fn distance_examples() {
        let o = LatticeVertex::standard(3);
        assert_eq!(o.distance(&o), 0);
        assert_eq!(o.distance(&class_of(3, 3, 0, 0, 1)), 1);
        assert_eq!(o.distance(&class_of(3, 9, 0, 0, 1)), 2);
        assert_eq!(class_of(3, 3, 1, 0, 1).distance(&class_of(3, 3, 2, 0, 1)), 2);
        assert_eq!(class_of(3, 9, 1, 0, 1).distance(&class_of(3, 1, 0, 0, 3)), 3);
    }

    #[test]
    fn distance_matches_elementary_divisors() {
        let p = 3;
        let o = LatticeVertex::standard(p);
        let ball = o.ball(3, DEFAULT_BALL_CAP).unwrap();
        for a in ball.iter().step_by(7) {
            for b in ball.iter().step_by(5) {
                let m = &a.basis().inverse().unwrap() * &b.basis();
                let (e, f) = elementary_divisors(&m, p).unwrap();
                assert_eq!(a.distance(b), (e - f) as u64);
            }
        }
    }

    #[test]
    fn m_of_examples() {
        let o = LatticeVertex::standard(3);
        let j = SpecialEndomorphism::from_ints(3, 3, 0, 0).unwrap();
        assert_eq!(m_of(&j, &o), 1);
        let j = SpecialEndomorphism::from_ints(3, 0, 2, 1).unwrap();
        assert_eq!(m_of(&j, &o), 0);
        let l = class_of(3, 3, 0, 0, 1);
        assert_eq!(m_of(&j, &l), -1);
    }

    #[test]
    fn m_of_matches_adapted_matrix() {
        let p = 5;
        let j = SpecialEndomorphism::from_ints(p, 3, 10, -7).unwrap();
        for w in LatticeVertex::standard(p).ball(3, DEFAULT_BALL_CAP).unwrap() {
            let (_, f) = elementary_divisors(&adapted(&j, &w), p).unwrap();
            assert_eq!(m_of(&j, &w), f);
        }
    }

    #[test]
    fn fixed_locus_distance_examples() {
        let o = LatticeVertex::standard(3);
        let j = SpecialEndomorphism::from_ints(3, 1, 0, 0).unwrap();
        assert_eq!(dist_to_fixed_locus(&j, &o), HalfInteger::from_int(0));
        let j = SpecialEndomorphism::from_ints(3, 0, 2, 1).unwrap();
        assert_eq!(dist_to_fixed_locus(&j, &class_of(3, 3, 0, 0, 1)), HalfInteger::from_int(1));
        let j = SpecialEndomorphism::from_ints(3, 0, 3, 1).unwrap();
        assert_eq!(dist_to_fixed_locus(&j, &o), HalfInteger::from_doubled(1));
        assert_eq!(dist_to_fixed_locus(&j, &o).to_string(), "1/2");
    }

    #[test]
    fn ball_sizes() {
        let o = LatticeVertex::standard(3);
        assert_eq!(o.ball(0, DEFAULT_BALL_CAP).unwrap().len(), 1);
        assert_eq!(o.ball(2, DEFAULT_BALL_CAP).unwrap().len(), 17);
        assert_eq!(ball_enumerate(&LatticeVertex::standard(5), 1).unwrap().len(), 7);
        assert_eq!(ball_size(3, 2), 17);
        assert!(matches!(o.ball(20, DEFAULT_BALL_CAP), Err(Error::Resource { .. })));
        let off = v(3, -2, q(0, 1));
        let ball = off.ball(3, DEFAULT_BALL_CAP).unwrap();
        assert_eq!(ball.len() as u128, ball_size(3, 3));
        assert!(ball.iter().all(|w| off.distance(w) <= 3));
    }

    #[test]
    fn rejects_degenerate() {
        assert_eq!(
            SpecialEndomorphism::from_ints(3, 0, 1, 0).unwrap_err(),
            Error::DegenerateEndomorphism
        );
        assert!(matches!(
            SpecialEndomorphism::new(3, q(1, 3), q(0, 1), q(0, 1)),
            Err(Error::NonIntegralNorm(_))
        ));
        assert_eq!(
            SpecialEndomorphism::from_matrix(3, &Mat2::from_ints(1, 0, 0, 1)).unwrap_err(),
            Error::NotTraceless
        );
    }
}
