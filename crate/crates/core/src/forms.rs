//! Binary forms over `Z_(p)`: diagonal invariants, `mu_p`, realizability by
//! anticommuting pairs and explicit realizations.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::SpecialEndomorphism;
use crate::matrix::Mat2;
use crate::padic::{check_prime, val_rat, PAdicContext, Sign};
use crate::rational::ExactRational;

/// Which quadratic form a Gram matrix was built with: `q = -det` on traceless
/// matrices, or `Q` = reduced norm = `-q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Convention {
    #[serde(rename = "q")]
    SmallQ,
    #[serde(rename = "Q")]
    BigQ,
}

impl Convention {
    pub fn flipped(self) -> Self {
        match self {
            Convention::SmallQ => Convention::BigQ,
            Convention::BigQ => Convention::SmallQ,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Convention::SmallQ => "q",
            Convention::BigQ => "Q",
        }
    }

    pub fn expect(self, expected: Convention) -> Result<()> {
        if self != expected {
            return Err(Error::ConventionMismatch {
                expected: expected.name(),
                found: self.name(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for Convention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Symmetric `[[t11, t12], [t12, t22]]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinaryForm {
    pub t11: ExactRational,
    pub t12: ExactRational,
    pub t22: ExactRational,
    pub convention: Convention,
}

impl BinaryForm {
    pub fn new(
        t11: ExactRational,
        t12: ExactRational,
        t22: ExactRational,
        convention: Convention,
    ) -> Self {
        Self { t11, t12, t22, convention }
    }

    pub fn from_ints(t11: i64, t12: i64, t22: i64, convention: Convention) -> Self {
        Self::new(t11.into(), t12.into(), t22.into(), convention)
    }

    pub fn diag(d1: i64, d2: i64, convention: Convention) -> Self {
        Self::from_ints(d1, 0, d2, convention)
    }

    /// Parses `"t11,t12,t22"`.
    pub fn parse(s: &str, convention: Convention) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!(
                "form must be \"t11,t12,t22\", got {s:?}"
            )));
        }
        let e = |i: usize| ExactRational::from_str(parts[i]);
        Ok(Self::new(e(0)?, e(1)?, e(2)?, convention))
    }

    pub fn det(&self) -> ExactRational {
        &self.t11 * &self.t22 - &self.t12 * &self.t12
    }

    pub fn matrix(&self) -> Mat2 {
        Mat2::new(self.t11.clone(), self.t12.clone(), self.t12.clone(), self.t22.clone())
    }

    pub fn negated(&self) -> Self {
        Self::new(-&self.t11, -&self.t12, -&self.t22, self.convention.flipped())
    }

    /// `g^t T g`.
    pub fn transform(&self, g: &Mat2) -> Self {
        let m = &(&g.transpose() * &self.matrix()) * g;
        Self::new(m.get(0, 0).clone(), m.get(0, 1).clone(), m.get(1, 1).clone(), self.convention)
    }

    pub fn is_diagonal(&self) -> bool {
        self.t12.is_zero()
    }

    pub fn to_csv(&self) -> String {
        format!("{},{},{}", self.t11, self.t12, self.t22)
    }
}

impl fmt::Display for BinaryForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{},{}],[{},{}]]", self.t11, self.t12, self.t12, self.t22)
    }
}

/// `(alpha, beta, chi(eps1), chi(eps2))` of a diagonalization
/// `diag(eps1 p^alpha, eps2 p^beta)`, `alpha <= beta`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FormInvariants {
    pub p: u64,
    pub alpha: u32,
    pub beta: u32,
    pub chi1: Sign,
    pub chi2: Sign,
    pub convention: Convention,
}

impl FormInvariants {
    pub fn new(
        p: u64,
        alpha: u32,
        beta: u32,
        chi1: Sign,
        chi2: Sign,
        convention: Convention,
    ) -> Result<Self> {
        check_prime(p)?;
        if alpha > beta {
            return Err(Error::InvalidInvariants(format!(
                "alpha = {alpha} exceeds beta = {beta}"
            )));
        }
        Ok(Self { p, alpha, beta, chi1, chi2, convention })
    }

    /// Parses `"alpha,beta,chi1,chi2"`; the two characters may be omitted and
    /// then default to `+1`.
    pub fn parse(p: u64, s: &str, convention: Convention) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 2 && parts.len() != 4 {
            return Err(Error::Parse(format!(
                "invariants must be \"alpha,beta,chi1,chi2\", got {s:?}"
            )));
        }
        let n = |t: &str| {
            t.parse::<u32>()
                .map_err(|_| Error::Parse(format!("bad exponent {t:?}")))
        };
        let (chi1, chi2) = if parts.len() == 4 {
            (parts[2].parse()?, parts[3].parse()?)
        } else {
            (Sign::Plus, Sign::Plus)
        };
        Self::new(p, n(parts[0])?, n(parts[1])?, chi1, chi2, convention)
    }

    fn ctx(&self) -> PAdicContext {
        PAdicContext::for_exponents(self.p, self.alpha, self.beta).expect("validated prime")
    }

    pub fn chi_minus_one(&self) -> Sign {
        self.ctx().chi_minus_one()
    }

    /// Invariants of `-T`.
    pub fn negated(&self) -> Self {
        let m = self.chi_minus_one();
        Self {
            chi1: m * self.chi1,
            chi2: m * self.chi2,
            convention: self.convention.flipped(),
            ..*self
        }
    }

    /// Same invariants read in the other convention, negating if needed.
    pub fn in_convention(&self, c: Convention) -> Self {
        if self.convention == c {
            *self
        } else {
            self.negated()
        }
    }

    /// The four-case `mu_p` table.
    pub fn mu(&self) -> Sign {
        let m = self.chi_minus_one();
        match (self.alpha % 2 == 1, self.beta % 2 == 1) {
            (true, true) => m * self.chi1 * self.chi2,
            (true, false) => m * self.chi2,
            (false, true) => m * self.chi1,
            (false, false) => Sign::Plus,
        }
    }

    /// The Hilbert-symbol condition
    /// `chi(-1)^(alpha beta) chi1^beta chi2^alpha = 1`.
    pub fn hilbert_condition(&self) -> Sign {
        let (a, b) = (self.alpha as u64, self.beta as u64);
        self.chi_minus_one().pow(a * b) * self.chi1.pow(b) * self.chi2.pow(a)
    }

    /// Whether this `q`-Gram is realized by an anticommuting pair.
    pub fn is_realizable(&self) -> Result<bool> {
        self.convention.expect(Convention::SmallQ)?;
        Ok(self.hilbert_condition() == Sign::Plus)
    }

    /// Realizability of the pair whose Gram this form is, in either
    /// convention.
    pub fn realizable_any(&self) -> bool {
        self.in_convention(Convention::SmallQ).hilbert_condition() == Sign::Plus
    }

    /// The reason a `q`-Gram fails to be realizable, if it does.
    pub fn obstruction(&self) -> Option<&'static str> {
        if self.hilbert_condition() == Sign::Plus {
            return None;
        }
        Some(match (self.alpha % 2 == 1, self.beta % 2 == 1) {
            (true, true) => "alpha and beta odd and chi(-eps1*eps2) = -1",
            (true, false) => "alpha odd, beta even and chi(eps2) = -1",
            (false, true) => "alpha even, beta odd and chi(eps1) = -1",
            (false, false) => "unreachable",
        })
    }

    /// GL2(Z_p)-equivalence of the underlying forms. When `alpha = beta` only
    /// the product of the characters is an invariant.
    pub fn equivalent(&self, other: &FormInvariants) -> bool {
        if (self.p, self.alpha, self.beta, self.convention)
            != (other.p, other.alpha, other.beta, other.convention)
        {
            return false;
        }
        if self.alpha == self.beta {
            self.chi1 * self.chi2 == other.chi1 * other.chi2
        } else {
            self.chi1 == other.chi1 && self.chi2 == other.chi2
        }
    }

    /// The diagonal form `diag(eps1 p^alpha, eps2 p^beta)` with canonical unit
    /// representatives.
    pub fn diagonal_form(&self) -> BinaryForm {
        let ctx = self.ctx();
        let d1 = ExactRational::from(ctx.unit_rep(self.chi1))
            * ExactRational::prime_power(self.p, self.alpha as i64);
        let d2 = ExactRational::from(ctx.unit_rep(self.chi2))
            * ExactRational::prime_power(self.p, self.beta as i64);
        BinaryForm::new(d1, ExactRational::zero(), d2, self.convention)
    }

    /// Every tuple with `alpha <= beta <= bound` and both characters.
    pub fn grid(p: u64, bound: u32, convention: Convention) -> Vec<FormInvariants> {
        let mut out = Vec::new();
        for alpha in 0..=bound {
            for beta in alpha..=bound {
                for chi1 in [Sign::Plus, Sign::Minus] {
                    for chi2 in [Sign::Plus, Sign::Minus] {
                        out.push(FormInvariants { p, alpha, beta, chi1, chi2, convention });
                    }
                }
            }
        }
        out
    }

    pub fn label(&self) -> String {
        format!("({},{},{},{})", self.alpha, self.beta, self.chi1, self.chi2)
    }
}

impl fmt::Display for FormInvariants {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p={} {} [{}]", self.p, self.label(), self.convention)
    }
}

impl Serialize for FormInvariants {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("FormInvariants", 8)?;
        st.serialize_field("p", &self.p)?;
        st.serialize_field("alpha", &self.alpha)?;
        st.serialize_field("beta", &self.beta)?;
        st.serialize_field("chi1", &self.chi1)?;
        st.serialize_field("chi2", &self.chi2)?;
        st.serialize_field("mu", &self.mu())?;
        st.serialize_field("realizable", &self.realizable_any())?;
        st.serialize_field("convention", &self.convention)?;
        st.end()
    }
}

#[derive(Deserialize)]
struct InvariantsRepr {
    p: u64,
    alpha: u32,
    beta: u32,
    chi1: Sign,
    chi2: Sign,
    convention: Convention,
}

impl<'de> Deserialize<'de> for FormInvariants {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = InvariantsRepr::deserialize(d)?;
        FormInvariants::new(r.p, r.alpha, r.beta, r.chi1, r.chi2, r.convention)
            .map_err(serde::de::Error::custom)
    }
}

/// Invariants of a diagonalization of `t` over `Z_p`.
pub fn diagonalize(p: u64, t: &BinaryForm) -> Result<FormInvariants> {
    check_prime(p)?;
    let det = t.det();
    if det.is_zero() {
        return Err(Error::DegenerateForm);
    }
    let v = |x: &ExactRational| val_rat(x, p);
    for e in [&t.t11, &t.t12, &t.t22] {
        if matches!(v(e), Some(k) if k < 0) {
            return Err(Error::NonIntegralForm(e.to_string()));
        }
    }
    let inf = i64::MAX;
    let (v11, v12, v22) = (
        v(&t.t11).unwrap_or(inf),
        v(&t.t12).unwrap_or(inf),
        v(&t.t22).unwrap_or(inf),
    );
    let d1 = if v11.min(v22) <= v12 {
        if v11 <= v22 {
            t.t11.clone()
        } else {
            t.t22.clone()
        }
    } else {
        // e1 -> e1 + e2 moves the minimum onto the diagonal
        &t.t11 + &t.t12 * 2 + &t.t22
    };
    let d2 = &det / &d1;
    let ctx = PAdicContext::new(p, 1)?;
    let (va, vb) = (ctx.valuation(&d1)?, ctx.valuation(&d2)?);
    let (c1, c2) = (ctx.chi_unit_part(&d1)?, ctx.chi_unit_part(&d2)?);
    let (alpha, beta, chi1, chi2) = if va <= vb { (va, vb, c1, c2) } else { (vb, va, c2, c1) };
    FormInvariants::new(p, alpha as u32, beta as u32, chi1, chi2, t.convention)
}

pub fn mu_p(p: u64, t: &BinaryForm) -> Result<Sign> {
    Ok(diagonalize(p, t)?.mu())
}

pub fn is_realizable(inv: &FormInvariants) -> Result<bool> {
    inv.is_realizable()
}

/// `q`-Gram matrix of a pair of special endomorphisms.
pub fn gram(j: &SpecialEndomorphism, jp: &SpecialEndomorphism) -> BinaryForm {
    BinaryForm::new(j.q().clone(), j.inner(jp), jp.q().clone(), Convention::SmallQ)
}

/// An anticommuting pair `(j, j')` with `q`-Gram in the class of `inv`.
pub fn realize_anticommuting_pair(
    inv: &FormInvariants,
) -> Result<(SpecialEndomorphism, SpecialEndomorphism)> {
    inv.convention.expect(Convention::SmallQ)?;
    if let Some(why) = inv.obstruction() {
        return Err(Error::NotRealizable(why.to_string()));
    }
    let p = inv.p;
    let ctx = PAdicContext::for_exponents(p, inv.alpha, inv.beta)?;
    let pi = |e: u32| num_traits::pow(p as i64, e as usize);
    let e1 = ctx.unit_rep(inv.chi1);
    let e2 = ctx.unit_rep(inv.chi2);

    let (j, jp) = if inv.alpha % 2 == 0 && inv.chi1 == Sign::Plus {
        let s = pi(inv.alpha / 2);
        (
            SpecialEndomorphism::from_ints(p, s, 0, 0)?,
            SpecialEndomorphism::from_ints(p, 0, e2 * pi(inv.beta), 1)?,
        )
    } else {
        let n = e1 * pi(inv.alpha);
        let j = SpecialEndomorphism::from_ints(p, 0, n, 1)?;
        // j' = [[x, -n z], [z, -x]] has q(j') = x^2 - n z^2
        let mut found = None;
        'search: for z0 in 0..p as i64 {
            for t in 0..=inv.beta {
                for x0 in 0..p as i64 {
                    for s in 0..=inv.beta {
                        let (x, z) = (x0 * pi(s), z0 * pi(t));
                        let qv = ExactRational::from(x * x - n * z * z);
                        if qv.is_zero() || ctx.valuation(&qv)? != inv.beta as i64 {
                            continue;
                        }
                        if ctx.chi_unit_part(&qv)? == inv.chi2 {
                            found = Some(SpecialEndomorphism::from_ints(p, x, -n * z, z)?);
                            break 'search;
                        }
                    }
                }
            }
        }
        let jp = found.ok_or_else(|| {
            Error::Internal(format!("no anticommuting partner found for {inv}"))
        })?;
        (j, jp)
    };

    debug_assert!(j.anticommutes_with(&jp));
    let realized = diagonalize(p, &gram(&j, &jp))?;
    if realized != *inv {
        return Err(Error::Internal(format!(
            "realization of {inv} has invariants {realized}"
        )));
    }
    Ok((j, jp))
}
