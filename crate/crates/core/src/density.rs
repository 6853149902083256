//! Local representation densities of binary forms by the three fixed ternary
//! forms `S`, `S'`, `S''`: brute-force counting, closed forms, derivatives,
//! the three-term relation with `e_p` and its Whittaker-function reading.
//!
//! Every binary form here is in the `Q` convention (`Q = nu`), i.e. the
//! negative of the Gram matrices used by the intersection code.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{diagonalize, BinaryForm, Convention, FormInvariants};
use crate::intersection::{bracket, e_p_closed};
use crate::padic::{check_prime, nonsquare, PAdicContext, Sign};
use crate::rational::ExactRational;

/// Residue evaluations allowed in one count.
pub const DEFAULT_WORK_BUDGET: u128 = 10_000_000_000;
/// Entries of the dense lookup table allowed in one count.
pub const DEFAULT_TABLE_CAP: usize = 1 << 25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TernaryTag {
    S,
    Sprime,
    Sdoubleprime,
}

impl TernaryTag {
    pub const ALL: [TernaryTag; 3] = [TernaryTag::S, TernaryTag::Sprime, TernaryTag::Sdoubleprime];

    pub fn name(self) -> &'static str {
        match self {
            TernaryTag::S => "S",
            TernaryTag::Sprime => "Sprime",
            TernaryTag::Sdoubleprime => "Sdoubleprime",
        }
    }
}

impl fmt::Display for TernaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TernaryTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "S" => Ok(TernaryTag::S),
            "Sprime" | "Sp" | "S'" => Ok(TernaryTag::Sprime),
            "Sdoubleprime" | "Sdp" | "S''" => Ok(TernaryTag::Sdoubleprime),
            other => Err(Error::Parse(format!(
                "unknown ternary form {other:?} (expected S, Sprime or Sdp)"
            ))),
        }
    }
}

/// One of the three fixed diagonal ternary forms at `p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct TernaryFormChoice {
    pub tag: TernaryTag,
    pub p: u64,
    pub diagonal: [i64; 3],
}

impl TernaryFormChoice {
    pub fn new(tag: TernaryTag, p: u64) -> Result<Self> {
        check_prime(p)?;
        let (pi, eta) = (p as i64, nonsquare(p) as i64);
        let diagonal = match tag {
            TernaryTag::S => [-1, -1, 1],
            TernaryTag::Sprime => [-eta, -pi, eta * pi],
            TernaryTag::Sdoubleprime => [-1, -pi, pi],
        };
        Ok(Self { tag, p, diagonal })
    }

    pub fn det(&self) -> ExactRational {
        ExactRational::from(self.diagonal.iter().product::<i64>())
    }

    /// `prod_{i<j} (a_i, a_j)_p`.
    pub fn hasse_invariant(&self) -> Sign {
        let ctx = PAdicContext::new(self.p, 4).expect("validated prime");
        let d: Vec<ExactRational> = self.diagonal.iter().map(|&x| x.into()).collect();
        let mut s = Sign::Plus;
        for i in 0..3 {
            for j in i + 1..3 {
                s = s * ctx.hilbert_symbol(&d[i], &d[j]).expect("nonzero entries");
            }
        }
        s
    }
}

/// Limits for [`density_count`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountBudget {
    pub max_work: u128,
    pub max_table: usize,
}

impl Default for CountBudget {
    fn default() -> Self {
        Self { max_work: DEFAULT_WORK_BUDGET, max_table: DEFAULT_TABLE_CAP }
    }
}

/// Raw output of one count.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CountResult {
    pub level: u32,
    pub solutions: u128,
    pub work: u128,
    pub value: ExactRational,
}

fn residue(x: &ExactRational, p: u64, modulus: u64) -> Result<u64> {
    let m = num_bigint::BigInt::from(modulus);
    if x.denom().mod_floor(&num_bigint::BigInt::from(p)) == 0.into() {
        return Err(Error::NonIntegralForm(x.to_string()));
    }
    let inv = crate::padic::inv_mod(x.denom(), &m).expect("unit denominator");
    Ok((x.numer() * inv).mod_floor(&m).to_u64().expect("reduced residue"))
}

/// Distribution of `s * (x^2, xy, y^2) mod P` over rows `(x, y)`.
fn row_distribution(s: i64, modulus: u64) -> Vec<([u64; 3], u64)> {
    let m = modulus as i128;
    let s = (s as i128).rem_euclid(m);
    let mut counts: HashMap<[u64; 3], u64> = HashMap::new();
    for x in 0..m {
        for y in 0..m {
            let v = [
                (s * x % m * x % m) as u64,
                (s * x % m * y % m) as u64,
                (s * y % m * y % m) as u64,
            ];
            *counts.entry(v).or_insert(0) += 1;
        }
    }
    let mut out: Vec<_> = counts.into_iter().collect();
    // table order, so that the inner loop walks the table monotonically
    out.sort_unstable_by_key(|(v, _)| (v[2], v[1], v[0]));
    out
}

/// `p^{-3t} #{x in M_{3,2}(Z/p^t) : S[x] = T mod p^t}`.
///
/// Writing `S[x] = sum_i s_i (x_i1^2, x_i1 x_i2, x_i2^2)`, the count is a
/// triple convolution of per-row distributions; two of them are looped over
/// and the third is read from a dense table.
pub fn density_count(
    choice: &TernaryFormChoice,
    t: &BinaryForm,
    level: u32,
    budget: &CountBudget,
) -> Result<CountResult> {
    t.convention.expect(Convention::BigQ)?;
    if t.det().is_zero() {
        return Err(Error::DegenerateForm);
    }
    if level == 0 {
        return Err(Error::InvalidInvariants("level must be at least 1".into()));
    }
    let p = choice.p;
    let modulus = (p as u128).checked_pow(level).filter(|m| *m < (1u128 << 31)).ok_or(
        Error::Resource { what: "modulus p^t", needed: u128::MAX, limit: 1 << 31 },
    )? as u64;
    let table = (modulus as u128).pow(3);
    if table > budget.max_table as u128 {
        return Err(Error::Resource {
            what: "dense table entries",
            needed: table,
            limit: budget.max_table as u128,
        });
    }
    let target = [
        residue(&t.t11, p, modulus)?,
        residue(&t.t12, p, modulus)?,
        residue(&t.t22, p, modulus)?,
    ];

    let mut dists: Vec<Vec<([u64; 3], u64)>> =
        choice.diagonal.iter().map(|&s| row_distribution(s, modulus)).collect();
    // the largest support goes into the table
    dists.sort_by_key(|d| d.len());
    let work = dists[0].len() as u128 * dists[1].len() as u128;
    if work > budget.max_work {
        return Err(Error::Resource { what: "count loop residues", needed: work, limit: budget.max_work });
    }
    let dense = dists.pop().expect("three rows");
    let idx = |v: [u64; 3]| (v[0] + modulus * (v[1] + modulus * v[2])) as usize;
    let mut lookup = vec![0u32; table as usize];
    for (v, c) in &dense {
        lookup[idx(*v)] = *c as u32;
    }
    let (outer, inner) = (&dists[0], &dists[1]);
    let sub = |a: u64, b: u64| if a >= b { a - b } else { a + modulus - b };
    let solutions: u128 = outer
        .par_iter()
        .map(|(v1, c1)| {
            let r = [sub(target[0], v1[0]), sub(target[1], v1[1]), sub(target[2], v1[2])];
            let mut acc: u128 = 0;
            for (v2, c2) in inner {
                let w = [sub(r[0], v2[0]), sub(r[1], v2[1]), sub(r[2], v2[2])];
                let c3 = lookup[idx(w)];
                if c3 != 0 {
                    acc += (*c2 as u128) * (c3 as u128);
                }
            }
            acc * (*c1 as u128)
        })
        .sum();
    let value = ExactRational::from_integer(num_bigint::BigInt::from(solutions))
        * ExactRational::prime_power(p, -3 * level as i64);
    Ok(CountResult { level, solutions, work, value })
}

/// A count at level `t` together with its check at `t + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StableCount {
    pub value: ExactRational,
    pub level: u32,
    pub check_level: u32,
    pub check_value: ExactRational,
    pub stable: bool,
}

/// Default starting level: `beta + 1`.
pub fn auto_level(p: u64, t: &BinaryForm) -> Result<u32> {
    Ok(diagonalize(p, t)?.beta + 1)
}

/// Counts at `level` (or [`auto_level`]) and at the next level.
pub fn density_count_checked(
    choice: &TernaryFormChoice,
    t: &BinaryForm,
    level: Option<u32>,
    budget: &CountBudget,
) -> Result<StableCount> {
    let level = match level {
        Some(l) => l,
        None => auto_level(choice.p, t)?,
    };
    let a = density_count(choice, t, level, budget)?;
    let b = density_count(choice, t, level + 1, budget)?;
    Ok(StableCount {
        stable: a.value == b.value,
        value: a.value,
        level,
        check_level: level + 1,
        check_value: b.value,
    })
}

fn q_invariants(p: u64, t: &BinaryForm) -> Result<FormInvariants> {
    t.convention.expect(Convention::BigQ)?;
    diagonalize(p, t)
}

fn require_q(inv: &FormInvariants) -> Result<()> {
    inv.convention.expect(Convention::BigQ)
}

/// The Kitaoka bracket, keyed on `chi(-eps1)`.
fn kitaoka_bracket(inv: &FormInvariants) -> ExactRational {
    let c = inv.chi_minus_one() * inv.chi1;
    bracket(inv.p, inv.alpha, inv.beta, c).into()
}

fn one_minus_p2(p: u64) -> ExactRational {
    ExactRational::one() - ExactRational::prime_power(p, -2)
}

fn wrong_mu(formula: &'static str, required: Sign) -> Error {
    Error::WrongMu { formula, required: required.to_i8() }
}

pub fn alpha_s_inv(inv: &FormInvariants) -> Result<ExactRational> {
    require_q(inv)?;
    if inv.mu() == Sign::Minus {
        return Ok(ExactRational::zero());
    }
    Ok(one_minus_p2(inv.p) * kitaoka_bracket(inv))
}

pub fn alpha_sprime_inv(inv: &FormInvariants) -> Result<ExactRational> {
    require_q(inv)?;
    Ok(match inv.mu() {
        Sign::Minus => ExactRational::from(2 * (inv.p as i64 + 1)),
        Sign::Plus => ExactRational::zero(),
    })
}

/// Only available when `mu = +1`; otherwise use [`density_count`].
pub fn alpha_sdoubleprime_inv(inv: &FormInvariants) -> Result<ExactRational> {
    require_q(inv)?;
    if inv.mu() == Sign::Minus {
        return Err(wrong_mu("closed form of alpha(S'',T)", Sign::Plus));
    }
    let p = ExactRational::from(inv.p as i64);
    let ratio = &p * &p / (&p * &p - 1);
    Ok((&p - 1) * 2 * (ratio * alpha_s_inv(inv)? - 1))
}

pub fn alpha_prime_s_inv(inv: &FormInvariants) -> Result<ExactRational> {
    require_q(inv)?;
    if inv.mu() == Sign::Plus {
        return Err(wrong_mu("derivative formula alpha'(S,T)", Sign::Minus));
    }
    let p = inv.p as i64;
    let (a, b) = (inv.alpha as i64, inv.beta as i64);
    let term = |j: i64| ExactRational::from((a + b - 4 * j) * num_traits::pow(p, j as usize));
    let sum: ExactRational = if a % 2 == 1 {
        (0..=(a - 1) / 2).map(term).sum()
    } else {
        let s: ExactRational = (0..a / 2).map(term).sum();
        s + ExactRational::new((b - a + 1) * num_traits::pow(p, (a / 2) as usize), 2)
    };
    Ok(-(one_minus_p2(inv.p) * sum))
}

/// Case form of `alpha'(S',T)`.
pub fn alpha_prime_sprime_cases(inv: &FormInvariants) -> Result<ExactRational> {
    require_q(inv)?;
    if inv.mu() == Sign::Minus {
        return Err(wrong_mu("derivative formula alpha'(S',T)", Sign::Plus));
    }
    let p = inv.p as i64;
    let ab = inv.alpha as i64 + inv.beta as i64;
    Ok(ExactRational::from(-(p + 1) * (ab + 2)) + kitaoka_bracket(inv) * (2 * p))
}

/// `alpha'(S',T)` written through `alpha(S,T)`.
pub fn alpha_prime_sprime_via_s(inv: &FormInvariants) -> Result<ExactRational> {
    require_q(inv)?;
    if inv.mu() == Sign::Minus {
        return Err(wrong_mu("derivative formula alpha'(S',T)", Sign::Plus));
    }
    let p = ExactRational::from(inv.p as i64);
    let ab = inv.alpha as i64 + inv.beta as i64;
    let coeff = &p * &p * &p * 2 / (&p * &p - 1);
    Ok(-(&p + 1) * (ab + 2) + coeff * alpha_s_inv(inv)?)
}

/// Both forms, which must agree.
pub fn alpha_prime_sprime_inv(inv: &FormInvariants) -> Result<ExactRational> {
    let a = alpha_prime_sprime_cases(inv)?;
    let b = alpha_prime_sprime_via_s(inv)?;
    if a != b {
        return Err(Error::Internal(format!(
            "two forms of alpha'(S',T) disagree at {}: {a} vs {b}",
            inv.label()
        )));
    }
    Ok(a)
}

pub fn alpha_s(p: u64, t: &BinaryForm) -> Result<ExactRational> {
    alpha_s_inv(&q_invariants(p, t)?)
}

pub fn alpha_sprime(p: u64, t: &BinaryForm) -> Result<ExactRational> {
    alpha_sprime_inv(&q_invariants(p, t)?)
}

pub fn alpha_sdoubleprime(p: u64, t: &BinaryForm) -> Result<ExactRational> {
    alpha_sdoubleprime_inv(&q_invariants(p, t)?)
}

pub fn alpha_prime_s(p: u64, t: &BinaryForm) -> Result<ExactRational> {
    alpha_prime_s_inv(&q_invariants(p, t)?)
}

pub fn alpha_prime_sprime(p: u64, t: &BinaryForm) -> Result<ExactRational> {
    alpha_prime_sprime_inv(&q_invariants(p, t)?)
}

/// Closed form for any of the three forms; `None` where no closed form is
/// available (`S''` with `mu = -1`).
pub fn alpha_closed_inv(tag: TernaryTag, inv: &FormInvariants) -> Result<Option<ExactRational>> {
    match tag {
        TernaryTag::S => alpha_s_inv(inv).map(Some),
        TernaryTag::Sprime => alpha_sprime_inv(inv).map(Some),
        TernaryTag::Sdoubleprime if inv.mu() == Sign::Minus => Ok(None),
        TernaryTag::Sdoubleprime => alpha_sdoubleprime_inv(inv).map(Some),
    }
}

/// Yang's identity `p^2/(p^2-1) alpha(S,T) - alpha(S'',T)/(2(p-1))`, which
/// should equal 1.
pub fn yang_relation_value(inv: &FormInvariants) -> Result<ExactRational> {
    let p = ExactRational::from(inv.p as i64);
    let lhs = &p * &p / (&p * &p - 1) * alpha_s_inv(inv)?;
    Ok(lhs - alpha_sdoubleprime_inv(inv)? / ((&p - 1) * 2))
}

/// `e_p` of the `q`-Gram `-T`.
pub fn e_p_of_negative(inv: &FormInvariants) -> Result<i64> {
    require_q(inv)?;
    e_p_closed(&inv.in_convention(Convention::SmallQ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoefficientSource {
    Printed,
    Reconciled,
}

/// Coefficients of `e_p(-T) = u alpha'(S',T) + v alpha(S,T) + w alpha(S'',T)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RelationCoefficients {
    pub p: u64,
    pub u: ExactRational,
    pub v: ExactRational,
    pub w: ExactRational,
    pub source: CoefficientSource,
}

impl RelationCoefficients {
    pub fn printed(p: u64) -> Self {
        let pr = ExactRational::from(p as i64);
        Self {
            p,
            u: -(&pr + 1).recip(),
            v: &pr * &pr * 2 / (&pr + 1),
            w: ((&pr - 1) * 2).recip(),
            source: CoefficientSource::Printed,
        }
    }

    pub fn evaluate(&self, inv: &FormInvariants) -> Result<ExactRational> {
        let (a, s, sdp) = relation_data(inv)?;
        Ok(&self.u * &a + &self.v * &s + &self.w * &sdp)
    }
}

fn relation_data(inv: &FormInvariants) -> Result<(ExactRational, ExactRational, ExactRational)> {
    Ok((alpha_prime_sprime_inv(inv)?, alpha_s_inv(inv)?, alpha_sdoubleprime_inv(inv)?))
}

/// One grid line of the reconciliation report.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RelationRow {
    pub invariants: FormInvariants,
    pub e_p: i64,
    pub reconciled: ExactRational,
    pub printed: ExactRational,
    pub printed_residual: ExactRational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Reconciliation {
    pub p: u64,
    pub bound: u32,
    pub basis: Vec<FormInvariants>,
    pub solved: RelationCoefficients,
    pub printed: RelationCoefficients,
    pub u_matches_printed: bool,
    pub v_matches_printed: bool,
    pub w_matches_printed: bool,
    /// Whether the solved relation reproduces `e_p(-T)` on every row.
    pub reconciled_holds: bool,
    /// Residual `printed - e_p(-T)` at `(alpha, beta) = (0, 0)`.
    pub printed_residual_at_origin: ExactRational,
    pub rows: Vec<RelationRow>,
}

impl Reconciliation {
    pub fn printed_failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.printed_residual.is_zero()).count()
    }
}

/// `Q`-convention tuples with `mu = +1` up to `bound`.
pub fn mu_plus_grid(p: u64, bound: u32) -> Vec<FormInvariants> {
    FormInvariants::grid(p, bound, Convention::BigQ)
        .into_iter()
        .filter(|i| i.mu() == Sign::Plus)
        .collect()
}

/// Exact solution of a square system by Gauss-Jordan elimination.
pub fn solve_exact(mut a: Vec<Vec<ExactRational>>, mut b: Vec<ExactRational>) -> Result<Vec<ExactRational>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].is_zero()).ok_or(Error::SingularSystem)?;
        a.swap(col, piv);
        b.swap(col, piv);
        let inv = a[col][col].recip();
        for k in col..n {
            a[col][k] = &a[col][k] * &inv;
        }
        b[col] = &b[col] * &inv;
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for k in col..n {
                    a[r][k] = &a[r][k] - &(&f * &a[col][k]);
                }
                b[r] = &b[r] - &(&f * &b[col]);
            }
        }
    }
    Ok(b)
}

fn rank(rows: &[Vec<ExactRational>]) -> usize {
    let mut m: Vec<Vec<ExactRational>> = rows.to_vec();
    let mut r = 0;
    let cols = m.first().map_or(0, |x| x.len());
    for c in 0..cols {
        let Some(piv) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else { continue };
        m.swap(r, piv);
        for i in r + 1..m.len() {
            let f = &m[i][c] / &m[r][c];
            for k in c..cols {
                let d = &f * &m[r][k];
                m[i][k] = &m[i][k] - &d;
            }
        }
        r += 1;
    }
    r
}

/// Solves for `(u, v, w)` on three independent `mu = +1` tuples and checks
/// the result, and the printed coefficients, on the whole grid.
pub fn reconcile_relation(p: u64, bound: u32) -> Result<Reconciliation> {
    check_prime(p)?;
    let grid = mu_plus_grid(p, bound.max(2));
    let mut basis = Vec::new();
    let mut rows: Vec<Vec<ExactRational>> = Vec::new();
    let mut rhs = Vec::new();
    for inv in &grid {
        let (a, s, sdp) = relation_data(inv)?;
        let mut trial = rows.clone();
        trial.push(vec![a.clone(), s.clone(), sdp.clone()]);
        if rank(&trial) > rows.len() {
            rows = trial;
            rhs.push(ExactRational::from(e_p_of_negative(inv)?));
            basis.push(*inv);
            if rows.len() == 3 {
                break;
            }
        }
    }
    if rows.len() < 3 {
        return Err(Error::SingularSystem);
    }
    let sol = solve_exact(rows, rhs)?;
    let solved = RelationCoefficients {
        p,
        u: sol[0].clone(),
        v: sol[1].clone(),
        w: sol[2].clone(),
        source: CoefficientSource::Reconciled,
    };
    let printed = RelationCoefficients::printed(p);
    let report_grid = mu_plus_grid(p, bound);
    let mut table = Vec::with_capacity(report_grid.len());
    for inv in &report_grid {
        let e = e_p_of_negative(inv)?;
        let r = solved.evaluate(inv)?;
        let pr = printed.evaluate(inv)?;
        table.push(RelationRow {
            invariants: *inv,
            e_p: e,
            printed_residual: &pr - &ExactRational::from(e),
            reconciled: r,
            printed: pr,
        });
    }
    let reconciled_holds = table.iter().all(|r| r.reconciled == ExactRational::from(r.e_p));
    let origin = FormInvariants::new(p, 0, 0, Sign::Plus, Sign::Plus, Convention::BigQ)?;
    let printed_residual_at_origin =
        printed.evaluate(&origin)? - ExactRational::from(e_p_of_negative(&origin)?);
    Ok(Reconciliation {
        p,
        bound,
        basis,
        u_matches_printed: solved.u == printed.u,
        v_matches_printed: solved.v == printed.v,
        w_matches_printed: solved.w == printed.w,
        reconciled_holds,
        printed_residual_at_origin,
        solved,
        printed,
        rows: table,
    })
}

/// `coefficient * log p`, kept symbolic.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LogMultiple {
    pub coefficient: ExactRational,
}

impl LogMultiple {
    pub fn new(coefficient: ExactRational) -> Self {
        Self { coefficient }
    }

    /// Floating value, for display only.
    pub fn approx(&self, p: u64) -> f64 {
        let c = self.coefficient.inner();
        let (n, d) = (c.numer().to_f64().unwrap_or(f64::NAN), c.denom().to_f64().unwrap_or(f64::NAN));
        n / d * (p as f64).ln()
    }
}

impl fmt::Display for LogMultiple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} log p", self.coefficient)
    }
}

/// Values of the three local Whittaker functions at `s = 0` and of the
/// combined nonstandard section.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WhittakerValues {
    pub invariants: FormInvariants,
    pub w_phi: ExactRational,
    pub w_prime_phi_prime: LogMultiple,
    pub w_phi_doubleprime: ExactRational,
    pub a_prime: LogMultiple,
    pub b_prime: LogMultiple,
    pub source: CoefficientSource,
    pub w_prime_combined: LogMultiple,
    /// `(p+1)/p^2 e_p(-T) log p`.
    pub target: LogMultiple,
    pub matches_target: bool,
}

/// `(A'(0), B'(0))` in units of `log p`.
pub fn section_derivatives(p: u64, source: CoefficientSource) -> Result<(ExactRational, ExactRational)> {
    let pr = ExactRational::from(p as i64);
    let coeffs = match source {
        CoefficientSource::Printed => return Ok((2.into(), (&pr + 1) / ((&pr - 1) * 2))),
        CoefficientSource::Reconciled => reconcile_relation(p, 2)?.solved,
    };
    let scale = (&pr + 1) / (&pr * &pr);
    Ok((&scale * &coeffs.v, &(&pr + 1) * &coeffs.w))
}

pub fn whittaker_values_inv(inv: &FormInvariants, source: CoefficientSource) -> Result<WhittakerValues> {
    require_q(inv)?;
    if inv.mu() == Sign::Minus {
        return Err(wrong_mu("Whittaker values", Sign::Plus));
    }
    let p = inv.p;
    let p2 = ExactRational::prime_power(p, -2);
    let w_phi = alpha_s_inv(inv)?;
    let w_pp = -(&p2 * &alpha_prime_sprime_inv(inv)?);
    let w_pdp = &p2 * &alpha_sdoubleprime_inv(inv)?;
    let (a, b) = section_derivatives(p, source)?;
    let combined = &w_pp + &(&a * &w_phi) + &b * &w_pdp;
    let pr = ExactRational::from(p as i64);
    let target = (&pr + 1) * &p2 * e_p_of_negative(inv)?;
    Ok(WhittakerValues {
        invariants: *inv,
        w_phi,
        w_prime_phi_prime: LogMultiple::new(w_pp),
        w_phi_doubleprime: w_pdp,
        a_prime: LogMultiple::new(a),
        b_prime: LogMultiple::new(b),
        source,
        matches_target: combined == target,
        w_prime_combined: LogMultiple::new(combined),
        target: LogMultiple::new(target),
    })
}

pub fn whittaker_values(p: u64, t: &BinaryForm, source: CoefficientSource) -> Result<WhittakerValues> {
    whittaker_values_inv(&q_invariants(p, t)?, source)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;
    use Sign::{Minus, Plus};

    fn bq(a: i64, b: i64, c: i64) -> BinaryForm {
        BinaryForm::from_ints(a, b, c, Convention::BigQ)
    }

    fn inv(p: u64, a: u32, b: u32, c1: Sign, c2: Sign) -> FormInvariants {
        FormInvariants::new(p, a, b, c1, c2, Convention::BigQ).unwrap()
    }

    fn choice(tag: TernaryTag) -> TernaryFormChoice {
        TernaryFormChoice::new(tag, 3).unwrap()
    }

    #[test]
    fn ternary_invariants() {
        for p in [3, 5, 7, 11] {
            let s = TernaryFormChoice::new(TernaryTag::S, p).unwrap();
            let sp = TernaryFormChoice::new(TernaryTag::Sprime, p).unwrap();
            let ctx = PAdicContext::new(p, 4).unwrap();
            assert_eq!(ctx.chi_unit_part(&(s.det() * sp.det())).unwrap(), Plus);
            assert_eq!(ctx.valuation(&(s.det() * sp.det())).unwrap() % 2, 0);
            assert_eq!(s.hasse_invariant(), Plus);
            assert_eq!(sp.hasse_invariant(), Minus);
        }
    }

    #[test]
    fn counting_anchors() {
        let b = CountBudget::default();
        let v = density_count(&choice(TernaryTag::S), &bq(-1, 0, -1), 2, &b).unwrap();
        assert_eq!(v.value, q(8, 9));
        let v = density_count(&choice(TernaryTag::Sprime), &bq(1, 0, 3), 3, &b).unwrap();
        assert_eq!(v.value, 8.into());
        let v = density_count(&choice(TernaryTag::Sdoubleprime), &bq(-1, 0, -1), 2, &b).unwrap();
        assert_eq!(v.value, 0.into());
    }

    #[test]
    fn count_respects_budget() {
        let tight = CountBudget { max_work: 10, max_table: DEFAULT_TABLE_CAP };
        let e = density_count(&choice(TernaryTag::S), &bq(-1, 0, -1), 2, &tight).unwrap_err();
        assert!(matches!(e, Error::Resource { .. }));
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(alpha_s(3, &bq(-1, 0, -1)).unwrap(), q(8, 9));
        assert_eq!(alpha_s(5, &bq(-1, 0, -1)).unwrap(), q(24, 25));
        assert_eq!(alpha_s(3, &bq(1, 0, 3)).unwrap(), 0.into());
        // -diag(3,3) has mu = -1 at p = 3; diag(3,-3) is the mu = +1 class
        assert_eq!(alpha_s(3, &bq(-3, 0, -3)).unwrap(), 0.into());
        assert_eq!(alpha_s(3, &bq(3, 0, -3)).unwrap(), q(16, 9));
        let c = density_count(&choice(TernaryTag::S), &bq(3, 0, -3), 3, &CountBudget::default());
        assert_eq!(c.unwrap().value, q(16, 9));
        assert_eq!(alpha_sprime(3, &bq(-1, 0, -1)).unwrap(), 0.into());
        assert_eq!(alpha_sprime(3, &bq(1, 0, 3)).unwrap(), 8.into());
        assert_eq!(alpha_sdoubleprime(3, &bq(-1, 0, -1)).unwrap(), 0.into());
    }

    #[test]
    fn derivative_examples() {
        // (1,1) and (2,3) with mu = -1 at p = 3
        let a = inv(3, 1, 1, Plus, Plus);
        assert_eq!(a.mu(), Minus);
        assert_eq!(alpha_prime_s_inv(&a).unwrap(), q(-16, 9));
        let b = inv(3, 2, 3, Plus, Plus);
        assert_eq!(b.mu(), Minus);
        assert_eq!(alpha_prime_s_inv(&b).unwrap(), q(-64, 9));
        assert!(matches!(
            alpha_prime_s_inv(&inv(3, 0, 0, Plus, Plus)),
            Err(Error::WrongMu { required: -1, .. })
        ));
        assert_eq!(alpha_prime_sprime(3, &bq(-1, 0, -1)).unwrap(), (-2).into());
        // chi(-eps1) = -1 with eps1 = 1 at p = 3
        let c = inv(3, 0, 2, Plus, Plus);
        assert_eq!(alpha_prime_sprime_inv(&c).unwrap(), (-10).into());
        assert!(alpha_prime_sprime(3, &bq(1, 0, 3)).is_err());
    }

    #[test]
    fn yang_and_cor_identities() {
        for p in [3, 5, 7] {
            for i in mu_plus_grid(p, 6) {
                assert_eq!(yang_relation_value(&i).unwrap(), 1.into(), "{i}");
                alpha_prime_sprime_inv(&i).unwrap();
            }
        }
    }

    #[test]
    fn reconciliation_at_three() {
        let r = reconcile_relation(3, 6).unwrap();
        assert_eq!(r.solved.u, q(-1, 4));
        assert_eq!(r.solved.w, q(1, 4));
        assert_eq!(r.solved.v, q(-9, 16));
        assert!(r.reconciled_holds);
        assert!(r.u_matches_printed && r.w_matches_printed);
        assert!(!r.v_matches_printed);
        assert_eq!(r.printed.v, q(9, 2));
        assert_eq!(r.printed_residual_at_origin, q(9, 2));
    }

    #[test]
    fn whittaker_examples() {
        let w = whittaker_values(3, &bq(-1, 0, -1), CoefficientSource::Printed).unwrap();
        assert_eq!(w.w_phi, q(8, 9));
        assert_eq!(w.a_prime.coefficient, 2.into());
        assert_eq!(w.b_prime.coefficient, 1.into());
        let c = inv(3, 0, 2, Plus, Plus);
        let w = whittaker_values_inv(&c, CoefficientSource::Reconciled).unwrap();
        assert_eq!(w.target.coefficient, q(8, 9));
        assert!(w.matches_target);
        assert_eq!(w.a_prime.coefficient, q(-1, 4));
        assert_eq!(w.b_prime.coefficient, 1.into());
    }
}
