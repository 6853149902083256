//! Intersection numbers `e_p(T)`: pairing rules on the tree, brute-force
//! summation, the closed forms and the good-reduction comparison.

use std::collections::{HashSet, VecDeque};

use rayon::prelude::*;
use serde::Serialize;

use crate::cycles::{fixed_edge, fixed_vertex, hill_climb, mult};
use crate::error::{Error, Result};
use crate::forms::{diagonalize, gram, realize_anticommuting_pair, BinaryForm, Convention, FormInvariants};
use crate::lattice::{adapted, dist_to_fixed_locus, is_integral, m_of, LatticeVertex, SpecialEndomorphism};
use crate::padic::{val_rat, Sign};
use crate::rational::ExactRational;

/// Limit on the number of vertices visited by the vertical-vertical sum.
pub const DEFAULT_REGION_CAP: usize = 2_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct IntersectionBreakdown {
    pub hh: i64,
    pub hv: i64,
    pub vh: i64,
    pub vv: i64,
    pub total: i64,
}

impl IntersectionBreakdown {
    pub fn new(hh: i64, hv: i64, vh: i64, vv: i64) -> Self {
        Self { hh, hv, vh, vv, total: hh + hv + vh + vv }
    }

    pub fn horizontal_sum(&self) -> i64 {
        self.hh + self.hv + self.vh
    }
}

fn ipow(p: u64, e: u32) -> i64 {
    num_traits::pow(p as i64, e as usize)
}

/// `(p^e - 1)/(p - 1)`.
fn geom(p: u64, e: u32) -> i64 {
    (ipow(p, e) - 1) / (p as i64 - 1)
}

/// `(P_v, P_w)`.
pub fn pair_lines(v: &LatticeVertex, w: &LatticeVertex) -> i64 {
    match v.distance(w) {
        0 => -(v.p() as i64 + 1),
        1 => 1,
        _ => 0,
    }
}

/// `(P_v, Z(j')^v)` as a sum over the neighbors of `v`.
pub fn pair_line_with_vertical(v: &LatticeVertex, jp: &SpecialEndomorphism) -> i64 {
    let here = mult(jp, v) as i64;
    let around: i64 = v.neighbors().iter().map(|w| mult(jp, w) as i64).sum();
    around - (v.p() as i64 + 1) * here
}

/// The same pairing read off from the distance `r` of `v` to the fixed
/// locus of `j'`.
pub fn pair_line_with_vertical_table(v: &LatticeVertex, jp: &SpecialEndomorphism) -> i64 {
    let beta = jp.alpha() as i64;
    let p = v.p() as i64;
    // for beta <= 1 every multiplicity vanishes
    if beta <= 1 {
        return 0;
    }
    let r2 = dist_to_fixed_locus(jp, v).doubled;
    if 2 <= r2 && r2 <= beta - 2 {
        1 - p
    } else if r2 == 0 && beta % 2 == 0 {
        jp.epsilon_class().to_i64() - p
    } else if r2 == 1 && beta % 2 == 1 {
        -p
    } else if r2 == beta {
        1
    } else {
        0
    }
}

/// Outcome of the vertical-vertical summation with its support certificate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VvSummary {
    pub value: i64,
    pub support_size: usize,
    pub center: LatticeVertex,
    pub radius: u32,
    pub max_distance: u64,
    pub shell_size: usize,
}

/// `sum_v mult(j, v) (P_v, Z(j')^v)`.
pub fn vv_bruteforce(j: &SpecialEndomorphism, jp: &SpecialEndomorphism) -> Result<i64> {
    Ok(vv_bruteforce_detailed(j, jp, false)?.value)
}

/// The support of the summand is `{v : m(j, v) >= 1, m(j', v) >= 0}`, a
/// subtree; it is found by ascent and explored breadth-first. The vertices
/// just outside must contribute zero and the support must lie within
/// `ceil(alpha/2) + ceil(beta/2) + 2` of a maximizer of `m(j) + m(j')`.
pub fn vv_bruteforce_detailed(
    j: &SpecialEndomorphism,
    jp: &SpecialEndomorphism,
    check_table: bool,
) -> Result<VvSummary> {
    let p = j.p();
    let (alpha, beta) = (j.alpha(), jp.alpha());
    let radius = alpha.div_ceil(2) + beta.div_ceil(2) + 2;
    let start = LatticeVertex::standard(p);
    let (center, _) = hill_climb(start.clone(), |v| m_of(j, v) + m_of(jp, v));

    let inside = |v: &LatticeVertex| m_of(j, v) >= 1 && m_of(jp, v) >= 0;
    let (seed, best) = hill_climb(center.clone(), |v| (m_of(j, v) - 1).min(m_of(jp, v)));
    let mut support = Vec::new();
    let mut shell = Vec::new();
    if best >= 0 {
        let mut seen = HashSet::new();
        let mut queue = VecDeque::new();
        seen.insert(seed.clone());
        queue.push_back(seed);
        while let Some(v) = queue.pop_front() {
            for w in v.neighbors() {
                if seen.insert(w.clone()) {
                    if inside(&w) {
                        queue.push_back(w);
                    } else {
                        shell.push(w);
                    }
                }
            }
            support.push(v);
            if seen.len() > DEFAULT_REGION_CAP {
                return Err(Error::Resource {
                    what: "vertical support vertices",
                    needed: seen.len() as u128,
                    limit: DEFAULT_REGION_CAP as u128,
                });
            }
        }
    }

    let term = |v: &LatticeVertex| {
        let k = mult(j, v) as i64;
        if k == 0 {
            return Ok(0);
        }
        let pair = pair_line_with_vertical(v, jp);
        if check_table && pair != pair_line_with_vertical_table(v, jp) {
            return Err(Error::Internal(format!(
                "neighbor sum {pair} disagrees with distance table at {v}"
            )));
        }
        Ok(k * pair)
    };
    let value = support
        .par_iter()
        .map(term)
        .collect::<Result<Vec<i64>>>()?
        .into_iter()
        .sum();
    let leak: i64 = shell
        .par_iter()
        .map(term)
        .collect::<Result<Vec<i64>>>()?
        .into_iter()
        .map(i64::abs)
        .sum();
    if leak != 0 {
        return Err(Error::Internal("nonzero contribution outside the support".into()));
    }
    let max_distance = support.iter().map(|v| center.distance(v)).max().unwrap_or(0);
    if max_distance > radius as u64 {
        return Err(Error::Internal(format!(
            "support reaches distance {max_distance} > {radius} from {center}"
        )));
    }
    Ok(VvSummary {
        value,
        support_size: support.len(),
        center,
        radius,
        max_distance,
        shell_size: shell.len(),
    })
}

/// `(Z(j)^h, Z(j')^v)`.
fn horizontal_vertical(j: &SpecialEndomorphism, jp: &SpecialEndomorphism) -> i64 {
    if let Some(v) = fixed_vertex(j) {
        2 * mult(jp, &v) as i64
    } else if let Some((v, w)) = fixed_edge(j) {
        (mult(jp, &v) + mult(jp, &w)) as i64
    } else {
        0
    }
}

fn check_pair(j: &SpecialEndomorphism, jp: &SpecialEndomorphism) -> Result<()> {
    if j.p() != jp.p() {
        return Err(Error::Parse("endomorphisms over different primes".into()));
    }
    if !j.inner(jp).is_zero() {
        return Err(Error::NonDiagonalGram);
    }
    Ok(())
}

/// All four pairings for a pair with diagonal Gram matrix.
pub fn e_p_bruteforce(j: &SpecialEndomorphism, jp: &SpecialEndomorphism) -> Result<IntersectionBreakdown> {
    check_pair(j, jp)?;
    let hh = (j.alpha() % 2 == 1 && jp.alpha() % 2 == 1) as i64;
    let hv = horizontal_vertical(j, jp);
    let vh = horizontal_vertical(jp, j);
    let vv = vv_bruteforce(j, jp)?;
    Ok(IntersectionBreakdown::new(hh, hv, vh, vv))
}

fn require_realizable(inv: &FormInvariants) -> Result<()> {
    inv.convention.expect(Convention::SmallQ)?;
    if let Some(why) = inv.obstruction() {
        return Err(Error::NotRealizable(why.to_string()));
    }
    Ok(())
}

/// The seven cells of the vertical-vertical table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum VvCase {
    I,
    II,
    III,
    IV,
    V,
    VI,
    VII,
}

pub fn vv_case(inv: &FormInvariants) -> Result<VvCase> {
    require_realizable(inv)?;
    let row = if inv.alpha % 2 == 1 { 2 } else if inv.chi1 == Sign::Minus { 0 } else { 1 };
    let col = if inv.beta % 2 == 1 { 2 } else if inv.chi2 == Sign::Minus { 0 } else { 1 };
    use VvCase::*;
    Ok(match (row, col) {
        (0, 0) => I,
        (0, 1) => II,
        (1, 0) => III,
        (1, 1) => IV,
        (1, 2) => V,
        (2, 1) => VI,
        (2, 2) => VII,
        _ => unreachable!("obstructed cells are rejected above"),
    })
}

pub fn vv_closed(inv: &FormInvariants) -> Result<i64> {
    let case = vv_case(inv)?;
    let p = inv.p;
    let (a, b) = (inv.alpha as i64, inv.beta as i64);
    let half = inv.alpha / 2;
    let x = geom(p, half);
    let iii = b + 1 - (b - a + 1) * ipow(p, half) - 2 * x;
    let odd = 2 * geom(p, inv.alpha.div_ceil(2));
    Ok(match case {
        VvCase::I => -(p as i64 + 1) * x,
        VvCase::II => a - (p as i64 + 1) * x,
        VvCase::III | VvCase::V => iii,
        VvCase::IV => iii + a,
        VvCase::VI => a + 1 - odd,
        VvCase::VII => 2 - odd,
    })
}

/// The table value of `hh + hv + vh`.
pub fn horizontal_closed(inv: &FormInvariants) -> Result<i64> {
    let case = vv_case(inv)?;
    let (a, b) = (inv.alpha as i64, inv.beta as i64);
    Ok(match case {
        VvCase::I => a + b,
        VvCase::II => b,
        VvCase::III => a,
        VvCase::IV => 0,
        VvCase::V => a,
        VvCase::VI => b,
        VvCase::VII => a + b - 1,
    })
}

/// `(hh, hv, vh)` evaluated on a realization.
pub fn horizontal_contributions(inv: &FormInvariants) -> Result<(i64, i64, i64)> {
    require_realizable(inv)?;
    let (j, jp) = realize_anticommuting_pair(inv)?;
    let hh = (inv.alpha % 2 == 1 && inv.beta % 2 == 1) as i64;
    Ok((hh, horizontal_vertical(&j, &jp), horizontal_vertical(&jp, &j)))
}

/// The subtracted bracket in the closed form, selected by `(alpha, beta, c)`.
pub fn bracket(p: u64, alpha: u32, beta: u32, c: Sign) -> i64 {
    let half = alpha / 2;
    if alpha % 2 == 1 {
        2 * geom(p, alpha.div_ceil(2))
    } else if c == Sign::Minus {
        ipow(p, half) + 2 * geom(p, half)
    } else {
        (beta as i64 - alpha as i64 + 1) * ipow(p, half) + 2 * geom(p, half)
    }
}

/// Closed form of `e_p` for realizable `q`-invariants.
pub fn e_p_closed(inv: &FormInvariants) -> Result<i64> {
    require_realizable(inv)?;
    Ok(inv.alpha as i64 + inv.beta as i64 + 1 - bracket(inv.p, inv.alpha, inv.beta, inv.chi1))
}

/// Closed form of `e_p` for a `q`-Gram matrix.
pub fn e_p_closed_form(p: u64, t: &BinaryForm) -> Result<i64> {
    t.convention.expect(Convention::SmallQ)?;
    e_p_closed(&diagonalize(p, t)?)
}

/// Realize the invariants and sum all pairings on the tree.
pub fn e_p_bruteforce_inv(inv: &FormInvariants) -> Result<IntersectionBreakdown> {
    let (j, jp) = realize_anticommuting_pair(inv)?;
    e_p_bruteforce(&j, &jp)
}

/// Intersection multiplicity at a prime of good reduction.
pub fn gross_keating(inv: &FormInvariants) -> ExactRational {
    let p = inv.p as i64;
    let (a, b) = (inv.alpha as i64, inv.beta as i64);
    let term = |i: i64| ExactRational::from((a + b - 4 * i) * num_traits::pow(p, i as usize));
    if a % 2 == 1 {
        (0..=(a - 1) / 2).map(term).sum()
    } else {
        let s: ExactRational = (0..a / 2).map(term).sum();
        s + ExactRational::new((b - a + 1) * num_traits::pow(p, (a / 2) as usize), 2)
    }
}

/// Length of the intersection of `Z(j1)` and `Z(j2)` in the ordinary chart
/// at the vertex `v` fixed by `j1` (`q(j1)` a nonsquare unit). The two points
/// of `Z(j1)` are the roots `(a1 ± eta)/b1` with `eta^2 = q(j1)`; the length
/// is the sum of the valuations of `f2` at both, computed in `Q_p(eta)`.
pub fn ordinary_chart_length(
    j1: &SpecialEndomorphism,
    j2: &SpecialEndomorphism,
    v: &LatticeVertex,
) -> Result<u64> {
    let p = j1.p();
    if j1.alpha() != 0 || j1.epsilon_class() != Sign::Minus {
        return Err(Error::InvalidInvariants(
            "first endomorphism must have q a nonsquare unit".into(),
        ));
    }
    if m_of(j1, v) != 0 {
        return Err(Error::ChartMiss);
    }
    let (m1, m2) = (adapted(j1, v), adapted(j2, v));
    if !is_integral(&m2, p) {
        return Err(Error::ChartMiss);
    }
    let (a1, b1) = (m1.get(0, 0), m1.get(0, 1));
    let (a2, b2, c2) = (m2.get(0, 0), m2.get(0, 1), m2.get(1, 0));
    let q1 = j1.q();
    // b1^2 f2((a1 + s eta)/b1) = u + s w eta
    let u = b2 * &(a1 * a1 + q1) - a1 * a2 * b1 * 2 - c2 * b1 * b1;
    let w = (a1 * b2 - a2 * b1) * 2;
    let ord = |x: &ExactRational| val_rat(x, p);
    let inner = match (ord(&u), ord(&w)) {
        (None, None) => return Err(Error::SharedComponent),
        (Some(x), None) | (None, Some(x)) => x,
        (Some(x), Some(y)) => x.min(y),
    };
    let vb1 = ord(b1).ok_or_else(|| Error::Internal("b1 vanishes".into()))?;
    let per_root = inner - 2 * vb1;
    if per_root < 0 {
        return Err(Error::Internal("negative local length".into()));
    }
    Ok(2 * per_root as u64)
}

/// Every realizable tuple on the grid.
pub fn realizable_grid(p: u64, bound: u32) -> Vec<FormInvariants> {
    FormInvariants::grid(p, bound, Convention::SmallQ)
        .into_iter()
        .filter(|i| i.obstruction().is_none())
        .collect()
}

/// Realizes `inv` and checks the realization has Gram matrix in its class.
pub fn realized_gram(inv: &FormInvariants) -> Result<BinaryForm> {
    let (j, jp) = realize_anticommuting_pair(inv)?;
    Ok(gram(&j, &jp))
}
