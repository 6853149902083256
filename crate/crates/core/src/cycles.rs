//! A single special cycle `Z(j)`: fixed-locus shape, vertical multiplicities,
//! horizontal part and local equations in vertex and edge charts.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lattice::{is_integral, m_of, HalfInteger, LatticeVertex, SpecialEndomorphism};
use crate::matrix::Mat2;
use crate::padic::{val_rat, Sign};
use crate::rational::ExactRational;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixedLocusKind {
    VertexBall,
    ApartmentTube,
    MidpointBall,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct FixedLocusShape {
    pub kind: FixedLocusKind,
    pub radius: HalfInteger,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SupportProfile {
    TwoSuperspecial,
    TwoOrdinarySpecial,
    OneSuperspecial,
    FullLine,
    Empty,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HorizontalKind {
    Empty,
    TwoUnramifiedLegs,
    OneRamifiedLeg,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Anchor {
    Vertex(LatticeVertex),
    Edge(LatticeVertex, LatticeVertex),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HorizontalPart {
    pub kind: HorizontalKind,
    pub anchor: Option<Anchor>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CycleDecomposition {
    pub vertical: BTreeMap<LatticeVertex, u64>,
    pub horizontal: HorizontalPart,
    /// Embedded points at superspecial points of the tube; irrelevant to
    /// intersection numbers.
    pub embedded_components: bool,
}

impl Serialize for CycleDecomposition {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        #[derive(Serialize)]
        struct Entry<'a> {
            vertex: &'a LatticeVertex,
            mult: u64,
        }
        let vertical: Vec<Entry> = self
            .vertical
            .iter()
            .map(|(vertex, &mult)| Entry { vertex, mult })
            .collect();
        let mut st = s.serialize_struct("CycleDecomposition", 3)?;
        st.serialize_field("vertical", &vertical)?;
        st.serialize_field("horizontal", &self.horizontal)?;
        st.serialize_field("embedded_components", &self.embedded_components)?;
        st.end()
    }
}

/// `max(m_[L](j), 0)`.
pub fn mult(j: &SpecialEndomorphism, v: &LatticeVertex) -> u64 {
    m_of(j, v).max(0) as u64
}

pub fn fixed_locus_shape(j: &SpecialEndomorphism) -> FixedLocusShape {
    let alpha = j.alpha();
    let kind = if alpha % 2 == 1 {
        FixedLocusKind::MidpointBall
    } else if j.epsilon_class() == Sign::Minus {
        FixedLocusKind::VertexBall
    } else {
        FixedLocusKind::ApartmentTube
    };
    FixedLocusShape { kind, radius: HalfInteger::from_doubled(alpha as i64) }
}

/// How `Z(j)` meets the line `P_[L]`.
pub fn support_profile(j: &SpecialEndomorphism, v: &LatticeVertex) -> SupportProfile {
    let m = m_of(j, v);
    if m < 0 {
        return SupportProfile::Empty;
    }
    if m >= 1 {
        return SupportProfile::FullLine;
    }
    // m = 0: the reduction mod p is nonzero; it has rank 2 iff q(j) is a unit
    if j.alpha() > 0 {
        SupportProfile::OneSuperspecial
    } else if j.epsilon_class() == Sign::Plus {
        SupportProfile::TwoSuperspecial
    } else {
        SupportProfile::TwoOrdinarySpecial
    }
}

/// Steepest ascent of `f` from `start`; stops at a vertex with no strictly
/// better neighbor. For functions concave along geodesics this is a global
/// maximum.
pub fn hill_climb<F: Fn(&LatticeVertex) -> i64>(start: LatticeVertex, f: F) -> (LatticeVertex, i64) {
    let mut cur = start;
    let mut val = f(&cur);
    loop {
        let best = cur
            .neighbors()
            .into_iter()
            .map(|w| {
                let fw = f(&w);
                (w, fw)
            })
            .max_by_key(|(_, fw)| *fw)
            .expect("p+1 neighbors");
        if best.1 <= val {
            return (cur, val);
        }
        cur = best.0;
        val = best.1;
    }
}

/// A vertex maximizing `m_[L](j)`.
pub fn max_vertex(j: &SpecialEndomorphism) -> LatticeVertex {
    hill_climb(LatticeVertex::standard(j.p()), |v| m_of(j, v)).0
}

/// The unique vertex fixed by `j` (`alpha` even, `chi(eps) = -1`).
pub fn fixed_vertex(j: &SpecialEndomorphism) -> Option<LatticeVertex> {
    (fixed_locus_shape(j).kind == FixedLocusKind::VertexBall).then(|| max_vertex(j))
}

/// The edge whose midpoint `j` fixes (`alpha` odd).
pub fn fixed_edge(j: &SpecialEndomorphism) -> Option<(LatticeVertex, LatticeVertex)> {
    if j.alpha() % 2 == 0 {
        return None;
    }
    let v = max_vertex(j);
    let mv = m_of(j, &v);
    let w = v.neighbors().into_iter().find(|w| m_of(j, w) == mv)?;
    Some((v, w))
}

pub fn horizontal_part(j: &SpecialEndomorphism) -> HorizontalPart {
    match fixed_locus_shape(j).kind {
        FixedLocusKind::ApartmentTube => HorizontalPart { kind: HorizontalKind::Empty, anchor: None },
        FixedLocusKind::VertexBall => HorizontalPart {
            kind: HorizontalKind::TwoUnramifiedLegs,
            anchor: fixed_vertex(j).map(Anchor::Vertex),
        },
        FixedLocusKind::MidpointBall => HorizontalPart {
            kind: HorizontalKind::OneRamifiedLeg,
            anchor: fixed_edge(j).map(|(v, w)| Anchor::Edge(v, w)),
        },
    }
}

pub fn cycle_decomposition(j: &SpecialEndomorphism, region: &[LatticeVertex]) -> CycleDecomposition {
    let vertical = region
        .par_iter()
        .filter_map(|v| {
            let k = mult(j, v);
            (k > 0).then(|| (v.clone(), k))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect();
    CycleDecomposition {
        vertical,
        horizontal: horizontal_part(j),
        embedded_components: j.alpha() >= 1,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Chart {
    Vertex { v: LatticeVertex },
    Edge { v: LatticeVertex, w: LatticeVertex },
}

/// Local equations of `Z(j)` in a chart, after moving the chart to the
/// standard vertex or edge by the integral base change `base_change`.
///
/// Vertex chart: one equation `c0 T^2 + c1 T + c2` with
/// `(c0, c1, c2) = (b, -2a, -c)`. Edge chart: the pair `T0 L`, `T1 L` with
/// `L = c0 T0 + c1 + c2 T1` and `(c0, c1, c2) = (b0, -2a, -c)`, `b = p b0`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GenestierEquation {
    pub chart: Chart,
    pub base_change: Mat2,
    pub adapted: Mat2,
    pub coefficients: [ExactRational; 3],
    /// `m` in `p^m * (primitive part)`.
    pub content: i64,
    pub primitive: [ExactRational; 3],
    pub embedded_component: bool,
}

impl GenestierEquation {
    pub fn render(&self, p: u64) -> Vec<String> {
        let [c0, c1, c2] = &self.primitive;
        let scale = if self.content == 0 {
            String::new()
        } else {
            format!("{p}^{} * ", self.content)
        };
        match self.chart {
            Chart::Vertex { .. } => vec![format!("{scale}(({c0})*T^2 + ({c1})*T + ({c2})) = 0")],
            Chart::Edge { .. } => ["T0", "T1"]
                .iter()
                .map(|t| format!("{scale}{t}*(({c0})*T0 + ({c1}) + ({c2})*T1) = 0"))
                .collect(),
        }
    }
}

fn content_of(p: u64, c: &[ExactRational; 3]) -> Result<(i64, [ExactRational; 3])> {
    let m = c
        .iter()
        .filter(|x| !x.is_zero())
        .map(|x| val_rat(x, p).unwrap())
        .min()
        .ok_or_else(|| Error::Internal("all coefficients vanish".into()))?;
    let s = ExactRational::prime_power(p, -m);
    Ok((m, [&c[0] * &s, &c[1] * &s, &c[2] * &s]))
}

/// Basis `B` of the lattice at `v` with the lattice at `w` equal to the class
/// of `B diag(p, 1)`.
fn edge_basis(v: &LatticeVertex, w: &LatticeVertex) -> Result<Mat2> {
    let p = v.p();
    let pi = p as i64;
    for i in 0..pi {
        let child = &v.basis() * &Mat2::from_ints(pi, i, 0, 1);
        if LatticeVertex::from_basis(p, &child)? == *w {
            return Ok(&v.basis() * &Mat2::from_ints(1, i, 0, 1));
        }
        let parent_child = &w.basis() * &Mat2::from_ints(pi, i, 0, 1);
        if LatticeVertex::from_basis(p, &parent_child)? == *v {
            return Ok(&w.basis() * &Mat2::from_ints(i, pi, 1, 0));
        }
    }
    Err(Error::NotAdjacent(v.to_string(), w.to_string()))
}

pub fn genestier_equation(j: &SpecialEndomorphism, chart: &Chart) -> Result<GenestierEquation> {
    let p = j.p();
    let base_change = match chart {
        Chart::Vertex { v } => v.basis(),
        Chart::Edge { v, w } => edge_basis(v, w)?,
    };
    let adapted = &(&base_change.inverse()? * &j.matrix()) * &base_change;
    if !is_integral(&adapted, p) {
        return Err(Error::ChartMiss);
    }
    let (a, b, c) = (adapted.get(0, 0), adapted.get(0, 1), adapted.get(1, 0));
    let coefficients = match chart {
        Chart::Vertex { .. } => [b.clone(), -(a * 2), -c],
        Chart::Edge { .. } => {
            if !b.is_zero() && val_rat(b, p).unwrap() < 1 {
                return Err(Error::ChartMiss);
            }
            [b / p as i64, -(a * 2), -c]
        }
    };
    let (content, primitive) = content_of(p, &coefficients)?;
    let embedded_component = matches!(chart, Chart::Edge { .. }) && j.alpha() >= 1;
    Ok(GenestierEquation {
        chart: chart.clone(),
        base_change,
        adapted,
        coefficients,
        content,
        primitive,
        embedded_component,
    })
}

impl fmt::Display for Anchor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Anchor::Vertex(v) => write!(f, "{v}"),
            Anchor::Edge(v, w) => write!(f, "{v} -- {w}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::DEFAULT_BALL_CAP;
    use crate::rational::q;

    fn je(p: u64, a: i64, b: i64, c: i64) -> SpecialEndomorphism {
        SpecialEndomorphism::from_ints(p, a, b, c).unwrap()
    }

    fn class_of(p: u64, a: i64, b: i64, c: i64, d: i64) -> LatticeVertex {
        LatticeVertex::from_basis(p, &Mat2::from_ints(a, b, c, d)).unwrap()
    }

    #[test]
    fn mult_examples() {
        let o = LatticeVertex::standard(3);
        let j = je(3, 0, 6, 3);
        assert_eq!(mult(&j, &o), 1);
        for w in o.neighbors() {
            assert_eq!(mult(&j, &w), 0);
        }
        let j0 = je(3, 0, 2, 1);
        for w in o.ball(3, DEFAULT_BALL_CAP).unwrap() {
            assert_eq!(mult(&j0, &w), 0);
        }
    }

    #[test]
    fn shapes() {
        let s = fixed_locus_shape(&je(3, 0, 18, 1));
        assert_eq!(s.kind, FixedLocusKind::VertexBall);
        assert_eq!(s.radius, HalfInteger::from_int(1));
        let s = fixed_locus_shape(&je(3, 9, 0, 0));
        assert_eq!(s.kind, FixedLocusKind::ApartmentTube);
        assert_eq!(s.radius, HalfInteger::from_int(2));
        let s = fixed_locus_shape(&je(3, 0, 3, 1));
        assert_eq!(s.kind, FixedLocusKind::MidpointBall);
        assert_eq!(s.radius, HalfInteger::from_doubled(1));
    }

    #[test]
    fn support_profiles() {
        let o = LatticeVertex::standard(3);
        assert_eq!(support_profile(&je(3, 0, 1, 1), &o), SupportProfile::TwoSuperspecial);
        assert_eq!(support_profile(&je(3, 0, 2, 1), &o), SupportProfile::TwoOrdinarySpecial);
        assert_eq!(support_profile(&je(3, 0, 3, 1), &o), SupportProfile::OneSuperspecial);
        assert_eq!(support_profile(&je(3, 3, 0, 0), &o), SupportProfile::FullLine);
        let far = class_of(3, 3, 0, 0, 1);
        assert_eq!(support_profile(&je(3, 0, 2, 1), &far), SupportProfile::Empty);
    }

    #[test]
    fn horizontal_examples() {
        let h = horizontal_part(&je(5, 25, 0, 0));
        assert_eq!(h, HorizontalPart { kind: HorizontalKind::Empty, anchor: None });
        let o = LatticeVertex::standard(3);
        let h = horizontal_part(&je(3, 0, 2, 1));
        assert_eq!(h.kind, HorizontalKind::TwoUnramifiedLegs);
        assert_eq!(h.anchor, Some(Anchor::Vertex(o.clone())));
        let h = horizontal_part(&je(3, 0, 3, 1));
        assert_eq!(h.kind, HorizontalKind::OneRamifiedLeg);
        let l1 = class_of(3, 3, 0, 0, 1);
        match h.anchor {
            Some(Anchor::Edge(v, w)) => {
                let mut e = [v, w];
                e.sort();
                let mut want = [o, l1];
                want.sort();
                assert_eq!(e, want);
            }
            other => panic!("unexpected anchor {other:?}"),
        }
    }

    #[test]
    fn decomposition_examples() {
        let o = LatticeVertex::standard(3);
        let d = cycle_decomposition(&je(3, 0, 2, 1), &o.ball(2, DEFAULT_BALL_CAP).unwrap());
        assert!(d.vertical.is_empty());
        assert_eq!(d.horizontal.kind, HorizontalKind::TwoUnramifiedLegs);
        assert!(!d.embedded_components);

        let d = cycle_decomposition(&je(3, 0, 6, 3), &o.ball(2, DEFAULT_BALL_CAP).unwrap());
        assert_eq!(d.vertical.len(), 1);
        assert_eq!(d.vertical.get(&o), Some(&1));
        assert_eq!(d.horizontal.kind, HorizontalKind::TwoUnramifiedLegs);

        let d = cycle_decomposition(&je(3, 3, 0, 0), &o.ball(1, DEFAULT_BALL_CAP).unwrap());
        let apartment: Vec<_> = [(1, 1), (3, 1), (1, 3)]
            .iter()
            .map(|&(a, d)| class_of(3, a, 0, 0, d))
            .collect();
        assert_eq!(d.vertical.len(), 3);
        for v in &apartment {
            assert_eq!(d.vertical.get(v), Some(&1));
        }
        assert_eq!(d.horizontal.kind, HorizontalKind::Empty);
    }

    #[test]
    fn vertex_chart_equation() {
        let o = LatticeVertex::standard(3);
        let e = genestier_equation(&je(3, 1, 0, 0), &Chart::Vertex { v: o }).unwrap();
        assert_eq!(e.coefficients, [q(0, 1), q(-2, 1), q(0, 1)]);
        assert_eq!(e.content, 0);
    }

    #[test]
    fn edge_chart_equations() {
        let o = LatticeVertex::standard(3);
        let l1 = class_of(3, 3, 0, 0, 1);
        let chart = Chart::Edge { v: o.clone(), w: l1.clone() };
        let e = genestier_equation(&je(3, 0, 3, 1), &chart).unwrap();
        assert_eq!(e.base_change, Mat2::identity());
        assert_eq!(e.coefficients, [q(1, 1), q(0, 1), q(-1, 1)]);
        assert_eq!(e.content, 0);
        assert!(e.embedded_component);

        let e = genestier_equation(&je(3, 3, 0, 0), &chart).unwrap();
        assert_eq!(e.content, 1);
        assert_eq!(e.primitive, [q(0, 1), q(-2, 1), q(0, 1)]);

        // j = [[0,2],[1,0]] has no superspecial points
        assert_eq!(genestier_equation(&je(3, 0, 2, 1), &chart), Err(Error::ChartMiss));
        // reversed orientation uses the parent basis
        let rev = Chart::Edge { v: l1, w: o.clone() };
        let e = genestier_equation(&je(3, 3, 0, 0), &rev).unwrap();
        assert_eq!(e.content, 1);
        let far = class_of(3, 9, 0, 0, 1);
        assert!(matches!(
            genestier_equation(&je(3, 3, 0, 0), &Chart::Edge { v: o, w: far }),
            Err(Error::NotAdjacent(..))
        ));
    }

    #[test]
    fn vertex_chart_content_is_m() {
        let p = 5;
        let j = je(p, 5, 50, -25);
        for v in LatticeVertex::standard(p).ball(2, DEFAULT_BALL_CAP).unwrap() {
            match genestier_equation(&j, &Chart::Vertex { v: v.clone() }) {
                Ok(e) => assert_eq!(e.content, m_of(&j, &v)),
                Err(Error::ChartMiss) => assert!(m_of(&j, &v) < 0),
                Err(e) => panic!("{e}"),
            }
        }
    }
}
