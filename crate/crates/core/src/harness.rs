//! Grid cross-checks with machine-readable reports.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cycles::{genestier_equation, max_vertex, mult, support_profile, Chart, SupportProfile};
use crate::density::{
    alpha_closed_inv, alpha_prime_s_inv, alpha_prime_sprime_cases, alpha_prime_sprime_via_s,
    density_count_checked, mu_plus_grid, reconcile_relation, section_derivatives,
    whittaker_values_inv, yang_relation_value, CoefficientSource, CountBudget, TernaryFormChoice,
    TernaryTag,
};
use crate::error::{Error, Result};
use crate::forms::{diagonalize, gram, realize_anticommuting_pair, Convention, FormInvariants};
use crate::intersection::{
    e_p_bruteforce, e_p_closed, gross_keating, horizontal_closed, ordinary_chart_length,
    pair_line_with_vertical, pair_line_with_vertical_table, pair_lines, realizable_grid,
    vv_case, vv_closed,
};
use crate::lattice::{dist_to_fixed_locus, elementary_divisors, m_of, preserves, LatticeVertex, SpecialEndomorphism};
use crate::matrix::Mat2;
use crate::padic::{check_prime, val_rat, Sign};
use crate::rational::ExactRational;

pub const DEFAULT_SEED: u64 = 0x5eed_2024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuiteName {
    Triangle,
    Densities,
    Building,
    LocalEquations,
    All,
}

impl SuiteName {
    pub fn name(self) -> &'static str {
        match self {
            SuiteName::Triangle => "triangle",
            SuiteName::Densities => "densities",
            SuiteName::Building => "building",
            SuiteName::LocalEquations => "local-equations",
            SuiteName::All => "all",
        }
    }
}

impl fmt::Display for SuiteName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SuiteName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "triangle" => SuiteName::Triangle,
            "densities" => SuiteName::Densities,
            "building" => SuiteName::Building,
            "local-equations" | "local_equations" => SuiteName::LocalEquations,
            "all" => SuiteName::All,
            _ => return Err(Error::Parse(format!("unknown suite {s:?}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SuiteConfig {
    pub primes: Vec<u64>,
    /// Exponent bound for the `alpha <= beta <= bound` grids.
    pub bound: u32,
    pub seed: u64,
    /// Primes and bound for the counting grid.
    pub density_primes: Vec<u64>,
    pub density_bound: u32,
    /// Counting level; `None` picks `beta + 1` per form.
    pub level: Option<u32>,
    pub budget: CountBudget,
    pub random_vertices: usize,
    pub random_conjugations: usize,
    pub basis_changes: usize,
    pub max_radius: u32,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            primes: vec![3, 5, 7],
            bound: 6,
            seed: DEFAULT_SEED,
            density_primes: vec![3],
            density_bound: 2,
            level: None,
            budget: CountBudget::default(),
            random_vertices: 500,
            random_conjugations: 100,
            basis_changes: 50,
            max_radius: 6,
        }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        for &p in self.primes.iter().chain(&self.density_primes) {
            check_prime(p)?;
        }
        if self.bound == 0 || self.primes.is_empty() {
            return Err(Error::InvalidInvariants("need at least one prime and bound >= 1".into()));
        }
        Ok(())
    }
}

/// One enumerated check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CheckRecord {
    pub suite: &'static str,
    pub check: &'static str,
    pub p: u64,
    pub tuple: String,
    pub values: BTreeMap<String, String>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CheckSummary {
    pub suite: &'static str,
    pub check: &'static str,
    pub total: usize,
    pub passed: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PrintedResidual {
    pub tuple: String,
    pub e_p: i64,
    pub printed: String,
    pub residual: String,
}

/// Solved against printed coefficients of the three-term relation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Discrepancy {
    pub p: u64,
    pub basis: Vec<String>,
    pub solved: [String; 3],
    pub printed: [String; 3],
    pub matches: [bool; 3],
    pub reconciled_holds: bool,
    pub printed_residual_at_origin: String,
    pub printed_failures: usize,
    pub rows: usize,
    pub printed_residuals: Vec<PrintedResidual>,
    pub section_derivatives_printed: [String; 2],
    pub section_derivatives_reconciled: [String; 2],
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GridDescription {
    pub primes: Vec<u64>,
    pub bound: u32,
    pub chi_buckets: &'static str,
    pub density_primes: Vec<u64>,
    pub density_bound: u32,
    pub level: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VerificationReport {
    pub suite: SuiteName,
    pub grid: GridDescription,
    pub seed: u64,
    pub passed: bool,
    pub incomplete: bool,
    pub summary: Vec<CheckSummary>,
    pub checks: Vec<CheckRecord>,
    pub discrepancies: Vec<Discrepancy>,
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn summary_for(&self, check: &str) -> Option<&CheckSummary> {
        self.summary.iter().find(|s| s.check == check)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "suite: {}  seed: {}", self.suite, self.seed);
        let g = &self.grid;
        let _ = writeln!(
            s,
            "grid: p in {:?}, alpha <= beta <= {}, chi buckets {}; counting p in {:?}, bound {}, level {}",
            g.primes, g.bound, g.chi_buckets, g.density_primes, g.density_bound, g.level
        );
        for c in &self.summary {
            let mark = if c.passed == c.total { "ok  " } else { "FAIL" };
            let _ = writeln!(s, "  {mark} {:<16} {:<28} {}/{}", c.suite, c.check, c.passed, c.total);
        }
        for f in self.failures() {
            let vals: Vec<String> = f.values.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let _ = writeln!(s, "  failed: {} p={} {} [{}]", f.check, f.p, f.tuple, vals.join(", "));
        }
        for d in &self.discrepancies {
            let _ = writeln!(s, "three-term relation at p={}:", d.p);
            let _ = writeln!(s, "  solved  (u, v, w) = ({}, {}, {}) from {}", d.solved[0], d.solved[1], d.solved[2], d.basis.join(" "));
            let _ = writeln!(s, "  printed (u, v, w) = ({}, {}, {})", d.printed[0], d.printed[1], d.printed[2]);
            let _ = writeln!(s, "  agreement u/v/w: {}/{}/{}", d.matches[0], d.matches[1], d.matches[2]);
            let _ = writeln!(s, "  reconciled relation holds on {} tuples: {}", d.rows, d.reconciled_holds);
            let _ = writeln!(
                s,
                "  printed relation fails on {} of {} tuples; residual at (0,0): {}",
                d.printed_failures, d.rows, d.printed_residual_at_origin
            );
            let _ = writeln!(
                s,
                "  A'(0), B'(0) in units of log p: printed ({}, {}), reconciled ({}, {})",
                d.section_derivatives_printed[0],
                d.section_derivatives_printed[1],
                d.section_derivatives_reconciled[0],
                d.section_derivatives_reconciled[1]
            );
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        let _ = writeln!(
            s,
            "result: {}{}",
            if self.passed { "PASS" } else { "FAIL" },
            if self.incomplete { " (incomplete)" } else { "" }
        );
        s
    }
}

struct Collector {
    suite: &'static str,
    records: Vec<CheckRecord>,
    notes: Vec<String>,
    incomplete: bool,
}

impl Collector {
    fn new(suite: &'static str) -> Self {
        Self { suite, records: Vec::new(), notes: Vec::new(), incomplete: false }
    }

    fn push(&mut self, check: &'static str, p: u64, tuple: String, values: Vec<(&str, String)>, pass: bool) {
        self.records.push(CheckRecord {
            suite: self.suite,
            check,
            p,
            tuple,
            values: values.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            pass,
        });
    }

    /// Records an error as a failed check; resource errors mark the report
    /// incomplete instead.
    fn error(&mut self, check: &'static str, p: u64, tuple: String, e: Error) {
        if matches!(e, Error::Resource { .. }) {
            self.incomplete = true;
            self.notes.push(format!("{check} p={p} {tuple}: {e}"));
        } else {
            self.push(check, p, tuple, vec![("error", e.to_string())], false);
        }
    }
}

type Outcome = std::result::Result<(Vec<(&'static str, String)>, bool), Error>;

fn absorb(c: &mut Collector, check: &'static str, items: Vec<(u64, String, Outcome)>) {
    for (p, tuple, out) in items {
        match out {
            Ok((values, pass)) => c.push(check, p, tuple, values, pass),
            Err(e) => c.error(check, p, tuple, e),
        }
    }
}

/// Runs `f` over `items` in parallel, keeping the input order.
fn par_checks<T: Sync, F>(items: &[T], f: F) -> Vec<(u64, String, Outcome)>
where
    F: Fn(&T) -> (u64, String, Outcome) + Sync + Send,
{
    items.par_iter().map(f).collect()
}

/// Random element of `GL_2(Q_p)` with integer entries in `[-p^3, p^3]`.
pub fn random_gl2(rng: &mut ChaCha8Rng, p: u64) -> Mat2 {
    let b = (p as i64).pow(3);
    loop {
        let g = Mat2::from_ints(
            rng.random_range(-b..=b),
            rng.random_range(-b..=b),
            rng.random_range(-b..=b),
            rng.random_range(-b..=b),
        );
        if !g.det().is_zero() {
            return g;
        }
    }
}

/// Random walk of a random length `<= radius` from the standard vertex.
pub fn random_vertex(rng: &mut ChaCha8Rng, p: u64, radius: u32) -> LatticeVertex {
    let steps = rng.random_range(0..=radius);
    let mut v = LatticeVertex::standard(p);
    for _ in 0..steps {
        let n = v.neighbors();
        v = n[rng.random_range(0..n.len())].clone();
    }
    v
}

/// Random special endomorphism: a realized `j` of exponent at most 4, moved
/// by a random element of `GL_2(Q_p)`.
pub fn random_endomorphism(rng: &mut ChaCha8Rng, p: u64) -> SpecialEndomorphism {
    let grid = realizable_grid(p, 4);
    let inv = grid[rng.random_range(0..grid.len())];
    let (j, _) = realize_anticommuting_pair(&inv).expect("grid tuples are realizable");
    j.conjugate(&random_gl2(rng, p)).expect("invertible")
}

fn r(x: impl ToString) -> String {
    x.to_string()
}

fn invariant_grid_for(config: &SuiteConfig) -> Vec<FormInvariants> {
    config.primes.iter().flat_map(|&p| realizable_grid(p, config.bound)).collect()
}

fn triangle_suite(config: &SuiteConfig, rng: &mut ChaCha8Rng) -> Collector {
    let mut c = Collector::new("triangle");
    let grid = invariant_grid_for(config);

    let rows = par_checks(&grid, |inv| {
        let out = (|| {
            let (j, jp) = realize_anticommuting_pair(inv)?;
            let round_trip = diagonalize(inv.p, &gram(&j, &jp))? == *inv;
            let brute = e_p_bruteforce(&j, &jp)?;
            let closed = e_p_closed(inv)?;
            let vv = vv_closed(inv)?;
            let h = horizontal_closed(inv)?;
            Ok((
                vec![
                    ("bruteforce", r(brute.total)),
                    ("closed", r(closed)),
                    ("breakdown", format!("{},{},{},{}", brute.hh, brute.hv, brute.vh, brute.vv)),
                    ("vv_case", format!("{:?}", vv_case(inv)?)),
                    ("vv_table", r(vv)),
                    ("horizontal_table", r(h)),
                    ("gram_round_trip", r(round_trip)),
                ],
                brute.total == closed && brute.vv == vv && brute.horizontal_sum() == h && round_trip,
            ))
        })();
        (inv.p, inv.label(), out)
    });
    absorb(&mut c, "triangle-a", rows);

    let rows = par_checks(&grid, |inv| {
        let out = (|| {
            let (j, jp) = realize_anticommuting_pair(inv)?;
            let s = crate::intersection::vv_bruteforce_detailed(&j, &jp, true)?;
            Ok((vec![("support", r(s.support_size)), ("max_distance", r(s.max_distance))], true))
        })();
        (inv.p, inv.label(), out)
    });
    absorb(&mut c, "lemma-table-in-region", rows);

    // swapping the two diagonal entries when alpha = beta
    let rows = par_checks(&grid, |inv| {
        let out = (|| {
            if inv.alpha != inv.beta {
                return Ok((vec![("skipped", r("alpha < beta"))], true));
            }
            let swapped = FormInvariants { chi1: inv.chi2, chi2: inv.chi1, ..*inv };
            let (a, b) = (e_p_closed(inv)?, e_p_closed(&swapped)?);
            Ok((vec![("e_p", r(a)), ("swapped", r(b))], a == b))
        })();
        (inv.p, inv.label(), out)
    });
    absorb(&mut c, "alpha-equals-beta-swap", rows);

    let full: Vec<FormInvariants> = config
        .primes
        .iter()
        .flat_map(|&p| FormInvariants::grid(p, config.bound, Convention::SmallQ))
        .collect();
    let rows = par_checks(&full, |inv| {
        let mu = inv.negated().mu();
        let realizable = inv.is_realizable().unwrap_or(false);
        (inv.p, inv.label(), Ok((vec![("realizable", r(realizable)), ("mu_of_negated", r(mu))], realizable == mu.is_plus())))
    });
    absorb(&mut c, "realizable-iff-mu", rows);

    let gk: Vec<FormInvariants> = config
        .primes
        .iter()
        .flat_map(|&p| FormInvariants::grid(p, config.bound, Convention::BigQ))
        .filter(|i| i.mu() == Sign::Minus)
        .collect();
    let rows = par_checks(&gk, |inv| {
        let out = (|| {
            let g = gross_keating(inv);
            let p = ExactRational::from(inv.p as i64);
            let k = -(&p * &p) / (&p * &p - 1) * alpha_prime_s_inv(inv)?;
            Ok((vec![("gross_keating", r(&g)), ("from_derivative", r(&k))], g == k))
        })();
        (inv.p, inv.label(), out)
    });
    absorb(&mut c, "gross-keating-kitaoka", rows);

    // random changes of basis
    let mut cases = Vec::new();
    for i in 0..config.basis_changes {
        let p = config.primes[i % config.primes.len()];
        let grid = realizable_grid(p, config.bound.min(4));
        let inv = grid[rng.random_range(0..grid.len())];
        cases.push((inv, random_gl2(rng, p)));
    }
    let rows = par_checks(&cases, |(inv, g)| {
        let out = (|| {
            let (j, jp) = realize_anticommuting_pair(inv)?;
            let a = e_p_bruteforce(&j, &jp)?;
            let b = e_p_bruteforce(&j.conjugate(g)?, &jp.conjugate(g)?)?;
            Ok((vec![("g", r(g)), ("before", r(a.total)), ("after", r(b.total))], a.total == b.total))
        })();
        (inv.p, inv.label(), out)
    });
    absorb(&mut c, "basis-invariance", rows);
    c
}

fn local_equation_suite(config: &SuiteConfig, rng: &mut ChaCha8Rng) -> Collector {
    let mut c = Collector::new("local-equations");
    let mut cases = Vec::new();
    for &p in &[3u64, 5] {
        for beta in [2u32, 4] {
            for chi2 in [Sign::Plus, Sign::Minus] {
                cases.push(FormInvariants::new(p, 0, beta, Sign::Minus, chi2, Convention::SmallQ).expect("valid"));
            }
        }
    }
    let rows = par_checks(&cases, |inv| {
        let out = (|| {
            let (j, jp) = realize_anticommuting_pair(inv)?;
            let v = max_vertex(&j);
            let chart = ordinary_chart_length(&j, &jp, &v)? as i64;
            let closed = e_p_closed(inv)?;
            let brute = e_p_bruteforce(&j, &jp)?;
            let beta = inv.beta as i64;
            Ok((
                vec![("chart", r(chart)), ("closed", r(closed)), ("bruteforce", r(brute.total))],
                chart == beta && closed == beta && brute.total == beta,
            ))
        })();
        (inv.p, inv.label(), out)
    });
    absorb(&mut c, "ordinary-chart-length", rows);

    let mut eq_cases = Vec::new();
    for i in 0..100 {
        let p = config.primes[i % config.primes.len()];
        let j = random_endomorphism(rng, p);
        let v = random_vertex(rng, p, 4);
        eq_cases.push((j, v));
    }
    let rows = par_checks(&eq_cases, |(j, v)| {
        let m = m_of(j, v);
        let out = match genestier_equation(j, &Chart::Vertex { v: v.clone() }) {
            Ok(e) => Ok((vec![("content", r(e.content)), ("m", r(m))], e.content == m)),
            Err(Error::ChartMiss) => Ok((vec![("content", r("chart miss")), ("m", r(m))], m < 0)),
            Err(e) => Err(e),
        };
        (j.p(), format!("j={} v={v}", j.matrix()), out)
    });
    absorb(&mut c, "content-equals-m", rows);
    c
}

fn building_suite(config: &SuiteConfig, rng: &mut ChaCha8Rng) -> Collector {
    let mut c = Collector::new("building");

    // distance identity on random vertices: the ball around the fixed locus
    let mut cases = Vec::new();
    for i in 0..config.random_vertices {
        let p = config.primes[i % config.primes.len()];
        let grid = realizable_grid(p, 6);
        let inv = grid[rng.random_range(0..grid.len())];
        let (j, _) = realize_anticommuting_pair(&inv).expect("realizable");
        let g = random_gl2(rng, p);
        let j = j.conjugate(&g).expect("invertible");
        let steps = rng.random_range(0..=(inv.alpha / 2 + 3).min(config.max_radius));
        let mut v = max_vertex(&j);
        for _ in 0..steps {
            let n = v.neighbors();
            v = n[rng.random_range(0..n.len())].clone();
        }
        cases.push((j, v));
    }
    let rows = par_checks(&cases, |(j, v)| {
        let out = (|| {
            let center = max_vertex(j);
            let radius = (j.alpha() / 2 + 3) as u64;
            let top = m_of(j, &center);
            // the maximizers within the ball, grown from the center
            let mut argmax = vec![center.clone()];
            let mut seen: HashSet<LatticeVertex> = argmax.iter().cloned().collect();
            let mut q: VecDeque<LatticeVertex> = argmax.iter().cloned().collect();
            while let Some(w) = q.pop_front() {
                for x in w.neighbors() {
                    if center.distance(&x) <= radius && m_of(j, &x) == top && seen.insert(x.clone()) {
                        argmax.push(x.clone());
                        q.push_back(x);
                    }
                }
            }
            let graph = argmax.iter().map(|f| f.distance(v)).min().expect("nonempty");
            let half = (j.alpha() % 2) as i64;
            let d = dist_to_fixed_locus(j, v);
            Ok((
                vec![("dist_to_fixed_locus", r(d)), ("graph_distance", r(graph))],
                d.doubled == 2 * graph as i64 + half,
            ))
        })();
        (j.p(), format!("j={} v={v}", j.matrix()), out)
    });
    absorb(&mut c, "distance-identity", rows);

    // triangle inequality and adjacency
    let mut pairs = Vec::new();
    for i in 0..config.random_vertices {
        let p = config.primes[i % config.primes.len()];
        let a = random_vertex(rng, p, config.max_radius);
        let b = random_vertex(rng, p, config.max_radius);
        let m = random_vertex(rng, p, config.max_radius);
        pairs.push((a, b, m));
    }
    let rows = par_checks(&pairs, |(a, b, m)| {
        let out = (|| {
            let (dab, dam, dmb) = (a.distance(b), a.distance(m), m.distance(b));
            let g = &a.basis().inverse()? * &b.basis();
            let (e, f) = elementary_divisors(&g, a.p())?;
            let adjacent = a.neighbors().contains(b);
            Ok((
                vec![("d", r(dab)), ("via_divisors", r(e - f)), ("adjacent", r(adjacent))],
                dab <= dam + dmb && dab as i64 == e - f && (dab == 1) == adjacent,
            ))
        })();
        (a.p(), format!("{a} {b}"), out)
    });
    absorb(&mut c, "triangle-inequality", rows);

    // three-case pairing of lines
    let rows = par_checks(&pairs, |(a, b, _)| {
        let d = a.distance(b);
        let pr = pair_lines(a, b);
        let expect = match d {
            0 => -(a.p() as i64 + 1),
            1 => 1,
            _ => 0,
        };
        let near = a.neighbors();
        let self_ok = pair_lines(a, a) == -(a.p() as i64 + 1) && near.iter().all(|w| pair_lines(a, w) == 1);
        (a.p(), format!("{a} {b}"), Ok((vec![("d", r(d)), ("pairing", r(pr))], pr == expect && self_ok)))
    });
    absorb(&mut c, "line-pairing", rows);

    // neighbor sum against the distance table, all five cases
    let mut tcases = Vec::new();
    for &p in &config.primes {
        for inv in realizable_grid(p, 6.min(config.bound.max(2))) {
            tcases.push(inv);
        }
    }
    let rows = par_checks(&tcases, |inv| {
        let out = (|| {
            let (_, jp) = realize_anticommuting_pair(inv)?;
            let center = max_vertex(&jp);
            let radius = jp.alpha().div_ceil(2) + 2;
            let ball = center.ball(radius, crate::lattice::DEFAULT_BALL_CAP)?;
            let mut bad = 0;
            let mut seen = std::collections::BTreeSet::new();
            for v in &ball {
                let (a, b) = (pair_line_with_vertical(v, &jp), pair_line_with_vertical_table(v, &jp));
                seen.insert(b);
                if a != b {
                    bad += 1;
                }
            }
            Ok((
                vec![("vertices", r(ball.len())), ("mismatches", r(bad)), ("values", format!("{seen:?}"))],
                bad == 0,
            ))
        })();
        (inv.p, inv.label(), out)
    });
    absorb(&mut c, "neighbor-sum-table", rows);

    // Lipschitz, support profile, unique midpoint edge
    let mut jcases = Vec::new();
    for i in 0..config.random_conjugations {
        let p = config.primes[i % config.primes.len()];
        jcases.push(random_endomorphism(rng, p));
    }
    let rows = par_checks(&jcases, |j| {
        let out = (|| {
            let center = max_vertex(j);
            let ball = center.ball(j.alpha() / 2 + 2, crate::lattice::DEFAULT_BALL_CAP)?;
            let mut lipschitz = true;
            let mut profile = true;
            for v in &ball {
                let mv = mult(j, v) as i64;
                for w in v.neighbors() {
                    lipschitz &= (mv - mult(j, &w) as i64).abs() <= 1;
                }
                profile &= (support_profile(j, v) == SupportProfile::FullLine) == (mv >= 1);
            }
            let mut edges = 0;
            if j.alpha() % 2 == 1 {
                let top = ((j.alpha() - 1) / 2) as i64;
                for v in &ball {
                    if m_of(j, v) == top {
                        edges += v.neighbors().iter().filter(|w| m_of(j, w) == top).count();
                    }
                }
                edges /= 2;
            }
            let unique = j.alpha() % 2 == 0 || edges == 1;
            Ok((
                vec![("lipschitz", r(lipschitz)), ("profile", r(profile)), ("midpoint_edges", r(edges))],
                lipschitz && profile && unique,
            ))
        })();
        (j.p(), format!("j={}", j.matrix()), out)
    });
    absorb(&mut c, "multiplicity-shape", rows);

    // conjugation equivariance and lattice containment
    let mut ccases = Vec::new();
    for i in 0..config.random_conjugations {
        let p = config.primes[i % config.primes.len()];
        let j = random_endomorphism(rng, p);
        let v = random_vertex(rng, p, config.max_radius);
        let g = random_gl2(rng, p);
        ccases.push((j, v, g));
    }
    let rows = par_checks(&ccases, |(j, v, g)| {
        let out = (|| {
            let a = m_of(j, v);
            let b = m_of(&j.conjugate(g)?, &v.act(g)?);
            Ok((vec![("m", r(a)), ("m_conjugated", r(b))], a == b))
        })();
        (j.p(), format!("j={} v={v} g={g}", j.matrix()), out)
    });
    absorb(&mut c, "conjugation-equivariance", rows);

    let rows = par_checks(&ccases, |(j, v, _)| {
        let out = (|| {
            let image = LatticeVertex::from_basis(j.p(), &(&j.matrix() * &v.basis()))?;
            let det = val_rat(&j.matrix().det(), j.p()).expect("nonzero");
            let by_distance = (v.distance(&image) as i64) <= det;
            let direct = crate::lattice::is_integral(&crate::lattice::adapted(j, v), j.p());
            Ok((
                vec![("preserves", r(preserves(j, v))), ("by_distance", r(by_distance)), ("direct", r(direct))],
                preserves(j, v) == by_distance && by_distance == direct,
            ))
        })();
        (j.p(), format!("j={} v={v}", j.matrix()), out)
    });
    absorb(&mut c, "containment-criterion", rows);
    c
}

fn density_suite(config: &SuiteConfig) -> (Collector, Vec<Discrepancy>) {
    let mut c = Collector::new("densities");
    let budget = config.budget;

    let mut count_cases = Vec::new();
    for &p in &config.density_primes {
        for inv in FormInvariants::grid(p, config.density_bound, Convention::BigQ) {
            for tag in TernaryTag::ALL {
                count_cases.push((inv, tag));
            }
        }
    }
    // each count is itself parallel
    let counted: Vec<_> = count_cases
        .iter()
        .map(|(inv, tag)| {
            let choice = TernaryFormChoice::new(*tag, inv.p).expect("validated prime");
            (inv, tag, density_count_checked(&choice, &inv.diagonal_form(), config.level, &budget))
        })
        .collect();
    for (inv, tag, res) in counted {
        let tuple = format!("{tag} {}", inv.label());
        match res {
            Err(e) => {
                c.error("count-stabilizes", inv.p, tuple.clone(), e.clone());
            }
            Ok(st) => {
                c.push(
                    "count-stabilizes",
                    inv.p,
                    tuple.clone(),
                    vec![
                        ("level", r(st.level)),
                        ("value", r(&st.value)),
                        ("check_level", r(st.check_level)),
                        ("check_value", r(&st.check_value)),
                    ],
                    st.stable,
                );
                match alpha_closed_inv(*tag, inv) {
                    Ok(Some(closed)) => c.push(
                        "count-equals-closed",
                        inv.p,
                        tuple.clone(),
                        vec![("count", r(&st.value)), ("closed", r(&closed)), ("level", r(st.level))],
                        closed == st.value,
                    ),
                    Ok(None) => {}
                    Err(e) => c.error("count-equals-closed", inv.p, tuple.clone(), e),
                }
                let zero = st.value.is_zero();
                let expect_zero = match tag {
                    TernaryTag::S => Some(inv.mu() == Sign::Minus),
                    TernaryTag::Sprime => Some(inv.mu() == Sign::Plus),
                    TernaryTag::Sdoubleprime => None,
                };
                if let Some(ez) = expect_zero {
                    c.push(
                        "dichotomy",
                        inv.p,
                        tuple,
                        vec![("count", r(&st.value)), ("mu", r(inv.mu()))],
                        zero == ez,
                    );
                }
            }
        }
    }

    let plus: Vec<FormInvariants> =
        config.primes.iter().flat_map(|&p| mu_plus_grid(p, config.bound)).collect();
    let rows = par_checks(&plus, |inv| {
        let out = (|| {
            let a = alpha_prime_sprime_cases(inv)?;
            let b = alpha_prime_sprime_via_s(inv)?;
            Ok((vec![("cases", r(&a)), ("via_alpha_s", r(&b))], a == b))
        })();
        (inv.p, inv.label(), out)
    });
    absorb(&mut c, "two-derivative-forms", rows);

    let rows = par_checks(&plus, |inv| {
        let out = (|| {
            let y = yang_relation_value(inv)?;
            Ok((vec![("value", r(&y))], y == ExactRational::one()))
        })();
        (inv.p, inv.label(), out)
    });
    absorb(&mut c, "yang-relation", rows);

    let minus: Vec<FormInvariants> = config
        .primes
        .iter()
        .flat_map(|&p| FormInvariants::grid(p, config.bound, Convention::BigQ))
        .filter(|i| i.mu() == Sign::Minus)
        .collect();
    let rows = par_checks(&minus, |inv| {
        let out = (|| {
            let g = gross_keating(inv);
            let p = ExactRational::from(inv.p as i64);
            let k = -(&p * &p) / (&p * &p - 1) * alpha_prime_s_inv(inv)?;
            Ok((vec![("gross_keating", r(&g)), ("from_derivative", r(&k))], g == k))
        })();
        (inv.p, inv.label(), out)
    });
    absorb(&mut c, "gross-keating-kitaoka", rows);

    let mut discrepancies = Vec::new();
    for &p in &config.primes {
        match reconcile_relation(p, config.bound) {
            Err(e) => c.error("reconciled-relation", p, "grid".into(), e),
            Ok(rec) => {
                for row in &rec.rows {
                    c.push(
                        "reconciled-relation",
                        p,
                        row.invariants.label(),
                        vec![("e_p_of_negative", r(row.e_p)), ("reconciled", r(&row.reconciled))],
                        row.reconciled == ExactRational::from(row.e_p),
                    );
                }
                c.push(
                    "outer-coefficients",
                    p,
                    "u,w".into(),
                    vec![("u", r(&rec.solved.u)), ("w", r(&rec.solved.w))],
                    rec.u_matches_printed && rec.w_matches_printed,
                );
                let rows = par_checks(&rec.rows, |row| {
                    let out = (|| {
                        let w = whittaker_values_inv(&row.invariants, CoefficientSource::Reconciled)?;
                        Ok((
                            vec![("combined", r(&w.w_prime_combined)), ("target", r(&w.target))],
                            w.matches_target,
                        ))
                    })();
                    (p, row.invariants.label(), out)
                });
                absorb(&mut c, "whittaker-reconciled", rows);
                let printed_d = section_derivatives(p, CoefficientSource::Printed);
                let solved_d = section_derivatives(p, CoefficientSource::Reconciled);
                let pair = |x: Result<(ExactRational, ExactRational)>| match x {
                    Ok((a, b)) => [a.to_string(), b.to_string()],
                    Err(e) => [e.to_string(), String::new()],
                };
                discrepancies.push(Discrepancy {
                    p,
                    basis: rec.basis.iter().map(|i| i.label()).collect(),
                    solved: [r(&rec.solved.u), r(&rec.solved.v), r(&rec.solved.w)],
                    printed: [r(&rec.printed.u), r(&rec.printed.v), r(&rec.printed.w)],
                    matches: [rec.u_matches_printed, rec.v_matches_printed, rec.w_matches_printed],
                    reconciled_holds: rec.reconciled_holds,
                    printed_residual_at_origin: r(&rec.printed_residual_at_origin),
                    printed_failures: rec.printed_failures(),
                    rows: rec.rows.len(),
                    printed_residuals: rec
                        .rows
                        .iter()
                        .map(|row| PrintedResidual {
                            tuple: row.invariants.label(),
                            e_p: row.e_p,
                            printed: r(&row.printed),
                            residual: r(&row.printed_residual),
                        })
                        .collect(),
                    section_derivatives_printed: pair(printed_d),
                    section_derivatives_reconciled: pair(solved_d),
                });
            }
        }
    }
    (c, discrepancies)
}

fn summarize(records: &[CheckRecord]) -> Vec<CheckSummary> {
    let mut out: Vec<CheckSummary> = Vec::new();
    for rec in records {
        match out.iter_mut().find(|s| s.check == rec.check && s.suite == rec.suite) {
            Some(s) => {
                s.total += 1;
                s.passed += rec.pass as usize;
            }
            None => out.push(CheckSummary {
                suite: rec.suite,
                check: rec.check,
                total: 1,
                passed: rec.pass as usize,
            }),
        }
    }
    out
}

/// Runs a suite. Every suite draws its random cases from its own generator
/// seeded with `config.seed`, so results do not depend on which other suites
/// ran.
pub fn run_suite(name: SuiteName, config: &SuiteConfig) -> Result<VerificationReport> {
    config.validate()?;
    let suites: Vec<SuiteName> = match name {
        SuiteName::All => vec![
            SuiteName::Building,
            SuiteName::LocalEquations,
            SuiteName::Triangle,
            SuiteName::Densities,
        ],
        s => vec![s],
    };
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    let mut discrepancies = Vec::new();
    let mut incomplete = false;
    for s in suites {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let col = match s {
            SuiteName::Triangle => triangle_suite(config, &mut rng),
            SuiteName::Building => building_suite(config, &mut rng),
            SuiteName::LocalEquations => local_equation_suite(config, &mut rng),
            SuiteName::Densities => {
                let (c, d) = density_suite(config);
                discrepancies.extend(d);
                c
            }
            SuiteName::All => unreachable!(),
        };
        checks.extend(col.records);
        notes.extend(col.notes);
        incomplete |= col.incomplete;
    }
    let summary = summarize(&checks);
    let passed = checks.iter().all(|c| c.pass) && !incomplete;
    Ok(VerificationReport {
        suite: name,
        grid: GridDescription {
            primes: config.primes.clone(),
            bound: config.bound,
            chi_buckets: "chi1, chi2 in {+1, -1}",
            density_primes: config.density_primes.clone(),
            density_bound: config.density_bound,
            level: config.level.map_or_else(|| "auto (beta + 1)".to_string(), |l| l.to_string()),
        },
        seed: config.seed,
        passed,
        incomplete,
        summary,
        checks,
        discrepancies,
        notes,
    })
}
