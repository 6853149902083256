use btcycles_core::cycles::{max_vertex, mult, support_profile, SupportProfile};
use btcycles_core::density::{
    alpha_closed_inv, alpha_prime_s_inv, alpha_prime_sprime_cases, alpha_prime_sprime_via_s,
    density_count, density_count_checked, yang_relation_value, CountBudget, TernaryFormChoice,
    TernaryTag,
};
use btcycles_core::forms::{
    diagonalize, gram, is_realizable, mu_p, realize_anticommuting_pair, BinaryForm, Convention,
    FormInvariants,
};
use btcycles_core::harness::{random_endomorphism, random_gl2, random_vertex, run_suite, SuiteConfig, SuiteName};
use btcycles_core::intersection::{e_p_bruteforce, e_p_closed, gross_keating, ordinary_chart_length};
use btcycles_core::lattice::{dist_to_fixed_locus, m_of, preserves, LatticeVertex};
use btcycles_core::matrix::Mat2;
use btcycles_core::padic::{val_int, PAdicContext, Sign};
use btcycles_core::rational::ExactRational;
use num_bigint::BigInt;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn prime() -> impl Strategy<Value = u64> {
    prop::sample::select(vec![3u64, 5, 7, 11])
}

fn small_prime() -> impl Strategy<Value = u64> {
    prop::sample::select(vec![3u64, 5, 7])
}

fn sign() -> impl Strategy<Value = Sign> {
    prop_oneof![Just(Sign::Plus), Just(Sign::Minus)]
}

fn nonzero() -> impl Strategy<Value = i64> {
    (-2000i64..2000).prop_filter("nonzero", |x| *x != 0)
}

fn invariants(bound: u32, conv: Convention) -> impl Strategy<Value = FormInvariants> {
    (small_prime(), 0..=bound, 0..=bound, sign(), sign()).prop_map(move |(p, a, b, c1, c2)| {
        FormInvariants::new(p, a.min(b), a.max(b), c1, c2, conv).unwrap()
    })
}

fn realizable(bound: u32) -> impl Strategy<Value = FormInvariants> {
    invariants(bound, Convention::SmallQ).prop_filter("realizable", |i| i.realizable_any())
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Integral matrix invertible over Z_p.
fn unimodular_p(p: u64, e: [i64; 4]) -> Option<Mat2> {
    let g = Mat2::from_ints(e[0], e[1], e[2], e[3]);
    let d = e[0] * e[3] - e[1] * e[2];
    (d != 0 && d.rem_euclid(p as i64) != 0).then_some(g)
}

fn r(n: i64) -> ExactRational {
    ExactRational::from(n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn valuation_is_additive(p in prime(), a in nonzero(), b in nonzero()) {
        let va = val_int(&BigInt::from(a), p).unwrap();
        let vb = val_int(&BigInt::from(b), p).unwrap();
        prop_assert_eq!(val_int(&BigInt::from(a * b), p).unwrap(), va + vb);
    }

    #[test]
    fn character_is_multiplicative(p in prime(), a in nonzero(), b in nonzero()) {
        let ctx = PAdicContext::new(p, 8).unwrap();
        let (x, y) = (r(a), r(b));
        let xy = &x * &y;
        prop_assert_eq!(
            ctx.chi_unit_part(&xy).unwrap(),
            ctx.chi_unit_part(&x).unwrap() * ctx.chi_unit_part(&y).unwrap()
        );
    }

    #[test]
    fn hilbert_symbol_laws(p in prime(), a in nonzero(), b in nonzero(), c in nonzero()) {
        let ctx = PAdicContext::new(p, 8).unwrap();
        let (a, b, c) = (r(a), r(b), r(c));
        let h = |x: &ExactRational, y: &ExactRational| ctx.hilbert_symbol(x, y).unwrap();
        prop_assert_eq!(h(&a, &b), h(&b, &a));
        prop_assert_eq!(h(&a, &(&b * &c)), h(&a, &b) * h(&a, &c));
        prop_assert_eq!(h(&a, &-&a), Sign::Plus);
    }

    #[test]
    fn hensel_root_squares(p in prime(), x in 1i64..500, n in 1u32..12) {
        let ctx = PAdicContext::new(p, n).unwrap();
        prop_assume!(x % p as i64 != 0);
        let u = r(x * x);
        let root = ctx.hensel_sqrt(&u, Some(n)).unwrap();
        let m = BigInt::from(p).pow(n);
        prop_assert_eq!((&root * &root - BigInt::from(x * x)) % &m, BigInt::from(0));
    }

    #[test]
    fn tree_metric(p in small_prime(), seed in any::<u64>()) {
        let mut g = rng(seed);
        let a = random_vertex(&mut g, p, 6);
        let b = random_vertex(&mut g, p, 6);
        let c = random_vertex(&mut g, p, 6);
        prop_assert!(a.distance(&b) <= a.distance(&c) + c.distance(&b));
        prop_assert_eq!(a.distance(&b), b.distance(&a));
        let near = a.neighbors();
        prop_assert_eq!(near.len() as u64, p + 1);
        prop_assert!(near.iter().all(|w| a.distance(w) == 1));
    }

    #[test]
    fn group_action_is_isometric(p in small_prime(), seed in any::<u64>()) {
        let mut g = rng(seed);
        let a = random_vertex(&mut g, p, 5);
        let b = random_vertex(&mut g, p, 5);
        let h = random_gl2(&mut g, p);
        prop_assert_eq!(a.act(&h).unwrap().distance(&b.act(&h).unwrap()), a.distance(&b));
    }

    #[test]
    fn m_is_conjugation_equivariant(p in small_prime(), seed in any::<u64>()) {
        let mut g = rng(seed);
        let j = random_endomorphism(&mut g, p);
        let v = random_vertex(&mut g, p, 5);
        let h = random_gl2(&mut g, p);
        prop_assert_eq!(m_of(&j.conjugate(&h).unwrap(), &v.act(&h).unwrap()), m_of(&j, &v));
    }

    #[test]
    fn preserved_iff_m_nonnegative(p in small_prime(), seed in any::<u64>()) {
        let mut g = rng(seed);
        let j = random_endomorphism(&mut g, p);
        let v = random_vertex(&mut g, p, 5);
        prop_assert_eq!(preserves(&j, &v), m_of(&j, &v) >= 0);
    }

    #[test]
    fn multiplicity_shape(p in small_prime(), seed in any::<u64>()) {
        let mut g = rng(seed);
        let j = random_endomorphism(&mut g, p);
        let mut v = max_vertex(&j);
        let top = m_of(&j, &v);
        prop_assert_eq!(top, (j.alpha() / 2) as i64);
        for _ in 0..4 {
            let mv = mult(&j, &v) as i64;
            for w in v.neighbors() {
                prop_assert!((mv - mult(&j, &w) as i64).abs() <= 1);
            }
            prop_assert_eq!(support_profile(&j, &v) == SupportProfile::FullLine, mv >= 1);
            // distance to the fixed locus falls off linearly from the top
            prop_assert_eq!(dist_to_fixed_locus(&j, &v).doubled, j.alpha() as i64 - 2 * m_of(&j, &v));
            let n = v.neighbors();
            v = n[(seed as usize) % n.len()].clone();
        }
    }

    #[test]
    fn invariants_are_basis_independent(p in small_prime(), t in (nonzero(), -500i64..500, nonzero()), e in prop::array::uniform4(-40i64..40)) {
        let form = BinaryForm::from_ints(t.0, t.1, t.2, Convention::BigQ);
        prop_assume!(!form.det().is_zero());
        let Some(g) = unimodular_p(p, e) else { return Ok(()) };
        let a = diagonalize(p, &form).unwrap();
        let b = diagonalize(p, &form.transform(&g)).unwrap();
        prop_assert!(a.equivalent(&b), "{} vs {}", a.label(), b.label());
        prop_assert_eq!(a.mu(), b.mu());
        prop_assert_eq!(mu_p(p, &form).unwrap(), a.mu());
    }

    #[test]
    fn realization_round_trip(inv in realizable(5)) {
        let (j, jp) = realize_anticommuting_pair(&inv).unwrap();
        prop_assert!(j.anticommutes_with(&jp));
        let back = diagonalize(inv.p, &gram(&j, &jp)).unwrap();
        prop_assert!(back.equivalent(&inv), "{} vs {}", back.label(), inv.label());
    }

    #[test]
    fn realizable_iff_mu(inv in invariants(5, Convention::SmallQ)) {
        prop_assert_eq!(is_realizable(&inv).unwrap(), inv.negated().mu() == Sign::Plus);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn closed_form_equals_tree_sum(inv in realizable(4)) {
        let (j, jp) = realize_anticommuting_pair(&inv).unwrap();
        prop_assert_eq!(e_p_bruteforce(&j, &jp).unwrap().total, e_p_closed(&inv).unwrap());
    }

    #[test]
    fn tree_sum_is_basis_independent(inv in realizable(3), seed in any::<u64>()) {
        let mut g = rng(seed);
        let h = random_gl2(&mut g, inv.p);
        let (j, jp) = realize_anticommuting_pair(&inv).unwrap();
        let a = e_p_bruteforce(&j, &jp).unwrap().total;
        let b = e_p_bruteforce(&j.conjugate(&h).unwrap(), &jp.conjugate(&h).unwrap()).unwrap().total;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn chart_length_under_conjugation(p in prop::sample::select(vec![3u64, 5]), half in 1u32..=2, chi2 in sign(), seed in any::<u64>()) {
        let inv = FormInvariants::new(p, 0, 2 * half, Sign::Minus, chi2, Convention::SmallQ).unwrap();
        let (j, jp) = realize_anticommuting_pair(&inv).unwrap();
        let h = random_gl2(&mut rng(seed), p);
        let (j, jp) = (j.conjugate(&h).unwrap(), jp.conjugate(&h).unwrap());
        prop_assert_eq!(ordinary_chart_length(&j, &jp, &max_vertex(&j)).unwrap() as u32, 2 * half);
    }

    #[test]
    fn density_identities(inv in invariants(6, Convention::BigQ)) {
        if inv.mu() == Sign::Plus {
            prop_assert_eq!(yang_relation_value(&inv).unwrap(), ExactRational::one());
            prop_assert_eq!(alpha_prime_sprime_cases(&inv).unwrap(), alpha_prime_sprime_via_s(&inv).unwrap());
        } else {
            let p = r(inv.p as i64);
            let p2 = &p * &p;
            let k = -(&p2 / (&p2 - 1)) * alpha_prime_s_inv(&inv).unwrap();
            prop_assert_eq!(k, gross_keating(&inv));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn count_matches_closed_form_off_diagonal(
        tag in prop::sample::select(TernaryTag::ALL.to_vec()),
        e in prop::array::uniform4(-9i64..9),
        inv in (0u32..=1, 0u32..=1, sign(), sign()),
    ) {
        let p = 3;
        let base = FormInvariants::new(p, inv.0.min(inv.1), inv.0.max(inv.1), inv.2, inv.3, Convention::BigQ).unwrap();
        let Some(g) = unimodular_p(p, e) else { return Ok(()) };
        let t = base.diagonal_form().transform(&g);
        let choice = TernaryFormChoice::new(tag, p).unwrap();
        let got = density_count_checked(&choice, &t, None, &CountBudget::default()).unwrap();
        prop_assert!(got.stable);
        if let Some(closed) = alpha_closed_inv(tag, &base).unwrap() {
            prop_assert_eq!(got.value, closed);
        }
    }

    #[test]
    fn count_is_flat_past_beta_plus_two(
        tag in prop::sample::select(TernaryTag::ALL.to_vec()),
        inv in invariants(1, Convention::BigQ).prop_filter("p = 3", |i| i.p == 3),
    ) {
        let choice = TernaryFormChoice::new(tag, 3).unwrap();
        let t = inv.diagonal_form();
        let budget = CountBudget::default();
        let a = density_count(&choice, &t, inv.beta + 2, &budget).unwrap();
        let b = density_count(&choice, &t, inv.beta + 3, &budget).unwrap();
        prop_assert_eq!(a.value, b.value);
    }
}

#[test]
fn suites_are_deterministic() {
    let config = SuiteConfig { random_vertices: 40, random_conjugations: 10, basis_changes: 10, ..SuiteConfig::default() };
    for suite in [SuiteName::Triangle, SuiteName::Building] {
        let a = run_suite(suite, &config).unwrap().to_json();
        let b = run_suite(suite, &config).unwrap().to_json();
        assert_eq!(a, b);
    }
}

#[test]
fn invariants_json_round_trip() {
    for inv in FormInvariants::grid(5, 3, Convention::SmallQ) {
        let s = serde_json::to_string(&inv).unwrap();
        let back: FormInvariants = serde_json::from_str(&s).unwrap();
        assert_eq!(back, inv);
    }
}

#[test]
fn rational_text_round_trip() {
    for (n, d) in [(0, 1), (-7, 3), (16, 9), (25, -72), (1, 1)] {
        let x = ExactRational::new(n, d);
        let back: ExactRational = x.to_string().parse().unwrap();
        assert_eq!(back, x);
        let json: ExactRational = serde_json::from_str(&serde_json::to_string(&x).unwrap()).unwrap();
        assert_eq!(json, x);
    }
}

#[test]
fn vertex_from_basis_matches_coordinates() {
    for p in [3u64, 5] {
        let v = LatticeVertex::new(p, 2, &ExactRational::new(7, p as i64)).unwrap();
        assert_eq!(LatticeVertex::from_basis(p, &v.basis()).unwrap(), v);
    }
}
