use super::*;
use crate::fixtures;
use crate::ground::ground;
use crate::model::ModelBuilder;
use crate::oracle::oracle_query;
use crate::query::{GroundQuery, RvPattern};
use crate::ve::ve_query;

fn checked() -> LveOptions {
    LveOptions {
        check_splits: true,
        ..Default::default()
    }
}

fn rv(m: &Model, prv: &str, args: &[&str]) -> GroundRv {
    let p = m.prv_by_name(prv).unwrap();
    let args = m
        .prv(p)
        .params
        .iter()
        .zip(args)
        .map(|(lv, c)| m.domain(*lv).index_of(c).unwrap())
        .collect();
    GroundRv::new(p, args)
}

fn ground_reference(m: &Model, targets: &[GroundRv], evidence: &[(GroundRv, usize)]) -> Distribution {
    let fg = ground(m).unwrap();
    let q = GroundQuery {
        targets: targets.iter().map(|t| fg.index_of(t).unwrap()).collect(),
        evidence: evidence.iter().map(|(r, v)| (fg.index_of(r).unwrap(), *v)).collect(),
        dos: vec![],
    };
    ve_query(&fg, &q).unwrap()
}

#[test]
fn rev_marginal_matches_ground_ve() {
    let m = fixtures::employee_model(4, 2);
    let rev = rv(&m, "Rev", &[]);
    let (d, stats) = lve_query_with(&m, &[rev.clone()], &[], &checked()).unwrap();
    assert!(d.max_abs_diff(&ground_reference(&m, &[rev], &[])) < 1e-9);
    assert!(stats.lifted_eliminations > 0);
}

#[test]
fn competence_of_alice_matches_oracle() {
    let m = fixtures::employee_model(4, 2);
    let target = rv(&m, "Comp", &["alice"]);
    let d = lve_query(&m, &[target.clone()], &[]).unwrap();
    let fg = ground(&m).unwrap();
    let q = GroundQuery {
        targets: vec![fg.index_of(&target).unwrap()],
        ..Default::default()
    };
    assert!(d.max_abs_diff(&oracle_query(&fg, &q).unwrap()) < 1e-9);
}

#[test]
fn evidence_and_several_targets() {
    let m = fixtures::employee_model(3, 2);
    let targets = [rv(&m, "Qual", &["t2"]), rv(&m, "Comp", &["bob"])];
    let evidence = [(rv(&m, "Rev", &[]), 2), (rv(&m, "Train", &["alice", "t1"]), 1)];
    let d = lve_query(&m, &targets, &evidence).unwrap();
    assert!(d.max_abs_diff(&ground_reference(&m, &targets, &evidence)) < 1e-9);
}

#[test]
fn propositional_model_behaves_like_ve() {
    let m = fixtures::chain3();
    for t in ["A", "B", "C"] {
        let target = rv(&m, t, &[]);
        let d = lve_query(&m, &[target.clone()], &[]).unwrap();
        assert!(d.max_abs_diff(&ground_reference(&m, &[target], &[])) < 1e-12);
    }
}

#[test]
fn table_sizes_do_not_grow_with_the_domain() {
    let sizes: Vec<usize> = [4, 16, 64]
        .iter()
        .map(|&n| {
            let m = fixtures::employee_model(n, 2);
            let (_, stats) = lve_query_with(&m, &[rv(&m, "Rev", &[])], &[], &LveOptions::default()).unwrap();
            stats.max_table
        })
        .collect();
    assert!(sizes.windows(2).all(|w| w[0] == w[1]), "{sizes:?}");
}

fn comp_rev(n: usize) -> Model {
    let mut b = ModelBuilder::new();
    b.domain("E", (0..n).map(|i| format!("e{i}"))).unwrap();
    b.range("tri", ["low", "medium", "high"]).unwrap();
    b.prv("Comp", &["E"], "tri").unwrap();
    b.prv("Rev", &[], "tri").unwrap();
    b.parfactor("g4", &["Comp", "Rev"], Some("Rev"), None, vec![0.6, 0.3, 0.1, 0.3, 0.4, 0.3, 0.1, 0.3, 0.6])
        .unwrap();
    b.build().unwrap()
}

#[test]
fn lifted_sum_out_raises_to_domain_size() {
    for n in [1, 3, 7] {
        let m = comp_rev(n);
        let mut s = LiftedState::from_model(&m, checked());
        s.sum_out(0, 0).unwrap();
        assert_eq!(s.factors.len(), 1);
        let col = [0.6 + 0.3 + 0.1, 0.3 + 0.4 + 0.3, 0.1 + 0.3 + 0.6];
        for (v, c) in s.factors[0].table.values.iter().zip(col) {
            assert!((v - (n as f64) * f64::ln(c)).abs() < 1e-12);
        }
    }
}

#[test]
fn exclusive_logvar_sum_out() {
    let mut b = ModelBuilder::new();
    b.domain("E", ["a", "b"]).unwrap();
    b.domain("T", ["t1", "t2", "t3"]).unwrap();
    b.range("bool", ["f", "t"]).unwrap();
    b.prv("Train", &["E", "T"], "bool").unwrap();
    b.prv("Comp", &["E"], "bool").unwrap();
    let table = vec![0.5, 0.2, 0.25, 0.05];
    b.parfactor("g", &["Train", "Comp"], Some("Comp"), None, table.clone()).unwrap();
    let m = b.build().unwrap();
    let mut s = LiftedState::from_model(&m, checked());
    s.sum_out(0, 0).unwrap();
    let f = &s.factors[0];
    assert_eq!(f.lvs.len(), 1);
    for c in 0..2 {
        let expect = 3.0 * (table[c] + table[2 + c]).ln();
        assert!((f.table.values[c] - expect).abs() < 1e-12);
    }
}

#[test]
fn sum_out_rejects_shared_groups() {
    let m = fixtures::employee_model(2, 2);
    let mut s = LiftedState::from_model(&m, checked());
    // Train(E,T) also occurs in g3
    let g2 = 1;
    assert!(matches!(s.sum_out(g2, 1), Err(Error::Precondition(_))));
}

fn two_over_one(a: Vec<f64>, b: Vec<f64>) -> Model {
    let mut m = ModelBuilder::new();
    m.domain("X", ["x1", "x2", "x3"]).unwrap();
    m.range("tri", ["u", "v", "w"]).unwrap();
    m.prv("A", &["X"], "tri").unwrap();
    m.parfactor("f", &["A"], Some("A"), None, a).unwrap();
    m.parfactor("h", &["A"], Some("A"), None, b).unwrap();
    m.build().unwrap()
}

#[test]
fn multiply_with_unit_table_is_identity() {
    let m = two_over_one(vec![0.2, 0.5, 0.3], vec![1.0, 1.0, 1.0]);
    let mut s = LiftedState::from_model(&m, checked());
    let before = s.factors[0].table.clone();
    let i = s.multiply(0, 1).unwrap();
    assert_eq!(s.factors[i].table, before);
}

#[test]
fn multiply_same_prv_is_pointwise() {
    let m = two_over_one(vec![0.2, 0.5, 0.3], vec![2.0, 3.0, 5.0]);
    let mut s = LiftedState::from_model(&m, checked());
    let i = s.multiply(0, 1).unwrap();
    let f = &s.factors[i];
    assert_eq!(f.args.len(), 1);
    for (v, e) in f.table.values.iter().zip([0.4f64, 1.5, 1.5]) {
        assert!((v - e.ln()).abs() < 1e-12);
    }
}

#[test]
fn multiply_then_ground_equals_ground_then_multiply() {
    // two logvars; multiplying g2 and g3 after shattering must not change
    // the potential of any full assignment
    let m = fixtures::employee_model(2, 2);
    let mut s = LiftedState::from_model(&m, checked());
    s.shatter(&[]).unwrap();
    let fg = ground(&m).unwrap();
    let assignments: Vec<Vec<usize>> = (0..50u64)
        .map(|k| {
            (0..fg.num_rvs())
                .map(|i| ((k.wrapping_mul(2654435761).wrapping_add(i as u64 * 40503)) >> 3) as usize % fg.card(i))
                .collect()
        })
        .collect();
    let pot = |s: &LiftedState, a: &[usize]| s.log_potential(|r| a[fg.index_of(r).unwrap()]);
    let before: Vec<f64> = assignments.iter().map(|a| pot(&s, a)).collect();
    s.multiply(1, 2).unwrap();
    for (a, b) in assignments.iter().zip(before) {
        assert!((pot(&s, a) - b).abs() < 1e-12);
    }
}

#[test]
fn grounding_a_logvar() {
    let m = fixtures::employee_model(4, 2);
    let mut s = LiftedState::from_model(&m, checked());
    let t = m.logvar_by_name("T").unwrap();
    let before = canonical(s.ground_factors());
    s.ground_logvar(1, t).unwrap();
    assert_eq!(s.num_parfactors(), 5);
    assert_eq!(canonical(s.ground_factors()), before);
}

#[test]
fn grounding_every_logvar_reproduces_the_grounding() {
    let m = fixtures::employee_model(2, 2);
    let mut s = LiftedState::from_model(&m, checked());
    let e = m.logvar_by_name("E").unwrap();
    let t = m.logvar_by_name("T").unwrap();
    while let Some(i) = s.factors.iter().position(|f| !f.lvs.is_empty()) {
        let lv = if s.factors[i].lvs.contains_key(&e) { e } else { t };
        s.ground_logvar(i, lv).unwrap();
    }
    assert_eq!(s.num_parfactors(), ground(&m).unwrap().factors.len());
}

#[test]
fn shatter_on_single_instance() {
    let m = fixtures::employee_model(4, 2);
    let mut s = LiftedState::from_model(&m, checked());
    let before = canonical(s.ground_factors());
    s.shatter(&[rv(&m, "Train", &["bob", "t1"])]).unwrap();
    assert_eq!(canonical(s.ground_factors()), before);
    let isolated = s
        .factors
        .iter()
        .filter(|f| f.args.iter().any(|a| a.fixed == vec![Some(1), Some(0)]))
        .count();
    assert_eq!(isolated, 2, "g2 and g3 each get a part for Train(bob,t1)");
    assert!(s.stats.checked_splits > 0);
}

#[test]
fn shatter_without_overlap_is_a_no_op() {
    let m = fixtures::employee_model(4, 2);
    let mut s = LiftedState::from_model(&m, checked());
    s.shatter(&[rv(&m, "Rev", &[])]).unwrap();
    assert_eq!(s.num_parfactors(), 4);
    assert_eq!(s.stats.splits, 0);
}

#[test]
fn explicit_constraints_and_partial_patterns() {
    // lifted target pattern over a constrained model
    let mut b = ModelBuilder::new();
    b.domain("E", ["a", "b", "c"]).unwrap();
    b.domain("T", ["t1", "t2"]).unwrap();
    b.range("bool", ["f", "t"]).unwrap();
    b.prv("Q", &["T"], "bool").unwrap();
    b.prv("R", &["E", "T"], "bool").unwrap();
    b.parfactor("q", &["Q"], Some("Q"), None, vec![0.3, 0.7]).unwrap();
    b.parfactor(
        "r",
        &["Q", "R"],
        Some("R"),
        Some(&[vec!["a", "t1"], vec!["b", "t1"], vec!["c", "t2"]]),
        vec![0.9, 0.1, 0.4, 0.6],
    )
    .unwrap();
    let m = b.build().unwrap();
    let q = Query {
        targets: vec![RvPattern { prv: m.prv_by_name("R").unwrap(), args: vec![None, Some(0)] }],
        evidence: vec![(rv(&m, "R", &["c", "t2"]), 1)],
        dos: vec![],
    };
    let d = lve(&m, &q).unwrap();
    assert_eq!(d.vars, vec!["R(a,t1)", "R(b,t1)"]);
    let targets = q.target_rvs(&m).unwrap();
    assert!(d.max_abs_diff(&ground_reference(&m, &targets, &q.evidence)) < 1e-12);
}
