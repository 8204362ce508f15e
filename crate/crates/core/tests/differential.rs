//! Random models and queries: every engine must agree with enumeration.

use pcfg::intervention::lci_query_with;
use pcfg::lifted::LveOptions;
use pcfg::random::{random_case, RandomSpec};
use pcfg::{ground, lve, oracle_query, to_bayes_net, ve_query, Query};

const TOL: f64 = 1e-9;

fn check(seed: u64, spec: &RandomSpec) {
    let case = random_case(seed, spec);
    let (m, q) = (&case.model, &case.query);
    let fg = ground(m).unwrap();
    let gq = q.to_ground(m, &fg).unwrap();
    let oracle = oracle_query(&fg, &gq).unwrap();
    let opts = LveOptions {
        check_splits: true,
        ..Default::default()
    };
    let (lci, _, _) = lci_query_with(m, q, &opts).unwrap_or_else(|e| panic!("seed {seed}: {e}\n{q:?}"));
    assert!(lci.max_abs_diff(&oracle) < TOL, "seed {seed}: lci {lci:?} oracle {oracle:?}");
    let ve = ve_query(&fg, &gq).unwrap();
    assert!(ve.max_abs_diff(&oracle) < TOL, "seed {seed}: ve");
    if q.dos.is_empty() {
        let l = lve(m, q).unwrap();
        assert!(l.max_abs_diff(&oracle) < TOL, "seed {seed}: lve");
    } else {
        let observational = Query { dos: vec![], ..q.clone() };
        let gq = observational.to_ground(m, &fg).unwrap();
        let l = lve(m, &observational).unwrap();
        assert!(l.max_abs_diff(&oracle_query(&fg, &gq).unwrap()) < TOL, "seed {seed}: lve");
    }
    if let Ok(bn) = to_bayes_net(&fg) {
        let v = ve_query(&bn, &gq).unwrap();
        assert!(v.max_abs_diff(&oracle) < TOL, "seed {seed}: bn");
    }
}

#[test]
fn general_models() {
    for seed in 0..300 {
        check(seed, &RandomSpec::default());
    }
}

#[test]
fn normalized_models() {
    let spec = RandomSpec {
        normalized: true,
        ..Default::default()
    };
    for seed in 1000..1200 {
        check(seed, &spec);
    }
}

#[test]
fn bayes_net_models() {
    for seed in 2000..2200 {
        check(seed, &RandomSpec::bayes_net());
    }
}
