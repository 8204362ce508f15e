//! Seeded generator of small random models and queries, used for
//! differential testing against the brute-force oracle.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsep::DsepQuery;
use crate::ground::{ground, GroundFg};
use crate::model::{Constraint, GroundRv, Model, ModelBuilder, Parfactor, PrvId, TupleSet};
use crate::query::{DoAssignment, Query, RvPattern};

const LOGVARS: [&str; 3] = ["X", "Y", "Z"];

#[derive(Debug, Clone)]
pub struct RandomSpec {
    pub max_logvars: usize,
    pub max_domain: usize,
    pub max_range: usize,
    pub max_prvs: usize,
    pub max_ground_rvs: usize,
    /// Cap on the joint state space of the grounding.
    pub max_states: u128,
    pub max_dos: usize,
    /// Rows over the child sum to one.
    pub normalized: bool,
    /// Every ground variable is the child of exactly one ground factor.
    pub bn_shaped: bool,
    /// Probability that a parfactor gets an explicit constraint.
    pub p_explicit: f64,
}

impl Default for RandomSpec {
    fn default() -> Self {
        RandomSpec {
            max_logvars: 3,
            max_domain: 3,
            max_range: 3,
            max_prvs: 5,
            max_ground_rvs: 12,
            max_states: 1 << 14,
            max_dos: 3,
            normalized: false,
            bn_shaped: false,
            p_explicit: 0.3,
        }
    }
}

impl RandomSpec {
    pub fn bayes_net() -> Self {
        RandomSpec {
            normalized: true,
            bn_shaped: true,
            ..Default::default()
        }
    }
}

/// A random model, a random query on it and the seed that produced both.
#[derive(Debug, Clone)]
pub struct RandomCase {
    pub seed: u64,
    pub model: Model,
    pub query: Query,
}

/// Deterministic case for `seed`. Shape (general, normalized or BN-shaped)
/// follows `spec`.
pub fn random_case(seed: u64, spec: &RandomSpec) -> RandomCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let model = random_model(&mut rng, spec);
        if let Some(query) = random_query(&mut rng, &model, spec) {
            return RandomCase { seed, model, query };
        }
    }
}

/// Draws models until one satisfies the size caps of `spec`.
pub fn random_model(rng: &mut impl Rng, spec: &RandomSpec) -> Model {
    loop {
        if let Some(m) = try_model(rng, spec) {
            return m;
        }
    }
}

fn subset<R: Rng>(rng: &mut R, n: usize, max: usize) -> Vec<usize> {
    let k = rng.gen_range(0..=max.min(n));
    let mut all: Vec<usize> = (0..n).collect();
    all.shuffle(rng);
    let mut s: Vec<usize> = all.into_iter().take(k).collect();
    s.sort_unstable();
    s
}

fn try_model(rng: &mut impl Rng, spec: &RandomSpec) -> Option<Model> {
    let mut b = ModelBuilder::new();
    let nl = rng.gen_range(1..=spec.max_logvars.clamp(1, LOGVARS.len()));
    for name in &LOGVARS[..nl] {
        let size = rng.gen_range(1..=spec.max_domain.max(1));
        let lower = name.to_lowercase();
        b.domain(name, (1..=size).map(|i| format!("{lower}{i}"))).ok()?;
    }
    let max_range = spec.max_range.max(2);
    for r in 2..=max_range {
        b.range(&format!("r{r}"), (0..r).map(|v| format!("v{v}"))).ok()?;
    }
    let np = rng.gen_range(2..=spec.max_prvs.max(2));
    let mut params: Vec<Vec<usize>> = Vec::new();
    for i in 0..np {
        let ps = subset(rng, nl, 2);
        let names: Vec<&str> = ps.iter().map(|&l| LOGVARS[l]).collect();
        let r = rng.gen_range(2..=max_range);
        b.prv(&format!("R{i}"), &names, &format!("r{r}")).ok()?;
        params.push(ps);
    }

    let mut parfactors = Vec::new();
    for child in 0..np {
        let candidates: Vec<usize> = (0..child)
            .filter(|&p| !spec.bn_shaped || params[p].iter().all(|l| params[child].contains(l)))
            .collect();
        let parents = pick(rng, &candidates, 2);
        parfactors.push(random_parfactor(rng, &b, format!("f{child}"), &parents, child, spec)?);
    }
    if !spec.bn_shaped {
        for k in 0..rng.gen_range(0..=2) {
            let child = rng.gen_range(1..np);
            let candidates: Vec<usize> = (0..child).collect();
            let mut parents = pick(rng, &candidates, 2);
            if parents.is_empty() {
                parents.push(rng.gen_range(0..child));
            }
            parfactors.push(random_parfactor(rng, &b, format!("h{k}"), &parents, child, spec)?);
        }
    }
    for g in parfactors {
        b.push_parfactor(g).ok()?;
    }
    let model = b.build().ok()?;
    let fg = ground(&model).ok()?;
    if fg.num_rvs() > spec.max_ground_rvs || fg.state_space() > spec.max_states {
        return None;
    }
    if spec.bn_shaped && (0..fg.num_rvs()).any(|r| fg.parents(r).len() != 1) {
        return None;
    }
    Some(model)
}

fn pick<R: Rng>(rng: &mut R, from: &[usize], max: usize) -> Vec<usize> {
    let idx = subset(rng, from.len(), max);
    idx.into_iter().map(|i| from[i]).collect()
}

fn random_parfactor(
    rng: &mut impl Rng,
    b: &ModelBuilder,
    name: String,
    parents: &[usize],
    child: usize,
    spec: &RandomSpec,
) -> Option<Parfactor> {
    let m = b.model();
    let mut args: Vec<PrvId> = parents.iter().map(|&p| PrvId(p)).collect();
    args.push(PrvId(child));
    let lvs = m.logvars_of(&args);
    let sizes: Vec<usize> = lvs.iter().map(|lv| m.domain(*lv).size()).collect();
    let constraint = if !lvs.is_empty() && !spec.bn_shaped && rng.gen_bool(spec.p_explicit) {
        let all = TupleSet::full(&sizes);
        let keep: Vec<Vec<u32>> = all.iter().filter(|_| rng.gen_bool(0.6)).map(<[u32]>::to_vec).collect();
        if keep.is_empty() {
            Constraint::tuples(lvs.clone(), TupleSet::from_tuples(lvs.len(), [all.get(0).to_vec()]))
        } else {
            Constraint::tuples(lvs.clone(), TupleSet::from_tuples(lvs.len(), keep))
        }
    } else {
        Constraint::top(lvs.clone())
    };
    let cards: Vec<usize> = args.iter().map(|a| m.card(*a)).collect();
    let size: usize = cards.iter().product();
    let mut table: Vec<f64> = (0..size).map(|_| rng.gen_range(0.1..1.0)).collect();
    if spec.normalized {
        // child is the last argument, so rows are contiguous
        let c = *cards.last().unwrap();
        for row in table.chunks_mut(c) {
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
        }
    }
    Some(Parfactor {
        name,
        args,
        child: Some(PrvId(child)),
        constraint,
        table,
        mutilated: false,
    })
}

fn random_pattern(rng: &mut impl Rng, rv: &GroundRv, p_lift: f64) -> RvPattern {
    let mut p = RvPattern::ground(rv);
    if !p.args.is_empty() && rng.gen_bool(p_lift) {
        let k = rng.gen_range(0..p.args.len());
        p.args[k] = None;
    }
    p
}

fn instances(model: &Model, fg: &GroundFg, p: &RvPattern) -> Vec<usize> {
    p.expand(model).iter().filter_map(|rv| fg.index_of(rv)).collect()
}

/// A random valid query, or `None` if the draw failed its checks.
pub fn random_query(rng: &mut impl Rng, model: &Model, spec: &RandomSpec) -> Option<Query> {
    let fg = ground(model).ok()?;
    let n = fg.num_rvs();
    if n < 2 {
        return None;
    }
    let mut q = Query::default();
    let mut used = vec![false; n];
    let nt = rng.gen_range(1..=2);
    for _ in 0..nt {
        let r = rng.gen_range(0..n);
        let p = random_pattern(rng, &fg.rvs[r], 0.25);
        let inst = instances(model, &fg, &p);
        if inst.iter().any(|i| used[*i]) {
            continue;
        }
        inst.iter().for_each(|i| used[*i] = true);
        q.targets.push(p);
    }
    let nd = rng.gen_range(0..=spec.max_dos);
    for _ in 0..nd {
        let r = rng.gen_range(0..n);
        let p = random_pattern(rng, &fg.rvs[r], 0.4);
        let inst = instances(model, &fg, &p);
        if inst.iter().any(|i| used[*i] || fg.parents(*i).is_empty()) {
            continue;
        }
        inst.iter().for_each(|i| used[*i] = true);
        let value = rng.gen_range(0..model.card(p.prv));
        q.dos.push(DoAssignment { target: p, value });
    }
    if rng.gen_bool(0.4) {
        let free: Vec<usize> = (0..n).filter(|i| !used[*i]).collect();
        if let Some(&r) = free.choose(rng) {
            q.evidence.push((fg.rvs[r].clone(), rng.gen_range(0..fg.card(r))));
        }
    }
    q.check(model).ok()?;
    q.target_rvs(model).ok()?;
    Some(q)
}

/// `count` random disjoint triples over the grounding of `model`, each set
/// holding one or two variables (`Z` possibly empty).
pub fn random_triples(rng: &mut impl Rng, model: &Model, count: usize) -> Vec<DsepQuery> {
    let Ok(fg) = ground(model) else { return Vec::new() };
    let n = fg.num_rvs();
    if n < 2 {
        return Vec::new();
    }
    (0..count)
        .map(|_| {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(rng);
            let nx = rng.gen_range(1..=2.min(n - 1));
            let ny = rng.gen_range(1..=2.min(n - nx));
            let nz = rng.gen_range(0..=2.min(n - nx - ny));
            let take = |r: std::ops::Range<usize>| r.map(|i| fg.rvs[order[i]].clone()).collect();
            DsepQuery {
                x: take(0..nx),
                y: take(nx..nx + ny),
                z: take(nx + ny..nx + ny + nz),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ve::to_bayes_net;

    #[test]
    fn cases_are_deterministic_and_valid() {
        for seed in 0..50 {
            let a = random_case(seed, &RandomSpec::default());
            let b = random_case(seed, &RandomSpec::default());
            assert_eq!(a.model.parfactors(), b.model.parfactors());
            assert_eq!(a.query, b.query);
            assert!(a.model.validate().is_empty() || a.model.ensure_valid().is_ok());
            let fg = ground(&a.model).unwrap();
            assert!(fg.num_rvs() <= 12);
            assert!(a.query.dos.len() <= 3);
        }
    }

    #[test]
    fn bn_shaped_models_convert() {
        for seed in 0..50 {
            let c = random_case(seed, &RandomSpec::bayes_net());
            let fg = ground(&c.model).unwrap();
            to_bayes_net(&fg).unwrap();
        }
    }
}
