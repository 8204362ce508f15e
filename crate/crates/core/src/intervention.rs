//! Interventions: mutilation of parent factors, the model-level split that
//! isolates intervened instances, and lifted causal inference on top of the
//! lifted eliminator.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::error::{Error, Result};
use crate::ground::{ground, GroundFg};
use crate::lifted::{lve_query_with, LveOptions, LveStats};
use crate::model::{strides, Allowed, Constraint, GroundRv, Model, Parfactor, PrvId, TupleSet};
use crate::query::{DoAssignment, Distribution, Query, RvPattern};

/// Rewrites a table so that it is 1 where the child takes `value` and 0
/// elsewhere.
fn indicator(table: &mut [f64], cards: &[usize], child: usize, value: usize) {
    let st = strides(cards);
    for (i, v) in table.iter_mut().enumerate() {
        *v = if (i / st[child]) % cards[child] == value { 1.0 } else { 0.0 };
    }
}

/// Ground counterpart of [`mutilate`]: every factor whose child is an
/// intervened RV becomes an indicator on the do-value.
pub fn ground_do(fg: &GroundFg, dos: &[(usize, usize)]) -> Result<GroundFg> {
    if dos.is_empty() {
        return Ok(fg.clone());
    }
    let mut factors = fg.factors.clone();
    for &(rv, value) in dos {
        let parents = fg.parents(rv);
        if parents.is_empty() {
            return Err(Error::NoParentFactor(fg.names[rv].clone()));
        }
        for i in parents {
            let f = &mut factors[i];
            let cards: Vec<usize> = f.args.iter().map(|a| fg.card(*a)).collect();
            indicator(&mut f.table, &cards, f.child.expect("parent factor has a child"), value);
            f.mutilated = true;
        }
    }
    Ok(fg.with_factors(factors))
}

/// Do-assignments grouped by (PRV, value): all instances in one group are
/// split off together.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DoGroup {
    pub prv: PrvId,
    pub value: usize,
    pub patterns: Vec<RvPattern>,
}

impl DoGroup {
    fn matches(&self, args: &[u32]) -> bool {
        self.patterns.iter().any(|p| {
            p.args
                .iter()
                .zip(args)
                .all(|(f, c)| f.map_or(true, |f| f == *c))
        })
    }
}

pub fn do_groups(dos: &[DoAssignment]) -> Vec<DoGroup> {
    let mut groups: BTreeMap<(PrvId, usize), Vec<RvPattern>> = BTreeMap::new();
    for d in dos {
        groups
            .entry((d.target.prv, d.value))
            .or_default()
            .push(d.target.clone());
    }
    groups
        .into_iter()
        .map(|((prv, value), patterns)| DoGroup { prv, value, patterns })
        .collect()
}

/// How one parfactor was partitioned by [`split_on_dos`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitRecord {
    pub original: String,
    /// Names of the resulting parfactors; the first keeps the original name.
    pub parts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SplitReport {
    pub splits: Vec<SplitRecord>,
}

impl SplitReport {
    /// Number of parfactors replaced by more than one part.
    pub fn split_count(&self) -> usize {
        self.splits.len()
    }
}

/// Positions of `prv`'s parameters within the constraint logvars of `g`.
fn param_positions(model: &Model, g: &Parfactor, prv: PrvId) -> Vec<usize> {
    model
        .prv(prv)
        .params
        .iter()
        .map(|lv| {
            g.constraint
                .logvars
                .iter()
                .position(|x| x == lv)
                .expect("constraint covers the argument logvars")
        })
        .collect()
}

/// Partitions every parfactor mentioning an intervened PRV so that, within
/// each part, every argument instance either belongs to one do-group or to
/// none. Instances of one group stay together: a group costs a single split
/// per affected parfactor however many instances it covers.
pub fn split_on_dos(model: &Model, dos: &[DoAssignment]) -> Result<(Model, SplitReport)> {
    let groups = do_groups(dos);
    let mut report = SplitReport::default();
    if groups.is_empty() {
        return Ok((model.clone(), report));
    }
    let mut taken: BTreeSet<String> = model.parfactors().iter().map(|g| g.name.clone()).collect();
    let mut out = Vec::with_capacity(model.parfactors().len());
    for g in model.parfactors() {
        // (argument position, positions of its params, groups on its PRV)
        let relevant: Vec<(Vec<usize>, Vec<usize>)> = g
            .args
            .iter()
            .filter_map(|a| {
                let gs: Vec<usize> = groups
                    .iter()
                    .enumerate()
                    .filter(|(_, dg)| dg.prv == *a)
                    .map(|(i, _)| i)
                    .collect();
                (!gs.is_empty()).then(|| (param_positions(model, g, *a), gs))
            })
            .collect();
        if relevant.is_empty() {
            out.push(g.clone());
            continue;
        }
        let tuples = g.constraint.materialize(model);
        let arity = tuples.arity();
        // few distinct keys, so a linear scan beats a map
        let mut parts: Vec<(Vec<usize>, Vec<u32>)> = Vec::new();
        let mut proj = Vec::new();
        let mut key = Vec::with_capacity(relevant.len());
        for t in tuples.iter() {
            key.clear();
            for (pos, gs) in &relevant {
                proj.clear();
                proj.extend(pos.iter().map(|&p| t[p]));
                key.push(gs.iter().find(|&&i| groups[i].matches(&proj)).map_or(0, |&i| i + 1));
            }
            match parts.iter_mut().find(|(k, _)| *k == key) {
                Some((_, data)) => data.extend_from_slice(t),
                None => parts.push((key.clone(), t.to_vec())),
            }
        }
        parts.sort_by(|a, b| a.0.cmp(&b.0));
        if parts.len() == 1 {
            out.push(g.clone());
            continue;
        }
        let mut record = SplitRecord {
            original: g.name.clone(),
            parts: Vec::new(),
        };
        for (k, (_, data)) in parts.into_iter().enumerate() {
            let len = if arity == 0 { 1 } else { data.len() / arity };
            let name = if k == 0 {
                g.name.clone()
            } else {
                let n = model.fresh_name(&g.name, &taken);
                taken.insert(n.clone());
                n
            };
            record.parts.push(name.clone());
            out.push(Parfactor {
                name,
                constraint: Constraint::tuples(
                    g.constraint.logvars.clone(),
                    TupleSet::from_sorted_flat(arity, data, len),
                ),
                ..g.clone()
            });
        }
        report.splits.push(record);
    }
    Ok((model.with_parfactors(out), report))
}

/// Def.-4 mutilation on the lifted level: every parfactor whose child
/// instances all belong to one do-group gets the indicator table. A
/// parfactor mixing intervened and other child instances has not been split
/// and is rejected.
pub fn mutilate(model: &Model, dos: &[DoAssignment]) -> Result<Model> {
    let groups = do_groups(dos);
    let mut out = model.parfactors().to_vec();
    for g in &mut out {
        let Some(child) = g.child else { continue };
        let on_child: Vec<&DoGroup> = groups.iter().filter(|dg| dg.prv == child).collect();
        if on_child.is_empty() {
            continue;
        }
        let pos = param_positions(model, g, child);
        let mut hit: Option<Option<usize>> = None;
        let mut proj = Vec::with_capacity(pos.len());
        for t in g.constraint.materialize(model).iter() {
            proj.clear();
            proj.extend(pos.iter().map(|&p| t[p]));
            let m = on_child.iter().position(|dg| dg.matches(&proj));
            match hit {
                None => hit = Some(m),
                Some(h) if h != m => {
                    return Err(Error::NotIsolated {
                        target: on_child[m.or(h).unwrap()].patterns[0].display(model),
                        parfactor: g.name.clone(),
                    })
                }
                _ => {}
            }
        }
        if let Some(Some(i)) = hit {
            let cards: Vec<usize> = g.args.iter().map(|a| model.card(*a)).collect();
            let ci = g.child_index().expect("child among arguments");
            indicator(&mut g.table, &cards, ci, on_child[i].value);
            g.mutilated = true;
        }
    }
    Ok(model.with_parfactors(out))
}

/// Fails unless every intervened instance is the child of some ground
/// factor.
fn check_parents(model: &Model, dos: &[(GroundRv, usize)]) -> Result<()> {
    let mut covered: BTreeMap<PrvId, Option<HashSet<Vec<u32>>>> = BTreeMap::new();
    for (rv, _) in dos {
        let cov = covered.entry(rv.prv).or_insert_with(|| {
            let mut set = HashSet::new();
            for g in model.parfactors().iter().filter(|g| g.child == Some(rv.prv)) {
                let pos = param_positions(model, g, rv.prv);
                match &g.constraint.allowed {
                    Allowed::Top => return None,
                    Allowed::Tuples(ts) => {
                        for t in ts.iter() {
                            set.insert(pos.iter().map(|&p| t[p]).collect());
                        }
                    }
                }
            }
            Some(set)
        });
        if let Some(set) = cov {
            if !set.contains(&rv.args) {
                return Err(Error::NoParentFactor(model.rv_name(rv)));
            }
        }
    }
    Ok(())
}

/// The model after the first two steps of lifted causal inference: split on
/// the do-groups, then mutilate.
pub fn intervened_model(model: &Model, query: &Query) -> Result<(Model, SplitReport)> {
    query.check(model)?;
    check_parents(model, &query.do_rvs(model)?)?;
    let (split, report) = split_on_dos(model, &query.dos)?;
    Ok((mutilate(&split, &query.dos)?, report))
}

/// Lifted causal inference: `P(targets | evidence, do(...))`.
pub fn lci_query(model: &Model, query: &Query) -> Result<Distribution> {
    lci_query_with(model, query, &LveOptions::default()).map(|(d, _, _)| d)
}

pub fn lci_query_with(
    model: &Model,
    query: &Query,
    opts: &LveOptions,
) -> Result<(Distribution, SplitReport, LveStats)> {
    let (g, report) = intervened_model(model, query)?;
    let targets = query.target_rvs(model)?;
    let (d, stats) = lve_query_with(&g, &targets, &query.evidence, opts)?;
    Ok((d, report, stats))
}

/// Ground factors of a model as a canonical multiset:
/// (argument instances, child position, table).
pub fn grounding_multiset(model: &Model) -> Result<Vec<(Vec<GroundRv>, Option<usize>, Vec<u64>)>> {
    let fg = ground(model)?;
    let mut out: Vec<_> = fg
        .factors
        .iter()
        .map(|f| {
            (
                f.args.iter().map(|a| fg.rvs[*a].clone()).collect::<Vec<_>>(),
                f.child,
                f.table.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            )
        })
        .collect();
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::oracle::oracle_query;

    fn do_train(m: &Model, e: &str, t: &str, v: usize) -> DoAssignment {
        let train = m.prv_by_name("Train").unwrap();
        let e = m.domain(m.logvar_by_name("E").unwrap()).index_of(e).unwrap();
        let t = m.domain(m.logvar_by_name("T").unwrap()).index_of(t).unwrap();
        DoAssignment {
            target: RvPattern { prv: train, args: vec![Some(e), Some(t)] },
            value: v,
        }
    }

    #[test]
    fn split_isolates_single_instance() {
        let m = fixtures::employee_model(4, 2);
        let (s, report) = split_on_dos(&m, &[do_train(&m, "bob", "t1", 1)]).unwrap();
        assert_eq!(report.split_count(), 2);
        let g2 = s.parfactor_by_name("g2").unwrap();
        let g2p = s.parfactor_by_name("g2'").unwrap();
        assert_eq!(g2.constraint.count(&s), 7);
        assert_eq!(g2p.constraint.count(&s), 1);
        assert_eq!(grounding_multiset(&m).unwrap(), grounding_multiset(&s).unwrap());
        // g1 and g4 keep TOP
        assert!(s.parfactor_by_name("g1").unwrap().constraint.is_top());
        assert!(s.parfactor_by_name("g4").unwrap().constraint.is_top());
    }

    #[test]
    fn mutilation_writes_indicator_rows() {
        let m = fixtures::employee_model(4, 2);
        let dos = [do_train(&m, "bob", "t1", 1)];
        let (s, _) = split_on_dos(&m, &dos).unwrap();
        let mm = mutilate(&s, &dos).unwrap();
        let g2p = mm.parfactor_by_name("g2'").unwrap();
        assert!(g2p.mutilated);
        assert_eq!(g2p.table, vec![0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        assert_eq!(mm.parfactor_by_name("g2").unwrap().table, m.parfactor_by_name("g2").unwrap().table);
    }

    #[test]
    fn mutilate_requires_split() {
        let m = fixtures::employee_model(4, 2);
        let err = mutilate(&m, &[do_train(&m, "bob", "t1", 1)]).unwrap_err();
        assert!(matches!(err, Error::NotIsolated { .. }));
    }

    #[test]
    fn ground_do_matches_mutilate_then_ground() {
        let m = fixtures::employee_model(2, 2);
        let dos = [do_train(&m, "bob", "t1", 1)];
        let (s, _) = split_on_dos(&m, &dos).unwrap();
        let lifted = grounding_multiset(&mutilate(&s, &dos).unwrap()).unwrap();
        let fg = ground(&m).unwrap();
        let rv = fg.index_of(&GroundRv::new(dos[0].target.prv, vec![1, 0])).unwrap();
        let gfg = ground_do(&fg, &[(rv, 1)]).unwrap();
        let mut grounded: Vec<_> = gfg
            .factors
            .iter()
            .map(|f| {
                (
                    f.args.iter().map(|a| gfg.rvs[*a].clone()).collect::<Vec<_>>(),
                    f.child,
                    f.table.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                )
            })
            .collect();
        grounded.sort();
        assert_eq!(lifted, grounded);
    }

    #[test]
    fn group_do_splits_once_per_parfactor() {
        let m = fixtures::employee_model(4, 2);
        let train = m.prv_by_name("Train").unwrap();
        let dos = [DoAssignment {
            target: RvPattern { prv: train, args: vec![None, Some(0)] },
            value: 1,
        }];
        let (s, report) = split_on_dos(&m, &dos).unwrap();
        assert_eq!(report.splits.len(), 2);
        assert!(report.splits.iter().all(|r| r.parts.len() == 2));
        assert_eq!(s.parfactor_by_name("g2'").unwrap().constraint.count(&s), 4);
    }

    #[test]
    fn do_on_whole_prv_needs_no_split() {
        let m = fixtures::employee_model(4, 2);
        let train = m.prv_by_name("Train").unwrap();
        let dos = [DoAssignment { target: RvPattern::whole(&m, train), value: 0 }];
        let (_, report) = split_on_dos(&m, &dos).unwrap();
        assert_eq!(report.split_count(), 0);
    }

    #[test]
    fn lci_matches_oracle_on_running_example() {
        let m = fixtures::employee_model(4, 2);
        let rev = m.prv_by_name("Rev").unwrap();
        let q = Query {
            targets: vec![RvPattern::whole(&m, rev)],
            evidence: vec![],
            dos: vec![do_train(&m, "bob", "t1", 1)],
        };
        let lifted = lci_query(&m, &q).unwrap();
        let fg = ground(&m).unwrap();
        let reference = oracle_query(&fg, &q.to_ground(&m, &fg).unwrap()).unwrap();
        assert!(lifted.max_abs_diff(&reference) < 1e-9, "{lifted:?} vs {reference:?}");
    }

    #[test]
    fn two_disjoint_dos_commute() {
        let m = fixtures::employee_model(2, 1);
        let fg = ground(&m).unwrap();
        let a = fg.index_of(&GroundRv::new(m.prv_by_name("Train").unwrap(), vec![0, 0])).unwrap();
        let b = fg.index_of(&GroundRv::new(m.prv_by_name("Comp").unwrap(), vec![1])).unwrap();
        let x = ground_do(&fg, &[(a, 1), (b, 2)]).unwrap();
        let y = ground_do(&fg, &[(b, 2), (a, 1)]).unwrap();
        assert_eq!(x, y);
    }
}
