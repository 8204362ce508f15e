//! Propositional variable elimination over ground factor graphs, and the
//! conversion of a directed factor graph into a Bayesian network.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::factor::LogTable;
use crate::ground::{GroundFactor, GroundFg};
use crate::intervention::ground_do;
use crate::model::{row_sums, strides};
use crate::query::{Distribution, GroundQuery};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Heuristic {
    #[default]
    MinDegree,
    MinFill,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct VeOptions {
    pub heuristic: Heuristic,
    /// Drop factors whose child is neither a query nor an evidence variable
    /// nor one of their ancestors. Only sound when every factor is a
    /// normalised conditional distribution, as after [`to_bayes_net`].
    pub prune_barren: bool,
}

/// RVs to eliminate, in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EliminationOrder(pub Vec<usize>);

/// Interaction graph: RVs sharing a factor are neighbours.
fn interaction_graph(n: usize, factors: &[&[usize]]) -> Vec<BTreeSet<usize>> {
    let mut adj = vec![BTreeSet::new(); n];
    for args in factors {
        for &a in args.iter() {
            for &b in args.iter() {
                if a != b {
                    adj[a].insert(b);
                }
            }
        }
    }
    adj
}

fn fill_in(adj: &[BTreeSet<usize>], v: usize) -> usize {
    let nb: Vec<usize> = adj[v].iter().copied().collect();
    let mut missing = 0;
    for (i, a) in nb.iter().enumerate() {
        for b in &nb[i + 1..] {
            if !adj[*a].contains(b) {
                missing += 1;
            }
        }
    }
    missing
}

/// Greedy ordering of `candidates` on the interaction graph of `factors`.
/// Ties go to the lexicographically smaller RV name.
fn greedy_order(
    names: &[String],
    factors: &[&[usize]],
    candidates: &[usize],
    heuristic: Heuristic,
) -> Vec<usize> {
    let mut adj = interaction_graph(names.len(), factors);
    let score = |adj: &[BTreeSet<usize>], v: usize| match heuristic {
        Heuristic::MinDegree => adj[v].len(),
        Heuristic::MinFill => fill_in(adj, v),
    };
    let mut current = vec![usize::MAX; names.len()];
    let mut queue: BTreeSet<(usize, &str, usize)> = BTreeSet::new();
    for &v in candidates {
        current[v] = score(&adj, v);
        queue.insert((current[v], &names[v], v));
    }
    let mut order = Vec::with_capacity(candidates.len());
    while let Some((_, _, v)) = queue.pop_first() {
        order.push(v);
        current[v] = usize::MAX;
        let nb: Vec<usize> = std::mem::take(&mut adj[v]).into_iter().collect();
        for &a in &nb {
            adj[a].remove(&v);
            for &b in &nb {
                if a != b {
                    adj[a].insert(b);
                }
            }
        }
        // scores change for the neighbours and, for min-fill, their
        // neighbours too
        let mut touched: BTreeSet<usize> = nb.iter().copied().collect();
        if heuristic == Heuristic::MinFill {
            for &a in &nb {
                touched.extend(adj[a].iter().copied());
            }
        }
        for u in touched {
            if current[u] == usize::MAX {
                continue;
            }
            queue.remove(&(current[u], names[u].as_str(), u));
            current[u] = score(&adj, u);
            queue.insert((current[u], &names[u], u));
        }
    }
    order
}

/// Elimination order over all non-target RVs of `fg`.
pub fn choose_order(fg: &GroundFg, targets: &[usize], heuristic: Heuristic) -> EliminationOrder {
    let args: Vec<&[usize]> = fg.factors.iter().map(|f| f.args.as_slice()).collect();
    let candidates: Vec<usize> = (0..fg.num_rvs()).filter(|v| !targets.contains(v)).collect();
    EliminationOrder(greedy_order(&fg.names, &args, &candidates, heuristic))
}

/// Sum-product elimination of everything but `targets` from `tables`, in
/// `order`; returns the normalised product over `targets` (in that order).
pub(crate) fn eliminate(
    mut tables: Vec<LogTable>,
    order: &[usize],
    targets: &[usize],
    target_cards: &[usize],
) -> Result<Vec<f64>> {
    for &v in order {
        let (with, without): (Vec<LogTable>, Vec<LogTable>) =
            tables.into_iter().partition(|t| t.position(v).is_some());
        tables = without;
        let Some(first) = with.first() else { continue };
        let product = with[1..].iter().fold(first.clone(), |acc, t| acc.product(t));
        tables.push(product.sum_out(v));
    }
    let mut result = LogTable::scalar(0.0);
    for (t, c) in targets.iter().zip(target_cards) {
        // a target touched by no factor is uniform
        result = result.product(&LogTable {
            vars: vec![*t],
            cards: vec![*c],
            values: vec![0.0; *c],
        });
    }
    for t in &tables {
        if t.vars.iter().any(|v| !targets.contains(v)) {
            return Err(Error::Precondition("elimination order misses a variable".into()));
        }
        result = result.product(t);
    }
    result
        .permute(targets)
        .normalized()
        .ok_or(Error::InconsistentEvidence)
}

/// RVs that are targets, evidence or their ancestors.
fn relevant(fg: &GroundFg, seeds: impl Iterator<Item = usize>) -> Vec<bool> {
    let mut keep = vec![false; fg.num_rvs()];
    let mut parents_of: Vec<Vec<usize>> = vec![Vec::new(); fg.num_rvs()];
    for f in &fg.factors {
        if let Some(c) = f.child_rv() {
            parents_of[c].extend(f.args.iter().copied().filter(|a| *a != c));
        }
    }
    let mut stack: Vec<usize> = seeds.collect();
    while let Some(v) = stack.pop() {
        if !std::mem::replace(&mut keep[v], true) {
            stack.extend(parents_of[v].iter().copied());
        }
    }
    keep
}

/// `P(targets | evidence, do(...))` by variable elimination.
pub fn ve_query(fg: &GroundFg, q: &GroundQuery) -> Result<Distribution> {
    ve_query_with(fg, q, VeOptions::default())
}

pub fn ve_query_with(fg: &GroundFg, q: &GroundQuery, opts: VeOptions) -> Result<Distribution> {
    q.check(fg)?;
    let mutilated = ground_do(fg, &q.dos)?;
    let keep = opts.prune_barren.then(|| {
        relevant(
            &mutilated,
            q.targets.iter().chain(q.evidence.iter().map(|e| &e.0)).copied(),
        )
    });
    let mut tables = Vec::with_capacity(mutilated.factors.len());
    for f in &mutilated.factors {
        if let (Some(keep), Some(c)) = (&keep, f.child_rv()) {
            if !keep[c] {
                continue;
            }
        }
        let cards: Vec<usize> = f.args.iter().map(|a| fg.card(*a)).collect();
        let mut t = LogTable::from_linear(f.args.clone(), cards, &f.table);
        for (e, v) in &q.evidence {
            t = t.restrict(*e, *v);
        }
        tables.push(t);
    }
    let args: Vec<&[usize]> = tables.iter().map(|t| t.vars.as_slice()).collect();
    let present: BTreeSet<usize> = args.iter().flat_map(|a| a.iter().copied()).collect();
    let candidates: Vec<usize> = present.into_iter().filter(|v| !q.targets.contains(v)).collect();
    let order = greedy_order(&fg.names, &args, &candidates, opts.heuristic);
    let cards: Vec<usize> = q.targets.iter().map(|t| fg.card(*t)).collect();
    let probs = eliminate(tables, &order, &q.targets, &cards)?;
    Ok(Distribution::over_ground(fg, &q.targets, probs))
}

/// Rescales every factor into a conditional distribution of its child.
///
/// Requires every RV to be the child of exactly one factor, and each
/// factor's rows (assignments differing only at the child) to share one
/// sum; only then does the rescaling leave the represented distribution
/// unchanged.
pub fn to_bayes_net(fg: &GroundFg) -> Result<GroundFg> {
    let mut parent_count = vec![0usize; fg.num_rvs()];
    for f in &fg.factors {
        match f.child_rv() {
            Some(c) => parent_count[c] += 1,
            None => return Err(Error::NotBayesNet(format!("factor `{}` has no child", f.name))),
        }
    }
    if let Some(rv) = parent_count.iter().position(|&c| c != 1) {
        return Err(Error::NotBayesNet(format!(
            "`{}` is the child of {} factors",
            fg.names[rv], parent_count[rv]
        )));
    }
    let factors = fg
        .factors
        .iter()
        .map(|f| {
            let cards: Vec<usize> = f.args.iter().map(|a| fg.card(*a)).collect();
            let ci = f.child.expect("checked above");
            let sums = row_sums(&f.table, &cards, ci);
            let s = sums[0];
            if !(s > 0.0) || sums.iter().any(|x| (x - s).abs() > 1e-9 * s) {
                return Err(Error::NotBayesNet(format!(
                    "rows of `{}` have different sums; normalising would change the distribution",
                    f.name
                )));
            }
            Ok(GroundFactor {
                table: f.table.iter().map(|v| v / s).collect(),
                ..f.clone()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(fg.with_factors(factors))
}

/// Whether every factor is a normalised conditional distribution of its
/// child (within `tol`).
pub fn is_cpt_normalized(fg: &GroundFg, tol: f64) -> bool {
    fg.factors.iter().all(|f| {
        let Some(ci) = f.child else { return false };
        let cards: Vec<usize> = f.args.iter().map(|a| fg.card(*a)).collect();
        debug_assert_eq!(strides(&cards).len(), cards.len());
        row_sums(&f.table, &cards, ci).iter().all(|s| (s - 1.0).abs() <= tol)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::ground::ground;
    use crate::model::ModelBuilder;
    use crate::oracle::oracle_query;

    fn star() -> GroundFg {
        let mut b = ModelBuilder::new();
        b.range("bool", ["f", "t"]).unwrap();
        for n in ["Hub", "L1", "L2", "L3"] {
            b.prv(n, &[], "bool").unwrap();
        }
        b.parfactor("h", &["Hub"], Some("Hub"), None, vec![0.4, 0.6]).unwrap();
        for (i, n) in ["L1", "L2", "L3"].iter().enumerate() {
            b.parfactor(&format!("f{i}"), &["Hub", n], Some(n), None, vec![0.3, 0.7, 0.9, 0.1])
                .unwrap();
        }
        ground(&b.build().unwrap()).unwrap()
    }

    #[test]
    fn chain_eliminates_from_far_end() {
        let fg = ground(&fixtures::chain3()).unwrap();
        // target A (index 0): C is a leaf, then B
        assert_eq!(choose_order(&fg, &[0], Heuristic::MinDegree).0, vec![2, 1]);
        assert_eq!(choose_order(&fg, &[0], Heuristic::MinFill).0, vec![2, 1]);
    }

    #[test]
    fn star_eliminates_leaves_first() {
        let fg = star();
        let hub = fg.names.iter().position(|n| n == "Hub").unwrap();
        let order = choose_order(&fg, &[hub], Heuristic::MinDegree).0;
        let names: Vec<&str> = order.iter().map(|i| fg.names[*i].as_str()).collect();
        assert_eq!(names, vec!["L1", "L2", "L3"]);
    }

    #[test]
    fn single_factor_all_targets() {
        let fg = ground(&fixtures::chain3()).unwrap();
        let single = fg.with_factors(vec![fg.factors[1].clone()]);
        let d = ve_query(&single, &GroundQuery { targets: vec![0, 1], ..Default::default() }).unwrap();
        let z: f64 = fg.factors[1].table.iter().sum();
        for (p, t) in d.probs.iter().zip(&fg.factors[1].table) {
            assert!((p - t / z).abs() < 1e-15);
        }
    }

    #[test]
    fn ve_matches_oracle_on_employee_model() {
        let m = fixtures::employee_model(4, 2);
        let fg = ground(&m).unwrap();
        let rev = fg.names.iter().position(|n| n == "Rev").unwrap();
        for h in [Heuristic::MinDegree, Heuristic::MinFill] {
            let q = GroundQuery { targets: vec![rev], ..Default::default() };
            let a = ve_query_with(&fg, &q, VeOptions { heuristic: h, prune_barren: false }).unwrap();
            let b = oracle_query(&fg, &q).unwrap();
            assert!(a.max_abs_diff(&b) < 1e-9);
        }
    }

    #[test]
    fn bayes_net_of_single_factor() {
        let mut b = ModelBuilder::new();
        b.range("bool", ["false", "true"]).unwrap();
        b.prv("X", &[], "bool").unwrap();
        b.parfactor("phi", &["X"], Some("X"), None, vec![1.0, 3.0]).unwrap();
        let fg = ground(&b.build().unwrap()).unwrap();
        let bn = to_bayes_net(&fg).unwrap();
        assert_eq!(bn.factors[0].table, vec![0.25, 0.75]);
    }

    #[test]
    fn bayes_net_is_idempotent_on_normalized_models() {
        let fg = ground(&fixtures::employee_model(2, 1)).unwrap();
        assert!(to_bayes_net(&fg).is_err(), "Rev has several parent factors");
        let star = star();
        let bn = to_bayes_net(&star).unwrap();
        assert_eq!(bn, star);
        assert!(is_cpt_normalized(&bn, 1e-12));
    }

    #[test]
    fn barren_pruning_keeps_results() {
        let fg = star();
        let q = GroundQuery { targets: vec![1], evidence: vec![], dos: vec![(0, 1)] };
        let a = ve_query_with(&fg, &q, VeOptions { prune_barren: true, ..Default::default() }).unwrap();
        let b = oracle_query(&fg, &q).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-12);
    }
}
