//! d-separation on the grounding of a model.
//!
//! A path alternates random variables and factors. It is blocked when it
//! visits a variable in `Z`, or when it passes from one parent of a directed
//! factor to another parent while neither the factor's child nor any of its
//! descendants is in `Z`.
//!
//! A variable can be the child of several ground factors (`Rev` in the
//! employee model is the child of one `g4` factor per employee). Under
//! [`DsepRule::MergedParents`] such factors act as one conditional
//! distribution, so a path entering the variable from one parent factor and
//! leaving through another is a parent-to-parent pass. [`DsepRule::Literal`]
//! treats the variable like any other node on the path.
//!
//! Reachability runs over directed edge states (where we are, where we came
//! from), so a path never turns back along the edge it arrived on.

use std::collections::{BTreeSet, VecDeque};

use crate::error::{Error, Result};
use crate::ground::{ground, GroundFg};
use crate::model::{strides, GroundRv, Model};
use crate::oracle::{joint_with, KahanSum, OracleOptions};

/// Three pairwise disjoint sets of ground random variables.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DsepQuery {
    pub x: Vec<GroundRv>,
    pub y: Vec<GroundRv>,
    pub z: Vec<GroundRv>,
}

impl DsepQuery {
    fn resolve(&self, model: &Model, fg: &GroundFg) -> Result<[Vec<usize>; 3]> {
        let f = |set: &[GroundRv]| {
            set.iter()
                .map(|rv| {
                    fg.index_of(rv)
                        .ok_or_else(|| Error::query(format!("`{}` does not occur in the model", model.rv_name(rv))))
                })
                .collect::<Result<Vec<_>>>()
        };
        Ok([f(&self.x)?, f(&self.y)?, f(&self.z)?])
    }
}

/// How a path through a variable with several parent factors is judged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DsepRule {
    /// All parent factors of a variable form one conditional distribution.
    #[default]
    MergedParents,
    /// Every factor is judged on its own.
    Literal,
}

/// Grounds `model` and decides whether `q.z` d-separates `q.x` from `q.y`.
pub fn d_separated(model: &Model, q: &DsepQuery) -> Result<bool> {
    d_separated_with(model, q, DsepRule::default())
}

pub fn d_separated_with(model: &Model, q: &DsepQuery, rule: DsepRule) -> Result<bool> {
    let fg = ground(model)?;
    let [x, y, z] = q.resolve(model, &fg)?;
    d_separated_fg(&fg, &x, &y, &z, rule)
}

fn check_disjoint(x: &[usize], y: &[usize], z: &[usize]) -> Result<()> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::query("d-separation needs non-empty X and Y"));
    }
    let mut seen = BTreeSet::new();
    for v in x.iter().chain(y).chain(z) {
        if !seen.insert(*v) {
            return Err(Error::query("X, Y and Z must be pairwise disjoint"));
        }
    }
    Ok(())
}

/// Factor-to-variable adjacency of a grounding.
struct Incidence {
    /// Factors each variable takes part in.
    of_rv: Vec<Vec<usize>>,
}

impl Incidence {
    fn new(fg: &GroundFg) -> Self {
        let mut of_rv = vec![Vec::new(); fg.num_rvs()];
        for (fi, f) in fg.factors.iter().enumerate() {
            for &a in &f.args {
                if of_rv[a].last() != Some(&fi) {
                    of_rv[a].push(fi);
                }
            }
        }
        Incidence { of_rv }
    }
}

/// Variables in `z` or with a descendant in `z`.
fn ancestors_of(fg: &GroundFg, z: &[usize]) -> Vec<bool> {
    let mut mark = vec![false; fg.num_rvs()];
    let mut queue: VecDeque<usize> = z.iter().copied().collect();
    for &v in z {
        mark[v] = true;
    }
    let parent_factors: Vec<Vec<usize>> = (0..fg.num_rvs()).map(|r| fg.parents(r)).collect();
    while let Some(v) = queue.pop_front() {
        for &fi in &parent_factors[v] {
            let f = &fg.factors[fi];
            for &a in &f.args {
                if !mark[a] && Some(a) != f.child_rv() {
                    mark[a] = true;
                    queue.push_back(a);
                }
            }
        }
    }
    mark
}

pub fn d_separated_fg(fg: &GroundFg, x: &[usize], y: &[usize], z: &[usize], rule: DsepRule) -> Result<bool> {
    check_disjoint(x, y, z)?;
    let inc = Incidence::new(fg);
    let active = ancestors_of(fg, z);
    let mut in_z = vec![false; fg.num_rvs()];
    for &v in z {
        in_z[v] = true;
    }
    let mut is_y = vec![false; fg.num_rvs()];
    for &v in y {
        is_y[v] = true;
    }

    // States: (rv, factor it was entered from) and (factor, rv it was
    // entered from). `usize::MAX` marks a path start.
    let mut seen_rv: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut seen_f: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut queue: VecDeque<(bool, usize, usize)> = VecDeque::new();
    for &v in x {
        seen_rv.insert((v, usize::MAX));
        queue.push_back((true, v, usize::MAX));
    }
    while let Some((at_rv, node, from)) = queue.pop_front() {
        if at_rv {
            if is_y[node] {
                return Ok(false);
            }
            let child_of = |fi: usize| fg.factors[fi].child_rv() == Some(node);
            let entered_down = from != usize::MAX && child_of(from);
            for &fi in &inc.of_rv[node] {
                if fi == from {
                    continue;
                }
                let pass = match rule {
                    DsepRule::Literal => !in_z[node],
                    DsepRule::MergedParents if entered_down && child_of(fi) => active[node],
                    DsepRule::MergedParents => !in_z[node],
                };
                if pass && seen_f.insert((fi, node)) {
                    queue.push_back((false, fi, node));
                }
            }
        } else {
            let f = &fg.factors[node];
            let child = f.child_rv();
            let from_parent = child.map_or(false, |c| c != from);
            let collider_open = child.map_or(false, |c| active[c]);
            for &b in &f.args {
                if b == from {
                    continue;
                }
                let to_parent = child.map_or(false, |c| c != b);
                if from_parent && to_parent && !collider_open {
                    continue;
                }
                if seen_rv.insert((b, node)) {
                    queue.push_back((true, b, node));
                }
            }
        }
    }
    Ok(true)
}

/// Outcome of a numeric conditional-independence check.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CiReport {
    /// Assignments of `Z` with positive probability that were checked.
    pub checked: usize,
    /// Assignments of `Z` with probability zero (skipped).
    pub skipped: usize,
    /// Entries where `|P(x,y|z) - P(x|z) P(y|z)|` exceeds the tolerance.
    pub violations: usize,
    pub max_error: f64,
}

impl CiReport {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }

    fn merge(&mut self, o: &CiReport) {
        self.checked += o.checked;
        self.skipped += o.skipped;
        self.violations += o.violations;
        self.max_error = self.max_error.max(o.max_error);
    }
}

/// Checks `P(X,Y|Z) = P(X|Z) P(Y|Z)` on the full joint of `fg`.
pub fn ci_check_fg(
    fg: &GroundFg,
    x: &[usize],
    y: &[usize],
    z: &[usize],
    tol: f64,
    opts: OracleOptions,
) -> Result<CiReport> {
    check_disjoint(x, y, z)?;
    let joint = joint_with(fg, opts)?;
    // marginal over (x, y, z) in that order
    let vars: Vec<usize> = x.iter().chain(y).chain(z).copied().collect();
    let cards: Vec<usize> = vars.iter().map(|v| fg.card(*v)).collect();
    let size: usize = cards.iter().product();
    let st = strides(&cards);
    let mut marg = vec![KahanSum::default(); size];
    let mut assign = vec![0usize; fg.num_rvs()];
    for &p in &joint.probs {
        let idx: usize = vars.iter().zip(&st).map(|(v, s)| assign[*v] * s).sum();
        marg[idx].add(p);
        for r in (0..assign.len()).rev() {
            assign[r] += 1;
            if assign[r] < joint.cards[r] {
                break;
            }
            assign[r] = 0;
        }
    }
    let marg: Vec<f64> = marg.iter().map(KahanSum::value).collect();
    let nx: usize = cards[..x.len()].iter().product();
    let ny: usize = cards[x.len()..x.len() + y.len()].iter().product();
    let nz: usize = cards[x.len() + y.len()..].iter().product();
    let at = |i: usize, j: usize, k: usize| marg[(i * ny + j) * nz + k];

    let mut rep = CiReport::default();
    for k in 0..nz {
        let pz: f64 = (0..nx).flat_map(|i| (0..ny).map(move |j| (i, j))).map(|(i, j)| at(i, j, k)).sum();
        if pz <= 0.0 {
            rep.skipped += 1;
            continue;
        }
        rep.checked += 1;
        let px: Vec<f64> = (0..nx).map(|i| (0..ny).map(|j| at(i, j, k)).sum::<f64>() / pz).collect();
        let py: Vec<f64> = (0..ny).map(|j| (0..nx).map(|i| at(i, j, k)).sum::<f64>() / pz).collect();
        for i in 0..nx {
            for j in 0..ny {
                let err = (at(i, j, k) / pz - px[i] * py[j]).abs();
                rep.max_error = rep.max_error.max(err);
                if err > tol {
                    rep.violations += 1;
                }
            }
        }
    }
    Ok(rep)
}

/// For each triple that is d-separated, verifies the implied conditional
/// independence numerically. Triples that are not d-separated are counted
/// in `not_separated` and otherwise ignored.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DsepCiSummary {
    pub separated: usize,
    pub not_separated: usize,
    pub ci: CiReport,
    /// Indices of d-separated triples whose check found violations.
    pub failing: Vec<usize>,
}

pub fn dsep_implies_ci_check(model: &Model, triples: &[DsepQuery], tol: f64) -> Result<DsepCiSummary> {
    dsep_implies_ci_check_with(model, triples, tol, DsepRule::default())
}

pub fn dsep_implies_ci_check_with(
    model: &Model,
    triples: &[DsepQuery],
    tol: f64,
    rule: DsepRule,
) -> Result<DsepCiSummary> {
    let fg = ground(model)?;
    let mut out = DsepCiSummary::default();
    for (t, q) in triples.iter().enumerate() {
        let [x, y, z] = q.resolve(model, &fg)?;
        if !d_separated_fg(&fg, &x, &y, &z, rule)? {
            out.not_separated += 1;
            continue;
        }
        out.separated += 1;
        let rep = ci_check_fg(&fg, &x, &y, &z, tol, OracleOptions::default())?;
        if !rep.holds() {
            out.failing.push(t);
        }
        out.ci.merge(&rep);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::ModelBuilder;

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

    fn q(x: Vec<GroundRv>, y: Vec<GroundRv>, z: Vec<GroundRv>) -> DsepQuery {
        DsepQuery { x, y, z }
    }

    #[test]
    fn running_example_triple() {
        let m = fixtures::employee_model(4, 2);
        let t = q(
            vec![rv(&m, "Qual", &["t1"])],
            vec![rv(&m, "Comp", &["bob"])],
            vec![rv(&m, "Train", &["bob", "t1"])],
        );
        assert!(d_separated(&m, &t).unwrap());
        let open = q(t.x.clone(), t.y.clone(), vec![]);
        assert!(!d_separated(&m, &open).unwrap());
        // Rev is the child of one g4 factor per employee; judged factor by
        // factor, Comp(alice) -> Rev <- Comp(bob) stays open
        assert!(!d_separated_with(&m, &t, DsepRule::Literal).unwrap());
    }

    #[test]
    fn shared_child_is_a_collider_when_parents_merge() {
        let m = fixtures::employee_model(2, 1);
        let [alice, bob] = ["alice", "bob"].map(|e| rv(&m, "Comp", &[e]));
        let rev = rv(&m, "Rev", &[]);
        // Qual(t1) blocks the common-cause path through the training
        let qual = rv(&m, "Qual", &["t1"]);
        let t = q(vec![alice.clone()], vec![bob.clone()], vec![qual.clone()]);
        assert!(d_separated(&m, &t).unwrap());
        assert!(!d_separated_with(&m, &t, DsepRule::Literal).unwrap());
        let given_rev = q(vec![alice], vec![bob], vec![qual, rev]);
        assert!(!d_separated(&m, &given_rev).unwrap());
        assert!(d_separated_with(&m, &given_rev, DsepRule::Literal).unwrap());
    }

    #[test]
    fn running_example_triple_holds_numerically_in_bn_form() {
        // each variable has one parent factor, so the numbers cannot
        // contradict the structure
        let m = bn_employee_model();
        let t = q(
            vec![rv(&m, "Qual", &["t1"])],
            vec![rv(&m, "Comp", &["bob"])],
            vec![rv(&m, "Train", &["bob", "t1"])],
        );
        let s = dsep_implies_ci_check(&m, &[t], 1e-9).unwrap();
        assert_eq!(s.separated, 1);
        assert!(s.ci.holds(), "{s:?}");
        assert!(s.ci.checked > 0);
    }

    /// The employee model with T = {t1}, E = {alice, bob} and Rev dropped,
    /// so every variable is the child of exactly one factor.
    fn bn_employee_model() -> Model {
        let mut b = ModelBuilder::new();
        b.domain("E", ["alice", "bob"]).unwrap();
        b.domain("T", ["t1"]).unwrap();
        b.range("tri", ["low", "medium", "high"]).unwrap();
        b.range("bool", ["false", "true"]).unwrap();
        b.prv("Qual", &["T"], "tri").unwrap();
        b.prv("Train", &["E", "T"], "bool").unwrap();
        b.prv("Comp", &["E"], "tri").unwrap();
        b.parfactor("g1", &["Qual"], Some("Qual"), None, vec![0.2, 0.5, 0.3]).unwrap();
        b.parfactor("g2", &["Qual", "Train"], Some("Train"), None, vec![0.8, 0.2, 0.6, 0.4, 0.3, 0.7])
            .unwrap();
        b.parfactor("g3", &["Train", "Comp"], Some("Comp"), None, vec![0.5, 0.3, 0.2, 0.1, 0.4, 0.5])
            .unwrap();
        b.build().unwrap()
    }

    fn collider() -> Model {
        let mut b = ModelBuilder::new();
        b.range("bool", ["f", "t"]).unwrap();
        for n in ["A", "B", "C", "D"] {
            b.prv(n, &[], "bool").unwrap();
        }
        b.parfactor("pa", &["A"], Some("A"), None, vec![0.3, 0.7]).unwrap();
        b.parfactor("pb", &["B"], Some("B"), None, vec![0.6, 0.4]).unwrap();
        b.parfactor("pc", &["A", "B", "C"], Some("C"), None, vec![0.9, 0.1, 0.5, 0.5, 0.4, 0.6, 0.2, 0.8])
            .unwrap();
        b.parfactor("pd", &["C", "D"], Some("D"), None, vec![0.7, 0.3, 0.1, 0.9]).unwrap();
        b.build().unwrap()
    }

    #[test]
    fn collider_opens_on_child_or_descendant() {
        let m = collider();
        let a = rv(&m, "A", &[]);
        let b = rv(&m, "B", &[]);
        let c = rv(&m, "C", &[]);
        let d = rv(&m, "D", &[]);
        assert!(d_separated(&m, &q(vec![a.clone()], vec![b.clone()], vec![])).unwrap());
        assert!(!d_separated(&m, &q(vec![a.clone()], vec![b.clone()], vec![c.clone()])).unwrap());
        assert!(!d_separated(&m, &q(vec![a.clone()], vec![b.clone()], vec![d.clone()])).unwrap());
        assert!(d_separated(&m, &q(vec![a.clone()], vec![d.clone()], vec![c.clone()])).unwrap());
        assert!(!d_separated(&m, &q(vec![a], vec![d], vec![])).unwrap());
    }

    #[test]
    fn disconnected_variables() {
        let mut b = ModelBuilder::new();
        b.range("bool", ["f", "t"]).unwrap();
        b.prv("A", &[], "bool").unwrap();
        b.prv("B", &[], "bool").unwrap();
        b.parfactor("pa", &["A"], Some("A"), None, vec![0.3, 0.7]).unwrap();
        b.parfactor("pb", &["B"], Some("B"), None, vec![0.6, 0.4]).unwrap();
        let m = b.build().unwrap();
        let t = q(vec![rv(&m, "A", &[])], vec![rv(&m, "B", &[])], vec![]);
        assert!(d_separated(&m, &t).unwrap());
        assert!(dsep_implies_ci_check(&m, &[t], 1e-12).unwrap().ci.holds());
    }

    #[test]
    fn chain_is_blocked_by_interior_node() {
        let m = fixtures::chain3();
        let [a, b, c] = ["A", "B", "C"].map(|n| rv(&m, n, &[]));
        assert!(d_separated(&m, &q(vec![a.clone()], vec![c.clone()], vec![b])).unwrap());
        assert!(!d_separated(&m, &q(vec![c], vec![a], vec![])).unwrap());
    }

    #[test]
    fn rejects_overlapping_sets() {
        let m = fixtures::chain3();
        let a = rv(&m, "A", &[]);
        let t = q(vec![a.clone()], vec![rv(&m, "B", &[])], vec![a]);
        assert!(matches!(d_separated(&m, &t), Err(Error::Query(_))));
    }

    #[test]
    fn unnormalised_tables_can_break_independence() {
        // A and B are d-separated given nothing, but the collider factor
        // is not row-normalised, so summing out C leaves an A-B coupling
        let mut b = ModelBuilder::new();
        b.range("bool", ["f", "t"]).unwrap();
        for n in ["A", "B", "C"] {
            b.prv(n, &[], "bool").unwrap();
        }
        b.parfactor("pa", &["A"], Some("A"), None, vec![0.5, 0.5]).unwrap();
        b.parfactor("pb", &["B"], Some("B"), None, vec![0.5, 0.5]).unwrap();
        b.parfactor("pc", &["A", "B", "C"], Some("C"), None, vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 5.0, 5.0])
            .unwrap();
        let m = b.build().unwrap();
        let t = q(vec![rv(&m, "A", &[])], vec![rv(&m, "B", &[])], vec![]);
        let s = dsep_implies_ci_check(&m, &[t], 1e-9).unwrap();
        assert_eq!(s.separated, 1);
        assert!(!s.ci.holds());
    }
}
