//! Lifted variable elimination.
//!
//! The working set holds parfactors whose constraints are boxes: every
//! logvar ranges independently over its own constant set, so the number of
//! groundings of any sub-tuple of logvars is the same for every assignment
//! of the others. Explicit model constraints are decomposed into disjoint
//! boxes up front.
//!
//! An argument occurrence `Train(E,t1)` keeps, per parameter, either a
//! constant or "free", in which case it ranges over the set of that
//! parameter's logvar in the parfactor. Because a PRV always names the same
//! logvars, occurrences in different parfactors line up by logvar id and no
//! renaming is ever needed.
//!
//! Operators: shattering (split a parfactor so that any two occurrences of a
//! PRV denote identical or disjoint sets of random variables), evidence
//! absorption, multiplication plus lifted sum-out of a group of random
//! variables, and grounding a logvar as the fallback when no group can be
//! summed out on the lifted level. Potentials are kept as logarithms.

mod boxes;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::factor::LogTable;
use crate::model::{Allowed, GroundRv, LogVarId, Model, PrvId};
use crate::query::{Distribution, Query};

use boxes::Set;

#[derive(Debug, Clone, Copy)]
pub struct LveOptions {
    /// Verify after every split that the parts ground to exactly the
    /// ground factors of the split parfactor.
    pub check_splits: bool,
    /// Refuse to continue once the working set exceeds this many
    /// parfactors (the ground fallback can blow up).
    pub max_parfactors: usize,
}

impl Default for LveOptions {
    fn default() -> Self {
        LveOptions {
            check_splits: false,
            max_parfactors: 1 << 20,
        }
    }
}

/// Counters describing one run of the eliminator.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LveStats {
    pub splits: usize,
    pub checked_splits: usize,
    pub lifted_eliminations: usize,
    pub fallbacks: usize,
    /// Largest table built while eliminating.
    pub max_table: usize,
}

/// One argument occurrence: `fixed[i]` is the constant of parameter `i`,
/// or `None` when the parameter ranges over its logvar's set.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) struct LArg {
    prv: PrvId,
    fixed: Vec<Option<u32>>,
}

/// Set of random variables an occurrence denotes, per parameter.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Slot {
    Const(u32),
    Free(Set),
}

impl Slot {
    fn values(&self) -> std::borrow::Cow<'_, [u32]> {
        match self {
            Slot::Const(c) => std::borrow::Cow::Owned(vec![*c]),
            Slot::Free(s) => std::borrow::Cow::Borrowed(s.as_slice()),
        }
    }
}

type GroupKey = (PrvId, Vec<Slot>);

fn overlaps(a: &[Slot], b: &[Slot]) -> bool {
    a.iter().zip(b).all(|(x, y)| match (x, y) {
        (Slot::Const(c), Slot::Const(d)) => c == d,
        (Slot::Const(c), Slot::Free(s)) | (Slot::Free(s), Slot::Const(c)) => boxes::contains(s, *c),
        (Slot::Free(s), Slot::Free(t)) => Rc::ptr_eq(s, t) || boxes::intersects(s, t),
    })
}

fn is_subset(a: &[Slot], b: &[Slot]) -> bool {
    a.iter().zip(b).all(|(x, y)| match (x, y) {
        (Slot::Const(c), Slot::Const(d)) => c == d,
        (Slot::Const(c), Slot::Free(s)) => boxes::contains(s, *c),
        (Slot::Free(_), Slot::Const(_)) => false,
        (Slot::Free(s), Slot::Free(t)) => Rc::ptr_eq(s, t) || boxes::is_subset(s, t),
    })
}

/// A parfactor of the working set. Table variables are argument positions.
#[derive(Debug, Clone)]
pub(crate) struct LFactor {
    lvs: BTreeMap<LogVarId, Set>,
    args: Vec<LArg>,
    table: LogTable,
}

impl LFactor {
    fn slots(&self, model: &Model, a: &LArg) -> Vec<Slot> {
        model
            .prv(a.prv)
            .params
            .iter()
            .zip(&a.fixed)
            .map(|(lv, f)| match f {
                Some(c) => Slot::Const(*c),
                None => Slot::Free(self.lvs[lv].clone()),
            })
            .collect()
    }

    /// Logvars left free in argument `a`.
    fn free_lvs(model: &Model, a: &LArg) -> Vec<LogVarId> {
        model
            .prv(a.prv)
            .params
            .iter()
            .zip(&a.fixed)
            .filter(|(_, f)| f.is_none())
            .map(|(lv, _)| *lv)
            .collect()
    }

    fn relabel(&mut self) {
        self.table.vars = (0..self.args.len()).collect();
    }

    /// Substitutes singleton logvars by their constant and merges arguments
    /// that became identical. `None` when some logvar set is empty (the
    /// parfactor has no groundings).
    fn normalize(mut self, model: &Model) -> Option<LFactor> {
        if self.lvs.values().any(|s| s.is_empty()) {
            return None;
        }
        let singles: Vec<(LogVarId, u32)> = self
            .lvs
            .iter()
            .filter(|(_, s)| s.len() == 1)
            .map(|(lv, s)| (*lv, s[0]))
            .collect();
        for (lv, c) in singles {
            self.lvs.remove(&lv);
            for a in &mut self.args {
                for (p, f) in model.prv(a.prv).params.iter().zip(a.fixed.iter_mut()) {
                    if *p == lv && f.is_none() {
                        *f = Some(c);
                    }
                }
            }
        }
        let mut i = 0;
        while i < self.args.len() {
            if let Some(j) = (i + 1..self.args.len()).find(|&j| self.args[j] == self.args[i]) {
                self.table = self.table.diagonal(i, j);
                self.args.remove(j);
                self.relabel();
            } else {
                i += 1;
            }
        }
        Some(self)
    }

    /// Raises the table to the number of groundings of logvars no argument
    /// uses, and drops those logvars.
    fn absorb_unused(&mut self, model: &Model) {
        let used: BTreeSet<LogVarId> = self
            .args
            .iter()
            .flat_map(|a| LFactor::free_lvs(model, a))
            .collect();
        let unused: Vec<LogVarId> = self.lvs.keys().filter(|lv| !used.contains(lv)).copied().collect();
        let mut r = 1.0;
        for lv in unused {
            r *= self.lvs.remove(&lv).expect("present").len() as f64;
        }
        self.table.pow(r);
    }

    fn with_lv(&self, lv: LogVarId, set: Vec<u32>) -> LFactor {
        let mut f = self.clone();
        f.lvs.insert(lv, Rc::new(set));
        f
    }

    /// Every ground instance: argument RVs (duplicates merged, sorted) and
    /// the matching log-potentials.
    fn groundings(&self, model: &Model) -> Vec<(Vec<GroundRv>, Vec<f64>)> {
        let lvs: Vec<(&LogVarId, &Set)> = self.lvs.iter().collect();
        let mut idx = vec![0usize; lvs.len()];
        let total: usize = lvs.iter().map(|(_, s)| s.len()).product();
        let mut out = Vec::with_capacity(total);
        for _ in 0..total {
            let binding: HashMap<LogVarId, u32> = lvs
                .iter()
                .zip(&idx)
                .map(|((lv, s), i)| (**lv, s[*i]))
                .collect();
            let rvs: Vec<GroundRv> = self
                .args
                .iter()
                .map(|a| {
                    let params = &model.prv(a.prv).params;
                    GroundRv::new(
                        a.prv,
                        params
                            .iter()
                            .zip(&a.fixed)
                            .map(|(lv, f)| f.unwrap_or_else(|| binding[lv]))
                            .collect(),
                    )
                })
                .collect();
            let mut t = self.table.clone();
            let mut keep: Vec<GroundRv> = Vec::new();
            let mut var_of: Vec<usize> = Vec::new();
            for (i, rv) in rvs.iter().enumerate() {
                match keep.iter().position(|k| k == rv) {
                    Some(k) => t = t.diagonal(var_of[k], i),
                    None => {
                        keep.push(rv.clone());
                        var_of.push(i);
                    }
                }
            }
            let mut order: Vec<usize> = (0..keep.len()).collect();
            order.sort_by(|a, b| keep[*a].cmp(&keep[*b]));
            let t = t.permute(&order.iter().map(|k| var_of[*k]).collect::<Vec<_>>());
            out.push((order.iter().map(|k| keep[*k].clone()).collect(), t.values));
            for k in (0..idx.len()).rev() {
                idx[k] += 1;
                if idx[k] < lvs[k].1.len() {
                    break;
                }
                idx[k] = 0;
            }
        }
        out
    }
}

type GroundEntry = (Vec<GroundRv>, Vec<u64>);

fn canonical(entries: Vec<(Vec<GroundRv>, Vec<f64>)>) -> Vec<GroundEntry> {
    let mut v: Vec<GroundEntry> = entries
        .into_iter()
        .map(|(a, t)| (a, t.into_iter().map(f64::to_bits).collect()))
        .collect();
    v.sort();
    v
}

/// The working set of the lifted eliminator.
#[derive(Debug, Clone)]
pub struct LiftedState<'m> {
    model: &'m Model,
    factors: Vec<LFactor>,
    /// Sum of log-constants split off as argument-free factors.
    log_constant: f64,
    opts: LveOptions,
    pub stats: LveStats,
}

impl<'m> LiftedState<'m> {
    /// Parfactors of `model`, one per box of each constraint.
    pub fn from_model(model: &'m Model, opts: LveOptions) -> Self {
        let full: BTreeMap<LogVarId, Set> = model
            .domains()
            .iter()
            .enumerate()
            .map(|(i, d)| (LogVarId(i), Rc::new((0..d.size() as u32).collect())))
            .collect();
        let mut factors = Vec::new();
        for g in model.parfactors() {
            let cards: Vec<usize> = g.args.iter().map(|a| model.card(*a)).collect();
            let proto = LFactor {
                lvs: BTreeMap::new(),
                args: g
                    .args
                    .iter()
                    .map(|a| LArg {
                        prv: *a,
                        fixed: vec![None; model.prv(*a).params.len()],
                    })
                    .collect(),
                table: LogTable::from_linear((0..g.args.len()).collect(), cards, &g.table),
            };
            let boxes: Vec<BTreeMap<LogVarId, Set>> = match &g.constraint.allowed {
                Allowed::Top => vec![g
                    .constraint
                    .logvars
                    .iter()
                    .map(|lv| (*lv, full[lv].clone()))
                    .collect()],
                Allowed::Tuples(ts) => boxes::decompose(ts)
                    .into_iter()
                    .map(|b| {
                        g.constraint
                            .logvars
                            .iter()
                            .copied()
                            .zip(b.into_iter().map(Rc::new))
                            .collect()
                    })
                    .collect(),
            };
            for lvs in boxes {
                let f = LFactor {
                    lvs,
                    ..proto.clone()
                };
                factors.extend(f.normalize(model));
            }
        }
        LiftedState {
            model,
            factors,
            log_constant: 0.0,
            opts,
            stats: LveStats::default(),
        }
    }

    pub fn num_parfactors(&self) -> usize {
        self.factors.len()
    }

    /// Ground factors represented by the working set, with log-potentials,
    /// sorted. Argument-free constants are not included.
    pub fn ground_factors(&self) -> Vec<(Vec<GroundRv>, Vec<f64>)> {
        let mut out: Vec<_> = self
            .factors
            .iter()
            .flat_map(|f| f.groundings(self.model))
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    /// Unnormalised log-potential of a full assignment of the ground RVs.
    pub fn log_potential(&self, value: impl Fn(&GroundRv) -> usize) -> f64 {
        let mut total = self.log_constant;
        for (rvs, table) in self.ground_factors() {
            let cards: Vec<usize> = rvs.iter().map(|r| self.model.card(r.prv)).collect();
            let st = crate::model::strides(&cards);
            let i: usize = rvs.iter().zip(&st).map(|(r, s)| value(r) * s).sum();
            total += table[i];
        }
        total
    }

    fn guard(&self) -> Result<()> {
        if self.factors.len() > self.opts.max_parfactors {
            return Err(Error::Limit {
                what: "number of working parfactors",
                size: self.factors.len() as u128,
                limit: self.opts.max_parfactors as u128,
            });
        }
        Ok(())
    }

    /// Replaces factor `i` by `parts`, checking groundings when asked to.
    fn replace(&mut self, i: usize, parts: Vec<LFactor>) -> Result<()> {
        self.stats.splits += 1;
        if self.opts.check_splits {
            let before = canonical(self.factors[i].groundings(self.model));
            let after = canonical(parts.iter().flat_map(|p| p.groundings(self.model)).collect());
            if before != after {
                return Err(Error::Precondition(
                    "split changed the multiset of ground factors".into(),
                ));
            }
            self.stats.checked_splits += 1;
        }
        self.factors.splice(i..i + 1, parts);
        self.guard()
    }

    /// Splits factor `fi` so that its argument `ai` lies either inside the
    /// box `other` or outside it in every part.
    fn split_against(&self, fi: usize, ai: usize, other: &[Slot]) -> Vec<LFactor> {
        let f = &self.factors[fi];
        let a = &f.args[ai];
        let params = &self.model.prv(a.prv).params;
        let mut parts = Vec::new();
        let mut inside = f.clone();
        for ((lv, fixed), slot) in params.iter().zip(&a.fixed).zip(other) {
            if fixed.is_some() {
                continue;
            }
            let s = &inside.lvs[lv];
            let t = slot.values();
            let outside = boxes::difference(s, &t);
            if outside.is_empty() {
                continue;
            }
            parts.push(inside.with_lv(*lv, outside));
            inside = inside.with_lv(*lv, boxes::intersect(s, &t));
        }
        parts.insert(0, inside);
        parts.into_iter().filter_map(|p| p.normalize(self.model)).collect()
    }

    /// Splits until any two occurrences of a PRV, and any occurrence and
    /// any of `terms`, denote identical or disjoint sets of RVs.
    pub fn shatter(&mut self, terms: &[GroundRv]) -> Result<()> {
        let extra: Vec<(PrvId, Vec<Slot>)> = terms
            .iter()
            .map(|t| (t.prv, t.args.iter().map(|c| Slot::Const(*c)).collect()))
            .collect();
        loop {
            let mut occ: BTreeMap<PrvId, Vec<(usize, usize, Vec<Slot>)>> = BTreeMap::new();
            for (fi, f) in self.factors.iter().enumerate() {
                for (ai, a) in f.args.iter().enumerate() {
                    occ.entry(a.prv).or_default().push((fi, ai, f.slots(self.model, a)));
                }
            }
            let mut action = None;
            'search: for (prv, list) in &occ {
                for (x, (fi, ai, sa)) in list.iter().enumerate() {
                    for (_, sb) in extra.iter().filter(|(p, _)| p == prv) {
                        if sa != sb && overlaps(sa, sb) {
                            action = Some((*fi, *ai, sb.clone()));
                            break 'search;
                        }
                    }
                    for (gj, bj, sb) in &list[x + 1..] {
                        if sa == sb || !overlaps(sa, sb) {
                            continue;
                        }
                        action = Some(if !is_subset(sa, sb) {
                            (*fi, *ai, sb.clone())
                        } else {
                            (*gj, *bj, sa.clone())
                        });
                        break 'search;
                    }
                }
            }
            let Some((fi, ai, other)) = action else {
                return Ok(());
            };
            let parts = self.split_against(fi, ai, &other);
            self.replace(fi, parts)?;
        }
    }

    /// Grounds logvar `lv` of parfactor `i`: one parfactor per constant.
    pub fn ground_logvar(&mut self, i: usize, lv: LogVarId) -> Result<()> {
        let f = &self.factors[i];
        let Some(set) = f.lvs.get(&lv) else {
            return Err(Error::Precondition("logvar is not used by the parfactor".into()));
        };
        let parts: Vec<LFactor> = set
            .iter()
            .filter_map(|c| f.with_lv(lv, vec![*c]).normalize(self.model))
            .collect();
        self.replace(i, parts)
    }

    /// Conditions on `rv = value`: slices every occurrence of `rv` out of
    /// its parfactor. Requires `rv` to be isolated by [`Self::shatter`].
    pub fn absorb_evidence(&mut self, rv: &GroundRv, value: usize) {
        let target = LArg {
            prv: rv.prv,
            fixed: rv.args.iter().map(|c| Some(*c)).collect(),
        };
        for f in &mut self.factors {
            while let Some(p) = f.args.iter().position(|a| *a == target) {
                f.table = f.table.restrict(p, value);
                f.args.remove(p);
                f.relabel();
            }
            f.absorb_unused(self.model);
        }
        self.collect_constants();
    }

    /// Moves argument-free factors into the log-constant.
    fn collect_constants(&mut self) {
        let mut c = self.log_constant;
        self.factors.retain(|f| {
            if f.args.is_empty() {
                c += f.table.values[0];
                false
            } else {
                true
            }
        });
        self.log_constant = c;
    }

    /// Groups of identical occurrences, each with its (factor, argument)
    /// positions. Assumes a shattered state.
    fn groups(&self) -> BTreeMap<GroupKey, Vec<(usize, usize)>> {
        let mut out: BTreeMap<GroupKey, Vec<(usize, usize)>> = BTreeMap::new();
        for (fi, f) in self.factors.iter().enumerate() {
            for (ai, a) in f.args.iter().enumerate() {
                out.entry((a.prv, f.slots(self.model, a)))
                    .or_default()
                    .push((fi, ai));
            }
        }
        out
    }

    /// Logvars of factor `fi` that argument `ai` leaves unbound: they block
    /// a lifted sum-out of that argument.
    fn blocking(&self, fi: usize, ai: usize) -> Vec<LogVarId> {
        let f = &self.factors[fi];
        let free = LFactor::free_lvs(self.model, &f.args[ai]);
        f.lvs.keys().filter(|lv| !free.contains(lv)).copied().collect()
    }

    /// Multiplies parfactors `i` and `j`, which must range over identical
    /// logvar sets. Returns the index of the product.
    pub fn multiply(&mut self, i: usize, j: usize) -> Result<usize> {
        if i == j {
            return Err(Error::Precondition("cannot multiply a parfactor with itself".into()));
        }
        if self.factors[i].lvs != self.factors[j].lvs {
            return Err(Error::Precondition(
                "parfactors to multiply have different constraints".into(),
            ));
        }
        let product = multiply_all(&[&self.factors[i], &self.factors[j]]);
        let (lo, hi) = (i.min(j), i.max(j));
        self.factors.remove(hi);
        self.factors[lo] = product;
        Ok(lo)
    }

    /// Sums argument `ai` out of parfactor `fi`. The argument's group may
    /// occur nowhere else, and the argument must use every logvar of the
    /// parfactor.
    pub fn sum_out(&mut self, fi: usize, ai: usize) -> Result<()> {
        let f = &self.factors[fi];
        let key = (f.args[ai].prv, f.slots(self.model, &f.args[ai]));
        let groups = self.groups();
        if groups[&key].len() != 1 {
            return Err(Error::Precondition(
                "the random variables to sum out occur in other parfactors".into(),
            ));
        }
        if !self.blocking(fi, ai).is_empty() {
            return Err(Error::Precondition(
                "the argument does not cover all logvars of its parfactor".into(),
            ));
        }
        let mut f = self.factors.remove(fi);
        f.table = f.table.sum_out(ai);
        f.args.remove(ai);
        f.relabel();
        f.absorb_unused(self.model);
        self.factors.push(f);
        self.collect_constants();
        Ok(())
    }

    /// Multiplies every parfactor holding the group and sums the group out.
    fn eliminate(&mut self, key: &GroupKey, positions: &[(usize, usize)]) -> Result<()> {
        let members: BTreeSet<usize> = positions.iter().map(|p| p.0).collect();
        let refs: Vec<&LFactor> = members.iter().map(|i| &self.factors[*i]).collect();
        let mut product = multiply_all(&refs);
        self.stats.max_table = self.stats.max_table.max(product.table.len());
        let ai = product
            .args
            .iter()
            .position(|a| a.prv == key.0 && product.slots(self.model, a) == key.1)
            .expect("group is an argument of the product");
        product.table = product.table.sum_out(ai);
        product.args.remove(ai);
        product.relabel();
        product.absorb_unused(self.model);
        for i in members.iter().rev() {
            self.factors.remove(*i);
        }
        self.factors.push(product);
        self.collect_constants();
        self.stats.lifted_eliminations += 1;
        Ok(())
    }

    /// Eliminates every group except `keep`, grounding logvars when no group
    /// admits a lifted sum-out.
    fn eliminate_all(&mut self, keep: &BTreeSet<GroundRv>) -> Result<()> {
        loop {
            let groups = self.groups();
            let is_kept = |(prv, slots): &GroupKey| {
                slots.iter().all(|s| matches!(s, Slot::Const(_)))
                    && keep.contains(&GroundRv::new(
                        *prv,
                        slots
                            .iter()
                            .map(|s| match s {
                                Slot::Const(c) => *c,
                                Slot::Free(_) => unreachable!(),
                            })
                            .collect(),
                    ))
            };
            let mut best: Option<(usize, &GroupKey)> = None;
            let mut fallback: Option<(usize, &GroupKey)> = None;
            for (key, pos) in &groups {
                if is_kept(key) {
                    continue;
                }
                let blocked: Vec<(usize, Vec<LogVarId>)> = pos
                    .iter()
                    .map(|(fi, ai)| (*fi, self.blocking(*fi, *ai)))
                    .filter(|(_, b)| !b.is_empty())
                    .collect();
                if blocked.is_empty() {
                    let size = self.result_size(pos);
                    if best.map_or(true, |(s, _)| size < s) {
                        best = Some((size, key));
                    }
                } else {
                    let cost = blocked
                        .iter()
                        .map(|(fi, lvs)| {
                            lvs.iter()
                                .map(|lv| self.factors[*fi].lvs[lv].len())
                                .fold(1usize, usize::saturating_mul)
                        })
                        .fold(0usize, usize::saturating_add);
                    if fallback.map_or(true, |(c, _)| cost < c) {
                        fallback = Some((cost, key));
                    }
                }
            }
            if let Some((_, key)) = best {
                let key = key.clone();
                let pos = groups[&key].clone();
                self.eliminate(&key, &pos)?;
                continue;
            }
            let Some((_, key)) = fallback else {
                return Ok(());
            };
            // ground the blocking logvars of the cheapest group, then
            // re-shatter
            self.stats.fallbacks += 1;
            let key = key.clone();
            let mut todo: Vec<(usize, Vec<LogVarId>)> = groups[&key]
                .iter()
                .map(|(fi, ai)| (*fi, self.blocking(*fi, *ai)))
                .filter(|(_, b)| !b.is_empty())
                .collect();
            todo.sort_by(|a, b| b.0.cmp(&a.0));
            for (fi, lvs) in todo {
                let mut pending = vec![self.factors.remove(fi)];
                for lv in lvs {
                    pending = pending
                        .into_iter()
                        .flat_map(|f| {
                            let set = f.lvs.get(&lv).cloned();
                            set.into_iter().flat_map(move |s| {
                                let f = f.clone();
                                s.iter()
                                    .map(move |c| f.with_lv(lv, vec![*c]))
                                    .collect::<Vec<_>>()
                            })
                        })
                        .filter_map(|f| f.normalize(self.model))
                        .collect();
                }
                self.factors.extend(pending);
                self.guard()?;
            }
            self.shatter(&[])?;
        }
    }

    /// Table size after eliminating the group at `pos`.
    fn result_size(&self, pos: &[(usize, usize)]) -> usize {
        let mut seen = BTreeSet::new();
        let mut size = 1usize;
        for (fi, ai) in pos {
            for (j, a) in self.factors[*fi].args.iter().enumerate() {
                if j != *ai && seen.insert(a) {
                    size = size.saturating_mul(self.model.card(a.prv));
                }
            }
        }
        size
    }

    /// Product of the remaining factors over `targets`, normalised.
    fn finish(&self, targets: &[GroundRv]) -> Result<Vec<f64>> {
        if self.log_constant == f64::NEG_INFINITY {
            return Err(Error::InconsistentEvidence);
        }
        let index: HashMap<LArg, usize> = targets
            .iter()
            .enumerate()
            .map(|(i, t)| {
                (
                    LArg {
                        prv: t.prv,
                        fixed: t.args.iter().map(|c| Some(*c)).collect(),
                    },
                    i,
                )
            })
            .collect();
        let mut result = LogTable::scalar(0.0);
        for (i, t) in targets.iter().enumerate() {
            let c = self.model.card(t.prv);
            result = result.product(&LogTable {
                vars: vec![i],
                cards: vec![c],
                values: vec![0.0; c],
            });
        }
        for f in &self.factors {
            if !f.lvs.is_empty() {
                return Err(Error::Precondition("a parfactor kept its logvars".into()));
            }
            let mut t = f.table.clone();
            t.vars = f
                .args
                .iter()
                .map(|a| {
                    index
                        .get(a)
                        .copied()
                        .ok_or_else(|| Error::Precondition("non-target variable left".into()))
                })
                .collect::<Result<_>>()?;
            result = result.product(&t);
        }
        let order: Vec<usize> = (0..targets.len()).collect();
        result
            .permute(&order)
            .normalized()
            .ok_or(Error::InconsistentEvidence)
    }
}

/// Product of factors ranging over identical logvar sets; equal arguments
/// become one table variable.
fn multiply_all(fs: &[&LFactor]) -> LFactor {
    let mut args: Vec<LArg> = Vec::new();
    let mut index: HashMap<LArg, usize> = HashMap::new();
    let mut table = LogTable::scalar(0.0);
    for f in fs {
        let mut t = f.table.clone();
        t.vars = f
            .args
            .iter()
            .map(|a| {
                *index.entry(a.clone()).or_insert_with(|| {
                    args.push(a.clone());
                    args.len() - 1
                })
            })
            .collect();
        table = table.product(&t);
    }
    let order: Vec<usize> = (0..args.len()).collect();
    LFactor {
        lvs: fs[0].lvs.clone(),
        args,
        table: table.permute(&order),
    }
}

/// `P(targets | evidence)` on the lifted level. `model` may carry mutilated
/// parfactors; interventions are handled by the caller.
pub fn lve_query(model: &Model, targets: &[GroundRv], evidence: &[(GroundRv, usize)]) -> Result<Distribution> {
    lve_query_with(model, targets, evidence, &LveOptions::default()).map(|(d, _)| d)
}

pub fn lve_query_with(
    model: &Model,
    targets: &[GroundRv],
    evidence: &[(GroundRv, usize)],
    opts: &LveOptions,
) -> Result<(Distribution, LveStats)> {
    if targets.is_empty() {
        return Err(Error::query("no query targets"));
    }
    for rv in targets.iter().chain(evidence.iter().map(|e| &e.0)) {
        if !model.occurs(rv) {
            return Err(Error::query(format!("`{}` does not occur in the model", model.rv_name(rv))));
        }
    }
    let mut state = LiftedState::from_model(model, *opts);
    let terms: Vec<GroundRv> = targets
        .iter()
        .cloned()
        .chain(evidence.iter().map(|e| e.0.clone()))
        .collect();
    state.shatter(&terms)?;
    for (rv, v) in evidence {
        state.absorb_evidence(rv, *v);
    }
    for f in &mut state.factors {
        f.absorb_unused(model);
    }
    state.collect_constants();
    let keep: BTreeSet<GroundRv> = targets.iter().cloned().collect();
    state.eliminate_all(&keep)?;
    let probs = state.finish(targets)?;
    Ok((Distribution::over_model(model, targets, probs), state.stats))
}

/// Marginal or conditional query without interventions.
pub fn lve(model: &Model, query: &Query) -> Result<Distribution> {
    query.check(model)?;
    if !query.dos.is_empty() {
        return Err(Error::query("interventions need lifted causal inference"));
    }
    lve_query(model, &query.target_rvs(model)?, &query.evidence)
}

#[cfg(test)]
mod tests;
