//! Lifted data model: logical variables with finite domains, parameterised
//! random variables (PRVs), constraints, directed parfactors and the
//! parametric causal factor graph (PCFG) holding them.
//!
//! Identifiers are plain indices into the owning [`Model`]. Logical
//! variables and domains are the same thing here: a PRV `Comp(E)` names the
//! logvar `E`, and `E` carries its own constant domain.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LogVarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RangeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PrvId(pub usize);

/// A logical variable together with its ordered constant domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Domain {
    pub name: String,
    pub constants: Vec<String>,
}

impl Domain {
    pub fn size(&self) -> usize {
        self.constants.len()
    }

    pub fn index_of(&self, constant: &str) -> Option<u32> {
        self.constants
            .iter()
            .position(|c| c == constant)
            .map(|i| i as u32)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Range {
    pub name: String,
    pub values: Vec<String>,
}

impl Range {
    pub fn size(&self) -> usize {
        self.values.len()
    }

    pub fn index_of(&self, value: &str) -> Option<usize> {
        self.values.iter().position(|v| v == value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prv {
    pub name: String,
    pub params: Vec<LogVarId>,
    pub range: RangeId,
}

/// One instance of a PRV. `args[i]` indexes into the domain of `params[i]`
/// of the owning PRV.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundRv {
    pub prv: PrvId,
    pub args: Vec<u32>,
}

impl GroundRv {
    pub fn new(prv: PrvId, args: Vec<u32>) -> Self {
        GroundRv { prv, args }
    }
}

/// Sorted, duplicate-free set of constant tuples of a fixed arity, stored
/// flat.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TupleSet {
    arity: usize,
    len: usize,
    data: Vec<u32>,
}

impl TupleSet {
    pub fn empty(arity: usize) -> Self {
        TupleSet {
            arity,
            len: 0,
            data: Vec::new(),
        }
    }

    pub fn from_tuples<I, T>(arity: usize, tuples: I) -> Self
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u32]>,
    {
        let mut rows: Vec<Vec<u32>> = tuples.into_iter().map(|t| t.as_ref().to_vec()).collect();
        debug_assert!(rows.iter().all(|r| r.len() == arity));
        rows.sort_unstable();
        rows.dedup();
        let len = rows.len();
        TupleSet {
            arity,
            len,
            data: rows.into_iter().flatten().collect(),
        }
    }

    /// Builds from tuples already sorted and unique.
    pub(crate) fn from_sorted_flat(arity: usize, data: Vec<u32>, len: usize) -> Self {
        debug_assert!(arity == 0 || data.len() == arity * len);
        TupleSet { arity, len, data }
    }

    /// Cartesian product of `0..sizes[i]`, in lexicographic order.
    pub fn full(sizes: &[usize]) -> Self {
        let arity = sizes.len();
        let len: usize = sizes.iter().product();
        let mut data = Vec::with_capacity(len * arity);
        let mut cur = vec![0u32; arity];
        for _ in 0..len {
            data.extend_from_slice(&cur);
            for k in (0..arity).rev() {
                cur[k] += 1;
                if (cur[k] as usize) < sizes[k] {
                    break;
                }
                cur[k] = 0;
            }
        }
        TupleSet { arity, len, data }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> &[u32] {
        &self.data[i * self.arity..(i + 1) * self.arity]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u32]> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn contains(&self, tuple: &[u32]) -> bool {
        if tuple.len() != self.arity {
            return false;
        }
        let (mut lo, mut hi) = (0, self.len);
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.get(mid).cmp(tuple) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return true,
            }
        }
        false
    }

    /// Splits into (tuples satisfying `pred`, the rest), preserving order.
    pub fn partition(&self, mut pred: impl FnMut(&[u32]) -> bool) -> (TupleSet, TupleSet) {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        let (mut na, mut nb) = (0, 0);
        for t in self.iter() {
            if pred(t) {
                a.extend_from_slice(t);
                na += 1;
            } else {
                b.extend_from_slice(t);
                nb += 1;
            }
        }
        (
            TupleSet::from_sorted_flat(self.arity, a, na),
            TupleSet::from_sorted_flat(self.arity, b, nb),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Allowed {
    /// No restriction: the full Cartesian product of the logvar domains.
    Top,
    Tuples(TupleSet),
}

/// A constraint `(X, C_X)` over an ordered logvar sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub logvars: Vec<LogVarId>,
    pub allowed: Allowed,
}

impl Constraint {
    pub fn top(logvars: Vec<LogVarId>) -> Self {
        Constraint {
            logvars,
            allowed: Allowed::Top,
        }
    }

    pub fn tuples(logvars: Vec<LogVarId>, tuples: TupleSet) -> Self {
        Constraint {
            logvars,
            allowed: Allowed::Tuples(tuples),
        }
    }

    pub fn is_top(&self) -> bool {
        matches!(self.allowed, Allowed::Top)
    }

    /// Number of allowed tuples.
    pub fn count(&self, model: &Model) -> usize {
        match &self.allowed {
            Allowed::Top => self.logvars.iter().map(|lv| model.domain(*lv).size()).product(),
            Allowed::Tuples(t) => t.len(),
        }
    }

    /// Explicit tuple set; TOP is materialised.
    pub fn materialize(&self, model: &Model) -> TupleSet {
        match &self.allowed {
            Allowed::Top => {
                let sizes: Vec<usize> = self.logvars.iter().map(|lv| model.domain(*lv).size()).collect();
                TupleSet::full(&sizes)
            }
            Allowed::Tuples(t) => t.clone(),
        }
    }
}

/// A directed parfactor `phi(A_1..A_k)|C -> child`.
///
/// `table` is dense, row-major over the range product of `args`, the first
/// argument being the most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct Parfactor {
    pub name: String,
    pub args: Vec<PrvId>,
    pub child: Option<PrvId>,
    pub constraint: Constraint,
    pub table: Vec<f64>,
    /// Set once an intervention has written hard 0/1 entries.
    pub mutilated: bool,
}

impl Parfactor {
    pub fn child_index(&self) -> Option<usize> {
        let c = self.child?;
        self.args.iter().position(|a| *a == c)
    }

    /// Parent PRVs (all arguments except the child).
    pub fn parent_prvs(&self) -> impl Iterator<Item = PrvId> + '_ {
        self.args.iter().copied().filter(move |a| Some(*a) != self.child)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Cycle,
    MissingChild,
    ChildNotArgument,
    TableSize,
    NonPositive,
    Constraint,
    Reference,
    DuplicateName,
    DuplicateArgument,
    UnusedPrv,
    EmptySet,
    NoParfactors,
    NotNormalized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub severity: Severity,
    pub kind: ViolationKind,
    /// Name of the offending declaration.
    pub item: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{sev}: {}: {}", self.item, self.message)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ValidateOptions {
    /// When set, warn about parfactors whose rows (assignments differing only
    /// at the child) do not sum to one within this tolerance.
    pub normalization_tolerance: Option<f64>,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        ValidateOptions {
            normalization_tolerance: None,
        }
    }
}

/// A parametric causal factor graph.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Model {
    // shared: derived models (splits, mutilation) reuse the declarations
    pub(crate) domains: Arc<Vec<Domain>>,
    pub(crate) ranges: Vec<Range>,
    pub(crate) prvs: Vec<Prv>,
    pub(crate) parfactors: Vec<Parfactor>,
}

impl Model {
    pub fn domains(&self) -> &[Domain] {
        &self.domains
    }

    pub fn ranges(&self) -> &[Range] {
        &self.ranges
    }

    pub fn prvs(&self) -> &[Prv] {
        &self.prvs
    }

    pub fn parfactors(&self) -> &[Parfactor] {
        &self.parfactors
    }

    pub fn domain(&self, lv: LogVarId) -> &Domain {
        &self.domains[lv.0]
    }

    pub fn range(&self, id: RangeId) -> &Range {
        &self.ranges[id.0]
    }

    pub fn prv(&self, id: PrvId) -> &Prv {
        &self.prvs[id.0]
    }

    pub fn prv_range(&self, id: PrvId) -> &Range {
        self.range(self.prv(id).range)
    }

    pub fn card(&self, id: PrvId) -> usize {
        self.prv_range(id).size()
    }

    pub fn logvar_by_name(&self, name: &str) -> Option<LogVarId> {
        self.domains.iter().position(|d| d.name == name).map(LogVarId)
    }

    pub fn prv_by_name(&self, name: &str) -> Option<PrvId> {
        self.prvs.iter().position(|p| p.name == name).map(PrvId)
    }

    pub fn parfactor_by_name(&self, name: &str) -> Option<&Parfactor> {
        self.parfactors.iter().find(|g| g.name == name)
    }

    /// `lv(g)`: the logvars of a parfactor's arguments, in id order.
    pub fn parfactor_logvars(&self, g: &Parfactor) -> Vec<LogVarId> {
        self.logvars_of(&g.args)
    }

    pub fn logvars_of(&self, args: &[PrvId]) -> Vec<LogVarId> {
        let set: BTreeSet<LogVarId> = args
            .iter()
            .flat_map(|a| self.prv(*a).params.iter().copied())
            .collect();
        set.into_iter().collect()
    }

    /// Number of ground instances of a PRV under TOP.
    pub fn prv_grounding_count(&self, id: PrvId) -> usize {
        self.prv(id)
            .params
            .iter()
            .map(|lv| self.domain(*lv).size())
            .product()
    }

    pub fn rv_name(&self, rv: &GroundRv) -> String {
        let prv = self.prv(rv.prv);
        if prv.params.is_empty() {
            return prv.name.clone();
        }
        let args: Vec<&str> = prv
            .params
            .iter()
            .zip(&rv.args)
            .map(|(lv, c)| self.domain(*lv).constants[*c as usize].as_str())
            .collect();
        format!("{}({})", prv.name, args.join(","))
    }

    pub fn prv_display(&self, id: PrvId) -> String {
        let prv = self.prv(id);
        if prv.params.is_empty() {
            return prv.name.clone();
        }
        let params: Vec<&str> = prv.params.iter().map(|lv| self.domain(*lv).name.as_str()).collect();
        format!("{}({})", prv.name, params.join(","))
    }

    /// Whether `rv` is an argument of some ground factor.
    pub fn occurs(&self, rv: &GroundRv) -> bool {
        if rv.prv.0 >= self.prvs.len() || rv.args.len() != self.prv(rv.prv).params.len() {
            return false;
        }
        let params = &self.prv(rv.prv).params;
        if rv
            .args
            .iter()
            .zip(params)
            .any(|(c, lv)| *c as usize >= self.domain(*lv).size())
        {
            return false;
        }
        self.parfactors.iter().filter(|g| g.args.contains(&rv.prv)).any(|g| match &g.constraint.allowed {
            Allowed::Top => true,
            Allowed::Tuples(ts) => {
                let pos: Vec<usize> = params
                    .iter()
                    .map(|lv| g.constraint.logvars.iter().position(|x| x == lv).unwrap_or(usize::MAX))
                    .collect();
                ts.iter()
                    .any(|t| pos.iter().zip(&rv.args).all(|(&p, c)| t.get(p) == Some(c)))
            }
        })
    }

    /// `Pa_G(A)`: indices of the parfactors whose child is `prv`.
    pub fn parents(&self, prv: PrvId) -> Vec<usize> {
        self.parfactors
            .iter()
            .enumerate()
            .filter(|(_, g)| g.child == Some(prv))
            .map(|(i, _)| i)
            .collect()
    }

    /// `Ch_G(g)`: the child PRV of a parfactor.
    pub fn child(&self, parfactor: usize) -> Result<PrvId> {
        let g = &self.parfactors[parfactor];
        g.child.ok_or_else(|| {
            Error::Precondition(format!("parfactor `{}` has no child in a directed model", g.name))
        })
    }

    /// `gr(A|C)`: instances of `prv` allowed by `constraint`, sorted and
    /// deduplicated. The constraint may range over more logvars than the PRV
    /// uses; the allowed tuples are then projected.
    pub fn groundings(&self, prv: PrvId, constraint: &Constraint) -> Result<Vec<GroundRv>> {
        let p = self.prv(prv);
        let mut positions = Vec::with_capacity(p.params.len());
        for lv in &p.params {
            match constraint.logvars.iter().position(|x| x == lv) {
                Some(i) => positions.push(i),
                None => {
                    return Err(Error::Unknown {
                        kind: "logvar in constraint",
                        name: self.domain(*lv).name.clone(),
                    })
                }
            }
        }
        let out: BTreeSet<Vec<u32>> = match &constraint.allowed {
            Allowed::Top => {
                let sizes: Vec<usize> = p.params.iter().map(|lv| self.domain(*lv).size()).collect();
                return Ok(TupleSet::full(&sizes)
                    .iter()
                    .map(|t| GroundRv::new(prv, t.to_vec()))
                    .collect());
            }
            Allowed::Tuples(ts) => {
                if ts.arity() != constraint.logvars.len() {
                    return Err(Error::Arity {
                        name: "constraint".into(),
                        expected: constraint.logvars.len(),
                        found: ts.arity(),
                    });
                }
                ts.iter()
                    .map(|t| positions.iter().map(|&i| t[i]).collect())
                    .collect()
            }
        };
        Ok(out.into_iter().map(|args| GroundRv::new(prv, args)).collect())
    }

    pub fn validate(&self) -> Vec<Violation> {
        self.validate_with(ValidateOptions::default())
    }

    pub fn validate_with(&self, opts: ValidateOptions) -> Vec<Violation> {
        let out = std::cell::RefCell::new(Vec::new());
        let mut err = |kind, item: &str, message: String| {
            out.borrow_mut().push(Violation {
                severity: Severity::Error,
                kind,
                item: item.to_string(),
                message,
            })
        };

        check_unique(self.domains.iter().map(|d| d.name.as_str()), "domain", &mut err);
        check_unique(self.ranges.iter().map(|r| r.name.as_str()), "range", &mut err);
        check_unique(self.prvs.iter().map(|p| p.name.as_str()), "PRV", &mut err);
        check_unique(self.parfactors.iter().map(|g| g.name.as_str()), "parfactor", &mut err);

        for d in self.domains.iter() {
            if d.constants.is_empty() {
                err(ViolationKind::EmptySet, &d.name, "domain has no constants".into());
            }
            check_unique(d.constants.iter().map(String::as_str), "constant", &mut err);
        }
        for r in &self.ranges {
            if r.values.is_empty() {
                err(ViolationKind::EmptySet, &r.name, "range has no values".into());
            }
            check_unique(r.values.iter().map(String::as_str), "range value", &mut err);
        }
        for p in &self.prvs {
            if p.range.0 >= self.ranges.len() {
                err(ViolationKind::Reference, &p.name, "unknown range".into());
            }
            if p.params.iter().any(|lv| lv.0 >= self.domains.len()) {
                err(ViolationKind::Reference, &p.name, "unknown logvar".into());
            }
            let distinct: BTreeSet<_> = p.params.iter().collect();
            if distinct.len() != p.params.len() {
                err(ViolationKind::DuplicateArgument, &p.name, "repeated logvar parameter".into());
            }
        }
        if self.parfactors.is_empty() {
            err(ViolationKind::NoParfactors, "model", "no parfactors".into());
        }
        let mut structurally_sound = out.borrow().is_empty();

        for g in &self.parfactors {
            if g.args.iter().any(|a| a.0 >= self.prvs.len()) {
                err(ViolationKind::Reference, &g.name, "unknown PRV argument".into());
                structurally_sound = false;
                continue;
            }
            let distinct: BTreeSet<_> = g.args.iter().collect();
            if distinct.len() != g.args.len() {
                err(ViolationKind::DuplicateArgument, &g.name, "a PRV occurs twice among the arguments".into());
            }
            match g.child {
                None => err(ViolationKind::MissingChild, &g.name, "parfactor has no child".into()),
                Some(c) if !g.args.contains(&c) => err(
                    ViolationKind::ChildNotArgument,
                    &g.name,
                    format!("child `{}` is not among the arguments", self.prvs.get(c.0).map_or("?", |p| &p.name)),
                ),
                Some(_) => {}
            }
            if !structurally_sound {
                continue;
            }
            let size: usize = g.args.iter().map(|a| self.card(*a)).product();
            if g.table.len() != size {
                err(
                    ViolationKind::TableSize,
                    &g.name,
                    format!("table has {} entries, range product has {size}", g.table.len()),
                );
            }
            if g.mutilated {
                if g.table.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    err(ViolationKind::NonPositive, &g.name, "mutilated table has a negative or non-finite entry".into());
                }
            } else if let Some(v) = g.table.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                err(ViolationKind::NonPositive, &g.name, format!("potential {v} is not a positive real"));
            }
            let lvs = self.parfactor_logvars(g);
            if g.constraint.logvars != lvs {
                err(
                    ViolationKind::Constraint,
                    &g.name,
                    "constraint logvars differ from the logvars of the arguments".into(),
                );
            } else if let Allowed::Tuples(ts) = &g.constraint.allowed {
                if ts.is_empty() {
                    err(ViolationKind::Constraint, &g.name, "constraint allows no tuples".into());
                }
                if ts.arity() != lvs.len() {
                    err(ViolationKind::Constraint, &g.name, "constraint tuple arity mismatch".into());
                } else if ts.iter().any(|t| {
                    t.iter()
                        .zip(&lvs)
                        .any(|(c, lv)| *c as usize >= self.domain(*lv).size())
                }) {
                    err(ViolationKind::Constraint, &g.name, "constraint constant outside its domain".into());
                }
            }
        }

        if structurally_sound {
            for (i, p) in self.prvs.iter().enumerate() {
                if !self.parfactors.iter().any(|g| g.args.contains(&PrvId(i))) {
                    err(ViolationKind::UnusedPrv, &p.name, "PRV is not used by any parfactor".into());
                }
            }
            if let Some(cycle_at) = self.find_cycle() {
                err(
                    ViolationKind::Cycle,
                    &self.prvs[cycle_at.0].name,
                    "directed cycle through this PRV".into(),
                );
            }
        }

        if let (Some(tol), true) = (opts.normalization_tolerance, structurally_sound) {
            for g in &self.parfactors {
                if let Some(ci) = g.child_index() {
                    let cards: Vec<usize> = g.args.iter().map(|a| self.card(*a)).collect();
                    if g.table.len() == cards.iter().product::<usize>() {
                        if let Some(sum) = row_sums(&g.table, &cards, ci).into_iter().find(|s| (s - 1.0).abs() > tol) {
                            out.borrow_mut().push(Violation {
                                severity: Severity::Warning,
                                kind: ViolationKind::NotNormalized,
                                item: g.name.clone(),
                                message: format!("a row over the child sums to {sum}"),
                            });
                        }
                    }
                }
            }
        }
        out.into_inner()
    }

    /// Returns some PRV on a directed cycle of the PRV-level graph, if any.
    fn find_cycle(&self) -> Option<PrvId> {
        let n = self.prvs.len();
        let mut succ = vec![BTreeSet::new(); n];
        for g in &self.parfactors {
            if let Some(c) = g.child {
                for p in g.parent_prvs() {
                    succ[p.0].insert(c.0);
                }
            }
        }
        let mut indeg = vec![0usize; n];
        for s in &succ {
            for &t in s {
                indeg[t] += 1;
            }
        }
        let mut stack: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut seen = 0;
        while let Some(v) = stack.pop() {
            seen += 1;
            for &t in &succ[v] {
                indeg[t] -= 1;
                if indeg[t] == 0 {
                    stack.push(t);
                }
            }
        }
        if seen == n {
            None
        } else {
            (0..n).find(|&i| indeg[i] > 0).map(PrvId)
        }
    }

    /// Fails with all error-level violations, if any.
    pub fn ensure_valid(&self) -> Result<()> {
        let errors: Vec<Violation> = self
            .validate()
            .into_iter()
            .filter(|v| v.severity == Severity::Error)
            .collect();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(errors))
        }
    }
}

fn check_unique<'a>(
    names: impl Iterator<Item = &'a str>,
    kind: &str,
    err: &mut impl FnMut(ViolationKind, &str, String),
) {
    let mut seen = BTreeSet::new();
    for n in names {
        if !seen.insert(n) {
            err(ViolationKind::DuplicateName, n, format!("duplicate {kind} name"));
        }
    }
}

/// Row-major strides for a dense table with the given cardinalities.
pub fn strides(cards: &[usize]) -> Vec<usize> {
    let mut s = vec![1; cards.len()];
    for i in (0..cards.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * cards[i + 1];
    }
    s
}

/// Sums of `table` over the position `axis`, one per assignment of the
/// other positions.
pub fn row_sums(table: &[f64], cards: &[usize], axis: usize) -> Vec<f64> {
    let st = strides(cards);
    let inner = st[axis];
    let block = inner * cards[axis];
    let mut out = Vec::with_capacity(table.len() / cards[axis].max(1));
    for base in (0..table.len()).step_by(block.max(1)) {
        for off in 0..inner {
            out.push((0..cards[axis]).map(|v| table[base + off + v * inner]).sum());
        }
    }
    out
}

/// Incremental construction by name. Name resolution errors are reported
/// immediately; semantic checks run in [`ModelBuilder::build`].
#[derive(Debug, Default)]
pub struct ModelBuilder {
    model: Model,
    domain_ix: HashMap<String, LogVarId>,
    range_ix: HashMap<String, RangeId>,
    prv_ix: HashMap<String, PrvId>,
}

impl ModelBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn domain<S: Into<String>>(
        &mut self,
        name: &str,
        constants: impl IntoIterator<Item = S>,
    ) -> Result<LogVarId> {
        if self.domain_ix.contains_key(name) {
            return Err(Error::Duplicate {
                kind: "domain",
                name: name.into(),
            });
        }
        let id = LogVarId(self.model.domains.len());
        Arc::make_mut(&mut self.model.domains).push(Domain {
            name: name.into(),
            constants: constants.into_iter().map(Into::into).collect(),
        });
        self.domain_ix.insert(name.into(), id);
        Ok(id)
    }

    pub fn range<S: Into<String>>(
        &mut self,
        name: &str,
        values: impl IntoIterator<Item = S>,
    ) -> Result<RangeId> {
        if self.range_ix.contains_key(name) {
            return Err(Error::Duplicate {
                kind: "range",
                name: name.into(),
            });
        }
        let id = RangeId(self.model.ranges.len());
        self.model.ranges.push(Range {
            name: name.into(),
            values: values.into_iter().map(Into::into).collect(),
        });
        self.range_ix.insert(name.into(), id);
        Ok(id)
    }

    pub fn prv(&mut self, name: &str, params: &[&str], range: &str) -> Result<PrvId> {
        if self.prv_ix.contains_key(name) {
            return Err(Error::Duplicate {
                kind: "PRV",
                name: name.into(),
            });
        }
        let params = params
            .iter()
            .map(|p| self.logvar(p))
            .collect::<Result<Vec<_>>>()?;
        let range = *self.range_ix.get(range).ok_or_else(|| Error::Unknown {
            kind: "range",
            name: range.into(),
        })?;
        let id = PrvId(self.model.prvs.len());
        self.model.prvs.push(Prv {
            name: name.into(),
            params,
            range,
        });
        self.prv_ix.insert(name.into(), id);
        Ok(id)
    }

    pub fn logvar(&self, name: &str) -> Result<LogVarId> {
        self.domain_ix.get(name).copied().ok_or_else(|| Error::Unknown {
            kind: "logvar",
            name: name.into(),
        })
    }

    pub fn prv_id(&self, name: &str) -> Result<PrvId> {
        self.prv_ix.get(name).copied().ok_or_else(|| Error::Unknown {
            kind: "PRV",
            name: name.into(),
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    /// Adds a parfactor. `tuples` are constant names ordered by the
    /// parfactor's logvars in declaration order; `None` means TOP.
    pub fn parfactor(
        &mut self,
        name: &str,
        args: &[&str],
        child: Option<&str>,
        tuples: Option<&[Vec<&str>]>,
        table: Vec<f64>,
    ) -> Result<usize> {
        let args = args
            .iter()
            .map(|a| self.prv_id(a))
            .collect::<Result<Vec<_>>>()?;
        let child = child.map(|c| self.prv_id(c)).transpose()?;
        let constraint = self.constraint_for(&args, tuples)?;
        self.push_parfactor(Parfactor {
            name: name.into(),
            args,
            child,
            constraint,
            table,
            mutilated: false,
        })
    }

    pub(crate) fn constraint_for(&self, args: &[PrvId], tuples: Option<&[Vec<&str>]>) -> Result<Constraint> {
        let lvs = self.model.logvars_of(args);
        let Some(tuples) = tuples else {
            return Ok(Constraint::top(lvs));
        };
        let mut rows = Vec::with_capacity(tuples.len());
        for t in tuples {
            if t.len() != lvs.len() {
                return Err(Error::Arity {
                    name: "constraint tuple".into(),
                    expected: lvs.len(),
                    found: t.len(),
                });
            }
            let row = t
                .iter()
                .zip(&lvs)
                .map(|(c, lv)| {
                    let d = self.model.domain(*lv);
                    d.index_of(c).ok_or_else(|| Error::Unknown {
                        kind: "constant",
                        name: format!("{c} (domain {})", d.name),
                    })
                })
                .collect::<Result<Vec<u32>>>()?;
            rows.push(row);
        }
        Ok(Constraint::tuples(lvs.clone(), TupleSet::from_tuples(lvs.len(), rows)))
    }

    pub fn push_parfactor(&mut self, g: Parfactor) -> Result<usize> {
        if self.model.parfactors.iter().any(|h| h.name == g.name) {
            return Err(Error::Duplicate {
                kind: "parfactor",
                name: g.name,
            });
        }
        self.model.parfactors.push(g);
        Ok(self.model.parfactors.len() - 1)
    }

    /// Returns the model without running validation.
    pub fn build_unchecked(self) -> Model {
        self.model
    }

    pub fn build(self) -> Result<Model> {
        self.model.ensure_valid()?;
        Ok(self.model)
    }
}

impl Model {
    /// Model with the same declarations and the given parfactors.
    pub(crate) fn with_parfactors(&self, parfactors: Vec<Parfactor>) -> Model {
        Model {
            domains: self.domains.clone(),
            ranges: self.ranges.clone(),
            prvs: self.prvs.clone(),
            parfactors,
        }
    }

    /// A fresh parfactor name derived from `base` by appending primes.
    pub(crate) fn fresh_name(&self, base: &str, taken: &BTreeSet<String>) -> String {
        let mut name = format!("{base}'");
        while taken.contains(&name) || self.parfactors.iter().any(|g| g.name == name) {
            name.push('\'');
        }
        name
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn groundings_under_top_and_explicit() {
        let m = fixtures::employee_model(4, 2);
        let train = m.prv_by_name("Train").unwrap();
        let g2 = m.parfactor_by_name("g2").unwrap();
        assert_eq!(m.groundings(train, &g2.constraint).unwrap().len(), 8);

        let rev = m.prv_by_name("Rev").unwrap();
        let g4 = m.parfactor_by_name("g4").unwrap();
        let rv = m.groundings(rev, &g4.constraint).unwrap();
        assert_eq!(rv.len(), 1);
        assert_eq!(m.rv_name(&rv[0]), "Rev");

        let e = m.logvar_by_name("E").unwrap();
        let t = m.logvar_by_name("T").unwrap();
        let bob = m.domain(e).index_of("bob").unwrap();
        let t1 = m.domain(t).index_of("t1").unwrap();
        let c = Constraint::tuples(vec![e, t], TupleSet::from_tuples(2, [[bob, t1]]));
        let rv = m.groundings(train, &c).unwrap();
        assert_eq!(rv.len(), 1);
        assert_eq!(m.rv_name(&rv[0]), "Train(bob,t1)");
    }

    #[test]
    fn groundings_reject_missing_logvar() {
        let m = fixtures::employee_model(2, 2);
        let train = m.prv_by_name("Train").unwrap();
        let e = m.logvar_by_name("E").unwrap();
        let c = Constraint::top(vec![e]);
        assert!(matches!(m.groundings(train, &c), Err(Error::Unknown { .. })));
    }

    #[test]
    fn parents_and_child_of_employee_model() {
        let m = fixtures::employee_model(4, 2);
        let comp = m.prv_by_name("Comp").unwrap();
        let qual = m.prv_by_name("Qual").unwrap();
        let names = |ix: Vec<usize>| -> Vec<String> { ix.into_iter().map(|i| m.parfactors()[i].name.clone()).collect() };
        assert_eq!(names(m.parents(comp)), vec!["g3"]);
        assert_eq!(names(m.parents(qual)), vec!["g1"]);
        let g4 = m.parfactors().iter().position(|g| g.name == "g4").unwrap();
        assert_eq!(m.child(g4).unwrap(), m.prv_by_name("Rev").unwrap());
    }

    #[test]
    fn child_of_undirected_parfactor_is_an_error() {
        let mut m = fixtures::employee_model(2, 1);
        m.parfactors[0].child = None;
        assert!(m.child(0).is_err());
        assert!(m.validate().iter().any(|v| v.kind == ViolationKind::MissingChild));
    }

    #[test]
    fn employee_model_is_valid() {
        let m = fixtures::employee_model(4, 2);
        assert!(m.validate().is_empty(), "{:?}", m.validate());
    }

    #[test]
    fn cycle_is_reported() {
        let m = fixtures::employee_model(2, 2);
        let mut g = m.parfactors[0].clone();
        // Rev -> Qual(T) closes Qual -> Train -> Comp -> Rev -> Qual.
        g.name = "back".into();
        g.args = vec![m.prv_by_name("Rev").unwrap(), m.prv_by_name("Qual").unwrap()];
        g.child = Some(m.prv_by_name("Qual").unwrap());
        g.constraint = Constraint::top(vec![m.logvar_by_name("T").unwrap()]);
        g.table = vec![1.0; 9];
        let mut pfs = m.parfactors.clone();
        pfs.push(g);
        let m = m.with_parfactors(pfs);
        assert!(m.validate().iter().any(|v| v.kind == ViolationKind::Cycle));
    }

    #[test]
    fn child_outside_arguments_is_reported() {
        let mut m = fixtures::employee_model(2, 2);
        m.parfactors[3].child = Some(m.prv_by_name("Qual").unwrap());
        assert!(m.validate().iter().any(|v| v.kind == ViolationKind::ChildNotArgument));
    }

    #[test]
    fn nonpositive_and_table_size_are_reported() {
        let mut m = fixtures::employee_model(2, 2);
        m.parfactors[0].table[1] = 0.0;
        m.parfactors[1].table.pop();
        let kinds: Vec<_> = m.validate().into_iter().map(|v| v.kind).collect();
        assert!(kinds.contains(&ViolationKind::NonPositive));
        assert!(kinds.contains(&ViolationKind::TableSize));

        m.parfactors[0].mutilated = true;
        let kinds: Vec<_> = m.validate().into_iter().map(|v| v.kind).collect();
        assert_eq!(kinds, vec![ViolationKind::TableSize]);
    }

    #[test]
    fn normalization_warning_is_opt_in() {
        let mut m = fixtures::employee_model(2, 2);
        assert!(m.validate_with(ValidateOptions { normalization_tolerance: Some(1e-9) }).is_empty());
        m.parfactors[2].table[0] *= 2.0;
        let v = m.validate_with(ValidateOptions { normalization_tolerance: Some(1e-9) });
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].severity, Severity::Warning);
        assert!(m.validate().is_empty());
    }

    #[test]
    fn bad_constraint_constant_is_reported() {
        let mut m = fixtures::employee_model(2, 2);
        let lvs = m.parfactors[1].constraint.logvars.clone();
        m.parfactors[1].constraint = Constraint::tuples(lvs, TupleSet::from_tuples(2, [[0, 7]]));
        assert!(m.validate().iter().any(|v| v.kind == ViolationKind::Constraint));
    }

    #[test]
    fn row_sums_over_middle_axis() {
        // cards (2,3,2); sum over axis 1
        let t: Vec<f64> = (0..12).map(f64::from).collect();
        let s = row_sums(&t, &[2, 3, 2], 1);
        assert_eq!(s, vec![0.0 + 2.0 + 4.0, 1.0 + 3.0 + 5.0, 6.0 + 8.0 + 10.0, 7.0 + 9.0 + 11.0]);
    }

    #[test]
    fn tuple_set_basics() {
        let ts = TupleSet::from_tuples(2, [[1, 0], [0, 1], [1, 0]]);
        assert_eq!(ts.len(), 2);
        assert!(ts.contains(&[0, 1]));
        assert!(!ts.contains(&[1, 1]));
        let full = TupleSet::full(&[2, 3]);
        assert_eq!(full.len(), 6);
        assert_eq!(full.get(4), &[1, 1]);
        let empty_arity = TupleSet::full(&[]);
        assert_eq!(empty_arity.len(), 1);
        assert!(empty_arity.contains(&[]));
    }

    proptest::proptest! {
        #[test]
        fn top_grounding_count_is_product_of_domain_sizes(e in 1usize..6, t in 1usize..4) {
            let m = fixtures::employee_model(e, t);
            let train = m.prv_by_name("Train").unwrap();
            let c = Constraint::top(m.prv(train).params.clone());
            proptest::prop_assert_eq!(m.groundings(train, &c).unwrap().len(), e * t);
        }

        #[test]
        fn partition_of_constraint_partitions_groundings(e in 1usize..5, t in 1usize..4, mask in proptest::collection::vec(proptest::bool::ANY, 20)) {
            let m = fixtures::employee_model(e, t);
            let train = m.prv_by_name("Train").unwrap();
            let lvs = m.prv(train).params.clone();
            let all = Constraint::top(lvs.clone()).materialize(&m);
            let mut k = 0;
            let (a, b) = all.partition(|_| { k += 1; mask[(k - 1) % mask.len()] });
            let ga = m.groundings(train, &Constraint::tuples(lvs.clone(), a)).unwrap();
            let gb = m.groundings(train, &Constraint::tuples(lvs.clone(), b)).unwrap();
            let whole = m.groundings(train, &Constraint::top(lvs)).unwrap();
            let mut union: Vec<_> = ga.iter().chain(&gb).cloned().collect();
            union.sort();
            proptest::prop_assert_eq!(union.len(), ga.len() + gb.len());
            proptest::prop_assert_eq!(union, whole);
        }
    }
}
