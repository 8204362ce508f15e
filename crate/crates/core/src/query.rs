//! Queries with evidence and do-assignments, and their ground counterpart.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::ground::GroundFg;
use crate::model::{GroundRv, Model, PrvId};

/// A PRV with some parameters fixed to constants: `Train(E,t1)`.
/// `None` leaves the parameter free over its whole domain.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RvPattern {
    pub prv: PrvId,
    pub args: Vec<Option<u32>>,
}

impl RvPattern {
    pub fn ground(rv: &GroundRv) -> Self {
        RvPattern {
            prv: rv.prv,
            args: rv.args.iter().map(|c| Some(*c)).collect(),
        }
    }

    pub fn whole(model: &Model, prv: PrvId) -> Self {
        RvPattern {
            prv,
            args: vec![None; model.prv(prv).params.len()],
        }
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Option::is_some)
    }

    pub fn matches(&self, rv: &GroundRv) -> bool {
        rv.prv == self.prv
            && self
                .args
                .iter()
                .zip(&rv.args)
                .all(|(p, c)| p.map_or(true, |p| p == *c))
    }

    pub fn overlaps(&self, other: &RvPattern) -> bool {
        self.prv == other.prv
            && self
                .args
                .iter()
                .zip(&other.args)
                .all(|(a, b)| a.is_none() || b.is_none() || a == b)
    }

    /// All instances in domain order.
    pub fn expand(&self, model: &Model) -> Vec<GroundRv> {
        let params = &model.prv(self.prv).params;
        let mut out = vec![Vec::new()];
        for (lv, fixed) in params.iter().zip(&self.args) {
            let choices: Vec<u32> = match fixed {
                Some(c) => vec![*c],
                None => (0..model.domain(*lv).size() as u32).collect(),
            };
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    choices.iter().map(move |c| {
                        let mut p = prefix.clone();
                        p.push(*c);
                        p
                    })
                })
                .collect();
        }
        out.into_iter().map(|args| GroundRv::new(self.prv, args)).collect()
    }

    pub fn display(&self, model: &Model) -> String {
        let prv = model.prv(self.prv);
        if prv.params.is_empty() {
            return prv.name.clone();
        }
        let args: Vec<&str> = prv
            .params
            .iter()
            .zip(&self.args)
            .map(|(lv, a)| {
                let d = model.domain(*lv);
                match a {
                    Some(c) => d.constants[*c as usize].as_str(),
                    None => d.name.as_str(),
                }
            })
            .collect();
        format!("{}({})", prv.name, args.join(","))
    }
}

/// `do(target = value)`; a non-ground target intervenes on every instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DoAssignment {
    pub target: RvPattern,
    pub value: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Query {
    pub targets: Vec<RvPattern>,
    pub evidence: Vec<(GroundRv, usize)>,
    pub dos: Vec<DoAssignment>,
}

impl Query {
    pub fn marginal(targets: Vec<RvPattern>) -> Self {
        Query {
            targets,
            ..Default::default()
        }
    }

    /// Ground target variables in query order, duplicates removed. Ground
    /// targets must occur in the model; lifted targets keep the instances
    /// that occur.
    pub fn target_rvs(&self, model: &Model) -> Result<Vec<GroundRv>> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for t in &self.targets {
            for rv in t.expand(model) {
                if !model.occurs(&rv) {
                    if t.is_ground() {
                        return Err(not_in_model(model, &rv));
                    }
                    continue;
                }
                if seen.insert(rv.clone()) {
                    out.push(rv);
                }
            }
        }
        if out.is_empty() {
            return Err(Error::query("no query target occurs in the model"));
        }
        Ok(out)
    }

    /// Ground do-assignments; lifted targets keep the instances that occur.
    pub fn do_rvs(&self, model: &Model) -> Result<Vec<(GroundRv, usize)>> {
        let mut out = Vec::new();
        for d in &self.dos {
            for rv in d.target.expand(model) {
                if model.occurs(&rv) {
                    out.push((rv, d.value));
                } else if d.target.is_ground() {
                    return Err(not_in_model(model, &rv));
                }
            }
        }
        Ok(out)
    }

    /// Checks the structural invariants: non-empty targets, values within
    /// range, pairwise disjoint do-targets, and no overlap between
    /// do-targets, targets and evidence.
    pub fn check(&self, model: &Model) -> Result<()> {
        if self.targets.is_empty() {
            return Err(Error::query("no query targets"));
        }
        for (rv, v) in &self.evidence {
            if *v >= model.card(rv.prv) {
                return Err(Error::query(format!("value out of range for `{}`", model.rv_name(rv))));
            }
        }
        let mut ev = BTreeSet::new();
        for (rv, _) in &self.evidence {
            if !ev.insert(rv) {
                return Err(Error::query(format!("duplicate evidence on `{}`", model.rv_name(rv))));
            }
        }
        for (i, d) in self.dos.iter().enumerate() {
            if d.value >= model.card(d.target.prv) {
                return Err(Error::query(format!(
                    "value out of range for `{}`",
                    d.target.display(model)
                )));
            }
            for e in &self.dos[..i] {
                if e.target.overlaps(&d.target) {
                    return Err(Error::query(format!(
                        "overlapping do-targets `{}` and `{}`",
                        e.target.display(model),
                        d.target.display(model)
                    )));
                }
            }
            if let Some(t) = self.targets.iter().find(|t| t.overlaps(&d.target)) {
                return Err(Error::query(format!(
                    "do-target `{}` overlaps query target `{}`",
                    d.target.display(model),
                    t.display(model)
                )));
            }
            if let Some((rv, _)) = self.evidence.iter().find(|(rv, _)| d.target.matches(rv)) {
                return Err(Error::query(format!(
                    "`{}` is both observed and intervened on",
                    model.rv_name(rv)
                )));
            }
        }
        for (rv, _) in &self.evidence {
            if self.targets.iter().any(|t| t.matches(rv)) {
                return Err(Error::query(format!("`{}` is both target and evidence", model.rv_name(rv))));
            }
        }
        Ok(())
    }

    /// Resolves against a grounding of `model`.
    pub fn to_ground(&self, model: &Model, fg: &GroundFg) -> Result<GroundQuery> {
        self.check(model)?;
        let lookup = |rv: &GroundRv| fg.index_of(rv).ok_or_else(|| not_in_model(model, rv));
        let targets = self
            .target_rvs(model)?
            .iter()
            .map(lookup)
            .collect::<Result<Vec<_>>>()?;
        let evidence = self
            .evidence
            .iter()
            .map(|(rv, v)| lookup(rv).map(|i| (i, *v)))
            .collect::<Result<Vec<_>>>()?;
        let dos = self
            .do_rvs(model)?
            .iter()
            .map(|(rv, v)| lookup(rv).map(|i| (i, *v)))
            .collect::<Result<Vec<_>>>()?;
        Ok(GroundQuery {
            targets,
            evidence,
            dos,
        })
    }
}

fn not_in_model(model: &Model, rv: &GroundRv) -> Error {
    Error::query(format!("`{}` does not occur in the model", model.rv_name(rv)))
}

/// A query over the random variables of a [`GroundFg`], by index.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GroundQuery {
    pub targets: Vec<usize>,
    pub evidence: Vec<(usize, usize)>,
    pub dos: Vec<(usize, usize)>,
}

impl GroundQuery {
    pub fn check(&self, fg: &GroundFg) -> Result<()> {
        if self.targets.is_empty() {
            return Err(Error::query("no query targets"));
        }
        let n = fg.num_rvs();
        let all = self
            .targets
            .iter()
            .chain(self.evidence.iter().map(|e| &e.0))
            .chain(self.dos.iter().map(|d| &d.0));
        if all.clone().any(|i| *i >= n) {
            return Err(Error::query("random variable index out of bounds"));
        }
        let mut seen = BTreeSet::new();
        for i in all {
            if !seen.insert(*i) {
                return Err(Error::query(format!(
                    "`{}` appears more than once among targets, evidence and do-targets",
                    fg.names[*i]
                )));
            }
        }
        for (i, v) in self.evidence.iter().chain(&self.dos) {
            if *v >= fg.card(*i) {
                return Err(Error::query(format!("value out of range for `{}`", fg.names[*i])));
            }
        }
        Ok(())
    }
}

/// A normalised distribution over a sequence of ground random variables,
/// row-major over their ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub vars: Vec<String>,
    pub labels: Vec<Vec<String>>,
    pub probs: Vec<f64>,
}

impl Distribution {
    pub fn max_abs_diff(&self, other: &Distribution) -> f64 {
        if self.vars != other.vars || self.probs.len() != other.probs.len() {
            return f64::INFINITY;
        }
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Value labels of entry `i`.
    pub fn assignment(&self, mut i: usize) -> Vec<&str> {
        let mut out = vec![""; self.labels.len()];
        for k in (0..self.labels.len()).rev() {
            let c = self.labels[k].len();
            out[k] = &self.labels[k][i % c];
            i /= c;
        }
        out
    }
}

impl Distribution {
    /// Distribution over ground RVs of `model`, named as in the model.
    pub(crate) fn over_model(model: &Model, rvs: &[GroundRv], probs: Vec<f64>) -> Self {
        Distribution {
            vars: rvs.iter().map(|r| model.rv_name(r)).collect(),
            labels: rvs.iter().map(|r| model.prv_range(r.prv).values.clone()).collect(),
            probs,
        }
    }

    pub(crate) fn over_ground(fg: &GroundFg, rvs: &[usize], probs: Vec<f64>) -> Self {
        Distribution {
            vars: rvs.iter().map(|r| fg.names[*r].clone()).collect(),
            labels: rvs.iter().map(|r| fg.range_of(*r).values.clone()).collect(),
            probs,
        }
    }
}
