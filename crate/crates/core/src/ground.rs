//! Grounding a PCFG into a directed factor graph.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::model::{GroundRv, Model, ModelBuilder, Parfactor, Range};

#[derive(Debug, Clone, Copy)]
pub struct GroundOptions {
    /// Refuse to ground when the number of ground factors would exceed this.
    pub max_factors: usize,
}

impl Default for GroundOptions {
    fn default() -> Self {
        GroundOptions {
            max_factors: 1 << 22,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundFactor {
    /// Source parfactor name plus the instance constants, dot separated.
    pub name: String,
    /// Indices into [`GroundFg::rvs`].
    pub args: Vec<usize>,
    /// Position of the child within `args`.
    pub child: Option<usize>,
    /// Linear-scale potentials, row-major over `args`.
    pub table: Vec<f64>,
    pub mutilated: bool,
}

impl GroundFactor {
    pub fn child_rv(&self) -> Option<usize> {
        self.child.map(|c| self.args[c])
    }
}

/// A directed factor graph over ground random variables.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundFg {
    pub rvs: Vec<GroundRv>,
    pub names: Vec<String>,
    pub ranges: Vec<Range>,
    /// Index into `ranges` per random variable.
    pub rv_range: Vec<usize>,
    pub factors: Vec<GroundFactor>,
    index: HashMap<GroundRv, usize>,
}

impl GroundFg {
    pub fn new(
        rvs: Vec<GroundRv>,
        names: Vec<String>,
        ranges: Vec<Range>,
        rv_range: Vec<usize>,
        factors: Vec<GroundFactor>,
    ) -> Self {
        let index = rvs.iter().cloned().enumerate().map(|(i, r)| (r, i)).collect();
        GroundFg {
            rvs,
            names,
            ranges,
            rv_range,
            factors,
            index,
        }
    }

    pub fn num_rvs(&self) -> usize {
        self.rvs.len()
    }

    pub fn index_of(&self, rv: &GroundRv) -> Option<usize> {
        self.index.get(rv).copied()
    }

    pub fn card(&self, rv: usize) -> usize {
        self.ranges[self.rv_range[rv]].size()
    }

    pub fn cards(&self) -> Vec<usize> {
        (0..self.rvs.len()).map(|i| self.card(i)).collect()
    }

    pub fn range_of(&self, rv: usize) -> &Range {
        &self.ranges[self.rv_range[rv]]
    }

    /// Factors whose child is `rv`.
    pub fn parents(&self, rv: usize) -> Vec<usize> {
        self.factors
            .iter()
            .enumerate()
            .filter(|(_, f)| f.child_rv() == Some(rv))
            .map(|(i, _)| i)
            .collect()
    }

    /// Total number of joint assignments, saturating.
    pub fn state_space(&self) -> u128 {
        (0..self.rvs.len()).fold(1u128, |acc, i| acc.saturating_mul(self.card(i) as u128))
    }

    pub fn with_factors(&self, factors: Vec<GroundFactor>) -> GroundFg {
        GroundFg {
            factors,
            ..self.clone()
        }
    }

    /// The grounding as a model of parameterless PRVs named like
    /// `Train.bob.t1`.
    pub fn to_model(&self) -> Result<Model> {
        let mut b = ModelBuilder::new();
        let used: BTreeSet<usize> = self.rv_range.iter().copied().collect();
        for &r in &used {
            let range = &self.ranges[r];
            b.range(&range.name, range.values.iter().cloned())?;
        }
        let dotted: Vec<String> = self.names.iter().map(|n| dotted_name(n)).collect();
        for (i, name) in dotted.iter().enumerate() {
            b.prv(name, &[], &self.ranges[self.rv_range[i]].name)?;
        }
        for f in &self.factors {
            let args: Vec<&str> = f.args.iter().map(|a| dotted[*a].as_str()).collect();
            let child = f.child.map(|c| args[c]);
            let constraint = b.constraint_for(&args.iter().map(|a| b.prv_id(a)).collect::<Result<Vec<_>>>()?, None)?;
            b.push_parfactor(Parfactor {
                name: f.name.clone(),
                args: args.iter().map(|a| b.prv_id(a)).collect::<Result<Vec<_>>>()?,
                child: child.map(|c| b.prv_id(c)).transpose()?,
                constraint,
                table: f.table.clone(),
                mutilated: f.mutilated,
            })?;
        }
        Ok(b.build_unchecked())
    }
}

/// `Train(bob,t1)` -> `Train.bob.t1`.
fn dotted_name(name: &str) -> String {
    name.replace('(', ".").replace(',', ".").replace(')', "")
}

/// `gr(G)`: one ground factor per allowed tuple of every parfactor.
pub fn ground(model: &Model) -> Result<GroundFg> {
    ground_with(model, GroundOptions::default())
}

pub fn ground_with(model: &Model, opts: GroundOptions) -> Result<GroundFg> {
    let total: usize = model
        .parfactors()
        .iter()
        .map(|g| g.constraint.count(model))
        .fold(0usize, |a, b| a.saturating_add(b));
    if total > opts.max_factors {
        return Err(Error::Limit {
            what: "number of ground factors",
            size: total as u128,
            limit: opts.max_factors as u128,
        });
    }

    // (parfactor, tuple) -> ground args
    let mut instances = Vec::with_capacity(total);
    let mut all_rvs = BTreeSet::new();
    for (gi, g) in model.parfactors().iter().enumerate() {
        let lvs = &g.constraint.logvars;
        let positions: Vec<Vec<usize>> = g
            .args
            .iter()
            .map(|a| {
                model
                    .prv(*a)
                    .params
                    .iter()
                    .map(|lv| lvs.iter().position(|x| x == lv).expect("validated constraint"))
                    .collect()
            })
            .collect();
        for t in g.constraint.materialize(model).iter() {
            let args: Vec<GroundRv> = g
                .args
                .iter()
                .zip(&positions)
                .map(|(a, pos)| GroundRv::new(*a, pos.iter().map(|&i| t[i]).collect()))
                .collect();
            all_rvs.extend(args.iter().cloned());
            let suffix: Vec<&str> = t
                .iter()
                .zip(lvs)
                .map(|(c, lv)| model.domain(*lv).constants[*c as usize].as_str())
                .collect();
            instances.push((gi, suffix.join("."), args));
        }
    }

    let rvs: Vec<GroundRv> = all_rvs.into_iter().collect();
    let index: HashMap<&GroundRv, usize> = rvs.iter().enumerate().map(|(i, r)| (r, i)).collect();
    let factors = instances
        .iter()
        .map(|(gi, suffix, args)| {
            let g = &model.parfactors()[*gi];
            GroundFactor {
                name: if suffix.is_empty() {
                    g.name.clone()
                } else {
                    format!("{}.{}", g.name, suffix)
                },
                args: args.iter().map(|r| index[r]).collect(),
                child: g.child_index(),
                table: g.table.clone(),
                mutilated: g.mutilated,
            }
        })
        .collect();
    let names = rvs.iter().map(|r| model.rv_name(r)).collect();
    let rv_range = rvs.iter().map(|r| model.prv(r.prv).range.0).collect();
    Ok(GroundFg::new(rvs, names, model.ranges().to_vec(), rv_range, factors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn employee_grounding_inventory() {
        let m = fixtures::employee_model(4, 2);
        let fg = ground(&m).unwrap();
        assert_eq!(fg.num_rvs(), 15);
        assert_eq!(fg.factors.len(), 22);
        let per: Vec<usize> = ["g1", "g2", "g3", "g4"]
            .iter()
            .map(|n| fg.factors.iter().filter(|f| f.name.split('.').next() == Some(n)).count())
            .collect();
        assert_eq!(per, vec![2, 8, 8, 4]);
    }

    #[test]
    fn prior_parfactor_grounds_per_training_program() {
        let m = fixtures::employee_model(4, 2);
        let fg = ground(&m).unwrap();
        let g1: Vec<String> = fg
            .factors
            .iter()
            .filter(|f| f.name.starts_with("g1"))
            .map(|f| fg.names[f.args[0]].clone())
            .collect();
        assert_eq!(g1, vec!["Qual(t1)", "Qual(t2)"]);
        for f in fg.factors.iter().filter(|f| f.name.starts_with("g1")) {
            assert_eq!(f.child, Some(0));
        }
    }

    #[test]
    fn propositional_model_grounds_to_itself() {
        let m = fixtures::chain3();
        let fg = ground(&m).unwrap();
        assert_eq!(fg.num_rvs(), m.prvs().len());
        assert_eq!(fg.factors.len(), m.parfactors().len());
        for (f, g) in fg.factors.iter().zip(m.parfactors()) {
            assert_eq!(f.table, g.table);
            assert_eq!(f.name, g.name);
        }
    }

    #[test]
    fn ground_limit_is_enforced() {
        let m = fixtures::employee_model(4, 2);
        let err = ground_with(&m, GroundOptions { max_factors: 10 }).unwrap_err();
        assert!(err.is_limit());
    }

    #[test]
    fn ground_model_round_trips_through_to_model() {
        let m = fixtures::employee_model(2, 1);
        let fg = ground(&m).unwrap();
        let gm = fg.to_model().unwrap();
        assert!(gm.validate().is_empty(), "{:?}", gm.validate());
        assert!(gm.prvs().iter().all(|p| p.params.is_empty()));
        let again = ground(&gm).unwrap();
        assert_eq!(again.factors.len(), fg.factors.len());
    }
}
