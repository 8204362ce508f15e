//! Brute-force reference semantics: enumerate every joint assignment of a
//! ground factor graph.
//!
//! Only meant for verification on small models; everything else in the
//! crate is checked against it.

use crate::error::{Error, Result};
use crate::ground::GroundFg;
use crate::intervention::ground_do;
use crate::model::strides;
use crate::query::{Distribution, GroundQuery};

#[derive(Debug, Clone, Copy)]
pub struct OracleOptions {
    /// Largest number of joint assignments that will be enumerated.
    pub max_states: u128,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { max_states: 1 << 20 }
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// The normalised joint distribution, row-major over the RVs of the graph
/// in their index order (first RV most significant).
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    pub cards: Vec<usize>,
    pub probs: Vec<f64>,
}

impl JointTable {
    /// Probability of a full assignment.
    pub fn get(&self, assignment: &[usize]) -> f64 {
        let st = strides(&self.cards);
        self.probs[assignment.iter().zip(&st).map(|(a, s)| a * s).sum::<usize>()]
    }
}

fn check_states(states: u128, opts: OracleOptions) -> Result<()> {
    if states > opts.max_states {
        return Err(Error::Limit {
            what: "joint state space",
            size: states,
            limit: opts.max_states,
        });
    }
    Ok(())
}

/// Unnormalised potential of every assignment of `fg`, with the RVs in
/// `fixed` clamped; visits assignments in lexicographic order.
fn enumerate(fg: &GroundFg, fixed: &[(usize, usize)], mut visit: impl FnMut(&[usize], f64)) {
    let n = fg.num_rvs();
    let cards = fg.cards();
    let mut clamp = vec![None; n];
    for &(rv, v) in fixed {
        clamp[rv] = Some(v);
    }
    let free: Vec<usize> = (0..n).filter(|&i| clamp[i].is_none()).collect();
    let mut assign: Vec<usize> = (0..n).map(|i| clamp[i].unwrap_or(0)).collect();
    let factor_strides: Vec<Vec<usize>> = fg
        .factors
        .iter()
        .map(|f| strides(&f.args.iter().map(|a| cards[*a]).collect::<Vec<_>>()))
        .collect();
    loop {
        let mut p = 1.0;
        for (f, st) in fg.factors.iter().zip(&factor_strides) {
            let idx: usize = f.args.iter().zip(st).map(|(a, s)| assign[*a] * s).sum();
            p *= f.table[idx];
            if p == 0.0 {
                break;
            }
        }
        visit(&assign, p);
        let mut k = free.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            let rv = free[k];
            assign[rv] += 1;
            if assign[rv] < cards[rv] {
                break;
            }
            assign[rv] = 0;
        }
    }
}

/// `P_G`: the full joint, normalised with a compensated sum.
pub fn joint(fg: &GroundFg) -> Result<JointTable> {
    joint_with(fg, OracleOptions::default())
}

pub fn joint_with(fg: &GroundFg, opts: OracleOptions) -> Result<JointTable> {
    let states = fg.state_space();
    check_states(states, opts)?;
    let mut probs = Vec::with_capacity(states as usize);
    let mut z = KahanSum::default();
    enumerate(fg, &[], |_, p| {
        probs.push(p);
        z.add(p);
    });
    let z = z.value();
    if !(z > 0.0) {
        return Err(Error::InconsistentEvidence);
    }
    for p in &mut probs {
        *p /= z;
    }
    Ok(JointTable {
        cards: fg.cards(),
        probs,
    })
}

/// `P(targets | evidence, do(...))` by mutilation and full enumeration.
pub fn oracle_query(fg: &GroundFg, q: &GroundQuery) -> Result<Distribution> {
    oracle_query_with(fg, q, OracleOptions::default())
}

pub fn oracle_query_with(fg: &GroundFg, q: &GroundQuery, opts: OracleOptions) -> Result<Distribution> {
    q.check(fg)?;
    let states = (0..fg.num_rvs())
        .filter(|i| !q.evidence.iter().any(|(e, _)| e == i))
        .fold(1u128, |acc, i| acc.saturating_mul(fg.card(i) as u128));
    check_states(states, opts)?;
    let mutilated = ground_do(fg, &q.dos)?;
    let tcards: Vec<usize> = q.targets.iter().map(|t| fg.card(*t)).collect();
    let tst = strides(&tcards);
    let mut acc = vec![KahanSum::default(); tcards.iter().product()];
    enumerate(&mutilated, &q.evidence, |assign, p| {
        let i: usize = q.targets.iter().zip(&tst).map(|(t, s)| assign[*t] * s).sum();
        acc[i].add(p);
    });
    let mut z = KahanSum::default();
    for a in &acc {
        z.add(a.value());
    }
    let z = z.value();
    if !(z > 0.0) {
        return Err(Error::InconsistentEvidence);
    }
    let probs = acc.iter().map(|a| a.value() / z).collect();
    Ok(Distribution::over_ground(fg, &q.targets, probs))
}
