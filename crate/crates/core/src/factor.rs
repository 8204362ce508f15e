//! Dense log-space potential tables shared by the ground and lifted
//! eliminators.
//!
//! Variables are opaque `usize` keys; each table stores its variables in
//! order together with their cardinalities. Values are natural logarithms
//! of potentials (`-inf` for a zero potential).

use crate::model::strides;

#[derive(Debug, Clone, PartialEq)]
pub struct LogTable {
    pub vars: Vec<usize>,
    pub cards: Vec<usize>,
    pub values: Vec<f64>,
}

pub fn log_sum_exp(xs: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    max + xs.into_iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

impl LogTable {
    /// Table from linear-scale potentials.
    pub fn from_linear(vars: Vec<usize>, cards: Vec<usize>, linear: &[f64]) -> Self {
        debug_assert_eq!(linear.len(), cards.iter().product::<usize>());
        LogTable {
            vars,
            cards,
            values: linear.iter().map(|v| v.ln()).collect(),
        }
    }

    pub fn scalar(value: f64) -> Self {
        LogTable {
            vars: vec![],
            cards: vec![],
            values: vec![value],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn position(&self, var: usize) -> Option<usize> {
        self.vars.iter().position(|v| *v == var)
    }

    /// Pointwise product over the union of variables: this table's variables
    /// first, then the other's new ones.
    pub fn product(&self, other: &LogTable) -> LogTable {
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        for (v, c) in other.vars.iter().zip(&other.cards) {
            if !vars.contains(v) {
                vars.push(*v);
                cards.push(*c);
            }
        }
        let a = self.aligned_strides(&vars);
        let b = other.aligned_strides(&vars);
        let total: usize = cards.iter().product();
        let mut values = Vec::with_capacity(total);
        let mut idx = vec![0usize; vars.len()];
        let (mut ia, mut ib) = (0usize, 0usize);
        for _ in 0..total {
            values.push(self.values[ia] + other.values[ib]);
            for k in (0..vars.len()).rev() {
                idx[k] += 1;
                ia += a[k];
                ib += b[k];
                if idx[k] < cards[k] {
                    break;
                }
                ia -= a[k] * cards[k];
                ib -= b[k] * cards[k];
                idx[k] = 0;
            }
        }
        LogTable { vars, cards, values }
    }

    /// Strides of this table expressed over an ordering of a superset of its
    /// variables (zero for variables it does not have).
    fn aligned_strides(&self, order: &[usize]) -> Vec<usize> {
        let own = strides(&self.cards);
        order
            .iter()
            .map(|v| self.position(*v).map_or(0, |p| own[p]))
            .collect()
    }

    /// Sums out `var` (log-sum-exp). Returns a clone when absent.
    pub fn sum_out(&self, var: usize) -> LogTable {
        let Some(p) = self.position(var) else {
            return self.clone();
        };
        let st = strides(&self.cards);
        let inner = st[p];
        let card = self.cards[p];
        let block = inner * card;
        let mut values = Vec::with_capacity(self.values.len() / card);
        for base in (0..self.values.len()).step_by(block) {
            for off in 0..inner {
                let start = base + off;
                values.push(log_sum_exp((0..card).map(|v| self.values[start + v * inner])));
            }
        }
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(p);
        cards.remove(p);
        LogTable { vars, cards, values }
    }

    /// Slices the table at `var = value` and drops `var`.
    pub fn restrict(&self, var: usize, value: usize) -> LogTable {
        let Some(p) = self.position(var) else {
            return self.clone();
        };
        let st = strides(&self.cards);
        let inner = st[p];
        let block = inner * self.cards[p];
        let mut values = Vec::with_capacity(self.values.len() / self.cards[p]);
        for base in (0..self.values.len()).step_by(block) {
            let start = base + value * inner;
            values.extend_from_slice(&self.values[start..start + inner]);
        }
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(p);
        cards.remove(p);
        LogTable { vars, cards, values }
    }

    /// Keeps only entries where positions `a` and `b` (same cardinality)
    /// take equal values, dropping `b`.
    pub fn diagonal(&self, a: usize, b: usize) -> LogTable {
        let pa = self.position(a).expect("variable present");
        let pb = self.position(b).expect("variable present");
        debug_assert_eq!(self.cards[pa], self.cards[pb]);
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(pb);
        cards.remove(pb);
        let st = strides(&self.cards);
        let total: usize = cards.iter().product();
        let mut values = Vec::with_capacity(total);
        let mut idx = vec![0usize; vars.len()];
        for _ in 0..total {
            let mut off = 0;
            for (k, v) in vars.iter().enumerate() {
                let p = self.position(*v).unwrap();
                off += idx[k] * st[p];
                if p == pa {
                    off += idx[k] * st[pb];
                }
            }
            values.push(self.values[off]);
            for k in (0..vars.len()).rev() {
                idx[k] += 1;
                if idx[k] < cards[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        LogTable { vars, cards, values }
    }

    /// Raises every potential to the power `r` (multiplies logs by `r`).
    pub fn pow(&mut self, r: f64) {
        if r == 1.0 {
            return;
        }
        for v in &mut self.values {
            if v.is_finite() {
                *v *= r;
            }
        }
    }

    /// Reorders variables to `order` (a permutation of `vars`).
    pub fn permute(&self, order: &[usize]) -> LogTable {
        debug_assert_eq!(order.len(), self.vars.len());
        let cards: Vec<usize> = order
            .iter()
            .map(|v| self.cards[self.position(*v).unwrap()])
            .collect();
        let src = self.aligned_strides(order);
        let total = self.values.len();
        let mut values = Vec::with_capacity(total);
        let mut idx = vec![0usize; order.len()];
        let mut off = 0usize;
        for _ in 0..total {
            values.push(self.values[off]);
            for k in (0..order.len()).rev() {
                idx[k] += 1;
                off += src[k];
                if idx[k] < cards[k] {
                    break;
                }
                off -= src[k] * cards[k];
                idx[k] = 0;
            }
        }
        LogTable {
            vars: order.to_vec(),
            cards,
            values,
        }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Normalised linear-scale probabilities. `None` when every entry is
    /// zero.
    pub fn normalized(&self) -> Option<Vec<f64>> {
        let z = log_sum_exp(self.values.iter().copied());
        if !z.is_finite() {
            return None;
        }
        Some(self.values.iter().map(|v| (v - z).exp()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lin(t: &LogTable) -> Vec<f64> {
        t.values.iter().map(|v| v.exp()).collect()
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn product_with_shared_variable() {
        let a = LogTable::from_linear(vec![0, 1], vec![2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let b = LogTable::from_linear(vec![1, 2], vec![2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let p = a.product(&b);
        assert_eq!(p.vars, vec![0, 1, 2]);
        let expect: Vec<f64> = (0..2)
            .flat_map(|x| (0..2).flat_map(move |y| (0..3).map(move |z| (x, y, z))))
            .map(|(x, y, z)| [1.0, 2.0, 3.0, 4.0][x * 2 + y] * [1.0, 2.0, 3.0, 4.0, 5.0, 6.0][y * 3 + z])
            .collect();
        assert!(close(&lin(&p), &expect));
    }

    #[test]
    fn product_with_unit_table_is_identity() {
        let a = LogTable::from_linear(vec![3, 1], vec![3, 2], &[0.5, 1.5, 2.0, 0.1, 0.2, 0.3]);
        let one = LogTable::from_linear(vec![1], vec![2], &[1.0, 1.0]);
        assert_eq!(a.product(&one), a);
    }

    #[test]
    fn sum_out_middle_and_restrict() {
        let t = LogTable::from_linear(vec![0, 1, 2], vec![2, 3, 2], &(1..=12).map(f64::from).collect::<Vec<_>>());
        let s = t.sum_out(1);
        assert_eq!(s.vars, vec![0, 2]);
        assert!(close(&lin(&s), &[1.0 + 3.0 + 5.0, 2.0 + 4.0 + 6.0, 7.0 + 9.0 + 11.0, 8.0 + 10.0 + 12.0]));
        let r = t.restrict(1, 2);
        assert!(close(&lin(&r), &[5.0, 6.0, 11.0, 12.0]));
    }

    #[test]
    fn diagonal_keeps_equal_assignments() {
        let t = LogTable::from_linear(vec![0, 1, 2], vec![2, 3, 2], &(1..=12).map(f64::from).collect::<Vec<_>>());
        let d = t.diagonal(0, 2);
        assert_eq!(d.vars, vec![0, 1]);
        assert!(close(&lin(&d), &[1.0, 3.0, 5.0, 8.0, 10.0, 12.0]));
    }

    #[test]
    fn permute_roundtrip() {
        let t = LogTable::from_linear(vec![4, 5, 6], vec![2, 3, 2], &(1..=12).map(f64::from).collect::<Vec<_>>());
        let p = t.permute(&[6, 4, 5]);
        assert_eq!(p.values[1], t.values[1 * 2]); // (6=0,4=0,5=1) -> t[0,1,0]
        assert_eq!(p.permute(&[4, 5, 6]), t);
    }

    #[test]
    fn normalized_handles_large_logs() {
        let mut t = LogTable::from_linear(vec![0], vec![2], &[3.0, 1.0]);
        t.pow(4000.0);
        let p = t.normalized().unwrap();
        assert!((p[0] - 1.0).abs() < 1e-15);
        let z = LogTable::from_linear(vec![0], vec![2], &[0.0, 0.0]);
        assert!(z.normalized().is_none());
    }
}
