//! Sorted constant sets and the decomposition of explicit tuple sets into
//! Cartesian products ("boxes").

use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

use crate::model::TupleSet;

/// A sorted, duplicate-free set of constants of one logvar.
pub(crate) type Set = Rc<Vec<u32>>;

pub(crate) fn contains(s: &[u32], c: u32) -> bool {
    s.binary_search(&c).is_ok()
}

pub(crate) fn intersect(a: &[u32], b: &[u32]) -> Vec<u32> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

pub(crate) fn difference(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut j = 0;
    let mut out = Vec::new();
    for &x in a {
        while j < b.len() && b[j] < x {
            j += 1;
        }
        if j >= b.len() || b[j] != x {
            out.push(x);
        }
    }
    out
}

pub(crate) fn intersects(a: &[u32], b: &[u32]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return true,
        }
    }
    false
}

pub(crate) fn is_subset(a: &[u32], b: &[u32]) -> bool {
    a.len() <= b.len() && a.iter().all(|x| contains(b, *x))
}

/// Disjoint boxes whose union is `ts`. Each box lists one sorted value set
/// per column.
pub(crate) fn decompose(ts: &TupleSet) -> Vec<Vec<Vec<u32>>> {
    let rows: Vec<&[u32]> = ts.iter().collect();
    decompose_rows(ts.arity(), &rows)
}

fn decompose_rows(arity: usize, rows: &[&[u32]]) -> Vec<Vec<Vec<u32>>> {
    if rows.is_empty() {
        return Vec::new();
    }
    if arity == 0 {
        return vec![Vec::new()];
    }
    let mut columns: Vec<Vec<u32>> = (0..arity)
        .map(|k| rows.iter().map(|r| r[k]).collect())
        .collect();
    for c in &mut columns {
        c.sort_unstable();
        c.dedup();
    }
    let product = columns
        .iter()
        .try_fold(1usize, |acc, c| acc.checked_mul(c.len()));
    if product == Some(rows.len()) {
        return vec![columns];
    }
    // first-column values per suffix, then suffixes per first-column set
    let mut firsts: HashMap<&[u32], Vec<u32>> = HashMap::new();
    for r in rows {
        firsts.entry(&r[1..]).or_default().push(r[0]);
    }
    let mut by_first: BTreeMap<Vec<u32>, Vec<&[u32]>> = BTreeMap::new();
    for (suffix, mut f) in firsts {
        f.sort_unstable();
        f.dedup();
        by_first.entry(f).or_default().push(suffix);
    }
    let mut out = Vec::new();
    for (first, mut suffixes) in by_first {
        suffixes.sort_unstable();
        for b in decompose_rows(arity - 1, &suffixes) {
            let mut full = Vec::with_capacity(arity);
            full.push(first.clone());
            full.extend(b);
            out.push(full);
        }
    }
    out
}
