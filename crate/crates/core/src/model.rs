//! Value profiles, realized outcomes and the three objective metrics.
//!
//! Every metric sums in bidder-ascending order (item-ascending within a
//! bidder), so `utility == welfare - revenue` holds bit-for-bit.

use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};

/// One draw of all bidders' values: an `n x m` matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueProfile {
    n: usize,
    m: usize,
    values: Vec<f64>,
}

impl ValueProfile {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return usage("value profile rows must all have the same length");
        }
        Self::from_flat(n, m, rows.into_iter().flatten().collect())
    }

    pub fn from_flat(n: usize, m: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || m == 0 {
            return usage("value profile needs at least one bidder and one item");
        }
        if values.len() != n * m {
            return usage(format!("expected {} values, got {}", n * m, values.len()));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return usage(format!("values must be finite and nonnegative, got {v}"));
        }
        Ok(Self { n, m, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn value(&self, bidder: usize, item: usize) -> f64 {
        self.values[bidder * self.m + item]
    }

    #[inline]
    pub fn row(&self, bidder: usize) -> &[f64] {
        &self.values[bidder * self.m..(bidder + 1) * self.m]
    }

    /// Replace one bidder's row, e.g. with a misreport.
    pub fn set_row(&mut self, bidder: usize, row: &[f64]) -> Result<()> {
        if bidder >= self.n || row.len() != self.m {
            return usage("row replacement out of range");
        }
        if row.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return usage("values must be finite and nonnegative");
        }
        self.values[bidder * self.m..(bidder + 1) * self.m].copy_from_slice(row);
        Ok(())
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.m)
    }

    /// Transposed copy (`m x n`).
    pub fn transpose(&self) -> Vec<Vec<f64>> {
        (0..self.m)
            .map(|j| (0..self.n).map(|i| self.value(i, j)).collect())
            .collect()
    }
}

/// Bidder-to-item pairs. Items are never shared; a bidder holds at most one
/// item unless the assignment was built with [`Assignment::assign_copy`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    n: usize,
    m: usize,
    /// Sorted by (bidder, item).
    pairs: Vec<(usize, usize)>,
    item_owner: Vec<Option<usize>>,
}

impl Assignment {
    pub fn empty(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            pairs: Vec::new(),
            item_owner: vec![None; m],
        }
    }

    /// Build from `(bidder, item)` pairs, enforcing unit demand.
    pub fn from_pairs(n: usize, m: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut a = Self::empty(n, m);
        for &(i, j) in pairs {
            a.assign(i, j)?;
        }
        Ok(a)
    }

    /// Unit-demand assignment of `item` to `bidder`.
    pub fn assign(&mut self, bidder: usize, item: usize) -> Result<()> {
        if bidder < self.n && self.item_of(bidder).is_some() {
            return usage(format!("bidder {bidder} already holds an item"));
        }
        self.assign_copy(bidder, item)
    }

    /// Assignment that lets a bidder collect several items (copies accounting).
    pub fn assign_copy(&mut self, bidder: usize, item: usize) -> Result<()> {
        if bidder >= self.n || item >= self.m {
            return usage(format!(
                "pair ({bidder}, {item}) out of range for {}x{}",
                self.n, self.m
            ));
        }
        if let Some(owner) = self.item_owner[item] {
            return usage(format!("item {item} already assigned to bidder {owner}"));
        }
        self.item_owner[item] = Some(bidder);
        let pos = self.pairs.partition_point(|&p| p < (bidder, item));
        self.pairs.insert(pos, (bidder, item));
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn owner_of(&self, item: usize) -> Option<usize> {
        self.item_owner[item]
    }

    /// First item held by `bidder`.
    pub fn item_of(&self, bidder: usize) -> Option<usize> {
        let pos = self.pairs.partition_point(|&(i, _)| i < bidder);
        self.pairs.get(pos).filter(|p| p.0 == bidder).map(|p| p.1)
    }

    pub fn items_of(&self, bidder: usize) -> impl Iterator<Item = usize> + '_ {
        let pos = self.pairs.partition_point(|&(i, _)| i < bidder);
        self.pairs[pos..]
            .iter()
            .take_while(move |p| p.0 == bidder)
            .map(|p| p.1)
    }

    /// Per-bidder item, `None` for unassigned bidders.
    pub fn to_item_vec(&self) -> Vec<Option<usize>> {
        (0..self.n).map(|i| self.item_of(i)).collect()
    }

    /// True when no bidder holds two items and no item has two holders.
    pub fn is_matching(&self) -> bool {
        let items_unique = {
            let mut seen = vec![false; self.m];
            self.pairs.iter().all(|&(_, j)| !std::mem::replace(&mut seen[j], true))
        };
        items_unique && self.pairs.windows(2).all(|w| w[0].0 != w[1].0)
    }
}

/// Nonnegative per-bidder payments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaymentVector(Vec<f64>);

impl PaymentVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn new(payments: Vec<f64>) -> Result<Self> {
        if let Some(p) = payments.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return usage(format!("payments must be finite and nonnegative, got {p}"));
        }
        Ok(Self(payments))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, bidder: usize) -> f64 {
        self.0[bidder]
    }

    pub(crate) fn set(&mut self, bidder: usize, payment: f64) {
        debug_assert!(payment >= 0.0, "negative payment {payment}");
        self.0[bidder] = payment;
    }
}

/// A realized mechanism outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub assignment: Assignment,
    pub payments: PaymentVector,
}

impl Outcome {
    pub fn new(assignment: Assignment, payments: PaymentVector) -> Result<Self> {
        if payments.as_slice().len() != assignment.n() {
            return usage("payment vector length differs from bidder count");
        }
        for (i, &p) in payments.as_slice().iter().enumerate() {
            if p > 0.0 && assignment.item_of(i).is_none() {
                return usage(format!("unassigned bidder {i} is charged {p}"));
            }
        }
        Ok(Self { assignment, payments })
    }

    pub fn empty(n: usize, m: usize) -> Self {
        Self {
            assignment: Assignment::empty(n, m),
            payments: PaymentVector::zeros(n),
        }
    }
}

fn check_dims(profile: &ValueProfile, assignment: &Assignment) -> Result<()> {
    if profile.n() != assignment.n() || profile.m() != assignment.m() {
        return Err(Error::Usage(format!(
            "assignment is {}x{} but profile is {}x{}",
            assignment.n(),
            assignment.m(),
            profile.n(),
            profile.m()
        )));
    }
    Ok(())
}

/// Sum of values over assigned pairs.
pub fn welfare(profile: &ValueProfile, assignment: &Assignment) -> Result<f64> {
    check_dims(profile, assignment)?;
    Ok(assignment
        .pairs()
        .iter()
        .fold(0.0, |acc, &(i, j)| acc + profile.value(i, j)))
}

pub fn revenue(payments: &PaymentVector) -> f64 {
    payments.as_slice().iter().fold(0.0, |acc, p| acc + p)
}

/// Welfare minus revenue.
pub fn utility(profile: &ValueProfile, outcome: &Outcome) -> Result<f64> {
    Ok(welfare(profile, &outcome.assignment)? - revenue(&outcome.payments))
}

/// Doubly substochastic `n x m` matrix of allocation probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionalAllocation {
    n: usize,
    m: usize,
    probs: Vec<f64>,
}

impl FractionalAllocation {
    /// Accepts entries within `tol` of the feasible region and clamps them in.
    pub fn new(rows: Vec<Vec<f64>>, tol: f64) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if n == 0 || m == 0 || rows.iter().any(|r| r.len() != m) {
            return usage("fractional allocation must be a nonempty rectangular matrix");
        }
        let mut probs: Vec<f64> = rows.into_iter().flatten().collect();
        for p in probs.iter_mut() {
            if *p < -tol || *p > 1.0 + tol {
                return usage(format!("allocation probability {p} outside [0, 1]"));
            }
            *p = p.clamp(0.0, 1.0);
        }
        let alloc = Self { n, m, probs };
        for i in 0..n {
            let s = alloc.row_sum(i);
            if s > 1.0 + tol {
                return usage(format!("bidder {i} allocated total mass {s}"));
            }
        }
        for j in 0..m {
            let s = alloc.column_sum(j);
            if s > 1.0 + tol {
                return usage(format!("item {j} allocated total mass {s}"));
            }
        }
        Ok(alloc)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn prob(&self, bidder: usize, item: usize) -> f64 {
        self.probs[bidder * self.m + item]
    }

    pub fn row_sum(&self, bidder: usize) -> f64 {
        self.probs[bidder * self.m..(bidder + 1) * self.m].iter().sum()
    }

    pub fn column_sum(&self, item: usize) -> f64 {
        (0..self.n).map(|i| self.prob(i, item)).sum()
    }

    /// Probability mass of `item` left unallocated.
    pub fn unallocated(&self, item: usize) -> f64 {
        (1.0 - self.column_sum(item)).max(0.0)
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.probs.chunks_exact(self.m).map(<[f64]>::to_vec).collect()
    }
}
