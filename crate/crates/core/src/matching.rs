//! Maximum-weight bipartite matching and VCG payments.
//!
//! The solver is the shortest-augmenting-path Hungarian method on the
//! rectangular cost matrix with the smaller side as rows, `O(r^2 c)`. Among
//! all optimal matchings the lexicographically smallest bidder-to-item vector
//! is returned (unassigned sorts after every item); the optimal dual
//! potentials prune the search so that tie-free inputs cost a single solve.

use serde::{Deserialize, Serialize};

use crate::model::{Assignment, Outcome, PaymentVector, ValueProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingResult {
    pub assignment: Assignment,
    pub total_weight: f64,
}

/// Min-cost assignment of every row, with dual potentials.
struct Hungarian {
    row_to_col: Vec<usize>,
    u: Vec<f64>,
    v: Vec<f64>,
}

fn hungarian_min(cost: &[f64], rows: usize, cols: usize) -> Hungarian {
    debug_assert!(rows <= cols && cost.len() == rows * cols);
    // 1-indexed; index 0 is the virtual root column.
    let mut u = vec![0.0; rows + 1];
    let mut v = vec![0.0; cols + 1];
    let mut p = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    let mut minv = vec![0.0; cols + 1];
    let mut used = vec![false; cols + 1];
    for i in 1..=rows {
        p[0] = i;
        let mut j0 = 0;
        minv.iter_mut().for_each(|x| *x = f64::INFINITY);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=cols {
                if !used[j] {
                    let cur = cost[(i0 - 1) * cols + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0; rows];
    for j in 1..=cols {
        if p[j] != 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    Hungarian {
        row_to_col,
        u: u[1..].to_vec(),
        v: v[1..].to_vec(),
    }
}

/// Weight matrix with bidders as rows.
struct Weights<'a> {
    n: usize,
    m: usize,
    at: &'a dyn Fn(usize, usize) -> f64,
}

/// Optimal per-bidder items for the bidder subset `bidders` and item subset `items`.
fn solve_subset(w: &Weights<'_>, bidders: &[usize], items: &[usize]) -> (Vec<Option<usize>>, Hungarian, bool) {
    let (nb, ni) = (bidders.len(), items.len());
    let mut out = vec![None; nb];
    if nb <= ni {
        let cost: Vec<f64> = bidders
            .iter()
            .flat_map(|&i| items.iter().map(move |&j| -(w.at)(i, j)))
            .collect();
        let h = hungarian_min(&cost, nb, ni);
        for (r, &c) in h.row_to_col.iter().enumerate() {
            out[r] = Some(items[c]);
        }
        (out, h, true)
    } else {
        let cost: Vec<f64> = items
            .iter()
            .flat_map(|&j| bidders.iter().map(move |&i| -(w.at)(i, j)))
            .collect();
        let h = hungarian_min(&cost, ni, nb);
        for (r, &c) in h.row_to_col.iter().enumerate() {
            out[c] = Some(items[r]);
        }
        (out, h, false)
    }
}

fn total(w: &Weights<'_>, item_of: &[Option<usize>]) -> f64 {
    item_of
        .iter()
        .enumerate()
        .fold(0.0, |acc, (i, j)| acc + j.map_or(0.0, |j| (w.at)(i, j)))
}

fn lexmin_matching(w: &Weights<'_>) -> Vec<Option<usize>> {
    let all_bidders: Vec<usize> = (0..w.n).collect();
    let all_items: Vec<usize> = (0..w.m).collect();
    let (mut best, duals, bidders_are_rows) = solve_subset(w, &all_bidders, &all_items);
    let opt = total(w, &best);
    let tol = 1e-9 * (1.0 + opt.abs());
    let tight = |i: usize, j: usize| {
        let reduced = if bidders_are_rows {
            -(w.at)(i, j) - duals.u[i] - duals.v[j]
        } else {
            -(w.at)(i, j) - duals.u[j] - duals.v[i]
        };
        reduced.abs() <= tol
    };

    for i in 0..w.n {
        let current = best[i].unwrap_or(usize::MAX);
        let mut used = vec![false; w.m];
        for j in best[..i].iter().flatten() {
            used[*j] = true;
        }
        let prefix_weight = total(w, &best[..i]);
        for j in 0..w.m.min(current) {
            if used[j] || !tight(i, j) {
                continue;
            }
            used[j] = true;
            let rest_bidders: Vec<usize> = (i + 1..w.n).collect();
            let rest_items: Vec<usize> = (0..w.m).filter(|&k| !used[k]).collect();
            let rest = if rest_bidders.is_empty() || rest_items.is_empty() {
                vec![None; rest_bidders.len()]
            } else {
                solve_subset(w, &rest_bidders, &rest_items).0
            };
            let rest_weight = rest
                .iter()
                .zip(&rest_bidders)
                .fold(0.0, |acc, (j, &b)| acc + j.map_or(0.0, |j| (w.at)(b, j)));
            if prefix_weight + (w.at)(i, j) + rest_weight >= opt - tol {
                best[i] = Some(j);
                best[i + 1..].copy_from_slice(&rest);
                break;
            }
            used[j] = false;
        }
    }
    best
}

/// Maximum-weight matching of bidders to items.
pub fn max_weight_matching(profile: &ValueProfile) -> MatchingResult {
    let at = |i: usize, j: usize| profile.value(i, j);
    let w = Weights { n: profile.n(), m: profile.m(), at: &at };
    let item_of = lexmin_matching(&w);
    let mut assignment = Assignment::empty(profile.n(), profile.m());
    for (i, j) in item_of.iter().enumerate() {
        if let Some(j) = j {
            assignment.assign(i, *j).expect("solver returns a matching");
        }
    }
    let total_weight = total(&w, &item_of);
    MatchingResult { assignment, total_weight }
}

/// Optimal matching weight only, skipping tie canonicalization.
pub fn max_weight(profile: &ValueProfile) -> f64 {
    let at = |i: usize, j: usize| profile.value(i, j);
    let w = Weights { n: profile.n(), m: profile.m(), at: &at };
    let bidders: Vec<usize> = (0..profile.n()).collect();
    let items: Vec<usize> = (0..profile.m()).collect();
    total(&w, &solve_subset(&w, &bidders, &items).0)
}

fn max_weight_without(profile: &ValueProfile, excluded: usize) -> f64 {
    let at = |i: usize, j: usize| profile.value(i, j);
    let w = Weights { n: profile.n(), m: profile.m(), at: &at };
    let bidders: Vec<usize> = (0..profile.n()).filter(|&i| i != excluded).collect();
    if bidders.is_empty() {
        return 0.0;
    }
    let items: Vec<usize> = (0..profile.m()).collect();
    let item_of = solve_subset(&w, &bidders, &items).0;
    item_of
        .iter()
        .zip(&bidders)
        .fold(0.0, |acc, (j, &b)| acc + j.map_or(0.0, |j| profile.value(b, j)))
}

/// VCG with Clarke pivot payments over the maximum-weight matching.
pub fn vcg(profile: &ValueProfile) -> Outcome {
    let MatchingResult { assignment, total_weight } = max_weight_matching(profile);
    let mut payments = PaymentVector::zeros(profile.n());
    for (i, j) in assignment.pairs().to_vec() {
        let others_now = total_weight - profile.value(i, j);
        let others_without = max_weight_without(profile, i);
        let p = others_without - others_now;
        // Clamp rounding noise; VCG payments are never negative.
        payments.set(i, if p > 1e-12 * (1.0 + total_weight) { p } else { 0.0 });
    }
    Outcome { assignment, payments }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(rows: &[&[f64]]) -> ValueProfile {
        ValueProfile::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn small_examples() {
        let r = max_weight_matching(&profile(&[&[1.0, 3.0], &[4.0, 5.0]]));
        assert_eq!(r.total_weight, 7.0);
        assert_eq!(r.assignment.to_item_vec(), vec![Some(1), Some(0)]);

        let r = max_weight_matching(&profile(&[&[5.0]]));
        assert_eq!(r.total_weight, 5.0);
        assert_eq!(r.assignment.to_item_vec(), vec![Some(0)]);

        let r = max_weight_matching(&profile(&[&[1.0, 1.0], &[1.0, 1.0]]));
        assert_eq!(r.total_weight, 2.0);
        assert_eq!(r.assignment.to_item_vec(), vec![Some(0), Some(1)]);
    }

    #[test]
    fn ties_resolve_lexicographically() {
        let r = max_weight_matching(&profile(&[&[0.0, 0.0, 0.0], &[0.0, 0.0, 0.0]]));
        assert_eq!(r.assignment.to_item_vec(), vec![Some(0), Some(1)]);
        let r = max_weight_matching(&profile(&[&[0.0], &[0.0], &[0.0]]));
        assert_eq!(r.assignment.to_item_vec(), vec![Some(0), None, None]);
        let r = max_weight_matching(&profile(&[&[1.0, 2.0], &[1.0, 2.0], &[3.0, 0.0]]));
        assert_eq!(r.total_weight, 5.0);
        assert_eq!(r.assignment.to_item_vec(), vec![Some(1), None, Some(0)]);
    }

    #[test]
    fn vcg_examples() {
        let o = vcg(&profile(&[&[1.0, 3.0], &[4.0, 5.0]]));
        assert_eq!(o.assignment.to_item_vec(), vec![Some(1), Some(0)]);
        assert_eq!(o.payments.as_slice(), &[1.0, 0.0]);

        let o = vcg(&profile(&[&[5.0]]));
        assert_eq!(o.payments.as_slice(), &[0.0]);

        let o = vcg(&profile(&[&[5.0, 1.0], &[4.0, 2.0]]));
        assert_eq!(o.assignment.to_item_vec(), vec![Some(0), Some(1)]);
        assert_eq!(o.payments.as_slice(), &[2.0, 0.0]);
    }

    #[test]
    fn single_item_vcg_is_second_price() {
        let o = vcg(&profile(&[&[3.0], &[7.0], &[5.0]]));
        assert_eq!(o.assignment.to_item_vec(), vec![None, Some(0), None]);
        assert_eq!(o.payments.as_slice(), &[0.0, 5.0, 0.0]);
    }
}
