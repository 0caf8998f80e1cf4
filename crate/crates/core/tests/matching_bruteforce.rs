use mbsim_core::matching::{max_weight, max_weight_matching, vcg};
use mbsim_core::ValueProfile;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every partial matching as a per-bidder item vector, in lexicographic order
/// with "unassigned" sorting after every item.
fn all_matchings(n: usize, m: usize) -> Vec<Vec<Option<usize>>> {
    fn rec(i: usize, n: usize, m: usize, used: &mut Vec<bool>, cur: &mut Vec<Option<usize>>, out: &mut Vec<Vec<Option<usize>>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        for j in 0..m {
            if !used[j] {
                used[j] = true;
                cur.push(Some(j));
                rec(i + 1, n, m, used, cur, out);
                cur.pop();
                used[j] = false;
            }
        }
        cur.push(None);
        rec(i + 1, n, m, used, cur, out);
        cur.pop();
    }
    let mut out = Vec::new();
    rec(0, n, m, &mut vec![false; m], &mut Vec::new(), &mut out);
    out
}

fn weight(p: &ValueProfile, items: &[Option<usize>]) -> f64 {
    items.iter().enumerate().map(|(i, j)| j.map_or(0.0, |j| p.value(i, j))).sum()
}

fn brute(p: &ValueProfile) -> (f64, Vec<Option<usize>>) {
    let all = all_matchings(p.n(), p.m());
    let best = all.iter().map(|a| weight(p, a)).fold(f64::NEG_INFINITY, f64::max);
    let first = all.into_iter().find(|a| weight(p, a) == best).unwrap();
    (best, first)
}

fn brute_without(p: &ValueProfile, excluded: usize) -> f64 {
    all_matchings(p.n(), p.m())
        .iter()
        .filter(|a| a[excluded].is_none())
        .map(|a| weight(p, a))
        .fold(0.0, f64::max)
}

fn random_profile(rng: &mut ChaCha8Rng, integer: bool) -> ValueProfile {
    let n = rng.gen_range(1..=4);
    let m = rng.gen_range(1..=4);
    let rows = (0..n)
        .map(|_| {
            (0..m)
                .map(|_| if integer { rng.gen_range(0..4) as f64 } else { rng.gen::<f64>() })
                .collect()
        })
        .collect();
    ValueProfile::new(rows).unwrap()
}

#[test]
fn matches_brute_force_on_random_profiles() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..200 {
        // Small integer values produce many ties; the rest are continuous.
        let p = random_profile(&mut rng, case % 2 == 0);
        let (best, lex) = brute(&p);
        let r = max_weight_matching(&p);
        assert_eq!(r.total_weight, best, "case {case}: {p:?}");
        assert_eq!(r.assignment.to_item_vec(), lex, "case {case}: {p:?}");
        assert_eq!(max_weight(&p), best);
        assert!(r.assignment.is_matching());
    }
}

#[test]
fn vcg_payments_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..200 {
        let p = random_profile(&mut rng, case % 2 == 1);
        let (best, lex) = brute(&p);
        let o = vcg(&p);
        assert_eq!(o.assignment.to_item_vec(), lex);
        for i in 0..p.n() {
            let expected = match lex[i] {
                Some(j) => brute_without(&p, i) - (best - p.value(i, j)),
                None => 0.0,
            };
            assert!((o.payments.get(i) - expected).abs() <= 1e-9, "case {case} bidder {i}");
            assert!(o.payments.get(i) >= 0.0);
            if let Some(j) = lex[i] {
                assert!(o.payments.get(i) <= p.value(i, j) + 1e-9);
            }
        }
    }
}
