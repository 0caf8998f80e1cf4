//! Mechanisms: the favorites family, its baselines and single-item building blocks.
//!
//! Every mechanism maps a value profile and a random stream to an [`Outcome`].
//! Favorites mechanisms split bidders by declared favorite item and resolve
//! each item independently among its declarers.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dist::{DistributionSpec, HazardClass};
use crate::error::{usage, Error, Result};
use crate::matching;
use crate::model::{Assignment, Outcome, PaymentVector, ValueProfile};

#[derive(Debug, Clone, PartialEq)]
pub enum MechanismId {
    RandomFavorites,
    PriorFreeFavorites,
    VickreyFavorites,
    IterativeRandomFavorites,
    VcgUnitDemand,
    FreeLottery,
    CopiesVickrey,
    SingleDimOptimal { spec: DistributionSpec },
}

impl MechanismId {
    pub const NAMES: [&'static str; 8] = [
        "random-favorites",
        "prior-free-favorites",
        "vickrey-favorites",
        "iterative-random-favorites",
        "vcg",
        "free-lottery",
        "copies-vickrey",
        "single-dim-optimal",
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::RandomFavorites => Self::NAMES[0],
            Self::PriorFreeFavorites => Self::NAMES[1],
            Self::VickreyFavorites => Self::NAMES[2],
            Self::IterativeRandomFavorites => Self::NAMES[3],
            Self::VcgUnitDemand => Self::NAMES[4],
            Self::FreeLottery => Self::NAMES[5],
            Self::CopiesVickrey => Self::NAMES[6],
            Self::SingleDimOptimal { .. } => Self::NAMES[7],
        }
    }

    /// Stable per-variant tag, used to give each mechanism its own coin stream.
    pub fn tag(&self) -> u64 {
        Self::NAMES.iter().position(|n| *n == self.name()).expect("known name") as u64 + 1
    }

    /// Parse a CLI name; `single-dim-optimal` takes its prior from `dist`.
    pub fn parse_with(name: &str, dist: &DistributionSpec) -> Result<Self> {
        if name.trim() == "single-dim-optimal" {
            return Ok(Self::SingleDimOptimal { spec: dist.clone() });
        }
        name.parse()
    }

    /// Whether a bidder may win several items (per-item copies accounting).
    pub fn copies_accounting(&self, m: usize) -> bool {
        match self {
            Self::CopiesVickrey => true,
            Self::SingleDimOptimal { .. } => m > 1,
            _ => false,
        }
    }

    pub fn run<R: Rng + ?Sized>(&self, profile: &ValueProfile, rng: &mut R) -> Result<Outcome> {
        match self {
            Self::RandomFavorites => Ok(random_favorites(profile, rng)),
            Self::PriorFreeFavorites => Ok(prior_free_favorites(profile, rng)),
            Self::VickreyFavorites => Ok(vickrey_favorites(profile, rng)),
            Self::IterativeRandomFavorites => Ok(iterative_random_favorites(profile, rng)),
            Self::VcgUnitDemand => Ok(matching::vcg(profile)),
            Self::FreeLottery => Ok(free_lottery(profile, rng)),
            Self::CopiesVickrey => Ok(copies_vickrey(profile, rng)),
            Self::SingleDimOptimal { spec } => single_dim_optimal(spec, profile, rng),
        }
    }
}

impl fmt::Display for MechanismId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::SingleDimOptimal { spec } => write!(f, "single-dim-optimal:{spec}"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for MechanismId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(dist) = s.strip_prefix("single-dim-optimal:") {
            return Ok(Self::SingleDimOptimal { spec: dist.parse()? });
        }
        Ok(match s {
            "random-favorites" => Self::RandomFavorites,
            "prior-free-favorites" => Self::PriorFreeFavorites,
            "vickrey-favorites" => Self::VickreyFavorites,
            "iterative-random-favorites" => Self::IterativeRandomFavorites,
            "vcg" => Self::VcgUnitDemand,
            "free-lottery" => Self::FreeLottery,
            "copies-vickrey" => Self::CopiesVickrey,
            "single-dim-optimal" => {
                return usage("single-dim-optimal needs a prior, e.g. single-dim-optimal:uniform:0,1")
            }
            other => return usage(format!("unknown mechanism {other:?}")),
        })
    }
}

impl Serialize for MechanismId {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MechanismId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// Uniform pick among the indices of `candidates` attaining the maximum of `key`.
fn argmax_random<R: Rng + ?Sized>(
    candidates: impl Iterator<Item = usize>,
    key: impl Fn(usize) -> f64,
    rng: &mut R,
) -> Option<usize> {
    let mut best = f64::NEG_INFINITY;
    let mut ties: Vec<usize> = Vec::new();
    for c in candidates {
        let k = key(c);
        if k > best {
            best = k;
            ties.clear();
            ties.push(c);
        } else if k == best {
            ties.push(c);
        }
    }
    match ties.len() {
        0 => None,
        1 => Some(ties[0]),
        len => Some(ties[rng.gen_range(0..len)]),
    }
}

/// The bidder's highest-value item; ties broken uniformly at random.
pub fn favorite_of<R: Rng + ?Sized>(profile: &ValueProfile, bidder: usize, rng: &mut R) -> usize {
    let row = profile.row(bidder);
    argmax_random(0..row.len(), |j| row[j], rng).expect("at least one item")
}

/// Declarers per item, bidders ascending.
fn favorite_groups<R: Rng + ?Sized>(profile: &ValueProfile, rng: &mut R) -> Vec<Vec<usize>> {
    let mut groups = vec![Vec::new(); profile.m()];
    for i in 0..profile.n() {
        groups[favorite_of(profile, i, rng)].push(i);
    }
    groups
}

/// Outcome of a single-item auction among a list of bids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleItemOutcome {
    /// Index into the bid list.
    pub winner: Option<usize>,
    pub price: f64,
}

/// Uniform winner among bids at or above `reserve`, charged `reserve`.
pub fn v_lottery<R: Rng + ?Sized>(bids: &[f64], reserve: f64, rng: &mut R) -> SingleItemOutcome {
    let eligible: Vec<usize> = (0..bids.len()).filter(|&i| bids[i] >= reserve).collect();
    let winner = match eligible.len() {
        0 => None,
        len => Some(eligible[rng.gen_range(0..len)]),
    };
    SingleItemOutcome { winner, price: reserve }
}

/// `floor(log2 n)` for `n >= 1`.
pub fn top_rung(bidders: usize) -> usize {
    debug_assert!(bidders >= 1);
    (usize::BITS - 1 - bidders.leading_zeros()) as usize
}

/// Lottery price on rung `j` of the prior-free ladder for `n` bidders.
///
/// Rungs `j < floor(log2 n)` price at the `(2^j + 1)`-th highest bid; the top
/// rung is a free lottery among everyone (the `v_{n+1} = 0` case).
pub fn rung_reserve(sorted_desc: &[f64], rung: usize) -> f64 {
    let top = top_rung(sorted_desc.len());
    if rung >= top {
        0.0
    } else {
        sorted_desc[1 << rung]
    }
}

/// The prior-free single-item mechanism: pick a rung uniformly, run its lottery.
pub fn single_item_prior_free<R: Rng + ?Sized>(bids: &[f64], rng: &mut R) -> Result<SingleItemOutcome> {
    if bids.is_empty() {
        return usage("prior-free mechanism needs at least one bid");
    }
    let rung = rng.gen_range(0..=top_rung(bids.len()));
    let reserve = if rung == top_rung(bids.len()) {
        0.0
    } else {
        // Only the (2^rung + 1)-th highest value matters, not the full order.
        let mut scratch = bids.to_vec();
        let k = 1usize << rung;
        scratch.select_nth_unstable_by(k, |a, b| b.total_cmp(a));
        scratch[k]
    };
    Ok(v_lottery(bids, reserve, rng))
}

/// Exact expected utility of each bidder under [`single_item_prior_free`].
pub fn prior_free_expected_utilities(bids: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; bids.len()];
    if bids.is_empty() {
        return out;
    }
    let mut sorted = bids.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let rungs = top_rung(bids.len()) + 1;
    for rung in 0..rungs {
        let reserve = rung_reserve(&sorted, rung);
        let eligible = bids.iter().filter(|b| **b >= reserve).count() as f64;
        for (o, b) in out.iter_mut().zip(bids) {
            if *b >= reserve {
                *o += (b - reserve) / eligible / rungs as f64;
            }
        }
    }
    out
}

/// Exact expected winner utility under [`single_item_prior_free`].
pub fn prior_free_expected_utility(bids: &[f64]) -> f64 {
    prior_free_expected_utilities(bids).iter().sum()
}

fn random_favorites<R: Rng + ?Sized>(profile: &ValueProfile, rng: &mut R) -> Outcome {
    let mut assignment = Assignment::empty(profile.n(), profile.m());
    for (item, declarers) in favorite_groups(profile, rng).iter().enumerate() {
        if let Some(&winner) = declarers.choose(rng) {
            assignment.assign(winner, item).expect("one favorite per bidder");
        }
    }
    Outcome {
        assignment,
        payments: PaymentVector::zeros(profile.n()),
    }
}

fn prior_free_favorites<R: Rng + ?Sized>(profile: &ValueProfile, rng: &mut R) -> Outcome {
    let mut assignment = Assignment::empty(profile.n(), profile.m());
    let mut payments = PaymentVector::zeros(profile.n());
    for (item, declarers) in favorite_groups(profile, rng).iter().enumerate() {
        if declarers.is_empty() {
            continue;
        }
        let bids: Vec<f64> = declarers.iter().map(|&i| profile.value(i, item)).collect();
        let res = single_item_prior_free(&bids, rng).expect("nonempty group");
        if let Some(w) = res.winner {
            assignment.assign(declarers[w], item).expect("one favorite per bidder");
            payments.set(declarers[w], res.price);
        }
    }
    Outcome { assignment, payments }
}

/// Second-price winner and price among `bidders` for `item`.
fn second_price<R: Rng + ?Sized>(
    profile: &ValueProfile,
    bidders: &[usize],
    item: usize,
    rng: &mut R,
) -> Option<(usize, f64)> {
    let winner = argmax_random(bidders.iter().copied(), |i| profile.value(i, item), rng)?;
    let price = bidders
        .iter()
        .filter(|&&i| i != winner)
        .map(|&i| profile.value(i, item))
        .fold(0.0, f64::max);
    Some((winner, price))
}

fn vickrey_favorites<R: Rng + ?Sized>(profile: &ValueProfile, rng: &mut R) -> Outcome {
    let mut assignment = Assignment::empty(profile.n(), profile.m());
    let mut payments = PaymentVector::zeros(profile.n());
    for (item, declarers) in favorite_groups(profile, rng).iter().enumerate() {
        if let Some((winner, price)) = second_price(profile, declarers, item, rng) {
            assignment.assign(winner, item).expect("one favorite per bidder");
            payments.set(winner, price);
        }
    }
    Outcome { assignment, payments }
}

fn iterative_random_favorites<R: Rng + ?Sized>(profile: &ValueProfile, rng: &mut R) -> Outcome {
    let mut assignment = Assignment::empty(profile.n(), profile.m());
    let mut bidders: Vec<usize> = (0..profile.n()).collect();
    let mut items: Vec<usize> = (0..profile.m()).collect();
    while !bidders.is_empty() && !items.is_empty() {
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); items.len()];
        for &i in &bidders {
            let row = profile.row(i);
            let fav = argmax_random(0..items.len(), |k| row[items[k]], rng).expect("items remain");
            groups[fav].push(i);
        }
        let mut taken_items = vec![false; items.len()];
        for (k, declarers) in groups.iter().enumerate() {
            if let Some(&winner) = declarers.choose(rng) {
                assignment.assign(winner, items[k]).expect("bidder removed once served");
                taken_items[k] = true;
            }
        }
        bidders.retain(|&i| assignment.item_of(i).is_none());
        let mut k = 0;
        items.retain(|_| {
            k += 1;
            !taken_items[k - 1]
        });
    }
    Outcome {
        assignment,
        payments: PaymentVector::zeros(profile.n()),
    }
}

fn free_lottery<R: Rng + ?Sized>(profile: &ValueProfile, rng: &mut R) -> Outcome {
    let mut bidders: Vec<usize> = (0..profile.n()).collect();
    let mut items: Vec<usize> = (0..profile.m()).collect();
    bidders.shuffle(rng);
    items.shuffle(rng);
    let mut assignment = Assignment::empty(profile.n(), profile.m());
    for (&i, &j) in bidders.iter().zip(&items) {
        assignment.assign(i, j).expect("distinct pairs");
    }
    Outcome {
        assignment,
        payments: PaymentVector::zeros(profile.n()),
    }
}

fn copies_vickrey<R: Rng + ?Sized>(profile: &ValueProfile, rng: &mut R) -> Outcome {
    let everyone: Vec<usize> = (0..profile.n()).collect();
    let mut assignment = Assignment::empty(profile.n(), profile.m());
    let mut payments = PaymentVector::zeros(profile.n());
    for item in 0..profile.m() {
        if let Some((winner, price)) = second_price(profile, &everyone, item, rng) {
            assignment.assign_copy(winner, item).expect("item sold once");
            payments.set(winner, payments.get(winner) + price);
        }
    }
    Outcome { assignment, payments }
}

fn single_dim_optimal<R: Rng + ?Sized>(
    spec: &DistributionSpec,
    profile: &ValueProfile,
    rng: &mut R,
) -> Result<Outcome> {
    match spec.hazard_class() {
        HazardClass::Mhr | HazardClass::Constant => {
            let mut assignment = Assignment::empty(profile.n(), profile.m());
            for item in 0..profile.m() {
                let winner = rng.gen_range(0..profile.n());
                assignment.assign_copy(winner, item)?;
            }
            Ok(Outcome {
                assignment,
                payments: PaymentVector::zeros(profile.n()),
            })
        }
        HazardClass::AntiMhr => Ok(copies_vickrey(profile, rng)),
        HazardClass::Neither => Err(Error::UnsupportedRegime(HazardClass::Neither.to_string())),
    }
}
