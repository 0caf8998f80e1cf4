//! Utility-optimal Bayesian mechanisms on finite type spaces.
//!
//! Variables are the allocation probabilities `x[i][j]` and payments `p[i]`
//! at every joint type profile. Constraints are per-profile feasibility,
//! interim BIC for each ordered pair of types, and interim IR. The objective
//! is expected value minus expected payments.

pub mod simplex;

use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::market::{BidderPrior, MarketSpec, WeightedType};
use crate::matching::max_weight;
use crate::model::ValueProfile;
pub use simplex::{solve, Constraint, LinearProgram, LpSolution, LpStatus, Sense};

/// Most joint type profiles accepted by [`build_lp`].
pub const MAX_PROFILES: usize = 10_000;
pub const RESIDUAL_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteInstance {
    pub m: usize,
    pub bidders: Vec<Vec<WeightedType>>,
}

impl FiniteInstance {
    pub fn new(m: usize, bidders: Vec<Vec<WeightedType>>) -> Result<Self> {
        let inst = Self { m, bidders };
        inst.to_market().validate()?;
        Ok(inst)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::try_from(MarketSpec::from_json(text)?)
    }

    pub fn to_market(&self) -> MarketSpec {
        MarketSpec {
            m: self.m,
            bidders: self.bidders.iter().map(|t| BidderPrior::Finite { types: t.clone() }).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.bidders.len()
    }

    /// Number of joint type profiles, refusing anything above [`MAX_PROFILES`].
    pub fn profile_count(&self) -> Result<usize> {
        let mut count: usize = 1;
        for b in &self.bidders {
            count = count.saturating_mul(b.len());
        }
        if count > MAX_PROFILES {
            return Err(Error::TooLarge { count, limit: MAX_PROFILES });
        }
        Ok(count)
    }

    /// Type index of each bidder at profile `k`; bidder 0 varies slowest.
    pub fn profile(&self, mut k: usize) -> Vec<usize> {
        let mut out = vec![0; self.n()];
        for (i, b) in self.bidders.iter().enumerate().rev() {
            out[i] = k % b.len();
            k /= b.len();
        }
        out
    }

    fn profile_index(&self, types: &[usize]) -> usize {
        self.bidders.iter().zip(types).fold(0, |k, (b, &t)| k * b.len() + t)
    }

    pub fn profile_prob(&self, types: &[usize]) -> f64 {
        self.bidders.iter().zip(types).map(|(b, &t)| b[t].prob).product()
    }

    pub fn profile_values(&self, types: &[usize]) -> ValueProfile {
        let flat = self
            .bidders
            .iter()
            .zip(types)
            .flat_map(|(b, &t)| b[t].values.iter().copied())
            .collect();
        ValueProfile::from_flat(self.n(), self.m, flat).expect("validated instance")
    }

    /// Expected welfare of the efficient allocation, an upper bound on utility.
    pub fn efficient_welfare(&self) -> Result<f64> {
        let count = self.profile_count()?;
        Ok((0..count)
            .map(|k| {
                let t = self.profile(k);
                self.profile_prob(&t) * max_weight(&self.profile_values(&t))
            })
            .sum())
    }
}

impl TryFrom<MarketSpec> for FiniteInstance {
    type Error = Error;

    fn try_from(spec: MarketSpec) -> Result<Self> {
        spec.validate()?;
        let bidders = spec
            .bidders
            .into_iter()
            .enumerate()
            .map(|(i, b)| match b {
                BidderPrior::Finite { types } => Ok(types),
                BidderPrior::Independent { .. } => usage(format!("bidder {i} needs a finite type list")),
            })
            .collect::<Result<_>>()?;
        Ok(Self { m: spec.m, bidders })
    }
}

/// Two bidders, two items: bidder 0 values (1, 3); bidder 1 values (c, c+1) or (1, 4) equally likely.
pub fn opt_structure_instance(c: f64) -> Result<FiniteInstance> {
    if !(c.is_finite() && c >= 1.0) {
        return usage(format!("c must be at least 1, got {c}"));
    }
    let t = |values: Vec<f64>, prob: f64| WeightedType { values, prob };
    FiniteInstance::new(
        2,
        vec![
            vec![t(vec![1.0, 3.0], 1.0)],
            vec![t(vec![c, c + 1.0], 0.5), t(vec![1.0, 4.0], 0.5)],
        ],
    )
}

/// A built LP together with the variable layout.
#[derive(Debug, Clone)]
pub struct MechanismLp {
    pub lp: LinearProgram,
    pub profiles: usize,
    pub n: usize,
    pub m: usize,
    pub full_allocation: bool,
}

impl MechanismLp {
    pub fn x_index(&self, k: usize, i: usize, j: usize) -> usize {
        (k * self.n + i) * self.m + j
    }

    pub fn p_index(&self, k: usize, i: usize) -> usize {
        self.profiles * self.n * self.m + k * self.n + i
    }
}

/// Interim utility terms of bidder `i` with true type `t` reporting `r`, as `(variable, coefficient)`.
fn interim_terms(inst: &FiniteInstance, lp: &MechanismLp, i: usize, t: usize, r: usize) -> Vec<(usize, f64)> {
    let values = &inst.bidders[i][t].values;
    let mut terms = Vec::new();
    for k in 0..lp.profiles {
        let types = inst.profile(k);
        if types[i] != r {
            continue;
        }
        // Probability of the opponents' types only.
        let q = inst.profile_prob(&types) / inst.bidders[i][r].prob;
        for (j, v) in values.iter().enumerate() {
            if *v != 0.0 {
                terms.push((lp.x_index(k, i, j), q * v));
            }
        }
        terms.push((lp.p_index(k, i), -q));
    }
    terms
}

pub fn build_lp(inst: &FiniteInstance, full_allocation: bool) -> Result<MechanismLp> {
    let profiles = inst.profile_count()?;
    let (n, m) = (inst.n(), inst.m);
    let vars = profiles * n * (m + 1);
    let mut out = MechanismLp {
        lp: LinearProgram::new(vars),
        profiles,
        n,
        m,
        full_allocation,
    };

    for k in 0..profiles {
        let types = inst.profile(k);
        let prob = inst.profile_prob(&types);
        for i in 0..n {
            for j in 0..m {
                let x = out.x_index(k, i, j);
                out.lp.objective[x] = prob * inst.bidders[i][types[i]].values[j];
            }
            let p = out.p_index(k, i);
            out.lp.objective[p] = -prob;
        }
        for i in 0..n {
            let terms = (0..m).map(|j| (out.x_index(k, i, j), 1.0)).collect();
            out.lp.push(Constraint::new(terms, Sense::Le, 1.0));
        }
        let column = if full_allocation { Sense::Eq } else { Sense::Le };
        for j in 0..m {
            let terms = (0..n).map(|i| (out.x_index(k, i, j), 1.0)).collect();
            out.lp.push(Constraint::new(terms, column, 1.0));
        }
    }

    for i in 0..n {
        let ntypes = inst.bidders[i].len();
        for t in 0..ntypes {
            let truthful = interim_terms(inst, &out, i, t, t);
            out.lp.push(Constraint::new(truthful.clone(), Sense::Ge, 0.0));
            for r in (0..ntypes).filter(|&r| r != t) {
                let mut terms = truthful.clone();
                terms.extend(interim_terms(inst, &out, i, t, r).into_iter().map(|(v, a)| (v, -a)));
                out.lp.push(Constraint::new(terms, Sense::Ge, 0.0));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileMechanism {
    /// Type index per bidder.
    pub types: Vec<usize>,
    pub values: Vec<Vec<f64>>,
    pub prob: f64,
    /// `allocation[i][j]` is the probability bidder `i` receives item `j`.
    pub allocation: Vec<Vec<f64>>,
    pub payments: Vec<f64>,
    /// Per item, the probability it is left unallocated.
    pub unallocated: Vec<f64>,
    pub total_unallocated: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalMechanism {
    pub status: LpStatus,
    pub full_allocation: bool,
    pub objective: f64,
    /// Objective recomputed from the returned tables.
    pub recomputed_objective: f64,
    /// Largest feasibility, BIC or IR violation at the returned point.
    pub max_residual: f64,
    pub efficient_welfare: f64,
    pub iterations: usize,
    pub profiles: Vec<ProfileMechanism>,
}

impl OptimalMechanism {
    /// Largest single-item unallocated probability over all profiles.
    pub fn max_discard(&self) -> f64 {
        self.profiles
            .iter()
            .flat_map(|p| p.unallocated.iter().copied())
            .fold(0.0, f64::max)
    }

    pub fn profile_with_values(&self, values: &[Vec<f64>]) -> Option<&ProfileMechanism> {
        self.profiles.iter().find(|p| p.values == values)
    }

    pub fn checks_pass(&self) -> bool {
        self.status == LpStatus::Optimal
            && self.max_residual <= RESIDUAL_TOL
            && (self.objective - self.recomputed_objective).abs() <= 1e-9
            && self.objective <= self.efficient_welfare + 1e-9
    }
}

/// Solve for the utility-optimal BIC and IR mechanism.
pub fn optimal_utility(inst: &FiniteInstance, full_allocation: bool) -> Result<OptimalMechanism> {
    let built = build_lp(inst, full_allocation)?;
    let sol = solve(&built.lp)?;
    let efficient_welfare = inst.efficient_welfare()?;
    let mut profiles = Vec::with_capacity(built.profiles);
    for k in 0..built.profiles {
        let types = inst.profile(k);
        debug_assert_eq!(inst.profile_index(&types), k);
        let allocation: Vec<Vec<f64>> = (0..built.n)
            .map(|i| (0..built.m).map(|j| sol.x[built.x_index(k, i, j)]).collect())
            .collect();
        let unallocated: Vec<f64> = (0..built.m)
            .map(|j| (1.0 - allocation.iter().map(|row| row[j]).sum::<f64>()).max(0.0))
            .collect();
        profiles.push(ProfileMechanism {
            values: types.iter().enumerate().map(|(i, &t)| inst.bidders[i][t].values.clone()).collect(),
            prob: inst.profile_prob(&types),
            payments: (0..built.n).map(|i| sol.x[built.p_index(k, i)]).collect(),
            total_unallocated: unallocated.iter().sum(),
            types,
            allocation,
            unallocated,
        });
    }
    let recomputed_objective = profiles
        .iter()
        .map(|p| {
            let value: f64 = p
                .values
                .iter()
                .zip(&p.allocation)
                .map(|(v, x)| v.iter().zip(x).map(|(v, x)| v * x).sum::<f64>())
                .sum();
            p.prob * (value - p.payments.iter().sum::<f64>())
        })
        .sum();
    let max_residual = if sol.status == LpStatus::Optimal { built.lp.max_residual(&sol.x) } else { f64::NAN };
    Ok(OptimalMechanism {
        status: sol.status,
        full_allocation,
        objective: sol.objective,
        recomputed_objective,
        max_residual,
        efficient_welfare,
        iterations: sol.iterations,
        profiles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_bidder_single_item_allocates_free() {
        let inst = FiniteInstance::new(1, vec![vec![WeightedType { values: vec![1.0], prob: 1.0 }]]).unwrap();
        let r = optimal_utility(&inst, false).unwrap();
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective - 1.0).abs() < 1e-12);
        assert!(r.checks_pass());
    }

    #[test]
    fn structure_instance_has_twelve_variables() {
        let inst = opt_structure_instance(4.0).unwrap();
        let built = build_lp(&inst, false).unwrap();
        assert_eq!(built.lp.variables(), 12);
    }

    #[test]
    fn structure_instance_c4() {
        let inst = opt_structure_instance(4.0).unwrap();
        let full = optimal_utility(&inst, true).unwrap();
        let free = optimal_utility(&inst, false).unwrap();
        assert!(full.checks_pass() && free.checks_pass());
        assert!((full.objective - 5.5).abs() <= 1e-6, "{}", full.objective);
        assert!((free.objective - 5.8).abs() <= 1e-6, "{}", free.objective);
        assert!((free.efficient_welfare - 6.0).abs() < 1e-12);
        let at = free.profile_with_values(&[vec![1.0, 3.0], vec![1.0, 4.0]]).unwrap();
        assert!(at.unallocated[0] >= 0.19, "{at:?}");
    }

    #[test]
    fn structure_instance_other_c() {
        for (c, full, free) in [(2.0, 4.5, 4.0 + 2.0 / 3.0), (10.0, 8.5, 8.0 + 10.0 / 11.0)] {
            let inst = opt_structure_instance(c).unwrap();
            assert!((optimal_utility(&inst, true).unwrap().objective - full).abs() < 1e-6);
            assert!((optimal_utility(&inst, false).unwrap().objective - free).abs() < 1e-6);
        }
    }

    #[test]
    fn profile_guard_refuses_large_instances() {
        let types: Vec<WeightedType> = (0..101).map(|k| WeightedType { values: vec![k as f64], prob: 1.0 / 101.0 }).collect();
        let mut inst = FiniteInstance { m: 1, bidders: vec![types.clone(), types] };
        inst.bidders[0][0].prob = 1.0 - 100.0 / 101.0;
        match build_lp(&inst, false) {
            Err(Error::TooLarge { count, limit }) => assert_eq!((count, limit), (10_201, MAX_PROFILES)),
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn independent_bidder_rejected() {
        let text = r#"{ "m": 1, "bidders": [ { "items": ["uniform:0,1"] } ] }"#;
        assert!(FiniteInstance::from_json(text).is_err());
    }
}
