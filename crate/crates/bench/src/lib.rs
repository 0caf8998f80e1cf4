//! Fixtures shared by the benchmarks.

use mbsim_core::{DistributionSpec, FiniteInstance, MarketConfig, ValueProfile};

pub fn uniform_market(n: usize, m: usize, trials: u64) -> MarketConfig {
    MarketConfig {
        n,
        m,
        dist: DistributionSpec::uniform(0.0, 1.0).expect("valid range"),
        seed: 7,
        trials,
    }
}

/// `count` i.i.d. uniform profiles, reproducible across runs.
pub fn profiles(n: usize, m: usize, count: u64) -> Vec<ValueProfile> {
    let market = uniform_market(n, m, count);
    (0..count).map(|t| market.sample_profile(t)).collect()
}

/// A finite instance where every bidder has `types` equally likely types.
pub fn finite_instance(n: usize, m: usize, types: usize) -> FiniteInstance {
    let market = uniform_market(n, m, 1);
    let bidders = (0..n)
        .map(|i| {
            (0..types)
                .map(|k| mbsim_core::WeightedType {
                    values: market.sample_profile((i * types + k) as u64).row(0).to_vec(),
                    prob: 1.0 / types as f64,
                })
                .collect()
        })
        .collect();
    FiniteInstance::new(m, bidders).expect("valid instance")
}
