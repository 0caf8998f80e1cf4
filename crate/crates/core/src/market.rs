//! Per-bidder priors and the JSON instance schema shared by the audit and LP tools.
//!
//! ```json
//! { "m": 2,
//!   "bidders": [
//!     { "types": [ { "values": [1, 3], "prob": 1.0 } ] },
//!     { "items": ["uniform:0,1", "discrete:0@0.5,1@0.5"] } ] }
//! ```
//!
//! A bidder is either a finite list of value vectors with probabilities
//! (`types`) or independent per-item distributions (`items`).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::DistributionSpec;
use crate::error::{usage, Result};

const PROB_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedType {
    pub values: Vec<f64>,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BidderPrior {
    Finite { types: Vec<WeightedType> },
    Independent { items: Vec<DistributionSpec> },
}

impl BidderPrior {
    pub fn iid(dist: &DistributionSpec, m: usize) -> Self {
        Self::Independent { items: vec![dist.clone(); m] }
    }

    fn validate(&self, m: usize) -> Result<()> {
        match self {
            Self::Finite { types } => {
                if types.is_empty() {
                    return usage("a finite bidder needs at least one type");
                }
                for t in types {
                    if t.values.len() != m {
                        return usage(format!("type has {} values, expected {m}", t.values.len()));
                    }
                    if t.values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                        return usage("type values must be finite and nonnegative");
                    }
                    if !(t.prob.is_finite() && t.prob > 0.0) {
                        return usage("type probabilities must be positive");
                    }
                }
                let total: f64 = types.iter().map(|t| t.prob).sum();
                if (total - 1.0).abs() > PROB_SUM_TOL {
                    return usage(format!("type probabilities sum to {total}, not 1"));
                }
                Ok(())
            }
            Self::Independent { items } => {
                if items.len() != m {
                    return usage(format!("bidder lists {} item distributions, expected {m}", items.len()));
                }
                items.iter().try_for_each(DistributionSpec::validate)
            }
        }
    }

    /// Draw one value vector into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) {
        match self {
            Self::Finite { types } => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let chosen = types
                    .iter()
                    .find(|t| {
                        acc += t.prob;
                        u < acc
                    })
                    .unwrap_or_else(|| types.last().expect("nonempty"));
                out.extend_from_slice(&chosen.values);
            }
            Self::Independent { items } => out.extend(items.iter().map(|d| d.sample(rng))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSpec {
    pub m: usize,
    pub bidders: Vec<BidderPrior>,
}

impl MarketSpec {
    pub fn iid(n: usize, m: usize, dist: &DistributionSpec) -> Self {
        Self {
            m,
            bidders: vec![BidderPrior::iid(dist, m); n],
        }
    }

    pub fn n(&self) -> usize {
        self.bidders.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.bidders.is_empty() {
            return usage("market needs at least one bidder and one item");
        }
        self.bidders.iter().try_for_each(|b| b.validate(self.m))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }
}
