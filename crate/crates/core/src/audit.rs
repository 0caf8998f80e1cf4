//! Empirical Bayesian incentive-compatibility audit.
//!
//! For one bidder with a fixed true type, every candidate report is run
//! against the same opponent draws and the same mechanism coin stream per
//! trial. Interim utility is always credited at the true type, so gains are
//! paired differences and the truthful-vs-truthful gain is exactly zero.

use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};
use crate::market::MarketSpec;
use crate::mech::MechanismId;
use crate::model::ValueProfile;
use crate::rng::{TrialStreams, LANE_COINS, LANE_OPPONENTS};
use crate::sim::{for_each_trial, SCHEMA_VERSION};
use crate::stats::{Accumulator, EstimateWithCI};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub mechanism: MechanismId,
    pub market: MarketSpec,
    pub bidder: usize,
    pub true_type: Vec<f64>,
    /// Extra reports; the truthful report and single-coordinate zeroings are always added.
    pub reports: Vec<Vec<f64>>,
    pub trials: u64,
    pub seed: u64,
}

impl AuditConfig {
    pub fn validate(&self) -> Result<()> {
        self.market.validate()?;
        let m = self.market.m;
        if self.bidder >= self.market.n() {
            return usage(format!("audited bidder {} out of range", self.bidder));
        }
        if self.trials == 0 {
            return usage("trials must be positive");
        }
        for r in std::iter::once(&self.true_type).chain(&self.reports) {
            if r.len() != m {
                return usage(format!("report {r:?} must have {m} values"));
            }
            if r.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return usage("reports must be finite and nonnegative");
            }
        }
        Ok(())
    }

    /// Truthful report first, then coordinate zeroings, then user reports; duplicates dropped.
    pub fn candidates(&self) -> Vec<Vec<f64>> {
        let mut out = vec![self.true_type.clone()];
        let zeroed = (0..self.true_type.len()).map(|j| {
            let mut r = self.true_type.clone();
            r[j] = 0.0;
            r
        });
        for r in zeroed.chain(self.reports.iter().cloned()) {
            if !out.contains(&r) {
                out.push(r);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateResult {
    pub report: Vec<f64>,
    pub utility: EstimateWithCI,
    pub gain: EstimateWithCI,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestGain {
    pub report: Vec<f64>,
    pub gain: EstimateWithCI,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub schema: u32,
    pub config: AuditConfig,
    pub truthful: EstimateWithCI,
    pub candidates: Vec<CandidateResult>,
    pub best: BestGain,
    /// Trials where a payment exceeded the reported value of the items won.
    pub ir_violations: u64,
}

struct AuditTrial {
    utilities: Vec<f64>,
    ir_violations: u64,
}

fn audit_trial(config: &AuditConfig, candidates: &[Vec<f64>], trial: u64) -> Result<AuditTrial> {
    let streams = TrialStreams::new(config.seed);
    let (n, m) = (config.market.n(), config.market.m);
    let mut opp_rng = streams.stream(LANE_OPPONENTS, trial);
    let mut values = Vec::with_capacity(n * m);
    for (i, prior) in config.market.bidders.iter().enumerate() {
        if i == config.bidder {
            values.extend_from_slice(&config.true_type);
        } else {
            prior.sample_into(&mut opp_rng, &mut values);
        }
    }
    let mut profile = ValueProfile::from_flat(n, m, values)?;
    let coins = streams.stream(LANE_COINS + config.mechanism.tag(), trial);

    let mut utilities = Vec::with_capacity(candidates.len());
    let mut ir_violations = 0;
    for report in candidates {
        profile.set_row(config.bidder, report)?;
        let outcome = config.mechanism.run(&profile, &mut coins.clone())?;
        let pay = outcome.payments.get(config.bidder);
        let won: Vec<usize> = outcome.assignment.items_of(config.bidder).collect();
        let reported: f64 = won.iter().map(|&j| report[j]).sum();
        if pay > reported + 1e-12 * (1.0 + reported) {
            ir_violations += 1;
        }
        let credited: f64 = won.iter().map(|&j| config.true_type[j]).sum();
        utilities.push(credited - pay);
    }
    Ok(AuditTrial { utilities, ir_violations })
}

fn run_audit(config: &AuditConfig, candidates: &[Vec<f64>], threads: usize) -> Result<(Vec<Accumulator>, Vec<Accumulator>, u64)> {
    config.validate()?;
    let mut utils = vec![Accumulator::default(); candidates.len()];
    let mut gains = vec![Accumulator::default(); candidates.len()];
    let mut ir = 0;
    for_each_trial(
        config.trials,
        threads,
        |t| audit_trial(config, candidates, t),
        |rec| {
            let truthful = rec.utilities[0];
            for (k, u) in rec.utilities.iter().enumerate() {
                utils[k].push(*u);
                gains[k].push(u - truthful);
            }
            ir += rec.ir_violations;
        },
    )?;
    Ok((utils, gains, ir))
}

/// Interim utility of `report` for the audited bidder, credited at the true type.
pub fn interim_utility(config: &AuditConfig, report: &[f64]) -> Result<EstimateWithCI> {
    let candidates = vec![report.to_vec()];
    let (utils, _, _) = run_audit(config, &candidates, 1)?;
    Ok(utils[0].estimate())
}

pub fn best_response_gain(config: &AuditConfig) -> Result<AuditReport> {
    best_response_gain_parallel(config, 1)
}

/// Paired deviation gains of every candidate report over truthful reporting.
pub fn best_response_gain_parallel(config: &AuditConfig, threads: usize) -> Result<AuditReport> {
    let candidates = config.candidates();
    let (utils, gains, ir_violations) = run_audit(config, &candidates, threads)?;
    let results: Vec<CandidateResult> = candidates
        .iter()
        .zip(utils.iter().zip(&gains))
        .map(|(report, (u, g))| {
            let gain = g.estimate();
            CandidateResult {
                report: report.clone(),
                utility: u.estimate(),
                gain,
                z: gain.z_score(),
            }
        })
        .collect();
    let best_idx = if results.len() == 1 {
        0
    } else {
        (1..results.len())
            .max_by(|&a, &b| results[a].gain.mean.total_cmp(&results[b].gain.mean).then(b.cmp(&a)))
            .expect("candidates beyond truthful")
    };
    let best = BestGain {
        report: results[best_idx].report.clone(),
        gain: results[best_idx].gain,
        z: results[best_idx].z,
    };
    Ok(AuditReport {
        schema: SCHEMA_VERSION,
        config: config.clone(),
        truthful: results[0].utility,
        candidates: results,
        best,
        ir_violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::DistributionSpec;

    fn iid_config(mechanism: MechanismId, n: usize, m: usize, true_type: Vec<f64>, trials: u64) -> AuditConfig {
        AuditConfig {
            mechanism,
            market: MarketSpec::iid(n, m, &DistributionSpec::uniform(0.0, 1.0).unwrap()),
            bidder: 0,
            true_type,
            reports: vec![],
            trials,
            seed: 11,
        }
    }

    #[test]
    fn random_favorites_truthful_interim_utility() {
        let c = iid_config(MechanismId::RandomFavorites, 2, 2, vec![0.9, 0.2], 100_000);
        let e = interim_utility(&c, &[0.9, 0.2]).unwrap();
        assert!((e.mean - 0.675).abs() <= 3.0 * e.stderr, "{e:?}");
    }

    #[test]
    fn single_bidder_free_allocation() {
        let c = iid_config(MechanismId::RandomFavorites, 1, 3, vec![0.2, 0.7, 0.4], 100);
        let e = interim_utility(&c, &[0.2, 0.7, 0.4]).unwrap();
        assert_eq!(e.mean, 0.7);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn report_independent_mechanism_has_zero_gains() {
        let mut c = iid_config(MechanismId::FreeLottery, 1, 2, vec![0.3, 0.8], 1000);
        c.reports = vec![vec![1.0, 0.0], vec![0.5, 0.5]];
        let r = best_response_gain(&c).unwrap();
        for cand in &r.candidates {
            assert_eq!(cand.gain.mean, 0.0);
            assert_eq!(cand.gain.stderr, 0.0);
        }
    }

    #[test]
    fn truthful_gain_is_exactly_zero_and_first() {
        let c = iid_config(MechanismId::PriorFreeFavorites, 3, 2, vec![0.6, 0.3], 2000);
        let r = best_response_gain(&c).unwrap();
        assert_eq!(r.candidates[0].report, vec![0.6, 0.3]);
        assert_eq!(r.candidates[0].gain.mean, 0.0);
        assert_eq!(r.candidates[0].gain.stderr, 0.0);
        assert_eq!(r.candidates.len(), 3);
        assert_eq!(r.ir_violations, 0);
    }

    #[test]
    fn rejects_bad_reports() {
        let mut c = iid_config(MechanismId::RandomFavorites, 2, 2, vec![0.5, 0.5], 10);
        c.reports = vec![vec![1.0]];
        assert!(best_response_gain(&c).is_err());
        c.reports.clear();
        c.bidder = 5;
        assert!(best_response_gain(&c).is_err());
    }
}
