//! Seeded Monte Carlo engine.
//!
//! Trial `t` draws its profile from stream `(seed, LANE_PROFILE, t)` and each
//! mechanism flips its coins on `(seed, LANE_COINS + tag, t)`, so every
//! mechanism and the matching benchmark see the same profile, and a trial's
//! result does not depend on which worker ran it. Records are folded in trial
//! order; any thread count yields the same report bytes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{DistributionSpec, HazardClass};
use crate::error::{usage, Error, Result};
use crate::matching;
use crate::mech::MechanismId;
use crate::model::{revenue, utility, welfare, Outcome, ValueProfile};
use crate::rng::{TrialStreams, LANE_COINS, LANE_PROFILE};
use crate::stats::{Accumulator, EstimateWithCI, PairedAccumulator};

pub const SCHEMA_VERSION: u32 = 1;
const BLOCK: u64 = 4096;

/// An i.i.d. market: `n` bidders, `m` items, every value drawn from `dist`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketConfig {
    pub n: usize,
    pub m: usize,
    pub dist: DistributionSpec,
    pub seed: u64,
    pub trials: u64,
}

impl MarketConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return usage("market needs n >= 1 and m >= 1");
        }
        if self.trials == 0 {
            return usage("trials must be positive");
        }
        self.dist.validate()
    }

    pub fn sample_profile(&self, trial: u64) -> ValueProfile {
        let mut rng = TrialStreams::new(self.seed).stream(LANE_PROFILE, trial);
        let values = (0..self.n * self.m).map(|_| self.dist.sample(&mut rng)).collect();
        ValueProfile::from_flat(self.n, self.m, values).expect("sampled values are valid")
    }
}

/// Per-trial invariant violations; all zero for a correct run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckCounts {
    pub identity: u64,
    pub negative_payment: u64,
    pub individual_rationality: u64,
    pub not_a_matching: u64,
    pub benchmark_exceeded: u64,
}

impl CheckCounts {
    pub fn total(&self) -> u64 {
        self.identity
            + self.negative_payment
            + self.individual_rationality
            + self.not_a_matching
            + self.benchmark_exceeded
    }

    fn add(&mut self, other: &CheckCounts) {
        self.identity += other.identity;
        self.negative_payment += other.negative_payment;
        self.individual_rationality += other.individual_rationality;
        self.not_a_matching += other.not_a_matching;
        self.benchmark_exceeded += other.benchmark_exceeded;
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MechanismTrial {
    pub welfare: f64,
    pub revenue: f64,
    pub utility: f64,
    /// Fraction of bidders holding an item.
    pub allocated: f64,
    pub checks: CheckCounts,
}

#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub benchmark: f64,
    pub mechanisms: Vec<MechanismTrial>,
}

/// Score one outcome and audit it against the per-trial invariants.
pub fn score(
    mechanism: &MechanismId,
    profile: &ValueProfile,
    outcome: &Outcome,
    benchmark: Option<f64>,
) -> Result<MechanismTrial> {
    let w = welfare(profile, &outcome.assignment)?;
    let r = revenue(&outcome.payments);
    let u = utility(profile, outcome)?;
    let mut checks = CheckCounts::default();
    if u.to_bits() != (w - r).to_bits() {
        checks.identity += 1;
    }
    let pays = outcome.payments.as_slice();
    if pays.iter().any(|p| *p < 0.0) {
        checks.negative_payment += 1;
    }
    let ir_ok = (0..profile.n()).all(|i| {
        let won: f64 = outcome.assignment.items_of(i).map(|j| profile.value(i, j)).sum();
        pays[i] <= won + 1e-12 * (1.0 + won)
    });
    if !ir_ok {
        checks.individual_rationality += 1;
    }
    let copies = mechanism.copies_accounting(profile.m());
    if !copies && !outcome.assignment.is_matching() {
        checks.not_a_matching += 1;
    }
    if let Some(b) = benchmark {
        if !copies && w > b + 1e-9 * (1.0 + b) {
            checks.benchmark_exceeded += 1;
        }
    }
    debug_assert_eq!(checks.total(), 0, "{mechanism} violated an invariant: {checks:?}");
    let holders = (0..profile.n())
        .filter(|&i| outcome.assignment.item_of(i).is_some())
        .count();
    Ok(MechanismTrial {
        welfare: w,
        revenue: r,
        utility: u,
        allocated: holders as f64 / profile.n() as f64,
        checks,
    })
}

fn check_mechanisms(mechanisms: &[MechanismId]) -> Result<()> {
    if mechanisms.is_empty() {
        return usage("at least one mechanism is required");
    }
    for m in mechanisms {
        if let MechanismId::SingleDimOptimal { spec } = m {
            if spec.hazard_class() == HazardClass::Neither {
                return Err(Error::UnsupportedRegime(HazardClass::Neither.to_string()));
            }
        }
    }
    Ok(())
}

/// Run one trial of every mechanism on the shared profile.
pub fn run_trial(config: &MarketConfig, mechanisms: &[MechanismId], trial: u64) -> Result<TrialRecord> {
    let streams = TrialStreams::new(config.seed);
    let profile = config.sample_profile(trial);
    let benchmark = matching::max_weight(&profile);
    let mechanisms = mechanisms
        .iter()
        .map(|mech| {
            let mut rng = streams.stream(LANE_COINS + mech.tag(), trial);
            let outcome = mech.run(&profile, &mut rng)?;
            score(mech, &profile, &outcome, Some(benchmark))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialRecord { benchmark, mechanisms })
}

/// Evaluate trials `0..trials` in blocks and hand each record to `sink` in order.
pub fn for_each_trial<T, F, S>(trials: u64, threads: usize, eval: F, mut sink: S) -> Result<()>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
    S: FnMut(T),
{
    let pool = if threads > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::Usage(format!("cannot start {threads} workers: {e}")))?,
        )
    } else {
        None
    };
    let mut start = 0;
    while start < trials {
        let end = (start + BLOCK).min(trials);
        let block: Vec<T> = match &pool {
            Some(pool) => pool.install(|| (start..end).into_par_iter().map(&eval).collect::<Result<_>>())?,
            None => (start..end).map(&eval).collect::<Result<_>>()?,
        };
        block.into_iter().for_each(&mut sink);
        start = end;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismReport {
    pub mechanism: MechanismId,
    pub utility: EstimateWithCI,
    pub welfare: EstimateWithCI,
    pub revenue: EstimateWithCI,
    pub allocation_probability: EstimateWithCI,
    /// Paired `E[utility] / E[benchmark welfare]`.
    pub utility_ratio: EstimateWithCI,
    /// Paired `E[benchmark welfare] / E[utility]`.
    pub welfare_gap: EstimateWithCI,
}

/// Paired utility difference `a - b` on common profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedDifference {
    pub a: MechanismId,
    pub b: MechanismId,
    pub utility_difference: EstimateWithCI,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub schema: u32,
    pub config: MarketConfig,
    pub benchmark: EstimateWithCI,
    pub mechanisms: Vec<MechanismReport>,
    pub differences: Vec<PairedDifference>,
    pub checks: CheckCounts,
}

#[derive(Default, Clone)]
struct MechAgg {
    welfare: Accumulator,
    revenue: Accumulator,
    utility: Accumulator,
    allocated: Accumulator,
    vs_benchmark: PairedAccumulator,
    gap: PairedAccumulator,
}

/// Run `config.trials` trials of every mechanism, single-threaded.
pub fn run_trials(config: &MarketConfig, mechanisms: &[MechanismId]) -> Result<SimReport> {
    run_trials_parallel(config, mechanisms, 1)
}

/// As [`run_trials`], fanning trials over `threads` workers.
pub fn run_trials_parallel(
    config: &MarketConfig,
    mechanisms: &[MechanismId],
    threads: usize,
) -> Result<SimReport> {
    config.validate()?;
    check_mechanisms(mechanisms)?;
    let k = mechanisms.len();
    let mut bench = Accumulator::default();
    let mut aggs = vec![MechAgg::default(); k];
    let mut diffs = vec![Accumulator::default(); k * k.saturating_sub(1) / 2];
    let mut checks = CheckCounts::default();

    for_each_trial(
        config.trials,
        threads,
        |t| run_trial(config, mechanisms, t),
        |rec| {
            bench.push(rec.benchmark);
            for (agg, mt) in aggs.iter_mut().zip(&rec.mechanisms) {
                agg.welfare.push(mt.welfare);
                agg.revenue.push(mt.revenue);
                agg.utility.push(mt.utility);
                agg.allocated.push(mt.allocated);
                agg.vs_benchmark.push(mt.utility, rec.benchmark);
                agg.gap.push(rec.benchmark, mt.utility);
                checks.add(&mt.checks);
            }
            let mut d = 0;
            for a in 0..k {
                for b in a + 1..k {
                    diffs[d].push(rec.mechanisms[a].utility - rec.mechanisms[b].utility);
                    d += 1;
                }
            }
        },
    )?;

    let mechanism_reports = mechanisms
        .iter()
        .zip(&aggs)
        .map(|(mech, agg)| {
            let welfare = agg.welfare.estimate();
            let revenue = agg.revenue.estimate();
            // Mean from the welfare and revenue means so the identity is exact.
            let utility = EstimateWithCI::new(welfare.mean - revenue.mean, agg.utility.stderr(), agg.utility.count());
            MechanismReport {
                mechanism: mech.clone(),
                utility,
                welfare,
                revenue,
                allocation_probability: agg.allocated.estimate(),
                utility_ratio: agg.vs_benchmark.ratio(),
                welfare_gap: agg.gap.ratio(),
            }
        })
        .collect();

    let mut differences = Vec::with_capacity(diffs.len());
    let mut d = 0;
    for a in 0..k {
        for b in a + 1..k {
            differences.push(PairedDifference {
                a: mechanisms[a].clone(),
                b: mechanisms[b].clone(),
                utility_difference: diffs[d].estimate(),
            });
            d += 1;
        }
    }

    Ok(SimReport {
        schema: SCHEMA_VERSION,
        config: config.clone(),
        benchmark: bench.estimate(),
        mechanisms: mechanism_reports,
        differences,
        checks,
    })
}

/// Fraction of `(trial, bidder)` pairs that receive an item.
pub fn allocation_probability(config: &MarketConfig, mechanism: &MechanismId) -> Result<EstimateWithCI> {
    let report = run_trials(config, std::slice::from_ref(mechanism))?;
    Ok(report.mechanisms[0].allocation_probability)
}

impl SimReport {
    pub fn mechanism(&self, id: &MechanismId) -> Option<&MechanismReport> {
        self.mechanisms.iter().find(|r| &r.mechanism == id)
    }

    pub fn difference(&self, a: &MechanismId, b: &MechanismId) -> Option<EstimateWithCI> {
        self.differences.iter().find_map(|d| {
            if &d.a == a && &d.b == b {
                Some(d.utility_difference)
            } else if &d.a == b && &d.b == a {
                let e = d.utility_difference;
                Some(EstimateWithCI::new(-e.mean, e.stderr, e.trials))
            } else {
                None
            }
        })
    }

    pub const CSV_HEADER: &'static str = "mechanism,n,m,dist,seed,trials,utility,utility_se,welfare,welfare_se,revenue,revenue_se,allocation_probability,allocation_probability_se,benchmark,benchmark_se,utility_ratio,utility_ratio_se,welfare_gap,welfare_gap_se";

    /// One CSV row per mechanism, with header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        let c = &self.config;
        for r in &self.mechanisms {
            let cells = [
                format!("{}", r.mechanism),
                c.n.to_string(),
                c.m.to_string(),
                format!("\"{}\"", c.dist),
                c.seed.to_string(),
                c.trials.to_string(),
            ];
            let nums = [
                r.utility,
                r.welfare,
                r.revenue,
                r.allocation_probability,
                self.benchmark,
                r.utility_ratio,
                r.welfare_gap,
            ];
            out.push_str(&cells.join(","));
            for e in nums {
                out.push_str(&format!(",{},{}", e.mean, e.stderr));
            }
            out.push('\n');
        }
        out
    }
}
