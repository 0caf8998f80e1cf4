use mbsim_core::rng::{TrialStreams, LANE_PROFILE};
use mbsim_core::DistributionSpec;

fn ks_distance(spec: &DistributionSpec, samples: usize) -> f64 {
    let mut rng = TrialStreams::new(5).stream(LANE_PROFILE, 0);
    let mut xs: Vec<f64> = (0..samples).map(|_| spec.sample(&mut rng)).collect();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0f64, |d, (k, &x)| {
        let f = spec.cdf(x);
        d.max((f - k as f64 / n).abs().max((k as f64 + 1.0) / n - f))
    })
}

#[test]
fn continuous_samples_pass_ks() {
    for spec in ["uniform:0,1", "uniform:2,5", "exp:1", "exp:3.5", "pareto:3,1", "pareto:1.5,2"] {
        let d: DistributionSpec = spec.parse().unwrap();
        let ks = ks_distance(&d, 1_000_000);
        assert!(ks <= 0.005, "{spec}: KS distance {ks}");
    }
}

#[test]
fn discrete_frequencies() {
    let d: DistributionSpec = "discrete:0@0.5,1@0.3,4@0.2".parse().unwrap();
    let mut rng = TrialStreams::new(9).stream(LANE_PROFILE, 1);
    let n = 1_000_000;
    let mut counts = [0usize; 3];
    for _ in 0..n {
        match d.sample(&mut rng) {
            v if v == 0.0 => counts[0] += 1,
            v if v == 1.0 => counts[1] += 1,
            v if v == 4.0 => counts[2] += 1,
            v => panic!("value {v} outside support"),
        }
    }
    for (c, p) in counts.iter().zip([0.5, 0.3, 0.2]) {
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((*c as f64 / n as f64 - p).abs() <= 4.0 * se);
    }
}

#[test]
fn quantile_inverts_cdf() {
    for spec in ["uniform:0,1", "uniform:1,3", "exp:2", "pareto:3,1", "pareto:1.2,0.5"] {
        let d: DistributionSpec = spec.parse().unwrap();
        for k in 1..1000 {
            let q = k as f64 / 1000.0;
            let back = d.cdf(d.quantile(q).unwrap());
            assert!((back - q).abs() <= 1e-9, "{spec} at {q}: {back}");
        }
    }
}
