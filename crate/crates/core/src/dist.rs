//! The four value distribution families and their closed forms.
//!
//! Text form (used on the command line and in instance files):
//! `uniform:lo,hi`, `discrete:v1@p1,v2@p2,...`, `pareto:alpha,scale`, `exp:rate`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{usage, Error, Result};

const PROB_SUM_TOL: f64 = 1e-12;

/// An i.i.d. value distribution. Construct through the validating
/// constructors or [`FromStr`].
#[derive(Debug, Clone, PartialEq)]
pub enum DistributionSpec {
    Uniform { lo: f64, hi: f64 },
    Discrete { support: Vec<f64>, probs: Vec<f64> },
    Pareto { alpha: f64, scale: f64 },
    Exponential { rate: f64 },
}

/// Shape of the hazard rate `f / (1 - F)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HazardClass {
    #[serde(rename = "MHR")]
    Mhr,
    #[serde(rename = "AntiMHR")]
    AntiMhr,
    Constant,
    Neither,
}

impl fmt::Display for HazardClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HazardClass::Mhr => "MHR",
            HazardClass::AntiMhr => "AntiMHR",
            HazardClass::Constant => "Constant",
            HazardClass::Neither => "Neither",
        })
    }
}

impl DistributionSpec {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi) {
            return usage(format!("uniform needs 0 <= lo < hi, got [{lo}, {hi}]"));
        }
        Ok(Self::Uniform { lo, hi })
    }

    pub fn discrete(support: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != probs.len() {
            return usage("discrete needs matching nonempty support and probability lists");
        }
        if support.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return usage("discrete support must be finite and nonnegative");
        }
        if support.windows(2).any(|w| w[0] >= w[1]) {
            return usage("discrete support must be strictly ascending");
        }
        if probs.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return usage("discrete probabilities must be positive");
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return usage(format!("discrete probabilities sum to {total}, not 1"));
        }
        Ok(Self::Discrete { support, probs })
    }

    pub fn pareto(alpha: f64, scale: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0 && scale.is_finite() && scale > 0.0) {
            return usage(format!("pareto needs alpha > 0 and scale > 0, got ({alpha}, {scale})"));
        }
        Ok(Self::Pareto { alpha, scale })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return usage(format!("exponential needs rate > 0, got {rate}"));
        }
        Ok(Self::Exponential { rate })
    }

    /// Re-run the constructor checks, e.g. after deserialization.
    pub fn validate(&self) -> Result<()> {
        match self.clone() {
            Self::Uniform { lo, hi } => Self::uniform(lo, hi).map(drop),
            Self::Discrete { support, probs } => Self::discrete(support, probs).map(drop),
            Self::Pareto { alpha, scale } => Self::pareto(alpha, scale).map(drop),
            Self::Exponential { rate } => Self::exponential(rate).map(drop),
        }
    }

    pub fn is_continuous(&self) -> bool {
        !matches!(self, Self::Discrete { .. })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        match self {
            Self::Uniform { lo, hi } => lo + u * (hi - lo),
            Self::Discrete { support, probs } => {
                let mut acc = 0.0;
                for (v, p) in support.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                *support.last().expect("nonempty support")
            }
            Self::Pareto { alpha, scale } => scale * (1.0 - u).powf(-1.0 / alpha),
            Self::Exponential { rate } => -(-u).ln_1p() / rate,
        }
    }

    pub fn cdf(&self, v: f64) -> f64 {
        match self {
            Self::Uniform { lo, hi } => ((v - lo) / (hi - lo)).clamp(0.0, 1.0),
            Self::Discrete { support, probs } => support
                .iter()
                .zip(probs)
                .take_while(|(s, _)| **s <= v)
                .map(|(_, p)| p)
                .sum::<f64>()
                .min(1.0),
            Self::Pareto { alpha, scale } => {
                if v <= *scale {
                    0.0
                } else {
                    1.0 - (scale / v).powf(*alpha)
                }
            }
            Self::Exponential { rate } => {
                if v <= 0.0 {
                    0.0
                } else {
                    -(-rate * v).exp_m1()
                }
            }
        }
    }

    /// Density; for [`DistributionSpec::Discrete`] the point mass at `v`.
    pub fn pdf(&self, v: f64) -> f64 {
        match self {
            Self::Uniform { lo, hi } => {
                if v >= *lo && v <= *hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            Self::Discrete { support, probs } => support
                .iter()
                .position(|s| *s == v)
                .map_or(0.0, |k| probs[k]),
            Self::Pareto { alpha, scale } => {
                if v < *scale {
                    0.0
                } else {
                    alpha * scale.powf(*alpha) / v.powf(alpha + 1.0)
                }
            }
            Self::Exponential { rate } => {
                if v < 0.0 {
                    0.0
                } else {
                    rate * (-rate * v).exp()
                }
            }
        }
    }

    /// Generalized inverse `inf { v : F(v) >= q }`.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) {
            return usage(format!("quantile level {q} outside [0, 1]"));
        }
        Ok(match self {
            Self::Uniform { lo, hi } => lo + q * (hi - lo),
            Self::Discrete { support, probs } => {
                let mut acc = 0.0;
                for (v, p) in support.iter().zip(probs) {
                    acc += p;
                    if acc >= q {
                        return Ok(*v);
                    }
                }
                *support.last().expect("nonempty support")
            }
            Self::Pareto { alpha, scale } => scale * (1.0 - q).powf(-1.0 / alpha),
            Self::Exponential { rate } => -(-q).ln_1p() / rate,
        })
    }

    /// `(1 - F(v)) / f(v)`, the virtual value for the utility objective.
    pub fn virtual_value(&self, v: f64) -> Result<f64> {
        if !self.is_continuous() {
            return Err(Error::Unsupported(
                "virtual value of a discrete distribution".into(),
            ));
        }
        let density = self.pdf(v);
        if !(density > 0.0) {
            return Err(Error::Domain(format!("density is zero at v = {v}")));
        }
        Ok((1.0 - self.cdf(v)) / density)
    }

    /// Hazard-rate shape, decided per family.
    pub fn hazard_class(&self) -> HazardClass {
        match self {
            Self::Uniform { .. } => HazardClass::Mhr,
            Self::Exponential { .. } => HazardClass::Constant,
            Self::Pareto { .. } => HazardClass::AntiMhr,
            Self::Discrete { .. } => HazardClass::Neither,
        }
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Uniform { lo, hi } => write!(f, "uniform:{lo},{hi}"),
            Self::Discrete { support, probs } => {
                f.write_str("discrete:")?;
                for (k, (v, p)) in support.iter().zip(probs).enumerate() {
                    if k > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{v}@{p}")?;
                }
                Ok(())
            }
            Self::Pareto { alpha, scale } => write!(f, "pareto:{alpha},{scale}"),
            Self::Exponential { rate } => write!(f, "exp:{rate}"),
        }
    }
}

fn parse_num(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Usage(format!("not a number: {s:?}")))
}

fn parse_list(body: &str, expected: usize, family: &str) -> Result<Vec<f64>> {
    let xs = body.split(',').map(parse_num).collect::<Result<Vec<_>>>()?;
    if xs.len() != expected {
        return usage(format!("{family} takes {expected} parameter(s), got {}", xs.len()));
    }
    Ok(xs)
}

impl FromStr for DistributionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (family, body) = s
            .split_once(':')
            .ok_or_else(|| Error::Usage(format!("distribution {s:?} lacks a family prefix")))?;
        match family.trim() {
            "uniform" => {
                let p = parse_list(body, 2, "uniform")?;
                Self::uniform(p[0], p[1])
            }
            "pareto" => {
                let p = parse_list(body, 2, "pareto")?;
                Self::pareto(p[0], p[1])
            }
            "exp" => Self::exponential(parse_list(body, 1, "exp")?[0]),
            "discrete" => {
                let mut support = Vec::new();
                let mut probs = Vec::new();
                for atom in body.split(',') {
                    let (v, p) = atom
                        .split_once('@')
                        .ok_or_else(|| Error::Usage(format!("discrete atom {atom:?} is not v@p")))?;
                    support.push(parse_num(v)?);
                    probs.push(parse_num(p)?);
                }
                Self::discrete(support, probs)
            }
            other => usage(format!("unknown distribution family {other:?}")),
        }
    }
}

impl Serialize for DistributionSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DistributionSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
