//! Streaming mean/variance accumulators and normal-approximation intervals.

use serde::{Deserialize, Serialize};

const Z95: f64 = 1.96;

/// Monte Carlo estimate of a scalar with its 95% normal interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithCI {
    pub mean: f64,
    pub stderr: f64,
    pub trials: u64,
    pub ci95: (f64, f64),
}

impl EstimateWithCI {
    pub fn new(mean: f64, stderr: f64, trials: u64) -> Self {
        let stderr = stderr.max(0.0);
        Self {
            mean,
            stderr,
            trials,
            ci95: (mean - Z95 * stderr, mean + Z95 * stderr),
        }
    }

    /// `mean / stderr`; zero for an exact zero, infinite for an exact nonzero.
    pub fn z_score(&self) -> f64 {
        if self.stderr > 0.0 {
            self.mean / self.stderr
        } else if self.mean == 0.0 {
            0.0
        } else {
            self.mean.signum() * f64::INFINITY
        }
    }

    /// Lower edge of a `k`-sigma band.
    pub fn lower(&self, k: f64) -> f64 {
        self.mean - k * self.stderr
    }

    pub fn upper(&self, k: f64) -> f64 {
        self.mean + k * self.stderr
    }
}

/// Welford accumulator for one series.
#[derive(Debug, Clone, Copy, Default)]
pub struct Accumulator {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }

    pub fn estimate(&self) -> EstimateWithCI {
        EstimateWithCI::new(self.mean, self.stderr(), self.count)
    }
}

/// Paired accumulator for `(x, y)` samples drawn on the same trial.
#[derive(Debug, Clone, Copy, Default)]
pub struct PairedAccumulator {
    x: Accumulator,
    y: Accumulator,
    c2: f64,
}

impl PairedAccumulator {
    pub fn push(&mut self, x: f64, y: f64) {
        let dx = x - self.x.mean();
        self.x.push(x);
        self.y.push(y);
        self.c2 += dx * (y - self.y.mean());
    }

    pub fn x(&self) -> &Accumulator {
        &self.x
    }

    pub fn y(&self) -> &Accumulator {
        &self.y
    }

    pub fn covariance(&self) -> f64 {
        let n = self.x.count();
        if n < 2 {
            0.0
        } else {
            self.c2 / (n - 1) as f64
        }
    }

    /// `E[x] / E[y]` with a delta-method standard error.
    pub fn ratio(&self) -> EstimateWithCI {
        let n = self.x.count();
        let (mx, my) = (self.x.mean(), self.y.mean());
        if n == 0 || my == 0.0 {
            return EstimateWithCI::new(f64::NAN, f64::NAN, n);
        }
        let r = mx / my;
        let var = (self.x.variance() - 2.0 * r * self.covariance() + r * r * self.y.variance())
            / (my * my * n as f64);
        EstimateWithCI::new(r, var.max(0.0).sqrt(), n)
    }
}
