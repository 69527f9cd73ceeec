//! Normal-approximation summaries at the 95% level.

use serde::{Deserialize, Serialize};

/// Two-sided 95% normal critical value.
pub const Z95: f64 = 1.96;

/// Sample mean with its 95% half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    pub half_width: f64,
    pub sd: f64,
    pub count: usize,
}

impl MeanCi {
    /// Requires at least two samples.
    pub fn from_samples(xs: &[f64]) -> Self {
        let count = xs.len();
        assert!(count >= 2, "confidence intervals need at least two samples");
        let n = count as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        let sd = var.sqrt();
        Self { mean, half_width: Z95 * sd / n.sqrt(), sd, count }
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower() <= x && x <= self.upper()
    }

    pub fn overlaps(&self, other: &MeanCi) -> bool {
        self.lower() <= other.upper() && other.lower() <= self.upper()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { mean: self.mean * c, half_width: self.half_width * c.abs(), sd: self.sd * c.abs(), count: self.count }
    }
}

/// Ratio of two means with a first-order (delta-method) 95% interval,
/// treating numerator and denominator samples as independent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioCi {
    pub ratio: f64,
    pub lower: f64,
    pub upper: f64,
}

pub fn ratio_ci(num: &MeanCi, den: &MeanCi) -> RatioCi {
    let r = num.mean / den.mean;
    let rel_num = num.sd * num.sd / (num.count as f64 * num.mean * num.mean);
    let rel_den = den.sd * den.sd / (den.count as f64 * den.mean * den.mean);
    // a zero numerator mean with zero spread contributes nothing
    let rel_num = if rel_num.is_nan() { 0.0 } else { rel_num };
    let half = Z95 * (r * r * (rel_num + rel_den)).sqrt();
    RatioCi { ratio: r, lower: r - half, upper: r + half }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Profitable,
    NotProfitable,
    Indeterminate,
}

/// Verdict for a deviation ratio at tolerance `tau`. Indeterminate whenever
/// the baseline utility interval contains zero.
pub fn verdict(ci: &RatioCi, baseline: &MeanCi, tau: f64) -> Verdict {
    if baseline.contains(0.0) || !ci.ratio.is_finite() {
        Verdict::Indeterminate
    } else if ci.lower > 1.0 + tau {
        Verdict::Profitable
    } else if ci.upper < 1.0 + tau {
        Verdict::NotProfitable
    } else {
        Verdict::Indeterminate
    }
}
