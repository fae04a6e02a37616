//! Exact rounding helpers.
//!
//! Every rounded figure the engine reports (quiz percentages, point awards,
//! progress percentages, Likert means) goes through round-half-up on exact
//! integer ratios, never through binary floating point.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Round `num / den` to the nearest integer, halves rounding up.
///
/// Panics if `den` is zero.
pub fn round_half_up_div(num: u64, den: u64) -> u64 {
    assert!(den > 0, "division by zero");
    (2 * num + den) / (2 * den)
}

/// A non-negative quantity with one decimal place, stored as tenths.
///
/// Used for Likert means, standard deviations and percentages that are
/// reported to one decimal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Tenths(pub u32);

impl Tenths {
    pub const fn new(tenths: u32) -> Self {
        Self(tenths)
    }

    /// `num / den`, rounded half-up to one decimal.
    pub fn from_ratio(num: u64, den: u64) -> Self {
        Self(round_half_up_div(num * 10, den) as u32)
    }

    pub fn tenths(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0) / 10.0
    }

    /// Round-half-up mean of several one-decimal values.
    pub fn mean_of(values: &[Tenths]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let sum: u64 = values.iter().map(|v| u64::from(v.0)).sum();
        Some(Self(round_half_up_div(sum, values.len() as u64) as u32))
    }
}

impl fmt::Display for Tenths {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.0 / 10, self.0 % 10)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("not a one-decimal number: {0:?}")]
pub struct ParseTenthsError(String);

impl FromStr for Tenths {
    type Err = ParseTenthsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseTenthsError(s.to_string());
        let s = s.trim();
        let (whole, frac) = match s.split_once('.') {
            Some((w, f)) => (w, f),
            None => (s, "0"),
        };
        if frac.len() != 1 || whole.is_empty() {
            return Err(err());
        }
        let whole: u32 = whole.parse().map_err(|_| err())?;
        let frac: u32 = frac.parse().map_err(|_| err())?;
        Ok(Self(whole * 10 + frac))
    }
}

impl Serialize for Tenths {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Tenths {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(deserializer)?;
        if !(0.0..=1.0e8).contains(&v) {
            return Err(serde::de::Error::custom(format!("out of range: {v}")));
        }
        // Inputs are written with one decimal; the nearest tenth is exact.
        Ok(Self((v * 10.0).round() as u32))
    }
}

/// Integer square root (floor).
pub fn isqrt(n: u128) -> u128 {
    if n < 2 {
        return n;
    }
    let mut x = (n as f64).sqrt() as u128;
    while x * x > n {
        x -= 1;
    }
    while (x + 1) * (x + 1) <= n {
        x += 1;
    }
    x
}

/// Population standard deviation of integer samples, rounded half-up to
/// one decimal, computed exactly.
///
/// With `n` samples, sum `s` and sum of squares `q`, the variance is
/// `(n*q - s^2) / n^2`. The rounded result `k` tenths satisfies
/// `(2k-1)^2 n^2 <= 400 (n*q - s^2) < (2k+1)^2 n^2`.
pub fn population_sd_tenths(samples: &[u32]) -> Option<Tenths> {
    if samples.is_empty() {
        return None;
    }
    let n = samples.len() as u128;
    let s: u128 = samples.iter().map(|&x| u128::from(x)).sum();
    let q: u128 = samples.iter().map(|&x| u128::from(x) * u128::from(x)).sum();
    let v = n * q - s * s;
    let target = 400 * v;
    let n2 = n * n;
    // Candidate from floor(sqrt), then adjust to the exact condition.
    let mut k = isqrt(target / n2).div_ceil(2);
    while k > 0 && (2 * k - 1) * (2 * k - 1) * n2 > target {
        k -= 1;
    }
    while (2 * k + 1) * (2 * k + 1) * n2 <= target {
        k += 1;
    }
    Some(Tenths(k as u32))
}

/// Apportion `total_units` among `counts` proportionally with the
/// largest-remainder method. Ties in remainder go to the earlier index.
///
/// Returns `None` if all counts are zero.
pub fn largest_remainder(counts: &[u64], total_units: u64) -> Option<Vec<u64>> {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return None;
    }
    let mut shares: Vec<u64> = counts.iter().map(|&c| c * total_units / n).collect();
    let assigned: u64 = shares.iter().sum();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    // Remainders compared as exact numerators over the common denominator n.
    order.sort_by(|&a, &b| {
        let ra = counts[a] * total_units % n;
        let rb = counts[b] * total_units % n;
        rb.cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take((total_units - assigned) as usize) {
        shares[i] += 1;
    }
    Some(shares)
}
