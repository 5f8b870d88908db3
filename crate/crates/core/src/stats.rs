//! Scalar statistical primitives: correlation, the Fisher Z transform, the
//! Hawkins variance correction, Benjamini–Hochberg FDR and Kendall's tau-b.

use statrs::function::erf::erfc;

use crate::dataset::mean;
use crate::error::{Error, Result};

/// Correlations are pulled this far inside ±1 before the Fisher transform.
pub const CORR_CLAMP: f64 = 1.0 - 1e-12;

/// Sample Pearson correlation, clamped into `[-1, 1]`.
pub fn pearson_corr(x: &[f64], y: &[f64]) -> Result<f64> {
    check_len(x, y)?;
    if x.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            have: x.len(),
        });
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateColumn);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// `½ ln((1 + r) / (1 − r))`, defined for `|r| < 1`.
pub fn fisher_z(r: f64) -> Result<f64> {
    if !(r.abs() < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "fisher_z requires |r| < 1, got {r}"
        )));
    }
    // atanh is the same function with better accuracy near 0
    Ok(r.atanh())
}

/// Mean of `xs_i² · ys_i²` over standardized inputs.
pub fn hawkins_tau2(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_len(xs, ys)?;
    if xs.is_empty() {
        return Err(Error::Empty("hawkins_tau2"));
    }
    let sum: f64 = xs.iter().zip(ys).map(|(a, b)| a * a * b * b).sum();
    Ok(sum / xs.len() as f64)
}

/// Two-sided p-value of `√n · z` under `N(0, tau2)`.
pub fn hawkins_p(z: f64, tau2: f64, n: usize) -> Result<f64> {
    if !(tau2 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tau2 must be positive, got {tau2}"
        )));
    }
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, have: n });
    }
    let stat = (n as f64).sqrt() * z.abs() / tau2.sqrt();
    Ok(two_sided_normal_p(stat))
}

/// `2 (1 − Φ(|t|))`, computed through `erfc` to keep precision in the tail.
pub fn two_sided_normal_p(t: f64) -> f64 {
    erfc(t.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

/// A list of p-values, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PValueList(Vec<f64>);

impl PValueList {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidArgument(format!(
                "p-value {bad} outside [0, 1]"
            )));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Outcome of a Benjamini–Hochberg step-up. `cutoff` is the largest
/// significant p-value; `None` means nothing was rejected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdrDecision {
    pub cutoff: Option<f64>,
}

impl FdrDecision {
    pub fn reject(&self) -> bool {
        self.cutoff.is_some()
    }

    /// Whether an individual p-value is among the rejected hypotheses.
    pub fn rejects(&self, p: f64) -> bool {
        self.cutoff.is_some_and(|c| p <= c)
    }
}

pub fn bh_fdr(ps: &PValueList, alpha: f64) -> Result<FdrDecision> {
    if ps.0.is_empty() {
        return Err(Error::Empty("bh_fdr needs at least one p-value"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let mut sorted = ps.0.clone();
    sorted.sort_unstable_by(f64::total_cmp);
    let m = sorted.len() as f64;
    let cutoff = sorted
        .iter()
        .enumerate()
        .rev()
        .find(|(i, p)| **p <= (*i as f64 + 1.0) * alpha / m)
        .map(|(_, p)| *p);
    Ok(FdrDecision { cutoff })
}

/// Kendall's tau-b in `O(N log N)` (Knight's merge-sort algorithm).
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    check_len(x, y)?;
    let n = x.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, have: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    // `+ 0.0` folds -0.0 into 0.0 so the sort agrees with `==` on ties
    order.sort_unstable_by(|&a, &b| {
        (x[a] + 0.0)
            .total_cmp(&(x[b] + 0.0))
            .then((y[a] + 0.0).total_cmp(&(y[b] + 0.0)))
    });

    let mut tied_x = 0u64;
    let mut tied_xy = 0u64;
    let (mut run_x, mut run_xy) = (1u64, 1u64);
    for w in order.windows(2) {
        let (a, b) = (w[0], w[1]);
        if x[a] == x[b] {
            run_x += 1;
            if y[a] == y[b] {
                run_xy += 1;
            } else {
                tied_xy += pairs(run_xy);
                run_xy = 1;
            }
        } else {
            tied_x += pairs(run_x);
            tied_xy += pairs(run_xy);
            run_x = 1;
            run_xy = 1;
        }
    }
    tied_x += pairs(run_x);
    tied_xy += pairs(run_xy);

    let mut ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let mut buf = vec![0.0; n];
    let swaps = merge_count(&mut ys, &mut buf);

    let mut tied_y = 0u64;
    let mut run_y = 1u64;
    for w in ys.windows(2) {
        if w[0] == w[1] {
            run_y += 1;
        } else {
            tied_y += pairs(run_y);
            run_y = 1;
        }
    }
    tied_y += pairs(run_y);

    let total = pairs(n as u64);
    let s = total as i64 - tied_x as i64 - tied_y as i64 + tied_xy as i64 - 2 * swaps as i64;
    tau_b(s, total, tied_x, tied_y)
}

/// Shared final step so the fast and pairwise routes divide identically.
pub(crate) fn tau_b(s: i64, total: u64, tied_x: u64, tied_y: u64) -> Result<f64> {
    let dx = total - tied_x;
    let dy = total - tied_y;
    if dx == 0 || dy == 0 {
        return Err(Error::DegenerateColumn);
    }
    Ok(s as f64 / ((dx as f64) * (dy as f64)).sqrt())
}

fn pairs(k: u64) -> u64 {
    k * (k.saturating_sub(1)) / 2
}

/// Stable bottom-up merge sort returning the number of inversions
/// (pairs with `v[i] > v[j]`, `i < j`); equal elements are not counted.
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    let mut swaps = 0u64;
    let mut width = 1;
    while width < n {
        let mut lo = 0;
        while lo < n {
            let mid = (lo + width).min(n);
            let hi = (lo + 2 * width).min(n);
            let (mut i, mut j, mut k) = (lo, mid, lo);
            while i < mid && j < hi {
                if v[j] < v[i] {
                    buf[k] = v[j];
                    swaps += (mid - i) as u64;
                    j += 1;
                } else {
                    buf[k] = v[i];
                    i += 1;
                }
                k += 1;
            }
            buf[k..k + (mid - i)].copy_from_slice(&v[i..mid]);
            k += mid - i;
            buf[k..k + (hi - j)].copy_from_slice(&v[j..hi]);
            v[lo..hi].copy_from_slice(&buf[lo..hi]);
            lo = hi;
        }
        width *= 2;
    }
    swaps
}

fn check_len(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    Ok(())
}
