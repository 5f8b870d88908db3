//! Nonparametric regression residuals with a uniform kernel.
//!
//! The prediction for row `i` is the plain average of `x_j` over every row
//! `j` (row `i` included) whose conditioning coordinates lie within the
//! kernel radius of row `i`. The work is `O(N² · |Z|)` time and `O(N)`
//! extra space.

use rayon::prelude::*;

use crate::dataset::{mad, sample_std};
use crate::error::{Error, Result};

/// Gaussian-consistency factor for the MAD.
pub const MAD_SCALE: f64 = 1.4826;

/// Kernel radius. Always positive.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Bandwidth(f64);

impl Bandwidth {
    pub fn new(h: f64) -> Result<Self> {
        if h > 0.0 && h.is_finite() {
            Ok(Self(h))
        } else {
            Err(Error::InvalidArgument(format!(
                "bandwidth must be positive and finite, got {h}"
            )))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Uniform kernel of the given radius: weight 1 inside, 0 outside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub width: Bandwidth,
}

impl KernelSpec {
    pub fn weight(&self, distance: f64) -> f64 {
        if distance <= self.width.0 {
            1.0
        } else {
            0.0
        }
    }
}

/// `((4/3) / N)^0.2`, the sample-size factor of the normal-reference rule.
fn size_factor(n: usize) -> f64 {
    ((4.0 / 3.0) / n as f64).powf(0.2)
}

/// `1.4826 · MAD · ((4/3)/N)^0.2`.
///
/// A column with zero MAD falls back to its sample standard deviation in
/// place of the scaled MAD, and a constant column gets a tiny positive width.
pub fn bandwidth(z: &[f64]) -> Result<Bandwidth> {
    if z.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            have: z.len(),
        });
    }
    let spread = match mad(z)? {
        m if m > 0.0 => MAD_SCALE * m,
        _ => sample_std(z),
    };
    let h = spread * size_factor(z.len());
    Bandwidth::new(if h > 0.0 { h } else { f64::EPSILON })
}

/// Combines per-dimension widths: the largest, times `√m`.
pub fn combine_bandwidths(widths: &[Bandwidth], m: usize) -> Result<Bandwidth> {
    let max = widths
        .iter()
        .map(|b| b.0)
        .reduce(f64::max)
        .ok_or(Error::Empty("combine_bandwidths needs at least one width"))?;
    if m == 0 {
        return Err(Error::InvalidArgument(
            "dimension count must be positive".into(),
        ));
    }
    Bandwidth::new(max * (m as f64).sqrt())
}

/// Bandwidth for a conditioning set: one width per column, combined.
pub fn conditioning_bandwidth(z: &[&[f64]]) -> Result<Bandwidth> {
    let widths = z.iter().map(|c| bandwidth(c)).collect::<Result<Vec<_>>>()?;
    combine_bandwidths(&widths, z.len())
}

/// Kernel-weighted predictions of `x` from `z`.
///
/// Rows are processed in parallel; each row's sum runs sequentially over
/// `j`, so the result does not depend on the thread count.
pub fn predictions(x: &[f64], z: &[&[f64]], width: Bandwidth) -> Result<Vec<f64>> {
    let n = x.len();
    for col in z {
        if col.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: col.len(),
            });
        }
    }
    if z.is_empty() {
        return Ok(vec![0.0; n]);
    }
    let h2 = width.get() * width.get();
    let predict = |i: usize| {
        let mut sum = 0.0;
        let mut weight = 0.0;
        for j in 0..n {
            let mut d2 = 0.0;
            for col in z {
                let d = col[i] - col[j];
                d2 += d * d;
            }
            // uniform kernel: compare squared distance against h²
            if d2 <= h2 {
                sum += x[j];
                weight += 1.0;
            }
        }
        sum / weight
    };
    // Small problems are not worth the scheduling overhead.
    Ok(if n >= 512 {
        (0..n).into_par_iter().map(predict).collect()
    } else {
        (0..n).map(predict).collect()
    })
}

/// Residuals of `x` regressed on `z`. With an empty `z`, `x` itself.
pub fn residuals(x: &[f64], z: &[&[f64]], width: Bandwidth) -> Result<Vec<f64>> {
    if z.is_empty() {
        return Ok(x.to_vec());
    }
    let pred = predictions(x, z, width)?;
    Ok(x.iter().zip(&pred).map(|(a, p)| a - p).collect())
}
