//! Conditional independence tests behind one interface.
//!
//! * [`CciTest`]: kernel-regression residuals, then correlation screening over
//!   every ordered pair of basis transforms, each pair referred to the
//!   Hawkins-corrected Fisher Z distribution and the whole family aggregated
//!   with Benjamini–Hochberg.
//! * [`FisherZTest`]: Gaussian partial correlation.
//! * [`RankPartialTest`]: partial correlation on the Kendall-tau based
//!   nonparanormal correlation matrix.
//!
//! Every test orders `x`, `y` and the conditioning set canonically before
//! computing anything, so swapping `x` and `y` or permuting `z` returns a
//! bit-identical decision.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::dataset::{sample_std, standardize, Dataset};
use crate::error::{Error, Result};
use crate::kernel::{conditioning_bandwidth, residuals};
use crate::stats::{
    bh_fdr, fisher_z, hawkins_p, kendall_tau, pearson_corr, two_sided_normal_p, PValueList,
    CORR_CLAMP,
};

/// Smallest sample size CCI accepts.
pub const CCI_MIN_SAMPLES: usize = 20;

/// Default significance level of CCI.
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PValue {
    Scalar(f64),
    /// The verdict comes from an FDR step over many p-values.
    Composite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndependenceDecision {
    pub independent: bool,
    pub p_value: PValue,
    /// Per basis-pair p-values for CCI, row-major over `(f, g)`.
    pub detail: Option<Vec<f64>>,
}

impl IndependenceDecision {
    pub fn scalar(independent: bool, p: f64) -> Self {
        Self {
            independent,
            p_value: PValue::Scalar(p),
            detail: None,
        }
    }
}

/// A conditional independence test over columns of a [`Dataset`].
pub trait CiTest: Send + Sync {
    fn name(&self) -> &str;

    /// Decides `x ⊥ y | z`, with variables given as column indices.
    fn independent(
        &self,
        x: usize,
        y: usize,
        z: &[usize],
        data: &Dataset,
    ) -> Result<IndependenceDecision>;
}

/// One univariate basis transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisFunction {
    /// `x^k`
    Power(u32),
    /// Physicists' Hermite polynomial `H_k`.
    Hermite(u32),
}

impl BasisFunction {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            BasisFunction::Power(k) => x.powi(k as i32),
            BasisFunction::Hermite(k) => hermite(k, x),
        }
    }
}

/// `H_n(x) = 2x H_{n-1}(x) − 2(n−1) H_{n-2}(x)`, `H_0 = 1`, `H_1 = 2x`.
pub fn hermite(n: u32, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, 2.0 * x);
    if n == 0 {
        return prev;
    }
    for k in 2..=n {
        let next = 2.0 * x * cur - 2.0 * (k - 1) as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Ordered list of basis transforms. Never empty and never contains the
/// constant function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisSpec {
    functions: Vec<BasisFunction>,
}

impl BasisSpec {
    pub fn new(functions: Vec<BasisFunction>) -> Result<Self> {
        if functions.is_empty() {
            return Err(Error::Empty("basis needs at least one function"));
        }
        if functions
            .iter()
            .any(|f| matches!(f, BasisFunction::Power(0) | BasisFunction::Hermite(0)))
        {
            return Err(Error::InvalidArgument(
                "the constant function cannot be part of a basis".into(),
            ));
        }
        Ok(Self { functions })
    }

    /// `x¹ … x^k`.
    pub fn power(k: u32) -> Result<Self> {
        Self::new((1..=k).map(BasisFunction::Power).collect())
    }

    /// `H_1 … H_k`.
    pub fn hermite(k: u32) -> Result<Self> {
        Self::new((1..=k).map(BasisFunction::Hermite).collect())
    }

    pub fn functions(&self) -> &[BasisFunction] {
        &self.functions
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }
}

impl Default for BasisSpec {
    /// The power basis `x¹ … x⁷`.
    fn default() -> Self {
        Self::power(7).expect("nonempty")
    }
}

impl FromStr for BasisSpec {
    type Err = Error;

    /// `power:k` (k ≤ 12) or `hermite:k`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("basis {s:?}: expected power:k or hermite:k"));
        let (kind, k) = s.split_once(':').ok_or_else(bad)?;
        let k: u32 = k.parse().map_err(|_| bad())?;
        match kind {
            "power" if (1..=12).contains(&k) => Self::power(k),
            "power" => Err(Error::InvalidArgument(format!(
                "power basis degree must be in 1..=12, got {k}"
            ))),
            "hermite" if k >= 1 => Self::hermite(k),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for BasisSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .functions
            .iter()
            .map(|b| match b {
                BasisFunction::Power(k) => format!("x^{k}"),
                BasisFunction::Hermite(k) => format!("H{k}"),
            })
            .collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// Knobs of the basis-pair loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScreenOptions {
    /// Stop at the first p-value at or below `alpha / |F|²`; that p-value
    /// alone already forces the FDR step to reject.
    pub early_exit: bool,
    /// Evaluate basis pairs on the rayon pool.
    pub parallel: bool,
}

/// Standardized basis transform of a column, or `None` when it has no
/// spread (or overflowed).
fn transformed(col: &[f64], f: &BasisFunction) -> Option<Vec<f64>> {
    let v: Vec<f64> = col.iter().map(|&x| f.eval(x)).collect();
    if v.iter().any(|x| !x.is_finite()) {
        return None;
    }
    standardize(&v).ok()
}

/// p-value for one pair of standardized columns.
fn pair_p(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let n = xs.len();
    // both inputs have sample mean 0 and sample variance 1
    let dot: f64 = xs.iter().zip(ys).map(|(a, b)| a * b).sum();
    let r = (dot / (n - 1) as f64).clamp(-CORR_CLAMP, CORR_CLAMP);
    let z = fisher_z(r)?;
    let tau2: f64 = xs.iter().zip(ys).map(|(a, b)| a * a * b * b).sum::<f64>() / n as f64;
    if !(tau2 > 0.0) {
        return Ok(1.0);
    }
    hawkins_p(z, tau2, n)
}

/// Unconditional independence screen of two data vectors.
///
/// Both vectors are standardized, expanded through every basis function and
/// every ordered pair `(f(x), g(y))` contributes one p-value. The pair is
/// judged independent iff Benjamini–Hochberg at `alpha` rejects nothing.
/// Transforms with zero variance contribute `p = 1`.
pub fn independent_unconditional(
    x: &[f64],
    y: &[f64],
    alpha: f64,
    basis: &BasisSpec,
) -> Result<IndependenceDecision> {
    screen(x, y, alpha, basis, ScreenOptions::default())
}

/// [`independent_unconditional`] with explicit loop options.
pub fn screen(
    x: &[f64],
    y: &[f64],
    alpha: f64,
    basis: &BasisSpec,
    opts: ScreenOptions,
) -> Result<IndependenceDecision> {
    let n = x.len();
    if y.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: y.len(),
        });
    }
    if n < CCI_MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: CCI_MIN_SAMPLES,
            have: n,
        });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let (xs, ys) = (standardize(x).ok(), standardize(y).ok());
    let expand = |s: &Option<Vec<f64>>| -> Vec<Option<Vec<f64>>> {
        basis
            .functions()
            .iter()
            .map(|f| s.as_ref().and_then(|col| transformed(col, f)))
            .collect()
    };
    let (fx, gy) = (expand(&xs), expand(&ys));
    let k = basis.len();
    let m = k * k;
    let p_at = |idx: usize| -> Result<f64> {
        match (&fx[idx / k], &gy[idx % k]) {
            (Some(a), Some(b)) => pair_p(a, b),
            _ => Ok(1.0),
        }
    };

    let ps: Vec<f64> = if opts.early_exit {
        let threshold = alpha / m as f64;
        let mut ps = Vec::with_capacity(m);
        for idx in 0..m {
            let p = p_at(idx)?;
            ps.push(p);
            if p <= threshold {
                return Ok(IndependenceDecision {
                    independent: false,
                    p_value: PValue::Composite,
                    detail: Some(ps),
                });
            }
        }
        ps
    } else if opts.parallel {
        (0..m).into_par_iter().map(p_at).collect::<Result<_>>()?
    } else {
        (0..m).map(p_at).collect::<Result<_>>()?
    };

    let list = PValueList::new(ps)?;
    let fdr = bh_fdr(&list, alpha)?;
    Ok(IndependenceDecision {
        independent: !fdr.reject(),
        p_value: PValue::Composite,
        detail: Some(list.into_inner()),
    })
}

/// Canonical `(x, y, z)`: `x < y`, `z` sorted. Rejects overlaps.
fn canonical(
    x: usize,
    y: usize,
    z: &[usize],
    data: &Dataset,
) -> Result<(usize, usize, Vec<usize>)> {
    let v = data.n_vars();
    for &i in z.iter().chain([&x, &y]) {
        if i >= v {
            return Err(Error::UnknownVariable(format!("column index {i}")));
        }
    }
    if x == y || z.contains(&x) || z.contains(&y) {
        return Err(Error::InvalidArgument(
            "x and y must be distinct and outside the conditioning set".into(),
        ));
    }
    let mut z = z.to_vec();
    z.sort_unstable();
    z.dedup();
    Ok((x.min(y), x.max(y), z))
}

/// Residuals whose spread is at rounding level relative to the regressand
/// are exactly zero in the limit; snap them so they read as degenerate.
fn snap_negligible(mut r: Vec<f64>, original: &[f64]) -> Vec<f64> {
    let scale = original.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if sample_std(&r) <= scale * 1e-12 {
        r.iter_mut().for_each(|v| *v = 0.0);
    }
    r
}

/// CCI on columns of `data`: residuals of `x` and `y` on `z`, then
/// [`screen`].
pub fn cci(
    x: usize,
    y: usize,
    z: &[usize],
    alpha: f64,
    basis: &BasisSpec,
    data: &Dataset,
) -> Result<IndependenceDecision> {
    CciTest::new(alpha, basis.clone()).independent(x, y, z, data)
}

#[derive(Debug, Clone)]
pub struct CciTest {
    pub alpha: f64,
    pub basis: BasisSpec,
    pub options: ScreenOptions,
}

impl CciTest {
    pub fn new(alpha: f64, basis: BasisSpec) -> Self {
        Self {
            alpha,
            basis,
            options: ScreenOptions::default(),
        }
    }

    pub fn with_options(mut self, options: ScreenOptions) -> Self {
        self.options = options;
        self
    }

    /// Number of p-values one call produces, `|F|²`.
    pub fn pair_count(&self) -> usize {
        self.basis.len() * self.basis.len()
    }
}

impl Default for CciTest {
    fn default() -> Self {
        Self::new(DEFAULT_ALPHA, BasisSpec::default())
    }
}

impl CiTest for CciTest {
    fn name(&self) -> &str {
        "cci"
    }

    fn independent(
        &self,
        x: usize,
        y: usize,
        z: &[usize],
        data: &Dataset,
    ) -> Result<IndependenceDecision> {
        let (x, y, z) = canonical(x, y, z, data)?;
        let n = data.n_samples();
        if n < CCI_MIN_SAMPLES {
            return Err(Error::TooFewSamples {
                needed: CCI_MIN_SAMPLES,
                have: n,
            });
        }
        let cond: Vec<&[f64]> = z.iter().map(|&i| data.column(i)).collect();
        let (rx, ry) = if cond.is_empty() {
            (data.column(x).to_vec(), data.column(y).to_vec())
        } else {
            let width = conditioning_bandwidth(&cond)?;
            let (cx, cy) = (data.column(x), data.column(y));
            (
                snap_negligible(residuals(cx, &cond, width)?, cx),
                snap_negligible(residuals(cy, &cond, width)?, cy),
            )
        };
        screen(&rx, &ry, self.alpha, &self.basis, self.options)
    }
}

/// Partial correlation of `x` and `y` given `s` from a correlation matrix,
/// `−Ω_xy / √(Ω_xx Ω_yy)` with `Ω` the inverse of the submatrix over
/// `{x, y} ∪ s`.
pub fn partial_correlation(corr: &DMatrix<f64>, x: usize, y: usize, s: &[usize]) -> Result<f64> {
    let idx = sub_indices(corr, x, y, s)?;
    if s.is_empty() {
        return Ok(corr[(x, y)].clamp(-1.0, 1.0));
    }
    let sub = DMatrix::from_fn(idx.len(), idx.len(), |i, j| corr[(idx[i], idx[j])]);
    let omega = spd_inverse(&sub).ok_or(Error::Singular)?;
    Ok(from_precision(&omega))
}

/// As [`partial_correlation`], but a non-positive-definite submatrix is
/// regularized by adding `εI`, ε = 1e-10, 1e-9, …, 1e-4.
pub fn partial_correlation_regularized(
    corr: &DMatrix<f64>,
    x: usize,
    y: usize,
    s: &[usize],
) -> Result<f64> {
    let idx = sub_indices(corr, x, y, s)?;
    if s.is_empty() {
        return Ok(corr[(x, y)].clamp(-1.0, 1.0));
    }
    let sub = DMatrix::from_fn(idx.len(), idx.len(), |i, j| corr[(idx[i], idx[j])]);
    if let Some(omega) = spd_inverse(&sub) {
        return Ok(from_precision(&omega));
    }
    for exp in (4..=10).rev() {
        let eps = 10f64.powi(-exp);
        let shifted = &sub + DMatrix::identity(idx.len(), idx.len()) * eps;
        if let Some(omega) = spd_inverse(&shifted) {
            return Ok(from_precision(&omega));
        }
    }
    Err(Error::Singular)
}

fn sub_indices(corr: &DMatrix<f64>, x: usize, y: usize, s: &[usize]) -> Result<Vec<usize>> {
    let v = corr.nrows();
    if corr.ncols() != v {
        return Err(Error::InvalidArgument(
            "correlation matrix must be square".into(),
        ));
    }
    let mut idx = vec![x, y];
    idx.extend_from_slice(s);
    if idx.iter().any(|&i| i >= v) {
        return Err(Error::InvalidArgument(
            "index outside the correlation matrix".into(),
        ));
    }
    let mut sorted = idx.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != idx.len() {
        return Err(Error::InvalidArgument("x, y and s must be disjoint".into()));
    }
    Ok(idx)
}

fn from_precision(omega: &DMatrix<f64>) -> f64 {
    (-omega[(0, 1)] / (omega[(0, 0)] * omega[(1, 1)]).sqrt()).clamp(-1.0, 1.0)
}

/// Inverse through Cholesky, or `None` when the matrix is not numerically
/// positive definite.
fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let chol = nalgebra::Cholesky::new(m.clone())?;
    let l = chol.l_dirty();
    let max_diag = m.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let min_pivot = (0..m.nrows())
        .map(|i| l[(i, i)] * l[(i, i)])
        .fold(f64::INFINITY, f64::min);
    if !(min_pivot > 1e-12 * max_diag) {
        return None;
    }
    Some(chol.inverse())
}

/// Fisher Z referral with `N − |s| − 3` degrees of freedom.
fn partial_corr_p(rho: f64, n: usize, s_len: usize) -> Result<f64> {
    let z = fisher_z(rho.clamp(-CORR_CLAMP, CORR_CLAMP))?;
    let df = (n - s_len - 3) as f64;
    Ok(two_sided_normal_p(df.sqrt() * z))
}

fn check_df(n: usize, s_len: usize) -> Result<()> {
    if n <= s_len + 3 {
        return Err(Error::TooFewSamples {
            needed: s_len + 4,
            have: n,
        });
    }
    Ok(())
}

/// Gaussian partial-correlation test.
#[derive(Debug, Clone, Copy)]
pub struct FisherZTest {
    pub alpha: f64,
}

impl FisherZTest {
    pub fn new(alpha: f64) -> Self {
        Self { alpha }
    }
}

/// Pearson correlation matrix over `vars` (in that order).
fn pearson_matrix(data: &Dataset, vars: &[usize]) -> Result<DMatrix<f64>> {
    let k = vars.len();
    let mut m = DMatrix::identity(k, k);
    for i in 0..k {
        for j in i + 1..k {
            let r = pearson_corr(data.column(vars[i]), data.column(vars[j]))?;
            m[(i, j)] = r;
            m[(j, i)] = r;
        }
    }
    Ok(m)
}

impl CiTest for FisherZTest {
    fn name(&self) -> &str {
        "fisher-z"
    }

    fn independent(
        &self,
        x: usize,
        y: usize,
        z: &[usize],
        data: &Dataset,
    ) -> Result<IndependenceDecision> {
        let (x, y, z) = canonical(x, y, z, data)?;
        let n = data.n_samples();
        check_df(n, z.len())?;
        let mut vars = vec![x, y];
        vars.extend_from_slice(&z);
        let corr = pearson_matrix(data, &vars)?;
        let rest: Vec<usize> = (2..vars.len()).collect();
        let rho = partial_correlation(&corr, 0, 1, &rest)?;
        let p = partial_corr_p(rho, n, z.len())?;
        Ok(IndependenceDecision::scalar(p > self.alpha, p))
    }
}

/// Convenience wrapper matching the other free functions.
pub fn fisher_z_test(
    x: usize,
    y: usize,
    z: &[usize],
    alpha: f64,
    data: &Dataset,
) -> Result<IndependenceDecision> {
    FisherZTest::new(alpha).independent(x, y, z, data)
}

/// Rank-based partial correlation test. Pairwise Kendall's tau is mapped to
/// a latent Gaussian correlation with `sin(π τ / 2)`.
#[derive(Debug, Clone, Copy)]
pub struct RankPartialTest {
    pub alpha: f64,
}

impl RankPartialTest {
    pub fn new(alpha: f64) -> Self {
        Self { alpha }
    }
}

impl CiTest for RankPartialTest {
    fn name(&self) -> &str {
        "rank"
    }

    fn independent(
        &self,
        x: usize,
        y: usize,
        z: &[usize],
        data: &Dataset,
    ) -> Result<IndependenceDecision> {
        let (x, y, z) = canonical(x, y, z, data)?;
        let n = data.n_samples();
        check_df(n, z.len())?;
        let mut vars = vec![x, y];
        vars.extend_from_slice(&z);
        let k = vars.len();
        let mut psi = DMatrix::identity(k, k);
        for i in 0..k {
            for j in i + 1..k {
                let tau = kendall_tau(data.column(vars[i]), data.column(vars[j]))?;
                let r = (std::f64::consts::FRAC_PI_2 * tau).sin();
                psi[(i, j)] = r;
                psi[(j, i)] = r;
            }
        }
        let rest: Vec<usize> = (2..k).collect();
        let rho = partial_correlation_regularized(&psi, 0, 1, &rest)?;
        let p = partial_corr_p(rho, n, z.len())?;
        Ok(IndependenceDecision::scalar(p > self.alpha, p))
    }
}

pub fn rank_partial_test(
    x: usize,
    y: usize,
    s: &[usize],
    alpha: f64,
    data: &Dataset,
) -> Result<IndependenceDecision> {
    RankPartialTest::new(alpha).independent(x, y, s, data)
}

/// The data-driven tests by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestKind {
    Cci,
    FisherZ,
    Rank,
}

impl TestKind {
    pub const ALL: [TestKind; 3] = [TestKind::FisherZ, TestKind::Rank, TestKind::Cci];

    pub fn as_str(&self) -> &'static str {
        match self {
            TestKind::Cci => "cci",
            TestKind::FisherZ => "fisher-z",
            TestKind::Rank => "rank",
        }
    }

    pub fn build(
        &self,
        alpha: f64,
        basis: &BasisSpec,
        options: ScreenOptions,
    ) -> std::sync::Arc<dyn CiTest> {
        match self {
            TestKind::Cci => {
                std::sync::Arc::new(CciTest::new(alpha, basis.clone()).with_options(options))
            }
            TestKind::FisherZ => std::sync::Arc::new(FisherZTest::new(alpha)),
            TestKind::Rank => std::sync::Arc::new(RankPartialTest::new(alpha)),
        }
    }
}

impl FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cci" => Ok(TestKind::Cci),
            "fisher-z" | "fisherz" => Ok(TestKind::FisherZ),
            "rank" => Ok(TestKind::Rank),
            "kci" => Err(Error::InvalidArgument(
                "kci is not implemented: the kernel CI test is out of scope for this toolkit"
                    .into(),
            )),
            other => Err(Error::InvalidArgument(format!(
                "unknown test {other:?} (expected cci, fisher-z or rank)"
            ))),
        }
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
