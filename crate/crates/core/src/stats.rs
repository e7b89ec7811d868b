//! Hypothesis tests and the distribution functions behind them.
//!
//! CDFs are built on the regularized incomplete beta and gamma functions,
//! evaluated with a Lanczos log-gamma, series expansions and modified
//! Lentz continued fractions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Special functions

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 1000;

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

fn gamma_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut del = sum;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_cf(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x < a + 1.0 {
        gamma_series(a, x)
    } else {
        1.0 - gamma_cf(a, x)
    }
}

/// Regularized upper incomplete gamma `Q(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x < a + 1.0 {
        1.0 - gamma_series(a, x)
    } else {
        gamma_cf(a, x)
    }
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    if x >= 0.0 {
        gamma_q(0.5, x * x)
    } else {
        1.0 + gamma_p(0.5, x * x)
    }
}

/// Standard normal upper tail.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

// ---------------------------------------------------------------------------
// Distributions

/// Continuous distribution with CDF and inverse by bisection.
pub trait Distribution {
    fn cdf(&self, x: f64) -> f64;

    fn sf(&self, x: f64) -> f64 {
        1.0 - self.cdf(x)
    }

    /// Support lower bound used to seed the quantile search.
    fn lower(&self) -> f64;

    fn quantile(&self, p: f64) -> f64 {
        assert!((0.0..1.0).contains(&p) && p > 0.0, "quantile needs p in (0,1)");
        let mut lo = self.lower();
        if lo == f64::NEG_INFINITY {
            lo = -1.0;
            while self.cdf(lo) > p {
                lo *= 2.0;
            }
        }
        let mut hi = lo.max(0.0) + 1.0;
        while self.cdf(hi) < p {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudentT {
    pub df: f64,
}

impl StudentT {
    /// Two-sided tail `P(|T| ≥ |t|)`.
    pub fn two_sided(&self, t: f64) -> f64 {
        if !t.is_finite() {
            return 0.0;
        }
        inc_beta(self.df / 2.0, 0.5, self.df / (self.df + t * t)).clamp(0.0, 1.0)
    }
}

impl Distribution for StudentT {
    fn cdf(&self, t: f64) -> f64 {
        let tail = 0.5 * self.two_sided(t);
        if t >= 0.0 {
            1.0 - tail
        } else {
            tail
        }
    }

    fn sf(&self, t: f64) -> f64 {
        self.cdf(-t)
    }

    fn lower(&self) -> f64 {
        f64::NEG_INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquared {
    pub df: f64,
}

impl Distribution for ChiSquared {
    fn cdf(&self, x: f64) -> f64 {
        gamma_p(self.df / 2.0, x / 2.0)
    }

    fn sf(&self, x: f64) -> f64 {
        gamma_q(self.df / 2.0, x / 2.0)
    }

    fn lower(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FDist {
    pub df1: f64,
    pub df2: f64,
}

impl Distribution for FDist {
    fn cdf(&self, f: f64) -> f64 {
        if f <= 0.0 {
            return 0.0;
        }
        inc_beta(self.df1 / 2.0, self.df2 / 2.0, self.df1 * f / (self.df1 * f + self.df2))
    }

    fn sf(&self, f: f64) -> f64 {
        if f <= 0.0 {
            return 1.0;
        }
        inc_beta(self.df2 / 2.0, self.df1 / 2.0, self.df2 / (self.df2 + self.df1 * f))
    }

    fn lower(&self) -> f64 {
        0.0
    }
}

// ---------------------------------------------------------------------------
// Tests

pub type Matrix = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub df: f64,
    /// Denominator degrees of freedom for F tests.
    pub df2: Option<f64>,
    pub p_value: f64,
    pub ci95: Option<(f64, f64)>,
    pub extras: BTreeMap<String, Matrix>,
}

impl TestResult {
    fn new(statistic: f64, df: f64, p_value: f64) -> Self {
        TestResult { statistic, df, df2: None, p_value: p_value.clamp(0.0, 1.0), ci95: None, extras: BTreeMap::new() }
    }

    pub fn significant(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
fn sample_var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

/// Welch's unequal-variance t test of `mean(a) - mean(b)`.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidInput("welch t test needs at least 2 samples per group".into()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (sample_var(a) / na, sample_var(b) / nb);
    let se2 = va + vb;
    if se2.is_nan() || se2 <= 0.0 {
        return Err(Error::Degenerate("both groups have zero variance".into()));
    }
    let diff = mean(a) - mean(b);
    let se = se2.sqrt();
    let t = diff / se;
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let dist = StudentT { df };
    let q = dist.quantile(0.975);
    let mut r = TestResult::new(t, df, dist.two_sided(t));
    r.ci95 = Some((diff - q * se, diff + q * se));
    Ok(r)
}

/// Per-test significance level under Bonferroni correction.
pub fn bonferroni(alpha: f64, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidInput("bonferroni needs m >= 1".into()));
    }
    Ok(alpha / m as f64)
}

/// Pearson chi-square test of independence. `extras["residuals"]` holds
/// `(O - E) / sqrt(E)` per cell, `extras["expected"]` the expected counts.
pub fn chi_square_independence(table: &[Vec<f64>]) -> Result<TestResult> {
    let r = table.len();
    let c = table.first().map_or(0, Vec::len);
    if r < 2 || c < 2 || table.iter().any(|row| row.len() != c) {
        return Err(Error::InvalidInput("contingency table must be rectangular and at least 2x2".into()));
    }
    if table.iter().flatten().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidInput("counts must be finite and non-negative".into()));
    }
    let rows: Vec<f64> = table.iter().map(|row| row.iter().sum()).collect();
    let cols: Vec<f64> = (0..c).map(|j| table.iter().map(|row| row[j]).sum()).collect();
    if rows.iter().chain(&cols).any(|&m| m <= 0.0) {
        return Err(Error::Degenerate("contingency table has a zero marginal".into()));
    }
    let n: f64 = rows.iter().sum();
    let mut stat = 0.0;
    let mut expected = vec![vec![0.0; c]; r];
    let mut residuals = vec![vec![0.0; c]; r];
    for i in 0..r {
        for j in 0..c {
            let e = rows[i] * cols[j] / n;
            let res = (table[i][j] - e) / e.sqrt();
            expected[i][j] = e;
            residuals[i][j] = res;
            stat += res * res;
        }
    }
    let df = ((r - 1) * (c - 1)) as f64;
    let mut out = TestResult::new(stat, df, ChiSquared { df }.sf(stat));
    out.extras.insert("expected".into(), expected);
    out.extras.insert("residuals".into(), residuals);
    Ok(out)
}

/// One-way ANOVA with `df = (k - 1, N - k)`.
pub fn anova_oneway(groups: &[Vec<f64>]) -> Result<TestResult> {
    if groups.len() < 2 || groups.iter().any(|g| g.len() < 2) {
        return Err(Error::InvalidInput("anova needs at least 2 groups of at least 2 samples".into()));
    }
    let k = groups.len() as f64;
    let n: f64 = groups.iter().map(|g| g.len() as f64).sum();
    let grand = groups.iter().flatten().sum::<f64>() / n;
    let mut ssb = 0.0;
    let mut ssw = 0.0;
    for g in groups {
        let m = mean(g);
        ssb += g.len() as f64 * (m - grand) * (m - grand);
        ssw += g.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
    }
    let (df1, df2) = (k - 1.0, n - k);
    let msw = ssw / df2;
    if msw.is_nan() || msw <= 0.0 {
        return Err(Error::Degenerate("zero within-group variance".into()));
    }
    let f = (ssb / df1) / msw;
    let mut out = TestResult::new(f, df1, FDist { df1, df2 }.sf(f));
    out.df2 = Some(df2);
    Ok(out)
}

/// Pearson correlation; `statistic` is r, `df` is n - 2 and
/// `extras["t"]` the t statistic behind the two-sided p-value.
pub fn pearson_corr(x: &[f64], y: &[f64]) -> Result<TestResult> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::InvalidInput("pearson needs paired samples of length >= 3".into()));
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if !(sxx > 0.0 && syy > 0.0) {
        return Err(Error::Degenerate("zero variance in correlation input".into()));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (x.len() - 2) as f64;
    let (t, p) = if 1.0 - r.abs() < 1e-15 {
        (f64::INFINITY.copysign(r), 0.0)
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        (t, StudentT { df }.two_sided(t))
    };
    let mut out = TestResult::new(r, df, p);
    out.extras.insert("t".into(), vec![vec![t]]);
    Ok(out)
}

/// Pairwise correlation matrix; `p[i][j] >= 0.05` marks entries a plot
/// should cross out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub r: Matrix,
    pub p: Matrix,
}

pub fn correlation_matrix(names: &[String], columns: &[Vec<f64>]) -> Result<CorrelationMatrix> {
    if names.len() != columns.len() {
        return Err(Error::InvalidInput("one name per column required".into()));
    }
    let k = columns.len();
    let mut r = vec![vec![1.0; k]; k];
    let mut p = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let t = pearson_corr(&columns[i], &columns[j])?;
            r[i][j] = t.statistic;
            r[j][i] = t.statistic;
            p[i][j] = t.p_value;
            p[j][i] = t.p_value;
        }
    }
    Ok(CorrelationMatrix { names: names.to_vec(), r, p })
}
