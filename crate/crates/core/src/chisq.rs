//! Chi-square distribution helpers for two degrees of freedom.
//!
//! The non-central CDF uses the Poisson mixture
//! `F(x; λ) = Σ_k Pois(k; λ/2) · F_{χ²(2+2k)}(x)` where each inner term is the
//! Erlang tail `P(Pois(x/2) ≥ k+1)`. Equivalently the CDF is `P(N_x > N_λ)`
//! for independent Poisson variates with means `x/2` and `λ/2`, which gives a
//! cheap exact cut-off when the two means are far apart.

use crate::scalar::Real;
use thiserror::Error;

/// Hard cap on series terms.
pub const MAX_SERIES_TERMS: usize = 10_000;

/// Mixture weights are accumulated until the missing mass drops below this.
pub const SERIES_TOLERANCE: f64 = 1e-12;

/// Width (in standard deviations) beyond which Poisson tails are ignored.
/// By Bernstein's inequality the neglected mass is below `exp(-54)`.
const TAIL_SIGMAS: f64 = 12.0;

#[derive(Debug, Error, PartialEq)]
pub enum ChiSqError {
    #[error("chi-square argument must be finite and non-negative, got {0}")]
    NegativeArgument(f64),
    #[error("non-centrality must be finite and non-negative, got {0}")]
    NegativeNoncentrality(f64),
    #[error("probability must lie in [0, 1), got {0}")]
    ProbabilityOutOfRange(f64),
}

fn check_arg<T: Real>(x: T) -> Result<(), ChiSqError> {
    if x.is_nan() || x < T::zero() {
        return Err(ChiSqError::NegativeArgument(x.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(())
}

/// CDF of the central chi-square with 2 dof: `1 - exp(-x/2)`.
pub fn chi2_cdf_2<T: Real>(x: T) -> Result<T, ChiSqError> {
    check_arg(x)?;
    Ok(-(-x / T::lit(2.0)).exp_m1())
}

/// Inverse of [`chi2_cdf_2`]: `-2 ln(1 - p)`.
pub fn chi2_quantile_2<T: Real>(p: T) -> Result<T, ChiSqError> {
    if p.is_nan() || p < T::zero() || p >= T::one() {
        return Err(ChiSqError::ProbabilityOutOfRange(p.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(-T::lit(2.0) * (-p).ln_1p())
}

/// `ln(k!)`: exact summation for small `k`, Stirling series above.
pub fn ln_factorial<T: Real>(k: usize) -> T {
    if k < 32 {
        return (2..=k).fold(T::zero(), |acc, m| acc + T::from_usize_lossy(m).ln());
    }
    let n = T::from_usize_lossy(k);
    let inv = n.recip();
    let inv2 = inv * inv;
    let half = T::lit(0.5);
    n * n.ln() - n
        + half * (T::TAU() * n).ln()
        + inv * (T::lit(1.0 / 12.0) - inv2 * (T::lit(1.0 / 360.0) - inv2 * T::lit(1.0 / 1260.0)))
}

/// Poisson pmf evaluated in log space. The log terms are large and nearly
/// cancel, so they are always formed in double precision.
fn poisson_pmf<T: Real>(k: usize, mean: T) -> T {
    if mean == T::zero() {
        return if k == 0 { T::one() } else { T::zero() };
    }
    let m = mean.to_f64().unwrap_or(f64::NAN);
    T::lit((-m + k as f64 * m.ln() - ln_factorial::<f64>(k)).exp())
}

/// Index below which the Poisson(mean) mass is negligible.
fn lower_cut<T: Real>(mean: T) -> usize {
    let t = T::lit(TAIL_SIGMAS);
    let lo = mean - t * mean.sqrt() - t;
    if lo <= T::zero() {
        0
    } else {
        lo.floor().to_usize().unwrap_or(usize::MAX)
    }
}

/// CDF of the non-central chi-square with 2 dof and non-centrality `lambda`.
pub fn noncentral_chi2_cdf_2<T: Real>(x: T, lambda: T) -> Result<T, ChiSqError> {
    check_arg(x)?;
    if lambda.is_nan() || lambda < T::zero() {
        return Err(ChiSqError::NegativeNoncentrality(lambda.to_f64().unwrap_or(f64::NAN)));
    }
    if x == T::zero() {
        return Ok(T::zero());
    }
    if x.is_infinite() {
        return Ok(T::one());
    }
    let two = T::lit(2.0);
    let a = lambda / two; // mixing Poisson mean
    let b = x / two; // inner Erlang rate argument

    // F = P(N_b - N_a >= 1); decide far-apart cases from the Bernstein bound.
    let drift = b - a;
    let spread = (a + b).sqrt() * T::lit(TAIL_SIGMAS);
    if drift >= spread && drift > T::one() {
        return Ok(T::one());
    }
    if -drift >= spread {
        return Ok(T::zero());
    }

    let tol = T::lit(SERIES_TOLERANCE).max(T::epsilon() * T::lit(64.0));
    let k_start = lower_cut(a);
    let b_start = lower_cut(b);

    // S = P(N_b <= k), tracked incrementally alongside the Poisson(b) pmf.
    let mut pmf_b = T::zero();
    let mut cdf_b = T::zero();
    if b == T::zero() {
        cdf_b = T::one();
    } else if k_start >= b_start {
        pmf_b = poisson_pmf(b_start, b);
        cdf_b = pmf_b;
        for m in (b_start + 1)..=k_start {
            pmf_b =
                if pmf_b < T::min_positive_value() { poisson_pmf(m, b) } else { pmf_b * b / T::from_usize_lossy(m) };
            cdf_b = cdf_b + pmf_b;
        }
    }

    let mut weight = poisson_pmf(k_start, a);
    let mut mass = T::zero();
    let mut total = T::zero();
    let mut k = k_start;
    for _ in 0..MAX_SERIES_TERMS {
        let upper = (T::one() - cdf_b).max(T::zero());
        total = total + weight * upper;
        mass = mass + weight;
        if mass >= T::one() - tol || upper <= T::epsilon() * T::epsilon() {
            break;
        }
        k += 1;
        let kf = T::from_usize_lossy(k);
        // Subnormal terms carry too few bits to seed a recurrence; take those
        // from log space instead.
        weight = if weight < T::min_positive_value() { poisson_pmf(k, a) } else { weight * a / kf };
        if b > T::zero() && k >= b_start {
            pmf_b = if k == b_start || pmf_b < T::min_positive_value() { poisson_pmf(k, b) } else { pmf_b * b / kf };
            cdf_b = cdf_b + pmf_b;
        }
    }
    Ok(total.max(T::zero()).min(T::one()))
}
