//! Chi-square distribution function for even degrees of freedom.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum Chi2Error {
    #[error("degrees of freedom must be even and positive, got {0}")]
    BadDegrees(u32),
    #[error("argument must be a non-negative real number")]
    BadArgument,
}

/// CDF of the chi-square distribution with `two_n` (even, positive)
/// degrees of freedom, via the closed form
/// `F(x) = 1 − e^{−x/2} · Σ_{k=0}^{n−1} x^k / (2^k k!)` with `n = two_n/2`.
///
/// The summands are Poisson(x/2) probabilities, accumulated through the
/// term recurrence `t_k = t_{k−1} · x / (2k)` from `t_0 = e^{−x/2}`, so the
/// evaluation never overflows. When the head sum is close to 1 the
/// complement is formed by summing the Poisson tail directly, which keeps
/// the result accurate in the far left tail of the distribution.
pub fn chi2_cdf_even(two_n: u32, x: f64) -> Result<f64, Chi2Error> {
    if two_n == 0 || two_n % 2 != 0 {
        return Err(Chi2Error::BadDegrees(two_n));
    }
    if !(x >= 0.0) {
        return Err(Chi2Error::BadArgument);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    let n = two_n / 2;
    let lambda = x / 2.0;
    let mut term = (-lambda).exp();
    let mut head = term;
    for k in 1..n {
        term *= lambda / k as f64;
        head += term;
    }
    if head < 0.5 {
        return Ok((1.0 - head).clamp(0.0, 1.0));
    }
    // term now holds the Poisson mass at n−1; continue into the tail.
    let mut tail = 0.0;
    let mut k = n;
    loop {
        term *= lambda / k as f64;
        tail += term;
        k += 1;
        if term <= tail * 1e-18 || term == 0.0 || k > n + 10_000 {
            break;
        }
    }
    Ok(tail.clamp(0.0, 1.0))
}
