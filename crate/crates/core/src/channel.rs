//! Transmission model: constellation, message space, channel matrix with
//! its SVD-derived noise-amplification coefficients, and the shared
//! residual/confidence statistic.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::chi2::chi2_cdf_even;
use crate::linalg::{self, ComplexMatrix, LinalgError, SvdFactors};
use crate::rng::SeededRng;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("constellation must contain at least one point")]
    EmptyConstellation,
    #[error("constellation points must be pairwise distinct")]
    DuplicatePoints,
    #[error("constellation size {0} exceeds the supported maximum 65536")]
    ConstellationTooLarge(usize),
    #[error("channel dimension {n} outside the supported range {min}..={max}")]
    DimensionOutOfRange { n: usize, min: usize, max: usize },
    #[error("noise deviation must be finite and non-negative, got {0}")]
    BadSigma(f64),
    #[error("channel is numerically singular (sigma_min/sigma_max = {ratio:e})")]
    NearSingularChannel { ratio: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// The `m` complex points a single transmitted symbol can take.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    points: Vec<Complex64>,
    psk: bool,
}

impl Constellation {
    /// `m` equispaced points on the unit circle, `c_k = e^{2πik/m}`.
    pub fn psk(m: usize) -> Result<Self, ChannelError> {
        if m == 0 {
            return Err(ChannelError::EmptyConstellation);
        }
        if m > u16::MAX as usize + 1 {
            return Err(ChannelError::ConstellationTooLarge(m));
        }
        let points = (0..m)
            .map(|k| {
                let theta = 2.0 * PI * k as f64 / m as f64;
                Complex64::new(theta.cos(), theta.sin())
            })
            .collect();
        Ok(Self { points, psk: true })
    }

    /// Arbitrary constellation from explicit points.
    pub fn from_points(points: Vec<Complex64>) -> Result<Self, ChannelError> {
        if points.is_empty() {
            return Err(ChannelError::EmptyConstellation);
        }
        if points.len() > u16::MAX as usize + 1 {
            return Err(ChannelError::ConstellationTooLarge(points.len()));
        }
        for (i, a) in points.iter().enumerate() {
            for b in points.iter().skip(i + 1) {
                if a == b {
                    return Err(ChannelError::DuplicatePoints);
                }
            }
        }
        Ok(Self { points, psk: false })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn point(&self, k: usize) -> Complex64 {
        self.points[k]
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    /// True when built by [`Constellation::psk`], i.e. the symbol set is
    /// closed under index-wise rotation.
    pub fn is_psk(&self) -> bool {
        self.psk
    }
}

/// A transmittable message: one symbol index per coordinate.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Message {
    pub indices: Vec<u16>,
}

impl Message {
    pub fn new(indices: Vec<u16>) -> Self {
        Self { indices }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// The complex vector `x` with `x(j) = c_{indices(j)}`.
    pub fn to_vector(&self, c: &Constellation) -> Vec<Complex64> {
        self.indices.iter().map(|&i| c.point(i as usize)).collect()
    }
}

/// A candidate decode: the message, its noise-normalized squared residual
/// `r = ‖y − H·x‖²/σ²` and the confidence `χ = 1 − F_{χ²(2n)}(r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutcome {
    pub x: Message,
    pub r: f64,
    pub chi: f64,
}

/// Channel matrix together with everything the decoders precompute from
/// it: the SVD, the per-coordinate noise amplification magnitudes
/// `s_k(j) = |v_k(j)|/σ_k`, their cumulative root-sum-squares `S_k(j)` and
/// the pivot coordinates the randomized decoders guess at.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    n: usize,
    h: ComplexMatrix,
    svd: SvdFactors,
    sigma: f64,
    /// `s[k*n + j]` = s_{k+1}(j) in 1-based notation.
    s: Vec<f64>,
    /// `s_cum[k*n + j]` = S_{k+1}(j) in 1-based notation.
    s_cum: Vec<f64>,
    j_rade1: usize,
    rade2_pivots: Option<(usize, usize)>,
}

impl ChannelModel {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> &ComplexMatrix {
        &self.h
    }

    pub fn svd(&self) -> &SvdFactors {
        &self.svd
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `s_k(j) = |v_k(j)|/σ_k` for the 0-based singular index `k`.
    pub fn s_single(&self, k: usize, j: usize) -> f64 {
        self.s[k * self.n + j]
    }

    /// `S_count(j)`: root-sum-square of the first `count` coefficients at
    /// coordinate `j`; `count = 0` gives 0.
    pub fn s_cum_first(&self, count: usize, j: usize) -> f64 {
        if count == 0 {
            0.0
        } else {
            self.s_cum[(count - 1) * self.n + j]
        }
    }

    /// Coordinate minimizing `S_{n−1}(j)` (smallest index on ties).
    pub fn j_rade1(&self) -> usize {
        self.j_rade1
    }

    /// The two coordinates with the smallest `S_{n−2}(j)`, in order of
    /// increasing value (smallest index on ties). `None` for n = 1.
    pub fn rade2_pivots(&self) -> Option<(usize, usize)> {
        self.rade2_pivots
    }

    /// `x̃ = H⁻¹·y` evaluated through the SVD.
    pub fn apply_inverse(&self, y: &[Complex64]) -> Vec<Complex64> {
        self.svd.solve(y)
    }
}

/// Builds a [`ChannelModel`] from an explicit channel matrix.
pub fn precompute(h: &ComplexMatrix, sigma: f64) -> Result<ChannelModel, ChannelError> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(ChannelError::BadSigma(sigma));
    }
    let svd = linalg::svd(h)?;
    let n = h.rows();
    let smax = svd.singular_values[0];
    let smin = svd.singular_values[n - 1];
    if smin <= 1e-12 * smax {
        let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
        return Err(ChannelError::NearSingularChannel { ratio });
    }

    let mut s = vec![0.0; n * n];
    let mut s_cum = vec![0.0; n * n];
    for j in 0..n {
        let mut acc = 0.0;
        for k in 0..n {
            let skj = svd.v.get(j, k).norm() / svd.singular_values[k];
            s[k * n + j] = skj;
            acc += skj * skj;
            s_cum[k * n + j] = acc.sqrt();
        }
    }

    let model = ChannelModel {
        n,
        h: h.clone(),
        svd,
        sigma,
        s,
        s_cum,
        j_rade1: 0,
        rade2_pivots: None,
    };
    let j_rade1 = argmin_by(n, |j| model.s_cum_first(n - 1, j));
    let rade2_pivots = if n >= 2 {
        Some(two_smallest_by(n, |j| model.s_cum_first(n.saturating_sub(2), j)))
    } else {
        None
    };
    Ok(ChannelModel { j_rade1, rade2_pivots, ..model })
}

/// Draws an `n×n` matrix with i.i.d. standard complex normal entries and
/// precomputes the model for it.
pub fn generate_channel(
    n: usize,
    sigma: f64,
    rng: &mut SeededRng,
) -> Result<ChannelModel, ChannelError> {
    if !(2..=32).contains(&n) {
        return Err(ChannelError::DimensionOutOfRange { n, min: 2, max: 32 });
    }
    let data = rng.complex_normal_vector(n * n);
    let h = ComplexMatrix::new(n, n, data)?;
    precompute(&h, sigma)
}

/// Uniform draw from the message space `X = C^n`.
pub fn sample_message(c: &Constellation, n: usize, rng: &mut SeededRng) -> Message {
    let m = c.len();
    Message::new((0..n).map(|_| rng.uniform_index(m) as u16).collect())
}

/// One channel use: `y = H·x + σ·z` with fresh standard complex normal `z`.
pub fn transmit(
    model: &ChannelModel,
    c: &Constellation,
    x: &Message,
    rng: &mut SeededRng,
) -> Vec<Complex64> {
    let mut y = model.h().mat_vec(&x.to_vector(c));
    let sigma = model.sigma();
    for v in y.iter_mut() {
        *v += sigma * rng.complex_normal();
    }
    y
}

/// Residual statistic of a candidate message against an observation:
/// `r = ‖y − H·x‖²/σ²` and `χ = 1 − F_{χ²(2n)}(r)`.
///
/// For a noiseless channel (σ = 0) the statistic degenerates to `r = 0`
/// on an exact match and `r = ∞` otherwise.
pub fn residual_stat(
    model: &ChannelModel,
    c: &Constellation,
    x: &Message,
    y_obs: &[Complex64],
) -> (f64, f64) {
    let hx = model.h().mat_vec(&x.to_vector(c));
    let rss = linalg::dist_sqr(&hx, y_obs);
    residual_stat_from_rss(model, rss)
}

/// On a noiseless channel, squared residuals at or below this value count
/// as an exact match; it sits far above the float rounding noise of a
/// matrix-vector product and far below any genuine symbol mismatch.
const NOISELESS_RSS_TOL: f64 = 1e-24;

/// Same as [`residual_stat`] given the already-computed `‖y − H·x‖²`.
pub(crate) fn residual_stat_from_rss(model: &ChannelModel, rss: f64) -> (f64, f64) {
    let sigma = model.sigma();
    let r = if sigma > 0.0 {
        rss / (sigma * sigma)
    } else if rss <= NOISELESS_RSS_TOL {
        0.0
    } else {
        f64::INFINITY
    };
    let chi = 1.0
        - chi2_cdf_even(2 * model.n() as u32, r)
            .expect("r is non-negative and 2n is a valid even dof");
    (r, chi)
}

fn argmin_by(n: usize, f: impl Fn(usize) -> f64) -> usize {
    let mut best = 0;
    let mut best_val = f(0);
    for j in 1..n {
        let v = f(j);
        if v < best_val {
            best_val = v;
            best = j;
        }
    }
    best
}

fn two_smallest_by(n: usize, f: impl Fn(usize) -> f64) -> (usize, usize) {
    debug_assert!(n >= 2);
    let (mut i1, mut v1) = (0usize, f(0));
    let (mut i2, mut v2) = (1usize, f(1));
    if v2 < v1 {
        std::mem::swap(&mut i1, &mut i2);
        std::mem::swap(&mut v1, &mut v2);
    }
    for j in 2..n {
        let v = f(j);
        if v < v1 {
            i2 = i1;
            v2 = v1;
            i1 = j;
            v1 = v;
        } else if v < v2 {
            i2 = j;
            v2 = v;
        }
    }
    (i1, i2)
}
