//! The decoding schemes: exhaustive search, nearest-neighbor search in the
//! message space, the one- and two-coordinate randomized decoders, and
//! supercharging.

use num_complex::Complex64;
use thiserror::Error;

use crate::channel::{ChannelModel, Constellation, DecodeOutcome, Message};
use crate::channel::residual_stat_from_rss;
use crate::chi2::chi2_cdf_even;
use crate::linalg::{solve_2x2, ComplexMatrix};
use crate::neighbors::{build_base_neighbor_list, nearest_in_x, nearest_symbol, neighbors_of, NeighborList};
use crate::rng::SeededRng;

/// Hard cap on the exhaustively enumerable message space.
pub const BRUTE_SPACE_LIMIT: u128 = 1 << 32;

/// The noise reconstruction divides by `v_n(j)`; below this magnitude the
/// division is numerically meaningless.
pub const RADE1_PIVOT_GUARD: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum DecodeError {
    #[error("message space m^n = {space} exceeds the enumeration limit {limit}")]
    BudgetExceeded { space: u128, limit: u128 },
    #[error("pivot coordinate has |v_n(j)| = {vnj_abs:e}, too small to reconstruct noise")]
    DegeneratePivot { vnj_abs: f64 },
    #[error("decoder requires n >= {min}, got {n}")]
    DimensionTooSmall { n: usize, min: usize },
    #[error("neighbor list holds {have} entries, {need} required")]
    NeighborListTooShort { have: usize, need: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(&'static str),
}

/// Iteration budget and early-exit confidence for the one-coordinate
/// randomized decoder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rade1Params {
    pub min_iters: u32,
    pub max_iters: u32,
    pub chi_thresh: f64,
}

impl Rade1Params {
    pub fn fixed(iters: u32) -> Self {
        Self { min_iters: iters, max_iters: iters, chi_thresh: 1.0 }
    }

    fn validate(&self) -> Result<(), DecodeError> {
        if self.min_iters < 1 {
            return Err(DecodeError::InvalidParams("min_iters must be >= 1"));
        }
        if self.min_iters > self.max_iters {
            return Err(DecodeError::InvalidParams("min_iters must be <= max_iters"));
        }
        if !(0.0..=1.0).contains(&self.chi_thresh) {
            return Err(DecodeError::InvalidParams("chi_thresh must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Parameters of the two-coordinate randomized decoder; `chi_stop` is the
/// per-pair rejection threshold on the χ²(4) tail probability of the
/// reconstructed noise components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rade2Params {
    pub min_iters: u32,
    pub max_iters: u32,
    pub chi_thresh: f64,
    pub chi_stop: f64,
}

impl Rade2Params {
    pub fn fixed(iters: u32, chi_stop: f64) -> Self {
        Self { min_iters: iters, max_iters: iters, chi_thresh: 1.0, chi_stop }
    }

    fn validate(&self) -> Result<(), DecodeError> {
        if self.min_iters < 1 {
            return Err(DecodeError::InvalidParams("min_iters must be >= 1"));
        }
        if self.min_iters > self.max_iters {
            return Err(DecodeError::InvalidParams("min_iters must be <= max_iters"));
        }
        if !(0.0..=1.0).contains(&self.chi_thresh) || !(0.0..=1.0).contains(&self.chi_stop) {
            return Err(DecodeError::InvalidParams("confidence thresholds must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Diagnostics attached to the iterated decoders.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DecoderTrace {
    pub iterations_used: u32,
    pub pairs_skipped: u64,
    pub fallback_used: bool,
}

/// `‖H·x − y‖²` without intermediate allocation.
#[inline]
pub(crate) fn hx_dist_sqr(
    h: &ComplexMatrix,
    c: &Constellation,
    x: &Message,
    y: &[Complex64],
) -> f64 {
    let n = h.rows();
    let mut acc = 0.0;
    for r in 0..n {
        let mut s = -y[r];
        for (j, &idx) in x.indices.iter().enumerate() {
            s += h.get(r, j) * c.point(idx as usize);
        }
        acc += s.norm_sqr();
    }
    acc
}

fn outcome_from_rss(model: &ChannelModel, x: Message, rss: f64) -> DecodeOutcome {
    let (r, chi) = residual_stat_from_rss(model, rss);
    DecodeOutcome { x, r, chi }
}

/// Exhaustive maximum-likelihood search: the returned message minimizes
/// `‖H·x − y‖` over all of `X`, ties broken by the lexicographically
/// smallest symbol-index vector.
///
/// The space is walked depth-first keeping the partial sum of `H·x` per
/// prefix, so a leaf costs `O(n)` instead of `O(n²)`.
pub fn brute(
    model: &ChannelModel,
    c: &Constellation,
    y_obs: &[Complex64],
) -> Result<DecodeOutcome, DecodeError> {
    let n = model.n();
    let m = c.len();
    let space = (m as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if space > BRUTE_SPACE_LIMIT {
        return Err(DecodeError::BudgetExceeded { space, limit: BRUTE_SPACE_LIMIT });
    }

    // scaled[d*m + s] = (column d of H) · c_s
    let mut scaled: Vec<Vec<Complex64>> = Vec::with_capacity(n * m);
    for d in 0..n {
        let col = model.h().column(d);
        for s in 0..m {
            let cs = c.point(s);
            scaled.push(col.iter().map(|&h| h * cs).collect());
        }
    }

    let mut diff: Vec<Complex64> = y_obs.iter().map(|&v| -v).collect();
    let mut current = vec![0u16; n];
    let mut best_d = f64::INFINITY;
    let mut best = vec![0u16; n];
    descend(0, n, m, &scaled, &mut diff, &mut current, &mut best_d, &mut best);

    let x = Message::new(best);
    let rss = hx_dist_sqr(model.h(), c, &x, y_obs);
    Ok(outcome_from_rss(model, x, rss))
}

#[allow(clippy::too_many_arguments)]
fn descend(
    depth: usize,
    n: usize,
    m: usize,
    scaled: &[Vec<Complex64>],
    diff: &mut [Complex64],
    current: &mut [u16],
    best_d: &mut f64,
    best: &mut [u16],
) {
    if depth == n - 1 {
        for s in 0..m {
            let add = &scaled[depth * m + s];
            let mut d = 0.0;
            for (x, a) in diff.iter().zip(add.iter()) {
                d += (x + a).norm_sqr();
            }
            if d < *best_d {
                *best_d = d;
                best[..depth].copy_from_slice(&current[..depth]);
                best[depth] = s as u16;
            }
        }
        return;
    }
    for s in 0..m {
        let add = &scaled[depth * m + s];
        for (x, a) in diff.iter_mut().zip(add.iter()) {
            *x += a;
        }
        current[depth] = s as u16;
        descend(depth + 1, n, m, scaled, diff, current, best_d, best);
        for (x, a) in diff.iter_mut().zip(add.iter()) {
            *x -= a;
        }
    }
}

/// Nearest-neighbor decoding in `X`: rounds `x̃ = H⁻¹·y` to the closest
/// message, scans that message's `k` nearest neighbors as well, and keeps
/// the candidate minimizing `‖H·x − y‖`.
///
/// Returns the intermediate `x̃` along with the decoded outcome.
pub fn nnx(
    model: &ChannelModel,
    c: &Constellation,
    y_obs: &[Complex64],
    k: usize,
    base: &NeighborList,
) -> Result<(Vec<Complex64>, DecodeOutcome), DecodeError> {
    if base.k() < k {
        return Err(DecodeError::NeighborListTooShort { have: base.k(), need: k });
    }
    let x_tilde = model.apply_inverse(y_obs);
    let center = nearest_in_x(c, &x_tilde);
    let mut best_rss = hx_dist_sqr(model.h(), c, &center, y_obs);
    let mut best = center.clone();
    for idx in 0..k {
        let cand = neighbors_of(&center, base, idx);
        let rss = hx_dist_sqr(model.h(), c, &cand, y_obs);
        if rss < best_rss {
            best_rss = rss;
            best = cand;
        }
    }
    Ok((x_tilde, outcome_from_rss(model, best, best_rss)))
}

/// Minimal nearest-neighbor decode used when a randomized decoder cannot
/// produce any candidate: the rounded `H⁻¹·y` plus, where one exists, its
/// single nearest neighbor.
pub(crate) fn fallback_nnx_k1(
    model: &ChannelModel,
    c: &Constellation,
    y_obs: &[Complex64],
) -> DecodeOutcome {
    let x_tilde = model.apply_inverse(y_obs);
    let center = nearest_in_x(c, &x_tilde);
    let mut best_rss = hx_dist_sqr(model.h(), c, &center, y_obs);
    let mut best = center.clone();
    if let Ok(base) = build_base_neighbor_list(c, model.n(), 1) {
        let cand = neighbors_of(&center, &base, 0);
        let rss = hx_dist_sqr(model.h(), c, &cand, y_obs);
        if rss < best_rss {
            best_rss = rss;
            best = cand;
        }
    }
    outcome_from_rss(model, best, best_rss)
}

/// One pass of the one-coordinate randomized decoder.
///
/// At the pivot coordinate `j` (the one with the least cumulative noise
/// amplification over the first `n−1` singular directions), each
/// constellation point is hypothesised in turn as the transmitted symbol.
/// A sampled guess of the mild noise components determines the dominant
/// component along `v_n`, which is subtracted from `H⁻¹·y` before rounding
/// to the message space. The hypothesis with the smallest residual wins.
pub fn rade1_search(
    model: &ChannelModel,
    c: &Constellation,
    y_obs: &[Complex64],
    rng: &mut SeededRng,
) -> Result<DecodeOutcome, DecodeError> {
    let n = model.n();
    let m = c.len();
    let j = model.j_rade1();
    let v = &model.svd().v;
    let vnj = v.get(j, n - 1);
    if vnj.norm() < RADE1_PIVOT_GUARD {
        return Err(DecodeError::DegeneratePivot { vnj_abs: vnj.norm() });
    }
    let sigma = model.sigma();
    let mild_dev = sigma * model.s_cum_first(n - 1, j);
    let x_tilde = model.apply_inverse(y_obs);

    let mut best: Option<(f64, Message)> = None;
    let mut indices = vec![0u16; n];
    for i in 0..m {
        let zhat = rng.complex_normal();
        let zn = (x_tilde[j] - c.point(i) - zhat * mild_dev) / vnj;
        for (row, slot) in indices.iter_mut().enumerate() {
            let val = x_tilde[row] - zn * v.get(row, n - 1);
            *slot = nearest_symbol(c, val) as u16;
        }
        let cand = Message::new(indices.clone());
        let rss = hx_dist_sqr(model.h(), c, &cand, y_obs);
        if best.as_ref().is_none_or(|(b, _)| rss < *b) {
            best = Some((rss, cand));
        }
    }
    let (rss, x) = best.expect("m >= 1");
    Ok(outcome_from_rss(model, x, rss))
}

/// Iterated one-coordinate randomized decoder: at least `min_iters` basic
/// searches keeping the smallest-residual outcome, then up to `max_iters`,
/// stopping as soon as the best confidence exceeds `chi_thresh`.
pub fn rade1_all(
    model: &ChannelModel,
    c: &Constellation,
    y_obs: &[Complex64],
    params: Rade1Params,
    rng: &mut SeededRng,
) -> Result<(DecodeOutcome, DecoderTrace), DecodeError> {
    params.validate()?;
    let mut best: Option<DecodeOutcome> = None;
    let mut used = 0;
    for t in 1..=params.max_iters {
        let outcome = rade1_search(model, c, y_obs, rng)?;
        if best.as_ref().is_none_or(|b| outcome.r < b.r) {
            best = Some(outcome);
        }
        used = t;
        if t >= params.min_iters && best.as_ref().is_some_and(|b| b.chi > params.chi_thresh) {
            break;
        }
    }
    let trace = DecoderTrace { iterations_used: used, ..Default::default() };
    Ok((best.expect("max_iters >= 1"), trace))
}

/// One pass of the two-coordinate randomized decoder.
///
/// Two pivot coordinates are hypothesised jointly (`m²` pairs). For each
/// pair, the mild noise components are sampled, the two dominant
/// components along `v_{n−1}`, `v_n` are solved from a 2×2 linear system,
/// and pairs whose reconstructed components are implausible under χ²(4)
/// (tail probability below `chi_stop`) are skipped before the expensive
/// rounding step. If every pair is skipped or singular, falls back to a
/// k = 1 nearest-neighbor decode and flags it in the trace.
pub fn rade2_search(
    model: &ChannelModel,
    c: &Constellation,
    y_obs: &[Complex64],
    chi_stop: f64,
    rng: &mut SeededRng,
) -> Result<(DecodeOutcome, DecoderTrace), DecodeError> {
    let n = model.n();
    if n < 3 {
        return Err(DecodeError::DimensionTooSmall { n, min: 3 });
    }
    let m = c.len();
    let (j1, j2) = model.rade2_pivots().expect("n >= 3 has pivots");
    let v = &model.svd().v;
    let sv = &model.svd().singular_values;
    let sigma = model.sigma();

    let a11 = v.get(j1, n - 2) * (sigma / sv[n - 2]);
    let a12 = v.get(j1, n - 1) * (sigma / sv[n - 1]);
    let a21 = v.get(j2, n - 2) * (sigma / sv[n - 2]);
    let a22 = v.get(j2, n - 1) * (sigma / sv[n - 1]);

    // Per mild direction k: σ/σ_k and the two pivot rows of v_k.
    let mild: Vec<(f64, Complex64, Complex64)> = (0..n - 2)
        .map(|k| (sigma / sv[k], v.get(j1, k), v.get(j2, k)))
        .collect();

    let x_tilde = model.apply_inverse(y_obs);
    let mut best: Option<(f64, Message)> = None;
    let mut pairs_skipped = 0u64;
    let mut indices = vec![0u16; n];
    for i1 in 0..m {
        for i2 in 0..m {
            let mut u_hat = Complex64::ZERO;
            let mut w_hat = Complex64::ZERO;
            for &(fac, vj1, vj2) in &mild {
                let z = rng.complex_normal();
                u_hat += z * fac * vj1;
                w_hat += z * fac * vj2;
            }
            let rhs1 = x_tilde[j1] - c.point(i1) - u_hat;
            let rhs2 = x_tilde[j2] - c.point(i2) - w_hat;
            let (zn1, zn) = match solve_2x2(a11, a12, a21, a22, rhs1, rhs2) {
                Ok(sol) => sol,
                Err(_) => {
                    pairs_skipped += 1;
                    continue;
                }
            };
            let r_pair = zn1.norm_sqr() + zn.norm_sqr();
            if !r_pair.is_finite() {
                pairs_skipped += 1;
                continue;
            }
            let chi_pair = 1.0 - chi2_cdf_even(4, r_pair).expect("finite non-negative");
            if chi_pair < chi_stop {
                pairs_skipped += 1;
                continue;
            }
            let f1 = zn1 * (sigma / sv[n - 2]);
            let f2 = zn * (sigma / sv[n - 1]);
            for (row, slot) in indices.iter_mut().enumerate() {
                let val = x_tilde[row] - f1 * v.get(row, n - 2) - f2 * v.get(row, n - 1);
                *slot = nearest_symbol(c, val) as u16;
            }
            let cand = Message::new(indices.clone());
            let rss = hx_dist_sqr(model.h(), c, &cand, y_obs);
            if best.as_ref().is_none_or(|(b, _)| rss < *b) {
                best = Some((rss, cand));
            }
        }
    }

    match best {
        Some((rss, x)) => Ok((
            outcome_from_rss(model, x, rss),
            DecoderTrace { iterations_used: 1, pairs_skipped, fallback_used: false },
        )),
        None => Ok((
            fallback_nnx_k1(model, c, y_obs),
            DecoderTrace { iterations_used: 1, pairs_skipped, fallback_used: true },
        )),
    }
}

/// Iterated two-coordinate randomized decoder; same iterate / keep the
/// minimum residual / early-stop contract as [`rade1_all`].
pub fn rade2_all(
    model: &ChannelModel,
    c: &Constellation,
    y_obs: &[Complex64],
    params: Rade2Params,
    rng: &mut SeededRng,
) -> Result<(DecodeOutcome, DecoderTrace), DecodeError> {
    params.validate()?;
    let mut best: Option<DecodeOutcome> = None;
    let mut trace = DecoderTrace::default();
    for t in 1..=params.max_iters {
        let (outcome, step) = rade2_search(model, c, y_obs, params.chi_stop, rng)?;
        trace.pairs_skipped += step.pairs_skipped;
        trace.fallback_used |= step.fallback_used;
        if best.as_ref().is_none_or(|b| outcome.r < b.r) {
            best = Some(outcome);
        }
        trace.iterations_used = t;
        if t >= params.min_iters && best.as_ref().is_some_and(|b| b.chi > params.chi_thresh) {
            break;
        }
    }
    Ok((best.expect("max_iters >= 1"), trace))
}

/// Improves a candidate by scanning its `k1` nearest neighbors in `X` and
/// keeping the one with the smallest residual, if any beats the seed. The
/// residual never increases.
///
/// Neighbors differing from the seed in exactly one coordinate are scored
/// in `O(n)` by updating the seed's residual vector; other neighbors cost
/// a full `O(n²)` evaluation.
pub fn supercharge(
    model: &ChannelModel,
    c: &Constellation,
    y_obs: &[Complex64],
    k1: usize,
    base: &NeighborList,
    seed: &DecodeOutcome,
) -> Result<DecodeOutcome, DecodeError> {
    supercharge_impl(model, c, y_obs, k1, base, seed, false)
}

fn supercharge_impl(
    model: &ChannelModel,
    c: &Constellation,
    y_obs: &[Complex64],
    k1: usize,
    base: &NeighborList,
    seed: &DecodeOutcome,
    force_generic: bool,
) -> Result<DecodeOutcome, DecodeError> {
    if k1 == 0 {
        return Err(DecodeError::InvalidParams("k1 must be >= 1"));
    }
    if base.k() < k1 {
        return Err(DecodeError::NeighborListTooShort { have: base.k(), need: k1 });
    }
    let n = model.n();
    let h = model.h();

    // Residual vector of the seed: w = y − H·x.
    let seed_vec = seed.x.to_vector(c);
    let hx = h.mat_vec(&seed_vec);
    let w_seed: Vec<Complex64> = y_obs.iter().zip(hx.iter()).map(|(y, v)| y - v).collect();
    let seed_rss = crate::linalg::norm_sqr(&w_seed);

    let mut best: Option<(f64, Message)> = None;
    for idx in 0..k1 {
        let desc = base.offsets(idx);
        let single = (!force_generic)
            .then(|| {
                let mut nz = desc.iter().enumerate().filter(|(_, &t)| t != 0);
                match (nz.next(), nz.next()) {
                    (Some((coord, _)), None) => Some(coord),
                    _ => None,
                }
            })
            .flatten();
        let cand = neighbors_of(&seed.x, base, idx);
        let rss = match single {
            Some(coord) => {
                let delta = c.point(cand.indices[coord] as usize)
                    - c.point(seed.x.indices[coord] as usize);
                let mut acc = 0.0;
                for r in 0..n {
                    acc += (w_seed[r] - h.get(r, coord) * delta).norm_sqr();
                }
                acc
            }
            None => hx_dist_sqr(h, c, &cand, y_obs),
        };
        if best.as_ref().is_none_or(|(b, _)| rss < *b) {
            best = Some((rss, cand));
        }
    }

    match best {
        // Re-evaluate the winner from scratch before accepting it, so the
        // returned residual is exact and never exceeds the seed's.
        Some((_, cand)) => {
            let fresh = hx_dist_sqr(h, c, &cand, y_obs);
            if fresh < seed_rss {
                Ok(outcome_from_rss(model, cand, fresh))
            } else {
                Ok(seed.clone())
            }
        }
        None => Ok(seed.clone()),
    }
}
