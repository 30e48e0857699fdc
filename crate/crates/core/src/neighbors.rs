//! Nearest-neighbor machinery inside the product space `X = C^n`.
//!
//! Distances in `X` decompose per coordinate, so the nearest message to a
//! point is found by `n` one-dimensional searches. For PSK constellations
//! `X` is also rotation-symmetric: the `k` nearest neighbors of the base
//! message `x₀ = (1,…,1)` are precomputed once, and the neighbor list of
//! any other message follows by coordinate-wise symbol-index shifts.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::{self, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use thiserror::Error;

use crate::channel::{Constellation, Message};

#[derive(Debug, Error)]
pub enum NeighborError {
    #[error("k = {k} must satisfy 1 <= k < m^n = {space}")]
    KOutOfRange { k: usize, space: u128 },
    #[error("neighbor lists require an equispaced PSK constellation")]
    NotPsk,
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed neighbor cache: {0}")]
    BadFormat(String),
}

/// Relative tolerance under which two point-to-symbol distances are
/// considered tied and the smaller symbol index wins. Keeps tie-breaking
/// deterministic when mathematically equal distances differ in the last
/// floating-point digits.
const TIE_REL_TOL: f64 = 1e-12;

/// Index of the constellation point closest to `z` (smallest index wins
/// on ties).
pub fn nearest_symbol(c: &Constellation, z: Complex64) -> usize {
    let mut best = 0usize;
    let mut best_d = (z - c.point(0)).norm_sqr();
    for (i, &p) in c.points().iter().enumerate().skip(1) {
        let d = (z - p).norm_sqr();
        if d < best_d * (1.0 - TIE_REL_TOL) {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Nearest message to `v` in `X`, one coordinate at a time.
pub fn nearest_in_x(c: &Constellation, v: &[Complex64]) -> Message {
    Message::new(v.iter().map(|&z| nearest_symbol(c, z) as u16).collect())
}

/// The `k` nearest neighbors of the base message `x₀ = (1,…,1)` in `X`,
/// stored as per-coordinate symbol-index shifts plus the corresponding
/// distances (non-decreasing).
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborList {
    m: usize,
    n: usize,
    offsets: Vec<Vec<u16>>,
    distances: Vec<f64>,
}

impl NeighborList {
    pub fn k(&self) -> usize {
        self.offsets.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Shift descriptor of the `idx`-th neighbor (0-based).
    pub fn offsets(&self, idx: usize) -> &[u16] {
        &self.offsets[idx]
    }

    /// Distance of the `idx`-th neighbor from its base message.
    pub fn distance(&self, idx: usize) -> f64 {
        self.distances[idx]
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    /// Binary serialization; round-trips bit-exactly.
    pub fn save<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.m as u32).to_le_bytes())?;
        w.write_all(&(self.n as u32).to_le_bytes())?;
        w.write_all(&(self.k() as u64).to_le_bytes())?;
        for (desc, &dist) in self.offsets.iter().zip(self.distances.iter()) {
            for &t in desc {
                w.write_all(&t.to_le_bytes())?;
            }
            w.write_all(&dist.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load<R: Read>(mut r: R) -> Result<Self, NeighborError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(NeighborError::BadFormat("bad magic".into()));
        }
        let m = read_u32(&mut r)? as usize;
        let n = read_u32(&mut r)? as usize;
        let k = read_u64(&mut r)? as usize;
        if m == 0 || n == 0 {
            return Err(NeighborError::BadFormat("zero dimensions".into()));
        }
        let mut offsets = Vec::with_capacity(k);
        let mut distances = Vec::with_capacity(k);
        for _ in 0..k {
            let mut desc = Vec::with_capacity(n);
            for _ in 0..n {
                let mut b = [0u8; 2];
                r.read_exact(&mut b)?;
                let t = u16::from_le_bytes(b);
                if t as usize >= m {
                    return Err(NeighborError::BadFormat(format!("shift {t} >= m = {m}")));
                }
                desc.push(t);
            }
            offsets.push(desc);
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            distances.push(f64::from_le_bytes(b));
        }
        Ok(Self { m, n, offsets, distances })
    }

    pub fn save_to_path(&self, path: &Path) -> io::Result<()> {
        let f = std::fs::File::create(path)?;
        self.save(io::BufWriter::new(f))
    }

    pub fn load_from_path(path: &Path) -> Result<Self, NeighborError> {
        let f = std::fs::File::open(path)?;
        Self::load(io::BufReader::new(f))
    }
}

const MAGIC: &[u8; 8] = b"NNXLIST1";

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Search state: per-coordinate indices into the cost-sorted shift table,
/// ordered by (distance², lexicographic shift descriptor).
struct FrontierState {
    cost: f64,
    desc: Vec<u16>,
    opts: Vec<u16>,
    last_nonzero: usize,
}

impl PartialEq for FrontierState {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for FrontierState {}

impl PartialOrd for FrontierState {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for FrontierState {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cost.total_cmp(&other.cost).then_with(|| self.desc.cmp(&other.desc))
    }
}

/// Builds the `k`-nearest-neighbor list of `x₀` by a lazy best-first
/// frontier over shift space.
///
/// Per coordinate, the candidate shifts are sorted by their squared
/// distance `|c_t − c_0|²` (only ⌈m/2⌉ distinct values exist for PSK); a
/// state advances one coordinate at a time under a unique-predecessor rule
/// so each descriptor is visited exactly once and in order of
/// (distance, lexicographic descriptor). The cost of enumerating the `k`
/// closest of the `m^n − 1` candidates is `O(k·n·log(k·n))`.
pub fn build_base_neighbor_list(
    c: &Constellation,
    n: usize,
    k: usize,
) -> Result<NeighborList, NeighborError> {
    if !c.is_psk() {
        return Err(NeighborError::NotPsk);
    }
    let m = c.len();
    let space = (m as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if k == 0 || n == 0 || (k as u128) >= space {
        return Err(NeighborError::KOutOfRange { k, space });
    }

    // Squared distance of each shift from the base symbol, and the shift
    // values re-sorted by (distance, shift).
    let dist2: Vec<f64> = (0..m).map(|t| base_shift_distance_sqr(c, t)).collect();
    let mut option_shift: Vec<u16> = (0..m as u16).collect();
    option_shift.sort_by(|&a, &b| {
        dist2[a as usize].total_cmp(&dist2[b as usize]).then(a.cmp(&b))
    });

    // Descriptor cost, always accumulated in coordinate order so equal
    // descriptors give bit-identical sums everywhere.
    let cost_of = |desc: &[u16]| -> f64 { desc.iter().map(|&t| dist2[t as usize]).sum() };

    let mut heap: BinaryHeap<std::cmp::Reverse<FrontierState>> = BinaryHeap::new();
    heap.push(std::cmp::Reverse(FrontierState {
        cost: 0.0,
        desc: vec![0; n],
        opts: vec![0; n],
        last_nonzero: 0,
    }));

    let mut offsets = Vec::with_capacity(k);
    let mut distances = Vec::with_capacity(k);
    while let Some(std::cmp::Reverse(state)) = heap.pop() {
        let is_base = state.opts.iter().all(|&o| o == 0);
        if !is_base {
            offsets.push(state.desc.clone());
            distances.push(state.cost.sqrt());
            if offsets.len() == k {
                break;
            }
        }
        for j in state.last_nonzero..n {
            let next_opt = state.opts[j] as usize + 1;
            if next_opt < m {
                let mut opts = state.opts.clone();
                opts[j] = next_opt as u16;
                let mut desc = state.desc.clone();
                desc[j] = option_shift[next_opt];
                let cost = cost_of(&desc);
                heap.push(std::cmp::Reverse(FrontierState {
                    cost,
                    desc,
                    opts,
                    last_nonzero: j,
                }));
            }
        }
    }
    debug_assert_eq!(offsets.len(), k);

    Ok(NeighborList { m, n, offsets, distances })
}

/// Canonical squared distance between a symbol and the same symbol shifted
/// by `t` index steps, evaluated from the shift class `min(t, m−t)` so
/// mirror shifts agree bit-for-bit. Neighbor-list construction and any
/// oracle re-deriving a list must use this shared table for distances to
/// order identically.
pub fn base_shift_distance_sqr(c: &Constellation, t: usize) -> f64 {
    let m = c.len();
    let s = if t == 0 { 0 } else { t.min(m - t) };
    (c.point(s) - c.point(0)).norm_sqr()
}

/// The `idx`-th (0-based) nearest neighbor of `x`, computed in `O(n)` by
/// composing symbol-index shifts modulo `m`. Only valid for the PSK
/// constellation the list was built for.
pub fn neighbors_of(x: &Message, base: &NeighborList, idx: usize) -> Message {
    let m = base.m as u32;
    let desc = &base.offsets[idx];
    debug_assert_eq!(x.indices.len(), desc.len());
    Message::new(
        x.indices
            .iter()
            .zip(desc.iter())
            .map(|(&xi, &t)| {
                let s = xi as u32 + t as u32;
                (if s >= m { s - m } else { s }) as u16
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dist_sqr;
    use crate::rng::SeededRng;
    use std::f64::consts::PI;

    /// Exhaustive oracle: every message of `X` except the base, sorted by
    /// (distance², lexicographic descriptor) with the same per-coordinate
    /// cost table and summation order as the frontier search.
    fn brute_force_list(c: &Constellation, n: usize, k: usize) -> NeighborList {
        let m = c.len();
        let dist2: Vec<f64> = (0..m).map(|t| base_shift_distance_sqr(c, t)).collect();
        let total = (m as u64).pow(n as u32);
        let mut all: Vec<(f64, Vec<u16>)> = Vec::with_capacity(total as usize - 1);
        for code in 1..total {
            let mut rem = code;
            let mut desc = vec![0u16; n];
            for j in (0..n).rev() {
                desc[j] = (rem % m as u64) as u16;
                rem /= m as u64;
            }
            let cost: f64 = desc.iter().map(|&t| dist2[t as usize]).sum();
            all.push((cost, desc));
        }
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all.truncate(k);
        NeighborList {
            m,
            n,
            offsets: all.iter().map(|(_, d)| d.clone()).collect(),
            distances: all.iter().map(|(c, _)| c.sqrt()).collect(),
        }
    }

    #[test]
    fn nearest_symbol_basic() {
        let c = Constellation::psk(8).unwrap();
        let got = nearest_symbol(&c, Complex64::new(0.9, 0.1));
        assert_eq!(got, 0);
        // Exact bisector between points 0 and 1: smallest index wins.
        let bisector = Complex64::new((PI / 8.0).cos(), (PI / 8.0).sin());
        assert_eq!(nearest_symbol(&c, bisector), 0);
    }

    #[test]
    fn nearest_in_x_fixes_lattice_points() {
        let c = Constellation::psk(8).unwrap();
        let mut rng = SeededRng::new(3);
        for _ in 0..50 {
            let msg = crate::channel::sample_message(&c, 5, &mut rng);
            let v = msg.to_vector(&c);
            assert_eq!(nearest_in_x(&c, &v), msg);
        }
    }

    #[test]
    fn single_coordinate_neighbors_at_equal_distance() {
        // For 8-PSK every message has 2n single-step neighbors, all at
        // distance 2·sin(π/8).
        let c = Constellation::psk(8).unwrap();
        for n in [2usize, 4, 8] {
            let base = build_base_neighbor_list(&c, n, 2 * n).unwrap();
            let expect = 2.0 * (PI / 8.0).sin();
            for idx in 0..2 * n {
                assert!((base.distance(idx) - expect).abs() < 1e-12);
                let nonzero: Vec<_> =
                    base.offsets(idx).iter().filter(|&&t| t != 0).collect();
                assert_eq!(nonzero.len(), 1);
                assert!(*nonzero[0] == 1 || *nonzero[0] == 7);
            }
        }
    }

    #[test]
    fn complete_enumeration_small_space() {
        let c = Constellation::psk(4).unwrap();
        let base = build_base_neighbor_list(&c, 2, 15).unwrap();
        assert_eq!(base.k(), 15);
        let mut seen: Vec<Vec<u16>> = base.offsets.clone();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 15);
        assert!(!seen.contains(&vec![0, 0]));
    }

    #[test]
    fn matches_brute_force_oracle() {
        for (m, n, k) in [
            (2usize, 4usize, 10usize),
            (3, 3, 20),
            (4, 2, 15),
            (8, 3, 100),
            (8, 3, 511),
            (16, 2, 200),
        ] {
            let c = Constellation::psk(m).unwrap();
            let got = build_base_neighbor_list(&c, n, k).unwrap();
            let expect = brute_force_list(&c, n, k);
            assert_eq!(got.offsets, expect.offsets, "m={m} n={n} k={k}");
            assert_eq!(got.distances, expect.distances);
        }
    }

    #[test]
    fn distances_non_decreasing_and_positive() {
        let c = Constellation::psk(8).unwrap();
        let base = build_base_neighbor_list(&c, 4, 500).unwrap();
        assert!(base.distance(0) > 0.0);
        for w in base.distances().windows(2) {
            assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn distance_depends_only_on_shift_multiset() {
        let c = Constellation::psk(8).unwrap();
        let base = build_base_neighbor_list(&c, 4, 1000).unwrap();
        use std::collections::HashMap;
        let mut by_multiset: HashMap<Vec<u16>, f64> = HashMap::new();
        for idx in 0..base.k() {
            // shift class = min(t, m−t)
            let mut classes: Vec<u16> = base
                .offsets(idx)
                .iter()
                .map(|&t| if t == 0 { 0 } else { t.min(8 - t) })
                .collect();
            classes.sort_unstable();
            let d = base.distance(idx);
            let entry = by_multiset.entry(classes).or_insert(d);
            assert!((*entry - d).abs() < 1e-9, "same multiset, different distance");
        }
    }

    #[test]
    fn k_out_of_range_rejected() {
        let c = Constellation::psk(4).unwrap();
        assert!(matches!(
            build_base_neighbor_list(&c, 2, 16),
            Err(NeighborError::KOutOfRange { .. })
        ));
        assert!(matches!(
            build_base_neighbor_list(&c, 2, 0),
            Err(NeighborError::KOutOfRange { .. })
        ));
        let non_psk = Constellation::from_points(vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
        ])
        .unwrap();
        assert!(matches!(
            build_base_neighbor_list(&non_psk, 2, 1),
            Err(NeighborError::NotPsk)
        ));
    }

    #[test]
    fn rotation_reproduces_base_list() {
        let c = Constellation::psk(8).unwrap();
        let base = build_base_neighbor_list(&c, 3, 25).unwrap();
        let x0 = Message::new(vec![0, 0, 0]);
        for idx in 0..base.k() {
            assert_eq!(neighbors_of(&x0, &base, idx).indices, base.offsets(idx));
        }
    }

    #[test]
    fn rotation_is_isometric_and_injective() {
        let c = Constellation::psk(8).unwrap();
        let base = build_base_neighbor_list(&c, 4, 60).unwrap();
        let mut rng = SeededRng::new(8);
        for _ in 0..20 {
            let x = crate::channel::sample_message(&c, 4, &mut rng);
            let xv = x.to_vector(&c);
            let mut seen = std::collections::HashSet::new();
            for idx in 0..base.k() {
                let nb = neighbors_of(&x, &base, idx);
                assert_ne!(nb, x);
                assert!(seen.insert(nb.clone()), "duplicate neighbor");
                let d = dist_sqr(&nb.to_vector(&c), &xv).sqrt();
                assert!((d - base.distance(idx)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rotated_list_matches_exhaustive_knn() {
        // For each x, the rotated list is exactly the k-NN list of x.
        let m = 8;
        let n = 2;
        let k = 20;
        let c = Constellation::psk(m).unwrap();
        let base = build_base_neighbor_list(&c, n, k).unwrap();
        let mut rng = SeededRng::new(9);
        for _ in 0..10 {
            let x = crate::channel::sample_message(&c, n, &mut rng);
            let xv = x.to_vector(&c);
            let mut all: Vec<(f64, Message)> = Vec::new();
            for a in 0..m as u16 {
                for b in 0..m as u16 {
                    let cand = Message::new(vec![a, b]);
                    if cand == x {
                        continue;
                    }
                    all.push((dist_sqr(&cand.to_vector(&c), &xv), cand));
                }
            }
            all.sort_by(|p, q| p.0.total_cmp(&q.0));
            let rotated: std::collections::HashSet<Message> =
                (0..k).map(|idx| neighbors_of(&x, &base, idx)).collect();
            // Compare as sets up to ties at the cutoff distance.
            let kth = all[k - 1].0;
            for (d, cand) in all.iter().take(k) {
                if *d < kth - 1e-9 {
                    assert!(rotated.contains(cand), "missing strict neighbor");
                }
            }
            for nb in &rotated {
                let d = dist_sqr(&nb.to_vector(&c), &xv);
                assert!(d <= kth + 1e-9, "rotated neighbor too far: {d} > {kth}");
            }
        }
    }

    #[test]
    fn cache_round_trip_bit_exact() {
        let c = Constellation::psk(8).unwrap();
        let base = build_base_neighbor_list(&c, 3, 77).unwrap();
        let mut buf = Vec::new();
        base.save(&mut buf).unwrap();
        let loaded = NeighborList::load(&buf[..]).unwrap();
        assert_eq!(base, loaded);
        let mut buf2 = Vec::new();
        loaded.save(&mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn cache_rejects_garbage() {
        assert!(NeighborList::load(&b"NOTALIST"[..]).is_err());
        let mut buf = Vec::new();
        build_base_neighbor_list(&Constellation::psk(4).unwrap(), 2, 3)
            .unwrap()
            .save(&mut buf)
            .unwrap();
        buf.truncate(buf.len() - 1);
        assert!(NeighborList::load(&buf[..]).is_err());
    }
}
