//! Decoding of digital messages sent over a noisy Gaussian MIMO channel.
//!
//! A transmitted message is a vector of constellation symbols `x` in
//! `X = C^n`; the receiver observes `y = H·x + σ·z` where `H` is a known
//! complex channel matrix and `z` is complex Gaussian noise. This crate
//! provides several schemes that recover the maximum-likelihood message
//! (the `x` minimizing `‖H·x − y‖`):
//!
//! * [`decoders::brute`]: exhaustive search over `X`, exact but slow;
//! * [`decoders::nnx`]: nearest-neighbor search around `H⁻¹·y` in `X`;
//! * [`decoders::rade1_all`] / [`decoders::rade2_all`]: randomized
//!   decoders that guess one (resp. two) coordinates of the message at a
//!   well-chosen index, reconstruct the dominant noise component(s) along
//!   the weakest singular direction(s) of `H`, subtract them and round;
//! * [`decoders::supercharge`]: post-hoc improvement of any candidate by
//!   scanning its `k₁` nearest neighbors in `X`.
//!
//! The [`harness`] module drives seeded Monte-Carlo experiments that
//! measure success rates and timings of the schemes, and serializes the
//! results as JSON/CSV reports.

pub mod channel;
pub mod chi2;
pub mod decoders;
pub mod harness;
pub mod linalg;
pub mod neighbors;
pub mod rng;

pub use channel::{
    generate_channel, precompute, residual_stat, sample_message, transmit, ChannelError,
    ChannelModel, Constellation, DecodeOutcome, Message,
};
pub use chi2::chi2_cdf_even;
pub use decoders::{
    brute, nnx, rade1_all, rade1_search, rade2_all, rade2_search, supercharge, DecodeError,
    DecoderTrace, Rade1Params, Rade2Params,
};
pub use linalg::{solve_2x2, svd, ComplexMatrix, LinalgError, SvdFactors};
pub use neighbors::{
    build_base_neighbor_list, nearest_in_x, neighbors_of, NeighborError, NeighborList,
};
pub use rng::SeededRng;
