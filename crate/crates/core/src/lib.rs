//! Robust learning and testing of discrete distributions when users send
//! channel-constrained messages and an adversary may rewrite a fraction of
//! them.
//!
//! The pipeline is `source -> channel -> attack -> server`:
//!
//! * [`dist`] and [`emd`]: distributions over `[k]`, divergences, the Paninski
//!   family, seeded sampling and exact small-instance earth-mover distance.
//! * [`channels`]: row-stochastic message channels (identity, random hashing,
//!   domain compression, k-ary randomized response) and the channel
//!   information matrix.
//! * [`adversary`]: budgeted manipulation attacks, including the maximal
//!   coupling attack.
//! * [`estimation`]: the empirical and random-hashing learners.
//! * [`testing`]: robust uniformity, identity and compressed identity testers.
//! * [`bounds`]: minimax rate formulas and lower-bound diagnostics.
//!
//! Symbols are 0-based throughout: an alphabet of size `k` is `0..k`.
//!
//! Numeric code is generic over [`Real`] (implemented for `f32` and `f64`);
//! the hashing estimator's arithmetic is also available over any exact
//! [`Field`] such as rationals. The `*F64` aliases below name the common
//! instantiations.

pub mod adversary;
pub mod bounds;
pub mod channels;
pub mod dist;
pub mod emd;
pub mod error;
pub mod estimation;
pub mod rng;
pub mod scalar;
pub mod testing;

pub use error::{Error, Result};
pub use rng::Seed;
pub use scalar::{Field, Real};

pub type DistributionF64 = dist::Distribution<f64>;
pub type DistributionF32 = dist::Distribution<f32>;
pub type ChannelF64 = channels::Channel<f64>;
pub type ChannelInfoMatrixF64 = channels::ChannelInfoMatrix<f64>;
pub type FiniteJointF64 = emd::FiniteJoint<f64>;
pub type CouplingPlanF64 = adversary::CouplingPlan<f64>;
pub type EstimateReportF64 = estimation::EstimateReport<f64>;
pub type UniformityTesterF64 = testing::UniformityTester<f64>;
pub type TesterConfigF64 = testing::TesterConfig<f64>;
pub type TestVerdictF64 = testing::TestVerdict<f64>;
pub type GoldreichMapF64 = testing::GoldreichMap<f64>;
