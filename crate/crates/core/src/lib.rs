//! Hybrid holographic beamforming and QoS-constrained user scheduling for
//! reconfigurable holographic surface (RHS) downlinks.
//!
//! The core math is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod harness;
pub mod holo_opt;
pub mod linalg;
pub mod precoder;
pub mod scalar;
pub mod scheduler;
pub mod surface;

pub use channel::{array_response, generate_channel, ArrayGeometry, ArrayNormalization, ChannelSet, PathRealization};
pub use error::{Error, Result};
pub use holo_opt::{optimize_weights, GradientWorkspace, OptimizedWeights, OptimizerSettings};
pub use precoder::{per_user_rates, per_user_sinr, zero_forcing, DigitalBeamformer};
pub use scalar::{Cplx, Real};
pub use scheduler::{
    greedy_schedule, joint_inner_update, AdmissionRule, JointSolution, ScheduleVector, SchedulerSettings,
};
pub use surface::{build_phase_matrix, effective_surface, HolographicWeights, PhaseMatrix, SurfaceGeometry};

pub type Complex64 = Cplx<f64>;
pub type ArrayGeometry64 = ArrayGeometry<f64>;
pub type ChannelSet64 = ChannelSet<f64>;
pub type PhaseMatrix64 = PhaseMatrix<f64>;
pub type HolographicWeights64 = HolographicWeights<f64>;
pub type DigitalBeamformer64 = DigitalBeamformer<f64>;
pub type JointSolution64 = JointSolution<f64>;
