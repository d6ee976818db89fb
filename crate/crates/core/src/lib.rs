//! Photon-to-spin teleportation simulator.
//!
//! The physics modules are generic over the scalar type; the aliases below fix it to `f64`
//! or `f32`. Experiment orchestration in [`protocol`] and event handling in [`tagstream`]
//! work in `f64`.

pub mod error;
pub mod interference;
pub mod montecarlo;
pub mod protocol;
pub mod qcore;
pub mod quad;
pub mod scalar;
pub mod source;
pub mod spin;
pub mod tagstream;

pub use error::{Error, Result};
pub use scalar::Real;

pub type StateVector64 = qcore::StateVector<f64>;
pub type DensityOperator64 = qcore::DensityOperator<f64>;
pub type OperatorMatrix64 = qcore::OperatorMatrix<f64>;
pub type TemporalMode64 = source::TemporalMode<f64>;
pub type PhotonicQubit64 = source::PhotonicQubit<f64>;
pub type EntangledPairState64 = source::EntangledPairState<f64>;
pub type SpinDensity64 = spin::SpinDensity<f64>;
pub type PulseSchedule64 = spin::PulseSchedule<f64>;
pub type TwoPhotonState64 = interference::TwoPhotonState<f64>;
pub type DistinguishabilityModel64 = interference::DistinguishabilityModel<f64>;

pub type StateVector32 = qcore::StateVector<f32>;
pub type DensityOperator32 = qcore::DensityOperator<f32>;
pub type OperatorMatrix32 = qcore::OperatorMatrix<f32>;
pub type TemporalMode32 = source::TemporalMode<f32>;
pub type PhotonicQubit32 = source::PhotonicQubit<f32>;
pub type EntangledPairState32 = source::EntangledPairState<f32>;
pub type SpinDensity32 = spin::SpinDensity<f32>;
pub type PulseSchedule32 = spin::PulseSchedule<f32>;
pub type TwoPhotonState32 = interference::TwoPhotonState<f32>;
pub type DistinguishabilityModel32 = interference::DistinguishabilityModel<f32>;
