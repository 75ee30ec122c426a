//! Chaotic X-ray pulse synthesis and stochastic density-matrix dynamics
//! of Auger resonances.

pub mod analysis;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod noise;
pub mod pulse;
pub mod stats;

pub use analysis::{Curve, CurveFeatures, LorentzianFit, Observable};
pub use dynamics::{DensityState, DriveTemplate, DriveTraces, Levels, SystemSpec, TimeGrid};
pub use ensemble::{
    DriveRecipe, EnsembleConfig, FieldNoise, PointResult, ScanPoint, ScanResult, ScanSpec,
    ScanVariable,
};
pub use error::{FelError, Result};
pub use noise::{ColoredNoise, FrequencyGrid, NoiseTrace, PsdKind, PsdSpec};
pub use pulse::{Envelope, Profile2, StochasticPulse};
