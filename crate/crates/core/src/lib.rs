//! Simultaneous input and state set-valued observers for polytopic linear
//! parameter-varying systems with unknown inputs and bounded noise.

use openblas_src as _;

pub mod decouple;
pub mod detect;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod observer;
pub mod synthesize;

pub use decouple::{decouple, decouple_unchecked, DecoupledModel};
pub use detect::{existence_report, DetectOptions, DetectabilityReport};
pub use error::{Error, Result};
pub use model::{Dims, LpvModel, ValidationReport, WeightVector};
pub use observer::{
    input_radius, state_radius, steady_state_radii, Observer, ObserverState, RadiusMode,
    SetEstimate, StepOutput,
};
pub use synthesize::{
    error_constants, lmi_block, synthesize_convergent, synthesize_hinf, verify_lmi,
    ErrorConstants, SynthesisCertificate, SynthesisMode, SynthesisOptions,
};
