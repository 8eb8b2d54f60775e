//! Simulation and phase-sweep localization for a multi-antenna BS, three
//! passive RIS panels and a single-antenna MS.
//!
//! * [`geometry`]: positions, path loss, trilateration.
//! * [`channel`]: steering vectors, link matrices, RIS gain sums, reception.
//! * [`scene`]: scenario presets and link resolution.
//! * [`sim`]: measurement-log synthesis.
//! * [`localizer`]: the estimator.
//! * [`harness`]: Monte Carlo experiments.

pub mod channel;
pub mod geometry;
pub mod harness;
pub mod localizer;
pub mod scene;
pub mod sim;

pub use channel::{ComplexSample, LinkParams, PhaseProfile, SceneLinks};
pub use geometry::{Position2, Position3, ScenarioGeometry};
pub use localizer::{EstimatorKnowledge, LocalizationResult, MeasurementLog, SlotConfig};
pub use scene::{AngleMode, ArrayAxes, ExplicitAngles, Scene};
