//! Football match annotation quality pipeline.
//!
//! Two halves share one crate:
//!
//! * **Activity recognition**: raw inertial-sensor files are parsed and
//!   aligned to match time ([`sensor`]), cut into fixed windows and reduced
//!   to 26 statistics per signal ([`features`]), filtered by a chi-squared
//!   ranking and classified with a random forest ([`forest`]). The
//!   [`eval`] module runs leave-one-subject-out evaluation.
//! * **Annotation error detection**: episodes and predicted activities are
//!   stored ([`store`]), grouped into temporal entries and mined for
//!   association rules ([`mining`]), and the rules are replayed against new
//!   annotations to raise warnings for a human reviewer ([`detect`]).
//!
//! [`pipeline`] strings the stages together for the command line and the
//! HTTP service.

pub mod detect;
pub mod error;
pub mod eval;
pub mod features;
pub mod forest;
pub mod mining;
pub mod pipeline;
pub mod sensor;
pub mod store;
pub mod synth;
mod util;

pub use util::natural_cmp;

pub use detect::{Thresholds, Warning, WarningState};
pub use error::{Error, Result};
pub use features::{FeatureSelection, FeatureVector, SignalWindow, WindowRef};
pub use forest::{ActivityPrediction, Classifier, ForestModel, ForestParams};
pub use mining::{AssociationRule, Entry, Itemset, Level, RuleOrigin, Scope};
pub use sensor::{Axis, Channel, DeviceConfig, PeriodClock, SensorKind, SensorReading, SignalId};
pub use store::{ActivityLabelRow, Episode, EventRow, LabelSource, MatchMeta, Store};
