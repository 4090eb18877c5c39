//! Archetype-aware predictive autoscaling.
//!
//! The crate is organised as a pipeline:
//!
//! * [`trace`] ingests per-minute invocation traces (or generates synthetic
//!   ones) and slices them into overlapping windows.
//! * [`features`] turns a window into a 37-dimensional feature vector.
//! * [`weaklabel`] applies ten labeling functions and majority-votes an
//!   archetype with an agreement-based confidence.
//! * [`classifier`] trains a histogram gradient-boosted tree ensemble on the
//!   weak labels and calibrates it with beta calibration.
//! * [`autoscaler`] hosts the reactive HPA, the Holt-Winters predictive
//!   baseline and the archetype-aware policy.
//! * [`simulator`] replays a trace against a strategy in a deterministic
//!   discrete-event pod cluster.
//! * [`metrics`] scores simulation logs, computes the Resource Efficiency
//!   Index and runs Wilcoxon signed-rank tests.
//! * [`experiment`] wires everything into the generate / label / train /
//!   simulate / compare commands.

pub mod autoscaler;
pub mod classifier;
pub mod error;
pub mod experiment;
pub mod features;
pub mod metrics;
pub mod simulator;
pub mod trace;
pub mod weaklabel;

pub use autoscaler::{
    adjust_for_uncertainty, AdjustedParams, ClusterObservation, ScalingDecision, ScalingMode,
    ScalingStrategy, StrategyKind, StrategyParams,
};
pub use classifier::{BetaCalibrator, ModelBundle, Prediction, TreeEnsembleModel};
pub use error::{Error, Result};
pub use features::{compute_features, feature_names, FeatureVector, NUM_FEATURES};
pub use metrics::{MetricsReport, ReiScore, ReiWeights};
pub use simulator::{run_simulation, SimConfig, SimulationLog};
pub use trace::{SyntheticSpec, Window, WorkloadTrace};
pub use weaklabel::{Archetype, WeakLabel};
