//! Path-integral feature attributions and pairwise interactions for dense
//! feed-forward networks.
//!
//! * [`network`] and [`train`]: the model being explained.
//! * [`attribution`]: Integrated Gradients and Expected Gradients.
//! * [`interaction`]: Integrated Hessians and Expected Hessians.
//! * [`rivals`]: input Hessian, Shapley Interaction Index, Neural Interaction Detection.
//! * [`benchlab`]: synthetic tasks, remove-and-retrain, rank correlation and timing studies.

pub mod activation;
pub mod attribution;
pub mod error;
pub mod interaction;
pub mod model;
pub mod network;
pub mod benchlab;
pub mod data;
mod parallel;
pub mod quadrature;
pub mod rivals;
pub mod seed;
pub mod train;

pub use activation::Activation;
pub use attribution::{
    completeness_residual, expected_gradients, integrated_gradients, AttributionVector, Background,
    BaselinePolicy, ExplainMeta, PathSampling,
};
pub use error::{Error, Result};
pub use interaction::{
    expected_hessians, integrated_hessians, integrated_hessians_total,
    interaction_completeness_residual, main_effect_residual, InteractionMatrix,
};
pub use model::{ScalarModel, SecondOrder, WeightedSum};
pub use network::{DenseNetwork, Layer};
pub use quadrature::{QuadratureSpec, RiemannRule};
pub use rivals::{
    input_hessian, neural_interaction_detection, sii_exact, sii_monte_carlo, CoalitionGame,
    NidAggregation, RankedPair,
};
pub use train::{fit, train, Loss, LrSchedule, Optimizer, TrainConfig, TrainReport};
