//! Corona decompositions of one-dimensional intrinsic Lipschitz graphs.

pub mod curve;
pub mod dyadic;
pub mod euclidean;
pub mod lift;
pub mod pipeline;
pub mod reparam;
pub mod rescale;

pub use curve::{LiftedCurve, PiecewiseLinear};
pub use dyadic::{carleson_sum, DyadicInterval};
pub use euclidean::{
    boundary_match, check_approximation, euclidean_corona, matched_corona, Coronization, EuclideanApprox, Tree,
};
pub use lift::{lift_tree, verify_intrinsic_approx, Correction, IntrinsicCheck, SampleRecord, TreeApprox};
pub use pipeline::{corona_pipeline, summarize, CoronaJson, CoronaReport, CoronaRun};
pub use reparam::{reparameterize_over_vl, ReparamGraph};
pub use rescale::{rescale_n, Direction};
