//! Grand tour engine with the "burning sage" radial transformation.
//!
//! Projections of high-dimensional data crowd toward the centre. This crate
//! runs a grand tour (a smooth sequence of random 2-D projections) and
//! remaps each projected radius so that equal volume in the original space
//! occupies equal area on screen.
//!
//! * [`dataset`]: CSV ingestion, scaling, PCA, uniform-ball samples
//! * [`tour`]: random planes and geodesic interpolation
//! * [`sage`]: the radial transformation and its parameters
//! * [`diagnostics`]: K–S uniformity, curve tables, hexbin grids
//! * [`pipeline`] / [`render`]: frame production, export, SVG output
//! * [`protocol`] / [`server`]: live WebSocket sessions
//! * [`cli`]: the `sagetour` command

pub mod cli;
pub mod dataset;
pub mod diagnostics;
pub mod pipeline;
pub mod protocol;
pub mod render;
pub mod sage;
pub mod server;
pub mod tour;

pub use dataset::Dataset;
pub use pipeline::{ProjectedFrame, TourRun};
pub use sage::SageParams;
pub use tour::Frame;
