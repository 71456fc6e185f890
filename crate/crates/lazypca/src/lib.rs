//! Bayesian restoration of quantized gray-level images, comparing the
//! sequential systematic Gibbs sampler with a parallel lazy probabilistic
//! cellular automaton (PCA).
//!
//! The pieces:
//!
//! - [`image`]/[`lattice`]/[`rng`]: level-index images on a column-major
//!   lattice with free-boundary Moore-8 neighborhoods, and counter-based
//!   random streams that make every run reproducible at any thread count.
//! - [`model`]: the ferromagnetic pair prior, Gaussian noise model, annealing
//!   schedule, and the per-site score kernel shared by both samplers.
//! - [`samplers`]: annealed Gibbs sweeps and lazy-PCA steps plus the chain
//!   driver.
//! - [`synthesis`]: MRF test-image generation and Gaussian degradation.
//! - [`metrics`]: MSE / PSNR / SSIM.
//! - [`oracle`]: exact enumeration of posteriors, transition matrices, and
//!   stationary measures on tiny instances, backing the test suite.
//! - [`sidecar`]/[`pgm`]: the on-disk formats (binary PGM plus a JSON
//!   provenance sidecar).
//! - [`config`]/[`cli`]: the `lazypca` command-line pipeline.

pub mod cli;
pub mod config;
pub mod image;
pub mod lattice;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod pgm;
pub mod rng;
pub mod samplers;
pub mod sidecar;
pub mod synthesis;

pub use image::{luminance, LevelImage};
pub use lattice::{from_linear, to_linear, Neighborhood};
pub use metrics::MetricsReport;
pub use model::{AnnealSchedule, NoiseModel, PcaParams, PriorParams};
pub use samplers::{run_chain, ChainState, Method, TransitionRecord};
pub use synthesis::MrfGenSpec;
