//! Turns word tiles scattered on a slate into a poem, and the poem into a
//! two-stage language-model exchange.
//!
//! - [`geometry`]: reading-order inference over detected tile poses
//! - [`session`]: settle detection, mode selection, submissions
//! - [`chain`]: prompt templates, chains, and completion backends
//! - [`sim`]: synthetic detections for tests and demos
//! - [`analytics`]: the interaction log and usage statistics
//!
//! Geometry and simulation are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the `f64` instantiation the rest of the crate uses.

pub mod analytics;
pub mod chain;
pub mod formats;
pub mod geometry;
pub mod mode;
pub mod scalar;
pub mod session;
pub mod sim;
pub mod vocabulary;

pub use chain::{run_chain, ChainResult, ChainSpecs, CompletionBackend, ReplayBackend, StubBackend};
pub use geometry::{order_markers, GeometryConfig, OrderedLayout, TileHeight, WordId};
pub use mode::Mode;
pub use scalar::Scalar;
pub use session::{SlateSession, SlateSnapshot, Submission};
pub use vocabulary::{layout_to_text, Vocabulary};

pub type Point = geometry::Point2<f64>;
pub type Vector = geometry::Vector2<f64>;
pub type Marker = geometry::DetectedMarker<f64>;
pub type ScanLine = geometry::ScanLine<f64>;
pub type Config = geometry::GeometryConfig<f64>;
pub type Pose = sim::TilePose<f64>;
pub type Layout = formats::LayoutFile<f64>;

pub type Point32 = geometry::Point2<f32>;
pub type Marker32 = geometry::DetectedMarker<f32>;
pub type Config32 = geometry::GeometryConfig<f32>;
