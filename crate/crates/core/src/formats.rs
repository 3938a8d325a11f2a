//! JSON documents exchanged by the CLI: layout files and simulation specs.
//!
//! A layout file:
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "config": { "k": 1000.0, "tile_height": "auto" },
//!   "frame": "logical",
//!   "markers": [
//!     { "word_id": "human", "center": [0, 0],
//!       "corners": [[-30, 10], [30, 10], [30, -10], [-30, -10]] }
//!   ]
//! }
//! ```
//!
//! `frame` is `"logical"` (y-up, the default) or `"image"` (y-down; flipped
//! on load). A simulation spec carries the same `config` plus a `noise`
//! model and a `tiles` source; `simulate` turns it into a layout file.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{DetectedMarker, GeometryConfig, Vector2, WordId};
use crate::scalar::Scalar;
use crate::sim::{generate_baseline, generate_grid, synthesize_markers, NoiseModel, SimError, TilePose};

pub const LAYOUT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("malformed document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported format_version {0} (expected {LAYOUT_FORMAT_VERSION})")]
    Version(u32),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("`words` lists {given} ids but the generator made {made} tiles")]
    WordCount { given: usize, made: usize },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    /// y-up logical pixels.
    #[default]
    Logical,
    /// y-down image pixels.
    Image,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct LayoutFile<T: Scalar> {
    pub format_version: u32,
    #[serde(default)]
    pub config: GeometryConfig<T>,
    #[serde(default)]
    pub frame: Frame,
    pub markers: Vec<DetectedMarker<T>>,
}

impl<T: Scalar> LayoutFile<T> {
    pub fn new(config: GeometryConfig<T>, markers: Vec<DetectedMarker<T>>) -> Self {
        Self {
            format_version: LAYOUT_FORMAT_VERSION,
            config,
            frame: Frame::Logical,
            markers,
        }
    }

    /// Markers in the logical frame, whatever frame the file was written in.
    pub fn logical_markers(&self) -> Vec<DetectedMarker<T>> {
        match self.frame {
            Frame::Logical => self.markers.clone(),
            Frame::Image => self.markers.iter().map(DetectedMarker::flip_y).collect(),
        }
    }
}

impl<T: Scalar + Serialize + for<'de> Deserialize<'de>> LayoutFile<T> {
    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        let file: Self = serde_json::from_str(text)?;
        check_version(file.format_version)?;
        Ok(file)
    }

    pub fn to_json(&self) -> Result<String, FormatError> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn check_version(v: u32) -> Result<(), FormatError> {
    if v != LAYOUT_FORMAT_VERSION {
        return Err(FormatError::Version(v));
    }
    Ok(())
}

/// Where the simulated tiles come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TileSource {
    Poses {
        poses: Vec<TilePose<f64>>,
    },
    Grid {
        rows: usize,
        cols: usize,
        /// Center-to-center `[column, row]` spacing.
        spacing: [f64; 2],
        #[serde(default = "default_tile_size")]
        tile_size: [f64; 2],
    },
    Baseline {
        n: usize,
        angle_deg: f64,
        spacing: f64,
    },
}

fn default_tile_size() -> [f64; 2] {
    [crate::sim::DEFAULT_TILE_WIDTH, crate::sim::DEFAULT_TILE_HEIGHT]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub format_version: u32,
    #[serde(default)]
    pub config: GeometryConfig<f64>,
    #[serde(default)]
    pub noise: NoiseModel,
    pub tiles: TileSource,
    /// Replacement word ids for generated tiles, in construction order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub words: Option<Vec<WordId>>,
}

impl SimSpec {
    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        let spec: Self = serde_json::from_str(text)?;
        check_version(spec.format_version)?;
        Ok(spec)
    }

    pub fn poses(&self) -> Result<Vec<TilePose<f64>>, FormatError> {
        let mut poses = match &self.tiles {
            TileSource::Poses { poses } => poses.clone(),
            TileSource::Grid { rows, cols, spacing, tile_size } => generate_grid(
                *rows,
                *cols,
                Vector2::new(spacing[0], spacing[1]),
                Vector2::new(tile_size[0], tile_size[1]),
            )?,
            TileSource::Baseline { n, angle_deg, spacing } => {
                generate_baseline(*n, angle_deg.to_radians(), *spacing)?
            }
        };
        if let Some(words) = &self.words {
            if words.len() != poses.len() {
                return Err(FormatError::WordCount { given: words.len(), made: poses.len() });
            }
            for (p, w) in poses.iter_mut().zip(words) {
                p.word_id = w.clone();
            }
        }
        Ok(poses)
    }

    pub fn to_layout(&self) -> Result<LayoutFile<f64>, FormatError> {
        let markers = synthesize_markers(&self.poses()?, &self.noise)?;
        Ok(LayoutFile::new(self.config, markers))
    }
}
