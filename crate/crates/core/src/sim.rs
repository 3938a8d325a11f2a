//! Synthetic detections from ideal tile poses.
//!
//! Noise is applied to the corners, as a fiducial detector reports them; the
//! center is recomputed as the corner centroid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{DetectedMarker, Point2, Vector2, WordId};
use crate::scalar::Scalar;
use crate::session::SlateSnapshot;

pub const DEFAULT_TILE_WIDTH: f64 = 60.0;
pub const DEFAULT_TILE_HEIGHT: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("pose `{0}` needs positive finite width and height")]
    BadSize(WordId),
    #[error("pose `{0}` has a non-finite center or rotation")]
    NonFinite(WordId),
    #[error("noise sigma must be finite and >= 0")]
    BadSigma,
    #[error("dropout probability must lie in [0, 1]")]
    BadDropout,
    #[error("generator needs at least one tile and positive spacing")]
    BadGenerator,
}

/// Ideal placement of one tile. `rotation` is counterclockwise, 0 = upright.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TilePose<T: Scalar> {
    pub word_id: WordId,
    pub center: Point2<T>,
    #[serde(default)]
    pub rotation: T,
    #[serde(default = "default_width")]
    pub width: T,
    #[serde(default = "default_height")]
    pub height: T,
}

fn default_width<T: Scalar>() -> T {
    T::lit(DEFAULT_TILE_WIDTH)
}

fn default_height<T: Scalar>() -> T {
    T::lit(DEFAULT_TILE_HEIGHT)
}

impl<T: Scalar> TilePose<T> {
    pub fn new(word_id: impl Into<WordId>, center: Point2<T>, rotation: T) -> Self {
        Self {
            word_id: word_id.into(),
            center,
            rotation,
            width: default_width(),
            height: default_height(),
        }
    }

    pub fn with_size(mut self, width: T, height: T) -> Self {
        self.width = width;
        self.height = height;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let ok = |v: T| v.is_finite() && v > T::zero();
        if !(ok(self.width) && ok(self.height)) {
            return Err(SimError::BadSize(self.word_id.clone()));
        }
        if !(self.center.is_finite() && self.rotation.is_finite()) {
            return Err(SimError::NonFinite(self.word_id.clone()));
        }
        Ok(())
    }

    /// Noise-free corners, TL, TR, BR, BL in the tile's own frame.
    pub fn ideal_corners(&self) -> [Point2<T>; 4] {
        let two = T::lit(2.0);
        let (hw, hh) = (self.width / two, self.height / two);
        [(-hw, hh), (hw, hh), (hw, -hh), (-hw, -hh)]
            .map(|(dx, dy)| self.center + Vector2::new(dx, dy).rotate(self.rotation))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    #[serde(default)]
    pub corner_jitter_sigma: f64,
    #[serde(default)]
    pub dropout_probability: f64,
    #[serde(default)]
    pub rng_seed: u64,
}

impl NoiseModel {
    pub const NONE: NoiseModel = NoiseModel {
        corner_jitter_sigma: 0.0,
        dropout_probability: 0.0,
        rng_seed: 0,
    };

    pub fn jitter(sigma: f64, seed: u64) -> Self {
        Self {
            corner_jitter_sigma: sigma,
            dropout_probability: 0.0,
            rng_seed: seed,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.corner_jitter_sigma.is_finite() && self.corner_jitter_sigma >= 0.0) {
            return Err(SimError::BadSigma);
        }
        if !(0.0..=1.0).contains(&self.dropout_probability) {
            return Err(SimError::BadDropout);
        }
        Ok(())
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::NONE
    }
}

/// Detections for every pose that survives dropout.
pub fn synthesize_markers<T: Scalar>(
    poses: &[TilePose<T>],
    noise: &NoiseModel,
) -> Result<Vec<DetectedMarker<T>>, SimError> {
    noise.validate()?;
    for p in poses {
        p.validate()?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.rng_seed);
    let normal = Normal::new(0.0, noise.corner_jitter_sigma).map_err(|_| SimError::BadSigma)?;
    let mut out = Vec::with_capacity(poses.len());
    for pose in poses {
        let dropped = rng.random::<f64>() < noise.dropout_probability;
        let mut corners = pose.ideal_corners();
        for c in &mut corners {
            let (dx, dy) = (normal.sample(&mut rng), normal.sample(&mut rng));
            if noise.corner_jitter_sigma > 0.0 {
                c.x = c.x + T::lit(dx);
                c.y = c.y + T::lit(dy);
            }
        }
        if !dropped {
            out.push(DetectedMarker::from_corners(pose.word_id.clone(), corners));
        }
    }
    Ok(out)
}

pub fn synthesize(poses: &[TilePose<f64>], noise: &NoiseModel, timestamp_ms: u64) -> Result<SlateSnapshot, SimError> {
    Ok(SlateSnapshot::new(timestamp_ms, synthesize_markers(poses, noise)?))
}

/// Upright tiles in a grid, row-major, ids `t0, t1, ...`. Rows run downward
/// (decreasing y) from the origin; `spacing` is center-to-center
/// `(column, row)` distance.
pub fn generate_grid<T: Scalar>(
    rows: usize,
    cols: usize,
    spacing: Vector2<T>,
    tile_size: Vector2<T>,
) -> Result<Vec<TilePose<T>>, SimError> {
    if rows == 0 || cols == 0 || !(spacing.x > T::zero() && spacing.y > T::zero()) {
        return Err(SimError::BadGenerator);
    }
    let mut poses = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let center = Point2::new(
                spacing.x * T::from_usize(c).expect("index fits"),
                -(spacing.y * T::from_usize(r).expect("index fits")),
            );
            poses.push(TilePose::new(format!("t{}", poses.len()), center, T::zero()).with_size(tile_size.x, tile_size.y));
        }
    }
    Ok(poses)
}

/// `n` default-size tiles whose centers step `spacing` along `angle`
/// (radians, counterclockwise), each rotated to sit on the baseline.
pub fn generate_baseline<T: Scalar>(n: usize, angle: T, spacing: T) -> Result<Vec<TilePose<T>>, SimError> {
    // Written negated so NaN is rejected too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if n == 0 || !(spacing > T::zero()) {
        return Err(SimError::BadGenerator);
    }
    let step = Vector2::new(T::one(), T::zero()).rotate(angle) * spacing;
    Ok((0..n)
        .map(|i| {
            let i_t = T::from_usize(i).expect("index fits");
            TilePose::new(format!("t{i}"), Point2::new(T::zero(), T::zero()) + step * i_t, angle)
        })
        .collect())
}
