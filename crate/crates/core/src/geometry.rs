//! Reading-order inference for word tiles scattered on a slate.
//!
//! Every tile reports a center and four corners. The topmost remaining tile
//! seeds a long scan line cast perpendicular to its left edge; every tile whose
//! center projects within `tile_height` of that line joins the seed's line of
//! text. Lines are read outward from the scan line's reading origin, and the
//! loop repeats on what is left.
//!
//! All coordinates are logical pixels in a y-up frame. Image-space detections
//! (y-down) must be flipped with [`DetectedMarker::flip_y`] before ordering.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::scalar::Scalar;

/// Identifier of a physical tile, stable across snapshots.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WordId(String);

impl WordId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for WordId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for WordId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

impl From<String> for WordId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("marker `{0}` has a non-finite coordinate")]
    NonFinite(WordId),
    #[error("marker `{0}` is degenerate (zero area or zero-length left edge)")]
    DegenerateMarker(WordId),
    #[error("marker `{0}` reports a center outside its corner bounds")]
    CenterOutOfBounds(WordId),
    #[error("word id `{0}` appears more than once in the snapshot")]
    DuplicateWordId(WordId),
    #[error("zero-length vector has no tangent")]
    ZeroVector,
    #[error("invalid geometry config: {0}")]
    InvalidConfig(String),
}

/// A position in logical pixels, y-up.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[T; 2]", into = "[T; 2]")]
pub struct Point2<T: Scalar> {
    pub x: T,
    pub y: T,
}

/// A displacement in logical pixels.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[T; 2]", into = "[T; 2]")]
pub struct Vector2<T: Scalar> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> From<[T; 2]> for Point2<T> {
    fn from([x, y]: [T; 2]) -> Self {
        Self { x, y }
    }
}

impl<T: Scalar> From<Point2<T>> for [T; 2] {
    fn from(p: Point2<T>) -> Self {
        [p.x, p.y]
    }
}

impl<T: Scalar> From<[T; 2]> for Vector2<T> {
    fn from([x, y]: [T; 2]) -> Self {
        Self { x, y }
    }
}

impl<T: Scalar> From<Vector2<T>> for [T; 2] {
    fn from(v: Vector2<T>) -> Self {
        [v.x, v.y]
    }
}

impl<T: Scalar> Point2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: Point2<T>) -> T {
        (*self - other).norm()
    }

    /// Position relative to the origin.
    pub fn to_vector(self) -> Vector2<T> {
        Vector2::new(self.x, self.y)
    }
}

impl<T: Scalar> Vector2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn dot(&self, other: Vector2<T>) -> T {
        self.x * other.x + self.y * other.y
    }

    pub fn norm_squared(&self) -> T {
        self.dot(*self)
    }

    pub fn norm(&self) -> T {
        self.x.hypot(self.y)
    }

    /// Clockwise quarter turn in the y-up frame: `(x, y) -> (y, -x)`.
    pub fn rotate_cw(&self) -> Vector2<T> {
        Vector2::new(self.y, -self.x)
    }

    /// Counterclockwise rotation by `radians`.
    pub fn rotate(&self, radians: T) -> Vector2<T> {
        let (s, c) = radians.sin_cos();
        Vector2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// Polar angle in radians.
    pub fn angle(&self) -> T {
        self.y.atan2(self.x)
    }
}

impl<T: Scalar> Sub for Point2<T> {
    type Output = Vector2<T>;
    fn sub(self, rhs: Self) -> Vector2<T> {
        Vector2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl<T: Scalar> Add<Vector2<T>> for Point2<T> {
    type Output = Point2<T>;
    fn add(self, rhs: Vector2<T>) -> Point2<T> {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl<T: Scalar> Sub<Vector2<T>> for Point2<T> {
    type Output = Point2<T>;
    fn sub(self, rhs: Vector2<T>) -> Point2<T> {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl<T: Scalar> Add for Vector2<T> {
    type Output = Vector2<T>;
    fn add(self, rhs: Self) -> Self {
        Vector2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl<T: Scalar> Sub for Vector2<T> {
    type Output = Vector2<T>;
    fn sub(self, rhs: Self) -> Self {
        Vector2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl<T: Scalar> Neg for Vector2<T> {
    type Output = Vector2<T>;
    fn neg(self) -> Self {
        Vector2::new(-self.x, -self.y)
    }
}

impl<T: Scalar> Mul<T> for Vector2<T> {
    type Output = Vector2<T>;
    fn mul(self, rhs: T) -> Self {
        Vector2::new(self.x * rhs, self.y * rhs)
    }
}

pub const TOP_LEFT: usize = 0;
pub const TOP_RIGHT: usize = 1;
pub const BOTTOM_RIGHT: usize = 2;
pub const BOTTOM_LEFT: usize = 3;

/// One recognized tile.
///
/// Corners are listed in the tile's own orientation
/// (`[top-left, top-right, bottom-right, bottom-left]`), so for an upside-down
/// tile the "top-left" corner sits at the visual bottom-right.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectedMarker<T: Scalar> {
    pub word_id: WordId,
    pub center: Point2<T>,
    pub corners: [Point2<T>; 4],
}

impl<T: Scalar> DetectedMarker<T> {
    pub fn new(word_id: impl Into<WordId>, center: Point2<T>, corners: [Point2<T>; 4]) -> Self {
        Self {
            word_id: word_id.into(),
            center,
            corners,
        }
    }

    /// Builds a marker whose center is the centroid of its corners.
    pub fn from_corners(word_id: impl Into<WordId>, corners: [Point2<T>; 4]) -> Self {
        let center = centroid(&corners);
        Self::new(word_id, center, corners)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let id = || self.word_id.clone();
        if !self.center.is_finite() || self.corners.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::NonFinite(id()));
        }
        if quad_area(&self.corners) <= T::zero() {
            return Err(GeometryError::DegenerateMarker(id()));
        }
        let mid = centroid(&self.corners);
        let radius = self
            .corners
            .iter()
            .map(|c| c.distance(mid))
            .fold(T::zero(), T::max);
        let slack = radius * T::lit(1e-6);
        if self.center.distance(mid) > radius + slack {
            return Err(GeometryError::CenterOutOfBounds(id()));
        }
        Ok(())
    }

    /// Converts an image-space (y-down) detection into the logical y-up frame.
    pub fn flip_y(&self) -> Self {
        let flip = |p: Point2<T>| Point2::new(p.x, -p.y);
        Self {
            word_id: self.word_id.clone(),
            center: flip(self.center),
            corners: self.corners.map(flip),
        }
    }

    pub fn translated(&self, offset: Vector2<T>) -> Self {
        Self {
            word_id: self.word_id.clone(),
            center: self.center + offset,
            corners: self.corners.map(|c| c + offset),
        }
    }

    /// Rotation of the whole marker by `radians` about `pivot`.
    pub fn rotated_about(&self, pivot: Point2<T>, radians: T) -> Self {
        let rot = |p: Point2<T>| pivot + (p - pivot).rotate(radians);
        Self {
            word_id: self.word_id.clone(),
            center: rot(self.center),
            corners: self.corners.map(rot),
        }
    }

    /// Uniform scaling by `factor` about `pivot`.
    pub fn scaled_about(&self, pivot: Point2<T>, factor: T) -> Self {
        let scale = |p: Point2<T>| pivot + (p - pivot) * factor;
        Self {
            word_id: self.word_id.clone(),
            center: scale(self.center),
            corners: self.corners.map(scale),
        }
    }
}

fn centroid<T: Scalar>(corners: &[Point2<T>; 4]) -> Point2<T> {
    let four = T::lit(4.0);
    let sx = corners.iter().fold(T::zero(), |acc, c| acc + c.x);
    let sy = corners.iter().fold(T::zero(), |acc, c| acc + c.y);
    Point2::new(sx / four, sy / four)
}

fn quad_area<T: Scalar>(corners: &[Point2<T>; 4]) -> T {
    let mut twice = T::zero();
    for i in 0..4 {
        let a = corners[i];
        let b = corners[(i + 1) % 4];
        twice = twice + (a.x * b.y - b.x * a.y);
    }
    (twice / T::lit(2.0)).abs()
}

/// Capture radius policy for the scan-line test.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum TileHeight<T: Scalar> {
    /// Median left-edge length over the markers being ordered.
    #[default]
    Auto,
    Fixed(T),
}

impl<T: Scalar + Serialize> Serialize for TileHeight<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            TileHeight::Auto => serializer.serialize_str("auto"),
            TileHeight::Fixed(v) => v.serialize(serializer),
        }
    }
}

impl<'de, T: Scalar + Deserialize<'de>> Deserialize<'de> for TileHeight<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr<T> {
            Word(String),
            Value(T),
        }
        match Repr::<T>::deserialize(deserializer)? {
            Repr::Word(w) if w == "auto" => Ok(TileHeight::Auto),
            Repr::Word(w) => Err(de::Error::custom(format!(
                "tile_height must be a number or \"auto\", got \"{w}\""
            ))),
            Repr::Value(v) => Ok(TileHeight::Fixed(v)),
        }
    }
}

pub const DEFAULT_K: f64 = 1000.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryConfig<T: Scalar> {
    /// Half-length of the scan line, in logical pixels.
    pub k: T,
    #[serde(default)]
    pub tile_height: TileHeight<T>,
}

impl<T: Scalar> Default for GeometryConfig<T> {
    fn default() -> Self {
        Self {
            k: T::lit(DEFAULT_K),
            tile_height: TileHeight::Auto,
        }
    }
}

impl<T: Scalar> GeometryConfig<T> {
    pub fn with_tile_height(mut self, tile_height: T) -> Self {
        self.tile_height = TileHeight::Fixed(tile_height);
        self
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.k.is_finite() && self.k > T::zero()) {
            return Err(GeometryError::InvalidConfig("k must be positive and finite".into()));
        }
        if let TileHeight::Fixed(h) = self.tile_height {
            if !(h.is_finite() && h > T::zero()) {
                return Err(GeometryError::InvalidConfig(
                    "tile_height must be positive and finite".into(),
                ));
            }
        }
        Ok(())
    }
}

/// The scan line cast through a seed tile.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanLine<T: Scalar> {
    pub start: Point2<T>,
    pub end: Point2<T>,
    /// `end - start`; its length is `2k`.
    pub direction: Vector2<T>,
    /// Unit tangent of the seed's left edge.
    pub tangent: Vector2<T>,
}

impl<T: Scalar> ScanLine<T> {
    /// The end reading starts from. For an upright seed this lies `k` pixels to
    /// its left; for an upside-down seed it lies to the right.
    pub fn reading_origin(&self) -> Point2<T> {
        self.end
    }
}

/// Tiles grouped into lines, top line first, each line in reading order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderedLayout {
    pub lines: Vec<Vec<WordId>>,
}

impl OrderedLayout {
    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    /// Number of tiles across all lines.
    pub fn len(&self) -> usize {
        self.lines.iter().map(Vec::len).sum()
    }

    pub fn flatten(&self) -> Vec<WordId> {
        self.lines.iter().flatten().cloned().collect()
    }
}

/// Vector from the bottom-left to the top-left corner.
pub fn left_edge_vector<T: Scalar>(marker: &DetectedMarker<T>) -> Result<Vector2<T>, GeometryError> {
    let edge = marker.corners[TOP_LEFT] - marker.corners[BOTTOM_LEFT];
    if !(edge.x.is_finite() && edge.y.is_finite()) {
        return Err(GeometryError::NonFinite(marker.word_id.clone()));
    }
    if edge.norm_squared() == T::zero() {
        return Err(GeometryError::DegenerateMarker(marker.word_id.clone()));
    }
    Ok(edge)
}

/// Unit tangent to a left edge: the edge turned a quarter clockwise, which for
/// an upright tile points in the reading direction.
pub fn tangent_of<T: Scalar>(edge: Vector2<T>) -> Result<Vector2<T>, GeometryError> {
    let len = edge.norm();
    if len <= T::zero() || !len.is_finite() {
        return Err(GeometryError::ZeroVector);
    }
    let t = edge.rotate_cw();
    Ok(Vector2::new(t.x / len, t.y / len))
}

pub fn build_scan_line<T: Scalar>(
    marker: &DetectedMarker<T>,
    config: &GeometryConfig<T>,
) -> Result<ScanLine<T>, GeometryError> {
    config.validate()?;
    let tangent = tangent_of(left_edge_vector(marker)?)
        .map_err(|_| GeometryError::DegenerateMarker(marker.word_id.clone()))?;
    let reach = tangent * config.k;
    let start = marker.center + reach;
    let end = marker.center - reach;
    Ok(ScanLine {
        start,
        end,
        direction: end - start,
        tangent,
    })
}

/// Orthogonal projection of `p` onto the infinite line through `line.start`
/// with direction `line.direction`.
pub fn project_onto_line<T: Scalar>(line: &ScanLine<T>, p: Point2<T>) -> Point2<T> {
    let l = line.direction;
    let t = (p - line.start).dot(l) / l.norm_squared();
    line.start + l * t
}

/// Whether the marker's center lies strictly within `tile_height` of the line.
pub fn line_captures<T: Scalar>(line: &ScanLine<T>, marker: &DetectedMarker<T>, tile_height: T) -> bool {
    let foot = project_onto_line(line, marker.center);
    foot.distance(marker.center) < tile_height
}

/// Median left-edge length, or the fixed value from the config.
pub fn resolve_tile_height<T: Scalar>(
    markers: &[DetectedMarker<T>],
    config: &GeometryConfig<T>,
) -> Result<T, GeometryError> {
    match config.tile_height {
        TileHeight::Fixed(h) => Ok(h),
        TileHeight::Auto => {
            let mut lengths = markers
                .iter()
                .map(|m| left_edge_vector(m).map(|e| e.norm()))
                .collect::<Result<Vec<_>, _>>()?;
            if lengths.is_empty() {
                return Err(GeometryError::InvalidConfig(
                    "automatic tile height needs at least one marker".into(),
                ));
            }
            lengths.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
            let n = lengths.len();
            Ok(if n % 2 == 1 {
                lengths[n / 2]
            } else {
                (lengths[n / 2 - 1] + lengths[n / 2]) / T::lit(2.0)
            })
        }
    }
}

fn seed_order<T: Scalar>(a: &DetectedMarker<T>, b: &DetectedMarker<T>) -> Ordering {
    // Highest y first, then leftmost, then word id.
    b.center
        .y
        .partial_cmp(&a.center.y)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.center.x.partial_cmp(&b.center.x).unwrap_or(Ordering::Equal))
        .then_with(|| a.word_id.cmp(&b.word_id))
}

/// Groups markers into reading-ordered lines.
pub fn order_markers<T: Scalar>(
    markers: &[DetectedMarker<T>],
    config: &GeometryConfig<T>,
) -> Result<OrderedLayout, GeometryError> {
    config.validate()?;
    let mut seen = BTreeSet::new();
    for m in markers {
        m.validate()?;
        left_edge_vector(m)?;
        if !seen.insert(&m.word_id) {
            return Err(GeometryError::DuplicateWordId(m.word_id.clone()));
        }
    }
    if markers.is_empty() {
        return Ok(OrderedLayout::default());
    }
    let tile_height = resolve_tile_height(markers, config)?;

    let mut unsorted: Vec<&DetectedMarker<T>> = markers.iter().collect();
    let mut lines = Vec::new();
    while !unsorted.is_empty() {
        let (seed_idx, _) = unsorted
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| seed_order(a, b))
            .expect("non-empty");
        let seed = unsorted.remove(seed_idx);
        let line = build_scan_line(seed, config)?;

        let mut members = vec![seed];
        unsorted.retain(|m| {
            if line_captures(&line, m, tile_height) {
                members.push(m);
                false
            } else {
                true
            }
        });

        let origin = line.reading_origin();
        let mut keyed: Vec<(T, &DetectedMarker<T>)> =
            members.into_iter().map(|m| (m.center.distance(origin), m)).collect();
        keyed.sort_by(|(da, a), (db, b)| {
            da.partial_cmp(db)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.word_id.cmp(&b.word_id))
        });
        lines.push(keyed.into_iter().map(|(_, m)| m.word_id.clone()).collect());
    }
    Ok(OrderedLayout { lines })
}
