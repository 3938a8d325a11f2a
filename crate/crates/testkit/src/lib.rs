//! Fuzzed tile layouts and brute-force reading-order oracles.
//!
//! Nothing here calls the scan-line ordering code; the oracles work from
//! plain coordinate sorts or from the ground truth recorded at generation.

use poetslate_core::{Marker, Point, WordId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A `w`×`h` tile centered at `(cx, cy)`, rotated counterclockwise by `theta`.
pub fn rect_marker(id: impl Into<WordId>, cx: f64, cy: f64, w: f64, h: f64, theta: f64) -> Marker {
    let (s, c) = theta.sin_cos();
    let corner = |dx: f64, dy: f64| Point::new(cx + c * dx - s * dy, cy + s * dx + c * dy);
    let (hw, hh) = (w / 2.0, h / 2.0);
    Marker::new(
        id,
        Point::new(cx, cy),
        [corner(-hw, hh), corner(hw, hh), corner(hw, -hh), corner(-hw, -hh)],
    )
}

/// A generated layout with its expected reading order.
#[derive(Clone, Debug)]
pub struct Case {
    pub markers: Vec<Marker>,
    /// Expected lines, top line first.
    pub lines: Vec<Vec<WordId>>,
    pub tile_height: f64,
}

impl Case {
    pub fn expected(&self) -> Vec<WordId> {
        self.lines.iter().flatten().cloned().collect()
    }
}

/// Groups centers into horizontal bands (consecutive y gaps up to
/// `band_gap`), top band first, and reads each band by increasing x.
pub fn row_band_oracle(markers: &[Marker], band_gap: f64) -> Vec<Vec<WordId>> {
    let mut by_y: Vec<&Marker> = markers.iter().collect();
    by_y.sort_by(|a, b| b.center.y.total_cmp(&a.center.y));
    let mut bands: Vec<Vec<&Marker>> = Vec::new();
    for m in by_y {
        match bands.last_mut() {
            Some(band) if band.last().unwrap().center.y - m.center.y <= band_gap => band.push(m),
            _ => bands.push(vec![m]),
        }
    }
    bands
        .into_iter()
        .map(|mut band| {
            band.sort_by(|a, b| a.center.x.total_cmp(&b.center.x));
            band.into_iter().map(|m| m.word_id.clone()).collect()
        })
        .collect()
}

/// Orders each known baseline by signed projection onto `direction`;
/// baselines are read in order of their highest tile.
pub fn projection_oracle(baselines: &[Vec<&Marker>], direction: (f64, f64)) -> Vec<Vec<WordId>> {
    let mut lines: Vec<(f64, Vec<WordId>)> = baselines
        .iter()
        .map(|tiles| {
            let mut keyed: Vec<(f64, &Marker)> = tiles
                .iter()
                .map(|m| (m.center.x * direction.0 + m.center.y * direction.1, *m))
                .collect();
            keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
            let top = tiles.iter().map(|m| m.center.y).fold(f64::NEG_INFINITY, f64::max);
            (top, keyed.into_iter().map(|(_, m)| m.word_id.clone()).collect())
        })
        .collect();
    lines.sort_by(|a, b| b.0.total_cmp(&a.0));
    lines.into_iter().map(|(_, l)| l).collect()
}

fn shuffled(mut markers: Vec<Marker>, rng: &mut impl Rng) -> Vec<Marker> {
    markers.shuffle(rng);
    markers
}

/// Axis-aligned grid, at most 25 tiles, rows more than two tile heights
/// apart, with holes, jitter, a random offset and shuffled input order.
pub fn grid_case(rng: &mut impl Rng) -> Case {
    let h = rng.random_range(10.0..30.0);
    let w = rng.random_range(30.0..90.0);
    let rows = rng.random_range(1..=5);
    let cols = rng.random_range(1..=25 / rows).clamp(1, 5);
    let row_pitch = rng.random_range(2.0 * h + 0.5..5.0 * h);
    let col_pitch = w + rng.random_range(8.0..60.0);
    let (ox, oy) = (rng.random_range(-2000.0..2000.0), rng.random_range(-2000.0..2000.0));
    let mut markers = Vec::new();
    let mut next = 0;
    for r in 0..rows {
        for c in 0..cols {
            if rng.random_bool(0.2) && rows * cols > 1 {
                continue;
            }
            let x = ox + c as f64 * col_pitch + rng.random_range(-0.1..0.1) * col_pitch;
            let y = oy - r as f64 * row_pitch + rng.random_range(-0.25..0.25) * h;
            markers.push(rect_marker(format!("w{next:02}"), x, y, w, h, 0.0));
            next += 1;
        }
    }
    if markers.is_empty() {
        markers.push(rect_marker("w00", ox, oy, w, h, 0.0));
    }
    let lines = row_band_oracle(&markers, h);
    Case {
        markers: shuffled(markers, rng),
        lines,
        tile_height: h,
    }
}

/// One to three parallel baselines at a common angle in [-40°, 40°], tiles
/// rotated to match, baselines at least three tile heights apart.
pub fn skew_case(rng: &mut impl Rng) -> Case {
    let angle = rng.random_range(-40f64..=40.0).to_radians();
    let n_lines = rng.random_range(1..=3);
    skew_lines(rng, angle, n_lines, (2, 6))
}

fn skew_lines(rng: &mut impl Rng, angle: f64, n_lines: usize, per_line: (usize, usize)) -> Case {
    let (h, w) = (rng.random_range(12.0..28.0), rng.random_range(40.0..80.0));
    let dir = (angle.cos(), angle.sin());
    let normal = (-angle.sin(), angle.cos());
    let (ox, oy) = (rng.random_range(-1500.0..1500.0), rng.random_range(-1500.0..1500.0));
    let mut lines = Vec::new();
    let mut offset = 0.0;
    let mut next = 0;
    for _ in 0..n_lines {
        let count = rng.random_range(per_line.0..=per_line.1);
        let shift = rng.random_range(-100.0..100.0);
        let mut line = Vec::new();
        let mut along = shift;
        for _ in 0..count {
            let perp = -offset + rng.random_range(-0.2..0.2) * h;
            let x = ox + along * dir.0 + perp * normal.0;
            let y = oy + along * dir.1 + perp * normal.1;
            line.push(rect_marker(format!("s{next:02}"), x, y, w, h, angle));
            next += 1;
            along += w + rng.random_range(6.0..50.0);
        }
        lines.push(line);
        offset += rng.random_range(3.0 * h..6.0 * h);
    }
    let refs: Vec<Vec<&Marker>> = lines.iter().map(|l| l.iter().collect()).collect();
    let expected = projection_oracle(&refs, dir);
    Case {
        markers: shuffled(lines.into_iter().flatten().collect(), rng),
        lines: expected,
        tile_height: h,
    }
}

/// Two parallel lines whose extreme tiles (highest and lowest) sit on
/// different lines, so a half-turn swaps which line is read first.
pub fn two_line_case(rng: &mut impl Rng) -> Case {
    loop {
        let angle = rng.random_range(-30f64..=30.0).to_radians();
        let case = skew_lines(rng, angle, 2, (2, 5));
        let line_of = |id: &WordId| case.lines.iter().position(|l| l.contains(id));
        let top = case.markers.iter().max_by(|a, b| a.center.y.total_cmp(&b.center.y)).unwrap();
        let bottom = case.markers.iter().min_by(|a, b| a.center.y.total_cmp(&b.center.y)).unwrap();
        if line_of(&top.word_id) != line_of(&bottom.word_id) {
            return case;
        }
    }
}

/// Tiles scattered at random positions and orientations.
pub fn scattered_case(rng: &mut impl Rng) -> Vec<Marker> {
    let n = rng.random_range(1..=20);
    let h = rng.random_range(10.0..30.0);
    (0..n)
        .map(|i| {
            rect_marker(
                format!("r{i:02}"),
                rng.random_range(-800.0..800.0),
                rng.random_range(-600.0..600.0),
                h * 3.0,
                h,
                rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
            )
        })
        .collect()
}

/// A randomized stream of slate snapshots with known change instants.
#[derive(Clone, Debug)]
pub struct Schedule {
    pub snapshots: Vec<poetslate_core::SlateSnapshot>,
    /// Timestamps of snapshots that move a tile by more than epsilon.
    pub change_times: Vec<u64>,
    pub horizon_ms: u64,
}

/// Snapshots every 50-2000 ms (multiples of 10 ms). Some steps move a tile by
/// at least three epsilons; the rest jitter every tile by at most an eighth
/// epsilon per axis around its last moved position.
pub fn settle_schedule(rng: &mut impl Rng, settle_ms: u64, epsilon: f64) -> Schedule {
    let words = ["human", "dead", "memory", "machine"];
    let mut base: Vec<(f64, f64)> = (0..words.len()).map(|i| (i as f64 * 80.0, 0.0)).collect();
    let steps = rng.random_range(1..40);
    let mut t = 0u64;
    let mut snapshots = Vec::new();
    let mut change_times = Vec::new();
    for step in 0..steps {
        if step > 0 {
            t += rng.random_range(5..=200u64) * 10;
        }
        let moving = step == 0 || rng.random_bool(0.5);
        if moving && step > 0 {
            let i = rng.random_range(0..base.len());
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let dist = rng.random_range(3.0 * epsilon..20.0 * epsilon);
            base[i].0 += dist * angle.cos();
            base[i].1 += dist * angle.sin();
        }
        if moving {
            change_times.push(t);
        }
        let detections = words
            .iter()
            .zip(&base)
            .map(|(w, (x, y))| {
                let jx = if moving { 0.0 } else { rng.random_range(-0.25..0.25) * epsilon / 2.0 };
                let jy = if moving { 0.0 } else { rng.random_range(-0.25..0.25) * epsilon / 2.0 };
                rect_marker(*w, x + jx, y + jy, 60.0, 20.0, 0.0)
            })
            .collect();
        snapshots.push(poetslate_core::SlateSnapshot::new(t, detections));
    }
    Schedule {
        snapshots,
        change_times,
        horizon_ms: t + 2 * settle_ms,
    }
}

/// Expected submission instants: the first tick at or after each change plus
/// `settle_ms`, unless the next change lands on or before that tick.
pub fn expected_submissions(change_times: &[u64], settle_ms: u64, tick_ms: u64, horizon_ms: u64) -> Vec<u64> {
    let mut out = Vec::new();
    for (i, &c) in change_times.iter().enumerate() {
        let due = (c + settle_ms).div_ceil(tick_ms) * tick_ms;
        let next = change_times.get(i + 1).copied().unwrap_or(u64::MAX);
        if due < next && due <= horizon_ms {
            out.push(due);
        }
    }
    out
}

/// Centroid of the tile centers.
pub fn centroid(markers: &[Marker]) -> Point {
    let n = markers.len() as f64;
    let (sx, sy) = markers
        .iter()
        .fold((0.0, 0.0), |(x, y), m| (x + m.center.x, y + m.center.y));
    Point::new(sx / n, sy / n)
}
