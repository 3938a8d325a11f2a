use poetslate_core::geometry::{
    build_scan_line, order_markers, project_onto_line, GeometryConfig, OrderedLayout, Point2, Vector2, WordId,
};
use poetslate_core::{Config, Marker};
use poetslate_testkit::{
    centroid, grid_case, projection_oracle, rect_marker, rng, row_band_oracle, scattered_case, skew_case, two_line_case,
};
use proptest::prelude::*;

fn ids(words: &[&str]) -> Vec<WordId> {
    words.iter().map(|w| WordId::from(*w)).collect()
}

fn reversed_scene(markers: &[Marker]) -> Vec<Marker> {
    let pivot = centroid(markers);
    markers
        .iter()
        .map(|m| m.rotated_about(pivot, std::f64::consts::PI))
        .collect()
}

#[test]
fn grid_3x3_reads_row_major() {
    let h = 20.0;
    let mut markers = Vec::new();
    let words = ["do", "promise", "a", "radiant", "world", "forest", "see", "animal", "cry"];
    for (i, w) in words.iter().enumerate() {
        let (r, c) = (i / 3, i % 3);
        markers.push(rect_marker(*w, c as f64 * 80.0, -(r as f64) * 3.0 * h, 60.0, h, 0.0));
    }
    markers.reverse();
    let expected: Vec<WordId> = row_band_oracle(&markers, h).into_iter().flatten().collect();
    assert_eq!(expected, ids(&words));
    let layout = order_markers(&markers, &Config::default()).unwrap();
    assert_eq!(layout.flatten(), expected);
    assert_eq!(layout.lines.len(), 3);
}

#[test]
fn thirty_degree_baseline_reads_by_projection() {
    let theta = 30f64.to_radians();
    let dir = (theta.cos(), theta.sin());
    let markers: Vec<Marker> = (0..5)
        .map(|i| {
            let t = i as f64 * 75.0;
            rect_marker(format!("b{i}"), 50.0 + t * dir.0, 50.0 + t * dir.1, 60.0, 20.0, theta)
        })
        .rev()
        .collect();
    let refs: Vec<&Marker> = markers.iter().collect();
    let expected: Vec<WordId> = projection_oracle(&[refs], dir).into_iter().flatten().collect();
    assert_eq!(expected, ids(&["b0", "b1", "b2", "b3", "b4"]));
    assert_eq!(order_markers(&markers, &Config::default()).unwrap().flatten(), expected);
}

#[test]
fn upright_tiles_on_a_steep_baseline_split_into_lines() {
    // Upright tiles keep a horizontal scan line, so a 30° staircase of
    // non-overlapping tiles becomes one line per tile, read top-down.
    let theta = 30f64.to_radians();
    let markers: Vec<Marker> = (0..5)
        .map(|i| {
            let t = i as f64 * 75.0;
            rect_marker(format!("b{i}"), t * theta.cos(), t * theta.sin(), 60.0, 20.0, 0.0)
        })
        .collect();
    let layout = order_markers(&markers, &Config::default()).unwrap();
    assert_eq!(layout.lines.len(), 5);
    assert_eq!(layout.flatten(), ids(&["b4", "b3", "b2", "b1", "b0"]));
}

#[test]
fn half_turn_swaps_line_order_and_keeps_each_line() {
    let h = 20.0;
    let markers = vec![
        rect_marker("hate", 0.0, 0.0, 60.0, h, 0.0),
        rect_marker("delicious", 75.0, 0.0, 60.0, h, 0.0),
        rect_marker("body", 150.0, 0.0, 60.0, h, 0.0),
        rect_marker("beautiful", 10.0, -70.0, 60.0, h, 0.0),
        rect_marker("anxious", 85.0, -70.0, 60.0, h, 0.0),
        rect_marker("heart", 160.0, -70.0, 60.0, h, 0.0),
    ];
    let cfg = Config::default();
    let upright = order_markers(&markers, &cfg).unwrap();
    assert_eq!(upright.flatten(), ids(&["hate", "delicious", "body", "beautiful", "anxious", "heart"]));
    // Upside-down tiles are read right to left in world coordinates, which is
    // their own left to right, so each line keeps its words while the line
    // order flips.
    let flipped = order_markers(&reversed_scene(&markers), &cfg).unwrap();
    let mut expected = upright.lines.clone();
    expected.reverse();
    assert_eq!(flipped.lines, expected);
    assert_eq!(flipped.flatten(), ids(&["beautiful", "anxious", "heart", "hate", "delicious", "body"]));
}

fn assert_permutation(markers: &[Marker], layout: &OrderedLayout) {
    let mut input: Vec<WordId> = markers.iter().map(|m| m.word_id.clone()).collect();
    let mut output = layout.flatten();
    input.sort();
    output.sort();
    assert_eq!(input, output);
    assert!(layout.lines.iter().all(|l| !l.is_empty()));
    assert!(layout.lines.len() <= markers.len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn output_is_a_permutation(seed in any::<u64>()) {
        let markers = scattered_case(&mut rng(seed));
        let layout = order_markers(&markers, &Config::default()).unwrap();
        assert_permutation(&markers, &layout);
    }

    #[test]
    fn grid_matches_row_band_oracle(seed in any::<u64>()) {
        let case = grid_case(&mut rng(seed));
        let layout = order_markers(&case.markers, &Config::default()).unwrap();
        prop_assert_eq!(layout.lines, case.lines);
    }

    #[test]
    fn skewed_baselines_match_projection_oracle(seed in any::<u64>()) {
        let case = skew_case(&mut rng(seed));
        let layout = order_markers(&case.markers, &Config::default()).unwrap();
        prop_assert_eq!(layout.lines, case.lines);
    }

    #[test]
    fn translation_is_invisible(seed in any::<u64>(), dx in -1e5f64..1e5, dy in -1e5f64..1e5) {
        let markers = scattered_case(&mut rng(seed));
        let cfg = Config::default();
        let moved: Vec<Marker> = markers.iter().map(|m| m.translated(Vector2::new(dx, dy))).collect();
        prop_assert_eq!(order_markers(&markers, &cfg).unwrap(), order_markers(&moved, &cfg).unwrap());
    }

    #[test]
    fn uniform_scale_is_invisible(
        seed in any::<u64>(),
        s in 0.5f64..2.0,
        px in -500f64..500.0,
        py in -500f64..500.0,
    ) {
        let case = skew_case(&mut rng(seed));
        // Keep the scene compact so every tile stays within k of any seed.
        let c = centroid(&case.markers);
        let markers: Vec<Marker> = case.markers.iter().map(|m| m.translated(Point2::new(0.0, 0.0) - c)).collect();
        let pivot = Point2::new(px, py);
        let scaled: Vec<Marker> = markers.iter().map(|m| m.scaled_about(pivot, s)).collect();
        let h = case.tile_height * 0.9;
        let base = order_markers(&markers, &Config::default().with_tile_height(h)).unwrap();
        let after = order_markers(&scaled, &Config::default().with_tile_height(h * s)).unwrap();
        prop_assert_eq!(base, after);
    }

    #[test]
    fn half_turn_reverses_line_order(seed in any::<u64>()) {
        let case = two_line_case(&mut rng(seed));
        let cfg = Config::default();
        let upright = order_markers(&case.markers, &cfg).unwrap();
        let turned = order_markers(&reversed_scene(&case.markers), &cfg).unwrap();
        let mut expected = upright.lines.clone();
        expected.reverse();
        prop_assert_eq!(turned.lines, expected);
    }

    #[test]
    fn projection_residual_is_perpendicular(
        cx in -1e4f64..1e4, cy in -1e4f64..1e4,
        theta in -3.2f64..3.2,
        k in 1.0f64..5000.0,
        px in -1e4f64..1e4, py in -1e4f64..1e4,
    ) {
        let seed = rect_marker("s", cx, cy, 60.0, 20.0, theta);
        let line = build_scan_line(&seed, &GeometryConfig { k, ..Config::default() }).unwrap();
        prop_assert!((line.direction.norm() - 2.0 * k).abs() < 1e-9 * k);
        let p = Point2::new(px, py);
        let foot = project_onto_line(&line, p);
        let residual = (foot - p).dot(line.direction).abs();
        prop_assert!(residual < 1e-6 * line.direction.norm_squared());
    }

    #[test]
    fn ordering_is_deterministic(seed in any::<u64>()) {
        let markers = scattered_case(&mut rng(seed));
        let cfg = Config::default();
        prop_assert_eq!(order_markers(&markers, &cfg).unwrap(), order_markers(&markers, &cfg).unwrap());
        let mut reversed = markers.clone();
        reversed.reverse();
        prop_assert_eq!(order_markers(&markers, &cfg).unwrap(), order_markers(&reversed, &cfg).unwrap());
    }
}
