use coggen::phantom::{gen_phantom, PhantomKind, PhantomSpec};

/// Modified Shepp-Logan parameters restated independently:
/// (intensity, a, b, x0, y0, angle in degrees).
const HEAD: [(f64, f64, f64, f64, f64, f64); 10] = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
];

fn inside(x: f64, y: f64, e: &(f64, f64, f64, f64, f64, f64)) -> bool {
    let phi = e.5 * std::f64::consts::PI / 180.0;
    let (dx, dy) = (x - e.3, y - e.4);
    let u = dx * phi.cos() + dy * phi.sin();
    let v = dy * phi.cos() - dx * phi.sin();
    u * u / (e.1 * e.1) + v * v / (e.2 * e.2) <= 1.0
}

fn oracle(x: f64, y: f64) -> f64 {
    HEAD.iter().filter(|e| inside(x, y, e)).map(|e| e.0).sum::<f64>().max(0.0)
}

#[test]
fn shepp_logan_matches_point_in_ellipse_oracle() {
    let img = gen_phantom(&PhantomSpec::default()).unwrap();
    // Peak of the rendered grid, recomputed from the oracle.
    let n = 64;
    let center = |i: usize| (i as f64 + 0.5) / n as f64 * 2.0 - 1.0;
    let peak = (0..n)
        .flat_map(|r| (0..n).map(move |c| (r, c)))
        .map(|(r, c)| oracle(center(c), -center(r)))
        .fold(0.0, f64::max);
    for (r, c) in [(32, 32), (31, 31), (20, 40), (50, 30), (5, 5)] {
        let expected = oracle(center(c), -center(r)) / peak;
        assert!((img.get(r, c).norm() - expected).abs() < 1e-12, "pixel ({r},{c})");
    }
    assert!(img.get(32, 32).norm() > 0.0);
}

#[test]
fn checker_has_smooth_levels() {
    let img = gen_phantom(&PhantomSpec {
        kind: PhantomKind::CheckerSmooth,
        height: 32,
        width: 32,
        ..Default::default()
    })
    .unwrap();
    let mags = img.magnitudes();
    assert!(mags.iter().all(|&m| (0.0..=1.0).contains(&m)));
    assert!(mags.iter().any(|&m| m < 0.1) && mags.iter().any(|&m| m > 0.9));
}
