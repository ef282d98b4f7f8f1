use randset_web::{dimension, gw_paths, moran_curve, render};

#[test]
fn render_fills_the_grid() {
    let rgba = render("mandelbrot(2,2,0.9)", 6, 1).unwrap();
    assert_eq!(rgba.len(), 64 * 64 * 4);
    let dark = rgba.chunks(4).filter(|px| px[0] < 128).count();
    assert!(dark > 0 && dark < 64 * 64);
    assert_eq!(rgba, render("mandelbrot(2,2,0.9)", 6, 1).unwrap());
}

#[test]
fn curve_crosses_one_at_the_root() {
    let s = dimension("example2").unwrap();
    assert!((s - 0.56187).abs() < 5e-6);
    let xs = moran_curve("example2", 2.0 * s, 3).unwrap();
    assert_eq!(xs.len(), 6);
    assert!((xs[3] - 1.0).abs() < 1e-8);
    assert!(xs[1] > 1.0 && xs[5] < 1.0);
}

#[test]
fn paths_start_at_one() {
    let w = gw_paths(4, 0.8, 10, 5, 3).unwrap();
    assert_eq!(w.len(), 55);
    for path in w.chunks(11) {
        assert_eq!(path[0], 1.0);
    }
}
