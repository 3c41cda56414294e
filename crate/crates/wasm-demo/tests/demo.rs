use qsample_wasm_demo::{curves, reconstruction, spectrum};

#[test]
fn spectrum_sums_to_the_kernel_trace() {
    let s = spectrum(std::f64::consts::PI, 1.0, 64, 1e-12).unwrap();
    let total: f64 = s.all_mu.iter().sum();
    assert!((total - 2.0).abs() < 1e-10, "{total}");
    assert!(s.mu.windows(2).all(|p| p[0] >= p[1]));
    assert_eq!(s.lambda.len(), s.mu.len());
}

#[test]
fn curves_have_the_requested_shape() {
    let c = curves(std::f64::consts::PI, 1.0, 48, 4, 3.0, 101).unwrap();
    assert_eq!(c.x.len(), 101);
    assert_eq!(c.modes.len(), 4);
    assert!(c.modes.iter().all(|m| m.len() == 101));
    assert!((c.x[0] + 3.0).abs() < 1e-15 && (c.x[100] - 3.0).abs() < 1e-15);
}

#[test]
fn both_series_track_the_signal() {
    let r = reconstruction(std::f64::consts::PI, 1.0, 32, 1000, 3, 1.0, 41).unwrap();
    assert!(r.wsk_error < 1e-2, "{}", r.wsk_error);
    assert!(r.psqws_error < 6e-2, "{}", r.psqws_error);
    assert!(!r.sample_x.is_empty());
}

#[test]
fn invalid_parameters_are_reported() {
    assert!(spectrum(-1.0, 1.0, 32, 1e-12).is_err());
    assert!(curves(1.0, 1.0, 1, 2, 2.0, 10).is_err());
}
