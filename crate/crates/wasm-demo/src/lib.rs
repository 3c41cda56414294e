//! WebAssembly bindings for the browser demo: the 1D sinc spectrum,
//! eigenfunction curves, and WSK/PSQWS reconstruction along a line.
//!
//! Each binding returns a JSON string; the plain Rust functions behind them
//! are usable (and tested) natively.

use qsample_core::kernels::KernelSpec;
use qsample_core::nystrom::{eigensystem, NystromOperator, PsqwsBasis};
use qsample_core::sampling::{psqws_coefficients, psqws_series, reconstruct_wsk, sample_lattice, synth_smooth};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Nodes used when the reconstruction basis must extend far beyond D.
const RECONSTRUCTION_NODES: usize = 128;

#[derive(Debug, Clone, Serialize)]
pub struct Spectrum {
    pub lambda: Vec<[f64; 4]>,
    pub mu: Vec<f64>,
    pub residual: Vec<f64>,
    pub all_mu: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Curves {
    pub x: Vec<f64>,
    pub mu: Vec<f64>,
    /// `modes[n][i]` is `phi_n(x[i])` as `[w, x, y, z]`.
    pub modes: Vec<Vec<[f64; 4]>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Reconstruction {
    pub x: Vec<f64>,
    pub exact: Vec<[f64; 4]>,
    pub wsk: Vec<[f64; 4]>,
    pub psqws: Vec<[f64; 4]>,
    pub sample_x: Vec<f64>,
    pub sample_values: Vec<[f64; 4]>,
    pub wsk_error: f64,
    pub psqws_error: f64,
    pub modes: usize,
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn basis(sigma: f64, tau: f64, nodes: usize, floor: f64) -> Result<PsqwsBasis, String> {
    let spec = KernelSpec::sinc1d(sigma, tau).map_err(err)?;
    let op = NystromOperator::build(&spec, &spec.grid(nodes).map_err(err)?).map_err(err)?;
    eigensystem(&op, floor).map_err(err)
}

fn line(from: f64, to: f64, points: usize) -> Vec<f64> {
    let steps = points.max(2) - 1;
    (0..=steps).map(|i| from + (to - from) * i as f64 / steps as f64).collect()
}

/// Relative error `sqrt(sum |a - b|^2 / sum |b|^2)`.
fn relative_error(a: &[[f64; 4]], b: &[[f64; 4]]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (p, q) in a.iter().zip(b) {
        for c in 0..4 {
            num += (p[c] - q[c]).powi(2);
            den += q[c].powi(2);
        }
    }
    (num / den).sqrt()
}

pub fn spectrum(sigma: f64, tau: f64, nodes: usize, floor: f64) -> Result<Spectrum, String> {
    let b = basis(sigma, tau, nodes, floor)?;
    Ok(Spectrum {
        lambda: b.lambda().iter().map(|l| l.to_array()).collect(),
        mu: b.mu().to_vec(),
        residual: b.residuals().to_vec(),
        all_mu: b.all_mu().to_vec(),
    })
}

/// The first `count` extended eigenfunctions on `[-extent tau, extent tau]`.
pub fn curves(sigma: f64, tau: f64, nodes: usize, count: usize, extent: f64, points: usize) -> Result<Curves, String> {
    let b = basis(sigma, tau, nodes, 1e-12)?;
    let count = count.min(b.len());
    let x = line(-extent * tau, extent * tau, points);
    let mut modes = vec![Vec::with_capacity(x.len()); count];
    for &t in &x {
        let values = b.mode_values(&[t], count).map_err(err)?;
        for (n, v) in values.into_iter().enumerate() {
            modes[n].push(v.to_array());
        }
    }
    Ok(Curves {
        x,
        mu: b.mu()[..count].to_vec(),
        modes,
    })
}

/// Samples a seeded smooth band-limited signal on the lattice `|n| <= n_max`
/// and reconstructs it on `[-extent tau, extent tau]` with both series.
pub fn reconstruction(
    sigma: f64,
    tau: f64,
    n_max: usize,
    modes: usize,
    seed: u64,
    extent: f64,
    points: usize,
) -> Result<Reconstruction, String> {
    let spec = KernelSpec::sinc1d(sigma, tau).map_err(err)?;
    let b = basis(sigma, tau, RECONSTRUCTION_NODES, 1e-12)?;
    let f = synth_smooth(&spec, b.grid(), seed, 4).map_err(err)?;
    let samples = sample_lattice(&f, n_max).map_err(err)?;
    let modes = modes.clamp(1, b.len());
    let c = psqws_coefficients(&samples, &b, modes).map_err(err)?;
    let x = line(-extent * tau, extent * tau, points);
    let mut exact = Vec::with_capacity(x.len());
    let mut wsk = Vec::with_capacity(x.len());
    let mut psqws = Vec::with_capacity(x.len());
    for &t in &x {
        exact.push(f.eval(&[t]).map_err(err)?.to_array());
        wsk.push(reconstruct_wsk(&samples, &spec, &[t]).map_err(err)?.to_array());
        psqws.push(psqws_series(&c, &b, &[t]).map_err(err)?.to_array());
    }
    let window = |t: f64| t.abs() <= extent * tau;
    let (sample_x, sample_values) = samples
        .points()
        .iter()
        .zip(samples.values())
        .filter(|(p, _)| window(p[0]))
        .map(|(p, v)| (p[0], v.to_array()))
        .unzip();
    Ok(Reconstruction {
        wsk_error: relative_error(&wsk, &exact),
        psqws_error: relative_error(&psqws, &exact),
        x,
        exact,
        wsk,
        psqws,
        sample_x,
        sample_values,
        modes,
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = spectrum)]
pub fn spectrum_js(sigma: f64, tau: f64, nodes: usize, floor: f64) -> Result<String, JsError> {
    to_js(spectrum(sigma, tau, nodes, floor))
}

#[wasm_bindgen(js_name = eigenfunctions)]
pub fn curves_js(sigma: f64, tau: f64, nodes: usize, count: usize, extent: f64, points: usize) -> Result<String, JsError> {
    to_js(curves(sigma, tau, nodes, count, extent, points))
}

#[wasm_bindgen(js_name = reconstruct)]
pub fn reconstruction_js(
    sigma: f64,
    tau: f64,
    n_max: usize,
    modes: usize,
    seed: u32,
    extent: f64,
    points: usize,
) -> Result<String, JsError> {
    to_js(reconstruction(sigma, tau, n_max, modes, u64::from(seed), extent, points))
}
