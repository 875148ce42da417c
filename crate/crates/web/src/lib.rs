//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each export returns a flat `Float64Array` the page plots directly. The
//! plain `*_series` functions hold the logic so they can be tested natively.

use eigenchan::analysis::{empirical_cdf, oob_rejection};
use eigenchan::doppler::periodogram;
use eigenchan::scenario::{run_tracking, TrackingPolicy, UpdateSchedule, SIR_CAP_DB};
use eigenchan::{generate, ModelClass, ModelConfig, RunKind};
use wasm_bindgen::prelude::*;

/// Upper bound on samples so the page stays responsive.
pub const MAX_SAMPLES: usize = 200_000;

fn config(
    kind: RunKind,
    class: u8,
    dim: usize,
    samples: usize,
    seed: u64,
) -> Result<ModelConfig, String> {
    if samples > MAX_SAMPLES {
        return Err(format!("at most {MAX_SAMPLES} samples"));
    }
    let mut c = ModelConfig::defaults(kind);
    c.class = ModelClass::from_tag(class).ok_or_else(|| format!("unknown class {class}"))?;
    c.n = dim;
    c.m = dim;
    c.samples = samples;
    c.seed = seed;
    c.validate().map_err(|e| e.to_string())?;
    Ok(c)
}

/// `[rejection_db, f_0/f_d, psd_0, f_1/f_d, psd_1, ...]` for element `h_11`.
pub fn spectrum_series(dim: usize, samples: usize, seed: u64) -> Result<Vec<f64>, String> {
    let cfg = config(RunKind::Values, ModelClass::V.tag(), dim, samples, seed)?;
    let trace = generate(&cfg).map_err(|e| e.to_string())?;
    let spectrum =
        periodogram(&trace.channel().element(0, 0), cfg.f_s(), 32).map_err(|e| e.to_string())?;
    let rejection = oob_rejection(&spectrum, cfg.f_d_hz).map_err(|e| e.to_string())?;
    let mut out = vec![rejection];
    for (f, p) in spectrum.bin_freqs.iter().zip(&spectrum.psd_db) {
        out.push(f / cfg.f_d_hz);
        out.push(*p);
    }
    Ok(out)
}

/// SIR of mode 1 in dB, clamped to `±300`, under receive weights refreshed
/// every `u_every` samples (0 = frozen) and optional forced swaps
/// (`swap_period` 0 = none).
pub fn sir_series(
    class: u8,
    dim: usize,
    samples: usize,
    seed: u64,
    u_every: usize,
    swap_period: usize,
) -> Result<Vec<f64>, String> {
    let cfg = config(RunKind::Scenario, class, dim, samples, seed)?;
    let trace = generate(&cfg).map_err(|e| e.to_string())?;
    let u_update = match u_every {
        0 => UpdateSchedule::Frozen,
        1 => UpdateSchedule::EverySample,
        k => UpdateSchedule::EveryK(k),
    };
    let mut policy = TrackingPolicy::new(u_update, UpdateSchedule::EverySample);
    if swap_period > 0 {
        policy = policy.with_swap(swap_period);
    }
    let series = run_tracking(&trace, &policy).map_err(|e| e.to_string())?;
    Ok(series.sir_db[0]
        .iter()
        .map(|x| x.clamp(-SIR_CAP_DB, SIR_CAP_DB))
        .collect())
}

/// `[level_0, p_0, level_1, p_1, ...]` for `|s_k|`, `k = 0..modes`, each
/// block prefixed by its point count; at most `points` per curve.
pub fn value_cdf_series(
    dim: usize,
    samples: usize,
    seed: u64,
    points: usize,
) -> Result<Vec<f64>, String> {
    let cfg = config(RunKind::Values, ModelClass::V.tag(), dim, samples, seed)?;
    let trace = generate(&cfg).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    for s in &trace.values {
        let mags: Vec<f64> = s.iter().map(|z| z.norm()).collect();
        let cdf = empirical_cdf(&mags).map_err(|e| e.to_string())?;
        let step = cdf.len().div_ceil(points.max(2)).max(1);
        let picks: Vec<usize> = (0..cdf.len()).step_by(step).collect();
        out.push(picks.len() as f64);
        for k in picks {
            out.push(cdf.levels_db[k]);
            out.push(cdf.prob[k]);
        }
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn spectrum(dim: usize, samples: usize, seed: u32) -> Result<Vec<f64>, JsError> {
    spectrum_series(dim, samples, seed.into()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn sir(
    class: u8,
    dim: usize,
    samples: usize,
    seed: u32,
    u_every: usize,
    swap_period: usize,
) -> Result<Vec<f64>, JsError> {
    sir_series(class, dim, samples, seed.into(), u_every, swap_period).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn value_cdf(
    dim: usize,
    samples: usize,
    seed: u32,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    value_cdf_series(dim, samples, seed.into(), points).map_err(|e| JsError::new(&e))
}
