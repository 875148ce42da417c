//! Doppler filters, virtual Doppler noise generators and spectrum estimation.
//!
//! Frequencies inside a [`ToneSet`] are stored normalized to the maximum
//! Doppler shift (`nu = f / f_d`), so a tone at sample `n` has phase
//! `2π n nu / S_f + φ`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-width of the singular-vector tone grid, in units of `f_d`.
pub const VECTOR_BAND: f64 = 0.255;
/// Auxiliary scale in the singular-vector filter denominator.
pub const VECTOR_FILTER_FACTOR: f64 = 0.6;
/// Samples per tone (`N_freq = N_sam / 30`).
pub const SAMPLES_PER_TONE: usize = 30;
/// Smallest sample count that still yields two tones.
pub const MIN_TONE_SAMPLES: usize = 60;

const REANCHOR_INTERVAL: usize = 4096;
const LANES: usize = 8;

/// Singular-vector filter, capped at `1/sqrt(N)` near DC.
pub fn vector_filter(f: f64, f_d: f64, n_sam: usize, k_f: f64, n: usize) -> f64 {
    let cap = 1.0 / (n as f64).sqrt();
    let nu = (f / f_d).abs();
    if nu == 0.0 {
        return cap;
    }
    if nu > VECTOR_BAND * (1.0 + 1e-12) {
        return 0.0;
    }
    let a = 1.0 / (VECTOR_FILTER_FACTOR * n_sam as f64 * (1.0 + k_f).sqrt() * nu);
    a.min(cap)
}

/// Classical (Jakes) filter for the singular values.
pub fn value_filter(f: f64, f_d: f64) -> Result<f64> {
    let nu = f / f_d;
    if nu.abs() == 1.0 {
        return Err(Error::FilterSingularity { f_hz: f });
    }
    if nu.abs() > 1.0 {
        return Ok(0.0);
    }
    Ok(1.0 / (1.0 - nu * nu).abs().sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ToneKind {
    /// Narrowband singular-vector noise, grid over `±0.255 f_d`.
    Vector,
    /// Classical singular-value noise, grid strictly inside `±f_d`.
    Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToneSet {
    pub kind: ToneKind,
    /// Tone frequencies normalized to `f_d`.
    pub frequencies: Vec<f64>,
    pub amplitudes: Vec<f64>,
    /// Phases in `[0, 2π)`.
    pub phases: Vec<f64>,
}

/// `round(n_sam / 30)`, halves rounded up.
pub fn tone_count(n_sam: usize) -> usize {
    (n_sam + SAMPLES_PER_TONE / 2) / SAMPLES_PER_TONE
}

/// Normalized tone grid for `kind` with `count` tones.
pub fn tone_grid(kind: ToneKind, count: usize) -> Vec<f64> {
    match kind {
        ToneKind::Vector => {
            // FFT-style index range so that 0 is always a grid point and the
            // outermost tone sits on +0.255.
            let half = count / 2;
            let step = VECTOR_BAND / half as f64;
            let lo = count - 1 - half;
            (0..count).map(|i| (i as f64 - lo as f64) * step).collect()
        }
        ToneKind::Value => {
            let edge = count as f64 / (count as f64 + 1.0);
            if count == 1 {
                return vec![0.0];
            }
            let step = 2.0 * edge / (count - 1) as f64;
            (0..count).map(|i| -edge + i as f64 * step).collect()
        }
    }
}

/// Builds a tone set for a series of `n_sam` generated samples.
///
/// `k_f` and `n` only affect the vector filter.
pub fn make_tone_set<R: Rng + ?Sized>(
    kind: ToneKind,
    n_sam: usize,
    k_f: f64,
    n: usize,
    rng: &mut R,
) -> Result<ToneSet> {
    if n_sam < MIN_TONE_SAMPLES {
        return Err(Error::TooFewSamples {
            got: n_sam,
            needed: MIN_TONE_SAMPLES,
        });
    }
    let frequencies = tone_grid(kind, tone_count(n_sam));
    let amplitudes = frequencies
        .iter()
        .map(|&nu| match kind {
            ToneKind::Vector => Ok(vector_filter(nu, 1.0, n_sam, k_f, n)),
            ToneKind::Value => value_filter(nu, 1.0),
        })
        .collect::<Result<Vec<_>>>()?;
    let phases = frequencies
        .iter()
        .map(|_| rng.gen_range(0.0..TAU))
        .collect();
    Ok(ToneSet {
        kind,
        frequencies,
        amplitudes,
        phases,
    })
}

impl ToneSet {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Frequencies in Hz for a given maximum Doppler shift.
    pub fn frequencies_hz(&self, f_d: f64) -> Vec<f64> {
        self.frequencies.iter().map(|nu| nu * f_d).collect()
    }

    pub fn amplitude_sum(&self) -> f64 {
        self.amplitudes.iter().sum()
    }

    pub fn power(&self) -> f64 {
        self.amplitudes.iter().map(|a| a * a).sum()
    }
}

/// Phase of tone `nu` at sample `n`, reduced to one turn before scaling.
fn tone_phase(nu: f64, n: u64, s_f: f64) -> f64 {
    let turns = (n as f64 * nu / s_f).rem_euclid(1.0);
    TAU * turns
}

/// Direct evaluation of the tone sum at sample `n`.
pub fn tone_sum(ts: &ToneSet, n: u64, s_f: f64) -> Complex64 {
    ts.frequencies
        .iter()
        .zip(&ts.amplitudes)
        .zip(&ts.phases)
        .map(|((&nu, &a), &phi)| Complex64::from_polar(a, tone_phase(nu, n, s_f) + phi))
        .sum()
}

/// Unit-modulus phase trajectory; an exactly zero sum reuses `prev`.
pub fn phase_trajectory(ts: &ToneSet, n: u64, s_f: f64, prev: Complex64) -> Complex64 {
    unit_or(tone_sum(ts, n, s_f), prev)
}

pub(crate) fn unit_or(z: Complex64, prev: Complex64) -> Complex64 {
    let r = z.norm();
    if r > 0.0 && r.is_finite() {
        z / r
    } else {
        prev
    }
}

/// Tone sum over samples `start .. start + len`.
///
/// Equivalent to calling [`tone_sum`] per sample; uses rotating phasors with
/// exact re-anchoring every few thousand samples.
pub fn synthesize(ts: &ToneSet, s_f: f64, start: u64, len: usize) -> Vec<Complex64> {
    let padded = ts.len().div_ceil(LANES) * LANES;
    let mut zr = vec![0.0; padded];
    let mut zi = vec![0.0; padded];
    let mut rr = vec![1.0; padded];
    let mut ri = vec![0.0; padded];
    for (p, &nu) in ts.frequencies.iter().enumerate() {
        let step = Complex64::from_polar(1.0, TAU * nu / s_f);
        rr[p] = step.re;
        ri[p] = step.im;
    }

    let mut out = Vec::with_capacity(len);
    let mut done = 0usize;
    while done < len {
        let n0 = start + done as u64;
        for p in 0..ts.len() {
            let z = Complex64::from_polar(
                ts.amplitudes[p],
                tone_phase(ts.frequencies[p], n0, s_f) + ts.phases[p],
            );
            zr[p] = z.re;
            zi[p] = z.im;
        }
        let block = REANCHOR_INTERVAL.min(len - done);
        for _ in 0..block {
            let mut acc_r = [0.0f64; LANES];
            let mut acc_i = [0.0f64; LANES];
            for (((zr, zi), rr), ri) in zr
                .chunks_exact_mut(LANES)
                .zip(zi.chunks_exact_mut(LANES))
                .zip(rr.chunks_exact(LANES))
                .zip(ri.chunks_exact(LANES))
            {
                for l in 0..LANES {
                    acc_r[l] += zr[l];
                    acc_i[l] += zi[l];
                    let nr = zr[l] * rr[l] - zi[l] * ri[l];
                    let ni = zr[l] * ri[l] + zi[l] * rr[l];
                    zr[l] = nr;
                    zi[l] = ni;
                }
            }
            out.push(Complex64::new(acc_r.iter().sum(), acc_i.iter().sum()));
        }
        done += block;
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// Bin centre frequencies in Hz, ascending.
    pub bin_freqs: Vec<f64>,
    /// PSD in dB relative to the peak bin.
    pub psd_db: Vec<f64>,
    /// Bin spacing in Hz.
    pub resolution: f64,
}

/// Floor used for bins with exactly zero power.
pub const PSD_FLOOR_DB: f64 = -400.0;

/// Welch PSD: Hann window, 50% overlap, `segments` nominal segments,
/// normalized so the peak is 0 dB.
pub fn periodogram(series: &[Complex64], f_s: f64, segments: usize) -> Result<Spectrum> {
    let segments = segments.max(1);
    let seg_len = 2 * series.len() / (segments + 1);
    if seg_len < 8 || seg_len > series.len() {
        return Err(Error::TooFewSamples {
            got: series.len(),
            needed: 4 * (segments + 1),
        });
    }
    let hop = (seg_len / 2).max(1);
    let window: Vec<f64> = (0..seg_len)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / seg_len as f64).cos())
        .collect();

    let fft = FftPlanner::<f64>::new().plan_fft_forward(seg_len);
    let mut acc = vec![0.0f64; seg_len];
    let mut buf = vec![Complex64::new(0.0, 0.0); seg_len];
    let mut offset = 0usize;
    while offset + seg_len <= series.len() {
        for ((b, x), w) in buf
            .iter_mut()
            .zip(&series[offset..offset + seg_len])
            .zip(&window)
        {
            *b = x * w;
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        offset += hop;
    }

    let mut bins: Vec<(f64, f64)> = acc
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let signed = if k < seg_len.div_ceil(2) {
                k as f64
            } else {
                k as f64 - seg_len as f64
            };
            (signed * f_s / seg_len as f64, p)
        })
        .collect();
    bins.sort_by(|a, b| a.0.total_cmp(&b.0));
    let peak = bins.iter().map(|b| b.1).fold(0.0, f64::max);
    let psd_db = bins
        .iter()
        .map(|&(_, p)| {
            if p > 0.0 && peak > 0.0 {
                10.0 * (p / peak).log10()
            } else {
                PSD_FLOOR_DB
            }
        })
        .collect();
    Ok(Spectrum {
        bin_freqs: bins.iter().map(|b| b.0).collect(),
        psd_db,
        resolution: f_s / seg_len as f64,
    })
}
