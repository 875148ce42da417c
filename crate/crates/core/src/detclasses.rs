//! Deterministic and semi-deterministic classes I–IV.
//!
//! Classes I–III are closed-form functions of the sample index. Class IV
//! drives the first columns from ring-scatterer sums and carries the rest of
//! the matrices along with the same Householder transport as class V.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use num_complex::Complex64;
use rand::Rng;

use crate::config::{ModelClass, ModelConfig};
use crate::eigenmodel::{complete_matrices, seed_matrices, CapCounts, EigenTrace};
use crate::error::{Error, Result};
use crate::numkit::{householder_transition, CMatrix, CVector, DEFAULT_TOL};
use crate::par;
use crate::streams::{End, Stream, Streams};

/// Smallest scatterer count accepted for class IV.
pub const MIN_SCATTERERS: usize = 6;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn check_size(cfg: &ModelConfig) -> Result<usize> {
    if cfg.n != cfg.m || !(cfg.n == 2 || cfg.n == 4) {
        return Err(Error::Unsupported(format!(
            "class {} needs a 2x2 or 4x4 channel, got {}x{}",
            cfg.class.roman(),
            cfg.n,
            cfg.m
        )));
    }
    Ok(cfg.n)
}

/// `ω t` at sample `n`.
fn angle(n: usize, cfg: &ModelConfig) -> f64 {
    cfg.omega * n as f64 / cfg.f_s()
}

/// Polarity of the square wave; zero counts as positive.
fn polarity(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Class I 4x4 pattern for a given polarity.
pub(crate) fn class1_matrix4(sg: f64) -> CMatrix {
    let (a, b, cc, d) = (0.5 * sg, 0.5, -0.5 * sg, -0.5);
    CMatrix::from_real_rows(&[
        &[a, cc, cc, a],
        &[b, b, b, b],
        &[b, b, d, d],
        &[a, cc, a, cc],
    ])
}

/// Class I 2x2 `(U, V)` for a given polarity.
pub(crate) fn class1_matrix2(sg: f64) -> (CMatrix, CMatrix) {
    let h = FRAC_1_SQRT_2;
    let u = CMatrix::from_real_rows(&[&[h, -sg * h], &[sg * h, h]]);
    let v = CMatrix::from_real_rows(&[&[h, sg * h], &[-sg * h, h]]);
    (u, v)
}

/// Discrete swapping driven by `sgn(sin ωt)`.
pub fn class1(n: usize, cfg: &ModelConfig) -> Result<(CMatrix, CMatrix)> {
    let dim = check_size(cfg)?;
    let sg = polarity(angle(n, cfg).sin());
    Ok(match dim {
        2 => class1_matrix2(sg),
        _ => {
            let u = class1_matrix4(sg);
            let v = u.transpose();
            (u, v)
        }
    })
}

/// The printed 4x4 pattern with free entries `z_a`, `z_b`.
///
/// Its rows are mutually orthogonal for any `z_a`, `z_b`, but its row norms
/// are `2|z_a|` and `2|z_b|`, so it is unitary only when both are `±1/2`.
pub fn class2_z_matrix(za: f64, zb: f64) -> CMatrix {
    CMatrix::from_real_rows(&[
        &[za, -za, za, -za],
        &[zb, -zb, -zb, zb],
        &[za, za, -za, -za],
        &[zb, zb, zb, zb],
    ])
}

/// Constant 2x2 transmit matrix shared by classes II and III.
pub(crate) fn fixed_v2() -> CMatrix {
    let h = FRAC_1_SQRT_2;
    CMatrix::from_real_rows(&[&[h, -h], &[h, h]])
}

/// Gradual sinusoidal rotation of `U`, constant `V`.
pub fn class2(n: usize, cfg: &ModelConfig) -> Result<(CMatrix, CMatrix)> {
    let dim = check_size(cfg)?;
    let (s, co) = angle(n, cfg).sin_cos();
    Ok(match dim {
        2 => (CMatrix::from_real_rows(&[&[s, -co], &[co, s]]), fixed_v2()),
        _ => {
            // Row pairs (1,2) and (3,4) of the constant pattern rotated by the
            // 2x2 law, which scales rows by sin/cos like the printed form
            // while staying unitary.
            let w = class2_z_matrix(0.5, 0.5);
            let mut u = CMatrix::zeros(4, 4);
            for (r1, r2) in [(0, 1), (2, 3)] {
                for j in 0..4 {
                    u[(r1, j)] = w[(r1, j)] * s - w[(r2, j)] * co;
                    u[(r2, j)] = w[(r1, j)] * co + w[(r2, j)] * s;
                }
            }
            (u, w)
        }
    })
}

fn class3_elements(n: usize, cfg: &ModelConfig, theta: f64, scale: f64) -> (Complex64, Complex64) {
    let x = angle(n, cfg) + theta;
    let us = Complex64::from_polar(scale, PI * x.sin());
    let uc = Complex64::from_polar(scale, PI * x.cos());
    (us, uc)
}

/// Sinusoidally varying element phases with an optional offset `theta`.
pub fn class3(n: usize, cfg: &ModelConfig, theta: f64) -> Result<(CMatrix, CMatrix)> {
    let dim = check_size(cfg)?;
    Ok(match dim {
        2 => {
            let (us, uc) = class3_elements(n, cfg, theta, FRAC_1_SQRT_2);
            let u = CMatrix::from_rows(&[vec![us, -us], vec![uc, uc]])?;
            (u, fixed_v2())
        }
        _ => {
            let (us, uc) = class3_elements(n, cfg, theta, 0.5);
            let u1 = CVector(vec![us, uc, us, uc]);
            let seed = class2_z_matrix(0.5, 0.5);
            let t = householder_transition(&seed.column(0), &u1, DEFAULT_TOL)?;
            (t.try_mul(&seed)?, seed)
        }
    })
}

/// Constant singular values `∝ (r, r-1, ..., 1)` with `Σ |s_i|^2 = N M`.
pub fn constant_values(cfg: &ModelConfig) -> Vec<Complex64> {
    let r = cfg.modes();
    let raw: Vec<f64> = (0..r).map(|i| (r - i) as f64).collect();
    let power: f64 = raw.iter().map(|x| x * x).sum();
    let scale = ((cfg.n * cfg.m) as f64 / power).sqrt();
    raw.into_iter().map(|x| c(x * scale)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RingScatterSeries {
    pub samples: Vec<Complex64>,
    pub n_s: usize,
    pub s_f: f64,
    /// Scatterer angles around the ring.
    pub angles: Vec<f64>,
    /// Scatterer phase offsets.
    pub phases: Vec<f64>,
}

impl RingScatterSeries {
    /// Series from explicit geometry; no lower bound on the scatterer count.
    pub fn from_geometry(angles: Vec<f64>, phases: Vec<f64>, s_f: f64, length: usize) -> Self {
        let samples = (0..length)
            .map(|n| {
                angles
                    .iter()
                    .zip(&phases)
                    .map(|(phi, theta)| {
                        let turns = (n as f64 * phi.sin() / s_f).rem_euclid(1.0);
                        Complex64::from_polar(1.0, TAU * turns + theta)
                    })
                    .sum()
            })
            .collect();
        Self {
            samples,
            n_s: angles.len(),
            s_f,
            angles,
            phases,
        }
    }
}

/// Sum of `n_s` ring scatterers at evenly spaced angles with one random
/// rotation and independent uniform phases.
pub fn ring_scatter_series<R: Rng + ?Sized>(
    n_s: usize,
    s_f: f64,
    length: usize,
    rng: &mut R,
) -> Result<RingScatterSeries> {
    if n_s < MIN_SCATTERERS {
        return Err(Error::config(
            "n_s",
            format!("ring scatterer needs at least {MIN_SCATTERERS} scatterers, got {n_s}"),
        ));
    }
    let alpha: f64 = rng.gen_range(0.0..1.0);
    let angles = (0..n_s)
        .map(|i| TAU * (i as f64 + alpha) / n_s as f64)
        .collect();
    let phases = (0..n_s).map(|_| rng.gen_range(0.0..TAU)).collect();
    Ok(RingScatterSeries::from_geometry(
        angles, phases, s_f, length,
    ))
}

fn ring_first_vectors(
    cfg: &ModelConfig,
    streams: &Streams,
    end: End,
    dim: usize,
) -> Result<Vec<CVector>> {
    let indices: Vec<usize> = (0..dim).collect();
    let series = par::map(&indices, |&index| {
        let mut rng = streams.rng(Stream::RingScatter { end, index });
        ring_scatter_series(cfg.n_s, cfg.s_f, cfg.samples, &mut rng).map(|r| r.samples)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut prev = CVector::basis(dim, 0);
    let mut out = Vec::with_capacity(cfg.samples);
    for n in 0..cfg.samples {
        let a: Vec<Complex64> = series.iter().map(|s| s[n]).collect();
        let norm = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let u = if norm > 0.0 {
            CVector(a.iter().map(|z| z / norm).collect())
        } else {
            prev.clone()
        };
        prev = u.clone();
        out.push(u);
    }
    Ok(out)
}

/// Ring-scatter singular vectors with constant singular values.
pub fn class4(cfg: &ModelConfig) -> Result<EigenTrace> {
    let dim = check_size(cfg)?;
    if cfg.n_s < MIN_SCATTERERS {
        return Err(Error::config(
            "n_s",
            format!("class IV needs n_s >= {MIN_SCATTERERS}"),
        ));
    }
    let streams = Streams::new(cfg.seed);
    let (u_seed, v_seed) = seed_matrices(cfg, &streams)?;
    let (u, v) = par::join(
        || complete_matrices(&ring_first_vectors(cfg, &streams, End::Rx, dim)?, &u_seed),
        || complete_matrices(&ring_first_vectors(cfg, &streams, End::Tx, dim)?, &v_seed),
    );
    Ok(EigenTrace {
        config: cfg.clone(),
        u: u?,
        values: constant_series(cfg),
        v: v?,
        caps: CapCounts::default(),
    })
}

fn constant_series(cfg: &ModelConfig) -> Vec<Vec<Complex64>> {
    constant_values(cfg)
        .into_iter()
        .map(|s| vec![s; cfg.samples])
        .collect()
}

/// Trace for classes I–III.
fn closed_form_trace(cfg: &ModelConfig) -> Result<EigenTrace> {
    check_size(cfg)?;
    let theta = match cfg.class {
        ModelClass::III => Streams::new(cfg.seed)
            .rng(Stream::ClassPhase)
            .gen_range(0.0..TAU),
        _ => 0.0,
    };
    let pairs = par::map_range(cfg.samples, |n| match cfg.class {
        ModelClass::I => class1(n, cfg),
        ModelClass::II => class2(n, cfg),
        _ => class3(n, cfg, theta),
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let (u, v) = pairs.into_iter().unzip();
    Ok(EigenTrace {
        config: cfg.clone(),
        u,
        values: constant_series(cfg),
        v,
        caps: CapCounts::default(),
    })
}

/// Generates classes I–IV.
pub fn generate(cfg: &ModelConfig) -> Result<EigenTrace> {
    cfg.validate()?;
    match cfg.class {
        ModelClass::I | ModelClass::II | ModelClass::III => closed_form_trace(cfg),
        ModelClass::IV => class4(cfg),
        ModelClass::V => Err(Error::Unsupported(
            "class V is generated by eigenmodel".into(),
        )),
    }
}
