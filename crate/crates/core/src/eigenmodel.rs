//! Stochastic class V generator.
//!
//! The first columns `u_1(t)`, `v_1(t)` come from narrowband tone sums with a
//! unit-norm closure on the last element; the remaining columns are carried
//! along by Householder transitions from an SVD seed. Singular values are
//! classical-Doppler tone sums with an optional LOS tone.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{ModelClass, ModelConfig};
use crate::doppler::{make_tone_set, synthesize, unit_or, ToneKind};
use crate::error::{Error, Result};
use crate::numkit::{
    apply_transition, assemble_diag, complex_gaussian_matrix, householder_transition,
    reorthonormalize, svd, unitarity_error, CMatrix, CVector, SvdOrder, DEFAULT_TOL,
};
use crate::par;
use crate::streams::{End, Stream, Streams};

/// Re-orthonormalize the transported matrices after this many steps.
pub const REORTHO_INTERVAL: usize = 1000;
/// Default abort threshold on the fraction of capped samples.
pub const DEFAULT_MAX_CAP_FRACTION: f64 = 0.5;
/// Unitarity tolerance accepted for seeds and generated matrices.
pub const UNITARY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct FirstVectorSeries {
    pub vectors: Vec<CVector>,
    /// Samples on which the partial norm exceeded one and was capped.
    pub capped: usize,
}

impl FirstVectorSeries {
    pub fn cap_fraction(&self) -> f64 {
        if self.vectors.is_empty() {
            0.0
        } else {
            self.capped as f64 / self.vectors.len() as f64
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapCounts {
    pub rx: usize,
    pub tx: usize,
}

/// Time series of `(U, S, V)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenTrace {
    pub config: ModelConfig,
    pub u: Vec<CMatrix>,
    /// Complex singular values, indexed `[mode][sample]`.
    pub values: Vec<Vec<Complex64>>,
    pub v: Vec<CMatrix>,
    pub caps: CapCounts,
}

/// Time series of assembled physical channels.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelTrace {
    pub config: ModelConfig,
    pub h: Vec<CMatrix>,
}

impl ChannelTrace {
    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    /// Series of element `h_ij`.
    pub fn element(&self, i: usize, j: usize) -> Vec<Complex64> {
        self.h.iter().map(|h| h[(i, j)]).collect()
    }
}

impl EigenTrace {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn modes(&self) -> usize {
        self.values.len()
    }

    /// Timestamp of sample `n` in seconds.
    pub fn t(&self, n: usize) -> f64 {
        n as f64 / self.config.f_s()
    }

    /// Timestamp of sample `n` in units of `1/f_d`.
    pub fn t_norm(&self, n: usize) -> f64 {
        n as f64 / self.config.s_f
    }

    /// Diagonal values at sample `n`.
    pub fn values_at(&self, n: usize) -> Vec<Complex64> {
        self.values.iter().map(|s| s[n]).collect()
    }

    /// `S(t_n)` as an `N x M` matrix with diagonal support.
    pub fn s_matrix(&self, n: usize) -> CMatrix {
        CMatrix::diagonal(self.config.n, self.config.m, &self.values_at(n))
            .expect("values sized to min(N, M)")
    }

    pub fn assemble(&self, n: usize) -> CMatrix {
        assemble_diag(&self.u[n], &self.values_at(n), &self.v[n]).expect("consistent trace dims")
    }

    pub fn channel(&self) -> ChannelTrace {
        let h = par::map_range(self.len(), |n| self.assemble(n));
        ChannelTrace {
            config: self.config.clone(),
            h,
        }
    }

    /// `Σ_i mean |s_i|^2`.
    pub fn mean_lambda_sum(&self) -> f64 {
        self.values.iter().map(|s| mean_power(s)).sum()
    }

    /// Largest unitarity error over all `U(t_n)` and `V(t_n)`.
    pub fn max_unitarity_error(&self) -> f64 {
        let u = par::map_range(self.len(), |n| unitarity_error(&self.u[n]));
        let v = par::map_range(self.len(), |n| unitarity_error(&self.v[n]));
        u.into_iter().chain(v).fold(0.0, f64::max)
    }

    /// Checks dimensions, equal lengths and unitarity within `tol`.
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        let (n, m) = (self.config.n, self.config.m);
        let len = self.len();
        if self.v.len() != len
            || self.values.len() != n.min(m)
            || self.values.iter().any(|s| s.len() != len)
        {
            return Err(Error::Dimension("trace sequences differ in length".into()));
        }
        if self.u.iter().any(|u| u.rows() != n || u.cols() != n)
            || self.v.iter().any(|v| v.rows() != m || v.cols() != m)
        {
            return Err(Error::Dimension(format!(
                "trace matrices are not {n}x{n} / {m}x{m}"
            )));
        }
        let error = self.max_unitarity_error();
        if error.is_nan() || error >= tol {
            return Err(Error::NotUnitary { error });
        }
        Ok(())
    }
}

pub(crate) fn mean_power(s: &[Complex64]) -> f64 {
    s.iter().map(|z| z.norm_sqr()).sum::<f64>() / s.len() as f64
}

fn mean_abs(s: &[Complex64]) -> f64 {
    s.iter().map(|z| z.norm()).sum::<f64>() / s.len() as f64
}

/// Unit-norm first-column series of length `cfg.samples` for one end.
pub fn gen_first_vector_series(
    dim: usize,
    cfg: &ModelConfig,
    streams: &Streams,
    end: End,
) -> Result<FirstVectorSeries> {
    gen_first_vector_series_with_limit(dim, cfg, streams, end, DEFAULT_MAX_CAP_FRACTION)
}

/// As [`gen_first_vector_series`] with an explicit cap-fraction abort limit.
pub fn gen_first_vector_series_with_limit(
    dim: usize,
    cfg: &ModelConfig,
    streams: &Streams,
    end: End,
    max_cap_fraction: f64,
) -> Result<FirstVectorSeries> {
    if dim < 2 {
        return Err(Error::Dimension(format!(
            "first-vector dimension {dim} < 2"
        )));
    }
    let gen = cfg.generated_samples();
    let kept = cfg.samples;
    let start = (gen - kept) as u64;

    // dim - 1 free elements plus the phase trajectory of the last one
    let streams_for: Vec<Stream> = (0..dim - 1)
        .map(|index| Stream::VectorElement { end, index })
        .chain(std::iter::once(Stream::VectorPhase { end }))
        .collect();
    let series = par::map(&streams_for, |&stream| -> Result<Vec<Complex64>> {
        let mut rng = streams.rng(stream);
        let ts = make_tone_set(ToneKind::Vector, gen, cfg.k_f, dim, &mut rng)?;
        Ok(synthesize(&ts, cfg.s_f, start, kept))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let (elements, phase) = series.split_at(dim - 1);
    let phase = &phase[0];

    let mut vectors = Vec::with_capacity(kept);
    let mut capped = 0usize;
    let mut prev_phase = Complex64::new(1.0, 0.0);
    for n in 0..kept {
        let mut u: Vec<Complex64> = elements.iter().map(|e| e[n]).collect();
        let partial: f64 = u.iter().map(|z| z.norm_sqr()).sum();
        let dir = unit_or(phase[n], prev_phase);
        prev_phase = dir;
        if partial > 1.0 {
            capped += 1;
            let scale = 1.0 / partial.sqrt();
            u.iter_mut().for_each(|z| *z *= scale);
            u.push(Complex64::new(0.0, 0.0));
        } else {
            u.push(dir * (1.0 - partial).sqrt());
        }
        vectors.push(CVector(u));
    }
    let out = FirstVectorSeries { vectors, capped };
    let fraction = out.cap_fraction();
    if fraction > max_cap_fraction {
        return Err(Error::ConstraintViolation {
            dim,
            fraction: 100.0 * fraction,
            limit: 100.0 * max_cap_fraction,
        });
    }
    Ok(out)
}

/// Householder transport of `seed` along the first-column series.
pub fn complete_matrices(u1_series: &[CVector], seed: &CMatrix) -> Result<Vec<CMatrix>> {
    let Some(first) = u1_series.first() else {
        return Ok(Vec::new());
    };
    let dim = first.len();
    if !seed.is_square() || seed.rows() != dim {
        return Err(Error::Dimension(format!(
            "seed {}x{} for vectors of length {dim}",
            seed.rows(),
            seed.cols()
        )));
    }
    let error = unitarity_error(seed);
    if error.is_nan() || error >= UNITARY_TOL {
        return Err(Error::NotUnitary { error });
    }

    // pre-rotate the seed so its first column matches the first Doppler sample
    let t0 = householder_transition(&seed.column(0).normalized(), first, DEFAULT_TOL)?;
    let mut current = apply_transition(&t0, seed)?;
    let mut out = Vec::with_capacity(u1_series.len());
    out.push(current.clone());
    for (step, pair) in u1_series.windows(2).enumerate() {
        let t = householder_transition(&pair[0], &pair[1], DEFAULT_TOL)?;
        current = apply_transition(&t, &current)?;
        if (step + 1) % REORTHO_INTERVAL == 0 {
            reorthonormalize(&mut current);
        }
        out.push(current.clone());
    }
    Ok(out)
}

/// Singular-value series `[mode][sample]`, ratio-adjusted and normalized so
/// that `Σ_i mean |s_i|^2 = N M` over the emitted samples.
pub fn gen_singular_values(cfg: &ModelConfig, streams: &Streams) -> Result<Vec<Vec<Complex64>>> {
    let modes = cfg.modes();
    if let Some(r) = &cfg.s_ratios {
        if r.len() != modes - 1 {
            return Err(Error::config(
                "s_ratios",
                format!("needs {} entries, got {}", modes - 1, r.len()),
            ));
        }
    }
    let indices: Vec<usize> = (0..modes).collect();
    let mut values = par::map(&indices, |&index| value_series(cfg, streams, index))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    if let Some(ratios) = &cfg.s_ratios {
        for (j, &ratio) in ratios.iter().enumerate() {
            let scale = ratio * mean_abs(&values[j]) / mean_abs(&values[j + 1]);
            values[j + 1].iter_mut().for_each(|z| *z *= scale);
        }
    }
    normalize_values(&mut values, (cfg.n * cfg.m) as f64);
    Ok(values)
}

/// Raw series of singular value `index` before ratios and normalization.
pub(crate) fn value_series(
    cfg: &ModelConfig,
    streams: &Streams,
    index: usize,
) -> Result<Vec<Complex64>> {
    let gen = cfg.generated_samples();
    let kept = cfg.samples;
    let start = (gen - kept) as u64;
    let mut rng = streams.rng(Stream::SingularValue { index });
    let ts = make_tone_set(ToneKind::Value, gen, cfg.k_f, cfg.n, &mut rng)?;
    let mut s = synthesize(&ts, cfg.s_f, start, kept);
    if cfg.k_f > 0.0 {
        let los = cfg.k_f.sqrt() / ts.amplitude_sum();
        for (k, z) in s.iter_mut().enumerate() {
            *z += los_tone(los, start + k as u64, cfg.s_f);
        }
    }
    Ok(s)
}

fn los_tone(amplitude: f64, n: u64, s_f: f64) -> Complex64 {
    let turns = (n as f64 / s_f).rem_euclid(1.0);
    Complex64::from_polar(amplitude, std::f64::consts::TAU * turns)
}

/// Global scale so that `Σ_i mean |s_i|^2 = target`.
pub(crate) fn normalize_values(values: &mut [Vec<Complex64>], target: f64) {
    let total: f64 = values.iter().map(|s| mean_power(s)).sum();
    if total > 0.0 {
        let scale = (target / total).sqrt();
        values.iter_mut().flatten().for_each(|z| *z *= scale);
    }
}

/// Seed `(U, V)` from the SVD of one random complex Gaussian sample.
pub fn seed_matrices(cfg: &ModelConfig, streams: &Streams) -> Result<(CMatrix, CMatrix)> {
    let mut rng = streams.rng(Stream::Seed);
    let h0 = complex_gaussian_matrix(cfg.n, cfg.m, &mut rng);
    let seed = svd(&h0, SvdOrder::Descending)?;
    Ok((seed.u, seed.v))
}

/// Full class V pipeline, deterministic in `cfg.seed`.
pub fn gen_class_v(cfg: &ModelConfig) -> Result<EigenTrace> {
    gen_class_v_with_limit(cfg, DEFAULT_MAX_CAP_FRACTION)
}

pub fn gen_class_v_with_limit(cfg: &ModelConfig, max_cap_fraction: f64) -> Result<EigenTrace> {
    cfg.validate()?;
    if cfg.class != ModelClass::V {
        return Err(Error::Unsupported(format!(
            "class V generator called with class {}",
            cfg.class.roman()
        )));
    }
    let streams = Streams::new(cfg.seed);
    let (u_seed, v_seed) = seed_matrices(cfg, &streams)?;

    let end_job = |end: End| -> Result<(Vec<CMatrix>, usize)> {
        let (dim, seed) = match end {
            End::Rx => (cfg.n, &u_seed),
            End::Tx => (cfg.m, &v_seed),
        };
        let first = gen_first_vector_series_with_limit(dim, cfg, &streams, end, max_cap_fraction)?;
        Ok((complete_matrices(&first.vectors, seed)?, first.capped))
    };
    let ((rx, tx), values) = par::join(
        || par::join(|| end_job(End::Rx), || end_job(End::Tx)),
        || gen_singular_values(cfg, &streams),
    );
    let (u, rx_caps) = rx?;
    let (v, tx_caps) = tx?;
    Ok(EigenTrace {
        config: cfg.clone(),
        u,
        values: values?,
        v,
        caps: CapCounts {
            rx: rx_caps,
            tx: tx_caps,
        },
    })
}
