//! Outdated-CSI tracking scenarios, forced eigenmode swaps and per-mode SIR.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::detclasses::{class1_matrix2, class1_matrix4};
use crate::eigenmodel::EigenTrace;
use crate::error::{Error, Result};
use crate::numkit::{svd, CMatrix, SvdOrder};
use crate::par;

/// Serialization cap for SIR in dB; `±∞` is written as `±SIR_CAP_DB`.
pub const SIR_CAP_DB: f64 = 300.0;

/// Interference-to-signal power ratio at or below which SIR is reported as
/// `+∞`. Transported matrices are unitary to ~1e-14, so perfect-CSI
/// interference sits near 1e-28 of the signal; anything under 1e-16 is
/// treated as numerically absent.
pub const SIR_INFINITE_RATIO: f64 = 1e-16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum UpdateSchedule {
    /// Weights learned at sample 0 and never refreshed.
    Frozen,
    EverySample,
    /// Refreshed on samples `0, k, 2k, ...`.
    EveryK(usize),
}

impl UpdateSchedule {
    /// Sample whose decomposition supplies the weights at sample `n`.
    pub fn source(self, n: usize) -> usize {
        match self {
            UpdateSchedule::Frozen => 0,
            UpdateSchedule::EverySample => n,
            UpdateSchedule::EveryK(k) => n / k * k,
        }
    }
}

impl fmt::Display for UpdateSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UpdateSchedule::Frozen => write!(f, "frozen"),
            UpdateSchedule::EverySample => write!(f, "every-sample"),
            UpdateSchedule::EveryK(k) => write!(f, "every-{k}"),
        }
    }
}

impl std::str::FromStr for UpdateSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "frozen" => Ok(UpdateSchedule::Frozen),
            "every-sample" | "every" => Ok(UpdateSchedule::EverySample),
            _ => s
                .strip_prefix("every-")
                .and_then(|k| k.parse::<usize>().ok())
                .filter(|k| *k >= 1)
                .map(UpdateSchedule::EveryK)
                .ok_or_else(|| Error::config("schedule", format!("unknown schedule `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum InterferenceSum {
    /// `|Σ_{j≠i} ŝ_ji|^2`.
    #[default]
    Coherent,
    /// `Σ_{j≠i} |ŝ_ji|^2`.
    Power,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackingPolicy {
    pub u_update: UpdateSchedule,
    pub v_update: UpdateSchedule,
    /// Forced-swap period applied to the channel, if any.
    pub swap_injection: Option<usize>,
    pub interference: InterferenceSum,
}

impl TrackingPolicy {
    pub fn new(u_update: UpdateSchedule, v_update: UpdateSchedule) -> Self {
        Self {
            u_update,
            v_update,
            swap_injection: None,
            interference: InterferenceSum::Coherent,
        }
    }

    /// Both ends refreshed every sample.
    pub fn perfect() -> Self {
        Self::new(UpdateSchedule::EverySample, UpdateSchedule::EverySample)
    }

    pub fn with_swap(mut self, period: usize) -> Self {
        self.swap_injection = Some(period);
        self
    }

    pub fn validate(&self) -> Result<()> {
        for s in [self.u_update, self.v_update] {
            if s == UpdateSchedule::EveryK(0) {
                return Err(Error::config("schedule", "refresh interval must be >= 1"));
            }
        }
        if self.swap_injection == Some(0) {
            return Err(Error::config("swap", "swap period must be >= 1"));
        }
        Ok(())
    }

    /// Short descriptor recorded next to SIR outputs.
    pub fn describe(&self) -> String {
        let swap = self
            .swap_injection
            .map_or("none".to_string(), |p| p.to_string());
        let sum = match self.interference {
            InterferenceSum::Coherent => "coherent",
            InterferenceSum::Power => "power",
        };
        format!(
            "u={},v={},swap={swap},interference={sum}",
            self.u_update, self.v_update
        )
    }
}

/// Per-mode SIR for a channel decoded with weights `Û`, `V̂` (linear scale,
/// `+∞` when the interference vanishes).
pub fn sir(
    h: &CMatrix,
    u_hat: &CMatrix,
    v_hat: &CMatrix,
    interference: InterferenceSum,
) -> Result<Vec<f64>> {
    let (n, m) = (h.rows(), h.cols());
    if u_hat.rows() != n || !u_hat.is_square() || v_hat.rows() != m || !v_hat.is_square() {
        return Err(Error::Dimension(format!(
            "sir with H {n}x{m}, U {}x{}, V {}x{}",
            u_hat.rows(),
            u_hat.cols(),
            v_hat.rows(),
            v_hat.cols()
        )));
    }
    let modes = n.min(m);
    // row i, column j holds ŝ_ji = û_i^H H v̂_j
    let s_hat = u_hat.adjoint().try_mul(h)?.try_mul(v_hat)?;
    Ok((0..modes)
        .map(|i| {
            let signal = s_hat[(i, i)].norm_sqr();
            let others = (0..modes).filter(|&j| j != i).map(|j| s_hat[(i, j)]);
            let noise = match interference {
                InterferenceSum::Coherent => others.sum::<Complex64>().norm_sqr(),
                InterferenceSum::Power => others.map(|z| z.norm_sqr()).sum(),
            };
            if noise <= SIR_INFINITE_RATIO * signal {
                f64::INFINITY
            } else {
                signal / noise
            }
        })
        .collect())
}

pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// SIR time series, `sir_db[mode][sample]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SirSeries {
    /// Sample times in units of `1/f_d`.
    pub t_norm: Vec<f64>,
    pub sir_db: Vec<Vec<f64>>,
    pub mode_count: usize,
    pub policy: String,
}

impl SirSeries {
    pub fn len(&self) -> usize {
        self.t_norm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_norm.is_empty()
    }

    /// Samples where mode `mode` falls below `threshold_db`.
    pub fn collapses(&self, mode: usize, threshold_db: f64) -> usize {
        self.sir_db[mode]
            .iter()
            .filter(|&&x| x < threshold_db)
            .count()
    }
}

/// Permutation applied to `U` on swapped blocks: the change of basis between
/// the two polarities of the class I pattern.
pub fn swap_permutation(dim: usize) -> Result<CMatrix> {
    let (plus, minus) = match dim {
        2 => (class1_matrix2(1.0).0, class1_matrix2(-1.0).0),
        4 => (class1_matrix4(1.0), class1_matrix4(-1.0)),
        _ => {
            return Err(Error::Unsupported(format!(
                "forced swap is defined for 2 or 4 receive dimensions, got {dim}"
            )))
        }
    };
    plus.adjoint().try_mul(&minus)
}

/// Whether sample `n` lies in a swapped block.
pub fn is_swapped(n: usize, period: usize) -> bool {
    (n / period) % 2 == 1
}

/// Applies the swap permutation to `U` on every other block of `period`
/// samples, starting unswapped. `V` and `S` are left untouched.
pub fn forced_swap(trace: &EigenTrace, period: usize) -> Result<EigenTrace> {
    if period == 0 {
        return Err(Error::config("swap", "swap period must be >= 1"));
    }
    let q = swap_permutation(trace.config.n)?;
    let u = par::map_range(trace.len(), |n| {
        if is_swapped(n, period) {
            &trace.u[n] * &q
        } else {
            trace.u[n].clone()
        }
    });
    Ok(EigenTrace { u, ..trace.clone() })
}

fn channel_for(trace: &EigenTrace, policy: &TrackingPolicy) -> Result<Vec<CMatrix>> {
    policy.validate()?;
    Ok(match policy.swap_injection {
        Some(p) => forced_swap(trace, p)?.channel().h,
        None => trace.channel().h,
    })
}

fn evaluate(
    trace: &EigenTrace,
    h: &[CMatrix],
    u_src: &[CMatrix],
    v_src: &[CMatrix],
    policy: &TrackingPolicy,
) -> Result<SirSeries> {
    let modes = trace.modes();
    let per_sample = par::map_range(h.len(), |n| {
        let u_hat = &u_src[policy.u_update.source(n)];
        let v_hat = &v_src[policy.v_update.source(n)];
        sir(&h[n], u_hat, v_hat, policy.interference)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut sir_db = vec![Vec::with_capacity(h.len()); modes];
    for row in &per_sample {
        for (mode, x) in row.iter().enumerate() {
            sir_db[mode].push(to_db(*x));
        }
    }
    Ok(SirSeries {
        t_norm: (0..h.len()).map(|n| trace.t_norm(n)).collect(),
        sir_db,
        mode_count: modes,
        policy: policy.describe(),
    })
}

/// SIR when the receiver tracks the natural-path `U`, `V` of `trace` on the
/// policy's schedules while the channel optionally carries injected swaps.
/// Weights at sample 0 are exact.
pub fn run_tracking(trace: &EigenTrace, policy: &TrackingPolicy) -> Result<SirSeries> {
    let h = channel_for(trace, policy)?;
    evaluate(trace, &h, &trace.u, &trace.v, policy)
}

/// As [`run_tracking`], but the weights come from a per-sample
/// descending-order SVD of the assembled channel.
pub fn sorted_decomposition_sir(trace: &EigenTrace, policy: &TrackingPolicy) -> Result<SirSeries> {
    let h = channel_for(trace, policy)?;
    let (u, v) = sorted_decompositions(&h)?;
    evaluate(trace, &h, &u, &v, policy)
}

/// Descending SVD of every channel sample.
pub fn sorted_decompositions(h: &[CMatrix]) -> Result<(Vec<CMatrix>, Vec<CMatrix>)> {
    let triples = par::map(h, |x| svd(x, SvdOrder::Descending))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(triples.into_iter().map(|t| (t.u, t.v)).unzip())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ModelClass, ModelConfig, RunKind};
    use crate::numkit::{assemble_diag, complex_gaussian_matrix, random_unitary, unitarity_error};
    use crate::{generate, numkit::SvdOrder};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn trace(class: ModelClass, n: usize, samples: usize) -> EigenTrace {
        let mut c = ModelConfig::defaults(RunKind::Scenario);
        c.class = class;
        c.n = n;
        c.m = n;
        c.samples = samples;
        generate(&c).unwrap()
    }

    #[test]
    fn perfect_csi_is_infinite() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = complex_gaussian_matrix(3, 3, &mut rng);
        let t = svd(&h, SvdOrder::Descending).unwrap();
        let out = sir(&h, &t.u, &t.v, InterferenceSum::Coherent).unwrap();
        assert!(out.iter().all(|x| x.is_infinite() && *x > 0.0));
    }

    #[test]
    fn swapped_receive_weights_zero_the_signal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = random_unitary(2, &mut rng);
        let v = random_unitary(2, &mut rng);
        let h = assemble_diag(
            &u,
            &[Complex64::new(1.5, 0.0), Complex64::new(0.5, 0.2)],
            &v,
        )
        .unwrap();
        let mut u_hat = u.clone();
        u_hat.swap_columns(0, 1);
        let out = sir(&h, &u_hat, &v, InterferenceSum::Coherent).unwrap();
        assert!(to_db(out[0]) < -200.0, "{}", out[0]);
    }

    #[test]
    fn identity_weights_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = complex_gaussian_matrix(2, 2, &mut rng);
        let id = CMatrix::identity(2);
        let out = sir(&h, &id, &id, InterferenceSum::Coherent).unwrap();
        // with identity weights ŝ_ji is simply h_ij
        let expected = [
            h[(0, 0)].norm_sqr() / h[(0, 1)].norm_sqr(),
            h[(1, 1)].norm_sqr() / h[(1, 0)].norm_sqr(),
        ];
        for (a, b) in out.iter().zip(expected) {
            assert!((a / b - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn power_sum_differs_from_coherent_for_three_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = complex_gaussian_matrix(3, 3, &mut rng);
        let id = CMatrix::identity(3);
        let coh = sir(&h, &id, &id, InterferenceSum::Coherent).unwrap();
        let pow = sir(&h, &id, &id, InterferenceSum::Power).unwrap();
        let expected0 = h[(0, 0)].norm_sqr() / (h[(0, 1)].norm_sqr() + h[(0, 2)].norm_sqr());
        assert!((pow[0] / expected0 - 1.0).abs() < 1e-12);
        let coherent0 = h[(0, 0)].norm_sqr() / (h[(0, 1)] + h[(0, 2)]).norm_sqr();
        assert!((coh[0] / coherent0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let h = CMatrix::zeros(2, 3);
        assert!(sir(
            &h,
            &CMatrix::identity(2),
            &CMatrix::identity(2),
            InterferenceSum::Coherent
        )
        .is_err());
    }

    #[test]
    fn swap_permutations() {
        let q2 = swap_permutation(2).unwrap();
        assert!(q2.max_abs_diff(&CMatrix::from_real_rows(&[&[0.0, 1.0], &[-1.0, 0.0]])) < 1e-15);
        let q4 = swap_permutation(4).unwrap();
        let expected = CMatrix::from_real_rows(&[
            &[0.0, 1.0, 0.0, 0.0],
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
            &[0.0, 0.0, 1.0, 0.0],
        ]);
        assert!(q4.max_abs_diff(&expected) < 1e-15);
        assert!(swap_permutation(3).is_err());
    }

    #[test]
    fn forced_swap_block_convention() {
        let tr = trace(ModelClass::V, 4, 600);
        let swapped = forced_swap(&tr, 2).unwrap();
        assert_eq!(swapped.v, tr.v);
        assert_eq!(swapped.values, tr.values);
        for n in 0..8 {
            let changed = swapped.u[n] != tr.u[n];
            assert_eq!(changed, matches!(n, 2 | 3 | 6 | 7), "sample {n}");
            assert!(unitarity_error(&swapped.u[n]) < 1e-9);
        }
        let unchanged = forced_swap(&tr, usize::MAX).unwrap();
        assert_eq!(unchanged, tr);
    }

    #[test]
    fn every_sample_tracking_is_perfect_for_all_classes() {
        for class in [
            ModelClass::I,
            ModelClass::II,
            ModelClass::III,
            ModelClass::IV,
            ModelClass::V,
        ] {
            for n in [2, 4] {
                let tr = trace(class, n, 400);
                let out = run_tracking(&tr, &TrackingPolicy::perfect()).unwrap();
                assert!(
                    out.sir_db.iter().flatten().all(|x| *x == f64::INFINITY),
                    "{class:?} {n}"
                );
            }
        }
    }

    #[test]
    fn consistent_permutation_of_both_ends_is_harmless() {
        let tr = trace(ModelClass::V, 4, 200);
        for n in 0..tr.len() {
            let h = tr.assemble(n);
            let mut u = tr.u[n].clone();
            let mut v = tr.v[n].clone();
            u.swap_columns(0, 2);
            v.swap_columns(0, 2);
            let out = sir(&h, &u, &v, InterferenceSum::Coherent).unwrap();
            assert!(out.iter().all(|x| x.is_infinite()));
        }
    }

    #[test]
    fn frozen_receive_weights_degrade() {
        let tr = trace(ModelClass::V, 2, 4000);
        let policy = TrackingPolicy::new(UpdateSchedule::Frozen, UpdateSchedule::EverySample);
        let out = run_tracking(&tr, &policy).unwrap();
        assert_eq!(out.sir_db[0][0], f64::INFINITY);
        let late = out.sir_db[0][3000..]
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        assert!(late.is_finite() && late < 60.0, "{late}");
    }

    #[test]
    fn refresh_schedule_sources() {
        assert_eq!(UpdateSchedule::EveryK(5).source(12), 10);
        assert_eq!(UpdateSchedule::Frozen.source(12), 0);
        assert_eq!(
            "every-5".parse::<UpdateSchedule>().unwrap(),
            UpdateSchedule::EveryK(5)
        );
        assert!("every-0".parse::<UpdateSchedule>().is_err());
        let p = TrackingPolicy::perfect().with_swap(2);
        assert_eq!(
            p.describe(),
            "u=every-sample,v=every-sample,swap=2,interference=coherent"
        );
    }

    #[test]
    fn sorted_decomposition_of_static_channel() {
        let mut c = ModelConfig::defaults(RunKind::Scenario);
        c.class = ModelClass::I;
        // ω = 0 keeps class I constant
        c.omega = 0.0;
        c.samples = 100;
        let tr = generate(&c).unwrap();
        let policy = TrackingPolicy::new(UpdateSchedule::Frozen, UpdateSchedule::Frozen);
        let out = sorted_decomposition_sir(&tr, &policy).unwrap();
        assert!(out.sir_db.iter().flatten().all(|x| *x == f64::INFINITY));
    }

    #[test]
    fn forced_swap_hurts_natural_tracking_more_than_sorted() {
        let tr = trace(ModelClass::V, 2, 4000);
        let policy = TrackingPolicy::perfect().with_swap(2);
        let natural = run_tracking(&tr, &policy).unwrap();
        let sorted = sorted_decomposition_sir(&tr, &policy).unwrap();
        assert!(sorted.collapses(0, 0.0) < natural.collapses(0, 0.0));
    }

    proptest! {
        #[test]
        fn sir_invariant_to_global_scale(seed in any::<u64>(), re in -3.0f64..3.0, im in -3.0f64..3.0) {
            prop_assume!(re.abs() + im.abs() > 1e-3);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = complex_gaussian_matrix(3, 2, &mut rng);
            let u = random_unitary(3, &mut rng);
            let v = random_unitary(2, &mut rng);
            let a = sir(&h, &u, &v, InterferenceSum::Coherent).unwrap();
            let b = sir(&h.scale(Complex64::new(re, im)), &u, &v, InterferenceSum::Coherent).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x / y - 1.0).abs() < 1e-9);
            }
        }
    }
}
