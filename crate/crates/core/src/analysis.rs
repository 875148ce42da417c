//! Empirical CDFs and slope fits, Doppler band rejection, swap detection and
//! comparisons between natural-path and sorted decompositions.

use serde::{Deserialize, Serialize};

use crate::doppler::{Spectrum, PSD_FLOOR_DB};
use crate::eigenmodel::EigenTrace;
use crate::error::{Error, Result};
use crate::numkit::{svd, CMatrix, SvdOrder};
use crate::par;

/// Smallest input accepted by [`empirical_cdf`].
pub const MIN_CDF_SAMPLES: usize = 100;
/// Smallest sample count a slope fit will use.
pub const MIN_SLOPE_SAMPLES: usize = 1000;
/// Default probability window for Rayleigh slope fits.
pub const SLOPE_WINDOW: (f64, f64) = (1e-3, 1e-1);
/// Out-of-band guard beyond `f_d`, as a fraction of `f_d`.
pub const OOB_GUARD: f64 = 0.05;
pub const SWAP_THRESHOLD: f64 = 0.5;

/// Staircase CDF over distinct levels in dB relative to a reference RMS.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cdf {
    pub levels_db: Vec<f64>,
    /// `P(level <= levels_db[k])`.
    pub prob: Vec<f64>,
    pub sample_count: usize,
}

impl Cdf {
    pub fn len(&self) -> usize {
        self.levels_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels_db.is_empty()
    }

    /// Right-continuous staircase value at `level_db`.
    pub fn eval(&self, level_db: f64) -> f64 {
        match self.levels_db.partition_point(|&l| l <= level_db) {
            0 => 0.0,
            k => self.prob[k - 1],
        }
    }

    /// Left limit of the staircase at `level_db`.
    pub fn eval_below(&self, level_db: f64) -> f64 {
        match self.levels_db.partition_point(|&l| l < level_db) {
            0 => 0.0,
            k => self.prob[k - 1],
        }
    }

    /// Smallest level whose probability reaches `p`.
    pub fn quantile(&self, p: f64) -> Option<f64> {
        let k = self.prob.partition_point(|&q| q < p);
        self.levels_db.get(k).copied()
    }
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// CDF of `magnitudes` in dB relative to their own RMS.
pub fn empirical_cdf(magnitudes: &[f64]) -> Result<Cdf> {
    if magnitudes.is_empty() {
        return Err(Error::Analysis("empty input".into()));
    }
    empirical_cdf_with_reference(magnitudes, rms(magnitudes))
}

/// CDF of `magnitudes` in dB relative to `reference_rms`, so that several
/// populations can share one level axis.
pub fn empirical_cdf_with_reference(magnitudes: &[f64], reference_rms: f64) -> Result<Cdf> {
    if magnitudes.len() < MIN_CDF_SAMPLES {
        return Err(Error::TooFewSamples {
            got: magnitudes.len(),
            needed: MIN_CDF_SAMPLES,
        });
    }
    if let Some(x) = magnitudes.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::Analysis(format!(
            "magnitudes must be finite and >= 0, got {x}"
        )));
    }
    if !(reference_rms.is_finite() && reference_rms > 0.0) {
        return Err(Error::Analysis(format!(
            "reference RMS must be positive, got {reference_rms}"
        )));
    }
    let mut levels: Vec<f64> = magnitudes
        .iter()
        .map(|&x| {
            if x == 0.0 {
                PSD_FLOOR_DB
            } else {
                (20.0 * (x / reference_rms).log10()).max(PSD_FLOOR_DB)
            }
        })
        .collect();
    levels.sort_by(f64::total_cmp);
    let total = levels.len() as f64;
    let mut out = Cdf {
        levels_db: Vec::new(),
        prob: Vec::new(),
        sample_count: levels.len(),
    };
    for (k, &l) in levels.iter().enumerate() {
        let p = (k + 1) as f64 / total;
        if out.levels_db.last() == Some(&l) {
            *out.prob.last_mut().unwrap() = p;
        } else {
            out.levels_db.push(l);
            out.prob.push(p);
        }
    }
    Ok(out)
}

/// Least-squares slope of level (dB) against `log10(prob)` between the
/// probability bounds, in dB per decade.
pub fn rayleigh_slope(cdf: &Cdf, p_lo: f64, p_hi: f64) -> Result<f64> {
    if !(0.0 < p_lo && p_lo < p_hi && p_hi < 0.5) {
        return Err(Error::Analysis(format!(
            "bad probability window [{p_lo}, {p_hi}]"
        )));
    }
    if cdf.sample_count < MIN_SLOPE_SAMPLES {
        return Err(Error::TooFewSamples {
            got: cdf.sample_count,
            needed: MIN_SLOPE_SAMPLES,
        });
    }
    if cdf.prob.first().is_none_or(|&p| p > p_lo) {
        return Err(Error::Analysis(format!(
            "CDF does not reach down to p = {p_lo}"
        )));
    }
    let pts: Vec<(f64, f64)> = cdf
        .prob
        .iter()
        .zip(&cdf.levels_db)
        .filter(|(p, _)| (p_lo..=p_hi).contains(*p))
        .map(|(p, l)| (p.log10(), *l))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Analysis(format!(
            "{} points in [{p_lo}, {p_hi}], need at least 3",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::Analysis("degenerate slope fit".into()));
    }
    Ok(sxy / sxx)
}

/// Peak PSD minus the largest PSD at `|f| > edge_hz`.
pub fn band_rejection(spectrum: &Spectrum, edge_hz: f64) -> Result<f64> {
    let peak = spectrum
        .psd_db
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let outside = spectrum
        .bin_freqs
        .iter()
        .zip(&spectrum.psd_db)
        .filter(|(f, _)| f.abs() > edge_hz)
        .map(|(_, p)| *p)
        .fold(None, |acc: Option<f64>, p| {
            Some(acc.map_or(p, |a| a.max(p)))
        });
    outside
        .map(|o| peak - o)
        .ok_or_else(|| Error::Analysis(format!("no spectrum bins beyond {edge_hz} Hz")))
}

/// Rejection beyond `f_d·(1 + OOB_GUARD)`.
pub fn oob_rejection(spectrum: &Spectrum, f_d: f64) -> Result<f64> {
    band_rejection(spectrum, f_d * (1.0 + OOB_GUARD))
}

/// Indices `n` where the first column decorrelates between `n` and `n + 1`.
pub fn detect_swaps(u_series: &[CMatrix], threshold: f64) -> Result<Vec<usize>> {
    if u_series.len() < 2 {
        return Err(Error::TooFewSamples {
            got: u_series.len(),
            needed: 2,
        });
    }
    if !(0.0 < threshold && threshold < 1.0) {
        return Err(Error::Analysis(format!(
            "threshold must lie in (0, 1), got {threshold}"
        )));
    }
    Ok(u_series
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0].column(0).dot(&w[1].column(0)).norm() < threshold)
        .map(|(n, _)| n)
        .collect())
}

/// Largest vertical distance between two CDFs over their common level range.
pub fn distribution_compare(a: &Cdf, b: &Cdf) -> Result<f64> {
    let (Some(a_lo), Some(a_hi), Some(b_lo), Some(b_hi)) = (
        a.levels_db.first(),
        a.levels_db.last(),
        b.levels_db.first(),
        b.levels_db.last(),
    ) else {
        return Err(Error::Analysis("empty CDF".into()));
    };
    let lo = a_lo.max(*b_lo);
    let hi = a_hi.min(*b_hi);
    if lo > hi {
        return Err(Error::Analysis(format!(
            "disjoint level ranges [{a_lo}, {a_hi}] and [{b_lo}, {b_hi}]"
        )));
    }
    // both staircases only change at their own levels; the left limit
    // catches the full jump at each step
    let mut worst: f64 = 0.0;
    for &l in a
        .levels_db
        .iter()
        .chain(&b.levels_db)
        .filter(|l| (lo..=hi).contains(*l))
    {
        worst = worst.max((a.eval(l) - b.eval(l)).abs());
        if l > lo {
            worst = worst.max((a.eval_below(l) - b.eval_below(l)).abs());
        }
    }
    Ok(worst)
}

/// Largest relative deviation between the descending magnitudes of the
/// trace's singular values and the singular values of the re-decomposed
/// assembled channel.
pub fn selection_equivalence(trace: &EigenTrace) -> Result<f64> {
    let (n, m) = (trace.config.n, trace.config.m);
    if n != m {
        return Err(Error::Dimension(format!(
            "selection equivalence needs N = M, got {n}x{m}"
        )));
    }
    let per_sample = par::map_range(trace.len(), |k| -> Result<f64> {
        let mut mags: Vec<f64> = trace.values_at(k).iter().map(|z| z.norm()).collect();
        mags.sort_by(|a, b| b.total_cmp(a));
        let t = svd(&trace.assemble(k), SvdOrder::Descending)?;
        Ok(mags
            .iter()
            .zip(t.s.diag())
            .map(|(a, z)| {
                let b = z.re;
                let d = (a - b).abs();
                if d == 0.0 {
                    0.0
                } else {
                    d / b.max(f64::MIN_POSITIVE)
                }
            })
            .fold(0.0, f64::max))
    });
    per_sample
        .into_iter()
        .try_fold(0.0f64, |acc, r| r.map(|x| acc.max(x)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ModelClass, ModelConfig, RunKind};
    use crate::detclasses::ring_scatter_series;
    use crate::doppler::periodogram;
    use crate::scenario::forced_swap;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    use std::f64::consts::{PI, TAU};

    fn rayleigh(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                re.hypot(im)
            })
            .collect()
    }

    /// Rice amplitude with unit mean power.
    fn rice(n: usize, k: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let los = (k / (k + 1.0)).sqrt();
        let sigma = (0.5 / (k + 1.0)).sqrt();
        (0..n)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                (los + sigma * re).hypot(sigma * im)
            })
            .collect()
    }

    fn rayleigh_closed_form(level_db: f64) -> f64 {
        1.0 - (-(10f64.powf(level_db / 10.0))).exp()
    }

    #[test]
    fn constant_input_steps_at_zero_db() {
        let cdf = empirical_cdf(&[2.5; 200]).unwrap();
        assert_eq!(cdf.levels_db.len(), 1);
        assert!(cdf.levels_db[0].abs() < 1e-12);
        assert_eq!(cdf.prob, vec![1.0]);
        assert!(rayleigh_slope(&cdf, 1e-3, 1e-1).is_err());
    }

    #[test]
    fn input_validation() {
        assert!(empirical_cdf(&[]).is_err());
        assert!(empirical_cdf(&[1.0; 99]).is_err());
        let mut bad = vec![1.0; 200];
        bad[3] = -1.0;
        assert!(empirical_cdf(&bad).is_err());
        let mut zeros = vec![1.0; 200];
        zeros[0] = 0.0;
        assert_eq!(empirical_cdf(&zeros).unwrap().levels_db[0], PSD_FLOOR_DB);
    }

    #[test]
    fn interleaved_copies_give_the_same_cdf() {
        let x = rayleigh(5000, 3);
        let doubled: Vec<f64> = x.iter().flat_map(|v| [*v, *v]).collect();
        let a = empirical_cdf(&x).unwrap();
        let b = empirical_cdf(&doubled).unwrap();
        assert_eq!(a.len(), b.len());
        for k in 0..a.len() {
            assert!((a.levels_db[k] - b.levels_db[k]).abs() < 1e-12);
            assert!((a.prob[k] - b.prob[k]).abs() < 1e-15);
        }
        let shared = empirical_cdf_with_reference(&doubled, rms(&x)).unwrap();
        assert_eq!(shared.levels_db, a.levels_db);
        assert_eq!(distribution_compare(&a, &shared).unwrap(), 0.0);
    }

    #[test]
    fn rayleigh_matches_closed_form() {
        let cdf = empirical_cdf(&rayleigh(100_000, 11)).unwrap();
        let mut ks: f64 = 0.0;
        let mut below = 0.0;
        for (l, p) in cdf.levels_db.iter().zip(&cdf.prob) {
            let f = rayleigh_closed_form(*l);
            ks = ks.max((p - f).abs()).max((below - f).abs());
            below = *p;
        }
        assert!(ks < 0.02, "KS {ks}");
        let slope = rayleigh_slope(&cdf, 1e-3, 1e-1).unwrap();
        assert!((slope - 10.0).abs() < 0.5, "slope {slope}");
    }

    fn bessel_i0_scaled(x: f64) -> f64 {
        // I0(x)·e^{-x} by power series, adequate for the x < 60 used here
        let mut term = 1.0;
        let mut sum = 1.0;
        let q = x * x / 4.0;
        for k in 1..400 {
            term *= q / (k * k) as f64;
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        sum * (-x).exp()
    }

    /// Rice CDF with unit mean power, integrated numerically from the pdf.
    fn rice_cdf_levels(k: f64, probs: &[f64]) -> Vec<f64> {
        let nu = (k / (k + 1.0)).sqrt();
        let s2 = 0.5 / (k + 1.0);
        let pdf = |r: f64| {
            let x = r * nu / s2;
            r / s2 * (-(r - nu).powi(2) / (2.0 * s2)).exp() * bessel_i0_scaled(x)
        };
        let dr = 1e-5;
        let mut cdf = 0.0;
        let mut r = 0.0;
        let mut out = Vec::new();
        let mut next = 0;
        while next < probs.len() {
            let step = 0.5 * dr * (pdf(r) + pdf(r + dr));
            if cdf + step >= probs[next] {
                let frac = (probs[next] - cdf) / step;
                out.push(20.0 * (r + frac * dr).log10());
                next += 1;
                continue;
            }
            cdf += step;
            r += dr;
        }
        out
    }

    #[test]
    fn rice_slope_matches_oracle() {
        let k = 10.0;
        let probs: Vec<f64> = (0..=20)
            .map(|i| 10f64.powf(-3.0 + 0.1 * i as f64))
            .collect();
        let levels = rice_cdf_levels(k, &probs);
        let n = probs.len() as f64;
        let xs: Vec<f64> = probs.iter().map(|p| p.log10()).collect();
        let mx = xs.iter().sum::<f64>() / n;
        let my = levels.iter().sum::<f64>() / n;
        let oracle = xs
            .iter()
            .zip(&levels)
            .map(|(x, y)| (x - mx) * (y - my))
            .sum::<f64>()
            / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        let cdf = empirical_cdf(&rice(100_000, k, 5)).unwrap();
        let slope = rayleigh_slope(&cdf, 1e-3, 1e-1).unwrap();
        assert!(
            (slope - oracle).abs() < 0.5,
            "slope {slope} oracle {oracle}"
        );
        // a strong line of sight compresses the fade depth range
        assert!(slope < 10.0 - 3.0, "{slope}");
    }

    #[test]
    fn hann_tone_rejection() {
        let f_s = 800.0;
        let f_d = 100.0;
        let x: Vec<Complex64> = (0..100_000)
            .map(|n| Complex64::from_polar(1.0, TAU * 0.5 * f_d * n as f64 / f_s + 0.3))
            .collect();
        let spectrum = periodogram(&x, f_s, 32).unwrap();
        let r = oob_rejection(&spectrum, f_d).unwrap();
        assert!(r > 60.0, "{r}");
    }

    #[test]
    fn white_noise_has_no_rejection() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<Complex64> = (0..100_000)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let spectrum = periodogram(&x, 800.0, 32).unwrap();
        let r = oob_rejection(&spectrum, 100.0).unwrap();
        assert!(r < 1.5, "{r}");
    }

    #[test]
    fn rejection_needs_bins_outside() {
        let spectrum = Spectrum {
            bin_freqs: vec![-1.0, 0.0, 1.0],
            psd_db: vec![-3.0, 0.0, -3.0],
            resolution: 1.0,
        };
        assert!(oob_rejection(&spectrum, 100.0).is_err());
        assert_eq!(band_rejection(&spectrum, 0.5).unwrap(), 3.0);
    }

    #[test]
    fn ring_scatter_envelope_is_close_to_rayleigh() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut mags = Vec::new();
        for _ in 0..10 {
            let r = ring_scatter_series(20, 20.0, 20_000, &mut rng).unwrap();
            mags.extend(r.samples.iter().map(|z| z.norm()));
        }
        let slope = rayleigh_slope(&empirical_cdf(&mags).unwrap(), 1e-3, 1e-1).unwrap();
        assert!((slope - 10.0).abs() < 1.5, "{slope}");
    }

    fn scenario(class: ModelClass, n: usize, samples: usize) -> EigenTrace {
        let mut c = ModelConfig::defaults(RunKind::Scenario);
        c.class = class;
        c.n = n;
        c.m = n;
        c.samples = samples;
        crate::generate(&c).unwrap()
    }

    #[test]
    fn swap_detection() {
        let constant = vec![CMatrix::identity(3); 10];
        assert!(detect_swaps(&constant, SWAP_THRESHOLD).unwrap().is_empty());
        assert!(detect_swaps(&constant[..1], SWAP_THRESHOLD).is_err());
        assert!(detect_swaps(&constant, 1.0).is_err());

        let tr = scenario(ModelClass::V, 2, 4000);
        assert!(detect_swaps(&tr.u, SWAP_THRESHOLD).unwrap().is_empty());
        let swapped = forced_swap(&tr, 2).unwrap();
        let hits = detect_swaps(&swapped.u, SWAP_THRESHOLD).unwrap();
        let boundaries: Vec<usize> = (1..tr.len() - 1).step_by(2).collect();
        assert_eq!(hits, boundaries);
    }

    #[test]
    fn disjoint_cdfs_are_rejected() {
        let a = Cdf {
            levels_db: vec![0.0, 1.0],
            prob: vec![0.5, 1.0],
            sample_count: 2,
        };
        let b = Cdf {
            levels_db: vec![2.0, 3.0],
            prob: vec![0.5, 1.0],
            sample_count: 2,
        };
        assert!(distribution_compare(&a, &b).is_err());
        let c = Cdf {
            levels_db: vec![0.5, 3.0],
            prob: vec![0.25, 1.0],
            sample_count: 4,
        };
        // on [0.5, 1.0]: a jumps to 1 at 1.0 while c stays at 0.25
        assert!((distribution_compare(&a, &c).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn selection_equivalence_round_trip() {
        for class in [ModelClass::I, ModelClass::V] {
            let tr = scenario(class, 4, 10_000);
            let dev = selection_equivalence(&tr).unwrap();
            assert!(dev < 1e-8, "{class:?} {dev}");
        }
        let mut c = ModelConfig::defaults(RunKind::Scenario);
        c.n = 4;
        c.m = 2;
        c.samples = 200;
        assert!(selection_equivalence(&crate::generate(&c).unwrap()).is_err());
    }

    #[test]
    fn diagonal_trace_matches_exactly() {
        let mut tr = scenario(ModelClass::V, 2, 100);
        for k in 0..tr.len() {
            tr.u[k] = CMatrix::identity(2);
            tr.v[k] = CMatrix::identity(2);
        }
        assert!(selection_equivalence(&tr).unwrap() < 1e-15);
    }

    proptest! {
        #[test]
        fn cdf_is_monotone_and_ends_at_one(x in proptest::collection::vec(0.0f64..10.0, 100..400)) {
            prop_assume!(x.iter().any(|v| *v > 0.0));
            let cdf = empirical_cdf(&x).unwrap();
            prop_assert!(cdf.levels_db.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(cdf.prob.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(cdf.prob.iter().all(|p| *p > 0.0 && *p <= 1.0));
            prop_assert_eq!(*cdf.prob.last().unwrap(), 1.0);
            prop_assert_eq!(cdf.sample_count, x.len());
        }

        #[test]
        fn cdf_is_scale_invariant(scale in 1e-3f64..1e3, seed in any::<u64>()) {
            let x = rayleigh(500, seed);
            let y: Vec<f64> = x.iter().map(|v| v * scale).collect();
            let a = empirical_cdf(&x).unwrap();
            let b = empirical_cdf(&y).unwrap();
            for (p, q) in a.levels_db.iter().zip(&b.levels_db) {
                prop_assert!((p - q).abs() < 1e-9);
            }
        }

        #[test]
        fn compare_is_symmetric(s1 in 0u64..50, s2 in 50u64..100) {
            let a = empirical_cdf(&rayleigh(300, s1)).unwrap();
            let b = empirical_cdf(&rayleigh(300, s2)).unwrap();
            let d1 = distribution_compare(&a, &b).unwrap();
            let d2 = distribution_compare(&b, &a).unwrap();
            prop_assert!((d1 - d2).abs() < 1e-15);
            prop_assert!((0.0..=1.0).contains(&d1));
        }
    }

    #[test]
    fn quantile_and_eval_are_consistent() {
        let cdf = empirical_cdf(&rayleigh(1000, 2)).unwrap();
        for p in [0.01, 0.3, 0.9, 1.0] {
            let l = cdf.quantile(p).unwrap();
            assert!(cdf.eval(l) >= p - 1e-15);
        }
        assert_eq!(cdf.eval(-PI * 1e3), 0.0);
    }
}
