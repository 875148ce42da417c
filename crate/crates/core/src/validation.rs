//! End-to-end acceptance checks, shared by the `validate` subcommand and the
//! acceptance test target.
//!
//! Class V traces here are generated with the cap-rate abort disabled, so each
//! check measures its own property; the cap rate itself is check 6.

use std::fmt;
use std::sync::OnceLock;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    band_rejection, detect_swaps, distribution_compare, empirical_cdf,
    empirical_cdf_with_reference, oob_rejection, rayleigh_slope, selection_equivalence,
    SLOPE_WINDOW, SWAP_THRESHOLD,
};
use crate::config::{ModelClass, ModelConfig, RunKind};
use crate::doppler::{periodogram, value_filter, vector_filter};
use crate::eigenmodel::{gen_class_v_with_limit, EigenTrace};
use crate::error::{Error, Result};
use crate::numkit::{
    householder_transition, random_unit_vector, svd, unitarity_error, SvdOrder, DEFAULT_TOL,
};
use crate::scenario::{
    forced_swap, run_tracking, sorted_decompositions, TrackingPolicy, SIR_CAP_DB,
};
use crate::{generate, par};

/// Welch segments used for every rejection measurement.
pub const PSD_SEGMENTS: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Reduced sample counts, same thresholds.
    Quick,
    Full,
}

impl Profile {
    pub const ENV: &'static str = "EIGENCHAN_PROFILE";

    /// Profile named by `EIGENCHAN_PROFILE`, or `default` when unset.
    pub fn from_env(default: Profile) -> Result<Profile> {
        match std::env::var(Self::ENV) {
            Ok(v) => v.parse(),
            Err(_) => Ok(default),
        }
    }

    /// Length of the long runs.
    pub fn long(self) -> usize {
        match self {
            Profile::Quick => 20_000,
            Profile::Full => 100_000,
        }
    }

    pub fn medium(self) -> usize {
        10_000
    }
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "quick" => Ok(Profile::Quick),
            "full" => Ok(Profile::Full),
            other => Err(Error::config(
                "profile",
                format!("expected quick or full, got `{other}`"),
            )),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Quick => "quick",
            Profile::Full => "full",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(
            f,
            "[{verdict}] {:>2} {}: {}",
            self.id, self.name, self.detail
        )
    }
}

pub const CRITERIA: [(u8, &str); 12] = [
    (1, "Rayleigh CDF slope, 2x2"),
    (2, "out-of-band rejection, 2x2"),
    (3, "out-of-band rejection, 4x4"),
    (4, "mean power normalization"),
    (5, "unitarity, 4x4"),
    (6, "unit-norm cap rate"),
    (7, "perfect-CSI SIR"),
    (8, "forced-swap stress"),
    (9, "selection equivalence, 4x4"),
    (10, "distribution overlap"),
    (11, "singular-vector spectral narrowness"),
    (12, "property checks"),
];

fn values_config(n: usize, m: usize, samples: usize) -> ModelConfig {
    let mut c = ModelConfig::defaults(RunKind::Values);
    c.n = n;
    c.m = m;
    c.samples = samples;
    c
}

fn class_v(cfg: &ModelConfig) -> Result<EigenTrace> {
    gen_class_v_with_limit(cfg, 1.0)
}

/// Lazily generated traces shared between checks.
pub struct Suite {
    profile: Profile,
    two: OnceLock<Result<EigenTrace>>,
    four: OnceLock<Result<EigenTrace>>,
}

impl Suite {
    pub fn new(profile: Profile) -> Self {
        Self {
            profile,
            two: OnceLock::new(),
            four: OnceLock::new(),
        }
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    fn long_trace(&self, dim: usize) -> Result<&EigenTrace> {
        let cell = if dim == 2 { &self.two } else { &self.four };
        cell.get_or_init(|| class_v(&values_config(dim, dim, self.profile.long())))
            .as_ref()
            .map_err(|e| Error::Analysis(format!("{dim}x{dim} generation failed: {e}")))
    }

    /// Runs one check; errors become failures carrying the message.
    pub fn run(&self, id: u8) -> CriterionResult {
        let name = CRITERIA
            .iter()
            .find(|c| c.0 == id)
            .map_or_else(|| format!("unknown check {id}"), |c| c.1.to_string());
        let outcome = match id {
            1 => self.rayleigh_slope(),
            2 => self.oob(2, 40.0),
            3 => self.oob(4, 30.0),
            4 => self.normalization(),
            5 => self.unitarity(),
            6 => self.cap_rate(),
            7 => self.perfect_csi(),
            8 => self.forced_swap(),
            9 => self.selection(),
            10 => self.overlap(),
            11 => self.narrowness(),
            12 => property_checks(),
            _ => Err(Error::Analysis("no such check".into())),
        };
        let (passed, detail) = match outcome {
            Ok(x) => x,
            Err(e) => (false, format!("error: {e}")),
        };
        CriterionResult {
            id,
            name,
            passed,
            detail,
        }
    }

    pub fn run_all(&self) -> Vec<CriterionResult> {
        CRITERIA.iter().map(|c| self.run(c.0)).collect()
    }

    fn rayleigh_slope(&self) -> Result<(bool, String)> {
        let tr = self.long_trace(2)?;
        let ch = tr.channel();
        let mut slopes = Vec::new();
        for i in 0..2 {
            for j in 0..2 {
                let mags: Vec<f64> = ch.element(i, j).iter().map(|z| z.norm()).collect();
                slopes.push(rayleigh_slope(
                    &empirical_cdf(&mags)?,
                    SLOPE_WINDOW.0,
                    SLOPE_WINDOW.1,
                )?);
            }
        }
        let passed = slopes.iter().all(|s| (s - 10.0).abs() <= 1.0);
        Ok((
            passed,
            format!("slopes {} dB/decade (need 10 +- 1)", join(&slopes, 2)),
        ))
    }

    fn oob(&self, dim: usize, need: f64) -> Result<(bool, String)> {
        let tr = self.long_trace(dim)?;
        let ch = tr.channel();
        let pairs: Vec<(usize, usize)> = if dim == 2 {
            vec![(0, 0), (0, 1), (1, 0), (1, 1)]
        } else {
            (0..dim).map(|i| (i, i)).collect()
        };
        let rejections = par::map(&pairs, |&(i, j)| {
            periodogram(&ch.element(i, j), tr.config.f_s(), PSD_SEGMENTS)
                .and_then(|s| oob_rejection(&s, tr.config.f_d_hz))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let worst = rejections.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok((
            worst >= need,
            format!(
                "rejection beyond 1.05 f_d {} dB (need >= {need})",
                join(&rejections, 1)
            ),
        ))
    }

    fn normalization(&self) -> Result<(bool, String)> {
        let mut worst: f64 = 0.0;
        let mut parts = Vec::new();
        for (n, m) in [(2, 2), (4, 4), (4, 2), (2, 4)] {
            let owned;
            let tr = if n == m {
                self.long_trace(n)?
            } else {
                owned = class_v(&values_config(n, m, self.profile.medium()))?;
                &owned
            };
            let target = (n * m) as f64;
            let rel = (tr.mean_lambda_sum() - target).abs() / target;
            worst = worst.max(rel);
            parts.push(format!("{n}x{m} {rel:.1e}"));
        }
        Ok((
            worst < 1e-9,
            format!("relative error {} (need < 1e-9)", parts.join(", ")),
        ))
    }

    fn unitarity(&self) -> Result<(bool, String)> {
        let e = self.long_trace(4)?.max_unitarity_error();
        Ok((
            e < 1e-8,
            format!(
                "max unitarity error {e:.2e} over {} samples (need < 1e-8)",
                self.profile.long()
            ),
        ))
    }

    fn cap_rate(&self) -> Result<(bool, String)> {
        let mut passed = true;
        let mut parts = Vec::new();
        for dim in [2, 4] {
            let tr = self.long_trace(dim)?;
            let len = tr.len() as f64;
            let (rx, tx) = (tr.caps.rx as f64 / len, tr.caps.tx as f64 / len);
            passed &= rx < 0.01 && tx < 0.01;
            parts.push(format!(
                "dim {dim}: rx {:.2}% tx {:.2}%",
                100.0 * rx,
                100.0 * tx
            ));
        }
        Ok((passed, format!("{} (need < 1% per end)", parts.join(", "))))
    }

    fn perfect_csi(&self) -> Result<(bool, String)> {
        let mut total = 0;
        let mut finite = 0;
        for class in [
            ModelClass::I,
            ModelClass::II,
            ModelClass::III,
            ModelClass::IV,
            ModelClass::V,
        ] {
            for dim in [2, 4] {
                let mut c = ModelConfig::defaults(RunKind::Scenario);
                c.class = class;
                c.n = dim;
                c.m = dim;
                c.samples = self.profile.medium();
                let tr = if class == ModelClass::V {
                    class_v(&c)?
                } else {
                    generate(&c)?
                };
                let out = run_tracking(&tr, &TrackingPolicy::perfect())?;
                for series in &out.sir_db {
                    total += series.len();
                    finite += series.iter().filter(|x| **x != f64::INFINITY).count();
                }
            }
        }
        Ok((
            finite == 0,
            format!("{finite} of {total} SIR values below the +inf sentinel"),
        ))
    }

    fn forced_swap(&self) -> Result<(bool, String)> {
        let mut c = ModelConfig::defaults(RunKind::Scenario);
        c.n = 4;
        c.m = 4;
        c.samples = self.profile.medium();
        let tr = class_v(&c)?;
        let period = 2;
        let out = run_tracking(&tr, &TrackingPolicy::perfect().with_swap(period))?;
        let blocks: Vec<f64> = out.sir_db[0]
            .chunks(period)
            .map(|b| {
                b.iter()
                    .map(|x| x.clamp(-SIR_CAP_DB, SIR_CAP_DB))
                    .sum::<f64>()
                    / b.len() as f64
            })
            .collect();
        let pairs = blocks.len().saturating_sub(1);
        let alternating = blocks
            .windows(2)
            .filter(|w| (w[0] - w[1]).abs() >= 40.0)
            .count();
        let fraction = alternating as f64 / pairs.max(1) as f64;
        let natural = detect_swaps(&tr.u, SWAP_THRESHOLD)?.len();
        let injected = detect_swaps(&forced_swap(&tr, period)?.u, SWAP_THRESHOLD)?.len();
        Ok((
            pairs > 0 && fraction >= 0.95 && natural == 0,
            format!(
                "{:.1}% of block pairs alternate by >= 40 dB (need >= 95%), swaps detected: natural {natural}, injected {injected}",
                100.0 * fraction
            ),
        ))
    }

    fn selection(&self) -> Result<(bool, String)> {
        let tr = class_v(&values_config(4, 4, self.profile.medium()))?;
        let dev = selection_equivalence(&tr)?;
        Ok((
            dev < 1e-8,
            format!("max relative deviation {dev:.2e} (need < 1e-8)"),
        ))
    }

    fn overlap(&self) -> Result<(bool, String)> {
        let tr = self.long_trace(2)?;
        let natural: Vec<Vec<f64>> = tr
            .values
            .iter()
            .map(|s| s.iter().map(|z| z.norm()).collect())
            .collect();
        let sorted_values = par::map_range(tr.len(), |k| {
            svd(&tr.assemble(k), SvdOrder::Descending).map(|t| t.s.diag())
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let sorted: Vec<Vec<f64>> = (0..2)
            .map(|i| sorted_values.iter().map(|s| s[i].re).collect())
            .collect();
        let pooled_rms = {
            let all: Vec<f64> = natural.iter().flatten().cloned().collect();
            (all.iter().map(|x| x * x).sum::<f64>() / all.len() as f64).sqrt()
        };
        let cdf = |x: &[f64]| empirical_cdf_with_reference(x, pooled_rms);
        let d_natural = distribution_compare(&cdf(&natural[0])?, &cdf(&natural[1])?)?;
        let d_sorted = distribution_compare(&cdf(&sorted[0])?, &cdf(&sorted[1])?)?;
        Ok((
            d_natural < 0.03 && d_sorted > 0.1,
            format!("KS natural {d_natural:.4} (need < 0.03), sorted {d_sorted:.4} (need > 0.1)"),
        ))
    }

    fn narrowness(&self) -> Result<(bool, String)> {
        let tr = self.long_trace(2)?;
        let f_s = tr.config.f_s();
        let edge = 0.3 * tr.config.f_d_hz;
        let u11: Vec<Complex64> = tr.u.iter().map(|u| u[(0, 0)]).collect();
        let full = band_rejection(&periodogram(&u11, f_s, PSD_SEGMENTS)?, edge)?;

        // window centred on the closest approach of the two gains
        let crossing = (0..tr.len())
            .min_by(|&a, &b| {
                let gap = |k: usize| (tr.values[0][k].norm() - tr.values[1][k].norm()).abs();
                gap(a).total_cmp(&gap(b))
            })
            .unwrap_or(0);
        let width = 4096.min(tr.len());
        let start = crossing.saturating_sub(width / 2).min(tr.len() - width);
        let window = start..start + width;
        let h: Vec<_> = window.clone().map(|k| tr.assemble(k)).collect();
        let (u_sorted, _) = sorted_decompositions(&h)?;
        let sorted11: Vec<Complex64> = u_sorted.iter().map(|u| u[(0, 0)]).collect();
        let segments = 8;
        let natural_win = band_rejection(&periodogram(&u11[window.clone()], f_s, segments)?, edge)?;
        let sorted_win = band_rejection(&periodogram(&sorted11, f_s, segments)?, edge)?;
        Ok((
            full >= 30.0 && sorted_win < natural_win,
            format!(
                "u11 rejection beyond 0.3 f_d {full:.1} dB (need >= 30); around sample {crossing}: natural {natural_win:.1} dB, sorted {sorted_win:.1} dB (need sorted < natural)"
            ),
        ))
    }
}

fn join(x: &[f64], decimals: usize) -> String {
    x.iter()
        .map(|v| format!("{v:.decimals$}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Fast in-process property checks across the modules.
fn property_checks() -> Result<(bool, String)> {
    let mut failures = Vec::new();
    let mut checks = 0usize;
    let mut check = |ok: bool, what: String| {
        checks += 1;
        if !ok {
            failures.push(what);
        }
    };

    // Householder transitions map exactly and stay unitary
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for trial in 0..200 {
        let dim = rng.gen_range(2..=8);
        let a = random_unit_vector(dim, &mut rng);
        let b = random_unit_vector(dim, &mut rng);
        let t = householder_transition(&a, &b, DEFAULT_TOL)?;
        let mapped = t.mul_vec(&a)?;
        check(
            mapped.max_abs_diff(&b) < 1e-12,
            format!("householder map, trial {trial}"),
        );
        check(
            unitarity_error(&t) < 1e-12,
            format!("householder unitarity, trial {trial}"),
        );
    }

    // deterministic classes
    for class in [
        ModelClass::I,
        ModelClass::II,
        ModelClass::III,
        ModelClass::IV,
    ] {
        for dim in [2, 4] {
            let mut c = ModelConfig::defaults(RunKind::Scenario);
            c.class = class;
            c.n = dim;
            c.m = dim;
            c.samples = 500;
            let tr = generate(&c)?;
            check(
                tr.check_invariants(1e-12).is_ok(),
                format!("class {} {dim}x{dim} unitarity", class.roman()),
            );
            let power_ok = (0..tr.len()).all(|k| {
                let p: f64 = tr.values_at(k).iter().map(|z| z.norm_sqr()).sum();
                (p - (dim * dim) as f64).abs() < 1e-9
            });
            check(
                power_ok,
                format!("class {} {dim}x{dim} power", class.roman()),
            );
        }
    }

    // filter point values
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);
    check(
        close(vector_filter(0.0, 100.0, 1000, 0.0, 2), 0.5f64.sqrt()),
        "vector filter at DC".into(),
    );
    check(
        close(vector_filter(10.0, 100.0, 1000, 0.0, 2), 1.0 / 60.0),
        "vector filter slope".into(),
    );
    check(
        close(vector_filter(10.0, 100.0, 1000, 3.0, 2), 1.0 / 120.0),
        "vector filter Rice".into(),
    );
    check(
        vector_filter(30.0, 100.0, 1000, 0.0, 2) == 0.0,
        "vector filter band edge".into(),
    );
    check(
        close(value_filter(50.0, 100.0)?, 1.0 / 0.75f64.sqrt()),
        "value filter".into(),
    );
    check(
        value_filter(100.0, 100.0).is_err(),
        "value filter singularity".into(),
    );
    check(
        value_filter(150.0, 100.0)? == 0.0,
        "value filter outside band".into(),
    );

    // trace round trip
    check(trace_round_trip()?, "trace file round trip".into());

    let passed = failures.is_empty();
    let detail = if passed {
        format!("{checks} checks passed")
    } else {
        format!(
            "{} of {checks} failed: {}",
            failures.len(),
            failures.join("; ")
        )
    };
    Ok((passed, detail))
}

fn trace_round_trip() -> Result<bool> {
    use crate::io::{read_trace, write_trace, TraceRef};
    let tr = class_v(&values_config(2, 4, 240))?;
    let stamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_nanos());
    let path = std::env::temp_dir().join(format!(
        "eigenchan-check-{}-{stamp}.evcm",
        std::process::id()
    ));
    write_trace(TraceRef::Both(&tr), &path)?;
    let back = read_trace(&path);
    let _ = std::fs::remove_file(&path);
    let back = back?;
    let e = back.eigen.as_ref();
    Ok(
        e.is_some_and(|e| e.u == tr.u && e.v == tr.v && e.values == tr.values)
            && back.physical.is_some_and(|p| p.h == tr.channel().h),
    )
}
