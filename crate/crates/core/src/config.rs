//! Model configuration and its plain-text `key = value` document form.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::MAX_SVD_DIM;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelClass {
    /// Deterministic discrete swapping.
    I,
    /// Deterministic sinusoidal rotation.
    II,
    /// Semi-deterministic variable phases.
    III,
    /// Ring-scatter singular vectors with constant total gain.
    IV,
    /// Fully stochastic eigen-domain model.
    V,
}

impl ModelClass {
    pub fn tag(self) -> u8 {
        match self {
            ModelClass::I => 1,
            ModelClass::II => 2,
            ModelClass::III => 3,
            ModelClass::IV => 4,
            ModelClass::V => 5,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            1 => ModelClass::I,
            2 => ModelClass::II,
            3 => ModelClass::III,
            4 => ModelClass::IV,
            5 => ModelClass::V,
            _ => return None,
        })
    }

    pub fn roman(self) -> &'static str {
        match self {
            ModelClass::I => "I",
            ModelClass::II => "II",
            ModelClass::III => "III",
            ModelClass::IV => "IV",
            ModelClass::V => "V",
        }
    }
}

impl FromStr for ModelClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let class = match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => ModelClass::I,
            "II" | "2" => ModelClass::II,
            "III" | "3" => ModelClass::III,
            "IV" | "4" => ModelClass::IV,
            "V" | "5" => ModelClass::V,
            other => return Err(Error::config("class", format!("unknown class `{other}`"))),
        };
        Ok(class)
    }
}

/// Where a configuration is headed; selects the sampling-factor default.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunKind {
    /// Plain generation and statistics (`S_f = 8`).
    Values,
    /// Tracking and SIR scenarios (`S_f = 20`).
    Scenario,
}

impl RunKind {
    pub fn default_s_f(self) -> f64 {
        match self {
            RunKind::Values => 8.0,
            RunKind::Scenario => 20.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Receive dimension.
    pub n: usize,
    /// Transmit dimension.
    pub m: usize,
    /// Maximum Doppler shift (Hz).
    pub f_d_hz: f64,
    /// Sampling factor, `f_s = s_f * f_d`.
    pub s_f: f64,
    /// Emitted samples (after start-up discard).
    pub samples: usize,
    /// Rice factor.
    pub k_f: f64,
    /// Mean-magnitude ratios between consecutive singular values.
    pub s_ratios: Option<Vec<f64>>,
    pub class: ModelClass,
    /// Angular rate for classes I–III (rad/s).
    pub omega: f64,
    /// Scatterer count for class IV.
    pub n_s: usize,
    pub seed: u64,
}

pub const MIN_SAMPLES: usize = 60;

const KEYS: [&str; 11] = [
    "n", "m", "class", "f_d_hz", "s_f", "samples", "k_f", "s_ratios", "omega", "n_s", "seed",
];

impl ModelConfig {
    /// Angular rate of a quarter turn per Doppler period, `2π f_d / 4`.
    pub fn default_omega(f_d_hz: f64) -> f64 {
        2.0 * std::f64::consts::PI * f_d_hz / 4.0
    }

    pub fn defaults(kind: RunKind) -> Self {
        let f_d_hz = 100.0;
        Self {
            n: 2,
            m: 2,
            f_d_hz,
            s_f: kind.default_s_f(),
            samples: 10_000,
            k_f: 0.0,
            s_ratios: None,
            class: ModelClass::V,
            omega: Self::default_omega(f_d_hz),
            n_s: 20,
            seed: 1,
        }
    }

    /// Number of eigenmodes, `min(N, M)`.
    pub fn modes(&self) -> usize {
        self.n.min(self.m)
    }

    /// Sampling frequency in Hz.
    pub fn f_s(&self) -> f64 {
        self.s_f * self.f_d_hz
    }

    /// Samples generated before the 20% start-up discard.
    pub fn generated_samples(&self) -> usize {
        generated_len(self.samples)
    }

    pub fn validate(&self) -> Result<()> {
        let lo = self.n.min(self.m);
        let hi = self.n.max(self.m);
        if lo < 2 {
            return Err(Error::config(
                "n",
                format!("min(n, m) must be >= 2, got {lo}"),
            ));
        }
        if hi > MAX_SVD_DIM {
            return Err(Error::config(
                "n",
                format!("max(n, m) must be <= {MAX_SVD_DIM}, got {hi}"),
            ));
        }
        if !(self.f_d_hz.is_finite() && self.f_d_hz > 0.0) {
            return Err(Error::config(
                "f_d_hz",
                "must be a positive finite frequency",
            ));
        }
        if !(self.s_f.is_finite() && self.s_f > 2.0) {
            return Err(Error::config(
                "s_f",
                format!("must exceed 2 (Nyquist), got {}", self.s_f),
            ));
        }
        if self.samples < MIN_SAMPLES {
            return Err(Error::config(
                "samples",
                format!("must be >= {MIN_SAMPLES}, got {}", self.samples),
            ));
        }
        if !(self.k_f.is_finite() && self.k_f >= 0.0) {
            return Err(Error::config("k_f", "must be finite and >= 0"));
        }
        if let Some(ratios) = &self.s_ratios {
            if ratios.len() != lo - 1 {
                return Err(Error::config(
                    "s_ratios",
                    format!(
                        "needs min(n, m) - 1 = {} entries, got {}",
                        lo - 1,
                        ratios.len()
                    ),
                ));
            }
            if ratios.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
                return Err(Error::config(
                    "s_ratios",
                    "entries must be positive and finite",
                ));
            }
        }
        if !self.omega.is_finite() {
            return Err(Error::config("omega", "must be finite"));
        }
        if self.class != ModelClass::V && (self.n != self.m || !(self.n == 2 || self.n == 4)) {
            return Err(Error::config(
                "class",
                format!(
                    "class {} is defined for 2x2 and 4x4 only, got {}x{}",
                    self.class.roman(),
                    self.n,
                    self.m
                ),
            ));
        }
        if self.class == ModelClass::IV && self.n_s < 6 {
            return Err(Error::config(
                "n_s",
                format!("class IV needs n_s >= 6, got {}", self.n_s),
            ));
        }
        Ok(())
    }

    /// Serializes to the `key = value` document accepted by [`parse_config`].
    pub fn to_document(&self) -> String {
        let mut out = String::new();
        let ratios = match &self.s_ratios {
            Some(r) => r
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(", "),
            None => "none".to_string(),
        };
        let _ = writeln!(out, "n = {}", self.n);
        let _ = writeln!(out, "m = {}", self.m);
        let _ = writeln!(out, "class = {}", self.class.roman());
        let _ = writeln!(out, "f_d_hz = {}", self.f_d_hz);
        let _ = writeln!(out, "s_f = {}", self.s_f);
        let _ = writeln!(out, "samples = {}", self.samples);
        let _ = writeln!(out, "k_f = {}", self.k_f);
        let _ = writeln!(out, "s_ratios = {ratios}");
        let _ = writeln!(out, "omega = {}", self.omega);
        let _ = writeln!(out, "n_s = {}", self.n_s);
        let _ = writeln!(out, "seed = {}", self.seed);
        out
    }
}

pub(crate) fn generated_len(kept: usize) -> usize {
    // ceil(kept / 0.8) in integers
    (5 * kept).div_ceil(4)
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{value}`")))
}

/// Parses a `key = value` document (`#` starts a comment) and validates it.
pub fn parse_config(text: &str, kind: RunKind) -> Result<ModelConfig> {
    let mut cfg = ModelConfig::defaults(kind);
    let mut seen: Vec<&str> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::config(
                "document",
                format!("line {}: expected `key = value`", lineno + 1),
            ));
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(&known) = KEYS.iter().find(|k| **k == key) else {
            return Err(Error::config(key, "unknown key"));
        };
        if seen.contains(&known) {
            return Err(Error::config(key, "duplicate key"));
        }
        seen.push(known);
        match known {
            "n" => cfg.n = parse_num(key, value)?,
            "m" => cfg.m = parse_num(key, value)?,
            "class" => cfg.class = value.parse()?,
            "f_d_hz" => cfg.f_d_hz = parse_num(key, value)?,
            "s_f" => cfg.s_f = parse_num(key, value)?,
            "samples" => cfg.samples = parse_num(key, value)?,
            "k_f" => cfg.k_f = parse_num(key, value)?,
            "s_ratios" => {
                cfg.s_ratios = if value.is_empty() || value.eq_ignore_ascii_case("none") {
                    None
                } else {
                    Some(
                        value
                            .split(',')
                            .map(|x| parse_num::<f64>(key, x.trim()))
                            .collect::<Result<_>>()?,
                    )
                }
            }
            "omega" => cfg.omega = parse_num(key, value)?,
            "n_s" => cfg.n_s = parse_num(key, value)?,
            "seed" => cfg.seed = parse_num(key, value)?,
            _ => unreachable!(),
        }
    }
    if !seen.contains(&"omega") && seen.contains(&"f_d_hz") {
        cfg.omega = ModelConfig::default_omega(cfg.f_d_hz);
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = parse_config("", RunKind::Values).unwrap();
        assert_eq!(
            (cfg.n, cfg.m, cfg.class, cfg.k_f),
            (2, 2, ModelClass::V, 0.0)
        );
        assert_eq!(cfg.s_f, 8.0);
        assert_eq!(
            parse_config("# nothing\n\n", RunKind::Scenario)
                .unwrap()
                .s_f,
            20.0
        );
    }

    #[test]
    fn ratio_length_must_match_mode_count() {
        let err =
            parse_config("n = 4\nm = 2\ns_ratios = 0.5, 0.5, 0.5", RunKind::Values).unwrap_err();
        assert!(
            matches!(err, Error::Config { ref key, .. } if key == "s_ratios"),
            "{err}"
        );
        assert!(parse_config("n = 4\nm = 2\ns_ratios = 0.5", RunKind::Values).is_ok());
    }

    #[test]
    fn field_specific_errors() {
        for (doc, key) in [
            ("bogus = 1", "bogus"),
            ("s_f = 2", "s_f"),
            ("samples = 10", "samples"),
            ("k_f = -1", "k_f"),
            ("n = 9", "n"),
            ("class = VI", "class"),
            ("class = IV\nn_s = 3", "n_s"),
            ("class = II\nn = 3\nm = 3", "class"),
            ("n = x", "n"),
            ("n = 2\nn = 3", "n"),
        ] {
            match parse_config(doc, RunKind::Values) {
                Err(Error::Config { key: k, .. }) => assert_eq!(k, key, "{doc}"),
                other => panic!("{doc}: {other:?}"),
            }
        }
    }

    #[test]
    fn generated_length_covers_discard() {
        assert_eq!(generated_len(100_000), 125_000);
        assert_eq!(generated_len(100), 125);
        assert_eq!(generated_len(101), 127);
    }

    proptest! {
        #[test]
        fn document_round_trip(n in 2usize..=8, m in 2usize..=8, s_f in 2.01f64..64.0,
                               k_f in 0.0f64..20.0, samples in 60usize..1_000_000,
                               seed in any::<u64>(), ratio in 0.05f64..4.0, with_ratios in any::<bool>()) {
            let mut cfg = ModelConfig::defaults(RunKind::Values);
            cfg.n = n;
            cfg.m = m;
            cfg.s_f = s_f;
            cfg.k_f = k_f;
            cfg.samples = samples;
            cfg.seed = seed;
            cfg.s_ratios = with_ratios.then(|| vec![ratio; n.min(m) - 1]);
            let doc = cfg.to_document();
            let back = parse_config(&doc, RunKind::Scenario).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}
