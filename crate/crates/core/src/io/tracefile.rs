//! Binary trace container.
//!
//! Layout, all little-endian:
//!
//! | offset | size | field |
//! |-------:|-----:|-------|
//! | 0 | 4 | magic `EVCM` |
//! | 4 | 2 | format version (1) |
//! | 6 | 1 | payload kind: 0 eigen, 1 physical, 2 both |
//! | 7 | 1 | model class tag (1..=5) |
//! | 8 | 4 | N (u32) |
//! | 12 | 4 | M (u32) |
//! | 16 | 8 | sample count (u64) |
//! | 24 | 8 | f_d in Hz (f64) |
//! | 32 | 8 | S_f (f64) |
//! | 40 | 8 | K_f (f64) |
//! | 48 | 8 | seed (u64) |
//! | 56 | 4 | capped samples, receive end (u32) |
//! | 60 | 4 | capped samples, transmit end (u32) |
//!
//! Each sample then stores its matrices row-major, every complex value as
//! `(re, im)` f64 pairs: `U`, diag `S`, `V` for eigen payloads, `H` for
//! physical ones, and `U`, diag `S`, `V`, `H` for both.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{ModelClass, ModelConfig, RunKind};
use crate::eigenmodel::{CapCounts, ChannelTrace, EigenTrace};
use crate::error::{Error, Result};
use crate::numkit::CMatrix;

pub const MAGIC: [u8; 4] = *b"EVCM";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 64;
const COMPLEX_BYTES: u64 = 16;
/// Larger dimensions are rejected as corrupt headers.
const MAX_DIM: u32 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PayloadKind {
    Eigen,
    Physical,
    Both,
}

impl PayloadKind {
    fn tag(self) -> u8 {
        match self {
            PayloadKind::Eigen => 0,
            PayloadKind::Physical => 1,
            PayloadKind::Both => 2,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(PayloadKind::Eigen),
            1 => Some(PayloadKind::Physical),
            2 => Some(PayloadKind::Both),
            _ => None,
        }
    }

    pub fn has_eigen(self) -> bool {
        self != PayloadKind::Physical
    }

    pub fn has_physical(self) -> bool {
        self != PayloadKind::Eigen
    }
}

impl std::str::FromStr for PayloadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "eigen" => Ok(PayloadKind::Eigen),
            "physical" => Ok(PayloadKind::Physical),
            "both" => Ok(PayloadKind::Both),
            other => Err(Error::config(
                "payload",
                format!("unknown payload kind `{other}`"),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub version: u16,
    pub kind: PayloadKind,
    pub class: ModelClass,
    pub n: usize,
    pub m: usize,
    pub samples: usize,
    pub f_d_hz: f64,
    pub s_f: f64,
    pub k_f: f64,
    pub seed: u64,
    pub caps: CapCounts,
}

impl TraceHeader {
    fn from_config(cfg: &ModelConfig, samples: usize, kind: PayloadKind, caps: CapCounts) -> Self {
        Self {
            version: VERSION,
            kind,
            class: cfg.class,
            n: cfg.n,
            m: cfg.m,
            samples,
            f_d_hz: cfg.f_d_hz,
            s_f: cfg.s_f,
            k_f: cfg.k_f,
            seed: cfg.seed,
            caps,
        }
    }

    /// Complex values stored per sample.
    pub fn complex_per_sample(&self) -> u64 {
        let (n, m) = (self.n as u64, self.m as u64);
        let eigen = n * n + n.min(m) + m * m;
        let physical = n * m;
        match self.kind {
            PayloadKind::Eigen => eigen,
            PayloadKind::Physical => physical,
            PayloadKind::Both => eigen + physical,
        }
    }

    pub fn payload_bytes(&self) -> Option<u64> {
        (self.samples as u64).checked_mul(self.complex_per_sample() * COMPLEX_BYTES)
    }

    /// Configuration recoverable from the header. Generation-only parameters
    /// (ratios, `omega`, `n_s`) are not stored and take their defaults.
    pub fn config(&self) -> ModelConfig {
        let mut c = ModelConfig::defaults(RunKind::Scenario);
        c.n = self.n;
        c.m = self.m;
        c.f_d_hz = self.f_d_hz;
        c.s_f = self.s_f;
        c.samples = self.samples;
        c.k_f = self.k_f;
        c.class = self.class;
        c.seed = self.seed;
        c
    }

    fn encode(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0..4].copy_from_slice(&MAGIC);
        b[4..6].copy_from_slice(&self.version.to_le_bytes());
        b[6] = self.kind.tag();
        b[7] = self.class.tag();
        b[8..12].copy_from_slice(&(self.n as u32).to_le_bytes());
        b[12..16].copy_from_slice(&(self.m as u32).to_le_bytes());
        b[16..24].copy_from_slice(&(self.samples as u64).to_le_bytes());
        b[24..32].copy_from_slice(&self.f_d_hz.to_le_bytes());
        b[32..40].copy_from_slice(&self.s_f.to_le_bytes());
        b[40..48].copy_from_slice(&self.k_f.to_le_bytes());
        b[48..56].copy_from_slice(&self.seed.to_le_bytes());
        b[56..60].copy_from_slice(&(self.caps.rx as u32).to_le_bytes());
        b[60..64].copy_from_slice(&(self.caps.tx as u32).to_le_bytes());
        b
    }

    fn decode(b: &[u8; HEADER_LEN], path: &Path) -> Result<Self> {
        let bad = |message: String| Error::TraceFormat {
            path: path.to_path_buf(),
            message,
        };
        let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(b[o..o + 8].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(b[o..o + 8].try_into().unwrap());
        if b[0..4] != MAGIC {
            return Err(bad(format!("bad magic {:?}", &b[0..4])));
        }
        let version = u16::from_le_bytes([b[4], b[5]]);
        if version != VERSION {
            return Err(bad(format!("unsupported format version {version}")));
        }
        let kind =
            PayloadKind::from_tag(b[6]).ok_or_else(|| bad(format!("bad payload kind {}", b[6])))?;
        let class =
            ModelClass::from_tag(b[7]).ok_or_else(|| bad(format!("bad class tag {}", b[7])))?;
        let (n, m) = (u32_at(8), u32_at(12));
        if !(1..=MAX_DIM).contains(&n) || !(1..=MAX_DIM).contains(&m) {
            return Err(bad(format!("implausible dimensions {n}x{m}")));
        }
        let samples =
            usize::try_from(u64_at(16)).map_err(|_| bad("sample count overflows".into()))?;
        Ok(Self {
            version,
            kind,
            class,
            n: n as usize,
            m: m as usize,
            samples,
            f_d_hz: f64_at(24),
            s_f: f64_at(32),
            k_f: f64_at(40),
            seed: u64_at(48),
            caps: CapCounts {
                rx: u32_at(56) as usize,
                tx: u32_at(60) as usize,
            },
        })
    }
}

/// Something that can be written as a trace file.
#[derive(Clone, Copy, Debug)]
pub enum TraceRef<'a> {
    Eigen(&'a EigenTrace),
    Physical(&'a ChannelTrace),
    /// Eigen components plus the assembled channel.
    Both(&'a EigenTrace),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub path: PathBuf,
    pub header: TraceHeader,
    pub bytes: u64,
}

/// Contents of a trace file. Which fields are present follows the payload
/// kind.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceFile {
    pub header: TraceHeader,
    pub eigen: Option<EigenTrace>,
    pub physical: Option<ChannelTrace>,
}

impl TraceFile {
    /// Eigen components, or an error naming the file's payload kind.
    pub fn into_eigen(self) -> Result<EigenTrace> {
        let kind = self.header.kind;
        self.eigen.ok_or_else(|| {
            Error::Unsupported(format!(
                "trace has a {kind:?} payload, eigen components needed"
            ))
        })
    }

    /// Physical channel, assembling it from eigen components if needed.
    pub fn channel(&self) -> ChannelTrace {
        match (&self.physical, &self.eigen) {
            (Some(h), _) => h.clone(),
            (None, Some(e)) => e.channel(),
            (None, None) => unreachable!("trace file without payload"),
        }
    }
}

fn put_matrix(w: &mut impl Write, m: &CMatrix) -> std::io::Result<()> {
    put_values(w, m.as_slice())
}

fn put_values(w: &mut impl Write, v: &[Complex64]) -> std::io::Result<()> {
    for z in v {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

fn partial_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".partial");
    PathBuf::from(s)
}

/// Writes `trace` to `path` via a `.partial` sibling that is renamed into
/// place once complete. A failed write leaves only the `.partial` file.
pub fn write_trace(trace: TraceRef<'_>, path: impl AsRef<Path>) -> Result<TraceSummary> {
    let path = path.as_ref();
    let header = match trace {
        TraceRef::Eigen(t) => {
            TraceHeader::from_config(&t.config, t.len(), PayloadKind::Eigen, t.caps)
        }
        TraceRef::Both(t) => {
            TraceHeader::from_config(&t.config, t.len(), PayloadKind::Both, t.caps)
        }
        TraceRef::Physical(t) => TraceHeader::from_config(
            &t.config,
            t.len(),
            PayloadKind::Physical,
            CapCounts::default(),
        ),
    };
    let tmp = partial_path(path);
    let io_err = |e| Error::io(&tmp, e);
    let file = File::create(&tmp).map_err(io_err)?;
    let mut w = BufWriter::with_capacity(1 << 20, file);
    w.write_all(&header.encode()).map_err(io_err)?;
    match trace {
        TraceRef::Eigen(t) | TraceRef::Both(t) => {
            let with_h = matches!(trace, TraceRef::Both(_));
            for k in 0..t.len() {
                put_matrix(&mut w, &t.u[k]).map_err(io_err)?;
                put_values(&mut w, &t.values_at(k)).map_err(io_err)?;
                put_matrix(&mut w, &t.v[k]).map_err(io_err)?;
                if with_h {
                    put_matrix(&mut w, &t.assemble(k)).map_err(io_err)?;
                }
            }
        }
        TraceRef::Physical(t) => {
            for h in &t.h {
                put_matrix(&mut w, h).map_err(io_err)?;
            }
        }
    }
    let file = w.into_inner().map_err(|e| io_err(e.into_error()))?;
    file.sync_all().map_err(io_err)?;
    drop(file);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    let bytes = HEADER_LEN as u64 + header.payload_bytes().unwrap_or(0);
    Ok(TraceSummary {
        path: path.to_path_buf(),
        header,
        bytes,
    })
}

/// Reads and validates only the header, including the total file length.
pub fn read_header(path: impl AsRef<Path>) -> Result<TraceHeader> {
    let path = path.as_ref();
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let len = f.metadata().map_err(|e| Error::io(path, e))?.len();
    let header = header_from(&mut f, path, len)?;
    Ok(header)
}

fn header_from(r: &mut impl Read, path: &Path, file_len: u64) -> Result<TraceHeader> {
    let bad = |message: String| Error::TraceFormat {
        path: path.to_path_buf(),
        message,
    };
    if file_len < HEADER_LEN as u64 {
        return Err(bad(format!(
            "length mismatch: {file_len} bytes is shorter than the {HEADER_LEN}-byte header"
        )));
    }
    let mut b = [0u8; HEADER_LEN];
    r.read_exact(&mut b).map_err(|e| Error::io(path, e))?;
    let header = TraceHeader::decode(&b, path)?;
    let expected = header
        .payload_bytes()
        .and_then(|p| p.checked_add(HEADER_LEN as u64))
        .ok_or_else(|| bad("payload size overflows".into()))?;
    if expected != file_len {
        return Err(bad(format!(
            "length mismatch: header implies {expected} bytes ({} samples), file has {file_len}",
            header.samples
        )));
    }
    Ok(header)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn values(&mut self, count: usize) -> Vec<Complex64> {
        let out = self.bytes[self.pos..self.pos + 16 * count]
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[0..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..16].try_into().unwrap()),
                )
            })
            .collect();
        self.pos += 16 * count;
        out
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> CMatrix {
        CMatrix::from_vec(rows, cols, self.values(rows * cols)).expect("sized by construction")
    }
}

/// Reads a whole trace file, rejecting any length mismatch.
pub fn read_trace(path: impl AsRef<Path>) -> Result<TraceFile> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let len = f.metadata().map_err(|e| Error::io(path, e))?.len();
    let mut r = BufReader::new(f);
    let header = header_from(&mut r, path, len)?;
    let mut payload = Vec::with_capacity((len - HEADER_LEN as u64) as usize);
    r.read_to_end(&mut payload)
        .map_err(|e| Error::io(path, e))?;
    if payload.len() as u64 != len - HEADER_LEN as u64 {
        return Err(Error::TraceFormat {
            path: path.to_path_buf(),
            message: "file changed while reading".into(),
        });
    }

    let (n, m, count) = (header.n, header.m, header.samples);
    let modes = n.min(m);
    let config = header.config();
    let mut cur = Cursor {
        bytes: &payload,
        pos: 0,
    };
    let mut u = Vec::new();
    let mut v = Vec::new();
    let mut values = vec![Vec::new(); if header.kind.has_eigen() { modes } else { 0 }];
    let mut h = Vec::new();
    for _ in 0..count {
        if header.kind.has_eigen() {
            u.push(cur.matrix(n, n));
            for (series, z) in values.iter_mut().zip(cur.values(modes)) {
                series.push(z);
            }
            v.push(cur.matrix(m, m));
        }
        if header.kind.has_physical() {
            h.push(cur.matrix(n, m));
        }
    }
    let eigen = header.kind.has_eigen().then(|| EigenTrace {
        config: config.clone(),
        u,
        values,
        v,
        caps: header.caps,
    });
    let physical = header
        .kind
        .has_physical()
        .then_some(ChannelTrace { config, h });
    Ok(TraceFile {
        header,
        eigen,
        physical,
    })
}
