//! `eigenchan` command-line front end.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eigenchan::analysis::{empirical_cdf, oob_rejection, rayleigh_slope, SLOPE_WINDOW};
use eigenchan::doppler::periodogram;
use eigenchan::io::{
    export_cdf_csv, export_sir_csv, export_spectrum_csv, manifest_path, read_header, read_trace,
    write_trace, PayloadKind, RunManifest, TraceRef,
};
use eigenchan::scenario::{
    forced_swap, run_tracking, sorted_decomposition_sir, InterferenceSum, TrackingPolicy,
    UpdateSchedule,
};
use eigenchan::validation::{Profile, Suite, PSD_SEGMENTS};
use eigenchan::{generate, parse_config, Error, ModelClass, ModelConfig, RunKind};

const EXIT_USAGE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(
    name = "eigenchan",
    version,
    about = "Eigen-domain MIMO channel generator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a trace file.
    Generate(GenerateArgs),
    /// Inject forced eigenmode swaps into a trace.
    Stress {
        #[arg(long)]
        input: PathBuf,
        /// Swap block length in samples.
        #[arg(long)]
        period: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-mode SIR under a tracking policy, as CSV.
    Sir(SirArgs),
    /// PSD and CDF exports for every channel element.
    Analyze {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = PSD_SEGMENTS)]
        segments: usize,
    },
    /// Run the acceptance suite; nonzero exit if any check fails.
    Validate {
        /// Defaults to $EIGENCHAN_PROFILE, then `quick`.
        #[arg(long)]
        profile: Option<String>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Print a trace header or a manifest as JSON.
    Info { input: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Values,
    Scenario,
}

#[derive(Args)]
struct GenerateArgs {
    /// Key = value config document; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Selects the S_f default: 8 for values, 20 for scenario.
    #[arg(long, value_enum, default_value = "scenario")]
    kind: Kind,
    #[arg(long)]
    class: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    f_d: Option<f64>,
    #[arg(long)]
    s_f: Option<f64>,
    #[arg(long)]
    k_f: Option<f64>,
    /// Comma-separated mean-magnitude ratios.
    #[arg(long)]
    s_ratios: Option<String>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    n_s: Option<usize>,
    /// eigen, physical or both.
    #[arg(long, default_value = "eigen")]
    payload: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SirArgs {
    #[arg(long)]
    input: PathBuf,
    /// frozen, every-sample or every-K.
    #[arg(long, default_value = "every-sample")]
    u_update: String,
    #[arg(long, default_value = "every-sample")]
    v_update: String,
    /// Forced-swap period applied to the channel.
    #[arg(long)]
    swap: Option<usize>,
    /// Sum interference powers instead of amplitudes.
    #[arg(long)]
    power_sum: bool,
    /// Take weights from a per-sample sorted SVD instead of the natural path.
    #[arg(long)]
    sorted: bool,
    #[arg(long)]
    out: PathBuf,
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config { .. } | Error::Unsupported(_) => EXIT_USAGE,
            Error::Io { .. } | Error::TraceFormat { .. } => EXIT_IO,
            _ => EXIT_VALIDATION,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Stress { input, period, out } => cmd_stress(&input, period, &out),
        Command::Sir(a) => cmd_sir(a),
        Command::Analyze {
            input,
            out_dir,
            segments,
        } => cmd_analyze(&input, &out_dir, segments),
        Command::Validate { profile, out_dir } => cmd_validate(profile, &out_dir),
        Command::Info { input } => cmd_info(&input),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("eigenchan: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// Prints a line; a closed pipe (`| head`) is not an error.
fn say(line: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn parent(path: &Path) -> &Path {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
}

fn resolve_config(a: &GenerateArgs) -> Result<ModelConfig, Error> {
    let kind = match a.kind {
        Kind::Values => RunKind::Values,
        Kind::Scenario => RunKind::Scenario,
    };
    let text = match &a.config {
        Some(p) => fs::read_to_string(p).map_err(|e| Error::Io {
            path: p.clone(),
            source: e,
        })?,
        None => String::new(),
    };
    let mut c = parse_config(&text, kind)?;
    if let Some(class) = &a.class {
        c.class = class.parse::<ModelClass>()?;
    }
    if let Some(f_d) = a.f_d {
        // the default angular rate follows f_d
        if c.omega == ModelConfig::default_omega(c.f_d_hz) {
            c.omega = ModelConfig::default_omega(f_d);
        }
        c.f_d_hz = f_d;
    }
    c.n = a.n.unwrap_or(c.n);
    c.m = a.m.unwrap_or(c.m);
    c.samples = a.samples.unwrap_or(c.samples);
    c.seed = a.seed.unwrap_or(c.seed);
    c.s_f = a.s_f.unwrap_or(c.s_f);
    c.k_f = a.k_f.unwrap_or(c.k_f);
    c.omega = a.omega.unwrap_or(c.omega);
    c.n_s = a.n_s.unwrap_or(c.n_s);
    if let Some(r) = &a.s_ratios {
        let ratios = r
            .split(',')
            .map(|x| {
                x.trim().parse::<f64>().map_err(|_| Error::Config {
                    key: "s_ratios".into(),
                    message: format!("cannot parse `{x}`"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        c.s_ratios = Some(ratios);
    }
    c.validate()?;
    Ok(c)
}

fn cmd_generate(a: GenerateArgs) -> Outcome {
    let cfg = resolve_config(&a)?;
    let payload: PayloadKind = a.payload.parse()?;
    let mut manifest = RunManifest::start("generate", Some(cfg.clone()));
    let trace = generate(&cfg)?;
    let channel;
    let r = match payload {
        PayloadKind::Eigen => TraceRef::Eigen(&trace),
        PayloadKind::Both => TraceRef::Both(&trace),
        PayloadKind::Physical => {
            channel = trace.channel();
            TraceRef::Physical(&channel)
        }
    };
    write_trace(r, &a.out)?;
    manifest.add_output(parent(&a.out), &a.out)?;
    manifest.notes.push(format!(
        "capped samples: rx {}, tx {}",
        trace.caps.rx, trace.caps.tx
    ));
    manifest.finish(manifest_path(&a.out))?;
    Ok(())
}

fn cmd_stress(input: &Path, period: usize, out: &Path) -> Outcome {
    let file = read_trace(input)?;
    let kind = file.header.kind;
    let trace = file.into_eigen()?;
    let mut manifest = RunManifest::start("stress", Some(trace.config.clone()));
    let swapped = forced_swap(&trace, period)?;
    let r = if kind == PayloadKind::Both {
        TraceRef::Both(&swapped)
    } else {
        TraceRef::Eigen(&swapped)
    };
    write_trace(r, out)?;
    manifest.add_output(parent(out), out)?;
    manifest.policies.push(format!("swap={period}"));
    manifest
        .notes
        .push(format!("source trace: {}", input.display()));
    manifest.finish(manifest_path(out))?;
    Ok(())
}

fn cmd_sir(a: SirArgs) -> Outcome {
    let trace = read_trace(&a.input)?.into_eigen()?;
    let mut policy = TrackingPolicy::new(
        a.u_update.parse::<UpdateSchedule>()?,
        a.v_update.parse::<UpdateSchedule>()?,
    );
    policy.swap_injection = a.swap;
    if a.power_sum {
        policy.interference = InterferenceSum::Power;
    }
    let mut manifest = RunManifest::start("sir", Some(trace.config.clone()));
    let series = if a.sorted {
        sorted_decomposition_sir(&trace, &policy)?
    } else {
        run_tracking(&trace, &policy)?
    };
    export_sir_csv(&series, &a.out)?;
    manifest.add_output(parent(&a.out), &a.out)?;
    let weights = if a.sorted {
        "sorted-svd"
    } else {
        "natural-path"
    };
    manifest
        .policies
        .push(format!("{},weights={weights}", series.policy));
    manifest.notes.push("+inf SIR written as 300.0".into());
    manifest.finish(manifest_path(&a.out))?;
    Ok(())
}

fn cmd_analyze(input: &Path, out_dir: &Path, segments: usize) -> Outcome {
    let file = read_trace(input)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::Io {
        path: out_dir.to_path_buf(),
        source: e,
    })?;
    let channel = file.channel();
    let cfg = &channel.config;
    let mut manifest = RunManifest::start("analyze", Some(cfg.clone()));
    manifest
        .notes
        .push("PSD normalized to peak bin = 0 dB; CDF levels in dB relative to RMS".into());
    for i in 0..cfg.n {
        for j in 0..cfg.m {
            let h = channel.element(i, j);
            let spectrum = periodogram(&h, cfg.f_s(), segments)?;
            let psd = out_dir.join(format!("h{}{}_psd.csv", i + 1, j + 1));
            export_spectrum_csv(&spectrum, cfg.f_d_hz, &psd)?;
            manifest.add_output(out_dir, &psd)?;
            let mags: Vec<f64> = h.iter().map(|z| z.norm()).collect();
            let cdf = empirical_cdf(&mags)?;
            let path = out_dir.join(format!("h{}{}_cdf.csv", i + 1, j + 1));
            export_cdf_csv(&cdf, &path)?;
            manifest.add_output(out_dir, &path)?;
            let slope = rayleigh_slope(&cdf, SLOPE_WINDOW.0, SLOPE_WINDOW.1)
                .map_or_else(|e| format!("n/a ({e})"), |s| format!("{s:.2} dB/decade"));
            let rejection = oob_rejection(&spectrum, cfg.f_d_hz)
                .map_or_else(|e| format!("n/a ({e})"), |r| format!("{r:.1} dB"));
            let line = format!(
                "h{}{}: out-of-band rejection {rejection}, CDF slope {slope}",
                i + 1,
                j + 1
            );
            say(&line);
            manifest.notes.push(line);
        }
    }
    if let Some(trace) = &file.eigen {
        for (k, s) in trace.values.iter().enumerate() {
            let mags: Vec<f64> = s.iter().map(|z| z.norm()).collect();
            let path = out_dir.join(format!("s{}_cdf.csv", k + 1));
            export_cdf_csv(&empirical_cdf(&mags)?, &path)?;
            manifest.add_output(out_dir, &path)?;
        }
    }
    manifest.finish(out_dir.join("analyze.manifest.json"))?;
    Ok(())
}

fn cmd_validate(profile: Option<String>, out_dir: &Path) -> Outcome {
    let profile = match profile {
        Some(p) => p.parse::<Profile>()?,
        None => Profile::from_env(Profile::Quick)?,
    };
    fs::create_dir_all(out_dir).map_err(|e| Error::Io {
        path: out_dir.to_path_buf(),
        source: e,
    })?;
    let mut manifest = RunManifest::start(format!("validate --profile {profile}"), None);
    let results = Suite::new(profile).run_all();
    for r in &results {
        say(&r.to_string());
    }
    let path = out_dir.join("validate.json");
    let text = serde_json::to_string_pretty(&results).expect("results serialize") + "\n";
    fs::write(&path, text).map_err(|e| Error::Io {
        path: path.clone(),
        source: e,
    })?;
    manifest.add_output(out_dir, &path)?;
    manifest.finish(out_dir.join("validate.manifest.json"))?;
    let failed: Vec<String> = results
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.id.to_string())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_VALIDATION,
            message: format!("failing checks: {}", failed.join(", ")),
        })
    }
}

fn cmd_info(input: &Path) -> Outcome {
    let is_manifest = input.extension().is_some_and(|e| e == "json");
    let value = if is_manifest {
        serde_json::to_value(RunManifest::read(input)?)
    } else {
        let header = read_header(input)?;
        let beside = manifest_path(input);
        let manifest = if beside.exists() {
            Some(RunManifest::read(&beside)?)
        } else {
            None
        };
        serde_json::to_value(serde_json::json!({ "header": header, "manifest": manifest }))
    }
    .expect("info serializes");
    say(&serde_json::to_string_pretty(&value).expect("info serializes"));
    Ok(())
}
