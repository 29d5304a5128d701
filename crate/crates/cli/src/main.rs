//! Command-line front end: enroll uploaded JPEGs, query downloaded ones,
//! run desk-scale querying-performance and calibration experiments, and
//! inspect streams.

mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::SystemTime;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use jpegid_core::dc_feature::{calibrate_delta, calibrate_th, extract, FeatureParams};
use jpegid_core::experiment::{build_calibration_pairs, run_eval, EvalSpec};
use jpegid_core::feature_store::{sha256, FeatureRecord, FeatureStore};
use jpegid_core::jpeg_parse::parse_jpeg_with_info;
use jpegid_core::matcher::{match_with_estimation, MatchParams, SignPolicy};
use jpegid_core::jpeg_sim::Sampling;

/// JSON output schema tag; bump together with any field change.
const JSON_SCHEMA: &str = "jpegid/v1";

#[derive(Parser)]
#[command(
    name = "jpegid",
    version,
    about = "Identify double-compressed (and resized) JPEG copies by their luminance DC feature"
)]
struct Cli {
    /// Feature store directory.
    #[arg(long, global = true, env = "JPEGID_STORE")]
    store: Option<PathBuf>,

    /// Dead-zone threshold on quantized DC values.
    #[arg(long, global = true, default_value_t = 14)]
    th: u16,

    /// Re-quantization step for dequantized DC values.
    #[arg(long, global = true, default_value_t = 50)]
    delta: u32,

    /// Skip threshold on enrolled/estimated feature components.
    #[arg(long, global = true, default_value_t = 4.0)]
    d_enrolled: f64,

    /// Skip threshold on query feature components.
    #[arg(long, global = true, default_value_t = 4.0)]
    d_query: f64,

    /// How zero components compare against nonzero ones.
    #[arg(long, global = true, value_enum, default_value_t = PolicyArg::ZeroWildcard)]
    sign_policy: PolicyArg,

    /// Chroma subsampling used when the experiment commands encode.
    #[arg(long, global = true, value_enum, default_value_t = SamplingArg::S420)]
    sampling: SamplingArg,

    /// Emit JSON instead of text.
    #[arg(long, global = true)]
    json: bool,

    /// Proceed even when flags disagree with the parameters stored at
    /// enrollment time.
    #[arg(long, global = true)]
    force: bool,

    /// Include timestamps in JSON output (off keeps output byte-stable).
    #[arg(long, global = true)]
    timestamps: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Strict,
    ZeroWildcard,
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplingArg {
    #[value(name = "444")]
    S444,
    #[value(name = "422")]
    S422,
    #[value(name = "420")]
    S420,
}

#[derive(Subcommand)]
enum Command {
    /// Parse JPEG files, extract their features, and store them.
    Enroll { files: Vec<PathBuf> },
    /// Match one query JPEG against every enrolled record.
    Query { file: PathBuf },
    /// Run a querying-performance experiment from a manifest.
    Eval { manifest: PathBuf },
    /// Run the th/delta calibration procedure from a manifest.
    Calibrate { manifest: PathBuf },
    /// Dump stream facts and a feature summary for one JPEG.
    Inspect { file: PathBuf },
}

impl Cli {
    fn feature_params(&self) -> Result<FeatureParams> {
        FeatureParams::new(self.th, self.delta).map_err(|e| anyhow!(e))
    }

    fn match_params(&self) -> MatchParams {
        MatchParams {
            d_enrolled: self.d_enrolled,
            d_query: self.d_query,
            sign_policy: match self.sign_policy {
                PolicyArg::Strict => SignPolicy::Strict,
                PolicyArg::ZeroWildcard => SignPolicy::ZeroWildcard,
            },
        }
    }

    fn sampling(&self) -> Sampling {
        match self.sampling {
            SamplingArg::S444 => Sampling::S444,
            SamplingArg::S422 => Sampling::S422,
            SamplingArg::S420 => Sampling::S420,
        }
    }

    fn store_path(&self) -> Result<&Path> {
        self.store
            .as_deref()
            .ok_or_else(|| anyhow!("no store configured; pass --store or set JPEGID_STORE"))
    }
}

/// Exit policy: 0 success, 1 any per-file/runtime failure, 2 usage or
/// configuration error (clap's own usage exit is also 2).
enum Failure {
    Config(anyhow::Error),
    Run(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Run(_) => 1,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Config(e) | Failure::Run(e) => e,
        }
    }
}

fn config<T>(r: Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(Failure::Config)
}

fn run_err<T>(r: Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(Failure::Run)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {:#}", failure.error());
            ExitCode::from(failure.code())
        }
    }
}

fn dispatch(cli: &Cli) -> std::result::Result<u8, Failure> {
    match &cli.command {
        Command::Enroll { files } => cmd_enroll(cli, files),
        Command::Query { file } => cmd_query(cli, file),
        Command::Eval { manifest } => cmd_eval(cli, manifest),
        Command::Calibrate { manifest } => cmd_calibrate(cli, manifest),
        Command::Inspect { file } => cmd_inspect(cli, file),
    }
}

fn file_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string_lossy().into_owned())
}

fn enroll_one(store: &FeatureStore, path: &Path, params: FeatureParams) -> Result<(String, u32, u32, usize)> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let (plane, _) = parse_jpeg_with_info(&bytes)?;
    let feature = extract(&plane, params);
    let id = file_id(path);
    let record = FeatureRecord {
        image_id: id.clone(),
        feature,
        created_at: SystemTime::now(),
        source_digest: sha256(&bytes),
    };
    store.put(&record, false)?;
    Ok((id, plane.width_px, plane.height_px, plane.block_count()))
}

fn cmd_enroll(cli: &Cli, files: &[PathBuf]) -> std::result::Result<u8, Failure> {
    if files.is_empty() {
        return Err(Failure::Config(anyhow!("enroll needs at least one file")));
    }
    let params = config(cli.feature_params())?;
    let store = config(
        FeatureStore::open_or_create(config(cli.store_path())?).map_err(|e| anyhow!(e)),
    )?;

    let mut results = Vec::new();
    let mut failures = 0u32;
    for path in files {
        match enroll_one(&store, path, params) {
            Ok((id, w, h, blocks)) => {
                if !cli.json {
                    println!("enrolled {id} {w}x{h} M={blocks}");
                }
                results.push(json!({
                    "file": path.display().to_string(),
                    "status": "ok",
                    "id": id,
                    "width": w,
                    "height": h,
                    "blocks": blocks,
                }));
            }
            Err(e) => {
                failures += 1;
                if !cli.json {
                    eprintln!("failed {}: {e:#}", path.display());
                }
                results.push(json!({
                    "file": path.display().to_string(),
                    "status": "error",
                    "error": format!("{e:#}"),
                }));
            }
        }
    }
    if cli.json {
        let mut doc = json!({
            "schema": JSON_SCHEMA,
            "command": "enroll",
            "results": results,
            "failed": failures,
        });
        if cli.timestamps {
            doc["generated_at"] = json!(unix_seconds());
        }
        println!("{doc}");
    }
    Ok(if failures > 0 { 1 } else { 0 })
}

fn cmd_query(cli: &Cli, file: &Path) -> std::result::Result<u8, Failure> {
    let params = config(cli.feature_params())?;
    let store = config(
        FeatureStore::open(config(cli.store_path())?).map_err(|e| anyhow!(e)),
    )?;
    let bytes = run_err(
        std::fs::read(file).with_context(|| format!("reading {}", file.display())),
    )?;
    let plane = run_err(parse_jpeg_with_info(&bytes).map_err(|e| anyhow!(e)))?.0;
    let query = extract(&plane, params);

    let records = run_err(store.scan().map_err(|e| anyhow!(e)))?;
    if !cli.force {
        if let Some(r) = records.iter().find(|r| r.feature.params != params) {
            return Err(Failure::Config(anyhow!(
                "record {:?} was enrolled with th={} delta={} but the current flags say th={} \
                 delta={}; identification needs the enrollment parameters (or --force)",
                r.image_id,
                r.feature.params.th,
                r.feature.params.delta,
                params.th,
                params.delta
            )));
        }
    }

    let match_params = cli.match_params();
    let mut matches = Vec::new();
    for record in &records {
        let decision = run_err(
            match_with_estimation(&record.feature, &query, &match_params).map_err(|e| anyhow!(e)),
        )?;
        if decision.is_same() {
            matches.push(record.image_id.clone());
        }
    }

    if cli.json {
        let mut doc = json!({
            "schema": JSON_SCHEMA,
            "command": "query",
            "query": {
                "file": file.display().to_string(),
                "width": query.width_px,
                "height": query.height_px,
                "blocks": query.block_count(),
            },
            "candidates": records.len(),
            "matches": matches,
        });
        if cli.timestamps {
            doc["generated_at"] = json!(unix_seconds());
        }
        println!("{doc}");
    } else if matches.is_empty() {
        println!("no matches among {} records", records.len());
    } else {
        for id in &matches {
            println!("{id}");
        }
    }
    Ok(0)
}

fn cmd_eval(cli: &Cli, manifest_path: &Path) -> std::result::Result<u8, Failure> {
    let m = config(manifest::load_eval_manifest(manifest_path))?;
    let originals = run_err(manifest::load_originals(&m.originals))?;
    let spec = EvalSpec {
        enroll_qfs: m.enroll_qfs,
        query_qfs: m.query_qfs,
        query_sizes: m.query_sizes,
        upload_size: m.upload_size,
        sampling: cli.sampling(),
        feature: config(cli.feature_params())?,
        matching: cli.match_params(),
    };
    let work = run_err(tempfile::tempdir().context("creating eval work dir"))?;
    let outcomes = run_err(run_eval(work.path(), &originals, &spec).map_err(|e| anyhow!(e)))?;

    if cli.json {
        let dbs: Vec<_> = outcomes
            .iter()
            .map(|o| {
                json!({
                    "label": o.label,
                    "enroll_qf": o.enroll_qf,
                    "enrolled": o.enrolled,
                    "queries": o.queries,
                    "tp": o.report.true_positives,
                    "fp": o.report.false_positives,
                    "fn": o.report.false_negatives,
                    "tn": o.report.true_negatives,
                    "precision": o.report.precision,
                    "recall": o.report.recall,
                })
            })
            .collect();
        let mut doc = json!({
            "schema": JSON_SCHEMA,
            "command": "eval",
            "databases": dbs,
        });
        if cli.timestamps {
            doc["generated_at"] = json!(unix_seconds());
        }
        println!("{doc}");
    } else {
        for o in &outcomes {
            println!(
                "db {} enrolled={} queries={} tp={} fp={} fn={} tn={} precision={:.4} recall={:.4}",
                o.label,
                o.enrolled,
                o.queries,
                o.report.true_positives,
                o.report.false_positives,
                o.report.false_negatives,
                o.report.true_negatives,
                o.report.precision,
                o.report.recall
            );
        }
    }
    Ok(0)
}

fn cmd_calibrate(cli: &Cli, manifest_path: &Path) -> std::result::Result<u8, Failure> {
    let m = config(manifest::load_calibrate_manifest(manifest_path))?;
    let originals = run_err(manifest::load_originals(&m.originals))?;
    let pairs = run_err(
        build_calibration_pairs(&originals, &m.single_qfs, &m.double_qfs, cli.sampling())
            .map_err(|e| anyhow!(e)),
    )?;
    let th = run_err(calibrate_th(&pairs).map_err(|e| anyhow!(e)))?;
    let delta = run_err(calibrate_delta(&pairs, th).map_err(|e| anyhow!(e)))?;

    if cli.json {
        println!(
            "{}",
            json!({
                "schema": JSON_SCHEMA,
                "command": "calibrate",
                "pairs": pairs.len(),
                "th": th,
                "delta": delta,
            })
        );
    } else {
        println!("pairs {}", pairs.len());
        println!("th {th}");
        println!("delta {delta}");
    }
    Ok(0)
}

fn cmd_inspect(cli: &Cli, file: &Path) -> std::result::Result<u8, Failure> {
    let params = config(cli.feature_params())?;
    let bytes = run_err(
        std::fs::read(file).with_context(|| format!("reading {}", file.display())),
    )?;
    let (plane, info) = run_err(parse_jpeg_with_info(&bytes).map_err(|e| anyhow!(e)))?;
    let feature = extract(&plane, params);

    // DC histogram over fixed magnitude bands (deterministic output).
    let edges: [i32; 7] = [0, 4, 14, 64, 256, 1024, i32::MAX];
    let mut bands = [0usize; 7]; // [zero, 1..=4, 5..=14, 15..=64, ..]
    for &dc in &plane.dc {
        let a = dc.abs();
        let band = if a == 0 {
            0
        } else {
            edges.iter().position(|&e| a <= e).unwrap_or(6)
        };
        bands[band] += 1;
    }
    let zero_features = feature.v.iter().filter(|&&v| v == 0).count();
    let in_band = feature
        .v
        .iter()
        .filter(|&&v| v != 0 && v.unsigned_abs() <= 4)
        .count();
    let vmin = feature.v.iter().min().copied().unwrap_or(0);
    let vmax = feature.v.iter().max().copied().unwrap_or(0);

    if cli.json {
        println!(
            "{}",
            json!({
                "schema": JSON_SCHEMA,
                "command": "inspect",
                "file": file.display().to_string(),
                "width": plane.width_px,
                "height": plane.height_px,
                "blocks": plane.block_count(),
                "components": info.components,
                "luma_sampling": format!("{}x{}", info.luma_sampling.0, info.luma_sampling.1),
                "restart_interval": info.restart_interval,
                "q_dc": plane.q_dc,
                "dc_bands": {
                    "zero": bands[0],
                    "1..4": bands[1],
                    "5..14": bands[2],
                    "15..64": bands[3],
                    "65..256": bands[4],
                    "257..1024": bands[5],
                },
                "feature": {
                    "th": params.th,
                    "delta": params.delta,
                    "zero": zero_features,
                    "in_band": in_band,
                    "min": vmin,
                    "max": vmax,
                },
            })
        );
    } else {
        println!("file {}", file.display());
        println!("size {}x{} px, M={} blocks", plane.width_px, plane.height_px, plane.block_count());
        println!(
            "components {}, luma sampling {}x{}, restart interval {}",
            info.components, info.luma_sampling.0, info.luma_sampling.1, info.restart_interval
        );
        println!("q_dc {}", plane.q_dc);
        println!(
            "dc |.| bands: zero={} 1-4={} 5-14={} 15-64={} 65-256={} 257-1024={}",
            bands[0], bands[1], bands[2], bands[3], bands[4], bands[5]
        );
        println!(
            "feature th={} delta={}: zero={} in-band={} min={} max={}",
            params.th, params.delta, zero_features, in_band, vmin, vmax
        );
    }
    Ok(0)
}

fn unix_seconds() -> u64 {
    SystemTime::now()
        .duration_since(SystemTime::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
