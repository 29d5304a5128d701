//! Line-oriented manifest files for the `eval` and `calibrate` commands.
//!
//! UTF-8 text; `#` starts a comment, blank lines are ignored. Each line is
//! a keyword followed by whitespace-separated fields:
//!
//! ```text
//! originals synthetic <count> <WxH> <seed>   # or: originals dir <path>
//! upload_size <WxH>                          # optional
//! enroll_qf 95 85 75
//! query_qf 71 75 80 85
//! query_size native 480x640                  # optional, default native
//! single_qf 70 75 80 85 90 95                # calibrate only
//! double_qf 70 75 80 85 90 95                # calibrate only
//! ```

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

use jpegid_core::experiment::{synth_corpus, CorpusSpec};
use jpegid_core::jpeg_sim::{decode, PixelImage};

#[derive(Debug, Clone)]
pub enum OriginalsSpec {
    Dir(PathBuf),
    Synthetic {
        count: u32,
        width: u32,
        height: u32,
        seed: u64,
    },
}

#[derive(Debug, Clone)]
pub struct EvalManifest {
    pub originals: OriginalsSpec,
    pub upload_size: Option<(u32, u32)>,
    pub enroll_qfs: Vec<u8>,
    pub query_qfs: Vec<u8>,
    pub query_sizes: Vec<Option<(u32, u32)>>,
}

#[derive(Debug, Clone)]
pub struct CalibrateManifest {
    pub originals: OriginalsSpec,
    pub single_qfs: Vec<u8>,
    pub double_qfs: Vec<u8>,
}

fn parse_size(field: &str) -> Result<(u32, u32)> {
    let (w, h) = field
        .split_once('x')
        .ok_or_else(|| anyhow!("size {field:?} is not WxH"))?;
    Ok((w.parse()?, h.parse()?))
}

fn parse_qfs(fields: &[String]) -> Result<Vec<u8>> {
    if fields.is_empty() {
        bail!("expected at least one quality factor");
    }
    fields
        .iter()
        .map(|f| {
            f.parse::<u8>()
                .map_err(|_| anyhow!("quality factor {f:?} is not an integer in 1..=100"))
        })
        .collect()
}

fn parse_originals(fields: &[String], base: &Path) -> Result<OriginalsSpec> {
    let fields: Vec<&str> = fields.iter().map(String::as_str).collect();
    match fields.as_slice() {
        ["dir", path] => Ok(OriginalsSpec::Dir(base.join(path))),
        ["synthetic", count, size, seed] => {
            let (width, height) = parse_size(size)?;
            Ok(OriginalsSpec::Synthetic {
                count: count.parse()?,
                width,
                height,
                seed: seed.parse()?,
            })
        }
        _ => bail!("originals must be `dir <path>` or `synthetic <count> <WxH> <seed>`"),
    }
}

struct Lines {
    entries: Vec<(String, Vec<String>)>,
}

impl Lines {
    fn read(path: &Path) -> Result<Lines> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        let mut entries = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace().map(str::to_string);
            let key = fields.next().unwrap();
            entries.push((
                format!("{key}@{}", n + 1),
                fields.collect::<Vec<String>>(),
            ));
        }
        Ok(Lines { entries })
    }

    fn take(&mut self, key: &str) -> Option<Vec<String>> {
        let at = self
            .entries
            .iter()
            .position(|(k, _)| k.split('@').next() == Some(key))?;
        Some(self.entries.remove(at).1)
    }

    fn finish(self) -> Result<()> {
        if let Some((key, _)) = self.entries.first() {
            let (key, line) = key.split_once('@').unwrap_or((key, "?"));
            bail!("unknown or repeated manifest key {key:?} on line {line}");
        }
        Ok(())
    }
}

pub fn load_eval_manifest(path: &Path) -> Result<EvalManifest> {
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut lines = Lines::read(path)?;
    let originals = parse_originals(
        &lines
            .take("originals")
            .ok_or_else(|| anyhow!("manifest is missing `originals`"))?,
        &base,
    )?;
    let upload_size = lines
        .take("upload_size")
        .map(|f| match f.as_slice() {
            [s] => parse_size(s),
            _ => bail!("upload_size takes exactly one WxH"),
        })
        .transpose()?;
    let enroll_qfs = parse_qfs(&lines.take("enroll_qf").ok_or_else(
        || anyhow!("manifest is missing `enroll_qf`"),
    )?)?;
    let query_qfs = parse_qfs(&lines.take("query_qf").ok_or_else(
        || anyhow!("manifest is missing `query_qf`"),
    )?)?;
    let query_sizes = match lines.take("query_size") {
        None => vec![None],
        Some(fields) => {
            if fields.is_empty() {
                bail!("query_size needs at least one entry");
            }
            fields
                .iter()
                .map(|f| {
                    if f == "native" {
                        Ok(None)
                    } else {
                        parse_size(f).map(Some)
                    }
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    lines.finish()?;
    Ok(EvalManifest {
        originals,
        upload_size,
        enroll_qfs,
        query_qfs,
        query_sizes,
    })
}

pub fn load_calibrate_manifest(path: &Path) -> Result<CalibrateManifest> {
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut lines = Lines::read(path)?;
    let originals = parse_originals(
        &lines
            .take("originals")
            .ok_or_else(|| anyhow!("manifest is missing `originals`"))?,
        &base,
    )?;
    let single_qfs = parse_qfs(&lines.take("single_qf").ok_or_else(
        || anyhow!("manifest is missing `single_qf`"),
    )?)?;
    let double_qfs = parse_qfs(&lines.take("double_qf").ok_or_else(
        || anyhow!("manifest is missing `double_qf`"),
    )?)?;
    lines.finish()?;
    Ok(CalibrateManifest {
        originals,
        single_qfs,
        double_qfs,
    })
}

/// Materializes the originals named by a manifest, sorted by id.
pub fn load_originals(spec: &OriginalsSpec) -> Result<Vec<(String, PixelImage)>> {
    match spec {
        OriginalsSpec::Synthetic {
            count,
            width,
            height,
            seed,
        } => Ok(synth_corpus(&CorpusSpec {
            count: *count,
            width: *width,
            height: *height,
            seed: *seed,
        })?),
        OriginalsSpec::Dir(dir) => {
            let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
                .with_context(|| format!("reading originals dir {}", dir.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    matches!(
                        p.extension().and_then(|e| e.to_str()),
                        Some("jpg") | Some("jpeg")
                    )
                })
                .collect();
            files.sort();
            if files.is_empty() {
                bail!("originals dir {} has no .jpg/.jpeg files", dir.display());
            }
            files
                .into_iter()
                .map(|p| {
                    let id = p
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_default();
                    let bytes = std::fs::read(&p)
                        .with_context(|| format!("reading {}", p.display()))?;
                    let pixels = decode(&bytes)
                        .with_context(|| format!("decoding {}", p.display()))?;
                    Ok((id, pixels))
                })
                .collect()
        }
    }
}
