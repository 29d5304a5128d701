//! Desk-scale experiment drivers: synthetic corpora, the upload →
//! recompress (→ resize) provider pipeline, querying-performance runs and
//! the parameter-calibration procedure.
//!
//! The synthetic corpus imitates a set of photographs of one scene: every
//! image shares a smooth low-frequency base, and each image differs only in
//! a handful of small flat patches whose signs encode the image index. Two
//! corpus images therefore disagree, with opposite signs, in at least one
//! patch — exactly the kind of slight difference the identification scheme
//! must still detect — while staying close enough everywhere else to make
//! false positives a real danger.

use std::path::Path;
use std::time::SystemTime;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dc_feature::{extract, FeatureParams, FeatureVector};
use crate::error::{Error, Result};
use crate::feature_store::{sha256, FeatureRecord, FeatureStore};
use crate::jpeg_parse::{parse_jpeg, DcPlane};
use crate::jpeg_sim::{decode, encode, resize_area, PixelImage, Sampling};
use crate::matcher::{evaluate, EvalReport, LabeledQuery, MatchParams};

/// Synthetic corpus description.
#[derive(Clone, Copy, Debug)]
pub struct CorpusSpec {
    pub count: u32,
    pub width: u32,
    pub height: u32,
    pub seed: u64,
}

/// Amplitude of the per-image patches in gray levels. A flat patch at
/// 128 ± 19 has a block DC of ±152, which lands every relevant quality
/// factor in the compared band of the matcher: outside the dead zone, at
/// feature magnitude 4, under the default parameters.
const PATCH_AMPLITUDE: i32 = 19;

/// Patches span 4x4 blocks and sit at block coordinates divisible by 4, so
/// the downscales exercised by the experiments (1/2 and 3/4) keep whole
/// query blocks inside each patch.
const PATCH_BLOCKS: u32 = 4;

fn patch_slots(blocks: u32, n: u32) -> Vec<u32> {
    // Diagonal layout between margins, snapped down to multiples of 4.
    let lo = 4i64;
    let hi = blocks as i64 - 2 * PATCH_BLOCKS as i64; // last admissible start
    let step = (hi - lo) as f64 / (n.max(2) - 1) as f64;
    (0..n as i64)
        .map(|k| {
            let p = lo + (k as f64 * step) as i64;
            ((p / 4) * 4) as u32
        })
        .collect()
}

fn code_bits(count: u32) -> u32 {
    let id_bits = 32 - (count.max(2) - 1).leading_zeros();
    id_bits + 1 // plus a parity bit
}

fn image_code(index: u32, count: u32) -> u32 {
    let id_bits = code_bits(count) - 1;
    let parity = (index.count_ones() & 1) << id_bits;
    index | parity
}

/// Generates `count` mutually similar RGB images: a shared smooth base of
/// low-frequency waves (amplitude <= 12 gray levels) plus per-image sign
/// patches. Images are named `img000`, `img001`, ...
pub fn synth_corpus(spec: &CorpusSpec) -> Result<Vec<(String, PixelImage)>> {
    let blocks_x = spec.width / 8;
    let blocks_y = spec.height / 8;
    let slots = code_bits(spec.count);
    let min_blocks = 4 * (slots as u64 - 1) + 2 * PATCH_BLOCKS as u64 + 4;
    if (blocks_x as u64) < min_blocks || (blocks_y as u64) < min_blocks {
        return Err(Error::InvalidParams(format!(
            "corpus images of {}x{} are too small for {} patch slots (needs >= {} blocks per side)",
            spec.width, spec.height, slots, min_blocks
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let waves: Vec<(f64, f64, f64, f64)> = [5.0, 4.0, 3.0]
        .iter()
        .map(|&amp| {
            (
                amp,
                rng.gen_range(1..=2) as f64,
                rng.gen_range(1..=2) as f64,
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let base = |x: u32, y: u32| -> u8 {
        let mut v = 128.0;
        for &(amp, fx, fy, phase) in &waves {
            let t = std::f64::consts::TAU
                * (fx * x as f64 / spec.width as f64 + fy * y as f64 / spec.height as f64);
            v += amp * (t + phase).sin();
        }
        v.round() as u8
    };

    let xs = patch_slots(blocks_x, slots);
    let ys = patch_slots(blocks_y, slots);
    let in_patch = |x: u32, y: u32| -> Option<u32> {
        for k in 0..slots {
            let (px, py) = (xs[k as usize] * 8, ys[k as usize] * 8);
            if (px..px + PATCH_BLOCKS * 8).contains(&x) && (py..py + PATCH_BLOCKS * 8).contains(&y)
            {
                return Some(k);
            }
        }
        None
    };

    let mut corpus = Vec::with_capacity(spec.count as usize);
    for i in 0..spec.count {
        let code = image_code(i, spec.count);
        let img = PixelImage::rgb_from_fn(spec.width, spec.height, |x, y| {
            let value = match in_patch(x, y) {
                Some(k) => {
                    let sign = if code >> k & 1 == 1 { 1 } else { -1 };
                    (128 + sign * PATCH_AMPLITUDE) as u8
                }
                None => base(x, y),
            };
            [value, value, value]
        });
        corpus.push((format!("img{i:03}"), img));
    }
    Ok(corpus)
}

/// One image after upload: the single-compressed JPEG plus its feature.
pub struct EnrolledImage {
    pub id: String,
    pub jpeg: Vec<u8>,
    pub feature: FeatureVector,
    pub digest: [u8; 32],
}

/// Compresses pixels once and extracts the feature by parsing the emitted
/// stream — the same path a real enrollment walks.
pub fn enroll_pixels(
    id: &str,
    pixels: &PixelImage,
    qf: u8,
    sampling: Sampling,
    params: FeatureParams,
) -> Result<EnrolledImage> {
    let (jpeg, _) = encode(pixels, qf, sampling, 0)?;
    let plane = parse_jpeg(&jpeg)?;
    let feature = extract(&plane, params);
    let digest = sha256(&jpeg);
    Ok(EnrolledImage {
        id: id.to_string(),
        jpeg,
        feature,
        digest,
    })
}

/// Applies the provider pipeline to a single-compressed JPEG: decode,
/// optionally resize, re-encode, and extract the query feature.
pub fn query_feature(
    enrolled_jpeg: &[u8],
    size: Option<(u32, u32)>,
    qf: u8,
    sampling: Sampling,
    params: FeatureParams,
) -> Result<FeatureVector> {
    let pixels = decode(enrolled_jpeg)?;
    let pixels = match size {
        Some((w, h)) => resize_area(&pixels, w, h)?,
        None => pixels,
    };
    let (jpeg, _) = encode(&pixels, qf, sampling, 0)?;
    Ok(extract(&parse_jpeg(&jpeg)?, params))
}

/// Querying-performance experiment description.
#[derive(Clone, Debug)]
pub struct EvalSpec {
    /// One database per enrollment quality factor.
    pub enroll_qfs: Vec<u8>,
    pub query_qfs: Vec<u8>,
    /// Query sizes; `None` keeps the native size.
    pub query_sizes: Vec<Option<(u32, u32)>>,
    /// Optional provider-side resize applied to originals before the first
    /// compression.
    pub upload_size: Option<(u32, u32)>,
    pub sampling: Sampling,
    pub feature: FeatureParams,
    pub matching: MatchParams,
}

impl Default for EvalSpec {
    fn default() -> Self {
        EvalSpec {
            enroll_qfs: vec![95, 85, 75],
            query_qfs: vec![71, 75, 80, 85],
            query_sizes: vec![None],
            upload_size: None,
            sampling: Sampling::S420,
            feature: FeatureParams::default(),
            matching: MatchParams::default(),
        }
    }
}

/// Result of one database's worth of identification operations.
pub struct DbOutcome {
    pub label: String,
    pub enroll_qf: u8,
    pub enrolled: usize,
    pub queries: usize,
    pub report: EvalReport,
}

/// Builds one database per enrollment quality factor under `work_dir`,
/// generates the query set from each database's own uploads, and matches
/// every query against every record.
pub fn run_eval(
    work_dir: &Path,
    originals: &[(String, PixelImage)],
    spec: &EvalSpec,
) -> Result<Vec<DbOutcome>> {
    let uploads: Vec<(String, PixelImage)> = match spec.upload_size {
        Some((w, h)) => originals
            .iter()
            .map(|(id, px)| Ok((id.clone(), resize_area(px, w, h)?)))
            .collect::<Result<_>>()?,
        None => originals.to_vec(),
    };

    let mut outcomes = Vec::new();
    for &qf in &spec.enroll_qfs {
        let label = format!("qf{qf:02}");
        let store = FeatureStore::create(work_dir.join(format!("db_{label}")))?;
        let mut enrolled = Vec::new();
        for (id, pixels) in &uploads {
            let e = enroll_pixels(id, pixels, qf, spec.sampling, spec.feature)?;
            store.put(
                &FeatureRecord {
                    image_id: e.id.clone(),
                    feature: e.feature.clone(),
                    created_at: SystemTime::now(),
                    source_digest: e.digest,
                },
                false,
            )?;
            enrolled.push(e);
        }

        let mut queries = Vec::new();
        for e in &enrolled {
            for &size in &spec.query_sizes {
                for &qqf in &spec.query_qfs {
                    queries.push(LabeledQuery {
                        feature: query_feature(&e.jpeg, size, qqf, spec.sampling, spec.feature)?,
                        origin_id: e.id.clone(),
                    });
                }
            }
        }

        let report = evaluate(&store, &queries, &spec.matching)?;
        outcomes.push(DbOutcome {
            label,
            enroll_qf: qf,
            enrolled: enrolled.len(),
            queries: queries.len(),
            report,
        });
    }
    Ok(outcomes)
}

/// Builds (single-compressed, double-compressed) DC plane pairs over a
/// quality-factor grid: each original is compressed at every `single_qfs`
/// entry, and each of those streams is decoded and re-compressed at every
/// `double_qfs` entry.
pub fn build_calibration_pairs(
    originals: &[(String, PixelImage)],
    single_qfs: &[u8],
    double_qfs: &[u8],
    sampling: Sampling,
) -> Result<Vec<(DcPlane, DcPlane)>> {
    let mut pairs = Vec::new();
    for (_, pixels) in originals {
        for &qf1 in single_qfs {
            let (jpeg1, _) = encode(pixels, qf1, sampling, 0)?;
            let single = parse_jpeg(&jpeg1)?;
            let decoded = decode(&jpeg1)?;
            for &qf2 in double_qfs {
                let (jpeg2, _) = encode(&decoded, qf2, sampling, 0)?;
                pairs.push((single.clone(), parse_jpeg(&jpeg2)?));
            }
        }
    }
    Ok(pairs)
}
