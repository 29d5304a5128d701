//! Durable storage for enrolled features: one binary `.dcf` file per
//! record plus a line-oriented manifest, no database engine.
//!
//! Record format (little-endian, all fields fixed width):
//!
//! ```text
//! magic   8 bytes  "DCFEAT01"
//! format  u16      1
//! width   u32      enrolled width in pixels
//! height  u32      enrolled height in pixels
//! th      u16      dead-zone threshold
//! delta   u32      re-quantization step
//! count   u32      number of feature components
//! v       count x i32
//! digest  32 bytes SHA-256 of the enrolled JPEG
//! ```
//!
//! The manifest is UTF-8 lines `id<TAB>file<TAB>WxH`, rewritten atomically
//! (temp file + rename) after the record file lands. A crash between the
//! two steps leaves an orphan `.dcf` that later opens detect and skip with
//! a warning. Writers serialize on an advisory lock file; readers never
//! block.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use sha2::{Digest, Sha256};

use crate::dc_feature::{FeatureParams, FeatureVector};
use crate::error::{Error, Result};
use crate::num::ceil_div;

const MAGIC: &[u8; 8] = b"DCFEAT01";
const FORMAT_VERSION: u16 = 1;
const STORE_VERSION_LINE: &str = "dcfeat-store 1";
const MANIFEST: &str = "manifest.tsv";
const VERSION_FILE: &str = "VERSION";
const LOCK_FILE: &str = ".lock";

/// SHA-256 of a byte buffer; the `source_digest` convention of the store.
pub fn sha256(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

/// One enrolled feature.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureRecord {
    /// Client-chosen identifier, unique within a store. No control
    /// characters.
    pub image_id: String,
    pub feature: FeatureVector,
    /// When the record landed in the store (the record file's mtime; not
    /// part of the binary format).
    pub created_at: SystemTime,
    /// SHA-256 of the enrolled JPEG bytes.
    pub source_digest: [u8; 32],
}

/// Serializes the binary record body.
pub fn encode_record(feature: &FeatureVector, source_digest: &[u8; 32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(56 + feature.v.len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&feature.width_px.to_le_bytes());
    out.extend_from_slice(&feature.height_px.to_le_bytes());
    out.extend_from_slice(&feature.params.th.to_le_bytes());
    out.extend_from_slice(&feature.params.delta.to_le_bytes());
    out.extend_from_slice(&(feature.v.len() as u32).to_le_bytes());
    for &v in &feature.v {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(source_digest);
    out
}

/// Parses the binary record body.
pub fn decode_record(bytes: &[u8]) -> Result<(FeatureVector, [u8; 32])> {
    let fail = |what: &str| Error::CorruptRecord(what.to_string());
    if bytes.len() < 28 {
        return Err(fail("record shorter than its fixed header"));
    }
    if &bytes[0..8] != MAGIC {
        return Err(Error::VersionMismatch(
            "record does not start with the DCFEAT01 magic".into(),
        ));
    }
    let format = u16::from_le_bytes([bytes[8], bytes[9]]);
    if format != FORMAT_VERSION {
        return Err(Error::VersionMismatch(format!(
            "record format {format} (this build reads {FORMAT_VERSION})"
        )));
    }
    let u32_at = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let width_px = u32_at(10);
    let height_px = u32_at(14);
    let th = u16::from_le_bytes([bytes[18], bytes[19]]);
    let delta = u32_at(20);
    let count = u32_at(24) as usize;
    let expected = ceil_div(width_px, 8) as usize * ceil_div(height_px, 8) as usize;
    if count != expected {
        return Err(fail("component count disagrees with the stored dimensions"));
    }
    if bytes.len() != 28 + 4 * count + 32 {
        return Err(fail("record length disagrees with its component count"));
    }
    let mut v = Vec::with_capacity(count);
    for i in 0..count {
        v.push(i32::from_le_bytes(
            bytes[28 + 4 * i..32 + 4 * i].try_into().unwrap(),
        ));
    }
    let mut digest = [0u8; 32];
    digest.copy_from_slice(&bytes[28 + 4 * count..]);
    let params = FeatureParams::new(th, delta)
        .map_err(|_| fail("record carries a zero delta"))?;
    Ok((
        FeatureVector {
            params,
            width_px,
            height_px,
            v,
        },
        digest,
    ))
}

#[derive(Clone, Debug)]
struct ManifestEntry {
    file: String,
    width: u32,
    height: u32,
}

type Manifest = BTreeMap<String, ManifestEntry>;

/// Persistent collection of feature records under one directory.
pub struct FeatureStore {
    root: PathBuf,
}

impl FeatureStore {
    /// Initializes an empty store in `root` (created if absent). Fails if
    /// the directory already holds a store.
    pub fn create(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(&root)?;
        let version = root.join(VERSION_FILE);
        if version.exists() {
            return Err(Error::InvalidParams(format!(
                "{} already contains a store",
                root.display()
            )));
        }
        fs::write(&version, format!("{STORE_VERSION_LINE}\n"))?;
        fs::write(root.join(MANIFEST), "")?;
        Ok(FeatureStore { root })
    }

    /// Opens an existing store, validating its version tag.
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let version = fs::read_to_string(root.join(VERSION_FILE)).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::VersionMismatch(format!("{} is not a feature store", root.display()))
            } else {
                Error::Io(e)
            }
        })?;
        if version.trim() != STORE_VERSION_LINE {
            return Err(Error::VersionMismatch(format!(
                "store version {:?} (this build reads {STORE_VERSION_LINE:?})",
                version.trim()
            )));
        }
        let store = FeatureStore { root };
        store.warn_orphans(&store.read_manifest()?);
        Ok(store)
    }

    pub fn open_or_create(root: impl AsRef<Path>) -> Result<Self> {
        let r = root.as_ref();
        if r.join(VERSION_FILE).exists() {
            Self::open(r)
        } else {
            Self::create(r)
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn read_manifest(&self) -> Result<Manifest> {
        let text = fs::read_to_string(self.root.join(MANIFEST))?;
        let mut manifest = Manifest::new();
        for (n, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let parsed = (|| -> Option<(String, ManifestEntry)> {
                let [id, file, dims] = fields.as_slice() else {
                    return None;
                };
                let (w, h) = dims.split_once('x')?;
                Some((
                    id.to_string(),
                    ManifestEntry {
                        file: file.to_string(),
                        width: w.parse().ok()?,
                        height: h.parse().ok()?,
                    },
                ))
            })();
            let (id, entry) = parsed.ok_or_else(|| {
                Error::CorruptRecord(format!("malformed manifest line {}", n + 1))
            })?;
            manifest.insert(id, entry);
        }
        Ok(manifest)
    }

    fn write_manifest(&self, manifest: &Manifest) -> Result<()> {
        let mut text = String::new();
        for (id, e) in manifest {
            text.push_str(&format!("{id}\t{}\t{}x{}\n", e.file, e.width, e.height));
        }
        let tmp = self.root.join("manifest.tsv.tmp");
        let mut f = fs::File::create(&tmp)?;
        f.write_all(text.as_bytes())?;
        f.sync_all()?;
        drop(f);
        fs::rename(&tmp, self.root.join(MANIFEST))?;
        Ok(())
    }

    fn warn_orphans(&self, manifest: &Manifest) {
        let referenced: std::collections::BTreeSet<&str> =
            manifest.values().map(|e| e.file.as_str()).collect();
        let Ok(dir) = fs::read_dir(&self.root) else {
            return;
        };
        for entry in dir.flatten() {
            let name = entry.file_name();
            let Some(name) = name.to_str() else { continue };
            if name.ends_with(".dcf") && !referenced.contains(name) {
                log::warn!(
                    "ignoring orphan record file {name} (crash before manifest update?)"
                );
            }
        }
    }

    fn validate_id(id: &str) -> Result<()> {
        if id.is_empty() || id.chars().any(|c| c.is_control()) {
            return Err(Error::InvalidParams(format!(
                "image id {id:?} is empty or contains control characters"
            )));
        }
        Ok(())
    }

    fn file_name_for(id: &str, manifest: &Manifest) -> String {
        let mut base: String = id
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                    c
                } else {
                    '_'
                }
            })
            .take(120)
            .collect();
        if base.is_empty() {
            base = "record".to_string();
        }
        let taken: std::collections::BTreeSet<&str> =
            manifest.values().map(|e| e.file.as_str()).collect();
        let candidate = format!("{base}.dcf");
        if !taken.contains(candidate.as_str()) {
            return candidate;
        }
        for n in 1.. {
            let candidate = format!("{base}-{n}.dcf");
            if !taken.contains(candidate.as_str()) {
                return candidate;
            }
        }
        unreachable!()
    }

    /// Writes a record. With `overwrite` false an existing id is an error.
    pub fn put(&self, record: &FeatureRecord, overwrite: bool) -> Result<()> {
        Self::validate_id(&record.image_id)?;
        let expected = record.feature.block_count();
        if record.feature.v.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "feature has {} components but the dimensions need {expected}",
                record.feature.v.len()
            )));
        }

        // Advisory writer lock; held until the guard drops.
        let lock = fs::File::create(self.root.join(LOCK_FILE))?;
        lock.lock()?;

        let mut manifest = self.read_manifest()?;
        let file = match manifest.get(&record.image_id) {
            Some(_) if !overwrite => {
                return Err(Error::DuplicateId(record.image_id.clone()));
            }
            Some(existing) => existing.file.clone(),
            None => Self::file_name_for(&record.image_id, &manifest),
        };

        let body = encode_record(&record.feature, &record.source_digest);
        let tmp = self.root.join(format!("{file}.tmp"));
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&body)?;
        f.sync_all()?;
        drop(f);
        fs::rename(&tmp, self.root.join(&file))?;

        manifest.insert(
            record.image_id.clone(),
            ManifestEntry {
                file,
                width: record.feature.width_px,
                height: record.feature.height_px,
            },
        );
        self.write_manifest(&manifest)
    }

    fn load(&self, id: &str, entry: &ManifestEntry) -> Result<FeatureRecord> {
        let path = self.root.join(&entry.file);
        let bytes = fs::read(&path)?;
        let (feature, source_digest) = decode_record(&bytes)?;
        if feature.width_px != entry.width || feature.height_px != entry.height {
            return Err(Error::CorruptRecord(format!(
                "record {id:?}: manifest says {}x{}, file says {}x{}",
                entry.width, entry.height, feature.width_px, feature.height_px
            )));
        }
        let created_at = fs::metadata(&path)
            .and_then(|m| m.modified())
            .unwrap_or(SystemTime::UNIX_EPOCH);
        Ok(FeatureRecord {
            image_id: id.to_string(),
            feature,
            created_at,
            source_digest,
        })
    }

    /// Fetches one record by id.
    pub fn get(&self, image_id: &str) -> Result<FeatureRecord> {
        let manifest = self.read_manifest()?;
        let entry = manifest
            .get(image_id)
            .ok_or_else(|| Error::NotFound(image_id.to_string()))?;
        self.load(image_id, entry)
    }

    /// Loads every record, ordered lexicographically by image id.
    pub fn scan(&self) -> Result<Vec<FeatureRecord>> {
        let manifest = self.read_manifest()?;
        manifest
            .iter()
            .map(|(id, entry)| self.load(id, entry))
            .collect()
    }

    /// Ids only, in scan order.
    pub fn ids(&self) -> Result<Vec<String>> {
        Ok(self.read_manifest()?.keys().cloned().collect())
    }

    pub fn count(&self) -> Result<usize> {
        Ok(self.read_manifest()?.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_feature(w: u32, h: u32, seed: i32) -> FeatureVector {
        let count = ceil_div(w, 8) as usize * ceil_div(h, 8) as usize;
        FeatureVector {
            params: FeatureParams::default(),
            width_px: w,
            height_px: h,
            v: (0..count as i32).map(|i| (i * 7 + seed) % 11 - 5).collect(),
        }
    }

    fn record(id: &str, w: u32, h: u32, seed: i32) -> FeatureRecord {
        FeatureRecord {
            image_id: id.to_string(),
            feature: sample_feature(w, h, seed),
            created_at: SystemTime::now(),
            source_digest: sha256(id.as_bytes()),
        }
    }

    #[test]
    fn put_then_get_round_trips_the_feature() {
        let dir = tempfile::tempdir().unwrap();
        let store = FeatureStore::create(dir.path().join("db")).unwrap();
        let rec = record("img_007", 40, 24, 3);
        store.put(&rec, false).unwrap();
        let back = store.get("img_007").unwrap();
        assert_eq!(back.feature, rec.feature);
        assert_eq!(back.source_digest, rec.source_digest);
    }

    #[test]
    fn duplicate_id_needs_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        let store = FeatureStore::create(dir.path().join("db")).unwrap();
        store.put(&record("a", 16, 16, 0), false).unwrap();
        let err = store.put(&record("a", 16, 16, 1), false);
        assert!(matches!(err, Err(Error::DuplicateId(_))));
        store.put(&record("a", 16, 16, 1), true).unwrap();
        assert_eq!(store.count().unwrap(), 1);
        assert_eq!(store.get("a").unwrap().feature, sample_feature(16, 16, 1));
    }

    #[test]
    fn empty_store_behaviour() {
        let dir = tempfile::tempdir().unwrap();
        let store = FeatureStore::create(dir.path().join("db")).unwrap();
        assert!(matches!(store.get("nope"), Err(Error::NotFound(_))));
        assert!(store.scan().unwrap().is_empty());
    }

    #[test]
    fn scan_is_sorted_by_id() {
        let dir = tempfile::tempdir().unwrap();
        let store = FeatureStore::create(dir.path().join("db")).unwrap();
        for id in ["zeta", "alpha", "mid"] {
            store.put(&record(id, 16, 8, 0), false).unwrap();
        }
        let ids: Vec<String> = store
            .scan()
            .unwrap()
            .into_iter()
            .map(|r| r.image_id)
            .collect();
        assert_eq!(ids, vec!["alpha", "mid", "zeta"]);
    }

    #[test]
    fn reopen_sees_records() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("db");
        {
            let store = FeatureStore::create(&path).unwrap();
            store.put(&record("keep", 32, 32, 5), false).unwrap();
        }
        let store = FeatureStore::open(&path).unwrap();
        assert_eq!(store.get("keep").unwrap().feature, sample_feature(32, 32, 5));
    }

    #[test]
    fn orphan_record_file_is_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("db");
        let store = FeatureStore::create(&path).unwrap();
        store.put(&record("real", 16, 16, 2), false).unwrap();
        // Simulate a crash between record write and manifest update.
        let body = encode_record(&sample_feature(16, 16, 9), &[0u8; 32]);
        fs::write(path.join("ghost.dcf"), body).unwrap();
        let store = FeatureStore::open(&path).unwrap();
        assert_eq!(store.ids().unwrap(), vec!["real"]);
        assert!(matches!(store.get("ghost"), Err(Error::NotFound(_))));
    }

    #[test]
    fn version_mismatch_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("db");
        FeatureStore::create(&path).unwrap();
        fs::write(path.join(VERSION_FILE), "dcfeat-store 99\n").unwrap();
        assert!(matches!(
            FeatureStore::open(&path),
            Err(Error::VersionMismatch(_))
        ));
        assert!(matches!(
            FeatureStore::open(dir.path().join("not_a_store")),
            Err(Error::VersionMismatch(_))
        ));
    }

    #[test]
    fn record_format_is_bit_exact() {
        let feature = FeatureVector {
            params: FeatureParams { th: 14, delta: 50 },
            width_px: 9,
            height_px: 17,
            v: vec![1, -1, 0, i32::MAX, i32::MIN, 5],
        };
        let digest = [0xAB; 32];
        let bytes = encode_record(&feature, &digest);
        // 2x3 grid -> 6 components.
        assert_eq!(&bytes[0..8], b"DCFEAT01");
        assert_eq!(bytes[8..10], [1, 0]); // format 1 LE
        assert_eq!(bytes[10..14], 9u32.to_le_bytes());
        assert_eq!(bytes[14..18], 17u32.to_le_bytes());
        assert_eq!(bytes[18..20], 14u16.to_le_bytes());
        assert_eq!(bytes[20..24], 50u32.to_le_bytes());
        assert_eq!(bytes[24..28], 6u32.to_le_bytes());
        assert_eq!(bytes[28..32], 1i32.to_le_bytes());
        assert_eq!(bytes[32..36], (-1i32).to_le_bytes());
        assert_eq!(bytes.len(), 28 + 24 + 32);
        assert_eq!(&bytes[bytes.len() - 32..], &[0xAB; 32]);

        let (back, back_digest) = decode_record(&bytes).unwrap();
        assert_eq!(back, feature);
        assert_eq!(back_digest, digest);
    }

    #[test]
    fn corrupt_records_rejected() {
        let feature = sample_feature(16, 16, 1);
        let mut bytes = encode_record(&feature, &[0; 32]);
        bytes[8] = 9; // format version
        assert!(matches!(
            decode_record(&bytes),
            Err(Error::VersionMismatch(_))
        ));
        let mut bad_magic = encode_record(&feature, &[0; 32]);
        bad_magic[0] = b'X';
        assert!(matches!(
            decode_record(&bad_magic),
            Err(Error::VersionMismatch(_))
        ));
        let truncated = &encode_record(&feature, &[0; 32])[..30];
        assert!(matches!(
            decode_record(truncated),
            Err(Error::CorruptRecord(_))
        ));
    }
}
