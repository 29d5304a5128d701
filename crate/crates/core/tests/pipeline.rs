//! Cross-module pipeline tests: the estimator against the real pixel-domain
//! provider chain, store population at protocol scale, and evaluation
//! tallies on toy databases.

use std::time::SystemTime;

use jpegid_core::dc_feature::{extract, FeatureParams, FeatureVector};
use jpegid_core::feature_store::{sha256, FeatureRecord, FeatureStore};
use jpegid_core::jpeg_parse::parse_jpeg;
use jpegid_core::jpeg_sim::{encode, resize_area, PixelImage, Sampling};
use jpegid_core::matcher::{evaluate, match_features, LabeledQuery, MatchParams, Verdict};
use jpegid_core::num::sgn_f;
use jpegid_core::resize_map::estimate;

/// An image that is constant within every 8x8 block, with block levels
/// sweeping smoothly from the dead zone through the compared band and past
/// the skip threshold.
fn block_constant_image(width: u32, height: u32) -> PixelImage {
    PixelImage::gray_from_fn(width, height, |x, y| {
        let (bx, by) = ((x / 8) as f64, (y / 8) as f64);
        let offset = 22.0
            * (std::f64::consts::TAU * bx / 16.0).sin()
            * (std::f64::consts::TAU * by / 24.0).cos();
        (128.0 + offset).round() as u8
    })
}

/// The estimator must agree in sign with the real resize pipeline on every
/// compared component; disagreement is exactly what the skip thresholds
/// exist to absorb.
#[test]
fn estimator_matches_pixel_domain_resize_signs() {
    let params = FeatureParams::default();
    let matching = MatchParams::default();
    let img = block_constant_image(128, 96);

    let (jpeg, _) = encode(&img, 95, Sampling::S444, 0).unwrap();
    let enrolled = extract(&parse_jpeg(&jpeg).unwrap(), params);

    for (qw, qh) in [(96u32, 72u32), (64, 48)] {
        // Pixel domain: what the provider actually produces.
        let resized = resize_area(&img, qw, qh).unwrap();
        let (qjpeg, _) = encode(&resized, 80, Sampling::S444, 0).unwrap();
        let query = extract(&parse_jpeg(&qjpeg).unwrap(), params);

        // Feature domain: what the matcher reconstructs from the record.
        let estimated = estimate(&enrolled, qw, qh).unwrap();

        let mut compared = 0;
        for (m, (&d, &v)) in estimated.d.iter().zip(query.v.iter()).enumerate() {
            if d.abs() > matching.d_enrolled || (v.abs() as f64) > matching.d_query {
                continue;
            }
            compared += 1;
            assert_ne!(
                sgn_f(d) * v.signum(),
                -1,
                "sign conflict at block {m} for {qw}x{qh}: estimated {d}, actual {v}"
            );
        }
        assert!(compared > 20, "comparison would be vacuous: {compared}");

        let decision = match_features(&estimated.d, &query, &matching).unwrap();
        assert_eq!(decision.verdict, Verdict::Same, "{qw}x{qh}");
    }
}

fn tiny_record(id: &str, v: Vec<i32>) -> FeatureRecord {
    FeatureRecord {
        image_id: id.to_string(),
        feature: FeatureVector {
            params: FeatureParams::default(),
            width_px: v.len() as u32 * 8,
            height_px: 8,
            v,
        },
        created_at: SystemTime::now(),
        source_digest: sha256(id.as_bytes()),
    }
}

/// Store population at the scale of the querying protocol: 186 originals
/// times 3 enrollment quality factors, enumerable in an order independent
/// of insertion order.
#[test]
fn store_holds_a_full_protocol_of_records() {
    let make_ids = || {
        let mut ids = Vec::new();
        for img in 0..186 {
            for qf in [95, 85, 75] {
                ids.push(format!("img{img:03}_qf{qf}"));
            }
        }
        ids
    };

    let dir = tempfile::tempdir().unwrap();
    let forward = FeatureStore::create(dir.path().join("fwd")).unwrap();
    let backward = FeatureStore::create(dir.path().join("bwd")).unwrap();
    let ids = make_ids();
    for id in &ids {
        forward.put(&tiny_record(id, vec![1]), false).unwrap();
    }
    for id in ids.iter().rev() {
        backward.put(&tiny_record(id, vec![1]), false).unwrap();
    }

    let fwd_ids = forward.ids().unwrap();
    let bwd_ids = backward.ids().unwrap();
    assert_eq!(fwd_ids.len(), 558);
    assert_eq!(fwd_ids, bwd_ids);
    let mut sorted = fwd_ids.clone();
    sorted.sort();
    assert_eq!(fwd_ids, sorted);
}

#[test]
fn evaluate_tallies_toy_databases() {
    let dir = tempfile::tempdir().unwrap();
    let store = FeatureStore::create(dir.path().join("db")).unwrap();
    store.put(&tiny_record("origin", vec![3, 3]), false).unwrap();

    let self_query = LabeledQuery {
        feature: tiny_record("origin", vec![3, 3]).feature,
        origin_id: "origin".into(),
    };
    let report = evaluate(&store, std::slice::from_ref(&self_query), &MatchParams::default()).unwrap();
    assert_eq!(
        (report.true_positives, report.false_positives, report.false_negatives),
        (1, 0, 0)
    );
    assert_eq!((report.precision, report.recall), (1.0, 1.0));

    // A query whose original is absent and matches nothing: one true
    // negative per enrolled record.
    store.put(&tiny_record("other", vec![-3, -3]), false).unwrap();
    let stranger = LabeledQuery {
        feature: tiny_record("stranger", vec![3, -3]).feature,
        origin_id: "stranger".into(),
    };
    let report = evaluate(&store, &[stranger], &MatchParams::default()).unwrap();
    assert_eq!(report.true_negatives, 2);
    assert_eq!(report.true_positives + report.false_positives + report.false_negatives, 0);
    assert_eq!((report.precision, report.recall), (1.0, 1.0));

    // Vacuous query set: all-zero tallies, precision and recall define to 1.
    let report = evaluate(&store, &[], &MatchParams::default()).unwrap();
    assert_eq!(report.true_positives + report.false_positives + report.false_negatives, 0);
    assert_eq!((report.precision, report.recall), (1.0, 1.0));

    // Parameter disagreement between query and database is an error.
    let mut off = self_query;
    off.feature.params = FeatureParams::new(10, 50).unwrap();
    assert!(evaluate(&store, &[off], &MatchParams::default()).is_err());
}
