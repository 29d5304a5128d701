//! Same-original / different-original decisions and corpus evaluation.
//!
//! A pair of features is compared component by component. Components whose
//! magnitude exceeds the skip thresholds are left out (they absorb
//! resize-estimation error); the remaining components are compared by sign,
//! and the first conflict decides "different". The verdict is fixed at the
//! first conflict — later components cannot change it — but the loop keeps
//! classifying so the reported compared/skipped tallies always cover every
//! component.

use crate::dc_feature::FeatureVector;
use crate::error::{Error, Result};
use crate::feature_store::FeatureStore;
use crate::num::sgn_f;
use crate::resize_map;

/// How a zero component compares against a nonzero one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SignPolicy {
    /// Mismatch iff the signs differ, so 0 conflicts with ±1. This is the
    /// literal sign test.
    Strict,
    /// Mismatch iff the signs are strictly opposite (product -1); a zero is
    /// compatible with either sign. A coefficient sitting at the dead-zone
    /// edge in one image and just outside it in the other then cannot force
    /// a false reject, which is the dead zone's whole purpose.
    #[default]
    ZeroWildcard,
}

/// Matching parameters. Defaults are the calibrated skip thresholds
/// `d = 4` on both sides and the zero-wildcard policy. Setting a threshold
/// to `f64::INFINITY` disables skipping on that side (ablation switch).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchParams {
    /// Skip threshold on enrolled (or estimated) components.
    pub d_enrolled: f64,
    /// Skip threshold on query components.
    pub d_query: f64,
    pub sign_policy: SignPolicy,
}

impl Default for MatchParams {
    fn default() -> Self {
        MatchParams {
            d_enrolled: 4.0,
            d_query: 4.0,
            sign_policy: SignPolicy::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Same,
    Different,
}

/// Outcome of one pairwise comparison.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchDecision {
    pub verdict: Verdict,
    /// Index of the first conflicting block; present iff `Different`.
    pub conflict_index: Option<usize>,
    /// Components that passed the skip test (whether or not a sign test was
    /// still needed for the verdict).
    pub compared: usize,
    /// Components left out by the skip thresholds. `compared + skipped`
    /// always equals the component count.
    pub skipped: usize,
}

impl MatchDecision {
    pub fn is_same(&self) -> bool {
        self.verdict == Verdict::Same
    }
}

fn signs_conflict(enrolled: i32, query: i32, policy: SignPolicy) -> bool {
    match policy {
        SignPolicy::Strict => enrolled != query,
        SignPolicy::ZeroWildcard => enrolled * query == -1,
    }
}

/// Compares an enrolled feature (raw values or a resize estimate, as reals)
/// against a query feature.
pub fn match_features(
    enrolled: &[f64],
    query: &FeatureVector,
    params: &MatchParams,
) -> Result<MatchDecision> {
    if enrolled.len() != query.v.len() {
        return Err(Error::ShapeMismatch(format!(
            "enrolled has {} components, query has {}",
            enrolled.len(),
            query.v.len()
        )));
    }
    let mut compared = 0usize;
    let mut skipped = 0usize;
    let mut conflict: Option<usize> = None;
    for (m, (&e, &q)) in enrolled.iter().zip(query.v.iter()).enumerate() {
        if e.abs() > params.d_enrolled || (q.unsigned_abs() as f64) > params.d_query {
            skipped += 1;
            continue;
        }
        compared += 1;
        if conflict.is_none() && signs_conflict(sgn_f(e), q.signum(), params.sign_policy) {
            conflict = Some(m);
        }
    }
    Ok(MatchDecision {
        verdict: if conflict.is_some() {
            Verdict::Different
        } else {
            Verdict::Same
        },
        conflict_index: conflict,
        compared,
        skipped,
    })
}

/// Convenience wrapper for two same-size integer features.
pub fn match_vectors(
    enrolled: &FeatureVector,
    query: &FeatureVector,
    params: &MatchParams,
) -> Result<MatchDecision> {
    match_features(&enrolled.to_reals(), query, params)
}

/// Decides one enrolled-vs-query pair, estimating the enrolled feature on
/// the query grid when the dimensions differ. A query larger than the
/// enrolled image in either dimension cannot be a provider downscale of it
/// and is judged `Different` outright.
pub fn match_with_estimation(
    enrolled: &FeatureVector,
    query: &FeatureVector,
    params: &MatchParams,
) -> Result<MatchDecision> {
    if (enrolled.width_px, enrolled.height_px) == (query.width_px, query.height_px) {
        return match_vectors(enrolled, query, params);
    }
    if query.width_px > enrolled.width_px || query.height_px > enrolled.height_px {
        return Ok(MatchDecision {
            verdict: Verdict::Different,
            conflict_index: None,
            compared: 0,
            skipped: query.v.len(),
        });
    }
    let estimated = resize_map::estimate(enrolled, query.width_px, query.height_px)?;
    match_features(&estimated.d, query, params)
}

/// Pairwise decision tallies over a query corpus.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub true_negatives: u64,
    pub precision: f64,
    pub recall: f64,
}

impl EvalReport {
    fn finish(mut self) -> Self {
        let p_den = self.true_positives + self.false_positives;
        let r_den = self.true_positives + self.false_negatives;
        self.precision = if p_den == 0 {
            1.0
        } else {
            self.true_positives as f64 / p_den as f64
        };
        self.recall = if r_den == 0 {
            1.0
        } else {
            self.true_positives as f64 / r_den as f64
        };
        self
    }
}

/// A query feature labeled with the id of the original it truly came from.
#[derive(Clone, Debug)]
pub struct LabeledQuery {
    pub feature: FeatureVector,
    pub origin_id: String,
}

/// Matches every query against every enrolled record and tallies the
/// pairwise decisions. Ground truth for a pair is "the record's id equals
/// the query's origin id".
pub fn evaluate(
    db: &FeatureStore,
    queries: &[LabeledQuery],
    params: &MatchParams,
) -> Result<EvalReport> {
    let records = db.scan()?;
    let mut report = EvalReport::default();
    for query in queries {
        for record in &records {
            if record.feature.params != query.feature.params {
                return Err(Error::ShapeMismatch(format!(
                    "record {:?} and query {:?} use different feature parameters",
                    record.image_id, query.origin_id
                )));
            }
            let decision = match_with_estimation(&record.feature, &query.feature, params)?;
            let truly_same = record.image_id == query.origin_id;
            match (decision.is_same(), truly_same) {
                (true, true) => report.true_positives += 1,
                (true, false) => report.false_positives += 1,
                (false, true) => report.false_negatives += 1,
                (false, false) => report.true_negatives += 1,
            }
        }
    }
    Ok(report.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dc_feature::FeatureParams;

    fn fv(v: Vec<i32>) -> FeatureVector {
        FeatureVector {
            params: FeatureParams::default(),
            width_px: v.len() as u32 * 8,
            height_px: 8,
            v,
        }
    }

    #[test]
    fn identical_features_match() {
        let q = fv(vec![0, 2, -3, 4, 0, -4]);
        let d = match_vectors(&q.clone(), &q, &MatchParams::default()).unwrap();
        assert!(d.is_same());
        assert_eq!(d.conflict_index, None);
        assert_eq!(d.compared + d.skipped, 6);
    }

    #[test]
    fn first_conflict_is_reported() {
        let mut e = vec![0i32; 10];
        let mut q = vec![0i32; 10];
        e[7] = 3;
        q[7] = -3;
        e[9] = 2;
        q[9] = -2;
        let d = match_vectors(&fv(e), &fv(q), &MatchParams::default()).unwrap();
        assert_eq!(d.verdict, Verdict::Different);
        assert_eq!(d.conflict_index, Some(7));
        assert_eq!(d.compared + d.skipped, 10);
    }

    #[test]
    fn large_components_are_skipped() {
        // enrolled 5 (> 4) against query -2: skipped, no verdict from it.
        let d = match_vectors(&fv(vec![5]), &fv(vec![-2]), &MatchParams::default()).unwrap();
        assert!(d.is_same());
        assert_eq!(d.skipped, 1);
        assert_eq!(d.compared, 0);
        // query side threshold too
        let d = match_vectors(&fv(vec![-2]), &fv(vec![5]), &MatchParams::default()).unwrap();
        assert!(d.is_same());
        assert_eq!(d.skipped, 1);
    }

    #[test]
    fn zero_policy_table() {
        let strict = MatchParams {
            sign_policy: SignPolicy::Strict,
            ..MatchParams::default()
        };
        let wildcard = MatchParams::default();
        let e = fv(vec![0]);
        let q = fv(vec![2]);
        assert_eq!(
            match_vectors(&e, &q, &strict).unwrap().verdict,
            Verdict::Different
        );
        let d = match_vectors(&e, &q, &wildcard).unwrap();
        assert_eq!(d.verdict, Verdict::Same);
        assert_eq!(d.compared, 1);
    }

    #[test]
    fn estimation_path_rejects_larger_queries() {
        let enrolled = fv(vec![1, 2]); // 16x8
        let query = FeatureVector {
            params: FeatureParams::default(),
            width_px: 24,
            height_px: 8,
            v: vec![1, 2, 3],
        };
        let d = match_with_estimation(&enrolled, &query, &MatchParams::default()).unwrap();
        assert_eq!(d.verdict, Verdict::Different);
    }

    #[test]
    fn infinite_thresholds_disable_skipping() {
        let params = MatchParams {
            d_enrolled: f64::INFINITY,
            d_query: f64::INFINITY,
            ..MatchParams::default()
        };
        let d = match_vectors(&fv(vec![100, -200]), &fv(vec![90, -190]), &params).unwrap();
        assert_eq!(d.skipped, 0);
        assert_eq!(d.compared, 2);
        assert!(d.is_same());
    }
}
