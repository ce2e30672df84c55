//! Numeric description of a query pair for the supervised cascade.
//!
//! Twenty-seven features in four groups: lexical (0–11), phonetic (12–14),
//! temporal (15–17) and session (18–26). The phonetic group applies cosine,
//! Jaccard and overlap to the Soundex codes of the terms rather than to
//! stemmed terms, so nothing here depends on the language of the queries.

use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::index::PairSessionStats;
use crate::record::QueryRecord;
use crate::text::{char_3grams, cosine, jaccard, overlap, soundex, term_set, GramVector};
use crate::Result;

pub const FEATURE_COUNT: usize = 27;

const HALF_HOUR: f64 = 1800.0;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "terms_q1",
    "terms_q2",
    "terms_diff",
    "chars_q1",
    "chars_q2",
    "chars_diff",
    "term_jaccard",
    "term_overlap",
    "char3_cosine",
    "levenshtein_sim",
    "common_prefix",
    "is_substring",
    "soundex_cosine",
    "soundex_jaccard",
    "soundex_overlap",
    "dt_seconds",
    "time_similarity",
    "same_half_hour",
    "position_q1",
    "position_q2",
    "session_len",
    "queries_between",
    "clicks_q1",
    "clicks_q2",
    "avg_clicks_since_begin",
    "result_ratio_log10",
    "cooccurring_sessions",
];

pub mod idx {
    pub const TERMS_DIFF: usize = 2;
    pub const CHARS_DIFF: usize = 5;
    pub const TERM_JACCARD: usize = 6;
    pub const TERM_OVERLAP: usize = 7;
    pub const CHAR3_COSINE: usize = 8;
    pub const LEVENSHTEIN_SIM: usize = 9;
    pub const IS_SUBSTRING: usize = 11;
    pub const SOUNDEX_COSINE: usize = 12;
    pub const SOUNDEX_JACCARD: usize = 13;
    pub const SOUNDEX_OVERLAP: usize = 14;
    pub const DT_SECONDS: usize = 15;
    pub const TIME_SIMILARITY: usize = 16;
    pub const RESULT_RATIO: usize = 25;
    pub const COOCCURRING: usize = 26;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFeatures {
    pub q1: String,
    pub q2: String,
    pub values: Vec<f64>,
}

impl PairFeatures {
    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| self.values[i])
    }
}

/// Soundex codes of the terms of a query, as a multiset.
pub fn soundex_codes(query: &str) -> GramVector {
    query.split_whitespace().map(soundex).collect()
}

pub fn compute_features(
    q1: &QueryRecord,
    q2: &QueryRecord,
    ctx: &PairSessionStats,
) -> PairFeatures {
    let (a, b) = (q1.query_norm.as_str(), q2.query_norm.as_str());
    let (ta, tb) = (term_set(a), term_set(b));
    let (na, nb) = (a.split(' ').count() as f64, b.split(' ').count() as f64);
    let (ca, cb) = (a.chars().count() as f64, b.chars().count() as f64);

    let (sa, sb) = (soundex_codes(a), soundex_codes(b));
    let code_set = |v: &GramVector| {
        v.iter()
            .map(|(c, _)| c.to_string())
            .collect::<BTreeSet<_>>()
    };
    let (csa, csb) = (code_set(&sa), code_set(&sb));

    let prefix = a.chars().zip(b.chars()).take_while(|(x, y)| x == y).count() as f64;
    let substring = a.contains(b) || b.contains(a);

    let dt = (q2.timestamp - q1.timestamp) as f64;
    let ratio = match (q1.result_count, q2.result_count) {
        (Some(r1), Some(r2)) if r1 > 0 && r2 > 0 => (r1 as f64 / r2 as f64).log10(),
        _ => 0.0,
    };

    let values = vec![
        na,
        nb,
        nb - na,
        ca,
        cb,
        cb - ca,
        jaccard(&ta, &tb),
        overlap(&ta, &tb) as f64,
        cosine(&char_3grams(a), &char_3grams(b)),
        strsim::normalized_levenshtein(a, b),
        prefix / ca.max(cb),
        f64::from(u8::from(substring)),
        cosine(&sa, &sb),
        jaccard(&csa, &csb),
        overlap(&csa, &csb) as f64,
        dt,
        (1.0 - dt.abs() / HALF_HOUR).max(0.0),
        f64::from(u8::from(dt.abs() <= HALF_HOUR)),
        ctx.avg_position_q1,
        ctx.avg_position_q2,
        ctx.avg_session_len,
        ctx.avg_between,
        ctx.avg_clicks_q1,
        ctx.avg_clicks_q2,
        ctx.avg_clicks_since_begin,
        ratio,
        ctx.sessions as f64,
    ];
    debug_assert_eq!(values.len(), FEATURE_COUNT);
    PairFeatures {
        q1: a.to_string(),
        q2: b.to_string(),
        values,
    }
}

/// CSV dump with a header row of feature names.
pub fn write_feature_csv<W: Write>(mut out: W, rows: &[PairFeatures]) -> Result<()> {
    writeln!(out, "q1,q2,{}", FEATURE_NAMES.join(","))?;
    for r in rows {
        let values: Vec<String> = r.values.iter().map(|v| v.to_string()).collect();
        writeln!(
            out,
            "{},{},{}",
            csv_field(&r.q1),
            csv_field(&r.q2),
            values.join(",")
        )?;
    }
    out.flush()?;
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(q: &str, t: i64) -> QueryRecord {
        QueryRecord::new("u", q, t).unwrap()
    }

    #[test]
    fn identity_pair() {
        let q = rec("tropical fish food", 100);
        let f = compute_features(&q, &q, &PairSessionStats::default());
        for i in [
            idx::TERM_JACCARD,
            idx::CHAR3_COSINE,
            idx::LEVENSHTEIN_SIM,
            idx::IS_SUBSTRING,
            idx::SOUNDEX_COSINE,
            idx::SOUNDEX_JACCARD,
            idx::TIME_SIMILARITY,
        ] {
            assert_eq!(f.values[i], 1.0, "{}", FEATURE_NAMES[i]);
        }
        assert_eq!(f.values[idx::DT_SECONDS], 0.0);
        assert_eq!(f.values[idx::SOUNDEX_OVERLAP], 3.0);
    }

    #[test]
    fn phonetic_variants_score_higher_than_raw_terms() {
        let f = compute_features(
            &rec("smith jon", 0),
            &rec("smyth jon", 5),
            &Default::default(),
        );
        assert_eq!(f.values[idx::SOUNDEX_JACCARD], 1.0);
        assert!((f.values[idx::TERM_JACCARD] - 1.0 / 3.0).abs() < 1e-12);

        // K365 vs C365: the first letter is kept, so these stay apart
        let f = compute_features(
            &rec("katherine smith", 0),
            &rec("catherine smith", 5),
            &Default::default(),
        );
        assert!(f.values[idx::SOUNDEX_JACCARD] >= f.values[idx::TERM_JACCARD]);
    }

    #[test]
    fn unrelated_pair_has_zero_phonetic_similarity() {
        let f = compute_features(&rec("marvel", 0), &rec("tiger", 5), &Default::default());
        assert_eq!(f.values[idx::SOUNDEX_COSINE], 0.0);
        assert_eq!(f.values[idx::SOUNDEX_JACCARD], 0.0);
        assert_eq!(f.values[idx::SOUNDEX_OVERLAP], 0.0);
    }

    #[test]
    fn phonetic_features_come_from_codes() {
        let (a, b) = ("outdoor activities", "camping trips");
        let f = compute_features(&rec(a, 0), &rec(b, 1), &Default::default());
        let codes = |q: &str| q.split(' ').map(soundex).collect::<BTreeSet<_>>();
        let (ca, cb) = (codes(a), codes(b));
        assert_eq!(f.values[idx::SOUNDEX_JACCARD], jaccard(&ca, &cb));
        assert_eq!(f.values[idx::SOUNDEX_OVERLAP], overlap(&ca, &cb) as f64);
    }

    #[test]
    fn ratio_and_context() {
        let ctx = PairSessionStats {
            sessions: 4,
            ..Default::default()
        };
        let f = compute_features(
            &rec("cats", 0).with_result_count(1000),
            &rec("kittens", 10).with_result_count(10),
            &ctx,
        );
        assert!((f.values[idx::RESULT_RATIO] - 2.0).abs() < 1e-12);
        assert_eq!(f.values[idx::COOCCURRING], 4.0);
        assert_eq!(f.get("cooccurring_sessions"), Some(4.0));
    }

    #[test]
    fn csv_has_header() {
        let f = compute_features(&rec("a,b c", 0), &rec("d", 1), &Default::default());
        let mut buf = Vec::new();
        write_feature_csv(&mut buf, &[f]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap().split(',').count(), FEATURE_COUNT + 2);
        assert!(lines.next().unwrap().starts_with("\"a,b c\",d,"));
    }

    const SYMMETRIC: [usize; 10] = [
        idx::TERM_JACCARD,
        idx::TERM_OVERLAP,
        idx::CHAR3_COSINE,
        idx::LEVENSHTEIN_SIM,
        10,
        idx::IS_SUBSTRING,
        idx::SOUNDEX_COSINE,
        idx::SOUNDEX_JACCARD,
        idx::SOUNDEX_OVERLAP,
        idx::TIME_SIMILARITY,
    ];
    const DIRECTIONAL: [usize; 4] = [
        idx::TERMS_DIFF,
        idx::CHARS_DIFF,
        idx::DT_SECONDS,
        idx::RESULT_RATIO,
    ];

    proptest! {
        #[test]
        fn features_are_finite_and_swap_consistent(
            a in "[ -~]{0,20}[!-~][ -~]{0,20}",
            b in "[ -~]{0,20}[!-~][ -~]{0,20}",
            t1 in 0i64..100_000,
            t2 in 0i64..100_000,
            c1 in proptest::option::of(0u64..1_000_000_000),
            c2 in proptest::option::of(0u64..1_000_000_000),
        ) {
            let mut r1 = rec(&a, t1);
            let mut r2 = rec(&b, t2);
            r1.result_count = c1;
            r2.result_count = c2;
            let ctx = PairSessionStats::default();
            let f = compute_features(&r1, &r2, &ctx);
            let g = compute_features(&r2, &r1, &ctx);
            prop_assert_eq!(f.values.len(), FEATURE_COUNT);
            for v in &f.values {
                prop_assert!(v.is_finite());
            }
            for i in [idx::TERM_JACCARD, idx::CHAR3_COSINE, idx::SOUNDEX_COSINE, idx::SOUNDEX_JACCARD] {
                prop_assert!((0.0..=1.0).contains(&f.values[i]));
            }
            for i in SYMMETRIC {
                prop_assert!((f.values[i] - g.values[i]).abs() < 1e-12, "{}", FEATURE_NAMES[i]);
            }
            for i in DIRECTIONAL {
                prop_assert!((f.values[i] + g.values[i]).abs() < 1e-9, "{}", FEATURE_NAMES[i]);
            }
        }
    }
}
