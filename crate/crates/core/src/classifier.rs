//! The specialization/generalization cascade for query pairs without shared
//! terms, and its training protocol.

use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::features::{compute_features, PairFeatures};
use crate::index::{pair_session_stats, Indices};
use crate::pattern::{DisjointPair, PatternKind, ReformulationPattern};
use crate::record::{parse_timestamp, QueryRecord};
use crate::tree::{induce_tree, DecisionTree, Instance, TreeParams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PairLabel {
    Specialization,
    Generalization,
    Undefined,
}

impl FromStr for PairLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "s" | "spec" | "specialization" => Ok(PairLabel::Specialization),
            "g" | "gen" | "generalization" => Ok(PairLabel::Generalization),
            "u" | "undefined" => Ok(PairLabel::Undefined),
            other => Err(Error::data(format!("unknown pair label `{other}`"))),
        }
    }
}

impl fmt::Display for PairLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PairLabel::Specialization => "specialization",
            PairLabel::Generalization => "generalization",
            PairLabel::Undefined => "undefined",
        })
    }
}

/// Majority of three judges; no majority means undefined.
pub fn resolve_judges(labels: [PairLabel; 3]) -> PairLabel {
    let [a, b, c] = labels;
    if a == b || a == c {
        a
    } else if b == c {
        b
    } else {
        PairLabel::Undefined
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPair {
    pub q1: QueryRecord,
    pub q2: QueryRecord,
    pub label: PairLabel,
}

/// Reads `q1, t1, q2, t2, judge1, judge2, judge3` rows.
pub fn read_labeled_pairs<R: BufRead>(input: R) -> Result<Vec<LabeledPair>> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |what: &str| Error::data(format!("labeled pairs line {}: {what}", n + 1));
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 7 {
            return Err(bad("expected 7 columns"));
        }
        let record = |q: &str, t: &str| -> Result<QueryRecord> {
            let ts = parse_timestamp(t).ok_or_else(|| bad("bad timestamp"))?;
            QueryRecord::new("", q, ts).ok_or_else(|| bad("empty query"))
        };
        let judges = [cols[4].parse()?, cols[5].parse()?, cols[6].parse()?];
        out.push(LabeledPair {
            q1: record(cols[0], cols[1])?,
            q2: record(cols[2], cols[3])?,
            label: resolve_judges(judges),
        });
    }
    Ok(out)
}

/// Features for a pair, with result counts and session context looked up in
/// the indices when the records carry none.
pub fn pair_features(q1: &QueryRecord, q2: &QueryRecord, indices: &Indices) -> PairFeatures {
    let fill = |r: &QueryRecord| {
        let mut r = r.clone();
        if r.result_count.is_none() {
            r.result_count = indices.queries.result_count(&r.query_norm);
        }
        r
    };
    let ctx = pair_session_stats(&q1.query_norm, &q2.query_norm, indices);
    compute_features(&fill(q1), &fill(q2), &ctx)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CascadeOutcome {
    /// `q1` is the general query, `q2` the specific one.
    Specialization,
    /// The pair is a generalization; as a specialization `q2` is general.
    Inverted,
    Discard,
}

pub fn cascade_classify(
    features: &[f64],
    spec_tree: &DecisionTree,
    gen_tree: &DecisionTree,
) -> CascadeOutcome {
    if spec_tree.predict(features) {
        CascadeOutcome::Specialization
    } else if gen_tree.predict(features) {
        CascadeOutcome::Inverted
    } else {
        CascadeOutcome::Discard
    }
}

/// Turns disjoint candidate pairs into disjoint specialization patterns.
/// Pairs the cascade discards are dropped; inverted ones swap roles.
pub fn classify_disjoint(
    pairs: &[DisjointPair],
    indices: &Indices,
    spec_tree: &DecisionTree,
    gen_tree: &DecisionTree,
) -> Vec<ReformulationPattern> {
    use rayon::prelude::*;
    pairs
        .par_iter()
        .filter_map(|p| {
            let f = pair_features(&p.first, &p.second, indices);
            let (general, specific) = match cascade_classify(&f.values, spec_tree, gen_tree) {
                CascadeOutcome::Specialization => (&p.first, &p.second),
                CascadeOutcome::Inverted => (&p.second, &p.first),
                CascadeOutcome::Discard => return None,
            };
            Some(ReformulationPattern {
                kind: PatternKind::Disjoint,
                session_id: p.session_id,
                general: general.clone(),
                specific: specific.clone(),
            })
        })
        .collect()
}

/// Holdout scores of one one-vs-rest tree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryScores {
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

impl BinaryScores {
    fn of(tree: &DecisionTree, data: &[Instance]) -> BinaryScores {
        let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
        for i in data {
            match (tree.predict(&i.features), i.label) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fneg += 1,
                _ => {}
            }
        }
        let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        BinaryScores {
            accuracy: tree.accuracy(data),
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fneg),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub usable_pairs: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub seed: u64,
    pub specialization: BinaryScores,
    pub generalization: BinaryScores,
    /// Share of holdout pairs the cascade labels correctly.
    pub cascade_accuracy: f64,
    /// Only one class was present among the usable pairs.
    pub zero_variance: bool,
}

pub struct TrainedCascade {
    pub spec_tree: DecisionTree,
    pub gen_tree: DecisionTree,
    pub report: TrainReport,
}

/// Splits `(features, label)` rows into a seeded 2/3 train and 1/3 holdout
/// (the holdout size is rounded down), trains one tree per class and scores
/// them on the holdout. Undefined rows are dropped first.
pub fn train_eval(
    rows: &[(PairFeatures, PairLabel)],
    params: TreeParams,
    holdout_fraction: f64,
    seed: u64,
) -> Result<TrainedCascade> {
    if !(0.0..1.0).contains(&holdout_fraction) {
        return Err(Error::config("holdout fraction must lie in [0, 1)"));
    }
    let mut usable: Vec<&(PairFeatures, PairLabel)> = rows
        .iter()
        .filter(|(_, l)| *l != PairLabel::Undefined)
        .collect();
    if usable.len() < 6 {
        return Err(Error::data(format!(
            "need at least 6 labeled specialization/generalization pairs, found {}",
            usable.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    usable.shuffle(&mut rng);
    let test_size = (usable.len() as f64 * holdout_fraction).floor() as usize;
    let (test, train) = usable.split_at(test_size);

    let instances = |rows: &[&(PairFeatures, PairLabel)], positive: PairLabel| -> Vec<Instance> {
        rows.iter()
            .map(|(f, l)| Instance::new(f.values.clone(), *l == positive))
            .collect()
    };
    let mut spec_tree = induce_tree(&instances(train, PairLabel::Specialization), params)?;
    let mut gen_tree = induce_tree(&instances(train, PairLabel::Generalization), params)?;
    spec_tree.seed = Some(seed);
    gen_tree.seed = Some(seed);

    let spec_test = instances(test, PairLabel::Specialization);
    let gen_test = instances(test, PairLabel::Generalization);
    let cascade_hits = test
        .iter()
        .filter(|(f, l)| {
            let got = cascade_classify(&f.values, &spec_tree, &gen_tree);
            matches!(
                (got, l),
                (CascadeOutcome::Specialization, PairLabel::Specialization)
                    | (CascadeOutcome::Inverted, PairLabel::Generalization)
            )
        })
        .count();
    let first = usable[0].1;
    let zero_variance = usable.iter().all(|(_, l)| *l == first);
    if zero_variance {
        log::warn!("all usable labeled pairs share the label `{first}`");
    }

    let report = TrainReport {
        usable_pairs: usable.len(),
        train_size: train.len(),
        test_size: test.len(),
        seed,
        specialization: BinaryScores::of(&spec_tree, &spec_test),
        generalization: BinaryScores::of(&gen_tree, &gen_test),
        cascade_accuracy: if test.is_empty() {
            0.0
        } else {
            cascade_hits as f64 / test.len() as f64
        },
        zero_variance,
    };
    Ok(TrainedCascade {
        spec_tree,
        gen_tree,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FEATURE_COUNT;

    fn row(v: f64, label: PairLabel) -> (PairFeatures, PairLabel) {
        let mut values = vec![0.0; FEATURE_COUNT];
        values[25] = v;
        (
            PairFeatures {
                q1: format!("a{v}"),
                q2: format!("b{v}"),
                values,
            },
            label,
        )
    }

    fn toy_rows(n: usize) -> Vec<(PairFeatures, PairLabel)> {
        (0..n)
            .map(|i| {
                let label = match i % 3 {
                    0 => PairLabel::Specialization,
                    1 => PairLabel::Generalization,
                    _ => PairLabel::Undefined,
                };
                let v = match label {
                    PairLabel::Specialization => 2.0 + (i % 5) as f64 * 0.1,
                    PairLabel::Generalization => -2.0 - (i % 5) as f64 * 0.1,
                    PairLabel::Undefined => 0.0,
                };
                row(v, label)
            })
            .collect()
    }

    #[test]
    fn judge_majority() {
        use PairLabel::*;
        assert_eq!(
            resolve_judges([Specialization, Specialization, Generalization]),
            Specialization
        );
        assert_eq!(
            resolve_judges([Generalization, Specialization, Generalization]),
            Generalization
        );
        assert_eq!(
            resolve_judges([Undefined, Specialization, Specialization]),
            Specialization
        );
        assert_eq!(
            resolve_judges([Undefined, Specialization, Generalization]),
            Undefined
        );
    }

    #[test]
    fn labeled_pairs_file() {
        let text =
            "outdoor activities\t2006-03-01 10:00:00\tcamping\t2006-03-01 10:00:30\ts\ts\tg\n\
                    lion\t100\twild animals\t130\tg\tgeneralization\tu\n";
        let pairs = read_labeled_pairs(text.as_bytes()).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].label, PairLabel::Specialization);
        assert_eq!(pairs[1].label, PairLabel::Generalization);
        assert_eq!(pairs[1].q2.query_norm, "wild animals");
        assert!(read_labeled_pairs("a\t1\tb\t2\ts\ts\n".as_bytes()).is_err());
    }

    #[test]
    fn split_sizes_follow_the_holdout_rule() {
        let rows: Vec<_> = (0..421)
            .map(|i| {
                let label = if i % 2 == 0 {
                    PairLabel::Specialization
                } else {
                    PairLabel::Generalization
                };
                row(if i % 2 == 0 { 1.0 } else { -1.0 }, label)
            })
            .collect();
        let t = train_eval(&rows, TreeParams::default(), 1.0 / 3.0, 7).unwrap();
        assert_eq!((t.report.train_size, t.report.test_size), (281, 140));
        assert_eq!(t.report.cascade_accuracy, 1.0);
    }

    #[test]
    fn training_is_deterministic() {
        let rows = toy_rows(60);
        let a = train_eval(&rows, TreeParams::default(), 1.0 / 3.0, 42).unwrap();
        let b = train_eval(&rows, TreeParams::default(), 1.0 / 3.0, 42).unwrap();
        assert_eq!(a.spec_tree.to_json(), b.spec_tree.to_json());
        assert_eq!(a.gen_tree.to_json(), b.gen_tree.to_json());
        assert_eq!(a.report, b.report);
    }

    #[test]
    fn too_few_pairs_are_refused() {
        let rows = toy_rows(7);
        let usable = rows
            .iter()
            .filter(|(_, l)| *l != PairLabel::Undefined)
            .count();
        assert!(usable < 6);
        assert!(matches!(
            train_eval(&rows, TreeParams::default(), 1.0 / 3.0, 1),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn single_class_training() {
        let rows: Vec<_> = (0..9)
            .map(|i| row(i as f64, PairLabel::Specialization))
            .collect();
        let t = train_eval(&rows, TreeParams::default(), 1.0 / 3.0, 3).unwrap();
        assert!(t.report.zero_variance);
        assert!(t.spec_tree.predict(&rows[0].0.values));
        assert!(!t.gen_tree.predict(&rows[0].0.values));
    }

    #[test]
    fn cascade_routes() {
        let xs = [-3.0, -2.0, 0.0, 0.5, 2.0, 3.0];
        let spec = xs
            .iter()
            .map(|&x| Instance::new(vec![x], x > 1.0))
            .collect::<Vec<_>>();
        let gen = xs
            .iter()
            .map(|&x| Instance::new(vec![x], x < -1.0))
            .collect::<Vec<_>>();
        let spec_tree = induce_tree(&spec, TreeParams::default()).unwrap();
        let gen_tree = induce_tree(&gen, TreeParams::default()).unwrap();
        assert_eq!(
            cascade_classify(&[2.5], &spec_tree, &gen_tree),
            CascadeOutcome::Specialization
        );
        assert_eq!(
            cascade_classify(&[-2.5], &spec_tree, &gen_tree),
            CascadeOutcome::Inverted
        );
        assert_eq!(
            cascade_classify(&[0.2], &spec_tree, &gen_tree),
            CascadeOutcome::Discard
        );
    }
}
