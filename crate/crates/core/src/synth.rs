//! Seeded synthetic query logs with planted hyponymy relations.
//!
//! Every planted pair `H <- h` shows up in trivial patterns
//! (`H c` followed by `h H c`) and in reformulations (`H r` followed by
//! `h r`, with `H r` having far more results). The rest of the log is
//! background noise over a separate vocabulary, plus navigational and spam
//! queries and a few automated users.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::PairLabel;
use crate::filter::DEFAULT_SITE_NAMES;
use crate::record::{format_timestamp, QueryRecord};
use crate::Result;

/// 2006-05-01 00:00:00 UTC
const START: i64 = 1_146_441_600;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub planted: usize,
    pub trivial_per_pair: usize,
    pub reformulation_per_pair: usize,
    /// Users that repeat each planted pattern.
    pub users_per_pattern: usize,
    /// Approximate size of the log.
    pub target_queries: usize,
    pub noise_vocabulary: usize,
    pub labeled_pairs: usize,
    /// Share of planted pairs also present in the reference graph.
    pub graph_coverage: f64,
    /// Share of planted pairs that also get one role-inverted reformulation.
    pub inverted_evidence: f64,
    pub bots: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 7,
            planted: 50,
            trivial_per_pair: 3,
            reformulation_per_pair: 2,
            users_per_pattern: 2,
            target_queries: 100_000,
            noise_vocabulary: 4000,
            labeled_pairs: 90,
            graph_coverage: 0.8,
            inverted_evidence: 0.2,
            bots: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PlantedRelation {
    pub hypernym: String,
    pub hyponym: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRow {
    pub q1: QueryRecord,
    pub q2: QueryRecord,
    pub judges: [PairLabel; 3],
}

#[derive(Debug, Clone)]
pub struct SynthLog {
    /// Sorted by user, then time.
    pub records: Vec<QueryRecord>,
    pub planted: Vec<PlantedRelation>,
    pub labeled: Vec<LabeledRow>,
    /// `(hyponym, hypernym)` edges.
    pub graph: Vec<(String, String)>,
}

struct Gen {
    rng: ChaCha8Rng,
    used: BTreeSet<String>,
    counts: HashMap<String, u64>,
    records: Vec<QueryRecord>,
    next_user: usize,
}

const ONSETS: [&str; 16] = [
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st",
];
const NUCLEI: [&str; 5] = ["a", "e", "i", "o", "u"];

impl Gen {
    fn word(&mut self) -> String {
        loop {
            let syllables = self.rng.random_range(2..=3);
            let mut w = String::new();
            for _ in 0..syllables {
                w.push_str(ONSETS.choose(&mut self.rng).unwrap());
                w.push_str(NUCLEI.choose(&mut self.rng).unwrap());
            }
            if self.rng.random_bool(0.5) {
                w.push_str(["n", "r", "s", "x", "l"].choose(&mut self.rng).unwrap());
            }
            if !DEFAULT_SITE_NAMES.contains(&w.as_str()) && self.used.insert(w.clone()) {
                return w;
            }
        }
    }

    fn words(&mut self, n: usize) -> Vec<String> {
        (0..n).map(|_| self.word()).collect()
    }

    fn log_uniform(&mut self, lo: f64, hi: f64) -> u64 {
        let x: f64 = self.rng.random_range(lo.ln()..hi.ln());
        x.exp().round() as u64
    }

    fn user(&mut self) -> String {
        self.next_user += 1;
        format!("u{:06}", self.next_user)
    }

    /// Fixes the result count of a query the first time it is seen.
    fn count(&mut self, query: &str, lo: f64, hi: f64) -> u64 {
        if let Some(&c) = self.counts.get(query) {
            return c;
        }
        let c = self.log_uniform(lo, hi);
        self.counts.insert(query.to_string(), c);
        c
    }

    fn push(&mut self, user: &str, query: &str, ts: i64, count: u64) {
        let mut r = QueryRecord::new(user, query, ts)
            .expect("non-empty query")
            .with_result_count(count);
        if self.rng.random_bool(0.35) {
            let rank = self.rng.random_range(1..=10);
            let host = format!("{}.example", query.split(' ').next().unwrap_or("x"));
            r = r.with_click(rank, host);
        }
        self.records.push(r);
    }

    /// Two queries in one session, `first` then `second`.
    fn pair_session(&mut self, user: &str, t: &mut i64, first: (&str, u64), second: (&str, u64)) {
        self.push(user, first.0, *t, first.1);
        *t += self.rng.random_range(15..120);
        self.push(user, second.0, *t, second.1);
        *t += self.rng.random_range(2000..8000);
    }
}

pub fn generate(config: &SynthConfig) -> SynthLog {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        used: BTreeSet::new(),
        counts: HashMap::new(),
        records: Vec::new(),
        next_user: 0,
    };
    let vocab = g.words(config.noise_vocabulary.max(10));

    // planted relations
    let mut planted = Vec::new();
    for _ in 0..config.planted {
        let w = g.words(2);
        planted.push(PlantedRelation {
            hypernym: w[0].clone(),
            hyponym: w[1].clone(),
        });
    }
    for p in &planted {
        let (big, small) = (p.hypernym.clone(), p.hyponym.clone());
        let mut patterns: Vec<(String, String, bool)> = Vec::new();
        for _ in 0..config.trivial_per_pair {
            let c = vocab.choose(&mut g.rng).unwrap().clone();
            patterns.push((format!("{big} {c}"), format!("{small} {big} {c}"), false));
        }
        for _ in 0..config.reformulation_per_pair {
            let r = vocab.choose(&mut g.rng).unwrap().clone();
            patterns.push((format!("{big} {r}"), format!("{small} {r}"), true));
        }
        if g.rng.random_bool(config.inverted_evidence) {
            let z = vocab.choose(&mut g.rng).unwrap().clone();
            patterns.push((format!("{small} {z}"), format!("{big} {z}"), true));
        }
        for (general, specific, reformulation) in patterns {
            let (gc, sc) = if reformulation {
                (g.count(&general, 2e5, 5e6), g.count(&specific, 50.0, 1e4))
            } else {
                (g.count(&general, 1e4, 5e6), g.count(&specific, 10.0, 1e4))
            };
            for _ in 0..config.users_per_pattern {
                let user = g.user();
                let mut t = START + g.rng.random_range(0..86_400 * 20);
                // generalizations show up too; detection swaps them back
                if g.rng.random_bool(0.3) {
                    g.pair_session(&user, &mut t, (&specific, sc), (&general, gc));
                } else {
                    g.pair_session(&user, &mut t, (&general, gc), (&specific, sc));
                }
            }
        }
    }

    // labeled disjoint pairs, also present in the log so their counts are
    // indexed
    let mut labeled = Vec::new();
    for i in 0..config.labeled_pairs {
        let (na, nb) = (g.rng.random_range(1..=2), g.rng.random_range(1..=2));
        let a = g.words(na).join(" ");
        let b = g.words(nb).join(" ");
        let label = [
            PairLabel::Specialization,
            PairLabel::Generalization,
            PairLabel::Undefined,
        ][i % 3];
        let (ca, cb) = match label {
            PairLabel::Specialization => (g.count(&a, 1e5, 5e6), g.count(&b, 10.0, 5e3)),
            PairLabel::Generalization => (g.count(&a, 10.0, 5e3), g.count(&b, 1e5, 5e6)),
            PairLabel::Undefined => {
                let c = g.count(&a, 1e3, 1e5);
                (c, g.count(&b, c as f64 * 0.5, c as f64 * 2.0))
            }
        };
        let user = g.user();
        let mut t = START + g.rng.random_range(0..86_400 * 20);
        let t1 = t;
        g.pair_session(&user, &mut t, (&a, ca), (&b, cb));
        let q1 = QueryRecord::new(user.clone(), a, t1)
            .unwrap()
            .with_result_count(ca);
        let t2 = g.records.last().unwrap().timestamp;
        let q2 = QueryRecord::new(user, b, t2).unwrap().with_result_count(cb);
        let mut judges = [label; 3];
        if g.rng.random_bool(0.2) {
            judges[2] = PairLabel::Undefined;
        }
        labeled.push(LabeledRow { q1, q2, judges });
    }

    // navigational and spam decoys, one per session
    let mut decoys: Vec<String> = vec!["_".into(), "a".into(), "x y".into()];
    // decoys and automated traffic scale down for small logs
    let decoy_rounds = (config.target_queries / 100).clamp(1, 40);
    let bot_queries = (config.target_queries / 50).clamp(10, 300);
    for _ in 0..decoy_rounds {
        let w = vocab.choose(&mut g.rng).unwrap().clone();
        decoys.push(format!("www.{w}.com"));
        decoys.push(format!("{w}.org"));
        decoys.push(format!(
            "{} {w}",
            DEFAULT_SITE_NAMES.choose(&mut g.rng).unwrap()
        ));
        decoys.push(
            vocab
                .choose_multiple(&mut g.rng, 6)
                .cloned()
                .collect::<Vec<_>>()
                .join(" "),
        );
        decoys.push(format!("{w} {}", "q".repeat(26)));
    }
    for chunk in decoys.chunks(4).map(|c| c.to_vec()).collect::<Vec<_>>() {
        let user = g.user();
        let mut t = START + g.rng.random_range(0..86_400 * 20);
        for q in chunk {
            let c = g.count(&q, 10.0, 1e6);
            g.push(&user, &q, t, c);
            t += g.rng.random_range(3000..9000);
        }
    }

    // automated users: short gaps over many queries
    for _ in 0..config.bots {
        let user = g.user();
        let mut t = START + g.rng.random_range(0..86_400 * 20);
        for _ in 0..bot_queries {
            let q = vocab.choose(&mut g.rng).unwrap().clone();
            let c = g.count(&q, 10.0, 1e6);
            g.push(&user, &q, t, c);
            t += g.rng.random_range(1..5);
        }
    }

    // background users
    let fixed = g.records.len();
    while g.records.len() < config.target_queries {
        let user = g.user();
        let mut t = START + g.rng.random_range(0..86_400 * 20);
        for _ in 0..g.rng.random_range(1..=6) {
            let len = g.rng.random_range(1..=3);
            let mut q: Vec<String> = (0..len).map(|_| zipf_pick(&mut g.rng, &vocab)).collect();
            for _ in 0..g.rng.random_range(1..=4) {
                let text = q.join(" ");
                let c = g.count(&text, 10.0, 5e6);
                g.push(&user, &text, t, c);
                t += g.rng.random_range(10..300);
                match g.rng.random_range(0..4) {
                    0 if q.len() < 4 => q.push(zipf_pick(&mut g.rng, &vocab)),
                    1 if q.len() > 1 => {
                        q.pop();
                    }
                    2 => {
                        let i = g.rng.random_range(0..q.len());
                        q[i] = zipf_pick(&mut g.rng, &vocab);
                    }
                    _ => q = vec![zipf_pick(&mut g.rng, &vocab)],
                }
            }
            t += g.rng.random_range(2000..20_000);
        }
    }

    g.records.truncate(config.target_queries.max(fixed));

    let mut graph: Vec<(String, String)> = planted
        .iter()
        .take((config.graph_coverage * planted.len() as f64).round() as usize)
        .map(|p| (p.hyponym.clone(), p.hypernym.clone()))
        .collect();
    for _ in 0..config.noise_vocabulary / 10 {
        let a = vocab.choose(&mut g.rng).unwrap().clone();
        let b = vocab.choose(&mut g.rng).unwrap().clone();
        if a != b {
            graph.push((a, b));
        }
    }

    let mut records = g.records;
    records.sort_by(|a, b| {
        a.user_id
            .cmp(&b.user_id)
            .then(a.timestamp.cmp(&b.timestamp))
    });
    SynthLog {
        records,
        planted,
        labeled,
        graph,
    }
}

/// Skewed toward the head of the vocabulary.
fn zipf_pick(rng: &mut ChaCha8Rng, vocab: &[String]) -> String {
    let u: f64 = rng.random();
    vocab[((u * u * u) * vocab.len() as f64) as usize % vocab.len()].clone()
}

/// `q1, t1, q2, t2, judge1, judge2, judge3` rows.
pub fn write_labeled<W: Write>(mut out: W, rows: &[LabeledRow]) -> Result<()> {
    let code = |l: PairLabel| match l {
        PairLabel::Specialization => "s",
        PairLabel::Generalization => "g",
        PairLabel::Undefined => "u",
    };
    for r in rows {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.q1.query,
            format_timestamp(r.q1.timestamp),
            r.q2.query,
            format_timestamp(r.q2.timestamp),
            code(r.judges[0]),
            code(r.judges[1]),
            code(r.judges[2])
        )?;
    }
    out.flush()?;
    Ok(())
}

/// `hyponym, hypernym` rows.
pub fn write_graph<W: Write>(mut out: W, edges: &[(String, String)]) -> Result<()> {
    for (a, b) in edges {
        writeln!(out, "{a}\t{b}")?;
    }
    out.flush()?;
    Ok(())
}

/// `hypernym, hyponym` rows.
pub fn write_planted<W: Write>(mut out: W, planted: &[PlantedRelation]) -> Result<()> {
    for p in planted {
        writeln!(out, "{}\t{}", p.hypernym, p.hyponym)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            planted: 5,
            target_queries: 2000,
            noise_vocabulary: 300,
            labeled_pairs: 12,
            ..Default::default()
        }
    }

    #[test]
    fn seeded() {
        let a = generate(&small());
        let b = generate(&small());
        assert_eq!(a.records, b.records);
        assert_eq!(a.planted, b.planted);
        let c = generate(&SynthConfig { seed: 8, ..small() });
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn shape() {
        let log = generate(&small());
        assert_eq!(log.records.len(), 2000);
        assert_eq!(log.planted.len(), 5);
        assert_eq!(log.labeled.len(), 12);
        assert!(log
            .records
            .windows(2)
            .all(|w| (&w[0].user_id, w[0].timestamp) <= (&w[1].user_id, w[1].timestamp)));
        // result counts are a function of the query
        let mut seen = HashMap::new();
        for r in &log.records {
            assert_eq!(
                *seen.entry(&r.query_norm).or_insert(r.result_count),
                r.result_count
            );
        }
    }
}
