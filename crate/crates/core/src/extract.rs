//! Hyponymy relations from specialization patterns.
//!
//! Every candidate `(t, t')` (hypernym from the general query, hyponym from
//! the specific one) is scored with
//!
//! ```text
//! W(t, t') = (|P(t, t')|^2 + 1) / (2 |G(t')| |S(t)| + 1) - 1
//! ```
//!
//! where `P` counts patterns with `t` in the general query and `t'` in the
//! specific one, `G(t')` patterns where `t'` shows up only on the general
//! side and `S(t)` patterns where `t` shows up only on the specific side.
//! The counts are frozen over the whole pattern set before any selection.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::pattern::{PatternKind, ReformulationPattern};
use crate::text::{is_term_substring, term_ngrams, terms};
use crate::{Error, Result};

/// The weight formula on raw counts.
pub fn weight(p: usize, g: usize, s: usize) -> f64 {
    let (p, g, s) = (p as f64, g as f64, s as f64);
    (p * p + 1.0) / (2.0 * g * s + 1.0) - 1.0
}

/// Per-gram posting lists of distinct pattern ids, one list for occurrences
/// in general queries and one for specific queries.
#[derive(Debug, Default, Clone)]
pub struct PatternStats {
    general: HashMap<String, Vec<u32>>,
    specific: HashMap<String, Vec<u32>>,
    patterns: usize,
}

fn gram_set(query: &str) -> BTreeSet<String> {
    term_ngrams(query).into_iter().map(|g| g.text).collect()
}

fn intersection_len(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

impl PatternStats {
    /// Counts over `(general, specific)` query pairs. Callers pass each
    /// distinct pair once.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let mut stats = PatternStats::default();
        for (id, (g, s)) in pairs.into_iter().enumerate() {
            let id = id as u32;
            for gram in gram_set(g) {
                stats.general.entry(gram).or_default().push(id);
            }
            for gram in gram_set(s) {
                stats.specific.entry(gram).or_default().push(id);
            }
            stats.patterns += 1;
        }
        stats
    }

    pub fn patterns(&self) -> usize {
        self.patterns
    }

    fn list<'a>(map: &'a HashMap<String, Vec<u32>>, gram: &str) -> &'a [u32] {
        map.get(gram).map_or(&[], Vec::as_slice)
    }

    /// `|P(t, t')|`
    pub fn p(&self, hypernym: &str, hyponym: &str) -> usize {
        intersection_len(
            Self::list(&self.general, hypernym),
            Self::list(&self.specific, hyponym),
        )
    }

    /// `|G(t')|`: patterns with the gram in the general query only.
    pub fn g(&self, gram: &str) -> usize {
        let gen = Self::list(&self.general, gram);
        gen.len() - intersection_len(gen, Self::list(&self.specific, gram))
    }

    /// `|S(t)|`: patterns with the gram in the specific query only.
    pub fn s(&self, gram: &str) -> usize {
        let spec = Self::list(&self.specific, gram);
        spec.len() - intersection_len(spec, Self::list(&self.general, gram))
    }

    pub fn weight(&self, hypernym: &str, hyponym: &str) -> f64 {
        weight(self.p(hypernym, hyponym), self.g(hyponym), self.s(hypernym))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HyponymyCandidate {
    pub hypernym: String,
    pub hyponym: String,
    pub kind: PatternKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyponymyRelation {
    pub hypernym: String,
    pub hyponym: String,
    pub weight: f64,
    pub kind: PatternKind,
    /// Patterns (with repetitions) that produced the row.
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractConfig {
    /// Accept a best candidate whose weight is exactly zero.
    pub accept_zero_weight: bool,
    /// For trivial and disjoint patterns, skip candidates whose hyponym has
    /// fewer terms than the hypernym.
    pub hyponym_not_shorter: bool,
    /// Candidates whose hypernym or hyponym consists only of these words
    /// are skipped.
    pub stoplist: BTreeSet<String>,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig {
            accept_zero_weight: false,
            hyponym_not_shorter: true,
            stoplist: BTreeSet::new(),
        }
    }
}

impl ExtractConfig {
    fn stopped(&self, gram: &str) -> bool {
        !self.stoplist.is_empty() && gram.split(' ').all(|w| self.stoplist.contains(w))
    }
}

/// Candidates of a trivial or disjoint pattern: every n-gram of the general
/// query against every n-gram of the specific one, dropping pairs whose
/// hyponym is a term-level substring of the hypernym.
pub fn candidates_trivial_or_disjoint(
    pattern: &ReformulationPattern,
    config: &ExtractConfig,
) -> Vec<HyponymyCandidate> {
    let general = term_ngrams(&pattern.general.query_norm);
    let specific = term_ngrams(&pattern.specific.query_norm);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for t in &general {
        if config.stopped(&t.text) {
            continue;
        }
        for t2 in &specific {
            if is_term_substring(&t2.text, &t.text)
                || (config.hyponym_not_shorter && t2.len < t.len)
                || config.stopped(&t2.text)
            {
                continue;
            }
            if seen.insert((t.text.as_str(), t2.text.as_str())) {
                out.push(HyponymyCandidate {
                    hypernym: t.text.clone(),
                    hyponym: t2.text.clone(),
                    kind: pattern.kind,
                });
            }
        }
    }
    out
}

/// The single candidate of a reformulation: shared terms removed from both
/// queries, remainders kept in their original order.
pub fn candidate_reformulation(
    pattern: &ReformulationPattern,
    config: &ExtractConfig,
) -> Option<HyponymyCandidate> {
    let g = terms(&pattern.general.query_norm);
    let s = terms(&pattern.specific.query_norm);
    let shared: BTreeSet<&str> = g.iter().filter(|t| s.contains(t)).copied().collect();
    let rest = |q: &[&str]| {
        q.iter()
            .filter(|t| !shared.contains(*t))
            .copied()
            .collect::<Vec<_>>()
            .join(" ")
    };
    let (hypernym, hyponym) = (rest(&g), rest(&s));
    if hypernym.is_empty()
        || hyponym.is_empty()
        || config.stopped(&hypernym)
        || config.stopped(&hyponym)
    {
        return None;
    }
    Some(HyponymyCandidate {
        hypernym,
        hyponym,
        kind: pattern.kind,
    })
}

pub fn candidates(
    pattern: &ReformulationPattern,
    config: &ExtractConfig,
) -> Vec<HyponymyCandidate> {
    match pattern.kind {
        PatternKind::WithReformulation => candidate_reformulation(pattern, config)
            .into_iter()
            .collect(),
        PatternKind::Trivial | PatternKind::Disjoint => {
            candidates_trivial_or_disjoint(pattern, config)
        }
    }
}

/// Picks the highest-weight candidate when its weight is positive (or zero,
/// if allowed). Ties prefer the longer hyponym, then lexicographic order.
/// Returns the index of the chosen candidate and its weight.
pub fn select_relation(
    candidates: &[HyponymyCandidate],
    stats: &PatternStats,
    accept_zero_weight: bool,
) -> Option<(usize, f64)> {
    let hyponym_len = |c: &HyponymyCandidate| (c.hyponym.split(' ').count(), c.hyponym.len());
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let w = stats.weight(&c.hypernym, &c.hyponym);
        let better = match best {
            None => true,
            Some((j, bw)) => {
                let b = &candidates[j];
                w > bw
                    || (w == bw
                        && (hyponym_len(c) > hyponym_len(b)
                            || (hyponym_len(c) == hyponym_len(b)
                                && (&c.hypernym, &c.hyponym) < (&b.hypernym, &b.hyponym))))
            }
        };
        if better {
            best = Some((i, w));
        }
    }
    best.filter(|&(_, w)| w > 0.0 || (accept_zero_weight && w == 0.0))
}

#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extraction {
    pub relations: Vec<HyponymyRelation>,
    /// Candidates that were never selected, deduplicated, with the number of
    /// patterns that offered them.
    pub discarded: Vec<HyponymyRelation>,
    pub patterns: usize,
    pub distinct_patterns: usize,
    /// Distinct patterns from which nothing was extracted.
    pub barren: usize,
}

impl Extraction {
    /// Total extractions counting repetitions.
    pub fn total_extracted(&self) -> usize {
        self.relations.iter().map(|r| r.support).sum()
    }
}

/// Two phases: counts over all distinct patterns first, then one selection
/// per distinct pattern. The result does not depend on pattern order.
pub fn extract_all(patterns: &[ReformulationPattern], config: &ExtractConfig) -> Extraction {
    // distinct (general, specific) pairs with their multiplicity
    let mut distinct: BTreeMap<(&str, &str), (PatternKind, usize, &ReformulationPattern)> =
        BTreeMap::new();
    for p in patterns {
        let key = (
            p.general.query_norm.as_str(),
            p.specific.query_norm.as_str(),
        );
        let e = distinct.entry(key).or_insert((p.kind, 0, p));
        if p.kind < e.0 {
            e.0 = p.kind;
            e.2 = p;
        }
        e.1 += 1;
    }
    let stats = PatternStats::from_pairs(distinct.keys().copied());

    // candidates, chosen index and weight, pattern multiplicity
    type Selection = (Vec<HyponymyCandidate>, Option<(usize, f64)>, usize);
    let selections: Vec<Selection> = distinct
        .par_iter()
        .map(|(_, &(kind, count, p))| {
            let mut p = p.clone();
            p.kind = kind;
            let cands = candidates(&p, config);
            let chosen = select_relation(&cands, &stats, config.accept_zero_weight);
            (cands, chosen, count)
        })
        .collect();

    let mut relations: BTreeMap<HyponymyCandidate, (f64, usize)> = BTreeMap::new();
    let mut discarded: BTreeMap<HyponymyCandidate, (f64, usize)> = BTreeMap::new();
    let mut barren = 0;
    for (cands, chosen, count) in selections {
        if chosen.is_none() {
            barren += 1;
        }
        for (i, c) in cands.into_iter().enumerate() {
            let target = if chosen.is_some_and(|(k, _)| k == i) {
                &mut relations
            } else {
                &mut discarded
            };
            let w = stats.weight(&c.hypernym, &c.hyponym);
            let e = target.entry(c).or_insert((w, 0));
            e.0 = e.0.max(w);
            e.1 += count;
        }
    }
    discarded.retain(|c, _| !relations.contains_key(c));

    let rows = |m: BTreeMap<HyponymyCandidate, (f64, usize)>| {
        let mut v: Vec<HyponymyRelation> = m
            .into_iter()
            .map(|(c, (weight, support))| HyponymyRelation {
                hypernym: c.hypernym,
                hyponym: c.hyponym,
                weight,
                kind: c.kind,
                support,
            })
            .collect();
        v.sort_by(|a, b| (a.kind, &a.hypernym, &a.hyponym).cmp(&(b.kind, &b.hypernym, &b.hyponym)));
        v
    };
    Extraction {
        relations: rows(relations),
        discarded: rows(discarded),
        patterns: patterns.len(),
        distinct_patterns: distinct.len(),
        barren,
    }
}

/// `hypernym, hyponym, weight, source_kind, support` rows.
pub fn write_relations<W: Write>(mut out: W, rows: &[HyponymyRelation]) -> Result<()> {
    for r in rows {
        writeln!(
            out,
            "{}\t{}\t{:.6}\t{}\t{}",
            r.hypernym, r.hyponym, r.weight, r.kind, r.support
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_relations<R: BufRead>(input: R) -> Result<Vec<HyponymyRelation>> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let bad = |what: &str| Error::data(format!("relations line {}: {what}", n + 1));
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 5 {
            return Err(bad("expected 5 columns"));
        }
        out.push(HyponymyRelation {
            hypernym: cols[0].to_string(),
            hyponym: cols[1].to_string(),
            weight: cols[2].parse().map_err(|_| bad("bad weight"))?,
            kind: cols[3].parse()?,
            support: cols[4].parse().map_err(|_| bad("bad support"))?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::QueryRecord;

    fn pattern(kind: PatternKind, g: &str, s: &str) -> ReformulationPattern {
        ReformulationPattern {
            kind,
            session_id: 0,
            general: QueryRecord::new("u", g, 0).unwrap(),
            specific: QueryRecord::new("u", s, 1).unwrap(),
        }
    }

    fn pairs(c: &[HyponymyCandidate]) -> BTreeSet<(String, String)> {
        c.iter()
            .map(|c| (c.hypernym.clone(), c.hyponym.clone()))
            .collect()
    }

    #[test]
    fn weight_examples() {
        assert_eq!(weight(0, 0, 0), 0.0);
        assert_eq!(weight(1, 0, 0), 1.0);
        assert_eq!(weight(2, 0, 7), 4.0);
        assert!((weight(2, 1, 1) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn luxury_cars_candidates() {
        let p = pattern(PatternKind::Trivial, "luxury cars", "american luxury cars");
        let c = candidates_trivial_or_disjoint(&p, &ExtractConfig::default());
        let expected: BTreeSet<(String, String)> = [
            ("luxury", "american"),
            ("luxury", "cars"),
            ("luxury", "american luxury"),
            ("luxury", "luxury cars"),
            ("luxury", "american luxury cars"),
            ("cars", "american"),
            ("cars", "luxury"),
            ("cars", "american luxury"),
            ("cars", "luxury cars"),
            ("cars", "american luxury cars"),
            ("luxury cars", "american luxury"),
            ("luxury cars", "american luxury cars"),
        ]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
        assert_eq!(c.len(), 12);
        assert_eq!(pairs(&c), expected);
    }

    #[test]
    fn length_rule_is_a_knob() {
        let p = pattern(PatternKind::Disjoint, "marvel superheroes", "wolverine");
        let strict = candidates_trivial_or_disjoint(&p, &ExtractConfig::default());
        assert_eq!(strict.len(), 2);
        let loose = ExtractConfig {
            hyponym_not_shorter: false,
            ..Default::default()
        };
        assert_eq!(candidates_trivial_or_disjoint(&p, &loose).len(), 3);

        let p = pattern(PatternKind::Trivial, "luxury cars", "american luxury cars");
        assert_eq!(candidates_trivial_or_disjoint(&p, &loose).len(), 13);
    }

    #[test]
    fn identical_queries_have_no_candidates() {
        let p = pattern(PatternKind::Trivial, "lion", "lion");
        assert!(candidates_trivial_or_disjoint(&p, &ExtractConfig::default()).is_empty());
    }

    #[test]
    fn reformulation_candidates() {
        let cfg = ExtractConfig::default();
        let c = candidate_reformulation(
            &pattern(
                PatternKind::WithReformulation,
                "naked celebrities",
                "naked angelina jolie",
            ),
            &cfg,
        )
        .unwrap();
        assert_eq!(
            (c.hypernym.as_str(), c.hyponym.as_str()),
            ("celebrities", "angelina jolie")
        );

        let c = candidate_reformulation(
            &pattern(
                PatternKind::WithReformulation,
                "clinton white house",
                "lewinsky white house",
            ),
            &cfg,
        )
        .unwrap();
        assert_eq!(
            (c.hypernym.as_str(), c.hyponym.as_str()),
            ("clinton", "lewinsky")
        );

        assert!(candidate_reformulation(
            &pattern(PatternKind::WithReformulation, "a b", "a b"),
            &cfg
        )
        .is_none());
    }

    #[test]
    fn reformulation_swap_swaps_roles() {
        let cfg = ExtractConfig::default();
        let a =
            candidate_reformulation(&pattern(PatternKind::WithReformulation, "x y", "z y"), &cfg)
                .unwrap();
        let b =
            candidate_reformulation(&pattern(PatternKind::WithReformulation, "z y", "x y"), &cfg)
                .unwrap();
        assert_eq!((a.hypernym, a.hyponym), (b.hyponym, b.hypernym));
    }

    #[test]
    fn selection() {
        let stats = PatternStats::from_pairs([("lion", "white lion")]);
        let cands = vec![HyponymyCandidate {
            hypernym: "lion".into(),
            hyponym: "white lion".into(),
            kind: PatternKind::Trivial,
        }];
        assert_eq!(select_relation(&cands, &stats, false), Some((0, 1.0)));

        let stats = PatternStats::from_pairs(std::iter::empty());
        assert_eq!(select_relation(&cands, &stats, false), None);
        assert_eq!(select_relation(&cands, &stats, true), Some((0, 0.0)));
        assert_eq!(select_relation(&[], &stats, true), None);
    }

    #[test]
    fn stoplist() {
        let cfg = ExtractConfig {
            stoplist: ["of", "the"].iter().map(|s| s.to_string()).collect(),
            ..Default::default()
        };
        let p = pattern(PatternKind::Trivial, "the cars", "the luxury cars");
        let c = candidates_trivial_or_disjoint(&p, &cfg);
        assert!(c.iter().all(|c| c.hypernym != "the" && c.hyponym != "the"));
        assert!(c.iter().any(|c| c.hypernym == "the cars"));
    }

    #[test]
    fn repeated_relation_is_one_row() {
        let pats = vec![
            pattern(PatternKind::Trivial, "lion", "white lion"),
            pattern(PatternKind::Trivial, "lion", "white lion"),
            pattern(PatternKind::Trivial, "lion", "white lion"),
        ];
        let ex = extract_all(&pats, &ExtractConfig::default());
        assert_eq!(ex.relations.len(), 1);
        let r = &ex.relations[0];
        assert_eq!(
            (r.hypernym.as_str(), r.hyponym.as_str(), r.support),
            ("lion", "white lion", 3)
        );
        assert_eq!(r.weight, 1.0);
        assert_eq!(ex.distinct_patterns, 1);
        assert_eq!(ex.total_extracted(), 3);
        // the other candidate, lion <- white, is in the discarded pool
        assert_eq!(ex.discarded.len(), 1);
        assert_eq!(ex.discarded[0].hyponym, "white");
    }

    #[test]
    fn empty_patterns() {
        let ex = extract_all(&[], &ExtractConfig::default());
        assert!(ex.relations.is_empty() && ex.discarded.is_empty());
    }

    #[test]
    fn relations_file_round_trip() {
        let pats = vec![
            pattern(PatternKind::Trivial, "luxury cars", "american luxury cars"),
            pattern(
                PatternKind::WithReformulation,
                "naked celebrities",
                "naked angelina jolie",
            ),
        ];
        let ex = extract_all(&pats, &ExtractConfig::default());
        let mut buf = Vec::new();
        write_relations(&mut buf, &ex.relations).unwrap();
        let back = read_relations(buf.as_slice()).unwrap();
        assert_eq!(back.len(), ex.relations.len());
        for (a, b) in back.iter().zip(&ex.relations) {
            assert_eq!(
                (&a.hypernym, &a.hyponym, a.kind, a.support),
                (&b.hypernym, &b.hyponym, b.kind, b.support)
            );
            assert!((a.weight - b.weight).abs() < 1e-6);
        }
    }
}
