//! Specialization patterns between consecutive queries of a session.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::record::QueryRecord;
use crate::session::{Session, SessionId};
use crate::text::{contains_terms, terms};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PatternKind {
    Trivial,
    WithReformulation,
    Disjoint,
}

impl PatternKind {
    pub const ALL: [PatternKind; 3] = [
        PatternKind::Trivial,
        PatternKind::WithReformulation,
        PatternKind::Disjoint,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PatternKind::Trivial => "trivial",
            PatternKind::WithReformulation => "reformulation",
            PatternKind::Disjoint => "disjoint",
        }
    }
}

impl fmt::Display for PatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PatternKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trivial" => Ok(PatternKind::Trivial),
            "reformulation" | "with_reformulation" => Ok(PatternKind::WithReformulation),
            "disjoint" => Ok(PatternKind::Disjoint),
            other => Err(Error::data(format!("unknown pattern kind `{other}`"))),
        }
    }
}

/// An ordered query pair where `specific` narrows `general`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReformulationPattern {
    pub kind: PatternKind,
    pub session_id: SessionId,
    pub general: QueryRecord,
    pub specific: QueryRecord,
}

/// Lexical relation of a later query to an earlier one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LexicalClass {
    /// The earlier query's terms appear contiguously inside the later one.
    Trivial,
    /// The term sets share something but neither contains the other.
    ReformulationCandidate,
    /// No shared terms.
    DisjointCandidate,
    /// Identical queries, or the later query only drops terms.
    None,
}

pub fn classify_lexical(q1: &QueryRecord, q2: &QueryRecord) -> LexicalClass {
    classify_norms(&q1.query_norm, &q2.query_norm)
}

pub(crate) fn classify_norms(q1: &str, q2: &str) -> LexicalClass {
    if q1 == q2 {
        return LexicalClass::None;
    }
    let (t1, t2) = (terms(q1), terms(q2));
    if t1.len() < t2.len() && contains_terms(&t2, &t1) {
        return LexicalClass::Trivial;
    }
    let (s1, s2): (BTreeSet<&str>, BTreeSet<&str>) =
        (t1.iter().copied().collect(), t2.iter().copied().collect());
    if s2.is_subset(&s1) || s1.is_subset(&s2) {
        LexicalClass::None
    } else if s1.is_disjoint(&s2) {
        LexicalClass::DisjointCandidate
    } else {
        LexicalClass::ReformulationCandidate
    }
}

/// Result-count subsumption: `q1` is broader than `q2` when it has at least
/// `ratio_threshold` times as many results. `None` when either count is
/// missing or zero.
pub fn subsumes(q1: &QueryRecord, q2: &QueryRecord, ratio_threshold: f64) -> Option<bool> {
    let (a, b) = (q1.result_count?, q2.result_count?);
    if a == 0 || b == 0 {
        return None;
    }
    Some(a as f64 / b as f64 >= ratio_threshold)
}

/// Consecutive queries of a session that share no term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DisjointPair {
    pub session_id: SessionId,
    pub first: QueryRecord,
    pub second: QueryRecord,
}

/// Patterns found in one session.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Detection {
    pub patterns: Vec<ReformulationPattern>,
    /// Consecutive pairs without shared terms, in session order, for the
    /// supervised cascade.
    pub disjoint: Vec<DisjointPair>,
    /// Reformulation candidates dropped because a result count was missing.
    pub missing_counts: usize,
}

impl Detection {
    pub fn merge(&mut self, other: Detection) {
        self.patterns.extend(other.patterns);
        self.disjoint.extend(other.disjoint);
        self.missing_counts += other.missing_counts;
    }
}

/// Examines every consecutive pair of the session. Generalizations are
/// emitted as specializations with the roles swapped.
pub fn detect_patterns(session: &Session, ratio_threshold: f64) -> Detection {
    let mut out = Detection::default();
    for pair in session.records.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let emit = |kind, general: &QueryRecord, specific: &QueryRecord| ReformulationPattern {
            kind,
            session_id: session.id,
            general: general.clone(),
            specific: specific.clone(),
        };
        match classify_lexical(a, b) {
            LexicalClass::Trivial => out.patterns.push(emit(PatternKind::Trivial, a, b)),
            LexicalClass::ReformulationCandidate => match (
                subsumes(a, b, ratio_threshold),
                subsumes(b, a, ratio_threshold),
            ) {
                (Some(true), _) => out
                    .patterns
                    .push(emit(PatternKind::WithReformulation, a, b)),
                (_, Some(true)) => out
                    .patterns
                    .push(emit(PatternKind::WithReformulation, b, a)),
                (None, _) | (_, None) => out.missing_counts += 1,
                _ => {}
            },
            LexicalClass::DisjointCandidate => out.disjoint.push(DisjointPair {
                session_id: session.id,
                first: a.clone(),
                second: b.clone(),
            }),
            LexicalClass::None => {
                if classify_lexical(b, a) == LexicalClass::Trivial {
                    out.patterns.push(emit(PatternKind::Trivial, b, a));
                }
            }
        }
    }
    out
}

/// Runs detection over many sessions, keeping session order.
pub fn detect_all(sessions: &[Session], ratio_threshold: f64) -> Detection {
    use rayon::prelude::*;
    sessions
        .par_iter()
        .map(|s| detect_patterns(s, ratio_threshold))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Detection::default(), |mut acc, d| {
            acc.merge(d);
            acc
        })
}

/// `kind, session_id, general_query, specific_query, general_count,
/// specific_count` rows; counts may be empty.
pub fn write_patterns<W: Write>(mut out: W, patterns: &[ReformulationPattern]) -> Result<()> {
    let count = |r: &QueryRecord| r.result_count.map(|c| c.to_string()).unwrap_or_default();
    for p in patterns {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            p.kind,
            p.session_id,
            p.general.query_norm,
            p.specific.query_norm,
            count(&p.general),
            count(&p.specific)
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a patterns file. Records carry only the normalized query and the
/// count; user and timestamp are not part of the format.
pub fn read_patterns<R: BufRead>(input: R) -> Result<Vec<ReformulationPattern>> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let bad = |what: &str| Error::data(format!("patterns line {}: {what}", n + 1));
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 6 {
            return Err(bad("expected 6 columns"));
        }
        let record = |q: &str, c: &str| -> Result<QueryRecord> {
            let mut r = QueryRecord::new("", q, 0).ok_or_else(|| bad("empty query"))?;
            if !c.is_empty() {
                r.result_count = Some(c.parse().map_err(|_| bad("bad count"))?);
            }
            Ok(r)
        };
        out.push(ReformulationPattern {
            kind: cols[0].parse()?,
            session_id: cols[1].parse().map_err(|_| bad("bad session id"))?,
            general: record(cols[2], cols[4])?,
            specific: record(cols[3], cols[5])?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(q: &str) -> QueryRecord {
        QueryRecord::new("u", q, 0).unwrap()
    }

    fn counted(q: &str, c: u64) -> QueryRecord {
        rec(q).with_result_count(c)
    }

    fn session(records: Vec<QueryRecord>) -> Session {
        Session {
            id: 7,
            user_id: "u".into(),
            records,
        }
    }

    #[test]
    fn lexical_classes() {
        use LexicalClass::*;
        assert_eq!(
            classify_lexical(&rec("fish food"), &rec("tropical fish food")),
            Trivial
        );
        assert_eq!(
            classify_lexical(&rec("celebrity scandals"), &rec("charly sheen scandals")),
            ReformulationCandidate
        );
        assert_eq!(
            classify_lexical(&rec("outdoor activities"), &rec("camping")),
            DisjointCandidate
        );
        assert_eq!(
            classify_lexical(&rec("tropical fish food"), &rec("fish food")),
            None
        );
        assert_eq!(classify_lexical(&rec("lion"), &rec("lion")), None);
        assert_eq!(
            classify_lexical(&rec("car"), &rec("carpet")),
            DisjointCandidate
        );
        // same terms, not contiguous
        assert_eq!(
            classify_lexical(&rec("fish food"), &rec("food for fish")),
            None
        );
    }

    #[test]
    fn subsumption_examples() {
        assert_eq!(
            subsumes(&counted("a", 11_000_000), &counted("b", 400_000), 10.0),
            Some(true)
        );
        assert_eq!(
            subsumes(&counted("a", 340_000_000), &counted("b", 550_000_000), 10.0),
            Some(false)
        );
        assert_eq!(
            subsumes(&counted("a", 5), &counted("b", 5), 10.0),
            Some(false)
        );
        assert_eq!(subsumes(&rec("a"), &counted("b", 5), 10.0), None);
        assert_eq!(subsumes(&counted("a", 0), &counted("b", 5), 10.0), None);
    }

    #[test]
    fn detection_examples() {
        let d = detect_patterns(
            &session(vec![rec("luxury cars"), rec("american luxury cars")]),
            10.0,
        );
        assert_eq!(d.patterns.len(), 1);
        assert_eq!(d.patterns[0].kind, PatternKind::Trivial);
        assert_eq!(d.patterns[0].session_id, 7);

        let d = detect_patterns(
            &session(vec![
                counted("naked angelina jolie", 400_000),
                counted("naked celebrities", 11_000_000),
            ]),
            10.0,
        );
        assert_eq!(d.patterns.len(), 1);
        let p = &d.patterns[0];
        assert_eq!(p.kind, PatternKind::WithReformulation);
        assert_eq!(p.general.query_norm, "naked celebrities");
        assert_eq!(p.specific.query_norm, "naked angelina jolie");

        let d = detect_patterns(
            &session(vec![rec("marvel superheroes"), rec("wolverine")]),
            10.0,
        );
        assert!(d.patterns.is_empty());
        assert_eq!(d.disjoint.len(), 1);
    }

    #[test]
    fn generalization_is_swapped() {
        let d = detect_patterns(
            &session(vec![rec("tropical fish food"), rec("fish food")]),
            10.0,
        );
        assert_eq!(d.patterns.len(), 1);
        assert_eq!(d.patterns[0].general.query_norm, "fish food");
        assert_eq!(d.patterns[0].specific.query_norm, "tropical fish food");
    }

    #[test]
    fn missing_counts_are_tallied() {
        let d = detect_patterns(
            &session(vec![
                rec("celebrity scandals"),
                rec("charly sheen scandals"),
            ]),
            10.0,
        );
        assert!(d.patterns.is_empty());
        assert_eq!(d.missing_counts, 1);

        let d = detect_patterns(
            &session(vec![
                counted("electronic repairs", 340_000_000),
                counted("iphone repairs", 550_000_000),
            ]),
            10.0,
        );
        assert!(d.patterns.is_empty());
        assert_eq!(d.missing_counts, 0);
    }

    #[test]
    fn patterns_file_round_trip() {
        let d = detect_patterns(
            &session(vec![
                counted("naked angelina jolie", 400_000),
                counted("naked celebrities", 11_000_000),
                rec("tropical naked celebrities"),
            ]),
            10.0,
        );
        let mut buf = Vec::new();
        write_patterns(&mut buf, &d.patterns).unwrap();
        let back = read_patterns(buf.as_slice()).unwrap();
        assert_eq!(back.len(), d.patterns.len());
        for (a, b) in back.iter().zip(&d.patterns) {
            assert_eq!(a.kind, b.kind);
            assert_eq!(a.general.query_norm, b.general.query_norm);
            assert_eq!(a.specific.result_count, b.specific.result_count);
        }
    }
}
