//! Lookup structures built once from the filtered sessions: query postings,
//! per-session contents and term n-gram postings.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::record::{Click, QueryRecord};
use crate::session::{Session, SessionId};
use crate::text::term_ngrams;
use crate::{Error, Result};

const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryPosting {
    pub session: SessionId,
    pub position: usize,
    pub timestamp: i64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryEntry {
    /// Largest count seen for the query.
    pub result_count: Option<u64>,
    pub postings: Vec<QueryPosting>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryIndex(pub BTreeMap<String, QueryEntry>);

impl QueryIndex {
    pub fn get(&self, query: &str) -> Option<&QueryEntry> {
        self.0.get(query)
    }

    pub fn result_count(&self, query: &str) -> Option<u64> {
        self.0.get(query).and_then(|e| e.result_count)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionEntry {
    pub query: String,
    pub clicks: Vec<Click>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexedSession {
    pub user_id: String,
    pub entries: Vec<SessionEntry>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionIndex(pub BTreeMap<SessionId, IndexedSession>);

impl SessionIndex {
    pub fn get(&self, id: SessionId) -> Option<&IndexedSession> {
        self.0.get(&id)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Where a term n-gram occurs inside a query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NgramPosting {
    pub query: String,
    /// Offset of the first term.
    pub start: usize,
    /// Length in terms.
    pub len: usize,
    /// Byte offset of the gram inside the query.
    pub char_offset: usize,
}

/// Term n-gram postings over the distinct queries of the corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NgramIndex(pub BTreeMap<String, Vec<NgramPosting>>);

impl NgramIndex {
    pub fn postings(&self, gram: &str) -> &[NgramPosting] {
        self.0.get(gram).map_or(&[], Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Indices {
    pub queries: QueryIndex,
    pub sessions: SessionIndex,
    pub ngrams: NgramIndex,
}

pub fn build_indices(sessions: &[Session]) -> Indices {
    let mut queries = QueryIndex::default();
    let mut session_index = SessionIndex::default();
    let mut conflicts = 0usize;

    for s in sessions {
        let mut entries = Vec::with_capacity(s.records.len());
        for (position, r) in s.records.iter().enumerate() {
            let entry = queries.0.entry(r.query_norm.clone()).or_default();
            entry.postings.push(QueryPosting {
                session: s.id,
                position,
                timestamp: r.timestamp,
            });
            if let Some(c) = r.result_count {
                match entry.result_count {
                    Some(prev) if prev != c => {
                        conflicts += 1;
                        entry.result_count = Some(prev.max(c));
                    }
                    Some(_) => {}
                    None => entry.result_count = Some(c),
                }
            }
            entries.push(SessionEntry {
                query: r.query_norm.clone(),
                clicks: r.click.iter().cloned().collect(),
            });
        }
        session_index.0.insert(
            s.id,
            IndexedSession {
                user_id: s.user_id.clone(),
                entries,
            },
        );
    }
    if conflicts > 0 {
        log::info!("{conflicts} records disagreed with an earlier result count; kept the maximum");
    }

    let mut ngrams = NgramIndex::default();
    for query in queries.0.keys() {
        for g in term_ngrams(query) {
            let char_offset = byte_offset_of_term(query, g.start);
            ngrams.0.entry(g.text).or_default().push(NgramPosting {
                query: query.clone(),
                start: g.start,
                len: g.len,
                char_offset,
            });
        }
    }

    Indices {
        queries,
        sessions: session_index,
        ngrams,
    }
}

fn byte_offset_of_term(query: &str, term: usize) -> usize {
    if term == 0 {
        return 0;
    }
    query
        .match_indices(' ')
        .nth(term - 1)
        .map_or(0, |(i, _)| i + 1)
}

impl Indices {
    /// Sessions as stored in the indices: normalized queries, index-level
    /// result counts and one click per record at most.
    pub fn to_sessions(&self) -> Vec<Session> {
        let mut timestamps: BTreeMap<(SessionId, usize), i64> = BTreeMap::new();
        for entry in self.queries.0.values() {
            for p in &entry.postings {
                timestamps.insert((p.session, p.position), p.timestamp);
            }
        }
        self.sessions
            .0
            .iter()
            .map(|(&id, s)| Session {
                id,
                user_id: s.user_id.clone(),
                records: s
                    .entries
                    .iter()
                    .enumerate()
                    .map(|(pos, e)| {
                        let ts = timestamps.get(&(id, pos)).copied().unwrap_or_default();
                        let mut r = QueryRecord::new(s.user_id.clone(), e.query.clone(), ts)
                            .expect("indexed queries are non-empty");
                        r.result_count = self.queries.result_count(&e.query);
                        r.click = e.clicks.first().cloned();
                        r
                    })
                    .collect(),
            })
            .collect()
    }

    pub fn write_snapshot<W: Write>(&self, out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Snapshot<'a> {
            version: u32,
            indices: &'a Indices,
        }
        serde_json::to_writer(
            out,
            &Snapshot {
                version: SNAPSHOT_VERSION,
                indices: self,
            },
        )?;
        Ok(())
    }

    pub fn read_snapshot<R: Read>(input: R) -> Result<Indices> {
        #[derive(Deserialize)]
        struct Snapshot {
            version: u32,
            indices: Indices,
        }
        let snap: Snapshot = serde_json::from_reader(input)?;
        if snap.version != SNAPSHOT_VERSION {
            return Err(Error::data(format!(
                "index snapshot version {} (expected {SNAPSHOT_VERSION})",
                snap.version
            )));
        }
        Ok(snap.indices)
    }
}

/// Session-level aggregates for an ordered query pair, over all sessions
/// where `q1` is followed (not necessarily immediately) by `q2`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PairSessionStats {
    /// Number of sessions containing the pair.
    pub sessions: usize,
    pub avg_position_q1: f64,
    pub avg_position_q2: f64,
    pub avg_session_len: f64,
    pub avg_between: f64,
    pub avg_clicks_q1: f64,
    pub avg_clicks_q2: f64,
    /// Mean number of clicks from the session start up to (not including)
    /// the later query.
    pub avg_clicks_since_begin: f64,
}

pub fn pair_session_stats(q1: &str, q2: &str, indices: &Indices) -> PairSessionStats {
    let Some(entry) = indices.queries.get(q1) else {
        return PairSessionStats::default();
    };
    let candidates: BTreeSet<SessionId> = entry.postings.iter().map(|p| p.session).collect();

    let mut acc = [0.0f64; 7];
    let mut n = 0usize;
    for id in candidates {
        let Some(session) = indices.sessions.get(id) else {
            continue;
        };
        let e = &session.entries;
        let Some(i) = e.iter().position(|x| x.query == q1) else {
            continue;
        };
        let Some(j) = e[i + 1..]
            .iter()
            .position(|x| x.query == q2)
            .map(|k| k + i + 1)
        else {
            continue;
        };
        let clicks_before: usize = e[..j].iter().map(|x| x.clicks.len()).sum();
        let sample = [
            i as f64,
            j as f64,
            e.len() as f64,
            (j - i - 1) as f64,
            e[i].clicks.len() as f64,
            e[j].clicks.len() as f64,
            clicks_before as f64,
        ];
        for (a, v) in acc.iter_mut().zip(sample) {
            *a += v;
        }
        n += 1;
    }
    if n == 0 {
        return PairSessionStats::default();
    }
    let avg = |k: usize| acc[k] / n as f64;
    PairSessionStats {
        sessions: n,
        avg_position_q1: avg(0),
        avg_position_q2: avg(1),
        avg_session_len: avg(2),
        avg_between: avg(3),
        avg_clicks_q1: avg(4),
        avg_clicks_q2: avg(5),
        avg_clicks_since_begin: avg(6),
    }
}
