//! Geometric session detection.
//!
//! Two consecutive queries of a user are placed in a plane: `x` is the
//! cosine of their character 3-gram vectors, `y` their temporal closeness
//! (`1` when submitted together, falling linearly to `0` at the maximum
//! timespan). The pair belongs to the same session when the point lies
//! inside, or on, the circle centred at `(1, 1)`.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ingest::generic_line;
use crate::record::{parse_timestamp, Click, QueryRecord};
use crate::text::{char_3grams, cosine, GramVector};
use crate::{Error, Result};

pub type SessionId = u64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub id: SessionId,
    pub user_id: String,
    pub records: Vec<QueryRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricParams {
    pub max_timespan_seconds: u32,
    pub radius: f64,
}

impl Default for GeometricParams {
    fn default() -> Self {
        GeometricParams {
            max_timespan_seconds: 1800,
            radius: 1.0,
        }
    }
}

impl GeometricParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_timespan_seconds == 0 {
            return Err(Error::config("max_timespan_seconds must be positive"));
        }
        if !(self.radius > 0.0 && self.radius <= std::f64::consts::SQRT_2) {
            return Err(Error::config("radius must lie in (0, sqrt(2)]"));
        }
        Ok(())
    }

    /// Temporal similarity for a gap of `dt` seconds, clamped at 0.
    pub fn temporal_similarity(&self, dt: i64) -> f64 {
        let span = f64::from(self.max_timespan_seconds);
        (1.0 - dt.unsigned_abs() as f64 / span).max(0.0)
    }

    /// The circle test on an `(x, y)` point. Points on the boundary count.
    pub fn inside(&self, x: f64, y: f64) -> bool {
        (1.0 - x).powi(2) + (1.0 - y).powi(2) <= self.radius * self.radius
    }
}

/// Whether `q2`, submitted after `q1` by the same user, continues its session.
pub fn same_session(q1: &QueryRecord, q2: &QueryRecord, p: &GeometricParams) -> bool {
    let x = cosine(&char_3grams(&q1.query_norm), &char_3grams(&q2.query_norm));
    let y = p.temporal_similarity(q2.timestamp - q1.timestamp);
    p.inside(x, y)
}

/// Splits per-user, timestamp-ordered records into sessions by chaining
/// each record to the previous one. Users must appear as contiguous runs.
/// Session ids are assigned sequentially in output order.
pub fn sessionize(records: &[QueryRecord], p: &GeometricParams) -> Result<Vec<Session>> {
    let runs = user_runs(records)?;
    let per_user: Vec<Vec<Vec<QueryRecord>>> =
        runs.par_iter().map(|run| split_user(run, p)).collect();

    let mut out = Vec::new();
    for sessions in per_user {
        for records in sessions {
            out.push(Session {
                id: out.len() as SessionId,
                user_id: records[0].user_id.clone(),
                records,
            });
        }
    }
    Ok(out)
}

fn user_runs(records: &[QueryRecord]) -> Result<Vec<&[QueryRecord]>> {
    let mut runs = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut start = 0;
    for i in 1..=records.len() {
        if i == records.len() || records[i].user_id != records[start].user_id {
            if !seen.insert(records[start].user_id.as_str()) {
                return Err(Error::contract(format!(
                    "records of user `{}` are not contiguous",
                    records[start].user_id
                )));
            }
            runs.push(&records[start..i]);
            start = i;
        } else if records[i].timestamp < records[i - 1].timestamp {
            return Err(Error::contract(format!(
                "records of user `{}` are not sorted by timestamp",
                records[i].user_id
            )));
        }
    }
    Ok(runs)
}

fn split_user(run: &[QueryRecord], p: &GeometricParams) -> Vec<Vec<QueryRecord>> {
    let mut sessions = Vec::new();
    let mut current: Vec<QueryRecord> = Vec::new();
    let mut prev_grams: Option<GramVector> = None;
    for r in run {
        let grams = char_3grams(&r.query_norm);
        if let (Some(prev), Some(pg)) = (current.last(), prev_grams.as_ref()) {
            let x = cosine(pg, &grams);
            let y = p.temporal_similarity(r.timestamp - prev.timestamp);
            if !p.inside(x, y) {
                sessions.push(std::mem::take(&mut current));
            }
        }
        current.push(r.clone());
        prev_grams = Some(grams);
    }
    if !current.is_empty() {
        sessions.push(current);
    }
    sessions
}

/// Writes `session_id, user_id, position, query, timestamp, result_count,
/// click_rank, click_host` rows.
pub fn write_sessions<W: Write>(mut out: W, sessions: &[Session]) -> Result<()> {
    for s in sessions {
        for (pos, r) in s.records.iter().enumerate() {
            // generic_line starts with the user id, which we already carry
            let line = generic_line(r);
            let rest = line.split_once('\t').map_or("", |(_, rest)| rest);
            let (query, tail) = rest.split_once('\t').unwrap_or((rest, ""));
            writeln!(out, "{}\t{}\t{}\t{}\t{}", s.id, s.user_id, pos, query, tail)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads the format produced by [`write_sessions`].
pub fn read_sessions<R: BufRead>(input: R) -> Result<Vec<Session>> {
    let mut sessions: Vec<Session> = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let bad = |what: &str| Error::data(format!("sessions line {}: {what}", n + 1));
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 8 {
            return Err(bad("expected 8 columns"));
        }
        let id: SessionId = cols[0].parse().map_err(|_| bad("bad session id"))?;
        let pos: usize = cols[2].parse().map_err(|_| bad("bad position"))?;
        let ts = parse_timestamp(cols[4]).ok_or_else(|| bad("bad timestamp"))?;
        let mut record =
            QueryRecord::new(cols[1], cols[3], ts).ok_or_else(|| bad("empty query"))?;
        if !cols[5].is_empty() {
            record.result_count = Some(cols[5].parse().map_err(|_| bad("bad result count"))?);
        }
        if !cols[6].is_empty() {
            record.click = Some(Click {
                rank: cols[6].parse().map_err(|_| bad("bad click rank"))?,
                host: cols[7].to_string(),
            });
        }
        match sessions.last_mut() {
            Some(s) if s.id == id => {
                if pos != s.records.len() {
                    return Err(bad("positions out of order"));
                }
                s.records.push(record);
            }
            _ => {
                if pos != 0 {
                    return Err(bad("session does not start at position 0"));
                }
                sessions.push(Session {
                    id,
                    user_id: cols[1].to_string(),
                    records: vec![record],
                });
            }
        }
    }
    Ok(sessions)
}
