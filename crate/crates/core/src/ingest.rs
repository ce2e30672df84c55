//! Query-log parsing and result-count attachment.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::record::{format_timestamp, normalize, parse_timestamp, url_host, Click, QueryRecord};
use crate::{Error, Result};

/// Column layout of an input log.
///
/// * `Aol`: AnonID, Query, QueryTime, ItemRank, ClickURL
/// * `Msn`: user, query, time, ResultCount, ItemRank, ClickURL
/// * `Generic`: user, query, timestamp, result_count, click_rank, click_host
///
/// The first three columns are mandatory in every layout; trailing optional
/// columns may be empty or absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogFormat {
    Aol,
    Msn,
    Generic,
}

impl FromStr for LogFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "aol" | "aol_tsv" => Ok(LogFormat::Aol),
            "msn" | "msn_tsv" => Ok(LogFormat::Msn),
            "generic" | "generic_tsv" => Ok(LogFormat::Generic),
            other => Err(Error::config(format!("unknown log format `{other}`"))),
        }
    }
}

impl LogFormat {
    fn max_columns(self) -> usize {
        match self {
            LogFormat::Aol => 5,
            LogFormat::Msn | LogFormat::Generic => 6,
        }
    }

    fn has_count_column(self) -> bool {
        !matches!(self, LogFormat::Aol)
    }
}

/// Why a line was skipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Malformed {
    ColumnCount(usize),
    EmptyUser,
    EmptyQuery,
    Timestamp(String),
    ResultCount(String),
    ClickRank(String),
}

/// Parses one line (without its terminator).
pub fn parse_line(line: &str, format: LogFormat) -> Result<QueryRecord, Malformed> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() < 3 || cols.len() > format.max_columns() {
        return Err(Malformed::ColumnCount(cols.len()));
    }
    let col = |i: usize| cols.get(i).map(|c| c.trim()).unwrap_or("");

    let user = col(0);
    if user.is_empty() {
        return Err(Malformed::EmptyUser);
    }
    let timestamp = parse_timestamp(cols[2]).ok_or_else(|| Malformed::Timestamp(cols[2].into()))?;
    let mut record = QueryRecord::new(user, cols[1], timestamp).ok_or(Malformed::EmptyQuery)?;

    let click_at = if format.has_count_column() {
        let count = col(3);
        if !count.is_empty() {
            let n = count
                .parse::<u64>()
                .map_err(|_| Malformed::ResultCount(count.into()))?;
            record.result_count = Some(n);
        }
        4
    } else {
        3
    };

    let rank = col(click_at);
    if !rank.is_empty() {
        let rank = rank
            .parse::<u32>()
            .ok()
            .filter(|&r| r > 0)
            .ok_or_else(|| Malformed::ClickRank(rank.into()))?;
        let target = col(click_at + 1);
        let host = match format {
            LogFormat::Generic => target.to_lowercase(),
            _ => url_host(target),
        };
        record.click = Some(Click { rank, host });
    }
    Ok(record)
}

/// Records parsed from one input plus the line accounting.
#[derive(Debug, Default, Clone)]
pub struct ParsedLog {
    pub records: Vec<QueryRecord>,
    pub lines: usize,
    pub malformed: usize,
}

impl ParsedLog {
    pub fn merge(&mut self, other: ParsedLog) {
        self.records.extend(other.records);
        self.lines += other.lines;
        self.malformed += other.malformed;
    }
}

/// Parses every line of `input`. Malformed lines are counted and skipped;
/// only an I/O failure aborts. Records keep file order.
pub fn parse_log<R: BufRead>(input: R, format: LogFormat) -> Result<ParsedLog> {
    let mut out = ParsedLog::default();
    for line in input.lines() {
        let line = line?;
        out.lines += 1;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        match parse_line(line, format) {
            Ok(r) => out.records.push(r),
            Err(reason) => {
                log::debug!("line {}: skipped ({reason:?})", out.lines);
                out.malformed += 1;
            }
        }
    }
    Ok(out)
}

/// Stable sort by (user, timestamp): ties keep their input order.
pub fn sort_records(records: &mut [QueryRecord]) {
    records.sort_by(|a, b| {
        a.user_id
            .cmp(&b.user_id)
            .then(a.timestamp.cmp(&b.timestamp))
    });
}

/// Result counts keyed by normalized query.
pub type CountMap = BTreeMap<String, u64>;

/// Loads a `query\tcount` sidecar. The same query listed with two different
/// counts is a configuration error naming every offender.
pub fn load_counts<R: BufRead>(input: R) -> Result<CountMap> {
    let mut map = CountMap::new();
    let mut conflicts = BTreeSet::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (query, count) = line.split_once('\t').ok_or_else(|| {
            Error::config(format!("counts line {}: expected `query<TAB>count`", n + 1))
        })?;
        let count: u64 = count
            .trim()
            .parse()
            .map_err(|_| Error::config(format!("counts line {}: bad count `{count}`", n + 1)))?;
        let key = normalize(query);
        match map.get(&key) {
            Some(&prev) if prev != count => {
                conflicts.insert(key);
            }
            _ => {
                map.insert(key, count);
            }
        }
    }
    if !conflicts.is_empty() {
        let list: Vec<_> = conflicts.into_iter().collect();
        return Err(Error::config(format!(
            "conflicting result counts for: {}",
            list.join(", ")
        )));
    }
    Ok(map)
}

/// Fills in missing result counts from `counts`. Counts already present in
/// the log win.
pub fn attach_result_counts(records: &mut [QueryRecord], counts: &CountMap) {
    for r in records.iter_mut().filter(|r| r.result_count.is_none()) {
        r.result_count = counts.get(&r.query_norm).copied();
    }
}

/// Writes records in the generic layout.
pub fn write_generic<W: Write>(mut out: W, records: &[QueryRecord]) -> Result<()> {
    for r in records {
        writeln!(out, "{}", generic_line(r))?;
    }
    out.flush()?;
    Ok(())
}

pub(crate) fn generic_line(r: &QueryRecord) -> String {
    let count = r.result_count.map(|c| c.to_string()).unwrap_or_default();
    let (rank, host) = match &r.click {
        Some(c) => (c.rank.to_string(), c.host.as_str()),
        None => (String::new(), ""),
    };
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}",
        r.user_id,
        r.query,
        format_timestamp(r.timestamp),
        count,
        rank,
        host
    )
}
