use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};

const TIME_FORMAT: &str = "%Y-%m-%d %H:%M:%S";

/// A clicked result: its rank on the results page and the host of its URL.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Click {
    pub rank: u32,
    pub host: String,
}

/// One normalized query-log line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub user_id: String,
    /// The query as it appeared in the log.
    pub query: String,
    /// Lowercased, whitespace-collapsed form used for every comparison.
    pub query_norm: String,
    /// UTC seconds since the epoch.
    pub timestamp: i64,
    pub result_count: Option<u64>,
    pub click: Option<Click>,
}

impl QueryRecord {
    /// Builds a record, normalizing the query. Returns `None` when the query
    /// is empty after normalization.
    pub fn new(
        user_id: impl Into<String>,
        query: impl Into<String>,
        timestamp: i64,
    ) -> Option<Self> {
        let query = query.into();
        let query_norm = normalize(&query);
        if query_norm.is_empty() {
            return None;
        }
        Some(QueryRecord {
            user_id: user_id.into(),
            query,
            query_norm,
            timestamp,
            result_count: None,
            click: None,
        })
    }

    pub fn with_result_count(mut self, count: u64) -> Self {
        self.result_count = Some(count);
        self
    }

    pub fn with_click(mut self, rank: u32, host: impl Into<String>) -> Self {
        self.click = Some(Click {
            rank,
            host: host.into(),
        });
        self
    }

    pub fn term_count(&self) -> usize {
        self.query_norm.split(' ').count()
    }
}

/// Unicode lowercase, runs of whitespace collapsed to one space, trimmed.
pub fn normalize(query: &str) -> String {
    query
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Accepts `YYYY-MM-DD HH:MM:SS` (UTC) or plain epoch seconds.
pub fn parse_timestamp(s: &str) -> Option<i64> {
    let s = s.trim();
    if !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()) {
        return s.parse().ok();
    }
    NaiveDateTime::parse_from_str(s, TIME_FORMAT)
        .ok()
        .map(|dt| dt.and_utc().timestamp())
}

pub fn format_timestamp(ts: i64) -> String {
    match DateTime::from_timestamp(ts, 0) {
        Some(dt) => dt.format(TIME_FORMAT).to_string(),
        None => ts.to_string(),
    }
}

/// Host part of a click URL: scheme and path are stripped.
pub fn url_host(url: &str) -> String {
    let rest = url.split_once("://").map_or(url, |(_, r)| r);
    rest.split(['/', '?', '#'])
        .next()
        .unwrap_or("")
        .to_lowercase()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization() {
        assert_eq!(normalize("  Fish\t  FOOD "), "fish food");
        assert_eq!(normalize(" \t "), "");
        assert!(QueryRecord::new("u", "   ", 0).is_none());
    }

    #[test]
    fn timestamps() {
        assert_eq!(parse_timestamp("1970-01-01 00:01:00"), Some(60));
        assert_eq!(parse_timestamp("1141197432"), Some(1141197432));
        assert_eq!(parse_timestamp("2006-03-01"), None);
        assert_eq!(parse_timestamp("yesterday"), None);
        let ts = parse_timestamp("2006-03-01 07:17:12").unwrap();
        assert_eq!(format_timestamp(ts), "2006-03-01 07:17:12");
    }

    #[test]
    fn hosts() {
        assert_eq!(url_host("http://www.Example.com/a/b"), "www.example.com");
        assert_eq!(url_host("www.example.com"), "www.example.com");
    }
}
