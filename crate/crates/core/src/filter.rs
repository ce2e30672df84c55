//! Navigational-query removal and spam invalidation.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::record::QueryRecord;
use crate::session::Session;
use crate::Result;

pub const DEFAULT_SITE_NAMES: [&str; 50] = [
    "google",
    "yahoo",
    "wikipedia",
    "myspace",
    "ebay",
    "amazon",
    "aol",
    "msn",
    "hotmail",
    "youtube",
    "facebook",
    "craigslist",
    "mapquest",
    "walmart",
    "target",
    "bankofamerica",
    "paypal",
    "netflix",
    "imdb",
    "weather",
    "cnn",
    "espn",
    "foxnews",
    "nytimes",
    "bbc",
    "bestbuy",
    "lowes",
    "homedepot",
    "sears",
    "kohls",
    "jcpenney",
    "macys",
    "expedia",
    "orbitz",
    "travelocity",
    "priceline",
    "hotwire",
    "dell",
    "apple",
    "microsoft",
    "verizon",
    "comcast",
    "att",
    "fedex",
    "ups",
    "usps",
    "irs",
    "geocities",
    "ask",
    "excite",
];

pub const DEFAULT_DOMAIN_SUFFIXES: [&str; 14] = [
    "com", "net", "org", "edu", "gov", "mil", "info", "biz", "us", "tv", "co.uk", "ca", "de", "uk",
];

pub const DEFAULT_URL_MARKERS: [&str; 3] = ["www.", "http://", "https://"];

/// Patterns that mark a query as navigational. Entries are lowercase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NavigationalRules {
    pub site_names: BTreeSet<String>,
    pub domain_suffixes: BTreeSet<String>,
    pub url_markers: BTreeSet<String>,
}

impl Default for NavigationalRules {
    fn default() -> Self {
        let set = |items: &[&str]| items.iter().map(|s| s.to_string()).collect();
        NavigationalRules {
            site_names: set(&DEFAULT_SITE_NAMES),
            domain_suffixes: set(&DEFAULT_DOMAIN_SUFFIXES),
            url_markers: set(&DEFAULT_URL_MARKERS),
        }
    }
}

/// Reads one entry per line; blank lines and `#` comments are skipped.
pub fn read_rule_list<R: BufRead>(input: R) -> Result<BTreeSet<String>> {
    let mut out = BTreeSet::new();
    for line in input.lines() {
        let line = line?;
        let entry = line.split('#').next().unwrap_or("").trim();
        if !entry.is_empty() {
            out.insert(entry.to_lowercase());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpamRules {
    pub min_total_chars: usize,
    pub max_term_chars: usize,
    pub max_terms: usize,
    pub min_avg_gap_seconds: u32,
}

impl Default for SpamRules {
    fn default() -> Self {
        SpamRules {
            min_total_chars: 3,
            max_term_chars: 25,
            max_terms: 5,
            min_avg_gap_seconds: 7,
        }
    }
}

/// Toggles for the three sub-filters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterSwitches {
    pub navigational: bool,
    pub spam_queries: bool,
    pub fast_users: bool,
}

impl Default for FilterSwitches {
    fn default() -> Self {
        FilterSwitches {
            navigational: true,
            spam_queries: true,
            fast_users: true,
        }
    }
}

pub fn is_navigational(q: &QueryRecord, rules: &NavigationalRules) -> bool {
    let norm = q.query_norm.as_str();
    if rules.url_markers.iter().any(|m| norm.contains(m.as_str())) {
        return true;
    }
    let terms: Vec<&str> = norm.split(' ').collect();
    let site_hit = rules.site_names.iter().any(|site| {
        let site_terms: Vec<&str> = site.split_whitespace().collect();
        crate::text::contains_terms(&terms, &site_terms)
    });
    site_hit
        || terms.iter().any(|t| {
            rules
                .domain_suffixes
                .iter()
                .any(|s| has_domain_suffix(t, s))
        })
}

/// `term` ends in `.suffix` with something before the dot.
fn has_domain_suffix(term: &str, suffix: &str) -> bool {
    term.strip_suffix(suffix)
        .and_then(|head| head.strip_suffix('.'))
        .is_some_and(|host| !host.is_empty())
}

pub fn is_spam_query(q: &QueryRecord, rules: &SpamRules) -> bool {
    let terms: Vec<&str> = q.query_norm.split(' ').collect();
    let chars: usize = terms.iter().map(|t| t.chars().count()).sum();
    chars < rules.min_total_chars
        || terms.len() > rules.max_terms
        || terms
            .iter()
            .any(|t| t.chars().count() > rules.max_term_chars)
}

/// What a filtering run removed.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub sessions_in: usize,
    pub sessions_out: usize,
    pub fast_users: usize,
    pub sessions_dropped_fast_user: usize,
    pub sessions_dropped_spam: usize,
    pub navigational_removed: usize,
    pub sessions_emptied: usize,
    pub passes: usize,
}

/// Drops sessions of users submitting faster than the spam gap on average,
/// drops every session holding a spam query, strips navigational queries
/// and drops sessions left empty.
///
/// The per-user average gap is measured over all of the user's records in
/// the input. Because removal can change that average, passes repeat until
/// nothing changes, which makes the filter idempotent.
pub fn filter_sessions(
    sessions: Vec<Session>,
    nav: &NavigationalRules,
    spam: &SpamRules,
    switches: FilterSwitches,
) -> (Vec<Session>, FilterReport) {
    let mut report = FilterReport {
        sessions_in: sessions.len(),
        ..Default::default()
    };
    let mut current = sessions;
    loop {
        report.passes += 1;
        let (next, changed) = filter_pass(current, nav, spam, switches, &mut report);
        current = next;
        if !changed {
            break;
        }
    }
    report.sessions_out = current.len();
    (current, report)
}

fn filter_pass(
    sessions: Vec<Session>,
    nav: &NavigationalRules,
    spam: &SpamRules,
    switches: FilterSwitches,
    report: &mut FilterReport,
) -> (Vec<Session>, bool) {
    let fast = if switches.fast_users {
        fast_users(&sessions, spam.min_avg_gap_seconds)
    } else {
        BTreeSet::new()
    };
    report.fast_users += fast.len();

    let mut changed = false;
    let mut out = Vec::with_capacity(sessions.len());
    for mut s in sessions {
        if fast.contains(&s.user_id) {
            report.sessions_dropped_fast_user += 1;
            changed = true;
            continue;
        }
        if switches.spam_queries && s.records.iter().any(|r| is_spam_query(r, spam)) {
            report.sessions_dropped_spam += 1;
            changed = true;
            continue;
        }
        if switches.navigational {
            let before = s.records.len();
            s.records.retain(|r| !is_navigational(r, nav));
            let removed = before - s.records.len();
            if removed > 0 {
                report.navigational_removed += removed;
                changed = true;
            }
            if s.records.is_empty() {
                report.sessions_emptied += 1;
                continue;
            }
        }
        out.push(s);
    }
    (out, changed)
}

/// Users whose mean gap between consecutive submissions is below `min_gap`.
fn fast_users(sessions: &[Session], min_gap: u32) -> BTreeSet<String> {
    let mut spans: BTreeMap<&str, (i64, i64, usize)> = BTreeMap::new();
    for s in sessions {
        for r in &s.records {
            let e = spans
                .entry(s.user_id.as_str())
                .or_insert((r.timestamp, r.timestamp, 0));
            e.0 = e.0.min(r.timestamp);
            e.1 = e.1.max(r.timestamp);
            e.2 += 1;
        }
    }
    spans
        .into_iter()
        .filter(|&(_, (first, last, n))| {
            n > 1 && ((last - first) as f64 / (n - 1) as f64) < f64::from(min_gap)
        })
        .map(|(u, _)| u.to_string())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(q: &str) -> QueryRecord {
        QueryRecord::new("u", q, 0).unwrap()
    }

    fn session(id: u64, user: &str, queries: &[(&str, i64)]) -> Session {
        Session {
            id,
            user_id: user.into(),
            records: queries
                .iter()
                .map(|(q, t)| QueryRecord::new(user, *q, *t).unwrap())
                .collect(),
        }
    }

    #[test]
    fn navigational_examples() {
        let rules = NavigationalRules::default();
        assert!(is_navigational(&rec("www.google.com"), &rules));
        assert!(is_navigational(&rec("wikipedia civil war"), &rules));
        assert!(is_navigational(&rec("bbc.co.uk news"), &rules));
        assert!(is_navigational(&rec("http://foo"), &rules));
        assert!(!is_navigational(&rec("tropical fish food"), &rules));
        assert!(!is_navigational(&rec("communication skills"), &rules));
        assert!(!is_navigational(&rec("kitchen cabinet"), &rules));
        assert!(!is_navigational(&rec("internet explorer"), &rules));
        assert!(!is_navigational(&rec("googles"), &rules));
    }

    #[test]
    fn spam_examples() {
        let rules = SpamRules::default();
        assert!(is_spam_query(&rec("_"), &rules));
        assert!(is_spam_query(&rec("a b"), &rules));
        assert!(is_spam_query(&rec("one two three four five six"), &rules));
        assert!(is_spam_query(&rec(&"x".repeat(26)), &rules));
        assert!(!is_spam_query(&rec(&"x".repeat(25)), &rules));
        assert!(!is_spam_query(&rec("lion"), &rules));
        assert!(!is_spam_query(&rec("one two three four five"), &rules));
    }

    #[test]
    fn spam_query_invalidates_session() {
        let (out, report) = filter_sessions(
            vec![session(0, "u", &[("_", 0), ("dogs", 60)])],
            &NavigationalRules::default(),
            &SpamRules::default(),
            FilterSwitches::default(),
        );
        assert!(out.is_empty());
        assert_eq!(report.sessions_dropped_spam, 1);
    }

    #[test]
    fn navigational_queries_are_removed() {
        let (out, _) = filter_sessions(
            vec![session(
                0,
                "u",
                &[("www.aol.com", 0), ("dog breeds", 60), ("poodle", 120)],
            )],
            &NavigationalRules::default(),
            &SpamRules::default(),
            FilterSwitches::default(),
        );
        let q: Vec<_> = out[0]
            .records
            .iter()
            .map(|r| r.query_norm.as_str())
            .collect();
        assert_eq!(q, ["dog breeds", "poodle"]);
    }

    #[test]
    fn fast_users_are_dropped() {
        let queries: Vec<(String, i64)> = (0..100).map(|i| (format!("query {i}"), i * 3)).collect();
        let borrowed: Vec<(&str, i64)> = queries.iter().map(|(q, t)| (q.as_str(), *t)).collect();
        let sessions = vec![
            session(0, "bot", &borrowed[..50]),
            session(1, "bot", &borrowed[50..]),
            session(2, "human", &[("lion", 0), ("lion cubs", 60)]),
        ];
        let (out, report) = filter_sessions(
            sessions,
            &NavigationalRules::default(),
            &SpamRules::default(),
            FilterSwitches::default(),
        );
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].user_id, "human");
        assert_eq!(report.sessions_dropped_fast_user, 2);
    }

    #[test]
    fn switches_disable_subfilters() {
        let sessions = vec![session(0, "u", &[("_", 0), ("www.aol.com", 60)])];
        let off = FilterSwitches {
            navigational: false,
            spam_queries: false,
            fast_users: false,
        };
        let (out, _) = filter_sessions(
            sessions.clone(),
            &NavigationalRules::default(),
            &SpamRules::default(),
            off,
        );
        assert_eq!(out, sessions);
    }

    #[test]
    fn removal_that_exposes_a_fast_user_reaches_a_fixed_point() {
        // mean gap 50s before the navigational query goes, 3s after
        let sessions = vec![
            session(0, "u", &[("www.example.com", 0)]),
            session(1, "u", &[("lion", 97), ("lion cubs", 100)]),
        ];
        let (once, report) = filter_sessions(
            sessions,
            &NavigationalRules::default(),
            &SpamRules::default(),
            FilterSwitches::default(),
        );
        assert!(once.is_empty());
        assert!(report.passes >= 2);
    }

    #[test]
    fn rule_lists() {
        let set = read_rule_list("# sites\nGoogle\n\nbing # search\n".as_bytes()).unwrap();
        assert_eq!(set.into_iter().collect::<Vec<_>>(), ["bing", "google"]);
    }
}
