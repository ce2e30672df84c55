//! File-based pipeline stages. Each stage reads the artifacts of earlier
//! stages from the output directory and writes its own.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::{classify_disjoint, pair_features, read_labeled_pairs, train_eval};
use crate::eval::{
    compute_metrics, load_graph, read_judge_file, resolve_verdicts, sample_for_judges,
    write_judge_file, EvalSample, HyponymGraph, SampleConfig, Verdict,
};
use crate::extract::{extract_all, read_relations, write_relations, ExtractConfig};
use crate::filter::{
    filter_sessions, read_rule_list, FilterSwitches, NavigationalRules, SpamRules,
};
use crate::index::{build_indices, Indices};
use crate::ingest::{
    attach_result_counts, load_counts, parse_log, sort_records, write_generic, LogFormat, ParsedLog,
};
use crate::pattern::{detect_all, read_patterns, write_patterns, PatternKind};
use crate::session::{read_sessions, sessionize, write_sessions, GeometricParams, Session};
use crate::tree::{DecisionTree, TreeParams};
use crate::{Error, Result};

pub const RECORDS: &str = "records.tsv";
pub const SESSIONS: &str = "sessions.tsv";
pub const FILTERED: &str = "filtered.tsv";
pub const FILTER_REPORT: &str = "filter_report.json";
pub const INDEX: &str = "index.json";
pub const SPEC_TREE: &str = "spec_tree.json";
pub const GEN_TREE: &str = "gen_tree.json";
pub const TRAIN_REPORT: &str = "train_report.json";
pub const PATTERNS: &str = "patterns.tsv";
pub const RELATIONS: &str = "relations.tsv";
pub const DISCARDED: &str = "discarded.tsv";
pub const JUDGE_SAMPLE: &str = "judge_sample.tsv";
pub const METRICS_JSON: &str = "metrics.json";
pub const METRICS_TXT: &str = "metrics.txt";

/// What to do with sample rows nobody judged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnjudgedPolicy {
    /// Count them as not hyponymy.
    Deny,
    /// Refuse to compute metrics.
    Error,
}

/// Every path and threshold of a run. Defaults are the reference thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: Vec<PathBuf>,
    pub format: String,
    /// Optional `query \t count` sidecar filling missing result counts.
    pub counts: Option<PathBuf>,
    pub site_names: Option<PathBuf>,
    pub domain_suffixes: Option<PathBuf>,
    pub url_markers: Option<PathBuf>,
    pub labeled_pairs: Option<PathBuf>,
    pub graph: Option<PathBuf>,
    /// A judge file with both judge columns filled in.
    pub judgments: Option<PathBuf>,
    pub out_dir: PathBuf,

    /// Seconds after which temporal similarity reaches zero.
    pub max_timespan: u32,
    pub radius: f64,
    /// Result-count ratio for reformulation subsumption.
    pub subsumption_ratio: f64,

    pub min_total_chars: usize,
    pub max_term_chars: usize,
    pub max_terms: usize,
    /// Users averaging a shorter gap between queries are automated.
    pub min_avg_gap_seconds: u32,
    pub filter_navigational: bool,
    pub filter_spam: bool,
    pub filter_fast_users: bool,

    pub min_leaf: usize,
    pub max_depth: usize,
    pub holdout_fraction: f64,
    pub train_seed: u64,

    pub accept_zero_weight: bool,
    pub hyponym_not_shorter: bool,
    pub stoplist: Vec<String>,

    pub sample_per_kind: usize,
    pub sample_seed: u64,
    /// Path length cap for graph verification; 0 means unlimited.
    pub max_path_depth: usize,
    pub unjudged: UnjudgedPolicy,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let spam = SpamRules::default();
        let tree = TreeParams::default();
        PipelineConfig {
            input: Vec::new(),
            format: "generic".into(),
            counts: None,
            site_names: None,
            domain_suffixes: None,
            url_markers: None,
            labeled_pairs: None,
            graph: None,
            judgments: None,
            out_dir: PathBuf::from("out"),
            max_timespan: 1800,
            radius: 1.0,
            subsumption_ratio: 10.0,
            min_total_chars: spam.min_total_chars,
            max_term_chars: spam.max_term_chars,
            max_terms: spam.max_terms,
            min_avg_gap_seconds: spam.min_avg_gap_seconds,
            filter_navigational: true,
            filter_spam: true,
            filter_fast_users: true,
            min_leaf: tree.min_leaf,
            max_depth: tree.max_depth,
            holdout_fraction: 1.0 / 3.0,
            train_seed: 1,
            accept_zero_weight: false,
            hyponym_not_shorter: true,
            stoplist: Vec::new(),
            sample_per_kind: 500,
            sample_seed: 1,
            max_path_depth: 0,
            unjudged: UnjudgedPolicy::Deny,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.log_format()?;
        self.geometric().validate()?;
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(Error::config(msg)) };
        check(
            self.subsumption_ratio.is_finite() && self.subsumption_ratio >= 1.0,
            "subsumption_ratio must be at least 1",
        )?;
        check(self.max_terms >= 1, "max_terms must be at least 1")?;
        check(
            self.max_term_chars >= 1,
            "max_term_chars must be at least 1",
        )?;
        check(self.min_leaf >= 1, "min_leaf must be at least 1")?;
        check(self.max_depth >= 1, "max_depth must be at least 1")?;
        check(
            (0.0..1.0).contains(&self.holdout_fraction),
            "holdout_fraction must lie in [0, 1)",
        )?;
        check(
            self.sample_per_kind >= 1,
            "sample_per_kind must be at least 1",
        )?;
        Ok(())
    }

    pub fn log_format(&self) -> Result<LogFormat> {
        self.format.parse()
    }

    pub fn geometric(&self) -> GeometricParams {
        GeometricParams {
            max_timespan_seconds: self.max_timespan,
            radius: self.radius,
        }
    }

    pub fn spam_rules(&self) -> SpamRules {
        SpamRules {
            min_total_chars: self.min_total_chars,
            max_term_chars: self.max_term_chars,
            max_terms: self.max_terms,
            min_avg_gap_seconds: self.min_avg_gap_seconds,
        }
    }

    pub fn tree_params(&self) -> TreeParams {
        TreeParams {
            min_leaf: self.min_leaf,
            max_depth: self.max_depth,
        }
    }

    pub fn extract_config(&self) -> ExtractConfig {
        ExtractConfig {
            accept_zero_weight: self.accept_zero_weight,
            hyponym_not_shorter: self.hyponym_not_shorter,
            stoplist: self.stoplist.iter().map(|s| s.to_lowercase()).collect(),
        }
    }

    pub fn artifact(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    match File::open(path) {
        Ok(f) => Ok(BufReader::new(f)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            Err(Error::MissingArtifact(path.to_path_buf()))
        }
        Err(e) => Err(e.into()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// One line of stage accounting.
pub type StageSummary = String;

pub fn ingest(cfg: &PipelineConfig) -> Result<StageSummary> {
    if cfg.input.is_empty() {
        return Err(Error::config("no input logs configured"));
    }
    let format = cfg.log_format()?;
    let mut log = ParsedLog::default();
    for path in &cfg.input {
        log.merge(parse_log(open(path)?, format)?);
    }
    let mut records = log.records;
    if let Some(path) = &cfg.counts {
        attach_result_counts(&mut records, &load_counts(open(path)?)?);
    }
    sort_records(&mut records);
    write_generic(create(&cfg.artifact(RECORDS))?, &records)?;
    Ok(format!(
        "ingest: {} lines, {} malformed, {} records",
        log.lines,
        log.malformed,
        records.len()
    ))
}

pub fn sessionize_stage(cfg: &PipelineConfig) -> Result<StageSummary> {
    let log = parse_log(open(&cfg.artifact(RECORDS))?, LogFormat::Generic)?;
    let sessions = sessionize(&log.records, &cfg.geometric())?;
    write_sessions(create(&cfg.artifact(SESSIONS))?, &sessions)?;
    Ok(format!(
        "sessionize: {} records, {} sessions",
        log.records.len(),
        sessions.len()
    ))
}

fn navigational_rules(cfg: &PipelineConfig) -> Result<NavigationalRules> {
    let mut rules = NavigationalRules::default();
    if let Some(p) = &cfg.site_names {
        rules.site_names = read_rule_list(open(p)?)?;
    }
    if let Some(p) = &cfg.domain_suffixes {
        rules.domain_suffixes = read_rule_list(open(p)?)?;
    }
    if let Some(p) = &cfg.url_markers {
        rules.url_markers = read_rule_list(open(p)?)?;
    }
    Ok(rules)
}

pub fn filter_stage(cfg: &PipelineConfig) -> Result<StageSummary> {
    let sessions = read_sessions(open(&cfg.artifact(SESSIONS))?)?;
    let records_in: usize = sessions.iter().map(|s| s.records.len()).sum();
    let switches = FilterSwitches {
        navigational: cfg.filter_navigational,
        spam_queries: cfg.filter_spam,
        fast_users: cfg.filter_fast_users,
    };
    let (kept, report) = filter_sessions(
        sessions,
        &navigational_rules(cfg)?,
        &cfg.spam_rules(),
        switches,
    );
    write_sessions(create(&cfg.artifact(FILTERED))?, &kept)?;
    write_json(&cfg.artifact(FILTER_REPORT), &report)?;
    let records_out: usize = kept.iter().map(|s| s.records.len()).sum();
    Ok(format!(
        "filter: {} -> {} sessions, {} -> {} records (fast users {}, spam sessions {}, navigational queries {})",
        report.sessions_in,
        report.sessions_out,
        records_in,
        records_out,
        report.fast_users,
        report.sessions_dropped_spam,
        report.navigational_removed
    ))
}

pub fn index_stage(cfg: &PipelineConfig) -> Result<StageSummary> {
    let sessions = read_sessions(open(&cfg.artifact(FILTERED))?)?;
    let indices = build_indices(&sessions);
    indices.write_snapshot(create(&cfg.artifact(INDEX))?)?;
    Ok(format!(
        "index: {} queries, {} sessions, {} n-grams",
        indices.queries.len(),
        indices.sessions.len(),
        indices.ngrams.len()
    ))
}

fn load_index(cfg: &PipelineConfig) -> Result<Indices> {
    Indices::read_snapshot(open(&cfg.artifact(INDEX))?)
}

pub fn train_stage(cfg: &PipelineConfig) -> Result<StageSummary> {
    let Some(path) = &cfg.labeled_pairs else {
        return Ok("train: no labeled pairs configured, disjoint detection disabled".into());
    };
    let pairs = read_labeled_pairs(open(path)?)?;
    let indices = load_index(cfg)?;
    let rows: Vec<_> = pairs
        .iter()
        .map(|p| (pair_features(&p.q1, &p.q2, &indices), p.label))
        .collect();
    let trained = train_eval(
        &rows,
        cfg.tree_params(),
        cfg.holdout_fraction,
        cfg.train_seed,
    )?;
    std::fs::write(cfg.artifact(SPEC_TREE), trained.spec_tree.to_json() + "\n")?;
    std::fs::write(cfg.artifact(GEN_TREE), trained.gen_tree.to_json() + "\n")?;
    write_json(&cfg.artifact(TRAIN_REPORT), &trained.report)?;
    let r = &trained.report;
    Ok(format!(
        "train: {} labeled pairs, {} usable, {} train / {} holdout, cascade accuracy {:.3}",
        pairs.len(),
        r.usable_pairs,
        r.train_size,
        r.test_size,
        r.cascade_accuracy
    ))
}

#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectReport {
    pub sessions: usize,
    pub patterns: BTreeMap<PatternKind, usize>,
    pub disjoint_candidates: usize,
    pub missing_counts: usize,
}

pub fn detect_stage(cfg: &PipelineConfig) -> Result<StageSummary> {
    let indices = load_index(cfg)?;
    let sessions: Vec<Session> = indices.to_sessions();
    let detection = detect_all(&sessions, cfg.subsumption_ratio);
    let mut patterns = detection.patterns;
    if cfg.labeled_pairs.is_some() {
        let spec = DecisionTree::from_json(&std::fs::read_to_string(existing(
            &cfg.artifact(SPEC_TREE),
        )?)?)?;
        let gen = DecisionTree::from_json(&std::fs::read_to_string(existing(
            &cfg.artifact(GEN_TREE),
        )?)?)?;
        patterns.extend(classify_disjoint(
            &detection.disjoint,
            &indices,
            &spec,
            &gen,
        ));
        patterns.sort_by_key(|p| p.session_id);
    }
    write_patterns(create(&cfg.artifact(PATTERNS))?, &patterns)?;
    let mut report = DetectReport {
        sessions: sessions.len(),
        disjoint_candidates: detection.disjoint.len(),
        missing_counts: detection.missing_counts,
        ..Default::default()
    };
    for kind in PatternKind::ALL {
        report
            .patterns
            .insert(kind, patterns.iter().filter(|p| p.kind == kind).count());
    }
    let line = format!(
        "detect: {} sessions, {} patterns (trivial {}, reformulation {}, disjoint {}), {} disjoint candidates, {} missing counts",
        report.sessions,
        patterns.len(),
        report.patterns[&PatternKind::Trivial],
        report.patterns[&PatternKind::WithReformulation],
        report.patterns[&PatternKind::Disjoint],
        report.disjoint_candidates,
        report.missing_counts
    );
    Ok(line)
}

fn existing(path: &Path) -> Result<&Path> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::MissingArtifact(path.to_path_buf()))
    }
}

pub fn extract_stage(cfg: &PipelineConfig) -> Result<StageSummary> {
    let patterns = read_patterns(open(&cfg.artifact(PATTERNS))?)?;
    let ex = extract_all(&patterns, &cfg.extract_config());
    let distinct: BTreeSet<(&str, &str)> = ex
        .relations
        .iter()
        .map(|r| (r.hypernym.as_str(), r.hyponym.as_str()))
        .collect();
    write_relations(create(&cfg.artifact(RELATIONS))?, &ex.relations)?;
    write_relations(create(&cfg.artifact(DISCARDED))?, &ex.discarded)?;
    Ok(format!(
        "extract: {} patterns ({} distinct), {} relations extracted, {} distinct, {} barren, {} discarded candidates",
        ex.patterns,
        ex.distinct_patterns,
        ex.total_extracted(),
        distinct.len(),
        ex.barren,
        ex.discarded.len()
    ))
}

pub fn evaluate_stage(cfg: &PipelineConfig) -> Result<StageSummary> {
    let relations = read_relations(open(&cfg.artifact(RELATIONS))?)?;
    let discarded = read_relations(open(&cfg.artifact(DISCARDED))?)?;
    let patterns = read_patterns(open(&cfg.artifact(PATTERNS))?)?;
    let graph = match &cfg.graph {
        Some(p) => load_graph(open(p)?)?,
        None => HyponymGraph::default(),
    };
    let sample_cfg = SampleConfig {
        per_kind: cfg.sample_per_kind,
        seed: cfg.sample_seed,
        max_depth: (cfg.max_path_depth > 0).then_some(cfg.max_path_depth),
    };
    let sample = sample_for_judges(&relations, &discarded, &graph, &sample_cfg);
    write_judge_file(create(&cfg.artifact(JUDGE_SAMPLE))?, &sample)?;

    let mut judged: EvalSample = match &cfg.judgments {
        Some(p) => read_judge_file(open(p)?)?,
        None => sample,
    };
    let pending = resolve_verdicts(&mut judged);
    if pending > 0 {
        match cfg.unjudged {
            UnjudgedPolicy::Error => {
                return Err(Error::data(format!("{pending} sample rows are not judged")));
            }
            UnjudgedPolicy::Deny => {
                log::warn!("{pending} unjudged sample rows counted as not hyponymy");
                for r in judged
                    .rows
                    .iter_mut()
                    .filter(|r| r.verdict == Verdict::Pending)
                {
                    r.verdict = Verdict::Unrelated;
                }
            }
        }
    }
    let mut populations = BTreeMap::new();
    for p in &patterns {
        *populations.entry(p.kind).or_insert(0u64) += 1;
    }
    let metrics = compute_metrics(&judged, &populations)?;
    write_json(&cfg.artifact(METRICS_JSON), &metrics)?;
    let mut report = metrics.report();
    if pending > 0 {
        report.push_str(&format!(
            "\n{pending} unjudged rows counted as not hyponymy\n"
        ));
    }
    std::fs::write(cfg.artifact(METRICS_TXT), report)?;
    let p = metrics
        .micro
        .precision
        .map_or("n/a".into(), |v| format!("{v:.3}"));
    let r = metrics
        .micro
        .recall
        .map_or("n/a".into(), |v| format!("{v:.3}"));
    Ok(format!(
        "evaluate: {} sampled rows, {} unjudged, micro P {p} R {r}",
        judged.rows.len(),
        pending
    ))
}

/// Corpus summary over whichever artifacts exist.
pub fn stats(cfg: &PipelineConfig) -> Result<String> {
    let mut lines = Vec::new();
    let path = cfg.artifact(RECORDS);
    if path.exists() {
        let log = parse_log(open(&path)?, LogFormat::Generic)?;
        let users: BTreeSet<&str> = log.records.iter().map(|r| r.user_id.as_str()).collect();
        lines.push(format!(
            "records\t{}\nusers\t{}",
            log.records.len(),
            users.len()
        ));
    }
    for (name, label) in [(SESSIONS, "sessions"), (FILTERED, "filtered_sessions")] {
        let path = cfg.artifact(name);
        if path.exists() {
            let s = read_sessions(open(&path)?)?;
            let n: usize = s.iter().map(|s| s.records.len()).sum();
            lines.push(format!("{label}\t{}\n{label}_records\t{n}", s.len()));
        }
    }
    let path = cfg.artifact(PATTERNS);
    if path.exists() {
        let patterns = read_patterns(open(&path)?)?;
        lines.push(format!("patterns\t{}", patterns.len()));
        for kind in PatternKind::ALL {
            let n = patterns.iter().filter(|p| p.kind == kind).count();
            lines.push(format!("patterns_{kind}\t{n}"));
        }
    }
    let path = cfg.artifact(RELATIONS);
    if path.exists() {
        let rel = read_relations(open(&path)?)?;
        let total: usize = rel.iter().map(|r| r.support).sum();
        let distinct: BTreeSet<(&str, &str)> = rel
            .iter()
            .map(|r| (r.hypernym.as_str(), r.hyponym.as_str()))
            .collect();
        lines.push(format!("relations_total\t{total}"));
        lines.push(format!("relations_distinct\t{}", distinct.len()));
        for kind in PatternKind::ALL {
            let n: usize = rel
                .iter()
                .filter(|r| r.kind == kind)
                .map(|r| r.support)
                .sum();
            lines.push(format!("relations_{kind}\t{n}"));
        }
        if total > 0 {
            lines.push(format!(
                "distinct_ratio\t{:.4}",
                distinct.len() as f64 / total as f64
            ));
        }
    }
    if lines.is_empty() {
        return Err(Error::MissingArtifact(cfg.artifact(RECORDS)));
    }
    Ok(lines.join("\n") + "\n")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Sessionize,
    Filter,
    Index,
    Train,
    Detect,
    Extract,
    Evaluate,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Ingest,
        Stage::Sessionize,
        Stage::Filter,
        Stage::Index,
        Stage::Train,
        Stage::Detect,
        Stage::Extract,
        Stage::Evaluate,
    ];

    pub fn run(self, cfg: &PipelineConfig) -> Result<StageSummary> {
        match self {
            Stage::Ingest => ingest(cfg),
            Stage::Sessionize => sessionize_stage(cfg),
            Stage::Filter => filter_stage(cfg),
            Stage::Index => index_stage(cfg),
            Stage::Train => train_stage(cfg),
            Stage::Detect => detect_stage(cfg),
            Stage::Extract => extract_stage(cfg),
            Stage::Evaluate => evaluate_stage(cfg),
        }
    }
}

/// Every stage in order. The configuration is checked before any work.
pub fn run_all(cfg: &PipelineConfig) -> Result<Vec<StageSummary>> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    Stage::ALL.iter().map(|s| s.run(cfg)).collect()
}
