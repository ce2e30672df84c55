//! Evaluation against a reference hyponym graph and human judges.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::extract::HyponymyRelation;
use crate::pattern::PatternKind;
use crate::text::stem;
use crate::{Error, Result};

/// Arcs go from a hyponym to its direct hypernyms. Vertices are stemmed.
#[derive(Debug, Default, Clone)]
pub struct HyponymGraph {
    arcs: BTreeMap<String, BTreeSet<String>>,
    pub skipped_lines: usize,
    pub self_loops: usize,
}

fn vertex(term: &str) -> String {
    stem(&term.replace('_', " ").to_lowercase())
}

impl HyponymGraph {
    /// Adds `hyponym -> hypernym` after stemming. Returns false for
    /// self-loops, which are dropped.
    pub fn add_edge(&mut self, hyponym: &str, hypernym: &str) -> bool {
        let (a, b) = (vertex(hyponym), vertex(hypernym));
        if a.is_empty() || b.is_empty() {
            return false;
        }
        if a == b {
            log::warn!("dropping self-loop `{hyponym}` -> `{hypernym}` (both stem to `{a}`)");
            self.self_loops += 1;
            return false;
        }
        self.arcs.entry(b.clone()).or_default();
        self.arcs.entry(a).or_default().insert(b);
        true
    }

    pub fn contains(&self, term: &str) -> bool {
        self.arcs.contains_key(&vertex(term))
    }

    pub fn vertex_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn edge_count(&self) -> usize {
        self.arcs.values().map(BTreeSet::len).sum()
    }

    /// Length of the shortest directed path from the hyponym to the
    /// hypernym, both stemmed first.
    pub fn path_length(
        &self,
        hypernym: &str,
        hyponym: &str,
        max_depth: Option<usize>,
    ) -> Option<usize> {
        let (from, to) = (vertex(hyponym), vertex(hypernym));
        if !self.arcs.contains_key(&from) || !self.arcs.contains_key(&to) || from == to {
            return None;
        }
        let mut seen = BTreeSet::from([from.as_str()]);
        let mut queue = VecDeque::from([(from.as_str(), 0usize)]);
        while let Some((v, d)) = queue.pop_front() {
            if max_depth.is_some_and(|m| d >= m) {
                continue;
            }
            for next in &self.arcs[v] {
                if *next == to {
                    return Some(d + 1);
                }
                if seen.insert(next) {
                    queue.push_back((next, d + 1));
                }
            }
        }
        None
    }

    pub fn verify(&self, hypernym: &str, hyponym: &str, max_depth: Option<usize>) -> Verification {
        match self.path_length(hypernym, hyponym, max_depth) {
            Some(_) => Verification::Confirmed,
            None => Verification::NotFound,
        }
    }
}

/// Reads `hyponym \t hypernym` edges. Malformed lines are counted and
/// skipped.
pub fn load_graph<R: BufRead>(input: R) -> Result<HyponymGraph> {
    let mut g = HyponymGraph::default();
    for line in input.lines() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split('\t').collect::<Vec<_>>()[..] {
            [a, b] if !a.trim().is_empty() && !b.trim().is_empty() => {
                g.add_edge(a, b);
            }
            _ => g.skipped_lines += 1,
        }
    }
    if g.skipped_lines > 0 {
        log::warn!("skipped {} malformed graph lines", g.skipped_lines);
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verification {
    Confirmed,
    NotFound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    GraphConfirmed,
    JudgeConfirmed,
    CoHyponym,
    OtherRelation,
    Unrelated,
    Pending,
}

impl Verdict {
    pub const ALL: [Verdict; 6] = [
        Verdict::GraphConfirmed,
        Verdict::JudgeConfirmed,
        Verdict::CoHyponym,
        Verdict::OtherRelation,
        Verdict::Unrelated,
        Verdict::Pending,
    ];

    pub fn is_hyponymy(self) -> bool {
        matches!(self, Verdict::GraphConfirmed | Verdict::JudgeConfirmed)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::GraphConfirmed => "graph_confirmed",
            Verdict::JudgeConfirmed => "judge_confirmed",
            Verdict::CoHyponym => "co_hyponym",
            Verdict::OtherRelation => "other_relation",
            Verdict::Unrelated => "unrelated",
            Verdict::Pending => "pending",
        }
    }
}

/// One cell of a judge column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JudgeCall {
    /// Pre-filled for rows the reference graph confirmed.
    Graph,
    Hyponymy,
    CoHyponym,
    Other,
    Unrelated,
}

impl FromStr for JudgeCall {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "graph" => Ok(JudgeCall::Graph),
            "h" | "y" | "yes" | "hyponymy" => Ok(JudgeCall::Hyponymy),
            "c" | "co-hyponym" | "cohyponym" | "co_hyponym" => Ok(JudgeCall::CoHyponym),
            "o" | "other" => Ok(JudgeCall::Other),
            "u" | "n" | "no" | "unrelated" => Ok(JudgeCall::Unrelated),
            other => Err(Error::data(format!("unknown judge call `{other}`"))),
        }
    }
}

impl fmt::Display for JudgeCall {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            JudgeCall::Graph => "graph",
            JudgeCall::Hyponymy => "hyponymy",
            JudgeCall::CoHyponym => "co-hyponym",
            JudgeCall::Other => "other",
            JudgeCall::Unrelated => "unrelated",
        })
    }
}

fn denial(call: JudgeCall) -> Verdict {
    match call {
        JudgeCall::CoHyponym => Verdict::CoHyponym,
        JudgeCall::Other => Verdict::OtherRelation,
        _ => Verdict::Unrelated,
    }
}

/// The two-judge resolution rule. A missing call leaves the row pending.
pub fn resolve_pair(j1: Option<JudgeCall>, j2: Option<JudgeCall>) -> Verdict {
    use JudgeCall::*;
    let (Some(a), Some(b)) = (j1, j2) else {
        return Verdict::Pending;
    };
    match (a, b) {
        (Graph, _) | (_, Graph) => Verdict::GraphConfirmed,
        (Hyponymy, Hyponymy) => Verdict::JudgeConfirmed,
        (Hyponymy, d) | (d, Hyponymy) => denial(d),
        (a, b) if a == b => denial(a),
        _ => Verdict::Unrelated,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pool {
    /// Selected by the extractor.
    Extracted,
    Discarded,
}

impl Pool {
    fn code(self) -> &'static str {
        match self {
            Pool::Extracted => "E",
            Pool::Discarded => "D",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub kind: PatternKind,
    pub hypernym: String,
    pub hyponym: String,
    pub weight: f64,
    pub pool: Pool,
    pub judges: [Option<JudgeCall>; 2],
    pub verdict: Verdict,
}

#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSample {
    pub rows: Vec<SampleRow>,
}

impl EvalSample {
    pub fn pending(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.verdict == Verdict::Pending)
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub per_kind: usize,
    pub seed: u64,
    pub max_depth: Option<usize>,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            per_kind: 500,
            seed: 0,
            max_depth: None,
        }
    }
}

fn draw<'a>(
    pool: &[&'a HyponymyRelation],
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<&'a HyponymyRelation> {
    let mut idx = rand::seq::index::sample(rng, pool.len(), n).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| pool[i]).collect()
}

/// Seeded sampling without replacement, stratified by kind, with the same
/// number of extracted and discarded rows per kind. Rows the graph confirms
/// get their verdict immediately; the rest stay pending for the judges.
pub fn sample_for_judges(
    relations: &[HyponymyRelation],
    discarded: &[HyponymyRelation],
    graph: &HyponymGraph,
    config: &SampleConfig,
) -> EvalSample {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut rows = Vec::new();
    for kind in PatternKind::ALL {
        let e: Vec<&HyponymyRelation> = relations.iter().filter(|r| r.kind == kind).collect();
        let d: Vec<&HyponymyRelation> = discarded.iter().filter(|r| r.kind == kind).collect();
        let n = config.per_kind.min(e.len()).min(d.len());
        if e.is_empty() || d.is_empty() {
            log::warn!("{kind}: empty extracted or discarded pool, nothing sampled");
            continue;
        }
        if n < config.per_kind {
            log::warn!(
                "{kind}: sample truncated to {n} per pool (pools hold {} extracted, {} discarded)",
                e.len(),
                d.len()
            );
        }
        for (pool, items) in [(Pool::Extracted, &e), (Pool::Discarded, &d)] {
            for r in draw(items, n, &mut rng) {
                let confirmed = graph.verify(&r.hypernym, &r.hyponym, config.max_depth)
                    == Verification::Confirmed;
                let (judges, verdict) = if confirmed {
                    ([Some(JudgeCall::Graph); 2], Verdict::GraphConfirmed)
                } else {
                    ([None, None], Verdict::Pending)
                };
                rows.push(SampleRow {
                    kind,
                    hypernym: r.hypernym.clone(),
                    hyponym: r.hyponym.clone(),
                    weight: r.weight,
                    pool,
                    judges,
                    verdict,
                });
            }
        }
    }
    EvalSample { rows }
}

/// Recomputes every verdict from the judge columns. Returns the number of
/// rows still pending.
pub fn resolve_verdicts(sample: &mut EvalSample) -> usize {
    for r in &mut sample.rows {
        r.verdict = resolve_pair(r.judges[0], r.judges[1]);
    }
    sample.pending()
}

/// `kind, hypernym, hyponym, weight, pool(E|D), judge1, judge2` rows.
pub fn write_judge_file<W: Write>(mut out: W, sample: &EvalSample) -> Result<()> {
    let cell = |j: Option<JudgeCall>| j.map(|j| j.to_string()).unwrap_or_default();
    for r in &sample.rows {
        writeln!(
            out,
            "{}\t{}\t{}\t{:.6}\t{}\t{}\t{}",
            r.kind,
            r.hypernym,
            r.hyponym,
            r.weight,
            r.pool.code(),
            cell(r.judges[0]),
            cell(r.judges[1])
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a judge file and resolves every row.
pub fn read_judge_file<R: BufRead>(input: R) -> Result<EvalSample> {
    let mut rows = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let bad = |what: &str| Error::data(format!("judge file line {}: {what}", n + 1));
        let mut cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 5 || cols.len() > 7 {
            return Err(bad("expected 7 columns"));
        }
        cols.resize(7, "");
        let judge = |c: &str| -> Result<Option<JudgeCall>> {
            if c.trim().is_empty() {
                Ok(None)
            } else {
                c.parse().map(Some)
            }
        };
        let judges = [judge(cols[5])?, judge(cols[6])?];
        rows.push(SampleRow {
            kind: cols[0].parse()?,
            hypernym: cols[1].to_string(),
            hyponym: cols[2].to_string(),
            weight: cols[3].parse().map_err(|_| bad("bad weight"))?,
            pool: match cols[4] {
                "E" => Pool::Extracted,
                "D" => Pool::Discarded,
                _ => return Err(bad("pool must be E or D")),
            },
            judges,
            verdict: resolve_pair(judges[0], judges[1]),
        });
    }
    let sample = EvalSample { rows };
    let pending = sample.pending();
    if pending > 0 {
        log::warn!("{pending} judge rows are incomplete");
    }
    Ok(sample)
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// `(1 + b^2) P R / (b^2 P + R)`; undefined when P and R are both zero.
pub fn f_beta(p: f64, r: f64, beta: f64) -> Option<f64> {
    let b2 = beta * beta;
    let den = b2 * p + r;
    (den > 0.0).then(|| (1.0 + b2) * p * r / den)
}

impl Counts {
    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn scores(&self) -> Scores {
        Scores::from_pr(self.precision(), self.recall())
    }

    fn add(&mut self, o: &Counts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.tn += o.tn;
    }
}

/// `None` marks an undefined value (an empty denominator).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub f05: Option<f64>,
}

impl Scores {
    pub fn from_pr(p: Option<f64>, r: Option<f64>) -> Scores {
        let f = |beta| match (p, r) {
            (Some(p), Some(r)) => f_beta(p, r, beta),
            _ => None,
        };
        Scores {
            precision: p,
            recall: r,
            f1: f(1.0),
            f05: f(0.5),
        }
    }
}

/// Averages each score over kinds weighted by `N_i / N`. A score that is
/// undefined for some weighted kind is undefined overall.
pub fn macro_average(items: &[(f64, Scores)]) -> Option<Scores> {
    let total: f64 = items.iter().map(|(n, _)| n).sum();
    if total <= 0.0 {
        return None;
    }
    let avg = |get: fn(&Scores) -> Option<f64>| -> Option<f64> {
        items
            .iter()
            .filter(|(n, _)| *n > 0.0)
            .map(|(n, s)| get(s).map(|v| v * n / total))
            .sum()
    };
    Some(Scores {
        precision: avg(|s| s.precision),
        recall: avg(|s| s.recall),
        f1: avg(|s| s.f1),
        f05: avg(|s| s.f05),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindMetrics {
    pub kind: PatternKind,
    pub extracted: usize,
    pub discarded: usize,
    pub counts: Counts,
    pub scores: Scores,
    /// Verdict tallies for the extracted and discarded samples.
    pub extracted_verdicts: BTreeMap<Verdict, usize>,
    pub discarded_verdicts: BTreeMap<Verdict, usize>,
    /// Pattern population of the kind, for the macro average.
    pub population: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub per_kind: Vec<KindMetrics>,
    pub micro_counts: Counts,
    pub micro: Scores,
    pub macro_avg: Option<Scores>,
}

/// Confusion counts and verdict tallies per kind. Every row must have a
/// final verdict. `populations` holds the pattern count per kind.
pub fn compute_metrics(
    sample: &EvalSample,
    populations: &BTreeMap<PatternKind, u64>,
) -> Result<Metrics> {
    let pending = sample.pending();
    if pending > 0 {
        return Err(Error::data(format!(
            "{pending} sample rows have no verdict yet"
        )));
    }
    let mut per_kind = Vec::new();
    for kind in PatternKind::ALL {
        let rows: Vec<&SampleRow> = sample.rows.iter().filter(|r| r.kind == kind).collect();
        let mut counts = Counts::default();
        let mut ev = BTreeMap::new();
        let mut dv = BTreeMap::new();
        for r in &rows {
            let ok = r.verdict.is_hyponymy();
            match (r.pool, ok) {
                (Pool::Extracted, true) => counts.tp += 1,
                (Pool::Extracted, false) => counts.fp += 1,
                (Pool::Discarded, true) => counts.fn_ += 1,
                (Pool::Discarded, false) => counts.tn += 1,
            }
            let tally = if r.pool == Pool::Extracted {
                &mut ev
            } else {
                &mut dv
            };
            *tally.entry(r.verdict).or_insert(0) += 1;
        }
        per_kind.push(KindMetrics {
            kind,
            extracted: rows.iter().filter(|r| r.pool == Pool::Extracted).count(),
            discarded: rows.iter().filter(|r| r.pool == Pool::Discarded).count(),
            counts,
            scores: counts.scores(),
            extracted_verdicts: ev,
            discarded_verdicts: dv,
            population: populations.get(&kind).copied().unwrap_or(0),
        });
    }
    Ok(aggregate(per_kind))
}

/// Micro and macro aggregates over per-kind rows.
pub fn aggregate(per_kind: Vec<KindMetrics>) -> Metrics {
    let mut micro_counts = Counts::default();
    for k in &per_kind {
        micro_counts.add(&k.counts);
    }
    let weighted: Vec<(f64, Scores)> = per_kind
        .iter()
        .map(|k| (k.population as f64, k.scores))
        .collect();
    Metrics {
        micro: micro_counts.scores(),
        micro_counts,
        macro_avg: macro_average(&weighted),
        per_kind,
    }
}

/// Per-kind metrics straight from confusion counts, with no sample behind
/// them.
pub fn kind_metrics(kind: PatternKind, counts: Counts, population: u64) -> KindMetrics {
    KindMetrics {
        kind,
        extracted: counts.tp + counts.fp,
        discarded: counts.fn_ + counts.tn,
        counts,
        scores: counts.scores(),
        extracted_verdicts: BTreeMap::new(),
        discarded_verdicts: BTreeMap::new(),
        population,
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3}"))
}

impl Metrics {
    /// Plain-text tables: extracted and discarded breakdowns, then micro and
    /// macro scores.
    pub fn report(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::new();
        let tally = |m: &BTreeMap<Verdict, usize>, v| m.get(&v).copied().unwrap_or(0);
        let _ = writeln!(s, "extracted sample (E)");
        let _ = writeln!(
            s,
            "kind\twrong\tco-hyponym\tother\tunrelated\tcorrect\tgraph\tjudges"
        );
        for k in &self.per_kind {
            let e = &k.extracted_verdicts;
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                k.kind,
                k.counts.fp,
                tally(e, Verdict::CoHyponym),
                tally(e, Verdict::OtherRelation),
                tally(e, Verdict::Unrelated),
                k.counts.tp,
                tally(e, Verdict::GraphConfirmed),
                tally(e, Verdict::JudgeConfirmed)
            );
        }
        let _ = writeln!(s, "\ndiscarded sample (D)");
        let _ = writeln!(
            s,
            "kind\twrong\tgraph\tjudges\tcorrect\tco-hyponym\tother\tunrelated"
        );
        for k in &self.per_kind {
            let d = &k.discarded_verdicts;
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                k.kind,
                k.counts.fn_,
                tally(d, Verdict::GraphConfirmed),
                tally(d, Verdict::JudgeConfirmed),
                k.counts.tn,
                tally(d, Verdict::CoHyponym),
                tally(d, Verdict::OtherRelation),
                tally(d, Verdict::Unrelated)
            );
        }
        let _ = writeln!(s, "\nmicro-averaged");
        let _ = writeln!(s, "kind\t|E|\t|D|\tTP\tFP\tFN\tP\tR\tF1\tF0.5");
        let mut line = |name: &str, e: usize, d: usize, c: &Counts, sc: &Scores| {
            let _ = writeln!(
                s,
                "{name}\t{e}\t{d}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                c.tp,
                c.fp,
                c.fn_,
                cell(sc.precision),
                cell(sc.recall),
                cell(sc.f1),
                cell(sc.f05)
            );
        };
        for k in &self.per_kind {
            line(
                k.kind.as_str(),
                k.extracted,
                k.discarded,
                &k.counts,
                &k.scores,
            );
        }
        let (e, d) = (
            self.per_kind.iter().map(|k| k.extracted).sum(),
            self.per_kind.iter().map(|k| k.discarded).sum(),
        );
        line("aggregated", e, d, &self.micro_counts, &self.micro);
        let _ = writeln!(s, "\nmacro-averaged");
        let _ = writeln!(s, "kind\tN_i\tP\tR\tF1\tF0.5");
        let total: u64 = self.per_kind.iter().map(|k| k.population).sum();
        for k in &self.per_kind {
            let share = |v: Option<f64>| {
                cell(
                    v.filter(|_| total > 0)
                        .map(|v| v * k.population as f64 / total as f64),
                )
            };
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}",
                k.kind,
                k.population,
                share(k.scores.precision),
                share(k.scores.recall),
                share(k.scores.f1),
                share(k.scores.f05)
            );
        }
        match &self.macro_avg {
            Some(m) => {
                let _ = writeln!(
                    s,
                    "aggregated\t{total}\t{}\t{}\t{}\t{}",
                    cell(m.precision),
                    cell(m.recall),
                    cell(m.f1),
                    cell(m.f05)
                );
            }
            None => {
                let _ = writeln!(s, "aggregated\t{total}\tn/a\tn/a\tn/a\tn/a");
            }
        }
        s
    }
}
