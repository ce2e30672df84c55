//! Inputs shared by the benchmarks.

use querytax_core::filter::{filter_sessions, FilterSwitches, NavigationalRules, SpamRules};
use querytax_core::pattern::detect_all;
use querytax_core::session::{sessionize, GeometricParams};
use querytax_core::synth::{generate, SynthConfig};
use querytax_core::{QueryRecord, ReformulationPattern, Session};

/// A seeded synthetic log of about `queries` records.
pub fn records(queries: usize) -> Vec<QueryRecord> {
    generate(&SynthConfig {
        target_queries: queries,
        noise_vocabulary: (queries / 25).clamp(50, 4000),
        ..Default::default()
    })
    .records
}

pub fn filtered_sessions(queries: usize) -> Vec<Session> {
    let sessions =
        sessionize(&records(queries), &GeometricParams::default()).expect("sorted records");
    filter_sessions(
        sessions,
        &NavigationalRules::default(),
        &SpamRules::default(),
        FilterSwitches::default(),
    )
    .0
}

pub fn patterns(queries: usize) -> Vec<ReformulationPattern> {
    detect_all(&filtered_sessions(queries), 10.0).patterns
}
