//! Stems of a frozen vocabulary produced by an independent reference
//! implementation of the original Porter algorithm.

use querytax_core::text::stem_word;

#[test]
fn matches_reference_stems() {
    let data = include_str!("data/porter_vocab.tsv");
    let mut mismatches = Vec::new();
    let mut n = 0;
    for line in data.lines() {
        let (word, want) = line.split_once('\t').expect("two columns");
        n += 1;
        let got = stem_word(word);
        if got != want {
            mismatches.push(format!("{word}: got {got}, want {want}"));
        }
    }
    assert!(n > 1000);
    assert!(
        mismatches.is_empty(),
        "{} of {n} differ:\n{}",
        mismatches.len(),
        mismatches.join("\n")
    );
}
