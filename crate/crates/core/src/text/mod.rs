//! String primitives shared by the sessionizer, the feature extractor, the
//! relation extractor and the evaluator.

mod porter;
mod soundex;

use std::collections::{BTreeMap, BTreeSet};

pub use porter::{stem, stem_word};
pub use soundex::soundex;

/// Multiset of grams, kept ordered so that iteration (and anything derived
/// from it) is deterministic.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GramVector(BTreeMap<String, u32>);

impl GramVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, gram: impl Into<String>) {
        *self.0.entry(gram.into()).or_insert(0) += 1;
    }

    pub fn count(&self, gram: &str) -> u32 {
        self.0.get(gram).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.0.iter().map(|(g, c)| (g.as_str(), *c))
    }
}

impl<S: Into<String>> FromIterator<S> for GramVector {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let mut v = GramVector::new();
        for g in iter {
            v.add(g);
        }
        v
    }
}

/// Character 3-grams of a normalized string: a sliding window of width 3,
/// interior spaces included, no padding. Strings shorter than three
/// characters yield a single gram holding the whole string.
///
/// Panics on an empty string.
pub fn char_3grams(s: &str) -> GramVector {
    assert!(!s.is_empty(), "char_3grams: empty string");
    let chars: Vec<char> = s.chars().collect();
    if chars.len() < 3 {
        return std::iter::once(s).collect();
    }
    chars
        .windows(3)
        .map(|w| w.iter().collect::<String>())
        .collect()
}

/// Cosine similarity of two count vectors, clamped to `[0, 1]`.
///
/// Panics if either vector is empty.
pub fn cosine(a: &GramVector, b: &GramVector) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "cosine: empty vector");
    let mut dot = 0u64;
    let (mut ia, mut ib) = (a.0.iter().peekable(), b.0.iter().peekable());
    while let (Some((ka, ca)), Some((kb, cb))) = (ia.peek(), ib.peek()) {
        match ka.cmp(kb) {
            std::cmp::Ordering::Less => {
                ia.next();
            }
            std::cmp::Ordering::Greater => {
                ib.next();
            }
            std::cmp::Ordering::Equal => {
                dot += u64::from(**ca) * u64::from(**cb);
                ia.next();
                ib.next();
            }
        }
    }
    let na: u64 = a.0.values().map(|&c| u64::from(c) * u64::from(c)).sum();
    let nb: u64 = b.0.values().map(|&c| u64::from(c) * u64::from(c)).sum();
    // sqrt of the product keeps identical vectors at exactly 1.0
    let sim = dot as f64 / ((na as f64) * (nb as f64)).sqrt();
    sim.clamp(0.0, 1.0)
}

/// `|a ∩ b| / |a ∪ b|`, with two empty sets scoring 0.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// `|a ∩ b|`.
pub fn overlap<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> usize {
    a.intersection(b).count()
}

/// Whitespace-separated terms of a normalized query.
pub fn terms(q: &str) -> Vec<&str> {
    q.split_whitespace().collect()
}

pub fn term_set(q: &str) -> BTreeSet<&str> {
    q.split_whitespace().collect()
}

/// One contiguous term n-gram of a query.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TermGram {
    pub text: String,
    /// Offset of the first term.
    pub start: usize,
    /// Length in terms.
    pub len: usize,
}

/// Every contiguous term n-gram of `q`, shortest first and left to right
/// within a length: a k-term query yields k(k+1)/2 grams.
pub fn term_ngrams(q: &str) -> Vec<TermGram> {
    let words = terms(q);
    let k = words.len();
    let mut out = Vec::with_capacity(k * (k + 1) / 2);
    for len in 1..=k {
        for start in 0..=(k - len) {
            out.push(TermGram {
                text: words[start..start + len].join(" "),
                start,
                len,
            });
        }
    }
    out
}

/// True when `needle`'s terms appear as a contiguous run inside `haystack`'s
/// terms. Matching is on whole terms, so "car" is not inside "carpet".
pub fn contains_terms(haystack: &[&str], needle: &[&str]) -> bool {
    if needle.is_empty() {
        return true;
    }
    needle.len() <= haystack.len() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// Term-level substring test on normalized strings.
pub fn is_term_substring(needle: &str, haystack: &str) -> bool {
    contains_terms(&terms(haystack), &terms(needle))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set<'a>(items: &[&'a str]) -> BTreeSet<&'a str> {
        items.iter().copied().collect()
    }

    #[test]
    fn char_grams_examples() {
        let v = char_3grams("abcd");
        assert_eq!(v.iter().collect::<Vec<_>>(), vec![("abc", 1), ("bcd", 1)]);
        assert_eq!(
            char_3grams("ab").iter().collect::<Vec<_>>(),
            vec![("ab", 1)]
        );
        assert_eq!(
            char_3grams("aaaa").iter().collect::<Vec<_>>(),
            vec![("aaa", 2)]
        );
        // interior space is part of the window
        assert_eq!(char_3grams("a b").count("a b"), 1);
    }

    #[test]
    #[should_panic]
    fn char_grams_reject_empty() {
        char_3grams("");
    }

    #[test]
    fn cosine_examples() {
        let v = char_3grams("tropical fish food");
        assert_eq!(cosine(&v, &v), 1.0);
        assert_eq!(cosine(&char_3grams("abcd"), &char_3grams("wxyz")), 0.0);
        assert!((cosine(&char_3grams("abcd"), &char_3grams("abce")) - 0.5).abs() < 1e-12);
    }

    #[test]
    #[should_panic]
    fn cosine_rejects_empty() {
        cosine(&GramVector::new(), &char_3grams("abc"));
    }

    #[test]
    fn jaccard_and_overlap() {
        assert!((jaccard(&set(&["a", "b"]), &set(&["b", "c"])) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(overlap(&set(&["a", "b"]), &set(&["b", "c"])), 1);
        assert_eq!(jaccard::<&str>(&set(&[]), &set(&[])), 0.0);
        assert_eq!(jaccard(&set(&["a"]), &set(&["a"])), 1.0);
    }

    #[test]
    fn term_ngrams_examples() {
        let texts = |q| {
            term_ngrams(q)
                .into_iter()
                .map(|g| g.text)
                .collect::<Vec<_>>()
        };
        assert_eq!(texts("luxury cars"), vec!["luxury", "cars", "luxury cars"]);
        assert_eq!(
            texts("american luxury cars"),
            vec![
                "american",
                "luxury",
                "cars",
                "american luxury",
                "luxury cars",
                "american luxury cars"
            ]
        );
        assert_eq!(texts("lion"), vec!["lion"]);
    }

    #[test]
    fn term_substring_is_term_granular() {
        assert!(is_term_substring("fish food", "tropical fish food"));
        assert!(!is_term_substring("car", "carpet cleaner"));
        assert!(!is_term_substring("fish tropical", "tropical fish food"));
    }
}
