//! Data model: sentences, language pairs, corpora, and the toy-language
//! world used to exercise the whole pipeline with known ground truth.

mod jsonl;
mod toyworld;

pub use jsonl::{
    load_candidates, load_cs, load_parallel, load_sentences, save_candidates, save_cs,
    save_parallel, save_sentences,
};
pub use toyworld::{make_toy_world, token_language, CsPairPolicy, ToyWorld, ToyWorldSpec};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A language code such as `"l0"` or `"en"`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LangCode(String);

impl LangCode {
    pub fn new(code: impl Into<String>) -> Self {
        LangCode(code.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LangCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for LangCode {
    fn from(s: &str) -> Self {
        LangCode(s.to_string())
    }
}

/// A token sequence with optional per-token language tags.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lang_tags: Option<Vec<LangCode>>,
}

impl Sentence {
    pub fn new(tokens: Vec<String>) -> Self {
        Sentence {
            tokens,
            lang_tags: None,
        }
    }

    /// Attach per-token language tags; the tag list must match the token list
    /// in length.
    pub fn with_tags(tokens: Vec<String>, lang_tags: Vec<LangCode>) -> Result<Self> {
        if tokens.len() != lang_tags.len() {
            return Err(Error::Input(format!(
                "lang_tags length {} does not match tokens length {}",
                lang_tags.len(),
                tokens.len()
            )));
        }
        Ok(Sentence {
            tokens,
            lang_tags: Some(lang_tags),
        })
    }

    pub fn from_words(words: &[&str]) -> Self {
        Sentence::new(words.iter().map(|w| w.to_string()).collect())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Check the structural invariants (tag list length).
    pub fn validate(&self) -> Result<()> {
        if let Some(tags) = &self.lang_tags {
            if tags.len() != self.tokens.len() {
                return Err(Error::Input(format!(
                    "lang_tags length {} does not match tokens length {}",
                    tags.len(),
                    self.tokens.len()
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tokens.join(" "))
    }
}

/// An ordered (matrix, embedded) language pair; the two must differ.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawPair")]
pub struct LanguagePair {
    matrix: LangCode,
    embedded: LangCode,
}

#[derive(Deserialize)]
struct RawPair {
    matrix: LangCode,
    embedded: LangCode,
}

impl TryFrom<RawPair> for LanguagePair {
    type Error = Error;

    fn try_from(raw: RawPair) -> Result<Self> {
        LanguagePair::new(raw.matrix, raw.embedded)
    }
}

impl LanguagePair {
    pub fn new(matrix: LangCode, embedded: LangCode) -> Result<Self> {
        if matrix == embedded {
            return Err(Error::Config(format!(
                "matrix and embedded language must differ (both `{matrix}`)"
            )));
        }
        Ok(LanguagePair { matrix, embedded })
    }

    /// The dominant language of the code-switched output.
    pub fn matrix(&self) -> &LangCode {
        &self.matrix
    }

    /// The language of the input sentence, mixed into the matrix language.
    pub fn embedded(&self) -> &LangCode {
        &self.embedded
    }
}

impl fmt::Display for LanguagePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.matrix, self.embedded)
    }
}

/// One machine-translation training example.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParallelExample {
    pub source: Sentence,
    pub source_lang: LangCode,
    pub target: Sentence,
    pub target_lang: LangCode,
}

impl ParallelExample {
    pub fn new(
        source: Sentence,
        source_lang: LangCode,
        target: Sentence,
        target_lang: LangCode,
    ) -> Result<Self> {
        if source_lang == target_lang {
            return Err(Error::Config(format!(
                "source and target language must differ (both `{source_lang}`)"
            )));
        }
        Ok(ParallelExample {
            source,
            source_lang,
            target,
            target_lang,
        })
    }
}

/// A code-switching example: monolingual input in the embedded language and
/// a gold reference mixing the pair's two languages.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsExample {
    pub input: Sentence,
    pub pair: LanguagePair,
    pub reference: Sentence,
}

/// Corpora of code-switched examples keyed by language pair.
pub type CsCorpora = BTreeMap<LanguagePair, Vec<CsExample>>;

/// Corpora of parallel examples keyed by (source, target) language.
pub type ParallelCorpora = BTreeMap<(LangCode, LangCode), Vec<ParallelExample>>;

/// Monolingual corpora keyed by language.
pub type MonoCorpora = BTreeMap<LangCode, Vec<Sentence>>;

/// Split code-switched corpora into training pairs and the held-out target
/// pair. The returned maps partition the input: no example is dropped or
/// duplicated.
pub fn leave_one_out_split(
    cs_corpora: &CsCorpora,
    target_pair: &LanguagePair,
) -> Result<(CsCorpora, Vec<CsExample>)> {
    let heldout = cs_corpora
        .get(target_pair)
        .ok_or_else(|| Error::UnknownPair(target_pair.to_string()))?
        .clone();
    let train: CsCorpora = cs_corpora
        .iter()
        .filter(|(pair, _)| *pair != target_pair)
        .map(|(pair, examples)| (pair.clone(), examples.clone()))
        .collect();
    Ok((train, heldout))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(m: &str, e: &str) -> LanguagePair {
        LanguagePair::new(LangCode::from(m), LangCode::from(e)).unwrap()
    }

    fn example(m: &str, e: &str, word: &str) -> CsExample {
        CsExample {
            input: Sentence::from_words(&[word]),
            pair: pair(m, e),
            reference: Sentence::from_words(&[word, word]),
        }
    }

    #[test]
    fn language_pair_rejects_equal_codes() {
        assert!(LanguagePair::new(LangCode::from("a"), LangCode::from("a")).is_err());
    }

    #[test]
    fn sentence_tags_must_match_length() {
        let err = Sentence::with_tags(
            vec!["x".into(), "y".into()],
            vec![LangCode::from("a")],
        );
        assert!(err.is_err());
    }

    #[test]
    fn split_eight_pairs_leaves_seven_for_training() {
        let langs: Vec<&str> = vec!["e0", "e1", "e2", "e3", "e4", "e5", "e6", "e7"];
        let mut corpora = CsCorpora::new();
        for m in &langs {
            corpora.insert(pair(m, "base"), vec![example(m, "base", m)]);
        }
        assert_eq!(corpora.len(), 8);
        let target = pair("e3", "base");
        let (train, heldout) = leave_one_out_split(&corpora, &target).unwrap();
        assert_eq!(train.len(), 7);
        assert_eq!(heldout.len(), 1);
        assert!(!train.contains_key(&target));
    }

    #[test]
    fn split_two_pairs_leaves_one() {
        let mut corpora = CsCorpora::new();
        corpora.insert(pair("a", "c"), vec![example("a", "c", "x")]);
        corpora.insert(pair("b", "c"), vec![example("b", "c", "y")]);
        let (train, heldout) = leave_one_out_split(&corpora, &pair("a", "c")).unwrap();
        assert_eq!(train.len(), 1);
        assert_eq!(heldout.len(), 1);
    }

    #[test]
    fn split_unknown_pair_is_an_error() {
        let mut corpora = CsCorpora::new();
        corpora.insert(pair("a", "c"), vec![]);
        assert!(leave_one_out_split(&corpora, &pair("b", "c")).is_err());
    }

    #[test]
    fn split_partitions_the_input() {
        let mut corpora = CsCorpora::new();
        for (i, m) in ["a", "b", "d"].iter().enumerate() {
            let examples: Vec<CsExample> = (0..=i).map(|k| example(m, "c", &format!("w{k}"))).collect();
            corpora.insert(pair(m, "c"), examples);
        }
        let target = pair("b", "c");
        let (train, heldout) = leave_one_out_split(&corpora, &target).unwrap();

        let total: usize = corpora.values().map(Vec::len).sum();
        let split_total: usize = train.values().map(Vec::len).sum::<usize>() + heldout.len();
        assert_eq!(total, split_total);

        for (p, examples) in &train {
            assert_ne!(p, &target);
            assert_eq!(examples, corpora.get(p).unwrap());
        }
        assert_eq!(&heldout, corpora.get(&target).unwrap());
    }
}
