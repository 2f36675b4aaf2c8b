//! Synthetic toy-language world.
//!
//! Every language renders a shared concept vocabulary through its own
//! surface rule: a pronounceable base form shared by all languages plus a
//! one-character suffix unique to the language. Token -> language is
//! therefore decidable by construction, translations are closed-form, and
//! language identification is learnable from character n-grams.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::{
    CsCorpora, CsExample, LangCode, LanguagePair, MonoCorpora, ParallelCorpora, ParallelExample,
    Sentence,
};
use crate::error::{Error, Result};
use crate::seeding::substream_rng;

const BASE_CONSONANTS: &[u8] = b"bdgklmnprst";
const BASE_VOWELS: &[u8] = b"aeiou";
/// One suffix letter per language; disjoint from the base alphabet.
const SUFFIXES: &[u8] = b"cfhjqvwxyz";

fn default_parallel_per_pair() -> usize {
    96
}
fn default_cs_per_pair() -> usize {
    96
}
fn default_mono_per_lang() -> usize {
    128
}

/// Which (matrix, embedded) pairs receive gold code-switched corpora.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsPairPolicy {
    /// Pairs (l_i, l_0) for i >= 1: the input language is always the first
    /// language, so holding out one pair also holds out its matrix language.
    #[default]
    FixedEmbedded,
    /// Every ordered pair of distinct languages.
    AllOrdered,
}

/// Parameters of the synthetic world. Generation is a pure function of this
/// value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyWorldSpec {
    pub num_languages: usize,
    pub concept_vocab_size: usize,
    /// Inclusive (min, max) sentence length in tokens.
    pub sentence_length_range: (usize, usize),
    /// Fraction of tokens rendered in the matrix language in gold
    /// code-switched references; must lie in (0.5, 1.0).
    pub cs_matrix_fraction: f64,
    pub seed: u64,
    #[serde(default = "default_parallel_per_pair")]
    pub parallel_per_pair: usize,
    #[serde(default = "default_cs_per_pair")]
    pub cs_per_pair: usize,
    #[serde(default = "default_mono_per_lang")]
    pub mono_per_lang: usize,
    #[serde(default)]
    pub cs_pairs: CsPairPolicy,
}

impl ToyWorldSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_languages < 3 {
            return Err(Error::Config(format!(
                "num_languages must be at least 3, got {}",
                self.num_languages
            )));
        }
        if self.num_languages > SUFFIXES.len() {
            return Err(Error::Config(format!(
                "num_languages must be at most {}, got {}",
                SUFFIXES.len(),
                self.num_languages
            )));
        }
        if self.concept_vocab_size == 0 {
            return Err(Error::Config("concept_vocab_size must be positive".into()));
        }
        let (lo, hi) = self.sentence_length_range;
        if lo < 2 || lo > hi {
            return Err(Error::Config(format!(
                "sentence_length_range must satisfy 2 <= min <= max, got ({lo}, {hi})"
            )));
        }
        if !(self.cs_matrix_fraction > 0.5 && self.cs_matrix_fraction < 1.0) {
            return Err(Error::Config(format!(
                "cs_matrix_fraction must lie strictly between 0.5 and 1.0, got {}",
                self.cs_matrix_fraction
            )));
        }
        if self.parallel_per_pair == 0 || self.cs_per_pair == 0 || self.mono_per_lang == 0 {
            return Err(Error::Config("corpus sizes must be positive".into()));
        }
        Ok(())
    }

    pub fn languages(&self) -> Vec<LangCode> {
        (0..self.num_languages)
            .map(|i| LangCode::new(format!("l{i}")))
            .collect()
    }
}

/// The generated corpora of a toy world.
#[derive(Clone, Debug)]
pub struct ToyWorld {
    pub spec: ToyWorldSpec,
    pub languages: Vec<LangCode>,
    pub mono: MonoCorpora,
    pub parallel: ParallelCorpora,
    pub cs: CsCorpora,
}

impl ToyWorld {
    /// Render a concept sequence as a tagged sentence in one language.
    pub fn render(&self, concepts: &[usize], lang_index: usize) -> Sentence {
        render_sentence(concepts, lang_index, self.languages.len())
    }

    /// The closed-form gold translation of `sentence` from one toy language
    /// into another: re-render the same concepts with the target suffix.
    pub fn gold_translation(&self, sentence: &Sentence, target: &LangCode) -> Result<Sentence> {
        let target_idx = self.lang_index(target)?;
        let concepts = sentence
            .tokens
            .iter()
            .map(|t| concept_of(t))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.render(&concepts, target_idx))
    }

    pub fn lang_index(&self, lang: &LangCode) -> Result<usize> {
        self.languages
            .iter()
            .position(|l| l == lang)
            .ok_or_else(|| Error::UnknownLanguage(lang.to_string()))
    }
}

/// Surface form of concept `c` in language `lang_index`.
pub fn surface_token(c: usize, lang_index: usize) -> String {
    let mut base = String::new();
    let mut rest = c;
    let radix = BASE_CONSONANTS.len() * BASE_VOWELS.len();
    loop {
        let digit = rest % radix;
        base.push(BASE_CONSONANTS[digit % BASE_CONSONANTS.len()] as char);
        base.push(BASE_VOWELS[digit / BASE_CONSONANTS.len()] as char);
        rest /= radix;
        if rest == 0 {
            break;
        }
    }
    base.push(SUFFIXES[lang_index] as char);
    base
}

/// Which toy language produced `token`, decided by its suffix letter.
/// Returns `None` for tokens outside the toy surface rule or beyond the
/// world's `num_languages`.
pub fn token_language(token: &str, num_languages: usize) -> Option<LangCode> {
    let last = token.chars().last()?;
    SUFFIXES[..num_languages.min(SUFFIXES.len())]
        .iter()
        .position(|&s| s as char == last)
        .map(|i| LangCode::new(format!("l{i}")))
}

/// Recover the concept id from a surface token (any language).
fn concept_of(token: &str) -> Result<usize> {
    let bytes = token.as_bytes();
    if bytes.len() < 3 || !SUFFIXES.contains(bytes.last().unwrap()) {
        return Err(Error::Input(format!(
            "token `{token}` is not a toy surface form"
        )));
    }
    let base = &bytes[..bytes.len() - 1];
    if base.len() % 2 != 0 {
        return Err(Error::Input(format!(
            "token `{token}` is not a toy surface form"
        )));
    }
    let radix = BASE_CONSONANTS.len() * BASE_VOWELS.len();
    let mut c = 0usize;
    for pair in base.chunks(2).rev() {
        let ci = BASE_CONSONANTS
            .iter()
            .position(|&b| b == pair[0])
            .ok_or_else(|| Error::Input(format!("token `{token}` is not a toy surface form")))?;
        let vi = BASE_VOWELS
            .iter()
            .position(|&b| b == pair[1])
            .ok_or_else(|| Error::Input(format!("token `{token}` is not a toy surface form")))?;
        c = c * radix + (vi * BASE_CONSONANTS.len() + ci);
    }
    Ok(c)
}

fn render_sentence(concepts: &[usize], lang_index: usize, _num_languages: usize) -> Sentence {
    let lang = LangCode::new(format!("l{lang_index}"));
    let tokens = concepts
        .iter()
        .map(|&c| surface_token(c, lang_index))
        .collect();
    let tags = vec![lang; concepts.len()];
    Sentence::with_tags(tokens, tags).expect("tags constructed with matching length")
}

fn sample_concepts(rng: &mut ChaCha20Rng, spec: &ToyWorldSpec) -> Vec<usize> {
    let (lo, hi) = spec.sentence_length_range;
    let n = rng.random_range(lo..=hi);
    (0..n)
        .map(|_| rng.random_range(0..spec.concept_vocab_size))
        .collect()
}

/// How many matrix-language tokens a gold reference of length `n` carries.
/// ceil(fraction * n), clamped so at least one embedded token survives.
pub fn matrix_token_count(fraction: f64, n: usize) -> usize {
    let k = (fraction * n as f64).ceil() as usize;
    k.clamp(1, n.saturating_sub(1).max(1))
}

fn make_cs_example(
    rng: &mut ChaCha20Rng,
    spec: &ToyWorldSpec,
    matrix_idx: usize,
    embedded_idx: usize,
) -> CsExample {
    let concepts = sample_concepts(rng, spec);
    let n = concepts.len();
    let k = matrix_token_count(spec.cs_matrix_fraction, n);
    let mut is_matrix = vec![false; n];
    for idx in sample(rng, n, k) {
        is_matrix[idx] = true;
    }
    let mut tokens = Vec::with_capacity(n);
    let mut tags = Vec::with_capacity(n);
    for (i, &c) in concepts.iter().enumerate() {
        let li = if is_matrix[i] { matrix_idx } else { embedded_idx };
        tokens.push(surface_token(c, li));
        tags.push(LangCode::new(format!("l{li}")));
    }
    let reference = Sentence::with_tags(tokens, tags).expect("lengths match");
    let input = render_sentence(&concepts, embedded_idx, spec.num_languages);
    let pair = LanguagePair::new(
        LangCode::new(format!("l{matrix_idx}")),
        LangCode::new(format!("l{embedded_idx}")),
    )
    .expect("matrix != embedded");
    CsExample {
        input,
        pair,
        reference,
    }
}

/// Generate the full world: monolingual corpora per language, parallel
/// corpora per ordered language pair, and gold code-switched corpora per
/// configured pair. Deterministic for a fixed spec.
pub fn make_toy_world(spec: &ToyWorldSpec) -> Result<ToyWorld> {
    spec.validate()?;
    let languages = spec.languages();

    let mut mono = MonoCorpora::new();
    for (i, lang) in languages.iter().enumerate() {
        let mut rng = substream_rng(spec.seed, &format!("world/mono/{lang}"));
        let sentences = (0..spec.mono_per_lang)
            .map(|_| {
                let concepts = sample_concepts(&mut rng, spec);
                render_sentence(&concepts, i, spec.num_languages)
            })
            .collect();
        mono.insert(lang.clone(), sentences);
    }

    let mut parallel = ParallelCorpora::new();
    for (i, src) in languages.iter().enumerate() {
        for (j, tgt) in languages.iter().enumerate() {
            if i == j {
                continue;
            }
            let mut rng = substream_rng(spec.seed, &format!("world/parallel/{src}-{tgt}"));
            let examples = (0..spec.parallel_per_pair)
                .map(|_| {
                    let concepts = sample_concepts(&mut rng, spec);
                    ParallelExample::new(
                        render_sentence(&concepts, i, spec.num_languages),
                        src.clone(),
                        render_sentence(&concepts, j, spec.num_languages),
                        tgt.clone(),
                    )
                    .expect("src != tgt")
                })
                .collect();
            parallel.insert((src.clone(), tgt.clone()), examples);
        }
    }

    let pair_indices: Vec<(usize, usize)> = match spec.cs_pairs {
        CsPairPolicy::FixedEmbedded => (1..spec.num_languages).map(|m| (m, 0)).collect(),
        CsPairPolicy::AllOrdered => (0..spec.num_languages)
            .flat_map(|m| {
                (0..spec.num_languages)
                    .filter(move |&e| e != m)
                    .map(move |e| (m, e))
            })
            .collect(),
    };

    let mut cs = CsCorpora::new();
    for (m, e) in pair_indices {
        let pair = LanguagePair::new(languages[m].clone(), languages[e].clone())?;
        let mut rng = substream_rng(spec.seed, &format!("world/cs/{pair}"));
        let examples = (0..spec.cs_per_pair)
            .map(|_| make_cs_example(&mut rng, spec, m, e))
            .collect();
        cs.insert(pair, examples);
    }

    Ok(ToyWorld {
        spec: spec.clone(),
        languages,
        mono,
        parallel,
        cs,
    })
}
