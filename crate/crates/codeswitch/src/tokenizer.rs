//! Whitespace-token vocabulary with one control token per language.
//!
//! Source and target sequences both start with the control token of their
//! language; the decoder is started with the control token of the output
//! language, which selects what to generate. Ids are contiguous from 0:
//! four specials, then one control id per language (sorted by code), then
//! content tokens ordered by descending frequency with lexicographic
//! tie-break.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{LangCode, Sentence};
use crate::error::{Error, Result};

pub const PAD_TOKEN: &str = "<pad>";
pub const BOS_TOKEN: &str = "<bos>";
pub const EOS_TOKEN: &str = "<eos>";
pub const UNK_TOKEN: &str = "<unk>";

fn control_form(lang: &LangCode) -> String {
    format!("<lang:{lang}>")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    token_to_id: BTreeMap<String, u32>,
    id_to_token: Vec<String>,
    pub pad: u32,
    pub bos: u32,
    pub eos: u32,
    pub unk: u32,
    control_tokens: BTreeMap<LangCode, u32>,
}

impl Vocabulary {
    /// Build a vocabulary covering every token type in `sentences` plus one
    /// control token per language and the four specials.
    pub fn build<'a, I>(sentences: I, languages: &[LangCode]) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Sentence>,
    {
        let mut freq: BTreeMap<&str, u64> = BTreeMap::new();
        let mut any = false;
        for sentence in sentences {
            any = true;
            for tok in &sentence.tokens {
                *freq.entry(tok.as_str()).or_insert(0) += 1;
            }
        }
        if !any {
            return Err(Error::Config("cannot build a vocabulary from empty corpora".into()));
        }
        if languages.is_empty() {
            return Err(Error::Config("vocabulary needs at least one language".into()));
        }

        let mut id_to_token: Vec<String> = vec![
            PAD_TOKEN.to_string(),
            BOS_TOKEN.to_string(),
            EOS_TOKEN.to_string(),
            UNK_TOKEN.to_string(),
        ];
        let mut control_tokens = BTreeMap::new();
        let mut sorted_langs: Vec<&LangCode> = languages.iter().collect();
        sorted_langs.sort();
        sorted_langs.dedup();
        for lang in sorted_langs {
            control_tokens.insert((*lang).clone(), id_to_token.len() as u32);
            id_to_token.push(control_form(lang));
        }

        let reserved: Vec<&str> = id_to_token.iter().map(String::as_str).collect();
        for tok in freq.keys() {
            if reserved.contains(tok) {
                return Err(Error::Config(format!(
                    "corpus token `{tok}` collides with a reserved token form"
                )));
            }
        }

        let mut content: Vec<(&str, u64)> = freq.into_iter().collect();
        content.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        for (tok, _) in content {
            id_to_token.push(tok.to_string());
        }

        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();

        Ok(Vocabulary {
            token_to_id,
            id_to_token,
            pad: 0,
            bos: 1,
            eos: 2,
            unk: 3,
            control_tokens,
        })
    }

    pub fn size(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn languages(&self) -> impl Iterator<Item = &LangCode> {
        self.control_tokens.keys()
    }

    pub fn id_of(&self, token: &str) -> Option<u32> {
        self.token_to_id.get(token).copied()
    }

    pub fn token_of(&self, id: u32) -> Option<&str> {
        self.id_to_token.get(id as usize).map(String::as_str)
    }

    pub fn control_token(&self, lang: &LangCode) -> Result<u32> {
        self.control_tokens
            .get(lang)
            .copied()
            .ok_or_else(|| Error::UnknownLanguage(lang.to_string()))
    }

    fn is_control(&self, id: u32) -> bool {
        self.control_tokens.values().any(|&c| c == id)
    }

    /// `[control(lang)] + content ids + [eos]`; unknown tokens map to unk.
    pub fn encode_source(&self, sentence: &Sentence, lang: &LangCode) -> Result<Vec<u32>> {
        self.encode_with_control(sentence, lang)
    }

    /// Target-side encoding is identical in shape to the source side.
    pub fn encode_target(&self, sentence: &Sentence, lang: &LangCode) -> Result<Vec<u32>> {
        self.encode_with_control(sentence, lang)
    }

    fn encode_with_control(&self, sentence: &Sentence, lang: &LangCode) -> Result<Vec<u32>> {
        let ctrl = self.control_token(lang)?;
        let mut ids = Vec::with_capacity(sentence.len() + 2);
        ids.push(ctrl);
        for tok in &sentence.tokens {
            ids.push(self.id_of(tok).unwrap_or(self.unk));
        }
        ids.push(self.eos);
        Ok(ids)
    }

    /// The token the decoder consumes at step 0: the control token of the
    /// output language.
    pub fn decoder_start(&self, lang: &LangCode) -> Result<u32> {
        self.control_token(lang)
    }

    /// Drop specials and control ids, map the rest back to tokens.
    pub fn decode(&self, ids: &[u32]) -> Sentence {
        let tokens = ids
            .iter()
            .filter(|&&id| {
                id != self.pad && id != self.bos && id != self.eos && !self.is_control(id)
            })
            .map(|&id| {
                self.token_of(id)
                    .unwrap_or(UNK_TOKEN)
                    .to_string()
            })
            .collect();
        Sentence::new(tokens)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let vocab: Vocabulary = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Ok(vocab)
    }
}

/// Build a vocabulary that covers every surface form of the toy world's
/// concept vocabulary in every language, so translation targets are always
/// in-vocabulary even for rarely sampled concepts.
pub fn vocabulary_covering_world(world: &crate::corpus::ToyWorld) -> Result<Vocabulary> {
    let mut sentences = Vec::new();
    for lang_idx in 0..world.languages.len() {
        let concepts: Vec<usize> = (0..world.spec.concept_vocab_size).collect();
        sentences.push(world.render(&concepts, lang_idx));
    }
    Vocabulary::build(sentences.iter(), &world.languages)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lang(code: &str) -> LangCode {
        LangCode::from(code)
    }

    fn toy_vocab() -> Vocabulary {
        let sentences = vec![
            Sentence::from_words(&["hola", "mundo"]),
            Sentence::from_words(&["hallo", "welt", "welt"]),
        ];
        Vocabulary::build(sentences.iter(), &[lang("es"), lang("de")]).unwrap()
    }

    #[test]
    fn size_is_content_plus_controls_plus_specials() {
        let mut sentences = Vec::new();
        for i in 0..50 {
            sentences.push(Sentence::from_words(&[&format!("w{i}")]));
        }
        let langs = [lang("a"), lang("b"), lang("c")];
        let vocab = Vocabulary::build(sentences.iter(), &langs).unwrap();
        assert_eq!(vocab.size(), 50 + 3 + 4);
    }

    #[test]
    fn id_assignment_is_deterministic() {
        let a = toy_vocab();
        let b = toy_vocab();
        assert_eq!(a, b);
    }

    #[test]
    fn frequency_orders_content_ids() {
        let vocab = toy_vocab();
        // "welt" appears twice, everything else once; ties break lexicographically
        let base = 4 + 2; // specials + controls
        assert_eq!(vocab.id_of("welt"), Some(base));
        assert_eq!(vocab.id_of("hallo"), Some(base + 1));
        assert_eq!(vocab.id_of("hola"), Some(base + 2));
        assert_eq!(vocab.id_of("mundo"), Some(base + 3));
    }

    #[test]
    fn shared_token_gets_a_single_id() {
        let sentences = vec![
            Sentence::from_words(&["taxi"]),
            Sentence::from_words(&["taxi"]),
        ];
        let vocab = Vocabulary::build(sentences.iter(), &[lang("a"), lang("b")]).unwrap();
        assert_eq!(vocab.size(), 1 + 2 + 4);
    }

    #[test]
    fn encode_source_wraps_with_control_and_eos() {
        let vocab = toy_vocab();
        let ids = vocab
            .encode_source(&Sentence::from_words(&["hola"]), &lang("es"))
            .unwrap();
        assert_eq!(
            ids,
            vec![
                vocab.control_token(&lang("es")).unwrap(),
                vocab.id_of("hola").unwrap(),
                vocab.eos
            ]
        );
    }

    #[test]
    fn decode_inverts_encode_for_known_tokens() {
        let vocab = toy_vocab();
        let s = Sentence::from_words(&["hallo", "welt"]);
        let ids = vocab.encode_source(&s, &lang("de")).unwrap();
        assert_eq!(vocab.decode(&ids), s);
    }

    #[test]
    fn oov_token_becomes_exactly_one_unk() {
        let vocab = toy_vocab();
        let ids = vocab
            .encode_source(&Sentence::from_words(&["hola", "????", "mundo"]), &lang("es"))
            .unwrap();
        let unk_count = ids.iter().filter(|&&id| id == vocab.unk).count();
        assert_eq!(unk_count, 1);
    }

    #[test]
    fn decoder_start_is_the_control_token() {
        let vocab = toy_vocab();
        assert_eq!(
            vocab.decoder_start(&lang("de")).unwrap(),
            vocab.control_token(&lang("de")).unwrap()
        );
        assert_ne!(
            vocab.decoder_start(&lang("de")).unwrap(),
            vocab.decoder_start(&lang("es")).unwrap()
        );
    }

    #[test]
    fn empty_target_is_control_plus_eos() {
        let vocab = toy_vocab();
        let ids = vocab.encode_target(&Sentence::new(vec![]), &lang("es")).unwrap();
        assert_eq!(ids.len(), 2);
        assert_eq!(ids[1], vocab.eos);
    }

    #[test]
    fn unregistered_language_is_an_error() {
        let vocab = toy_vocab();
        assert!(vocab
            .encode_source(&Sentence::from_words(&["hola"]), &lang("fr"))
            .is_err());
        assert!(vocab.decoder_start(&lang("fr")).is_err());
    }

    #[test]
    fn empty_corpora_rejected() {
        let sentences: Vec<Sentence> = vec![];
        assert!(Vocabulary::build(sentences.iter(), &[lang("a")]).is_err());
    }

    #[test]
    fn vocabulary_file_round_trips() {
        let vocab = toy_vocab();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.json");
        vocab.save(&path).unwrap();
        assert_eq!(Vocabulary::load(&path).unwrap(), vocab);
    }

    proptest! {
        #[test]
        fn control_ids_never_appear_in_content_spans(
            words in proptest::collection::vec("[a-z]{1,6}", 1..12)
        ) {
            let vocab = toy_vocab();
            let refs: Vec<&str> = words.iter().map(String::as_str).collect();
            let s = Sentence::from_words(&refs);
            let ids = vocab.encode_source(&s, &lang("es")).unwrap();
            // interior = everything between the control token and eos
            for &id in &ids[1..ids.len() - 1] {
                prop_assert!(!vocab.is_control(id));
                prop_assert_ne!(id, vocab.eos);
            }
        }

        #[test]
        fn round_trip_on_vocab_words(
            idxs in proptest::collection::vec(0usize..4, 1..10)
        ) {
            let vocab = toy_vocab();
            let pool = ["hola", "mundo", "hallo", "welt"];
            let words: Vec<&str> = idxs.iter().map(|&i| pool[i]).collect();
            let s = Sentence::from_words(&words);
            let ids = vocab.encode_target(&s, &lang("de")).unwrap();
            prop_assert_eq!(vocab.decode(&ids), s);
        }
    }
}
