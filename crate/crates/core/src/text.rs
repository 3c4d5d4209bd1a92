//! Raw text normalization, tokenization and sentence splitting.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Bangla full stop (danda).
pub const DANDA: char = '\u{0964}';

/// A source document as read from disk.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawDocument {
    pub source_name: String,
    pub text: String,
}

impl RawDocument {
    pub fn new(source_name: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            source_name: source_name.into(),
            text: text.into(),
        }
    }

    /// Builds a document from raw bytes, rejecting anything that is not UTF-8.
    pub fn from_bytes(source_name: impl Into<String>, bytes: Vec<u8>) -> Result<Self> {
        Ok(Self::new(source_name, String::from_utf8(bytes)?))
    }
}

/// Letter classes that survive normalization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Script {
    /// U+0980..=U+09FF letters and signs, plus ZWJ/ZWNJ.
    Bengali,
    /// ASCII letters. Useful for romanized corpora.
    Latin,
}

impl Script {
    pub fn parse(name: &str) -> Option<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "bengali" | "bangla" => Some(Script::Bengali),
            "latin" => Some(Script::Latin),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Script::Bengali => "bengali",
            Script::Latin => "latin",
        }
    }

    fn contains_letter(self, ch: char) -> bool {
        match self {
            Script::Bengali => {
                ('\u{0980}'..='\u{09FF}').contains(&ch)
                    && !is_bengali_digit(ch)
                    // currency signs and fraction numerics
                    && !('\u{09F2}'..='\u{09FB}').contains(&ch)
                    || ch == '\u{200C}'
                    || ch == '\u{200D}'
            }
            Script::Latin => ch.is_ascii_alphabetic(),
        }
    }
}

fn is_bengali_digit(ch: char) -> bool {
    ('\u{09E6}'..='\u{09EF}').contains(&ch)
}

/// Rules applied by [`normalize`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningConfig {
    pub scripts: Vec<Script>,
    /// Characters that end a sentence. They are kept as standalone tokens.
    pub terminators: Vec<char>,
    pub strip_digits: bool,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        Self {
            scripts: vec![Script::Bengali],
            terminators: vec![DANDA, '?', '!'],
            strip_digits: true,
        }
    }
}

impl CleaningConfig {
    /// Default rules plus ASCII letters, for romanized text.
    pub fn romanized() -> Self {
        Self {
            scripts: vec![Script::Bengali, Script::Latin],
            ..Self::default()
        }
    }

    pub fn is_terminator(&self, ch: char) -> bool {
        self.terminators.contains(&ch)
    }

    /// Terminators as tokens, in configuration order.
    pub fn terminator_tokens(&self) -> Vec<String> {
        self.terminators.iter().map(|c| c.to_string()).collect()
    }

    fn keeps(&self, ch: char) -> bool {
        if ch.is_ascii_digit() || is_bengali_digit(ch) {
            return !self.strip_digits;
        }
        self.scripts.iter().any(|s| s.contains_letter(ch))
    }
}

fn url_pattern() -> &'static Regex {
    static URL: OnceLock<Regex> = OnceLock::new();
    URL.get_or_init(|| Regex::new(r"(?i)(?:https?://|www\.)\S+").expect("valid url regex"))
}

/// Cleans a document down to letters of the configured scripts, single
/// spaces, and space-separated terminator symbols.
///
/// The ASCII pipe is read as a danda.
pub fn normalize(raw: &RawDocument, rules: &CleaningConfig) -> String {
    normalize_str(&raw.text, rules)
}

/// [`normalize`] on raw bytes; fails on invalid UTF-8.
pub fn normalize_bytes(bytes: &[u8], rules: &CleaningConfig) -> Result<String> {
    let text = String::from_utf8(bytes.to_vec())?;
    Ok(normalize_str(&text, rules))
}

pub fn normalize_str(text: &str, rules: &CleaningConfig) -> String {
    let text = url_pattern().replace_all(text, " ");
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for ch in text.chars() {
        let ch = if ch == '|' { DANDA } else { ch };
        if rules.is_terminator(ch) {
            if !out.is_empty() {
                out.push(' ');
            }
            out.push(ch);
            pending_space = true;
        } else if rules.keeps(ch) {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(ch);
        } else {
            pending_space = true;
        }
    }
    out
}

/// Splits normalized text on whitespace.
pub fn tokenize(normalized: &str) -> Vec<String> {
    normalized.split_whitespace().map(str::to_owned).collect()
}

/// A run of tokens closed by a terminator, or the unterminated tail of a text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    tokens: Vec<String>,
    terminated: bool,
}

impl Sentence {
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// The closing terminator token, if the sentence has one.
    pub fn terminator(&self) -> Option<&str> {
        if self.terminated {
            self.tokens.last().map(String::as_str)
        } else {
            None
        }
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.tokens
    }
}

/// Cuts a token stream after every terminator token.
pub fn split_sentences(tokens: Vec<String>, terminators: &[String]) -> Vec<Sentence> {
    let mut sentences = Vec::new();
    let mut current = Vec::new();
    for token in tokens {
        let closes = terminators.contains(&token);
        current.push(token);
        if closes {
            sentences.push(Sentence {
                tokens: std::mem::take(&mut current),
                terminated: true,
            });
        }
    }
    if !current.is_empty() {
        sentences.push(Sentence {
            tokens: current,
            terminated: false,
        });
    }
    sentences
}

/// normalize → tokenize → split in one call.
pub fn sentences_from_text(text: &str, rules: &CleaningConfig) -> Vec<Sentence> {
    let normalized = normalize_str(text, rules);
    split_sentences(tokenize(&normalized), &rules.terminator_tokens())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        s.split(' ').map(str::to_owned).collect()
    }

    #[test]
    fn normalize_strips_commas_digits_and_spaces_terminator() {
        let raw = RawDocument::new("t", "ami, bhat 12 khai।");
        assert_eq!(normalize(&raw, &CleaningConfig::romanized()), "ami bhat khai ।");
    }

    #[test]
    fn normalize_empty_and_fixed_point() {
        let rules = CleaningConfig::romanized();
        assert_eq!(normalize_str("", &rules), "");
        assert_eq!(normalize_str("ami bhat khai ।", &rules), "ami bhat khai ।");
    }

    #[test]
    fn default_rules_drop_latin_and_keep_bengali() {
        let out = normalize_str("আমি ভাত খাই। hello ১২৩ 45", &CleaningConfig::default());
        assert_eq!(out, "আমি ভাত খাই ।");
    }

    #[test]
    fn pipe_is_canonicalized_to_danda() {
        let out = normalize_str("আমি ভাত খাই|", &CleaningConfig::default());
        assert_eq!(out, "আমি ভাত খাই ।");
    }

    #[test]
    fn urls_quotes_and_latin_removed() {
        let out = normalize_str(
            "দেখুন https://bdnews24.com/a?b=1 \"খবর\" www.x.org আজ!",
            &CleaningConfig::default(),
        );
        assert_eq!(out, "দেখুন খবর আজ !");
    }

    #[test]
    fn exclamation_can_be_disabled() {
        let rules = CleaningConfig {
            terminators: vec![DANDA, '?'],
            ..CleaningConfig::romanized()
        };
        assert_eq!(normalize_str("ki! hoy?", &rules), "ki hoy ?");
    }

    #[test]
    fn digits_kept_when_configured() {
        let rules = CleaningConfig {
            strip_digits: false,
            ..CleaningConfig::default()
        };
        assert_eq!(normalize_str("১২ টাকা", &rules), "১২ টাকা");
    }

    #[test]
    fn invalid_utf8_rejected() {
        let err = normalize_bytes(&[0x61, 0xff, 0x62], &CleaningConfig::default());
        assert!(matches!(err, Err(crate::Error::InvalidEncoding(_))));
        assert!(RawDocument::from_bytes("x", vec![0xc3]).is_err());
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("ami bhat khai ।"), toks("ami bhat khai ।"));
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("ki ?"), toks("ki ?"));
    }

    #[test]
    fn split_examples() {
        let terms = CleaningConfig::default().terminator_tokens();
        let s = split_sentences(toks("ami bhat khai । tumi ki ?"), &terms);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].tokens(), toks("ami bhat khai ।").as_slice());
        assert_eq!(s[1].tokens(), toks("tumi ki ?").as_slice());
        assert_eq!(s[1].terminator(), Some("?"));

        let s = split_sentences(toks("ami bhat"), &terms);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].terminator(), None);

        let s = split_sentences(toks("।"), &terms);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].tokens(), toks("।").as_slice());
    }

    fn noisy_text() -> impl Strategy<Value = String> {
        let pieces = prop::sample::select(vec![
            "আমি", "ভাত", "খাই", "।", "|", "?", "!", ",", " ", "  ", "\n", "12", "১২৩", "ami",
            "bhat", "\"", "http://x.y/z", "www.a.b", "\u{200C}", "ৎ", "৳", "-", "\t",
        ]);
        prop::collection::vec(pieces, 0..30).prop_map(|v| v.concat())
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(text in noisy_text(), latin in any::<bool>()) {
            let rules = if latin { CleaningConfig::romanized() } else { CleaningConfig::default() };
            let once = normalize_str(&text, &rules);
            prop_assert_eq!(normalize_str(&once, &rules), once);
        }

        #[test]
        fn tokens_rejoin_to_normalized(text in noisy_text()) {
            let rules = CleaningConfig::romanized();
            let norm = normalize_str(&text, &rules);
            prop_assert_eq!(tokenize(&norm).join(" "), norm);
        }

        #[test]
        fn sentences_partition_tokens(text in noisy_text()) {
            let rules = CleaningConfig::romanized();
            let tokens = tokenize(&normalize_str(&text, &rules));
            let terms = rules.terminator_tokens();
            let sentences = split_sentences(tokens.clone(), &terms);
            let flat: Vec<String> = sentences.iter().flat_map(|s| s.tokens().to_vec()).collect();
            prop_assert_eq!(flat, tokens);
            for s in &sentences {
                prop_assert!(!s.is_empty());
                let inner = &s.tokens()[..s.len() - 1];
                prop_assert!(inner.iter().all(|t| !terms.contains(t)));
            }
        }
    }
}
