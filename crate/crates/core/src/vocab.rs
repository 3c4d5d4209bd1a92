//! Token ↔ id mapping.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::Sentence;
use crate::TokenId;

pub const UNK_TOKEN: &str = "<unk>";
const VOCAB_VERSION: u32 = 1;

/// Dense bijection between tokens and ids. Id 0 is always the unknown token.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, TokenId>,
    id_to_token: Vec<String>,
    unk_id: TokenId,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    version: u32,
    unk_id: TokenId,
    tokens: Vec<String>,
}

impl Vocabulary {
    /// Builds a vocabulary from tokens already in id order. `unk_id` must index `tokens`.
    pub fn from_tokens(tokens: Vec<String>, unk_id: TokenId) -> Result<Self> {
        if unk_id as usize >= tokens.len() {
            return Err(Error::format("vocabulary", "unk_id outside token list"));
        }
        let mut token_to_id = HashMap::with_capacity(tokens.len());
        for (id, token) in tokens.iter().enumerate() {
            if token_to_id.insert(token.clone(), id as TokenId).is_some() {
                return Err(Error::format("vocabulary", format!("duplicate token {token:?}")));
            }
        }
        Ok(Self {
            token_to_id,
            id_to_token: tokens,
            unk_id,
        })
    }

    pub fn size(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn unk_id(&self) -> TokenId {
        self.unk_id
    }

    /// Id of `token`, or the unknown id.
    pub fn encode(&self, token: &str) -> TokenId {
        self.token_to_id.get(token).copied().unwrap_or(self.unk_id)
    }

    pub fn encode_all<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<TokenId> {
        tokens.iter().map(|t| self.encode(t.as_ref())).collect()
    }

    pub fn decode(&self, id: TokenId) -> Option<&str> {
        self.id_to_token.get(id as usize).map(String::as_str)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.token_to_id.contains_key(token)
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    pub fn to_json(&self) -> String {
        let file = VocabFile {
            version: VOCAB_VERSION,
            unk_id: self.unk_id,
            tokens: self.id_to_token.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("vocabulary serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: VocabFile = serde_json::from_str(text)?;
        if file.version != VOCAB_VERSION {
            return Err(Error::VersionMismatch {
                what: "vocabulary",
                expected: VOCAB_VERSION,
                found: file.version,
            });
        }
        Self::from_tokens(file.tokens, file.unk_id)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Assigns ids by descending frequency, ties broken by codepoint order.
///
/// Tokens seen fewer than `min_count` times fold into the unknown token,
/// except sentence terminators, which are always kept.
pub fn build_vocabulary(sentences: &[Sentence], min_count: usize) -> Result<Vocabulary> {
    if sentences.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let min_count = min_count.max(1);
    let mut counts: HashMap<&str, usize> = HashMap::new();
    let mut terminators: Vec<&str> = Vec::new();
    for sentence in sentences {
        for token in sentence.tokens() {
            *counts.entry(token.as_str()).or_default() += 1;
        }
        if let Some(t) = sentence.terminator() {
            if !terminators.contains(&t) {
                terminators.push(t);
            }
        }
    }
    let mut kept: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(tok, n)| tok != UNK_TOKEN && (n >= min_count || terminators.contains(&tok)))
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

    let mut tokens = Vec::with_capacity(kept.len() + 1);
    tokens.push(UNK_TOKEN.to_owned());
    tokens.extend(kept.into_iter().map(|(t, _)| t.to_owned()));
    Vocabulary::from_tokens(tokens, 0)
}
