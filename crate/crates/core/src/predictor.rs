//! Context routing, ranked suggestions and greedy sentence completion.

use std::collections::BTreeMap;
use std::fmt;

use crate::backoff::BackoffModel;
use crate::dataset::MAX_ORDER;
use crate::error::{Error, Result};
use crate::neural::{top_k, NeuralModel};
use crate::scalar::Scalar;
use crate::text::{normalize_str, tokenize, CleaningConfig};
use crate::vocab::Vocabulary;
use crate::TokenId;

/// Default cap on generated tokens per completion.
pub const DEFAULT_MAX_LEN: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Engine {
    Neural,
    Statistical,
}

impl Engine {
    pub fn parse(name: &str) -> Option<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "neural" => Some(Engine::Neural),
            "statistical" => Some(Engine::Statistical),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Engine::Neural => "neural",
            Engine::Statistical => "statistical",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which model handles a context, and the ids it sees.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Route {
    pub order: usize,
    pub context: Vec<TokenId>,
}

/// Picks order `min(len, 5)` and keeps the last that-many tokens, encoded.
pub fn route<S: AsRef<str>>(vocab: &Vocabulary, context_tokens: &[S]) -> Result<Route> {
    if context_tokens.is_empty() {
        return Err(Error::EmptyContext);
    }
    let order = context_tokens.len().min(MAX_ORDER);
    let context = vocab.encode_all(&context_tokens[context_tokens.len() - order..]);
    Ok(Route { order, context })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub token: String,
    pub id: TokenId,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Suggestions {
    pub order_used: usize,
    pub candidates: Vec<Candidate>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Termination {
    Terminator(String),
    LengthCap,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Termination::Terminator(t) => f.write_str(t),
            Termination::LengthCap => f.write_str("length-cap"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Completion {
    /// Prefix followed by the generated tokens.
    pub tokens: Vec<String>,
    pub terminated_by: Termination,
    pub steps: usize,
}

impl Completion {
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

/// Everything needed to answer queries: one neural model per order, an
/// optional back-off model, and the shared vocabulary.
#[derive(Clone, Debug)]
pub struct ModelBundle<F> {
    vocabulary: Vocabulary,
    cleaning: CleaningConfig,
    neural: BTreeMap<usize, NeuralModel<F>>,
    statistical: Option<BackoffModel>,
}

impl<F: Scalar> ModelBundle<F> {
    pub fn new(vocabulary: Vocabulary, cleaning: CleaningConfig) -> Self {
        Self {
            vocabulary,
            cleaning,
            neural: BTreeMap::new(),
            statistical: None,
        }
    }

    pub fn with_neural(mut self, model: NeuralModel<F>) -> Result<Self> {
        self.insert_neural(model)?;
        Ok(self)
    }

    pub fn insert_neural(&mut self, model: NeuralModel<F>) -> Result<()> {
        if model.config.vocab_size != self.vocabulary.size() {
            return Err(Error::ShapeMismatch(format!(
                "order-{} model has vocabulary {}, bundle has {}",
                model.config.context_len,
                model.config.vocab_size,
                self.vocabulary.size()
            )));
        }
        self.neural.insert(model.config.context_len, model);
        Ok(())
    }

    pub fn with_statistical(mut self, model: BackoffModel) -> Result<Self> {
        if model.vocab_size() != self.vocabulary.size() {
            return Err(Error::ShapeMismatch(format!(
                "back-off model has vocabulary {}, bundle has {}",
                model.vocab_size(),
                self.vocabulary.size()
            )));
        }
        self.statistical = Some(model);
        Ok(self)
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn cleaning(&self) -> &CleaningConfig {
        &self.cleaning
    }

    pub fn terminators(&self) -> Vec<String> {
        self.cleaning.terminator_tokens()
    }

    pub fn neural_orders(&self) -> Vec<usize> {
        self.neural.keys().copied().collect()
    }

    pub fn neural_model(&self, order: usize) -> Option<&NeuralModel<F>> {
        self.neural.get(&order)
    }

    pub fn statistical(&self) -> Option<&BackoffModel> {
        self.statistical.as_ref()
    }

    /// Normalizes and tokenizes free text with the bundle's cleaning rules.
    pub fn tokenize_input(&self, text: &str) -> Vec<String> {
        tokenize(&normalize_str(text, &self.cleaning))
    }

    /// Number of tokens that can ever be suggested (everything but unk).
    pub fn suggestable(&self) -> usize {
        self.vocabulary.size().saturating_sub(1)
    }

    /// Full next-token distribution over the vocabulary for a routed context.
    pub fn distribution(&self, route: &Route, engine: Engine) -> Result<Vec<f64>> {
        match engine {
            Engine::Neural => {
                let model = self
                    .neural
                    .get(&route.order)
                    .ok_or_else(|| Error::MissingModel(format!("neural order {}", route.order)))?;
                Ok(model.forward(&route.context)?.into_iter().map(Scalar::to_f64_lossy).collect())
            }
            Engine::Statistical => {
                let model = self
                    .statistical
                    .as_ref()
                    .ok_or_else(|| Error::MissingModel("statistical".into()))?;
                Ok(model.distribution(&route.context))
            }
        }
    }

    /// Top-`k` next tokens for the context; the unknown token is never suggested.
    pub fn suggest<S: AsRef<str>>(&self, context_tokens: &[S], k: usize, engine: Engine) -> Result<Suggestions> {
        let route = route(&self.vocabulary, context_tokens)?;
        let probs = self.distribution(&route, engine)?;
        let unk = self.vocabulary.unk_id();
        let candidates = top_k(&probs, k, |id| id != unk)
            .into_iter()
            .map(|(id, probability)| Candidate {
                token: self.vocabulary.decode(id).unwrap_or_default().to_owned(),
                id,
                probability,
            })
            .collect();
        Ok(Suggestions {
            order_used: route.order,
            candidates,
        })
    }

    /// Greedily appends the top suggestion until a terminator or `max_len` generated tokens.
    pub fn complete_sentence<S: AsRef<str>>(
        &self,
        prefix_tokens: &[S],
        engine: Engine,
        max_len: usize,
    ) -> Result<Completion> {
        if prefix_tokens.is_empty() {
            return Err(Error::EmptyContext);
        }
        let terminators = self.terminators();
        let mut tokens: Vec<String> = prefix_tokens.iter().map(|t| t.as_ref().to_owned()).collect();
        let mut steps = 0;
        while steps < max_len {
            let Some(best) = self.suggest(&tokens, 1, engine)?.candidates.into_iter().next() else {
                break;
            };
            tokens.push(best.token);
            steps += 1;
            let last = tokens.last().expect("just pushed");
            if terminators.contains(last) {
                let terminated_by = Termination::Terminator(last.clone());
                return Ok(Completion {
                    tokens,
                    terminated_by,
                    steps,
                });
            }
        }
        Ok(Completion {
            tokens,
            terminated_by: Termination::LengthCap,
            steps,
        })
    }
}
