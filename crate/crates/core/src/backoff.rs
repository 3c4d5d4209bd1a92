//! Katz back-off n-gram model with Good-Turing discounting.
//!
//! Counts are collected for tuple lengths `1..=max_order + 1`. A context of
//! length `k` is "observed" when it is followed by at least one token
//! somewhere in the corpus; its total is the number of such continuations.
//!
//! For an observed context `h` and continuation count `r = c(h w)`:
//!
//! * `r > 0`: `P(w | h) = d_r / total(h)`
//! * `r = 0`: `P(w | h) = alpha(h) * P(w | h[1..])`
//!
//! where `d_r` is the Good-Turing discounted count for `r <= k_gt` (Katz's
//! variant with the large-count correction) and `d_r = r` above the
//! threshold. Unobserved contexts back off with `alpha = 1`. The recursion
//! bottoms out in an add-one unigram distribution over the whole vocabulary.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use crate::dataset::check_order;
use crate::error::{Error, Result};
use crate::TokenId;

const BACKOFF_VERSION: u32 = 1;
const BACKOFF_MAGIC: &str = "nextword-backoff";

/// Raw n-gram counts. `tables[k - 1]` holds tuples of length `k`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CountTable {
    tables: Vec<HashMap<Vec<TokenId>, u64>>,
    total_unigrams: u64,
}

impl CountTable {
    /// Longest stored tuple length.
    pub fn max_len(&self) -> usize {
        self.tables.len()
    }

    pub fn total_unigrams(&self) -> u64 {
        self.total_unigrams
    }

    pub fn get(&self, tuple: &[TokenId]) -> u64 {
        if tuple.is_empty() {
            return self.total_unigrams;
        }
        self.tables
            .get(tuple.len() - 1)
            .and_then(|t| t.get(tuple))
            .copied()
            .unwrap_or(0)
    }

    /// All stored tuples of length `len`.
    pub fn table(&self, len: usize) -> Option<&HashMap<Vec<TokenId>, u64>> {
        len.checked_sub(1).and_then(|i| self.tables.get(i))
    }
}

/// Counts every tuple of length `1..=max_order + 1` inside each sentence.
pub fn count_ngrams(sentences: &[Vec<TokenId>], max_order: usize) -> Result<CountTable> {
    check_order(max_order)?;
    let mut tables = vec![HashMap::new(); max_order + 1];
    let mut total = 0u64;
    for sentence in sentences {
        total += sentence.len() as u64;
        for (i, table) in tables.iter_mut().enumerate() {
            for window in sentence.windows(i + 1) {
                *table.entry(window.to_vec()).or_insert(0) += 1;
            }
        }
    }
    Ok(CountTable {
        tables,
        total_unigrams: total,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BackoffConfig {
    /// Counts at or below this value are Good-Turing discounted.
    pub k_gt: u64,
    /// Pseudocount added to every unigram at the floor of the recursion.
    pub unigram_pseudocount: f64,
}

impl Default for BackoffConfig {
    fn default() -> Self {
        Self {
            k_gt: 5,
            unigram_pseudocount: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct ContextStats {
    total: u64,
    /// (word, count) sorted by word.
    continuations: Vec<(TokenId, u64)>,
    alpha: f64,
    /// False when discounting was switched off because no mass could be backed off.
    discounted: bool,
}

impl ContextStats {
    fn count(&self, w: TokenId) -> u64 {
        self.continuations
            .binary_search_by_key(&w, |&(id, _)| id)
            .map(|i| self.continuations[i].1)
            .unwrap_or(0)
    }
}

/// Immutable Katz model. Back-off weights are computed eagerly at build time.
#[derive(Clone, Debug)]
pub struct BackoffModel {
    counts: CountTable,
    max_order: usize,
    vocab_size: usize,
    config: BackoffConfig,
    /// Indexed by tuple length; entries for lengths 0 and 1 are empty.
    discounts: Vec<BTreeMap<u64, f64>>,
    contexts: HashMap<Vec<TokenId>, ContextStats>,
}

/// Good-Turing discounted counts for `r <= k`, following Katz's threshold correction.
/// Falls back to `d_r = r` wherever the estimate is unusable.
fn good_turing(table: &HashMap<Vec<TokenId>, u64>, k: u64, len: usize, verbose: bool) -> BTreeMap<u64, f64> {
    let mut count_of_counts: BTreeMap<u64, u64> = BTreeMap::new();
    for &c in table.values() {
        if c <= k + 1 {
            *count_of_counts.entry(c).or_insert(0) += 1;
        }
    }
    let n = |r: u64| count_of_counts.get(&r).copied().unwrap_or(0) as f64;
    let n1 = n(1);
    let correction = if n1 > 0.0 { (k + 1) as f64 * n(k + 1) / n1 } else { 0.0 };
    let mut out = BTreeMap::new();
    let mut gaps = Vec::new();
    for r in 1..=k {
        let nr = n(r);
        if nr == 0.0 {
            continue;
        }
        let rf = r as f64;
        let ratio = ((rf + 1.0) * n(r + 1) / (rf * nr) - correction) / (1.0 - correction);
        let d = if n(r + 1) > 0.0 && ratio > 0.0 && ratio <= 1.0 && ratio.is_finite() {
            rf * ratio
        } else {
            gaps.push(r);
            rf
        };
        out.insert(r, d);
    }
    if verbose && !gaps.is_empty() {
        log::warn!("good-turing: no usable discount for {len}-gram counts {gaps:?}; left undiscounted");
    }
    out
}

impl BackoffModel {
    pub fn build(counts: CountTable, vocab_size: usize, config: BackoffConfig) -> Result<Self> {
        Self::build_inner(counts, vocab_size, config, true)
    }

    fn build_inner(counts: CountTable, vocab_size: usize, config: BackoffConfig, verbose: bool) -> Result<Self> {
        let max_order = counts.max_len().saturating_sub(1);
        check_order(max_order)?;
        let mut discounts = vec![BTreeMap::new(); max_order + 2];
        for (len, slot) in discounts.iter_mut().enumerate().skip(2) {
            *slot = good_turing(counts.table(len).expect("table present"), config.k_gt, len, verbose);
        }
        let mut model = Self {
            counts,
            max_order,
            vocab_size,
            config,
            discounts,
            contexts: HashMap::new(),
        };
        // Contexts of each length only depend on shorter ones.
        for ctx_len in 1..=max_order {
            let mut grouped: BTreeMap<Vec<TokenId>, Vec<(TokenId, u64)>> = BTreeMap::new();
            for (tuple, &c) in model.counts.table(ctx_len + 1).expect("table present") {
                let (w, h) = tuple.split_last().expect("non-empty tuple");
                grouped.entry(h.to_vec()).or_default().push((*w, c));
            }
            let mut stats = Vec::with_capacity(grouped.len());
            for (h, mut continuations) in grouped {
                continuations.sort_unstable();
                stats.push((h.clone(), model.context_stats(&h, continuations)));
            }
            model.contexts.extend(stats);
        }
        Ok(model)
    }

    fn context_stats(&self, h: &[TokenId], continuations: Vec<(TokenId, u64)>) -> ContextStats {
        let total: u64 = continuations.iter().map(|&(_, c)| c).sum();
        let len = h.len() + 1;
        let seen_mass: f64 = continuations
            .iter()
            .map(|&(_, r)| self.discounted(len, r))
            .sum::<f64>()
            / total as f64;
        let lower_seen: f64 = continuations
            .iter()
            .map(|&(w, _)| self.katz_prob(&h[1..], w))
            .sum();
        let unseen_lower = 1.0 - lower_seen;
        let all_seen = continuations.len() >= self.vocab_size;
        if all_seen || unseen_lower <= 1e-12 {
            return ContextStats {
                total,
                continuations,
                alpha: 0.0,
                discounted: false,
            };
        }
        ContextStats {
            total,
            continuations,
            alpha: ((1.0 - seen_mass) / unseen_lower).max(0.0),
            discounted: true,
        }
    }

    fn discounted(&self, tuple_len: usize, r: u64) -> f64 {
        self.discounts
            .get(tuple_len)
            .and_then(|d| d.get(&r))
            .copied()
            .unwrap_or(r as f64)
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn config(&self) -> BackoffConfig {
        self.config
    }

    pub fn counts(&self) -> &CountTable {
        &self.counts
    }

    /// Discounted count `d_r` for tuples of length `tuple_len`.
    pub fn discount(&self, tuple_len: usize, r: u64) -> f64 {
        self.discounted(tuple_len, r)
    }

    /// Back-off weight of `context`; 1 for contexts never observed.
    pub fn alpha(&self, context: &[TokenId]) -> f64 {
        self.contexts.get(context).map_or(1.0, |s| s.alpha)
    }

    /// Every context followed by at least one token in the training data.
    pub fn observed_contexts(&self) -> impl Iterator<Item = &[TokenId]> {
        self.contexts.keys().map(Vec::as_slice)
    }

    fn trim<'a>(&self, context: &'a [TokenId]) -> &'a [TokenId] {
        &context[context.len().saturating_sub(self.max_order)..]
    }

    fn unigram(&self, w: TokenId) -> f64 {
        if w as usize >= self.vocab_size {
            return 0.0;
        }
        let add = self.config.unigram_pseudocount;
        (self.counts.get(&[w]) as f64 + add)
            / (self.counts.total_unigrams as f64 + add * self.vocab_size as f64)
    }

    /// Unsmoothed relative frequency `c(context w) / total(context)`.
    pub fn mle_prob(&self, context: &[TokenId], word: TokenId) -> Result<f64> {
        if context.len() > self.max_order {
            return Err(Error::OrderOutOfRange(context.len()));
        }
        if context.is_empty() {
            if self.counts.total_unigrams == 0 {
                return Err(Error::UnseenContext(Vec::new()));
            }
            return Ok(self.counts.get(&[word]) as f64 / self.counts.total_unigrams as f64);
        }
        let stats = self
            .contexts
            .get(context)
            .ok_or_else(|| Error::UnseenContext(context.to_vec()))?;
        Ok(stats.count(word) as f64 / stats.total as f64)
    }

    /// Smoothed conditional probability. Contexts longer than the model order are trimmed.
    pub fn katz_prob(&self, context: &[TokenId], word: TokenId) -> f64 {
        let h = self.trim(context);
        if h.is_empty() {
            return self.unigram(word);
        }
        let Some(stats) = self.contexts.get(h) else {
            return self.katz_prob(&h[1..], word);
        };
        match stats.count(word) {
            0 => {
                if stats.alpha == 0.0 {
                    0.0
                } else {
                    stats.alpha * self.katz_prob(&h[1..], word)
                }
            }
            r if stats.discounted => self.discounted(h.len() + 1, r) / stats.total as f64,
            r => r as f64 / stats.total as f64,
        }
    }

    /// The full conditional distribution over the vocabulary.
    pub fn distribution(&self, context: &[TokenId]) -> Vec<f64> {
        let h = self.trim(context);
        if h.is_empty() {
            return (0..self.vocab_size as TokenId).map(|w| self.unigram(w)).collect();
        }
        let mut dist = self.distribution(&h[1..]);
        if let Some(stats) = self.contexts.get(h) {
            dist.iter_mut().for_each(|p| *p *= stats.alpha);
            for &(w, r) in &stats.continuations {
                if let Some(p) = dist.get_mut(w as usize) {
                    *p = if stats.discounted {
                        self.discounted(h.len() + 1, r)
                    } else {
                        r as f64
                    } / stats.total as f64;
                }
            }
        }
        dist
    }

    /// Most probable next token; ties go to the lowest id.
    pub fn predict_next(&self, context: &[TokenId]) -> (TokenId, f64) {
        argmax(&self.distribution(context))
    }

    /// Text serialization of the counts and smoothing configuration.
    pub fn to_text(&self) -> String {
        let mut out = format!("{BACKOFF_MAGIC} {BACKOFF_VERSION}\n");
        writeln!(out, "max_order {}", self.max_order).unwrap();
        writeln!(out, "vocab_size {}", self.vocab_size).unwrap();
        writeln!(out, "k_gt {}", self.config.k_gt).unwrap();
        writeln!(out, "unigram_pseudocount {}", self.config.unigram_pseudocount).unwrap();
        for (i, table) in self.counts.tables.iter().enumerate() {
            let mut entries: Vec<_> = table.iter().collect();
            entries.sort();
            writeln!(out, "order {} {}", i + 1, entries.len()).unwrap();
            for (tuple, count) in entries {
                for id in tuple {
                    write!(out, "{id} ").unwrap();
                }
                writeln!(out, "{count}").unwrap();
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        fn bad(d: impl Into<String>) -> Error {
            Error::format("back-off model", d)
        }
        fn next<'a>(lines: &mut std::str::Lines<'a>) -> Result<&'a str> {
            lines.next().ok_or_else(|| bad("unexpected end of file"))
        }
        fn field<T: std::str::FromStr>(lines: &mut std::str::Lines<'_>, name: &str) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            let line = next(lines)?;
            let value = line
                .strip_prefix(name)
                .ok_or_else(|| bad(format!("expected {name}, got {line:?}")))?;
            value.trim().parse().map_err(|e: T::Err| bad(format!("{name}: {e}")))
        }

        let mut lines = text.lines();
        let header = next(&mut lines)?;
        let version = header
            .strip_prefix(BACKOFF_MAGIC)
            .and_then(|v| v.trim().parse::<u32>().ok())
            .ok_or_else(|| bad(format!("bad header {header:?}")))?;
        if version != BACKOFF_VERSION {
            return Err(Error::VersionMismatch {
                what: "back-off model",
                expected: BACKOFF_VERSION,
                found: version,
            });
        }
        let max_order: usize = field(&mut lines, "max_order")?;
        check_order(max_order)?;
        let vocab_size: usize = field(&mut lines, "vocab_size")?;
        let k_gt: u64 = field(&mut lines, "k_gt")?;
        let unigram_pseudocount: f64 = field(&mut lines, "unigram_pseudocount")?;
        let mut tables = Vec::with_capacity(max_order + 1);
        for len in 1..=max_order + 1 {
            let head: String = field(&mut lines, "order")?;
            let (l, n) = head
                .split_once(' ')
                .ok_or_else(|| bad(format!("bad order line {head:?}")))?;
            if l.parse::<usize>().ok() != Some(len) {
                return Err(bad(format!("expected order {len}, got {l}")));
            }
            let n: usize = n.trim().parse().map_err(|e| bad(format!("{e}")))?;
            let mut table = HashMap::with_capacity(n);
            for _ in 0..n {
                let line = next(&mut lines)?;
                let nums = line
                    .split_whitespace()
                    .map(str::parse::<u64>)
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| bad(format!("{e}")))?;
                if nums.len() != len + 1 || nums[..len].iter().any(|&id| id as usize >= vocab_size) {
                    return Err(bad(format!("bad count line {line:?}")));
                }
                let tuple = nums[..len].iter().map(|&id| id as TokenId).collect();
                table.insert(tuple, nums[len]);
            }
            tables.push(table);
        }
        let total_unigrams = tables[0].values().sum();
        let counts = CountTable {
            tables,
            total_unigrams,
        };
        // warnings were already given when the model was first built
        Self::build_inner(
            counts,
            vocab_size,
            BackoffConfig {
                k_gt,
                unigram_pseudocount,
            },
            false,
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// Counts the corpus and builds the smoothed model in one step.
pub fn train_backoff(
    sentences: &[Vec<TokenId>],
    max_order: usize,
    vocab_size: usize,
    config: BackoffConfig,
) -> Result<BackoffModel> {
    BackoffModel::build(count_ngrams(sentences, max_order)?, vocab_size, config)
}

/// Index and value of the maximum; the first index wins ties.
pub(crate) fn argmax(values: &[f64]) -> (TokenId, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &p) in values.iter().enumerate() {
        if p > best.1 {
            best = (i as TokenId, p);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::{sentences_from_text, CleaningConfig};
    use crate::vocab::build_vocabulary;

    fn encoded(text: &str) -> (crate::Vocabulary, Vec<Vec<TokenId>>) {
        let sentences = sentences_from_text(text, &CleaningConfig::romanized());
        let vocab = build_vocabulary(&sentences, 1).unwrap();
        let enc = sentences.iter().map(|s| vocab.encode_all(s.tokens())).collect();
        (vocab, enc)
    }

    fn toy() -> (crate::Vocabulary, BackoffModel) {
        let (v, s) = encoded("ami bhat khai । ami pani khai ।");
        let m = train_backoff(&s, 2, v.size(), BackoffConfig::default()).unwrap();
        (v, m)
    }

    #[test]
    fn counts_by_hand() {
        let (v, s) = encoded("a b a b");
        let c = count_ngrams(&s, 1).unwrap();
        let (a, b) = (v.encode("a"), v.encode("b"));
        assert_eq!(c.get(&[a]), 2);
        assert_eq!(c.get(&[b]), 2);
        assert_eq!(c.get(&[a, b]), 2);
        assert_eq!(c.get(&[b, a]), 1);
        assert_eq!(c.table(2).unwrap().len(), 2);

        let empty = count_ngrams(&[], 3).unwrap();
        assert!(empty.table(1).unwrap().is_empty());
        assert_eq!(empty.total_unigrams(), 0);

        let (v, s) = encoded("a a a");
        let a = v.encode("a");
        let c = count_ngrams(&s, 2).unwrap();
        assert_eq!(c.get(&[a, a, a]), 1);
        assert!(matches!(count_ngrams(&s, 6), Err(Error::OrderOutOfRange(6))));
    }

    #[test]
    fn mle_examples() {
        let (v, m) = toy();
        let e = |t: &str| v.encode(t);
        assert_eq!(m.mle_prob(&[e("ami")], e("bhat")).unwrap(), 0.5);
        assert_eq!(m.mle_prob(&[e("ami"), e("bhat")], e("khai")).unwrap(), 1.0);
        assert!(matches!(
            m.mle_prob(&[v.encode("xyz")], e("ami")),
            Err(Error::UnseenContext(_))
        ));
    }

    #[test]
    fn katz_normalizes_on_toy_context() {
        let (v, m) = toy();
        let total: f64 = (0..v.size() as TokenId).map(|w| m.katz_prob(&[v.encode("ami")], w)).sum();
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn counts_above_threshold_are_not_discounted() {
        let (v, s) = encoded(&"ek dui tin ।".repeat(7));
        let m = train_backoff(&s, 2, v.size(), BackoffConfig::default()).unwrap();
        let ctx = [v.encode("ek")];
        for w in 0..v.size() as TokenId {
            if m.counts().get(&[ctx[0], w]) > 0 {
                assert_eq!(m.katz_prob(&ctx, w), m.mle_prob(&ctx, w).unwrap());
            }
        }
    }

    #[test]
    fn count_of_count_gap_leaves_counts_undiscounted() {
        // every bigram occurs once, so N_2 = 0 and d_1 falls back to 1
        let (v, s) = encoded("a b । a c ।");
        let m = train_backoff(&s, 1, v.size(), BackoffConfig::default()).unwrap();
        assert_eq!(m.discount(2, 1), 1.0);
        assert_eq!(m.alpha(&[v.encode("a")]), 0.0);
        assert_eq!(m.katz_prob(&[v.encode("a")], v.encode("d")), 0.0);
    }

    #[test]
    fn mass_backs_off_to_unseen_words() {
        // bigram N_1 = 6, N_2 = 2, N_3 = 0: d_1 = 2 * 2 / 6, d_2 undiscounted
        let (v, s) = encoded("a b । a c । a b । x y । z w ।");
        let m = train_backoff(&s, 1, v.size(), BackoffConfig::default()).unwrap();
        let a = v.encode("a");
        assert!((m.discount(2, 1) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.discount(2, 2), 2.0);

        // alpha(a) = leftover discounted mass / unigram mass of words never seen after "a"
        let seen = [v.encode("b"), v.encode("c")];
        let seen_mass = (2.0 + 2.0 / 3.0) / 3.0;
        let unigram = |w: TokenId| (m.counts().get(&[w]) as f64 + 1.0) / (15.0 + v.size() as f64);
        let unseen: f64 = (0..v.size() as TokenId)
            .filter(|w| !seen.contains(w))
            .map(unigram)
            .sum();
        let alpha = (1.0 - seen_mass) / unseen;
        assert!((m.alpha(&[a]) - alpha).abs() < 1e-12);
        let d = v.encode("d");
        assert!(m.katz_prob(&[a], d) > 0.0);
        assert!((m.katz_prob(&[a], d) - alpha * unigram(d)).abs() < 1e-12);
    }

    #[test]
    fn predictions_on_toy_corpus() {
        let (v, m) = toy();
        let (w, p) = m.predict_next(&[v.encode("ami"), v.encode("bhat")]);
        assert_eq!(v.decode(w), Some("khai"));
        assert_eq!(p, 1.0);
        let (w, _) = m.predict_next(&[v.encode("khai")]);
        assert_eq!(v.decode(w), Some("।"));
    }

    #[test]
    fn ties_go_to_lowest_id() {
        let (v, m) = toy();
        // after "ami", bhat and pani are equally likely
        let (w, _) = m.predict_next(&[v.encode("ami")]);
        assert_eq!(w, v.encode("bhat").min(v.encode("pani")));
        for _ in 0..3 {
            assert_eq!(m.predict_next(&[v.encode("ami")]).0, w);
        }
    }

    #[test]
    fn unseen_context_backs_off_with_constant_ratio() {
        let (v, m) = toy();
        let ctx = [v.encode("pani"), v.encode("ami")];
        assert_eq!(m.alpha(&ctx), 1.0);
        for w in 0..v.size() as TokenId {
            assert_eq!(m.katz_prob(&ctx, w), m.katz_prob(&ctx[1..], w));
        }
    }

    #[test]
    fn distribution_matches_pointwise() {
        let (v, m) = toy();
        for ctx in [vec![], vec![1], vec![1, 4], vec![3, 3, 1, 4], vec![0, 0]] {
            let dist = m.distribution(&ctx);
            for w in 0..v.size() as TokenId {
                assert!((dist[w as usize] - m.katz_prob(&ctx, w)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn text_round_trip() {
        let (_, m) = toy();
        let text = m.to_text();
        let back = BackoffModel::from_text(&text).unwrap();
        assert_eq!(back.to_text(), text);
        assert_eq!(back.distribution(&[1]), m.distribution(&[1]));
        let bumped = text.replacen("nextword-backoff 1", "nextword-backoff 2", 1);
        assert!(matches!(
            BackoffModel::from_text(&bumped),
            Err(Error::VersionMismatch { found: 2, .. })
        ));
    }
}
