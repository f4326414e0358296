//! Next-token ranking.
//!
//! The built-in predictor is an adaptive order-k context model: for each
//! order `o <= k` it counts which tokens followed each length-`o` context.
//! A ranking comes from the highest order whose current context has been
//! seen, ordering tokens by descending count and then ascending id. Unseen
//! tokens follow the seen ones in ascending id order, so a fresh model ranks
//! every token at its own id.

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::tokenizer::{Token, MAX_VOCAB};

pub const MAX_ORDER: u8 = 8;

/// Default context order for byte-level streams.
pub const DEFAULT_ORDER: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictorKind {
    /// Order-k context model alone.
    Builtin,
    /// Out-of-process model speaking the line protocol.
    External,
    /// Order-k context model behind a long-range match model.
    ContextMatch,
}

impl PredictorKind {
    pub fn as_u8(self) -> u8 {
        match self {
            PredictorKind::Builtin => 0,
            PredictorKind::External => 1,
            PredictorKind::ContextMatch => 2,
        }
    }

    pub fn from_u8(b: u8) -> Option<Self> {
        match b {
            0 => Some(PredictorKind::Builtin),
            1 => Some(PredictorKind::External),
            2 => Some(PredictorKind::ContextMatch),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PredictorConfig {
    pub kind: PredictorKind,
    pub order: u8,
    pub vocab_size: u32,
}

impl PredictorConfig {
    pub fn builtin(order: u8, vocab_size: u32) -> Self {
        PredictorConfig {
            kind: PredictorKind::Builtin,
            order,
            vocab_size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 || self.vocab_size > MAX_VOCAB {
            return Err(Error::Config(format!(
                "vocabulary size {} outside 1..={MAX_VOCAB}",
                self.vocab_size
            )));
        }
        if self.kind != PredictorKind::External && self.order > MAX_ORDER {
            return Err(Error::Config(format!(
                "context order {} exceeds maximum {MAX_ORDER}",
                self.order
            )));
        }
        Ok(())
    }

    /// `kind u8 | k u8 | vocab-size u32-LE`
    pub fn to_bytes(&self) -> [u8; 6] {
        let mut out = [0u8; 6];
        out[0] = self.kind.as_u8();
        out[1] = self.order;
        out[2..].copy_from_slice(&self.vocab_size.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8; 6]) -> Result<Self> {
        let kind = PredictorKind::from_u8(bytes[0])
            .ok_or_else(|| Error::Format(format!("unknown predictor kind {}", bytes[0])))?;
        let config = PredictorConfig {
            kind,
            order: bytes[1],
            vocab_size: u32::from_le_bytes(bytes[2..].try_into().unwrap()),
        };
        config.validate().map_err(|e| Error::Format(e.to_string()))?;
        Ok(config)
    }
}

/// Anything that can drive rank coding: maps a token to its rank under the
/// current state (encoder side) or a rank back to its token (decoder side),
/// then advances its state with that token.
pub trait Predictor {
    fn vocab_size(&self) -> u32;

    /// Rank of `token` under the current state, then update with `token`.
    fn encode(&mut self, token: Token) -> Result<u32>;

    /// Token at `rank` under the current state, then update with that token.
    fn decode(&mut self, rank: u32) -> Result<Token>;
}

/// A full ordering of the vocabulary for one predictor state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ranking {
    by_rank: Vec<Token>,
    by_token: Vec<u32>,
}

impl Ranking {
    pub fn from_order(by_rank: Vec<Token>) -> Self {
        let mut by_token = vec![0u32; by_rank.len()];
        for (r, &t) in by_rank.iter().enumerate() {
            by_token[t as usize] = r as u32;
        }
        Ranking { by_rank, by_token }
    }

    pub fn rank_of(&self, token: Token) -> u32 {
        self.by_token[token as usize]
    }

    pub fn token_at(&self, rank: u32) -> Token {
        self.by_rank[rank as usize]
    }

    pub fn len(&self) -> usize {
        self.by_rank.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_rank.is_empty()
    }

    pub fn as_slice(&self) -> &[Token] {
        &self.by_rank
    }
}

type Successors = Vec<(Token, u32)>;

const BITS_PER_TOKEN: u32 = 16;

/// Adaptive order-k context model.
#[derive(Debug, Clone)]
pub struct ContextModel {
    order: usize,
    vocab_size: u32,
    /// `tables[o]` maps a packed length-`o` context to successor counts.
    tables: Vec<FxHashMap<u128, Successors>>,
    /// Last `order` tokens, most recent in the low 16 bits.
    history: u128,
    filled: usize,
    scratch: Vec<(Token, u32)>,
}

impl ContextModel {
    pub fn new(config: &PredictorConfig) -> Result<Self> {
        config.validate()?;
        if config.kind != PredictorKind::Builtin {
            return Err(Error::Config(
                "context model requires a builtin predictor config".into(),
            ));
        }
        let order = config.order as usize;
        Ok(ContextModel {
            order,
            vocab_size: config.vocab_size,
            tables: (0..=order).map(|_| FxHashMap::default()).collect(),
            history: 0,
            filled: 0,
            scratch: Vec::new(),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    fn context_key(&self, o: usize) -> u128 {
        if o == 0 {
            0
        } else if o as u32 * BITS_PER_TOKEN >= 128 {
            self.history
        } else {
            self.history & ((1u128 << (o as u32 * BITS_PER_TOKEN)) - 1)
        }
    }

    /// Successor counts at the highest order whose context has been seen,
    /// with that order.
    fn selected(&self) -> Option<(usize, &Successors)> {
        (0..=self.order.min(self.filled)).rev().find_map(|o| {
            self.tables[o]
                .get(&self.context_key(o))
                .filter(|s| !s.is_empty())
                .map(|s| (o, s))
        })
    }

    /// Order used by the next prediction, `None` before any update.
    pub fn selected_order(&self) -> Option<usize> {
        self.selected().map(|(o, _)| o)
    }

    /// Count of `token` under the current length-`o` context, 0 if the
    /// context is not yet full or unseen.
    pub fn count(&self, o: usize, token: Token) -> u32 {
        if o > self.order || o > self.filled {
            return 0;
        }
        self.tables[o]
            .get(&self.context_key(o))
            .and_then(|s| s.iter().find(|e| e.0 == token))
            .map_or(0, |e| e.1)
    }

    /// Number of distinct contexts stored at order `o`.
    pub fn context_count(&self, o: usize) -> usize {
        self.tables.get(o).map_or(0, |t| t.len())
    }

    /// Materializes the full ranking for the current state.
    pub fn predict(&self) -> Ranking {
        let seen: &[(Token, u32)] = self.selected().map_or(&[], |(_, s)| s.as_slice());
        let mut order: Vec<(Token, u32)> = seen.to_vec();
        order.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut by_rank: Vec<Token> = order.iter().map(|e| e.0).collect();
        let mut is_seen = vec![false; self.vocab_size as usize];
        for e in seen {
            is_seen[e.0 as usize] = true;
        }
        by_rank.extend((0..self.vocab_size).filter(|&t| !is_seen[t as usize]));
        Ranking::from_order(by_rank)
    }

    fn check_token(&self, token: Token) -> Result<()> {
        if token >= self.vocab_size {
            return Err(Error::Contract(format!(
                "token {token} outside vocabulary of {}",
                self.vocab_size
            )));
        }
        Ok(())
    }

    pub fn update(&mut self, token: Token) -> Result<()> {
        self.check_token(token)?;
        self.record(token);
        Ok(())
    }

    fn record(&mut self, token: Token) {
        for o in 0..=self.order.min(self.filled) {
            let key = self.context_key(o);
            let succ = self.tables[o].entry(key).or_default();
            match succ.iter_mut().find(|e| e.0 == token) {
                Some(e) => e.1 = e.1.saturating_add(1),
                None => succ.push((token, 1)),
            }
        }
        if self.order > 0 {
            self.history = (self.history << BITS_PER_TOKEN) | u128::from(token);
            self.filled = (self.filled + 1).min(self.order);
        }
    }

    /// Rank of `token` under the current state; `token` must be in range.
    pub fn rank_of(&self, token: Token) -> u32 {
        debug_assert!(token < self.vocab_size);
        let Some((_, seen)) = self.selected() else {
            return token;
        };
        let count = seen.iter().find(|e| e.0 == token).map_or(0, |e| e.1);
        if count > 0 {
            seen.iter()
                .filter(|e| e.1 > count || (e.1 == count && e.0 < token))
                .count() as u32
        } else {
            let below = seen.iter().filter(|e| e.0 < token).count() as u32;
            seen.len() as u32 + token - below
        }
    }

    /// Token at `rank` under the current state; `rank` must be in range.
    /// Takes `&mut self` only to reuse a scratch buffer.
    pub fn token_at(&mut self, rank: u32) -> Token {
        debug_assert!(rank < self.vocab_size);
        let mut scratch = std::mem::take(&mut self.scratch);
        scratch.clear();
        if let Some((_, seen)) = self.selected() {
            scratch.extend_from_slice(seen);
        }
        let token = if (rank as usize) < scratch.len() {
            let (_, e, _) = scratch.select_nth_unstable_by(rank as usize, |a, b| {
                b.1.cmp(&a.1).then(a.0.cmp(&b.0))
            });
            e.0
        } else {
            // The (rank - |seen|)-th unseen id in ascending order.
            let mut candidate = rank - scratch.len() as u32;
            scratch.sort_unstable_by_key(|e| e.0);
            for e in scratch.iter() {
                if e.0 <= candidate {
                    candidate += 1;
                } else {
                    break;
                }
            }
            candidate
        };
        self.scratch = scratch;
        token
    }
}

fn check_rank(rank: u32, vocab_size: u32) -> Result<()> {
    if rank >= vocab_size {
        return Err(Error::MalformedStream(format!(
            "rank {rank} outside vocabulary of {vocab_size}"
        )));
    }
    Ok(())
}

impl Predictor for ContextModel {
    fn vocab_size(&self) -> u32 {
        self.vocab_size
    }

    fn encode(&mut self, token: Token) -> Result<u32> {
        self.check_token(token)?;
        let rank = self.rank_of(token);
        self.record(token);
        Ok(rank)
    }

    fn decode(&mut self, rank: u32) -> Result<Token> {
        check_rank(rank, self.vocab_size)?;
        let token = self.token_at(rank);
        self.record(token);
        Ok(token)
    }
}

/// Number of trailing tokens that must recur before the match model
/// follows an earlier occurrence.
pub const MATCH_MIN_LEN: usize = 8;

/// Long-range match predictor.
///
/// After every token, if no match is active and the last
/// [`MATCH_MIN_LEN`] tokens occurred before, the model jumps to the most
/// recent earlier occurrence and predicts the token that followed it. The
/// match then advances one position per correctly predicted token and is
/// dropped on the first miss. History is unbounded, so repeats at any
/// distance are found.
#[derive(Debug, Clone, Default)]
pub struct MatchModel {
    history: Vec<u16>,
    /// Last `MATCH_MIN_LEN` tokens packed 16 bits each; exact, so no
    /// collision handling is needed.
    window: u128,
    /// Window contents -> history index right after their latest occurrence.
    index: FxHashMap<u128, u32>,
    pointer: Option<usize>,
}

impl MatchModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn predicted(&self) -> Option<Token> {
        self.pointer.map(|p| Token::from(self.history[p]))
    }

    pub fn is_active(&self) -> bool {
        self.pointer.is_some()
    }

    pub fn update(&mut self, token: Token) {
        debug_assert!(token < MAX_VOCAB);
        if let Some(p) = self.pointer {
            self.pointer = (Token::from(self.history[p]) == token).then_some(p + 1);
        }
        self.history.push(token as u16);
        self.window = (self.window << BITS_PER_TOKEN) | u128::from(token);
        let len = self.history.len();
        if len >= MATCH_MIN_LEN {
            if self.pointer.is_none() {
                self.pointer = self.index.get(&self.window).map(|&p| p as usize);
            }
            self.index.insert(self.window, len as u32);
        }
    }
}

/// Order-k context model with a [`MatchModel`] in front: whenever a match
/// is active its predicted token takes rank 0 and every other token keeps
/// the context model's relative order.
#[derive(Debug, Clone)]
pub struct ContextMatchModel {
    context: ContextModel,
    matcher: MatchModel,
}

impl ContextMatchModel {
    pub fn new(config: &PredictorConfig) -> Result<Self> {
        if config.kind != PredictorKind::ContextMatch {
            return Err(Error::Config(
                "context+match model requires a context-match predictor config".into(),
            ));
        }
        let inner = PredictorConfig {
            kind: PredictorKind::Builtin,
            ..*config
        };
        Ok(ContextMatchModel {
            context: ContextModel::new(&inner)?,
            matcher: MatchModel::new(),
        })
    }

    pub fn predict(&self) -> Ranking {
        let base = self.context.predict();
        match self.matcher.predicted() {
            None => base,
            Some(p) => {
                let mut order = Vec::with_capacity(base.len());
                order.push(p);
                order.extend(base.as_slice().iter().copied().filter(|&t| t != p));
                Ranking::from_order(order)
            }
        }
    }

    pub fn update(&mut self, token: Token) -> Result<()> {
        self.context.update(token)?;
        self.matcher.update(token);
        Ok(())
    }
}

impl Predictor for ContextMatchModel {
    fn vocab_size(&self) -> u32 {
        self.context.vocab_size
    }

    fn encode(&mut self, token: Token) -> Result<u32> {
        self.context.check_token(token)?;
        let rank = match self.matcher.predicted() {
            Some(p) if p == token => 0,
            Some(p) => {
                let r = self.context.rank_of(token);
                r + u32::from(r < self.context.rank_of(p))
            }
            None => self.context.rank_of(token),
        };
        self.context.record(token);
        self.matcher.update(token);
        Ok(rank)
    }

    fn decode(&mut self, rank: u32) -> Result<Token> {
        check_rank(rank, self.context.vocab_size)?;
        let token = match self.matcher.predicted() {
            Some(p) if rank == 0 => p,
            Some(p) => {
                let r = rank - 1;
                if r < self.context.rank_of(p) {
                    self.context.token_at(r)
                } else {
                    self.context.token_at(r + 1)
                }
            }
            None => self.context.token_at(rank),
        };
        self.context.record(token);
        self.matcher.update(token);
        Ok(token)
    }
}

/// Fresh builtin predictor for `config`; external predictors are opened
/// through [`crate::external::ExternalPredictor`].
pub fn builtin_predictor(config: &PredictorConfig) -> Result<Box<dyn Predictor>> {
    match config.kind {
        PredictorKind::Builtin => Ok(Box::new(ContextModel::new(config)?)),
        PredictorKind::ContextMatch => Ok(Box::new(ContextMatchModel::new(config)?)),
        PredictorKind::External => Err(Error::Config(
            "external predictors are not built in".into(),
        )),
    }
}
