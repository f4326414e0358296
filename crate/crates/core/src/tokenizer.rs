//! Lossless byte <-> token mapping.
//!
//! Ids `0..256` always stand for the corresponding single byte. A BPE
//! vocabulary adds merged ids `256, 257, ...` in merge-list order; the merge
//! list is the only thing serialized, new ids are implicit.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};

pub type Token = u32;

/// Number of single-byte base tokens.
pub const BASE_VOCAB: u32 = 256;

/// Upper bound on vocabulary size accepted anywhere in the pipeline.
pub const MAX_VOCAB: u32 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenizerMode {
    ByteLevel,
    Bpe,
}

impl TokenizerMode {
    pub fn as_u8(self) -> u8 {
        match self {
            TokenizerMode::ByteLevel => 0,
            TokenizerMode::Bpe => 1,
        }
    }

    pub fn from_u8(b: u8) -> Option<Self> {
        match b {
            0 => Some(TokenizerMode::ByteLevel),
            1 => Some(TokenizerMode::Bpe),
            _ => None,
        }
    }
}

/// Immutable token vocabulary: the 256 byte tokens plus an ordered merge list.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    merges: Vec<(Token, Token)>,
    expansions: Vec<Vec<u8>>,
    merge_rank: FxHashMap<(Token, Token), u32>,
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.merges == other.merges
    }
}

impl Eq for Vocabulary {}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::byte_level()
    }
}

impl Vocabulary {
    pub fn byte_level() -> Self {
        Vocabulary {
            merges: Vec::new(),
            expansions: (0..=255u8).map(|b| vec![b]).collect(),
            merge_rank: FxHashMap::default(),
        }
    }

    /// Builds a vocabulary from an ordered merge list, checking that every
    /// merge only references earlier ids and that no two ids expand to the
    /// same bytes.
    pub fn from_merges(merges: Vec<(Token, Token)>) -> Result<Self> {
        if merges.len() as u64 + u64::from(BASE_VOCAB) > u64::from(MAX_VOCAB) {
            return Err(Error::Format(format!(
                "vocabulary of {} merges exceeds the {MAX_VOCAB}-token limit",
                merges.len()
            )));
        }
        let mut vocab = Self::byte_level();
        let mut seen: HashSet<Vec<u8>> = vocab.expansions.iter().cloned().collect();
        for (i, &(left, right)) in merges.iter().enumerate() {
            let next_id = BASE_VOCAB + i as u32;
            if left >= next_id || right >= next_id {
                return Err(Error::Format(format!(
                    "merge {i} ({left}, {right}) references an id not yet defined"
                )));
            }
            let mut bytes = vocab.expansions[left as usize].clone();
            bytes.extend_from_slice(&vocab.expansions[right as usize]);
            if !seen.insert(bytes.clone()) {
                return Err(Error::Format(format!(
                    "merge {i} duplicates the byte expansion of an existing token"
                )));
            }
            if vocab.merge_rank.insert((left, right), i as u32).is_some() {
                return Err(Error::Format(format!("merge {i} repeats pair ({left}, {right})")));
            }
            vocab.expansions.push(bytes);
        }
        vocab.merges = merges;
        Ok(vocab)
    }

    pub fn mode(&self) -> TokenizerMode {
        if self.merges.is_empty() {
            TokenizerMode::ByteLevel
        } else {
            TokenizerMode::Bpe
        }
    }

    pub fn size(&self) -> u32 {
        self.expansions.len() as u32
    }

    pub fn merges(&self) -> &[(Token, Token)] {
        &self.merges
    }

    /// Byte expansion of a single token, if the id exists.
    pub fn expansion(&self, token: Token) -> Option<&[u8]> {
        self.expansions.get(token as usize).map(Vec::as_slice)
    }

    /// Serializes the table block: u32-LE merge count followed by
    /// `(left, right)` u32-LE pairs.
    pub fn to_table_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 8 * self.merges.len());
        out.extend_from_slice(&(self.merges.len() as u32).to_le_bytes());
        for &(l, r) in &self.merges {
            out.extend_from_slice(&l.to_le_bytes());
            out.extend_from_slice(&r.to_le_bytes());
        }
        out
    }

    /// Parses a table block from the front of `bytes`, returning the
    /// vocabulary and the number of bytes consumed.
    pub fn from_table_bytes(bytes: &[u8]) -> Result<(Self, usize)> {
        let count = read_u32(bytes, 0)
            .ok_or_else(|| Error::Format("truncated vocabulary table header".into()))?
            as usize;
        if count as u64 + u64::from(BASE_VOCAB) > u64::from(MAX_VOCAB) {
            return Err(Error::Format(format!("vocabulary table claims {count} merges")));
        }
        let end = 4 + count * 8;
        if bytes.len() < end {
            return Err(Error::Format("truncated vocabulary table".into()));
        }
        let merges = (0..count)
            .map(|i| {
                let at = 4 + i * 8;
                (read_u32(bytes, at).unwrap(), read_u32(bytes, at + 4).unwrap())
            })
            .collect();
        Ok((Self::from_merges(merges)?, end))
    }
}

fn read_u32(bytes: &[u8], at: usize) -> Option<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
}

/// Maps raw bytes to tokens.
///
/// Merges are applied in merge-list order, each one replacing every
/// non-overlapping occurrence left to right. A merge can never recreate an
/// earlier pair, so this equals repeatedly applying the lowest-ranked
/// leftmost pair, which is what the heap below does in O(n log n).
pub fn tokenize(input: &[u8], vocab: &Vocabulary) -> Vec<Token> {
    if vocab.merges.is_empty() || input.len() < 2 {
        return input.iter().map(|&b| Token::from(b)).collect();
    }
    if input.len() >= NONE as usize {
        return tokenize_by_passes(input, vocab);
    }

    let mut tokens: Vec<Token> = input.iter().map(|&b| Token::from(b)).collect();
    let n = tokens.len() as u32;
    let mut next: Vec<u32> = (1..=n).map(|i| if i == n { NONE } else { i }).collect();
    let mut prev: Vec<u32> = (0..n).map(|i| if i == 0 { NONE } else { i - 1 }).collect();
    let mut alive = vec![true; n as usize];

    // Entries pack (merge rank, position) so that min-heap order is rank
    // first, then leftmost.
    let pack = |rank: u32, pos: u32| Reverse((u64::from(rank) << 32) | u64::from(pos));
    let mut heap: BinaryHeap<Reverse<u64>> = tokens
        .windows(2)
        .enumerate()
        .filter_map(|(i, w)| vocab.merge_rank.get(&(w[0], w[1])).map(|&r| pack(r, i as u32)))
        .collect();

    while let Some(Reverse(entry)) = heap.pop() {
        let (rank, pos) = ((entry >> 32) as u32, entry as u32);
        if !alive[pos as usize] {
            continue;
        }
        let right = next[pos as usize];
        if right == NONE
            || (tokens[pos as usize], tokens[right as usize]) != vocab.merges[rank as usize]
        {
            continue;
        }
        tokens[pos as usize] = BASE_VOCAB + rank;
        alive[right as usize] = false;
        let after = next[right as usize];
        next[pos as usize] = after;
        if after != NONE {
            prev[after as usize] = pos;
        }
        let before = prev[pos as usize];
        if before != NONE {
            let pair = (tokens[before as usize], tokens[pos as usize]);
            if let Some(&r) = vocab.merge_rank.get(&pair) {
                heap.push(pack(r, before));
            }
        }
        if after != NONE {
            let pair = (tokens[pos as usize], tokens[after as usize]);
            if let Some(&r) = vocab.merge_rank.get(&pair) {
                heap.push(pack(r, pos));
            }
        }
    }
    drop(heap);

    let mut out = Vec::with_capacity(n as usize);
    let mut at = 0;
    while at != NONE {
        out.push(tokens[at as usize]);
        at = next[at as usize];
    }
    out
}

const NONE: u32 = u32::MAX;

/// Reference form of [`tokenize`]: one full left-to-right pass per merge.
pub fn tokenize_by_passes(input: &[u8], vocab: &Vocabulary) -> Vec<Token> {
    let mut seq: Vec<Token> = input.iter().map(|&b| Token::from(b)).collect();
    for (i, &pair) in vocab.merges.iter().enumerate() {
        merge_pass(&mut seq, pair, BASE_VOCAB + i as u32);
    }
    seq
}

pub fn detokenize(tokens: &[Token], vocab: &Vocabulary) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(tokens.len());
    for (i, &t) in tokens.iter().enumerate() {
        let bytes = vocab.expansion(t).ok_or_else(|| {
            Error::MalformedStream(format!(
                "token {t} at position {i} outside vocabulary of {}",
                vocab.size()
            ))
        })?;
        out.extend_from_slice(bytes);
    }
    Ok(out)
}

/// Trains a BPE vocabulary of at most `target_size` tokens on `corpus`.
///
/// Each round merges the most frequent adjacent pair, counted as
/// non-overlapping left-to-right occurrences, ties going to the smaller
/// `(left, right)` pair. Pairs whose concatenation already names a token are
/// not eligible. Training stops once no pair occurs at least twice.
pub fn train_bpe(corpus: &[u8], target_size: u32) -> Result<Vocabulary> {
    if target_size < BASE_VOCAB {
        return Err(Error::Config(format!(
            "BPE target size {target_size} is below the {BASE_VOCAB} base tokens"
        )));
    }
    if target_size > MAX_VOCAB {
        return Err(Error::Config(format!(
            "BPE target size {target_size} exceeds {MAX_VOCAB}"
        )));
    }

    let mut seq: Vec<Token> = corpus.iter().map(|&b| Token::from(b)).collect();
    let mut expansions: Vec<Vec<u8>> = (0..=255u8).map(|b| vec![b]).collect();
    let mut known: HashSet<Vec<u8>> = expansions.iter().cloned().collect();
    let mut merges = Vec::new();
    let mut counts: FxHashMap<(Token, Token), u32> = FxHashMap::default();

    for new_id in BASE_VOCAB..target_size {
        count_pairs(&seq, &mut counts);
        let best = counts
            .iter()
            .filter(|&(_, &c)| c >= 2)
            .filter(|&(&(l, r), _)| {
                let mut bytes = expansions[l as usize].clone();
                bytes.extend_from_slice(&expansions[r as usize]);
                !known.contains(&bytes)
            })
            .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
            .map(|(&pair, _)| pair);
        let Some((left, right)) = best else { break };

        merge_pass(&mut seq, (left, right), new_id);
        let mut bytes = expansions[left as usize].clone();
        bytes.extend_from_slice(&expansions[right as usize]);
        known.insert(bytes.clone());
        expansions.push(bytes);
        merges.push((left, right));
    }

    if merges.is_empty() {
        return Ok(Vocabulary::byte_level());
    }
    Vocabulary::from_merges(merges)
}

fn count_pairs(seq: &[Token], counts: &mut FxHashMap<(Token, Token), u32>) {
    counts.clear();
    // Only identical pairs can overlap; a run of length L yields L / 2 of them.
    let mut skip_same = false;
    for w in seq.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a == b {
            if skip_same {
                skip_same = false;
                continue;
            }
            skip_same = true;
        } else {
            skip_same = false;
        }
        *counts.entry((a, b)).or_insert(0) += 1;
    }
}

fn merge_pass(seq: &mut Vec<Token>, pair: (Token, Token), new_id: Token) {
    let (mut read, mut write) = (0, 0);
    while read < seq.len() {
        if read + 1 < seq.len() && (seq[read], seq[read + 1]) == pair {
            seq[write] = new_id;
            read += 2;
        } else {
            seq[write] = seq[read];
            read += 1;
        }
        write += 1;
    }
    seq.truncate(write);
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn aa_vocab() -> Vocabulary {
        Vocabulary::from_merges(vec![(97, 97)]).unwrap()
    }

    #[test]
    fn byte_level_is_identity() {
        let v = Vocabulary::byte_level();
        assert_eq!(tokenize(b"abc", &v), vec![97, 98, 99]);
        assert_eq!(detokenize(&[72, 105], &v).unwrap(), b"Hi");
        assert_eq!(v.size(), 256);
        assert_eq!(v.mode(), TokenizerMode::ByteLevel);
    }

    #[test]
    fn empty_input() {
        assert!(tokenize(b"", &Vocabulary::byte_level()).is_empty());
        assert!(tokenize(b"", &aa_vocab()).is_empty());
    }

    #[test]
    fn single_merge_left_to_right() {
        let v = aa_vocab();
        assert_eq!(tokenize(b"aaaa", &v), vec![256, 256]);
        assert_eq!(tokenize(b"aaa", &v), vec![256, 97]);
        assert_eq!(detokenize(&[256], &v).unwrap(), b"aa");
    }

    #[test]
    fn unknown_id_is_malformed() {
        let err = detokenize(&[999], &Vocabulary::byte_level()).unwrap_err();
        assert!(matches!(err, Error::MalformedStream(_)));
    }

    #[test]
    fn train_examples() {
        let v = train_bpe(b"", 300).unwrap();
        assert_eq!(v.size(), 256);
        assert_eq!(train_bpe(b"aaaa", 257).unwrap().merges(), &[(97, 97)]);
        assert_eq!(train_bpe(b"abab", 257).unwrap().merges(), &[(97, 98)]);
        // "abc" has no pair occurring twice.
        assert_eq!(train_bpe(b"abc", 400).unwrap().size(), 256);
        assert!(matches!(train_bpe(b"x", 10), Err(Error::Config(_))));
    }

    #[test]
    fn train_is_deterministic() {
        let corpus = b"the cat sat on the mat; the cat ate the rat".repeat(4);
        let a = train_bpe(&corpus, 300).unwrap();
        let b = train_bpe(&corpus, 300).unwrap();
        assert_eq!(a.merges(), b.merges());
    }

    #[test]
    fn rejects_bad_merge_tables() {
        assert!(Vocabulary::from_merges(vec![(256, 97)]).is_err());
        assert!(Vocabulary::from_merges(vec![(97, 97), (97, 97)]).is_err());
        // (a,b),(ab,c) and (b,c),(a,bc) both expand to "abc".
        assert!(Vocabulary::from_merges(vec![(97, 98), (256, 99), (98, 99), (97, 258)]).is_err());
        assert!(Vocabulary::from_table_bytes(&[1, 0, 0, 0, 97]).is_err());
    }

    #[test]
    fn table_block_layout() {
        let v = aa_vocab();
        assert_eq!(
            v.to_table_bytes(),
            vec![1, 0, 0, 0, 97, 0, 0, 0, 97, 0, 0, 0]
        );
        let (back, used) = Vocabulary::from_table_bytes(&v.to_table_bytes()).unwrap();
        assert_eq!(used, 12);
        assert_eq!(back, v);
    }

    proptest! {
        #[test]
        fn roundtrip_any_vocab(
            corpus in proptest::collection::vec(0u8..6, 0..300),
            input in proptest::collection::vec(any::<u8>(), 0..300),
            extra in 0u32..40,
        ) {
            let vocab = train_bpe(&corpus, 256 + extra).unwrap();
            for text in [&corpus, &input] {
                let tokens = tokenize(text, &vocab);
                prop_assert!(tokens.iter().all(|&t| t < vocab.size()));
                prop_assert_eq!(&detokenize(&tokens, &vocab).unwrap(), text);
                prop_assert_eq!(&tokens, &tokenize_by_passes(text, &vocab));
            }
            let (back, _) = Vocabulary::from_table_bytes(&vocab.to_table_bytes()).unwrap();
            prop_assert_eq!(back, vocab);
        }
    }
}
