//! Slow, obviously-correct reference implementations used as oracles.

#![allow(dead_code)]

use gpz::corpusgen::XorShift64Star;

/// Ranks of `tokens` under an order-`k` context model, recomputed from
/// scratch at every position by scanning the whole prefix.
pub fn brute_force_ranks(tokens: &[u32], k: usize, vocab: u32) -> Vec<u32> {
    (0..tokens.len())
        .map(|i| {
            let order = brute_force_order(&tokens[..i], k, vocab);
            order.iter().position(|&t| t == tokens[i]).unwrap() as u32
        })
        .collect()
}

/// Full predicted ordering after `history`.
pub fn brute_force_order(history: &[u32], k: usize, vocab: u32) -> Vec<u32> {
    let mut counts = vec![0u32; vocab as usize];
    let i = history.len();
    for o in (0..=k.min(i)).rev() {
        let ctx = &history[i - o..];
        counts.iter_mut().for_each(|c| *c = 0);
        let mut total = 0;
        for p in o..i {
            if &history[p - o..p] == ctx {
                counts[history[p] as usize] += 1;
                total += 1;
            }
        }
        if total > 0 {
            break;
        }
    }
    let mut order: Vec<u32> = (0..vocab).collect();
    order.sort_by(|&a, &b| counts[b as usize].cmp(&counts[a as usize]).then(a.cmp(&b)));
    order
}

/// Token the match model predicts after `history`, found by replaying the
/// pointer rules with a linear backward search for each lookup.
pub fn brute_force_match(history: &[u32], min_len: usize) -> Option<u32> {
    let mut pointer: Option<usize> = None;
    for len in 1..=history.len() {
        let token = history[len - 1];
        if let Some(p) = pointer {
            pointer = (history[p] == token).then_some(p + 1);
        }
        if len >= min_len && pointer.is_none() {
            let window = &history[len - min_len..len];
            pointer = (min_len..len).rev().find(|&e| &history[e - min_len..e] == window);
        }
    }
    pointer.map(|p| history[p])
}

pub fn brute_force_context_match_ranks(tokens: &[u32], k: usize, vocab: u32, min_len: usize) -> Vec<u32> {
    (0..tokens.len())
        .map(|i| {
            let mut order = brute_force_order(&tokens[..i], k, vocab);
            if let Some(p) = brute_force_match(&tokens[..i], min_len) {
                order.retain(|&t| t != p);
                order.insert(0, p);
            }
            order.iter().position(|&t| t == tokens[i]).unwrap() as u32
        })
        .collect()
}

/// Every sequence over `0..alphabet` with length at most `max_len`.
pub fn all_sequences(alphabet: u32, max_len: usize) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for t in 0..alphabet {
                let mut s2: Vec<u32> = s.clone();
                s2.push(t);
                next.push(s2);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// BPE training by rescanning byte strings each round.
pub fn brute_force_train_bpe(corpus: &[u8], target: u32) -> Vec<(u32, u32)> {
    let mut vocab: Vec<Vec<u8>> = (0..=255u8).map(|b| vec![b]).collect();
    let mut seq: Vec<u32> = corpus.iter().map(|&b| b as u32).collect();
    let mut merges = Vec::new();
    while (vocab.len() as u32) < target {
        let mut candidates: Vec<(u32, u32)> = seq.windows(2).map(|w| (w[0], w[1])).collect();
        candidates.sort();
        candidates.dedup();
        let mut best: Option<((u32, u32), usize)> = None;
        for pair in candidates {
            let joined = [vocab[pair.0 as usize].as_slice(), &vocab[pair.1 as usize]].concat();
            if vocab.contains(&joined) {
                continue;
            }
            let n = apply_merge(&seq, pair, u32::MAX).iter().filter(|&&t| t == u32::MAX).count();
            if n >= 2 && best.map_or(true, |(_, c)| n > c) {
                best = Some((pair, n));
            }
        }
        let Some((pair, _)) = best else { break };
        seq = apply_merge(&seq, pair, vocab.len() as u32);
        vocab.push([vocab[pair.0 as usize].as_slice(), &vocab[pair.1 as usize]].concat());
        merges.push(pair);
    }
    merges
}

fn apply_merge(seq: &[u32], pair: (u32, u32), id: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(seq.len());
    let mut i = 0;
    while i < seq.len() {
        if i + 1 < seq.len() && (seq[i], seq[i + 1]) == pair {
            out.push(id);
            i += 2;
        } else {
            out.push(seq[i]);
            i += 1;
        }
    }
    out
}

/// Reflected CRC-32 (polynomial 0xEDB88320), one bit at a time.
pub fn crc32_bitwise(data: &[u8]) -> u32 {
    let mut crc = !0u32;
    for &byte in data {
        crc ^= byte as u32;
        for _ in 0..8 {
            crc = if crc & 1 != 0 { (crc >> 1) ^ 0xEDB8_8320 } else { crc >> 1 };
        }
    }
    !crc
}

pub fn random_bytes(rng: &mut XorShift64Star, len: usize) -> Vec<u8> {
    (0..len).map(|_| rng.next_u64() as u8).collect()
}

const WORDS: &[&str] = &[
    "the", "request", "error", "timeout", "user", "id", "=", "ok", "GET", "/api/v1/items",
    "200", "404", "latency", "ms", "retry", "connection", "closed", "{", "}", "\"key\":",
];

pub fn random_text(rng: &mut XorShift64Star, len: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(len + 16);
    while out.len() < len {
        match rng.below(12) {
            0 => out.push(b'\n'),
            1 => out.extend_from_slice(rng.below(100_000).to_string().as_bytes()),
            _ => out.extend_from_slice(WORDS[rng.below(WORDS.len() as u64) as usize].as_bytes()),
        }
        out.push(b' ');
    }
    out.truncate(len);
    out
}
