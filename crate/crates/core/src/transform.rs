//! Rank coding: every token is replaced by its rank under a predictor that
//! has seen exactly the preceding tokens. The decoder runs an identical
//! predictor in lockstep, so the mapping is exactly invertible.

use crate::error::{Error, Result};
use crate::predictor::{ContextModel, Predictor, PredictorConfig};
use crate::tokenizer::Token;

pub fn forward(tokens: &[Token], config: &PredictorConfig) -> Result<Vec<u32>> {
    let mut model = ContextModel::new(config)?;
    forward_with(tokens, &mut model)
}

pub fn inverse(ranks: &[u32], config: &PredictorConfig) -> Result<Vec<Token>> {
    let mut model = ContextModel::new(config)?;
    inverse_with(ranks, &mut model)
}

/// Forward transform against a caller-supplied fresh predictor.
pub fn forward_with<P: Predictor + ?Sized>(tokens: &[Token], predictor: &mut P) -> Result<Vec<u32>> {
    tokens.iter().map(|&t| predictor.encode(t)).collect()
}

pub fn inverse_with<P: Predictor + ?Sized>(ranks: &[u32], predictor: &mut P) -> Result<Vec<Token>> {
    let vocab = predictor.vocab_size();
    ranks
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            if r >= vocab {
                return Err(Error::MalformedStream(format!(
                    "rank {r} at position {i} outside vocabulary of {vocab}"
                )));
            }
            predictor.decode(r)
        })
        .collect()
}

/// LEB128 encoding: 7 data bits per byte, low group first, high bit set on
/// every byte but the last.
pub fn serialize_ranks(ranks: &[u32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(ranks.len());
    for &r in ranks {
        write_varint(&mut out, r);
    }
    out
}

fn write_varint(out: &mut Vec<u8>, mut value: u32) {
    while value >= 0x80 {
        out.push((value as u8 & 0x7F) | 0x80);
        value >>= 7;
    }
    out.push(value as u8);
}

/// Decodes one varint at `*pos`, advancing it.
fn read_varint(bytes: &[u8], pos: &mut usize) -> Result<u32> {
    let start = *pos;
    let mut value: u64 = 0;
    for shift in (0..35).step_by(7) {
        let Some(&b) = bytes.get(*pos) else {
            return Err(Error::MalformedStream(format!(
                "truncated varint at byte {start}"
            )));
        };
        *pos += 1;
        value |= u64::from(b & 0x7F) << shift;
        if b & 0x80 == 0 {
            return u32::try_from(value).map_err(|_| {
                Error::MalformedStream(format!("varint at byte {start} exceeds 32 bits"))
            });
        }
    }
    Err(Error::MalformedStream(format!(
        "varint at byte {start} exceeds 32 bits"
    )))
}

/// Decodes exactly `expected` varints spanning all of `bytes`.
pub fn deserialize_ranks(bytes: &[u8], expected: usize) -> Result<Vec<u32>> {
    let mut out = Vec::with_capacity(expected.min(bytes.len()));
    let mut pos = 0;
    while out.len() < expected {
        if pos == bytes.len() {
            return Err(Error::MalformedStream(format!(
                "rank stream holds {} ranks, expected {expected}",
                out.len()
            )));
        }
        out.push(read_varint(bytes, &mut pos)?);
    }
    if pos != bytes.len() {
        return Err(Error::MalformedStream(format!(
            "{} trailing bytes after {expected} ranks",
            bytes.len() - pos
        )));
    }
    Ok(out)
}

/// Decodes varints until the end of `bytes`.
pub fn deserialize_all_ranks(bytes: &[u8]) -> Result<Vec<u32>> {
    let mut out = Vec::with_capacity(bytes.len());
    let mut pos = 0;
    while pos < bytes.len() {
        out.push(read_varint(bytes, &mut pos)?);
    }
    Ok(out)
}
