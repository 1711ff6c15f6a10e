//! Byte-level tokenizer. Token ids 0..=255 are raw bytes; two specials
//! follow. There is no merging, so encoding is trivially reversible.

use crate::error::{Error, Result};

pub const BOS_TOKEN: u32 = 256;
pub const EOS_TOKEN: u32 = 257;
pub const VOCAB_SIZE: usize = 258;

/// UTF-8 text to token ids, with BOS prepended. Every prompt therefore has
/// at least one token, so prefill never sees an empty sequence.
pub fn encode_prompt(text: &str) -> Vec<u32> {
    let mut out = Vec::with_capacity(text.len() + 1);
    out.push(BOS_TOKEN);
    out.extend(text.bytes().map(u32::from));
    out
}

/// Token ids back to bytes. Specials are dropped; ids outside the vocab are
/// an error.
pub fn decode_bytes(tokens: &[u32]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(tokens.len());
    for &t in tokens {
        if t < 256 {
            out.push(t as u8);
        } else if t != BOS_TOKEN && t != EOS_TOKEN {
            return Err(Error::TokenOutOfVocab {
                token: t,
                vocab_size: VOCAB_SIZE,
            });
        }
    }
    Ok(out)
}
