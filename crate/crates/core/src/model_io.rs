//! Binary model files.
//!
//! Layout, all integers and floats little-endian:
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 4    | magic `b"MHRN"`                         |
//! | 4      | 4    | format version (`1`)                    |
//! | 8      | 4    | `V`, alphabet size                      |
//! | 12     | 4    | `H`, hidden size                        |
//! | 16     | 4    | `N`, head count including control head  |
//! | 20     | 4    | flags; bit 0 set when the last head is a control head |
//! | 24     | 8    | alphabet hash (FNV-1a, see [`Alphabet::hash`]) |
//! | 32     | ...  | `f64` values                            |
//!
//! The values follow in this order, each matrix row-major: `W_xh` (`V x H`),
//! `W_hh` (`H x H`), `b_h` (`H`), then for each head `W_hy` (`H x V`) and
//! `b_y` (`V`).

use std::path::Path;

use crate::error::{Error, Result};
use crate::preprocess::Alphabet;
use crate::rnn::ModelParams;

pub const MAGIC: &[u8; 4] = b"MHRN";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 32;
const FLAG_CONTROL: u32 = 1;

pub fn encode_model(params: &ModelParams, alphabet: &Alphabet) -> Result<Vec<u8>> {
    if alphabet.len() != params.vocab_size() {
        return Err(Error::Config(format!(
            "alphabet has {} symbols but the model expects {}",
            alphabet.len(),
            params.vocab_size()
        )));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * params.num_params());
    out.extend_from_slice(MAGIC);
    for v in [
        VERSION,
        params.vocab_size() as u32,
        params.hidden_size() as u32,
        params.num_heads() as u32,
        if params.has_control_head() { FLAG_CONTROL } else { 0 },
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&alphabet.hash().to_le_bytes());
    for block in params.blocks() {
        for v in block {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Decode a model, rejecting it unless it was saved with `alphabet`.
pub fn decode_model(bytes: &[u8], alphabet: &Alphabet) -> Result<ModelParams> {
    let bad = |m: &str| Error::Config(format!("model file: {m}"));
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(bad("not a model file"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    if u32_at(4) != VERSION {
        return Err(bad(&format!("unsupported version {}", u32_at(4))));
    }
    let (v, h, n, flags) = (u32_at(8) as usize, u32_at(12) as usize, u32_at(16) as usize, u32_at(20));
    let hash = u64::from_le_bytes(bytes[24..32].try_into().expect("8 bytes"));
    if hash != alphabet.hash() {
        return Err(Error::AlphabetMismatch { model: hash, alphabet: alphabet.hash() });
    }
    if v != alphabet.len() {
        return Err(bad(&format!("V = {v} but alphabet has {} symbols", alphabet.len())));
    }
    let control = flags & FLAG_CONTROL != 0;
    if control && n == 0 {
        return Err(bad("control flag set without heads"));
    }
    let mut params = ModelParams::zeros(v, h, n);
    params.set_control_head(control);
    let expected = HEADER_LEN + 8 * params.num_params();
    if bytes.len() != expected {
        return Err(bad(&format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let mut values = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    for block in params.blocks_mut() {
        for (dst, src) in block.iter_mut().zip(&mut values) {
            *dst = src;
        }
    }
    Ok(params)
}

pub fn save_model(path: &Path, params: &ModelParams, alphabet: &Alphabet) -> Result<()> {
    std::fs::write(path, encode_model(params, alphabet)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path, alphabet: &Alphabet) -> Result<ModelParams> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes, alphabet)
}

pub fn save_alphabet(path: &Path, alphabet: &Alphabet) -> Result<()> {
    std::fs::write(path, alphabet.to_text()).map_err(|e| Error::io(path, e))
}

pub fn load_alphabet(path: &Path) -> Result<Alphabet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Alphabet::from_text(&text).map_err(|e| Error::Format { path: path.into(), message: e.to_string() })
}
