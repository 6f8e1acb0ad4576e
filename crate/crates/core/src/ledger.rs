//! Append-only, hash-chained record of round outcomes.
//!
//! Every block hashes a fixed little-endian serialization of its fields with
//! SHA-256 and links to its predecessor's hash. Chains export to a JSON-lines
//! file: a header line carrying the genesis model digest, then one block per
//! line, digests as lowercase hex.

use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};

use crate::clients::ClientId;
use crate::error::{Error, Result};
use crate::learner::ParamVector;
use crate::protocol::{Decision, Pools, RoundReport};

const BLOCK_FORMAT_VERSION: u8 = 1;

/// A SHA-256 digest.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub const ZERO: Digest = Digest([0; 32]);

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    /// Parses exactly 64 lowercase hex characters.
    pub fn from_hex(s: &str) -> Option<Digest> {
        if s.len() != 64 || !s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
            return None;
        }
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out).ok()?;
        Some(Digest(out))
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Digest::from_hex(&s).ok_or_else(|| serde::de::Error::custom("expected 64 lowercase hex digits"))
    }
}

/// SHA-256 of `bytes`.
pub fn digest(bytes: &[u8]) -> Digest {
    Digest(Sha256::digest(bytes).into())
}

pub fn model_digest(params: &ParamVector) -> Digest {
    digest(&params.to_le_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Block {
    pub index: u64,
    pub prev_hash: Digest,
    pub hash: Digest,
    pub decision: Decision,
    pub model_digest: Digest,
    /// `(voter, ±1)` in ascending client order.
    pub vote_summary: Vec<(ClientId, i8)>,
    /// Non-zero token changes in ascending client order.
    pub token_deltas: Vec<(ClientId, f64)>,
    pub pool_p: f64,
    pub pool_v: f64,
}

impl Block {
    /// Canonical byte encoding of every field except `hash`.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(
            1 + 8 + 32 + 1 + 32 + 16 + self.vote_summary.len() * 5 + self.token_deltas.len() * 12 + 16,
        );
        out.push(BLOCK_FORMAT_VERSION);
        out.extend_from_slice(&self.index.to_le_bytes());
        out.extend_from_slice(&self.prev_hash.0);
        out.push(self.decision.sign() as u8);
        out.extend_from_slice(&self.model_digest.0);
        out.extend_from_slice(&(self.vote_summary.len() as u64).to_le_bytes());
        for (id, vote) in &self.vote_summary {
            out.extend_from_slice(&id.0.to_le_bytes());
            out.push(*vote as u8);
        }
        out.extend_from_slice(&(self.token_deltas.len() as u64).to_le_bytes());
        for (id, delta) in &self.token_deltas {
            out.extend_from_slice(&id.0.to_le_bytes());
            out.extend_from_slice(&delta.to_le_bytes());
        }
        out.extend_from_slice(&self.pool_p.to_le_bytes());
        out.extend_from_slice(&self.pool_v.to_le_bytes());
        out
    }

    pub fn compute_hash(&self) -> Digest {
        digest(&self.canonical_bytes())
    }

    pub fn pools(&self) -> Pools {
        Pools {
            pool_p: self.pool_p,
            pool_v: self.pool_v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub genesis_model_digest: Digest,
    pub blocks: Vec<Block>,
}

/// Outcome of [`verify_chain`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Verification {
    pub valid: bool,
    pub first_bad_index: Option<u64>,
}

impl Chain {
    pub fn new(genesis_model_digest: Digest) -> Self {
        Self {
            genesis_model_digest,
            blocks: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn head(&self) -> Option<&Block> {
        self.blocks.last()
    }

    /// Model digest currently committed at the head.
    pub fn current_model_digest(&self) -> Digest {
        self.head().map_or(self.genesis_model_digest, |b| b.model_digest)
    }

    /// Pools recorded at the head, or empty pools for a fresh chain.
    pub fn current_pools(&self) -> Pools {
        self.head().map_or(Pools::default(), Block::pools)
    }
}

/// Seals the settled round into a new head block and returns a copy of it.
pub fn append_block(chain: &mut Chain, report: &RoundReport, global_model: &ParamVector) -> Block {
    let prev_hash = chain.head().map_or(Digest::ZERO, |b| b.hash);
    let mut vote_summary: Vec<(ClientId, i8)> = report
        .ballots
        .iter()
        .map(|b| (b.voter, b.vote.sign()))
        .collect();
    vote_summary.sort_by_key(|&(id, _)| id);
    let mut token_deltas: Vec<(ClientId, f64)> = report
        .token_deltas
        .iter()
        .copied()
        .filter(|&(_, d)| d != 0.0)
        .collect();
    token_deltas.sort_by_key(|&(id, _)| id);
    let mut block = Block {
        index: chain.blocks.len() as u64,
        prev_hash,
        hash: Digest::ZERO,
        decision: report.decision,
        model_digest: model_digest(global_model),
        vote_summary,
        token_deltas,
        pool_p: report.pools_after.pool_p,
        pool_v: report.pools_after.pool_v,
    };
    block.hash = block.compute_hash();
    chain.blocks.push(block.clone());
    block
}

/// Recomputes every hash and link; reports the lowest offending index.
pub fn verify_chain(chain: &Chain) -> Verification {
    let mut prev = Digest::ZERO;
    for (i, block) in chain.blocks.iter().enumerate() {
        if block.index != i as u64 || block.prev_hash != prev || block.compute_hash() != block.hash {
            return Verification {
                valid: false,
                first_bad_index: Some(i as u64),
            };
        }
        prev = block.hash;
    }
    Verification {
        valid: true,
        first_bad_index: None,
    }
}

/// Largest absolute per-block imbalance between token deltas and the change
/// in pool totals. Zero for a closed token economy.
pub fn conservation_residual(chain: &Chain) -> f64 {
    let mut prev = Pools::default();
    let mut worst: f64 = 0.0;
    for block in &chain.blocks {
        let deltas: f64 = block.token_deltas.iter().map(|&(_, d)| d).sum();
        let pools = block.pools();
        let residual = deltas + (pools.total() - prev.total());
        worst = worst.max(residual.abs());
        prev = pools;
    }
    worst
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChainHeader {
    genesis_model_digest: Digest,
    /// SHA-256 of the genesis digest bytes, so the header self-verifies.
    header_check: Digest,
}

impl ChainHeader {
    fn new(genesis: Digest) -> Self {
        Self {
            genesis_model_digest: genesis,
            header_check: digest(&genesis.0),
        }
    }
}

/// Renders the chain as JSON lines.
pub fn export_chain_string(chain: &Chain) -> String {
    let mut out = serde_json::to_string(&ChainHeader::new(chain.genesis_model_digest))
        .expect("header serializes");
    out.push('\n');
    for block in &chain.blocks {
        out.push_str(&serde_json::to_string(block).expect("block serializes"));
        out.push('\n');
    }
    out
}

pub fn export_chain(chain: &Chain, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(export_chain_string(chain).as_bytes())
        .map_err(|e| Error::io(path, e))
}

/// Where a chain file first went wrong.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FileVerdict {
    Valid { blocks: usize },
    BadHeader,
    BadBlock { index: u64 },
}

/// Parses an exported chain. A line counts as intact only if it re-encodes to
/// exactly the same bytes, so any edit that survives parsing is still caught.
pub fn parse_chain(text: &[u8]) -> std::result::Result<Chain, FileVerdict> {
    let mut lines: Vec<&[u8]> = text.split(|&b| b == b'\n').collect();
    if lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    let Some((header_line, block_lines)) = lines.split_first() else {
        return Err(FileVerdict::BadHeader);
    };
    let header: ChainHeader = std::str::from_utf8(header_line)
        .ok()
        .and_then(|s| serde_json::from_str(s).ok())
        .ok_or(FileVerdict::BadHeader)?;
    if header.header_check != digest(&header.genesis_model_digest.0)
        || serde_json::to_string(&header).ok().as_deref().map(str::as_bytes) != Some(*header_line)
    {
        return Err(FileVerdict::BadHeader);
    }
    let mut chain = Chain::new(header.genesis_model_digest);
    for (i, line) in block_lines.iter().enumerate() {
        let bad = FileVerdict::BadBlock { index: i as u64 };
        let block: Block = std::str::from_utf8(line)
            .ok()
            .and_then(|s| serde_json::from_str(s).ok())
            .ok_or_else(|| bad.clone())?;
        if serde_json::to_string(&block).ok().as_deref().map(str::as_bytes) != Some(*line) {
            return Err(bad);
        }
        chain.blocks.push(block);
    }
    Ok(chain)
}

/// Loads and verifies an exported chain file.
pub fn verify_chain_file(path: impl AsRef<Path>) -> Result<FileVerdict> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(match parse_chain(&bytes) {
        Err(verdict) => verdict,
        Ok(chain) => match verify_chain(&chain).first_bad_index {
            Some(index) => FileVerdict::BadBlock { index },
            None => FileVerdict::Valid {
                blocks: chain.blocks.len(),
            },
        },
    })
}
