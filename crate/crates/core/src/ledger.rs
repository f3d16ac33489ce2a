//! Blocks, the chain tree and its lifecycle: append, verify, redact, branch.
//!
//! A `ChainGraph` is a rooted tree stored in insertion order. Each node's
//! first child sits on its primary edge. Any further child of a node is an
//! intermediate block that shares the node's emitted next prefix and opens a
//! side branch. Redacting a node keeps that emitted prefix fixed, so every
//! branch below it stays valid.
//!
//! The graph is single-writer: mutation needs `&mut`, verification only `&`.

use std::fmt;
use std::time::{SystemTime, UNIX_EPOCH};

use num_bigint::BigUint;
use num_traits::One;

use crate::keys::{self, derive_genesis_prefix, PrivateKey, PublicParams, MAX_PAD_OFFSET};
use crate::linkage::{self, LinkInput, Suffix};
use crate::modmath::{self, RngSeed};
use crate::{Error, Result};

/// Content carried by every intermediate block.
pub const INTERMEDIATE_MARKER: &[u8] = b"INTERMEDIATE\x00";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BlockKind {
    Normal,
    Intermediate,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub prefix: BigUint,
    pub content: Vec<u8>,
    pub suffix: Suffix,
    /// Public padding offset applied to the hash-derived exponent.
    pub offset: i64,
    pub kind: BlockKind,
}

impl Block {
    pub fn link_input(&self) -> LinkInput<'_> {
        LinkInput::new(&self.prefix, &self.content)
    }

    /// Recomputes `X^(d^2 + 1) mod n` from the stored fields.
    pub fn emitted_prefix(&self, pp: &PublicParams) -> Result<BigUint> {
        let raw = linkage::hash_to_exponent(&self.link_input(), pp)?;
        let d = keys::apply_offset(&raw, self.offset).ok_or(Error::InvalidSuffix)?;
        linkage::link(&self.suffix, &d, pp)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainHeader {
    pub params: PublicParams,
    pub chain_id: String,
}

#[derive(Clone, Debug)]
struct Node {
    block: Block,
    parent: Option<usize>,
    children: Vec<usize>,
    /// Cached emitted next prefix. Never consulted by `verify`.
    emitted: Option<BigUint>,
}

#[derive(Clone, Debug)]
pub struct ChainGraph {
    header: ChainHeader,
    nodes: Vec<Node>,
}

/// Audit entry returned by [`ChainGraph::redact`].
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RedactionRecord {
    pub block: usize,
    pub old_content_digest: String,
    pub new_content_digest: String,
    pub new_offset: i64,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

/// One checked parent-to-child link. `parent == None` is the genesis edge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeCheck {
    pub parent: Option<usize>,
    pub child: usize,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerificationReport {
    pub header_ok: bool,
    pub edges: Vec<EdgeCheck>,
    pub suffix_violations: Vec<usize>,
    /// Structural problems: bad offsets, misplaced or malformed intermediates.
    pub structure_violations: Vec<(usize, String)>,
}

impl VerificationReport {
    pub fn ok(&self) -> bool {
        self.header_ok
            && self.edges.iter().all(|e| e.ok)
            && self.suffix_violations.is_empty()
            && self.structure_violations.is_empty()
    }

    pub fn failing_edges(&self) -> impl Iterator<Item = &EdgeCheck> {
        self.edges.iter().filter(|e| !e.ok)
    }

    /// Lowest-numbered block implicated by any failure, with a reason.
    pub fn first_failure(&self) -> Option<(usize, String)> {
        let mut found: Vec<(usize, String)> = Vec::new();
        if !self.header_ok {
            found.push((0, "header genesis prefix does not match chain id".into()));
        }
        for e in self.failing_edges() {
            match e.parent {
                Some(p) => found.push((p, format!("link {p} -> {} does not verify", e.child))),
                None => found.push((e.child, "prefix does not equal the genesis prefix".into())),
            }
        }
        for &b in &self.suffix_violations {
            found.push((b, "suffix violates the suffix invariants".into()));
        }
        found.extend(self.structure_violations.iter().cloned());
        found.into_iter().min_by_key(|(b, _)| *b)
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "header: {}", if self.header_ok { "ok" } else { "FAIL" })?;
        for e in &self.edges {
            let from = e.parent.map_or_else(|| "genesis".to_string(), |p| p.to_string());
            writeln!(f, "edge {from} -> {}: {}", e.child, if e.ok { "ok" } else { "FAIL" })?;
        }
        for b in &self.suffix_violations {
            writeln!(f, "block {b}: invalid suffix")?;
        }
        for (b, why) in &self.structure_violations {
            writeln!(f, "block {b}: {why}")?;
        }
        write!(f, "overall: {}", if self.ok() { "PASS" } else { "FAIL" })
    }
}

impl ChainGraph {
    /// Empty chain whose genesis prefix is derived from `chain_id`.
    pub fn init(pp: &PublicParams, chain_id: &str) -> Result<Self> {
        let params = PublicParams::for_chain(pp.modulus().clone(), pp.hash_alg(), chain_id)?;
        Ok(ChainGraph {
            header: ChainHeader { params, chain_id: chain_id.to_string() },
            nodes: Vec::new(),
        })
    }

    /// Rebuilds a graph from stored blocks in file order. Only the tree
    /// shape is checked here: block 0 is the root and every other block's
    /// parent precedes it. Cryptographic checks are left to [`verify`].
    ///
    /// [`verify`]: ChainGraph::verify
    pub fn from_parts(header: ChainHeader, blocks: Vec<(Option<usize>, Block)>) -> Result<Self> {
        let mut nodes: Vec<Node> = Vec::with_capacity(blocks.len());
        for (i, (parent, block)) in blocks.into_iter().enumerate() {
            match parent {
                None if i != 0 => {
                    return Err(Error::Parse(format!("blocks[{i}].parent: only block 0 may be the root")))
                }
                Some(_) if i == 0 => return Err(Error::Parse("blocks[0].parent: block 0 must be the root".into())),
                Some(p) if p >= i => {
                    return Err(Error::Parse(format!("blocks[{i}].parent: parent {p} must precede the block")))
                }
                Some(p) => nodes[p].children.push(i),
                None => {}
            }
            let emitted = block.emitted_prefix(&header.params).ok();
            nodes.push(Node { block, parent, children: Vec::new(), emitted });
        }
        Ok(ChainGraph { header, nodes })
    }

    pub fn header(&self) -> &ChainHeader {
        &self.header
    }

    pub fn params(&self) -> &PublicParams {
        &self.header.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn block(&self, pos: usize) -> Option<&Block> {
        self.nodes.get(pos).map(|n| &n.block)
    }

    /// Raw storage access. Bypasses every protocol check and does not touch
    /// the cached link values; meant for loading fixtures and tamper tests.
    pub fn block_mut(&mut self, pos: usize) -> Option<&mut Block> {
        self.nodes.get_mut(pos).map(|n| &mut n.block)
    }

    pub fn parent(&self, pos: usize) -> Option<usize> {
        self.nodes.get(pos).and_then(|n| n.parent)
    }

    pub fn children(&self, pos: usize) -> &[usize] {
        self.nodes.get(pos).map_or(&[], |n| &n.children)
    }

    pub fn blocks(&self) -> impl Iterator<Item = &Block> {
        self.nodes.iter().map(|n| &n.block)
    }

    /// Cached emitted next prefix of `pos`.
    pub fn emitted_prefix(&self, pos: usize) -> Option<&BigUint> {
        self.nodes.get(pos).and_then(|n| n.emitted.as_ref())
    }

    /// End of the primary path from the root, `None` for an empty chain.
    pub fn tip(&self) -> Option<usize> {
        let mut pos = if self.nodes.is_empty() { return None } else { 0 };
        while let Some(&next) = self.nodes[pos].children.first() {
            pos = next;
        }
        Some(pos)
    }

    fn node(&self, pos: usize) -> Result<&Node> {
        self.nodes.get(pos).ok_or(Error::NotFound(pos))
    }

    /// Samples a suffix whose emitted prefix `P` has `P^2 != 1 (mod n)`.
    /// A later redaction solves `X' = P^e'`, which is only a valid suffix
    /// under that condition.
    ///
    /// Honest blocks use offset 0 unless the digest lands on 0 or 1. On tiny
    /// moduli `d^2 + 1` can be a multiple of half the group exponent, making
    /// every `P` a square root of 1; after a run of rejections the offset is
    /// bumped instead.
    fn fresh_block(&self, prefix: BigUint, content: Vec<u8>, kind: BlockKind, seed: &RngSeed) -> Result<(Block, BigUint)> {
        const SAMPLES_PER_OFFSET: usize = 64;
        let pp = self.params();
        let raw = linkage::hash_to_exponent(&LinkInput::new(&prefix, &content), pp)?;
        let first = if raw < BigUint::from(2u8) { 2 - i64::try_from(&raw).unwrap_or(0) } else { 0 };
        let mut rng = seed.rng();
        for offset in first..=MAX_PAD_OFFSET {
            let d = keys::apply_offset(&raw, offset).expect("offset lifts d to at least 2");
            for _ in 0..SAMPLES_PER_OFFSET {
                let suffix = linkage::sample_suffix_with(pp, &mut rng)?;
                let next = linkage::link(&suffix, &d, pp)?;
                if !((&next * &next) % pp.modulus()).is_one() {
                    let block = Block { prefix, content, suffix, offset, kind };
                    return Ok((block, next));
                }
            }
        }
        Err(Error::PaddingExhausted(MAX_PAD_OFFSET))
    }

    fn push(&mut self, parent: Option<usize>, block: Block, emitted: BigUint) -> usize {
        let pos = self.nodes.len();
        if let Some(p) = parent {
            self.nodes[p].children.push(pos);
        }
        self.nodes.push(Node { block, parent, children: Vec::new(), emitted: Some(emitted) });
        pos
    }

    /// Appends a normal block under `parent` (`None` for the first block).
    /// The parent must not have a child yet.
    pub fn append(&mut self, parent: Option<usize>, content: &[u8], seed: &RngSeed) -> Result<usize> {
        let prefix = match parent {
            None if self.nodes.is_empty() => self.params().genesis_prefix().clone(),
            None => return Err(Error::MustBranch("genesis".into())),
            Some(p) => {
                let node = self.node(p)?;
                if !node.children.is_empty() {
                    return Err(Error::MustBranch(format!("block {p}")));
                }
                node.block.emitted_prefix(self.params())?
            }
        };
        let (block, emitted) = self.fresh_block(prefix, content.to_vec(), BlockKind::Normal, seed)?;
        Ok(self.push(parent, block, emitted))
    }

    /// Opens a side branch at `at` by adding an intermediate block that
    /// consumes the same prefix as `at`'s existing child. Returns the
    /// intermediate block's position; extend the branch with `append`.
    pub fn branch(&mut self, at: usize, seed: &RngSeed) -> Result<usize> {
        let node = self.node(at)?;
        let Some(&first) = node.children.first() else {
            return Err(Error::MustAppend(at));
        };
        let prefix = self.nodes[first].block.prefix.clone();
        let (block, emitted) = self.fresh_block(prefix, INTERMEDIATE_MARKER.to_vec(), BlockKind::Intermediate, seed)?;
        Ok(self.push(Some(at), block, emitted))
    }

    /// Replaces the content of block `pos` using the trapdoor. The new
    /// suffix is `P^e'` where `P` is the prefix the block's children consume
    /// and `e'` inverts the padded link exponent mod `phi(n)`. No other
    /// block changes.
    ///
    /// Leaves have no outgoing link and are rejected; rewrite and re-append
    /// them instead. Intermediate blocks keep their marker and are rejected
    /// too.
    pub fn redact(&mut self, sk: &PrivateKey, pos: usize, new_content: &[u8]) -> Result<RedactionRecord> {
        if !sk.matches(self.params()) {
            return Err(Error::KeyMismatch);
        }
        let node = self.node(pos)?;
        if node.block.kind == BlockKind::Intermediate {
            return Err(Error::IntermediateRedaction(pos));
        }
        let Some(&first) = node.children.first() else {
            return Err(Error::LeafRedaction(pos));
        };
        let pp = self.params();
        let n = pp.modulus();
        let target = self.nodes[first].block.prefix.clone();

        let li = LinkInput::new(&node.block.prefix, new_content);
        let pe = keys::pad_exponent(&linkage::hash_to_exponent(&li, pp)?, sk)?;
        let e = keys::redaction_exponent(&pe, sk)?;
        let suffix = Suffix::new(modmath::mod_exp(&target, &e, n)?, n)?;

        let alg = pp.hash_alg();
        let record = RedactionRecord {
            block: pos,
            old_content_digest: hex::encode(alg.digest(&node.block.content)),
            new_content_digest: hex::encode(alg.digest(new_content)),
            new_offset: pe.offset(),
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        };

        let node = &mut self.nodes[pos];
        node.block.content = new_content.to_vec();
        node.block.suffix = suffix;
        node.block.offset = pe.offset();
        node.emitted = Some(target);
        Ok(record)
    }

    /// Checks the whole graph from scratch, ignoring cached link values.
    pub fn verify(&self) -> VerificationReport {
        let pp = self.params();
        let n = pp.modulus();
        let header_ok =
            derive_genesis_prefix(n, pp.hash_alg(), &self.header.chain_id) == *pp.genesis_prefix();
        let mut report = VerificationReport {
            header_ok,
            edges: Vec::new(),
            suffix_violations: Vec::new(),
            structure_violations: Vec::new(),
        };
        if let Some(root) = self.nodes.first() {
            report.edges.push(EdgeCheck { parent: None, child: 0, ok: root.block.prefix == *pp.genesis_prefix() });
        }
        for (i, node) in self.nodes.iter().enumerate() {
            let b = &node.block;
            if !b.suffix.is_valid_for(n) {
                report.suffix_violations.push(i);
            }
            if b.offset.abs() > MAX_PAD_OFFSET {
                report.structure_violations.push((i, format!("offset {} out of range", b.offset)));
            }
            if b.kind == BlockKind::Intermediate && b.content != INTERMEDIATE_MARKER {
                report.structure_violations.push((i, "intermediate block without the marker content".into()));
            }
            for (k, &c) in node.children.iter().enumerate() {
                let child = &self.nodes[c].block;
                if k > 0 && child.kind != BlockKind::Intermediate {
                    report.structure_violations.push((c, format!("side child of block {i} is not intermediate")));
                }
                let ok = linkage::verify_link(&b.link_input(), b.offset, &b.suffix, &child.prefix, pp);
                report.edges.push(EdgeCheck { parent: Some(i), child: c, ok });
            }
        }
        report
    }
}
