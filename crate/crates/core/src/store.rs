//! JSON chain and key files.
//!
//! Big integers are lowercase minimal hex, content bytes are base64 and
//! block parents are explicit indices (`-1` for the root), so files carry
//! no byte-order dependence.

use std::io::Write;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::keys::{HashAlg, PrivateKey, PublicParams};
use crate::ledger::{Block, BlockKind, ChainGraph, ChainHeader};
use crate::linkage::Suffix;
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainFile {
    pub format_version: u32,
    pub header: HeaderRecord,
    pub blocks: Vec<BlockRecord>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeaderRecord {
    pub chain_id: String,
    pub hash_alg: String,
    pub modulus_n: String,
    pub genesis_prefix: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockRecord {
    pub parent: i64,
    pub kind: KindRecord,
    pub prefix: String,
    pub content: String,
    pub suffix: String,
    pub offset: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindRecord {
    Normal,
    Intermediate,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyFile {
    pub format_version: u32,
    pub public: PublicKeyRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub private: Option<PrivateKeyRecord>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PublicKeyRecord {
    pub modulus_n: String,
    pub hash_alg: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivateKeyRecord {
    pub p: String,
    pub q: String,
}

pub fn to_hex(v: &BigUint) -> String {
    format!("{v:x}")
}

/// Parses lowercase minimal hex; `field` names the value in errors.
pub fn from_hex(s: &str, field: &str) -> Result<BigUint> {
    let well_formed = !s.is_empty()
        && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
        && (s == "0" || !s.starts_with('0'));
    if !well_formed {
        return Err(Error::Parse(format!("{field}: expected lowercase minimal hex, got {s:?}")));
    }
    BigUint::parse_bytes(s.as_bytes(), 16).ok_or_else(|| Error::Parse(format!("{field}: invalid hex")))
}

impl ChainFile {
    pub fn from_graph(cg: &ChainGraph) -> Self {
        let pp = cg.params();
        let header = HeaderRecord {
            chain_id: cg.header().chain_id.clone(),
            hash_alg: pp.hash_alg().name().to_string(),
            modulus_n: to_hex(pp.modulus()),
            genesis_prefix: to_hex(pp.genesis_prefix()),
        };
        let blocks = (0..cg.len())
            .map(|i| {
                let b = cg.block(i).expect("index in range");
                BlockRecord {
                    parent: cg.parent(i).map_or(-1, |p| p as i64),
                    kind: match b.kind {
                        BlockKind::Normal => KindRecord::Normal,
                        BlockKind::Intermediate => KindRecord::Intermediate,
                    },
                    prefix: to_hex(&b.prefix),
                    content: BASE64.encode(&b.content),
                    suffix: to_hex(b.suffix.value()),
                    offset: b.offset,
                }
            })
            .collect();
        ChainFile { format_version: FORMAT_VERSION, header, blocks }
    }

    /// Decodes every field and rebuilds the tree. No cryptographic checks.
    pub fn into_graph(self) -> Result<ChainGraph> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Parse(format!("format_version: unsupported {}", self.format_version)));
        }
        let h = &self.header;
        let alg: HashAlg = h.hash_alg.parse()?;
        let params = PublicParams::with_genesis(
            from_hex(&h.modulus_n, "header.modulus_n")?,
            alg,
            from_hex(&h.genesis_prefix, "header.genesis_prefix")?,
        )
        .map_err(|e| Error::Parse(format!("header: {e}")))?;
        let header = ChainHeader { params, chain_id: h.chain_id.clone() };

        let mut parts = Vec::with_capacity(self.blocks.len());
        for (i, r) in self.blocks.into_iter().enumerate() {
            let field = |name: &str| format!("blocks[{i}].{name}");
            let parent = match r.parent {
                -1 => None,
                p if p >= 0 => Some(p as usize),
                p => return Err(Error::Parse(format!("{}: invalid parent {p}", field("parent")))),
            };
            let content = BASE64
                .decode(r.content.as_bytes())
                .map_err(|e| Error::Parse(format!("{}: {e}", field("content"))))?;
            let block = Block {
                prefix: from_hex(&r.prefix, &field("prefix"))?,
                content,
                suffix: Suffix::from_raw(from_hex(&r.suffix, &field("suffix"))?),
                offset: r.offset,
                kind: match r.kind {
                    KindRecord::Normal => BlockKind::Normal,
                    KindRecord::Intermediate => BlockKind::Intermediate,
                },
            };
            parts.push((parent, block));
        }
        ChainGraph::from_parts(header, parts)
    }
}

pub fn serialize_chain(cg: &ChainGraph) -> String {
    let mut s = serde_json::to_string_pretty(&ChainFile::from_graph(cg)).expect("chain file serializes");
    s.push('\n');
    s
}

/// Parses a chain file. With `verify` set, the whole chain is verified and
/// the first failure is reported as an integrity error naming the block.
pub fn parse_chain(text: &str, verify: bool) -> Result<ChainGraph> {
    let file: ChainFile = serde_json::from_str(text).map_err(|e| Error::Parse(format!("chain file: {e}")))?;
    let cg = file.into_graph()?;
    if verify {
        if let Some((block, reason)) = cg.verify().first_failure() {
            return Err(Error::Integrity { block, reason });
        }
    }
    Ok(cg)
}

pub fn serialize_key(pp: &PublicParams, sk: Option<&PrivateKey>) -> String {
    let file = KeyFile {
        format_version: FORMAT_VERSION,
        public: PublicKeyRecord { modulus_n: to_hex(pp.modulus()), hash_alg: pp.hash_alg().name().to_string() },
        private: sk.map(|sk| PrivateKeyRecord { p: to_hex(sk.p()), q: to_hex(sk.q()) }),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("key file serializes");
    s.push('\n');
    s
}

/// Parses a key file, checking `p*q = n` and both safe-prime tests when a
/// private part is present.
pub fn parse_key(text: &str) -> Result<(PublicParams, Option<PrivateKey>)> {
    let file: KeyFile = serde_json::from_str(text).map_err(|e| Error::Parse(format!("key file: {e}")))?;
    if file.format_version != FORMAT_VERSION {
        return Err(Error::Parse(format!("format_version: unsupported {}", file.format_version)));
    }
    let n = from_hex(&file.public.modulus_n, "public.modulus_n")?;
    let pp = PublicParams::new(n, file.public.hash_alg.parse()?)?;
    let sk = match file.private {
        None => None,
        Some(r) => {
            let sk = PrivateKey::from_primes(from_hex(&r.p, "private.p")?, from_hex(&r.q, "private.q")?)?;
            if !sk.matches(&pp) {
                return Err(Error::InvalidKey("p * q does not equal the public modulus".into()));
            }
            Some(sk)
        }
    };
    Ok((pp, sk))
}

/// Replaces `path` with `contents` through a temporary file and rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modmath::RngSeed;

    fn toy_chain() -> (ChainGraph, PrivateKey) {
        let sk = PrivateKey::from_primes(BigUint::from(2039u32), BigUint::from(2063u32)).unwrap();
        let pp = PublicParams::new(sk.modulus(), HashAlg::Sha256).unwrap();
        let mut cg = ChainGraph::init(&pp, "store").unwrap();
        let mut parent = None;
        for i in 0..4u64 {
            parent = Some(cg.append(parent, &[i as u8; 3], &RngSeed::from_u64(i)).unwrap());
        }
        cg.branch(1, &RngSeed::from_u64(10)).unwrap();
        (cg, sk)
    }

    #[test]
    fn hex_rules() {
        assert_eq!(to_hex(&BigUint::from(0u8)), "0");
        assert_eq!(to_hex(&BigUint::from(255u8)), "ff");
        assert_eq!(from_hex("ff", "f").unwrap(), BigUint::from(255u8));
        assert_eq!(from_hex("0", "f").unwrap(), BigUint::from(0u8));
        for bad in ["", "FF", "0ff", "00", "xyz", "-1"] {
            assert!(from_hex(bad, "f").is_err(), "{bad}");
        }
    }

    #[test]
    fn chain_round_trip() {
        let (cg, _) = toy_chain();
        let text = serialize_chain(&cg);
        let back = parse_chain(&text, true).unwrap();
        assert_eq!(serialize_chain(&back), text);
        assert_eq!(back.len(), cg.len());
        for i in 0..cg.len() {
            assert_eq!(back.block(i), cg.block(i));
            assert_eq!(back.parent(i), cg.parent(i));
        }
        assert_eq!(back.header(), cg.header());
    }

    #[test]
    fn tampered_file_reports_block() {
        let (cg, _) = toy_chain();
        let mut file = ChainFile::from_graph(&cg);
        file.blocks[2].content = BASE64.encode(b"evil");
        let text = serde_json::to_string_pretty(&file).unwrap();
        match parse_chain(&text, true) {
            Err(Error::Integrity { block, .. }) => assert_eq!(block, 2),
            other => panic!("expected integrity error, got {other:?}"),
        }
        let loaded = parse_chain(&text, false).unwrap();
        let failing: Vec<_> = loaded.verify().failing_edges().map(|e| (e.parent, e.child)).collect();
        assert_eq!(failing, vec![(Some(2), 3)]);
    }

    #[test]
    fn malformed_files_name_the_field() {
        let (cg, _) = toy_chain();
        let mut file = ChainFile::from_graph(&cg);
        file.blocks[1].suffix = "XYZ".into();
        let err = parse_chain(&serde_json::to_string(&file).unwrap(), false).unwrap_err();
        assert!(err.to_string().contains("blocks[1].suffix"), "{err}");

        let err = parse_chain("{\n  \"format_version\": 1,\n  oops\n}", false).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");

        let mut file = ChainFile::from_graph(&cg);
        file.blocks[2].parent = 7;
        assert!(parse_chain(&serde_json::to_string(&file).unwrap(), false).is_err());
    }

    #[test]
    fn key_round_trip_and_validation() {
        let (cg, sk) = toy_chain();
        let text = serialize_key(cg.params(), Some(&sk));
        let (pp, back) = parse_key(&text).unwrap();
        assert_eq!(pp.modulus(), cg.params().modulus());
        assert_eq!(back.unwrap(), sk);

        let public_only = serialize_key(cg.params(), None);
        assert!(!public_only.contains("private"));
        assert!(parse_key(&public_only).unwrap().1.is_none());

        let mut file: KeyFile = serde_json::from_str(&text).unwrap();
        file.private.as_mut().unwrap().q = to_hex(&BigUint::from(2099u32));
        assert!(parse_key(&serde_json::to_string(&file).unwrap()).is_err());
        file.private.as_mut().unwrap().q = to_hex(&BigUint::from(2041u32));
        assert!(parse_key(&serde_json::to_string(&file).unwrap()).is_err());
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        write_atomic(&path, "one").unwrap();
        write_atomic(&path, "two").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "two");
    }
}
