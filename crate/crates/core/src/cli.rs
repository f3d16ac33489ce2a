//! The `rbchain` command-line interface.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage error,
//! 3 integrity, crypto or I/O error.

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::attack;
use crate::keys::{self, HashAlg, PrivateKey, PublicParams};
use crate::ledger::{BlockKind, ChainGraph};
use crate::modmath::RngSeed;
use crate::store;
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_ERROR: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "rbchain", version, about = "Redactable blockchain with RSA-style trapdoor links")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a key pair of two safe primes
    Keygen {
        /// Bits per prime
        #[arg(long, env = "RBCHAIN_DEFAULT_BITS", default_value_t = 2048)]
        bits: u64,
        #[arg(long)]
        seed: Option<String>,
        #[arg(long, default_value = "sha256")]
        hash_alg: String,
        #[arg(long)]
        out: PathBuf,
        /// Also write a public-only key file here
        #[arg(long)]
        public_out: Option<PathBuf>,
    },
    /// Create an empty chain
    Init {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        chain_id: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Append a block to a leaf
    Append {
        #[command(flatten)]
        chain: ChainArgs,
        #[command(flatten)]
        content: ContentArgs,
        /// Parent block index; defaults to the tip of the primary path
        #[arg(long)]
        parent: Option<usize>,
        #[arg(long)]
        seed: Option<String>,
    },
    /// Verify every link and print the report
    Verify {
        #[arg(long)]
        chain: PathBuf,
    },
    /// Rewrite a block's content using the private key
    Redact {
        #[command(flatten)]
        chain: ChainArgs,
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        block: usize,
        #[command(flatten)]
        content: ContentArgs,
        /// Audit log (JSON lines); defaults to <chain>.audit.jsonl
        #[arg(long)]
        audit: Option<PathBuf>,
    },
    /// Open a side branch at a block via an intermediate block
    Branch {
        #[command(flatten)]
        chain: ChainArgs,
        #[arg(long)]
        at: usize,
        #[arg(long)]
        seed: Option<String>,
    },
    /// Run the two-step forgery against the weak and the real link
    AttackDemo {
        #[arg(long)]
        key: PathBuf,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long)]
        seed: Option<String>,
    },
    /// Print the blocks of a chain
    Show {
        #[arg(long)]
        chain: PathBuf,
    },
}

#[derive(Debug, Args)]
struct ChainArgs {
    #[arg(long)]
    chain: PathBuf,
    /// Load the chain without verifying it first
    #[arg(long)]
    no_verify: bool,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct ContentArgs {
    #[arg(long)]
    content_str: Option<String>,
    #[arg(long)]
    content_file: Option<PathBuf>,
}

impl ContentArgs {
    fn bytes(&self) -> Result<Vec<u8>> {
        match (&self.content_str, &self.content_file) {
            (Some(s), _) => Ok(s.as_bytes().to_vec()),
            (None, Some(p)) => Ok(fs::read(p)?),
            (None, None) => unreachable!("clap enforces one content source"),
        }
    }
}

fn seed_or_entropy(seed: &Option<String>) -> Result<RngSeed> {
    seed.as_deref().map_or_else(|| Ok(RngSeed::from_entropy()), RngSeed::from_hex)
}

fn load_chain(path: &Path, verify: bool) -> Result<ChainGraph> {
    store::parse_chain(&fs::read_to_string(path)?, verify)
}

fn save_chain(path: &Path, cg: &ChainGraph) -> Result<()> {
    store::write_atomic(path, &store::serialize_chain(cg))
}

fn load_private_key(path: &Path) -> Result<(PublicParams, PrivateKey)> {
    let (pp, sk) = store::parse_key(&fs::read_to_string(path)?)?;
    let sk = sk.ok_or_else(|| Error::InvalidKey(format!("{} has no private part", path.display())))?;
    Ok((pp, sk))
}

/// Parses `args` (including the program name) and runs the command.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn run(command: Command) -> Result<i32> {
    let mut out = std::io::stdout().lock();
    match command {
        Command::Keygen { bits, seed, hash_alg, out: path, public_out } => {
            let alg: HashAlg = hash_alg.parse()?;
            let (pp, sk) = keys::keygen(bits, &seed_or_entropy(&seed)?)?;
            let pp = PublicParams::new(pp.modulus().clone(), alg)?;
            store::write_atomic(&path, &store::serialize_key(&pp, Some(&sk)))?;
            if let Some(p) = public_out {
                store::write_atomic(&p, &store::serialize_key(&pp, None))?;
            }
            writeln!(out, "wrote {}-bit modulus to {}", pp.modulus().bits(), path.display())?;
        }
        Command::Init { key, chain_id, out: path } => {
            let (pp, _) = store::parse_key(&fs::read_to_string(&key)?)?;
            let cg = ChainGraph::init(&pp, &chain_id)?;
            save_chain(&path, &cg)?;
            writeln!(out, "initialized chain {chain_id:?} at {}", path.display())?;
        }
        Command::Append { chain, content, parent, seed } => {
            let mut cg = load_chain(&chain.chain, !chain.no_verify)?;
            let parent = parent.or_else(|| cg.tip());
            let pos = cg.append(parent, &content.bytes()?, &seed_or_entropy(&seed)?)?;
            save_chain(&chain.chain, &cg)?;
            writeln!(out, "appended block {pos}")?;
        }
        Command::Verify { chain } => {
            let cg = load_chain(&chain, false)?;
            let report = cg.verify();
            writeln!(out, "{report}")?;
            return Ok(if report.ok() { EXIT_OK } else { EXIT_VERIFY_FAILED });
        }
        Command::Redact { chain, key, block, content, audit } => {
            let mut cg = load_chain(&chain.chain, !chain.no_verify)?;
            let (_, sk) = load_private_key(&key)?;
            let record = cg.redact(&sk, block, &content.bytes()?)?;
            save_chain(&chain.chain, &cg)?;
            let audit = audit.unwrap_or_else(|| {
                let mut p = chain.chain.clone().into_os_string();
                p.push(".audit.jsonl");
                PathBuf::from(p)
            });
            let mut log = fs::OpenOptions::new().create(true).append(true).open(&audit)?;
            writeln!(log, "{}", serde_json::to_string(&record).expect("record serializes"))?;
            writeln!(out, "redacted block {block} (offset {})", record.new_offset)?;
        }
        Command::Branch { chain, at, seed } => {
            let mut cg = load_chain(&chain.chain, !chain.no_verify)?;
            let pos = cg.branch(at, &seed_or_entropy(&seed)?)?;
            save_chain(&chain.chain, &cg)?;
            writeln!(out, "intermediate block {pos} opens a branch at block {at}")?;
        }
        Command::AttackDemo { key, trials, seed } => {
            let (pp, sk) = load_private_key(&key)?;
            let s = attack::run_trials(&sk, &pp, &seed_or_entropy(&seed)?, trials)?;
            writeln!(out, "weak scheme (X^d): forgeries accepted {}/{}", s.weak_forgeries, s.trials)?;
            writeln!(out, "real scheme (X^(d^2+1)): forgeries rejected {}/{}", s.strong_survivals, s.trials)?;
        }
        Command::Show { chain } => {
            let cg = load_chain(&chain, false)?;
            let pp = cg.params();
            writeln!(out, "chain {:?}  hash {}  modulus {} bits", cg.header().chain_id, pp.hash_alg(), pp.modulus().bits())?;
            for i in 0..cg.len() {
                let b = cg.block(i).expect("index in range");
                let parent = cg.parent(i).map_or_else(|| "-".to_string(), |p| p.to_string());
                let kind = match b.kind {
                    BlockKind::Normal => "normal",
                    BlockKind::Intermediate => "intermediate",
                };
                writeln!(
                    out,
                    "[{i}] parent {parent} {kind} offset {} content {:?}",
                    b.offset,
                    String::from_utf8_lossy(&b.content)
                )?;
            }
        }
    }
    Ok(EXIT_OK)
}
