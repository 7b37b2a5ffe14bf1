//! Operator commands behind the `sif` binary.
//!
//! Every command writes its report to a caller-supplied writer so the
//! integration tests can drive them without spawning processes.

pub mod config;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::net::Ipv4Addr;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use sif_core::adversary::{
    csif_collusion_probe, hbc_uniformity_report, probe_hits_csv, sif_collusion_attack,
    sif_collusion_attack_from_query, CollusionCoalition, Transcript,
};
use sif_core::sif::chain_from_ids;
use sif_core::transport::daemon::{BoundDaemon, Client, DaemonOptions};
use sif_core::transport::sim::SimNetwork;
use sif_core::transport::state_file;
use sif_core::{
    create_archive, Archive, FieldElement, FieldParams, GroupParams, NonceMode, QueryOptions, RepositoryNode, Scheme,
    SharingPolicy,
};
use thiserror::Error;

pub use config::{ArchiveConfig, ElementFormat};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Protocol(#[from] sif_core::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 1 for usage errors, 2 for protocol and transport failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Protocol(_) | CliError::Io(_) => 2,
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;

/// Parses a dotted IPv4 address or a non-negative integer below the modulus.
pub fn parse_element(text: &str, field: FieldParams) -> Result<FieldElement, String> {
    let text = text.trim();
    if text.contains('.') {
        let ip: Ipv4Addr = text.parse().map_err(|_| format!("{text:?} is not an IPv4 address"))?;
        return field.element(u32::from(ip) as u64).map_err(|e| e.to_string());
    }
    let v: u64 = text
        .parse()
        .map_err(|_| format!("{text:?} is neither an IPv4 address nor an integer"))?;
    field.element(v).map_err(|e| e.to_string())
}

/// One element per line; blank lines and `#` comments are skipped.
pub fn parse_elements(text: &str, field: FieldParams) -> CliResult<Vec<FieldElement>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        out.push(parse_element(line, field).map_err(|e| CliError::Usage(format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

pub fn format_element(v: FieldElement, format: ElementFormat) -> String {
    match format {
        ElementFormat::Ipv4 if v.value() <= u32::MAX as u64 => Ipv4Addr::from(v.value() as u32).to_string(),
        _ => v.value().to_string(),
    }
}

fn seed_or_random(flag: Option<u64>, cfg: Option<&ArchiveConfig>) -> u64 {
    flag.or(cfg.and_then(|c| c.seed)).unwrap_or_else(rand::random)
}

fn rng(seed: u64) -> rand_chacha::ChaCha20Rng {
    rand_chacha::ChaCha20Rng::seed_from_u64(seed)
}

fn check_chain(cfg: &ArchiveConfig, ids: &[usize]) -> CliResult {
    if ids.len() != cfg.k {
        return Err(CliError::Usage(format!("chain has {} repositories, the threshold is {}", ids.len(), cfg.k)));
    }
    if let Some(bad) = ids.iter().find(|&&id| id == 0 || id > cfg.n) {
        return Err(CliError::Usage(format!("repository {bad} outside 1..={}", cfg.n)));
    }
    Ok(())
}

fn effective_scheme(cfg: &ArchiveConfig, flag: Option<Scheme>) -> CliResult<Scheme> {
    match flag {
        Some(Scheme::Csif) if cfg.scheme != Scheme::Csif => Err(CliError::Usage(
            "this archive was created for sif; csif needs an archive over the group order".into(),
        )),
        Some(s) => Ok(s),
        None => Ok(cfg.scheme),
    }
}

/// Splits the elements file into `N` state files. No plaintext is written.
pub fn cmd_init(cfg: &ArchiveConfig, elements: &Path, seed: Option<u64>, out: &mut dyn Write) -> CliResult {
    let policy = cfg.policy()?;
    let text = fs::read_to_string(elements)
        .map_err(|e| CliError::Usage(format!("reading {}: {e}", elements.display())))?;
    let els = parse_elements(&text, policy.field())?;
    let archive = create_archive(&policy, &els, &mut rng(seed_or_random(seed, Some(cfg))))?;
    for state in archive.repositories() {
        let path = cfg.state_path(state.repo_id())?;
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        state_file::save(state, &path)?;
        writeln!(
            out,
            "repository {}: {} shares -> {}",
            state.repo_id(),
            state.element_count(),
            path.display()
        )?;
    }
    Ok(())
}

fn load_archive(cfg: &ArchiveConfig) -> CliResult<Archive> {
    let policy = cfg.policy()?;
    let mut states = Vec::with_capacity(cfg.n);
    for id in 1..=cfg.n {
        let path = cfg.state_path(id)?;
        let state = state_file::load(&path).map_err(|e| match e {
            sif_core::Error::Io(io) => CliError::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
            other => CliError::Protocol(other),
        })?;
        if state.policy().field() != policy.field() || state.policy().k() != policy.k() || state.repo_id() != id {
            return Err(CliError::Protocol(sif_core::Error::ParamsMismatch {
                left: policy.field().modulus(),
                right: state.policy().field().modulus(),
            }));
        }
        states.push(state);
    }
    Ok(Archive::from_repositories(states)?)
}

/// Runs one membership query; prints `true` or `false`.
pub fn cmd_query(
    cfg: &ArchiveConfig,
    value: &str,
    chain: Option<Vec<usize>>,
    scheme: Option<Scheme>,
    seed: Option<u64>,
    out: &mut dyn Write,
) -> CliResult {
    let policy = cfg.policy()?;
    let z = parse_element(value, policy.field()).map_err(CliError::Usage)?;
    let ids = chain.unwrap_or_else(|| (1..=cfg.k).collect());
    check_chain(cfg, &ids)?;
    let scheme = effective_scheme(cfg, scheme)?;
    let chain = chain_from_ids(&policy, &ids)?;
    let result = if cfg.is_daemon_mode() {
        Client::new(cfg.endpoints_by_address()?, policy.field(), cfg.timeout()).query(z, &chain, scheme)?
    } else {
        let mut net = SimNetwork::new(load_archive(cfg)?, cfg.group()?, seed_or_random(seed, Some(cfg)));
        net.run_query(z, &chain, scheme)?
    };
    writeln!(out, "{result}")?;
    Ok(())
}

/// Appends one element to every repository.
pub fn cmd_insert(cfg: &ArchiveConfig, value: &str, seed: Option<u64>, out: &mut dyn Write) -> CliResult {
    let policy = cfg.policy()?;
    let v = parse_element(value, policy.field()).map_err(CliError::Usage)?;
    let mut r = rng(seed_or_random(seed, Some(cfg)));
    if cfg.is_daemon_mode() {
        let client = Client::new(cfg.endpoints_by_address()?, policy.field(), cfg.timeout());
        client.insert(&policy, v, &mut r)?;
        let count = client.status(policy.x_coords()[0].value())?.element_count;
        writeln!(out, "inserted {}; {} repositories now hold {count} shares each", value.trim(), cfg.n)?;
        return Ok(());
    }
    let mut net = SimNetwork::new(load_archive(cfg)?, cfg.group()?, r.gen());
    net.insert(v, &mut r)?;
    let archive = net.into_archive()?;
    for state in archive.repositories() {
        state_file::save(state, &cfg.state_path(state.repo_id())?)?;
    }
    writeln!(
        out,
        "inserted {}; {} repositories now hold {} shares each",
        value.trim(),
        cfg.n,
        archive.element_count()?
    )?;
    Ok(())
}

/// Serves one repository until the process is stopped.
pub fn cmd_serve(cfg: &ArchiveConfig, repo_id: usize, seed: Option<u64>, out: &mut dyn Write) -> CliResult {
    if !cfg.is_daemon_mode() {
        return Err(CliError::Usage("serve needs endpoint.N entries in the config".into()));
    }
    if repo_id == 0 || repo_id > cfg.n {
        return Err(CliError::Usage(format!("repository {repo_id} outside 1..={}", cfg.n)));
    }
    let path = cfg.state_path(repo_id)?;
    let state = state_file::load(&path)?;
    if state.repo_id() != repo_id {
        return Err(CliError::Usage(format!(
            "{} holds repository {}, not {repo_id}",
            path.display(),
            state.repo_id()
        )));
    }
    let config = sif_core::node::NodeConfig {
        session_timeout: cfg.timeout().as_millis() as u64,
        ..Default::default()
    };
    let node = RepositoryNode::new(state, cfg.group()?, seed_or_random(seed, Some(cfg)), config);
    let bound = BoundDaemon::bind(cfg.endpoint(repo_id)?)?;
    let local = bound.local_addr()?;
    let options = DaemonOptions {
        timeout: cfg.timeout(),
        state_path: Some(path),
        record: false,
    };
    let handle = bound.start(node, cfg.endpoints_by_address()?, options)?;
    writeln!(out, "repository {repo_id} listening on {local}")?;
    out.flush()?;
    handle.join();
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    SifCollusion,
    CsifProbe,
    HbcReport,
}

impl std::str::FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sif-collusion" => Ok(Scenario::SifCollusion),
            "csif-probe" => Ok(Scenario::CsifProbe),
            "hbc-report" => Ok(Scenario::HbcReport),
            other => Err(format!("unknown scenario {other:?}")),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct AttackArgs {
    pub config: Option<ArchiveConfig>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub candidates: Option<PathBuf>,
    /// hbc-report: run with all-zero nonces.
    pub negative_control: bool,
}

const DEMO_ADDRESSES: [&str; 8] = [
    "10.0.0.1",
    "10.0.0.17",
    "172.16.4.2",
    "192.168.1.10",
    "192.168.1.11",
    "198.51.100.7",
    "203.0.113.99",
    "8.8.4.4",
];

fn write_csv(dir: Option<&Path>, name: &str, csv: &str, out: &mut dyn Write) -> CliResult {
    if let Some(dir) = dir {
        fs::create_dir_all(dir)?;
        let path = dir.join(name);
        fs::write(&path, csv)?;
        writeln!(out, "wrote {}", path.display())?;
    }
    Ok(())
}

pub fn cmd_attack_demo(scenario: Scenario, args: &AttackArgs, out: &mut dyn Write) -> CliResult {
    let seed = seed_or_random(args.seed, args.config.as_ref());
    match scenario {
        Scenario::SifCollusion => sif_collusion_demo(args, seed, out),
        Scenario::CsifProbe => csif_probe_demo(args, seed, out),
        Scenario::HbcReport => hbc_demo(args, seed, out),
    }
}

fn demo_or_config_archive(
    args: &AttackArgs,
    scheme: Scheme,
    demo: impl FnOnce() -> CliResult<(Archive, Vec<FieldElement>)>,
) -> CliResult<(Archive, Option<Vec<FieldElement>>, ElementFormat)> {
    match &args.config {
        Some(cfg) => {
            if cfg.scheme != scheme {
                return Err(CliError::Usage(format!("this scenario needs a {scheme} archive")));
            }
            Ok((load_archive(cfg)?, None, cfg.element_format))
        }
        None => {
            let (archive, input) = demo()?;
            Ok((archive, Some(input), ElementFormat::Ipv4))
        }
    }
}

fn sif_collusion_demo(args: &AttackArgs, seed: u64, out: &mut dyn Write) -> CliResult {
    let (archive, input, format) = demo_or_config_archive(args, Scheme::Sif, || {
        let policy = SharingPolicy::new(5, 3, FieldParams::default())?;
        let input = DEMO_ADDRESSES
            .iter()
            .map(|a| parse_element(a, policy.field()).map_err(CliError::Usage))
            .collect::<CliResult<Vec<_>>>()?;
        Ok((create_archive(&policy, &input, &mut rng(seed))?, input))
    })?;
    let policy = archive.policy().clone();
    let ids: Vec<usize> = (1..=policy.k()).collect();
    let chain = chain_from_ids(&policy, &ids)?;
    let (r1, rk) = (chain[0].value(), chain[chain.len() - 1].value());
    let probe = policy.field().zero();
    writeln!(out, "coalition: repository 1 (initiator) and repository {} (last hop)", policy.k())?;

    let mut honest = SimNetwork::new(archive.clone(), None, seed);
    honest.enable_tap();
    honest.run_query(probe, &chain, Scheme::Sif)?;
    let txn = honest.tap().last().map(|e| e.message.txn()).expect("query delivered messages");
    let coalition = CollusionCoalition::pool(&honest, [r1, rk])?;
    match sif_collusion_attack(&coalition, txn) {
        Ok(_) => writeln!(out, "with nonce erasure: nonces unexpectedly available")?,
        Err(e) => writeln!(out, "with nonce erasure: retained-nonce attack fails ({e})")?,
    }
    let via_query = sif_collusion_attack_from_query(&coalition, txn, probe)?;
    writeln!(
        out,
        "with nonce erasure: query-term variant (nu = Q - Z) still recovers {} elements",
        via_query.recovered().len()
    )?;

    let mut net = SimNetwork::new(archive, None, seed);
    net.enable_tap();
    net.set_options(QueryOptions {
        erase_nonces: false,
        ..QueryOptions::default()
    });
    net.run_query(probe, &chain, Scheme::Sif)?;
    let txn = net.tap().last().map(|e| e.message.txn()).expect("query delivered messages");
    let coalition = CollusionCoalition::pool(&net, [r1, rk])?;
    let recovered = sif_collusion_attack(&coalition, txn)?.recovered().to_vec();
    writeln!(out, "without nonce erasure: recovered {} elements:", recovered.len())?;
    let mut csv = String::from("index,recovered\n");
    for (i, v) in recovered.iter().enumerate() {
        writeln!(out, "  {}", format_element(*v, format))?;
        let _ = writeln!(csv, "{i},{}", v.value());
    }
    if let Some(input) = input {
        writeln!(out, "matches input: {}", if input == recovered { "yes" } else { "NO" })?;
    }
    write_csv(args.out_dir.as_deref(), "sif-collusion.csv", &csv, out)
}

fn csif_probe_demo(args: &AttackArgs, seed: u64, out: &mut dyn Write) -> CliResult {
    let toy = GroupParams::toy();
    let (archive, input, format) = demo_or_config_archive(args, Scheme::Csif, || {
        let policy = SharingPolicy::new(3, 2, toy.field())?;
        let input = vec![toy.field().reduce(3), toy.field().reduce(7)];
        Ok((create_archive(&policy, &input, &mut rng(seed))?, input))
    })?;
    let (group, candidates) = match &args.config {
        Some(cfg) => {
            let group = cfg.group()?.expect("csif config has a group");
            let path = args
                .candidates
                .as_ref()
                .ok_or_else(|| CliError::Usage("csif-probe on a configured archive needs --candidates".into()))?;
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("reading {}: {e}", path.display())))?;
            let field = group.field();
            (group, parse_elements(&text, field)?)
        }
        None => (toy.clone(), (0..11).map(|c| toy.field().reduce(c)).collect()),
    };
    let policy = archive.policy().clone();
    let ids: Vec<usize> = (1..=policy.k()).collect();
    let chain = chain_from_ids(&policy, &ids)?;
    let (r1, rk) = (chain[0].value(), chain[chain.len() - 1].value());
    let mut net = SimNetwork::new(archive, Some(group.clone()), seed);
    net.enable_tap();
    net.set_options(QueryOptions {
        erase_nonces: false,
        ..QueryOptions::default()
    });
    net.run_query(policy.field().zero(), &chain, Scheme::Csif)?;
    let txn = net.tap().last().map(|e| e.message.txn()).expect("query delivered messages");
    let coalition = CollusionCoalition::pool(&net, [r1, rk])?;
    let hits = csif_collusion_probe(&coalition, &group, txn, &candidates)?;
    writeln!(
        out,
        "coalition {{1, {}}} strips the nonces to g^d and tests {} candidates",
        policy.k(),
        candidates.len()
    )?;
    writeln!(out, "index  candidate")?;
    let mut by_index: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for h in &hits {
        by_index.entry(h.index).or_default().push(format_element(h.candidate, format));
    }
    for (i, c) in &by_index {
        writeln!(out, "{i:>5}  {}", c.join(" "))?;
    }
    writeln!(out, "{} dictionary hits", hits.len())?;
    if let Some(input) = input {
        let found: Vec<FieldElement> = hits.iter().map(|h| h.candidate).collect();
        writeln!(out, "planted elements found: {}", if found == input { "all" } else { "not all" })?;
    }
    write_csv(args.out_dir.as_deref(), "csif-probe.csv", &probe_hits_csv(&hits), out)
}

fn hbc_demo(args: &AttackArgs, seed: u64, out: &mut dyn Write) -> CliResult {
    let f = FieldParams::new(11)?;
    let policy = SharingPolicy::new(4, 3, f)?;
    let elements: Vec<_> = [2, 9, 4].iter().map(|&e| f.reduce(e)).collect();
    let archive = create_archive(&policy, &elements, &mut rng(seed))?;
    let mut net = SimNetwork::new(archive, None, seed);
    net.enable_tap();
    net.set_options(QueryOptions {
        nonce_mode: if args.negative_control {
            NonceMode::Zero
        } else {
            NonceMode::Uniform
        },
        ..QueryOptions::default()
    });
    let chain = chain_from_ids(&policy, &[1, 2, 3])?;
    for _ in 0..sif_core::adversary::MIN_QUERIES {
        net.run_query(f.reduce(9), &chain, Scheme::Sif)?;
    }
    let report = hbc_uniformity_report(&Transcript::from_tap(net.tap()), f)?;
    write!(out, "{}", report.to_text())?;
    write_csv(args.out_dir.as_deref(), "hbc-report.csv", &report.to_csv(), out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ipv4_and_integers() {
        let f = FieldParams::default();
        assert_eq!(parse_element("10.0.0.1", f).unwrap().value(), 0x0a00_0001);
        assert_eq!(parse_element("255.255.255.255", f).unwrap().value(), u32::MAX as u64);
        assert_eq!(parse_element(" 854 ", f).unwrap().value(), 854);
        assert!(parse_element("256.1.1.1", f).is_err());
        assert!(parse_element("4294967311", f).is_err());
        assert!(parse_element("-1", f).is_err());
    }

    #[test]
    fn element_errors_name_the_line() {
        let f = FieldParams::default();
        let e = parse_elements("10.0.0.1\n\n# comment\n256.1.1.1\n", f).unwrap_err();
        assert_eq!(e.exit_code(), 1);
        assert!(e.to_string().contains("line 4"), "{e}");
        assert_eq!(parse_elements("", f).unwrap(), vec![]);
    }

    #[test]
    fn formats_round_trip() {
        let f = FieldParams::default();
        let v = parse_element("192.168.1.10", f).unwrap();
        assert_eq!(format_element(v, ElementFormat::Ipv4), "192.168.1.10");
        assert_eq!(format_element(v, ElementFormat::Integer), "3232235786");
    }
}
