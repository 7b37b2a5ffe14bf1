//! `key = value` archive configuration.
//!
//! ```text
//! n = 5
//! k = 3
//! modulus = 4294967311        # optional; cSIF defaults to the group order
//! scheme = sif                # sif | csif
//! group = default             # csif only: default | toy | path to a parameter file
//! state_dir = states          # repository i lives in state_dir/repo-i.state
//! state.2 = elsewhere/r2.bin  # per-repository override
//! endpoint.1 = 127.0.0.1:7001 # daemon mode when endpoints are present
//! timeout_ms = 30000
//! seed = 7
//! element_format = ipv4       # ipv4 | integer, for printing
//! ```
//!
//! Relative paths are resolved against the configuration file's directory.

use std::collections::BTreeMap;
use std::fs;
use std::net::{SocketAddr, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use sif_core::{FieldParams, GroupParams, Scheme, SharingPolicy, DEFAULT_MODULUS};

use crate::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ElementFormat {
    #[default]
    Ipv4,
    Integer,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroupSource {
    Default,
    Toy,
    File(PathBuf),
}

#[derive(Clone, Debug)]
pub struct ArchiveConfig {
    pub n: usize,
    pub k: usize,
    pub modulus: Option<u64>,
    pub scheme: Scheme,
    pub group: Option<GroupSource>,
    pub state_dir: Option<PathBuf>,
    pub states: BTreeMap<usize, PathBuf>,
    pub endpoints: BTreeMap<usize, String>,
    pub timeout: Option<Duration>,
    pub seed: Option<u64>,
    pub element_format: ElementFormat,
}

fn usage(line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("config line {line}: {msg}"))
}

impl ArchiveConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("reading config {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut n = None;
        let mut k = None;
        let mut cfg = ArchiveConfig {
            n: 0,
            k: 0,
            modulus: None,
            scheme: Scheme::Sif,
            group: None,
            state_dir: None,
            states: BTreeMap::new(),
            endpoints: BTreeMap::new(),
            timeout: None,
            seed: None,
            element_format: ElementFormat::default(),
        };
        let path = |v: &str| {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(a, b)| (a.trim(), b.trim()))
                .ok_or_else(|| usage(line, format!("expected key = value, got {content:?}")))?;
            let int = |v: &str| v.parse::<u64>().map_err(|_| usage(line, format!("{key}: not an integer: {v:?}")));
            match key {
                "n" => n = Some(int(value)? as usize),
                "k" => k = Some(int(value)? as usize),
                "modulus" => cfg.modulus = Some(int(value)?),
                "scheme" => cfg.scheme = parse_scheme(value).map_err(|e| usage(line, e))?,
                "group" => {
                    cfg.group = Some(match value {
                        "default" => GroupSource::Default,
                        "toy" => GroupSource::Toy,
                        other => GroupSource::File(path(other)),
                    })
                }
                "state_dir" => cfg.state_dir = Some(path(value)),
                "timeout_ms" => cfg.timeout = Some(Duration::from_millis(int(value)?)),
                "seed" => cfg.seed = Some(int(value)?),
                "element_format" => {
                    cfg.element_format = match value {
                        "ipv4" => ElementFormat::Ipv4,
                        "integer" => ElementFormat::Integer,
                        other => return Err(usage(line, format!("unknown element_format {other:?}"))),
                    }
                }
                _ => {
                    if let Some(id) = key.strip_prefix("state.") {
                        let id = id.parse().map_err(|_| usage(line, format!("bad repository id in {key}")))?;
                        cfg.states.insert(id, path(value));
                    } else if let Some(id) = key.strip_prefix("endpoint.") {
                        let id = id.parse().map_err(|_| usage(line, format!("bad repository id in {key}")))?;
                        cfg.endpoints.insert(id, value.to_string());
                    } else {
                        return Err(usage(line, format!("unknown key {key:?}")));
                    }
                }
            }
        }
        cfg.n = n.ok_or_else(|| CliError::Usage("config: missing n".into()))?;
        cfg.k = k.ok_or_else(|| CliError::Usage("config: missing k".into()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        self.policy()?;
        for id in self.states.keys().chain(self.endpoints.keys()) {
            if *id == 0 || *id > self.n {
                return Err(CliError::Usage(format!("config: repository id {id} outside 1..={}", self.n)));
            }
        }
        if !self.endpoints.is_empty() && self.endpoints.len() != self.n {
            return Err(CliError::Usage(format!(
                "config: {} endpoints for {} repositories",
                self.endpoints.len(),
                self.n
            )));
        }
        if self.scheme == Scheme::Sif && self.group.is_some() {
            log::warn!("group is ignored for the sif scheme");
        }
        Ok(())
    }

    /// The cSIF group, if the scheme needs one.
    pub fn group(&self) -> Result<Option<Arc<GroupParams>>, CliError> {
        if self.scheme != Scheme::Csif {
            return Ok(None);
        }
        let group = match self.group.as_ref().unwrap_or(&GroupSource::Default) {
            GroupSource::Default => GroupParams::default_2048(),
            GroupSource::Toy => GroupParams::toy(),
            GroupSource::File(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("reading group file {}: {e}", p.display())))?;
                Arc::new(GroupParams::parse(&text).map_err(|e| CliError::Usage(format!("group file: {e}")))?)
            }
        };
        Ok(Some(group))
    }

    /// Sharing field: the configured modulus, or the group order for cSIF.
    pub fn field(&self) -> Result<FieldParams, CliError> {
        let group_field = self.group()?.map(|g| g.field());
        let field = match (self.modulus, group_field) {
            (Some(m), Some(g)) if m != g.modulus() => {
                return Err(CliError::Usage(format!(
                    "config: csif requires modulus = group order {}, got {m}",
                    g.modulus()
                )))
            }
            (_, Some(g)) => g,
            (m, None) => FieldParams::new(m.unwrap_or(DEFAULT_MODULUS)).map_err(|e| CliError::Usage(format!("config: {e}")))?,
        };
        Ok(field)
    }

    pub fn policy(&self) -> Result<SharingPolicy, CliError> {
        SharingPolicy::new(self.n, self.k, self.field()?).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn state_path(&self, repo_id: usize) -> Result<PathBuf, CliError> {
        if let Some(p) = self.states.get(&repo_id) {
            return Ok(p.clone());
        }
        self.state_dir
            .as_ref()
            .map(|d| d.join(format!("repo-{repo_id}.state")))
            .ok_or_else(|| CliError::Usage(format!("config: no state path for repository {repo_id}")))
    }

    pub fn is_daemon_mode(&self) -> bool {
        !self.endpoints.is_empty()
    }

    pub fn endpoint(&self, repo_id: usize) -> Result<SocketAddr, CliError> {
        let text = self
            .endpoints
            .get(&repo_id)
            .ok_or_else(|| CliError::Usage(format!("config: no endpoint for repository {repo_id}")))?;
        text.to_socket_addrs()
            .map_err(|e| CliError::Usage(format!("endpoint.{repo_id} = {text}: {e}")))?
            .next()
            .ok_or_else(|| CliError::Usage(format!("endpoint.{repo_id} = {text}: no address")))
    }

    /// Endpoints keyed by repository coordinate, the daemons' addresses.
    pub fn endpoints_by_address(&self) -> Result<BTreeMap<u64, SocketAddr>, CliError> {
        let policy = self.policy()?;
        (1..=self.n)
            .map(|id| {
                let x = policy.coordinate(id).expect("id within 1..=n").value();
                Ok((x, self.endpoint(id)?))
            })
            .collect()
    }

    pub fn timeout(&self) -> Duration {
        self.timeout.unwrap_or_else(sif_core::transport::timeout_from_env)
    }
}

pub fn parse_scheme(s: &str) -> Result<Scheme, String> {
    match s {
        "sif" => Ok(Scheme::Sif),
        "csif" => Ok(Scheme::Csif),
        other => Err(format!("unknown scheme {other:?}, expected sif or csif")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let text = "n = 5\nk=3 # threshold\nscheme = sif\nstate_dir = st\nstate.2 = /abs/r2\n\
                    endpoint.1 = 127.0.0.1:1\nendpoint.2 = 127.0.0.1:2\nendpoint.3 = 127.0.0.1:3\n\
                    endpoint.4 = 127.0.0.1:4\nendpoint.5 = 127.0.0.1:5\nseed = 9\nelement_format = integer\n";
        let cfg = ArchiveConfig::parse(text, Path::new("/base")).unwrap();
        assert_eq!((cfg.n, cfg.k, cfg.seed), (5, 3, Some(9)));
        assert_eq!(cfg.state_path(1).unwrap(), PathBuf::from("/base/st/repo-1.state"));
        assert_eq!(cfg.state_path(2).unwrap(), PathBuf::from("/abs/r2"));
        assert_eq!(cfg.element_format, ElementFormat::Integer);
        assert!(cfg.is_daemon_mode());
        assert_eq!(cfg.endpoints_by_address().unwrap()[&3].port(), 3);
    }

    #[test]
    fn errors_name_the_line() {
        let e = ArchiveConfig::parse("n = 5\nk = x\n", Path::new(".")).unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        let e = ArchiveConfig::parse("n = 5\nk = 3\nbogus = 1\n", Path::new(".")).unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        assert!(ArchiveConfig::parse("n = 3\nk = 4\n", Path::new(".")).is_err());
        assert!(ArchiveConfig::parse("n = 3\nk = 2\nmodulus = 12\n", Path::new(".")).is_err());
    }

    #[test]
    fn csif_field_is_the_group_order() {
        let cfg = ArchiveConfig::parse("n = 3\nk = 2\nscheme = csif\ngroup = toy\n", Path::new(".")).unwrap();
        assert_eq!(cfg.field().unwrap().modulus(), 11);
        let bad = ArchiveConfig::parse("n = 3\nk = 2\nscheme = csif\ngroup = toy\nmodulus = 13\n", Path::new("."));
        assert!(bad.is_err());
    }
}
