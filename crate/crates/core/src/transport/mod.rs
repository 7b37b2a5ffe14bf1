//! Message framing and the two delivery substrates.
//!
//! [`sim::SimNetwork`] is single-threaded and deterministic. [`daemon`] runs
//! each repository behind a TCP listener. Neither encrypts anything; a real
//! deployment needs an encrypted channel underneath.

pub mod daemon;
pub mod sim;
pub mod state_file;
pub mod wire;

use std::time::Duration;

/// Half-session and query timeout on the simulated network, in steps.
pub const SIM_TIMEOUT_STEPS: u64 = 1000;

/// Default daemon timeout.
pub const DAEMON_TIMEOUT: Duration = Duration::from_secs(30);

/// Environment variable overriding the daemon timeout, in milliseconds.
pub const TIMEOUT_ENV: &str = "SIF_TIMEOUT_MS";

/// The daemon timeout after applying `SIF_TIMEOUT_MS`, if set and valid.
pub fn timeout_from_env() -> Duration {
    std::env::var(TIMEOUT_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<u64>().ok())
        .map(Duration::from_millis)
        .unwrap_or(DAEMON_TIMEOUT)
}
