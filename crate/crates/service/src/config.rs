use std::net::IpAddr;
use std::path::PathBuf;
use std::time::Duration;

use serde::Deserialize;
use specassist_core::ValidationConfig;

/// Service settings. Every field has a default, so a config file only
/// needs the keys it changes.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub host: IpAddr,
    pub port: u16,
    /// Knowledge-base store. Flushed snapshots are written back here.
    pub kb_path: Option<PathBuf>,
    /// Idle sessions are closed (and their samples queued) after this many
    /// seconds.
    pub session_ttl_secs: u64,
    pub flush_period_secs: u64,
    /// Also flush whenever a session signs out or expires.
    pub flush_on_sign_out: bool,
    /// Required in `x-admin-token`. Admin endpoints answer 401 when unset.
    pub admin_token: Option<String>,
    pub batch_line_limit: usize,
    /// Directory served at `/`.
    pub static_dir: Option<PathBuf>,
    pub validation: ValidationConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            host: IpAddr::from([127, 0, 0, 1]),
            port: 8080,
            kb_path: None,
            session_ttl_secs: 3600,
            flush_period_secs: 86_400,
            flush_on_sign_out: true,
            admin_token: None,
            batch_line_limit: 1000,
            static_dir: None,
            validation: ValidationConfig::default(),
        }
    }
}

impl ServiceConfig {
    pub fn session_ttl(&self) -> Duration {
        Duration::from_secs(self.session_ttl_secs)
    }

    pub fn flush_period(&self) -> Duration {
        Duration::from_secs(self.flush_period_secs)
    }
}
