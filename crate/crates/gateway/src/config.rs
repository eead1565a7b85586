use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use safegate_core::change::{ChangeConfig, Strategy};
use safegate_core::messaging::{ComposeOptions, HarmfulLexicon};

use crate::error::{GatewayError, Result};
use crate::token::TokenKey;

pub const KEY_ENV: &str = "SAFEGATE_KEY";

fn default_bind() -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], 8080))
}

/// `safegate serve --config` file. Relative paths resolve against the
/// directory holding the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewayConfig {
    pub key_path: Option<PathBuf>,
    pub relock_interval_s: u64,
    pub notify_interval_s: u64,
    pub area_threshold: u64,
    pub strategy: String,
    pub outbox_dir: PathBuf,
    pub store_dir: PathBuf,

    pub bind: SocketAddr,
    /// Who receives notifications; defaults to enrolled contacts.
    pub recipient: Option<String>,
    /// A recording segment closes after this long without activity.
    pub segment_gap_s: u64,
    /// Span covered by a recordings query starting at the requested minute.
    pub recording_window_min: u64,
    /// Maximum age of ingest and door tokens.
    pub token_ttl_s: u64,
    pub harmful_items: Vec<String>,
    pub pluralize: bool,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            key_path: None,
            relock_interval_s: 30,
            notify_interval_s: 180,
            area_threshold: 400,
            strategy: Strategy::default().to_string(),
            outbox_dir: PathBuf::from("outbox"),
            store_dir: PathBuf::from("store"),
            bind: default_bind(),
            recipient: None,
            segment_gap_s: 5,
            recording_window_min: 60,
            token_ttl_s: 300,
            harmful_items: HarmfulLexicon::default().words().map(str::to_string).collect(),
            pluralize: false,
        }
    }
}

impl GatewayConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg: GatewayConfig =
            toml::from_str(&text).map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Make relative directories absolute against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.outbox_dir);
        fix(&mut self.store_dir);
        if let Some(k) = self.key_path.as_mut() {
            fix(k);
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.change_config()?;
        if self.relock_interval_s == 0 {
            return Err(GatewayError::Config("relock_interval_s must be positive".into()));
        }
        Ok(())
    }

    pub fn change_config(&self) -> Result<ChangeConfig> {
        let strategy: Strategy = self
            .strategy
            .parse()
            .map_err(|e| GatewayError::Config(format!("strategy: {e}")))?;
        let cfg = ChangeConfig {
            strategy,
            ..ChangeConfig::default()
        }
        .with_area(self.area_threshold);
        cfg.validate().map_err(|e| GatewayError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn compose_options(&self) -> ComposeOptions {
        ComposeOptions {
            lexicon: HarmfulLexicon::new(&self.harmful_items),
            pluralize: self.pluralize,
        }
    }

    /// The transport key: `SAFEGATE_KEY` wins over `key_path`.
    pub fn load_key(&self) -> Result<TokenKey> {
        load_key(std::env::var(KEY_ENV).ok().as_deref(), self.key_path.as_deref())
    }
}

pub fn load_key(env_value: Option<&str>, key_path: Option<&Path>) -> Result<TokenKey> {
    if let Some(v) = env_value.filter(|v| !v.trim().is_empty()) {
        return Ok(TokenKey::from_base64(v)?);
    }
    let path = key_path.ok_or_else(|| {
        GatewayError::Config(format!("no key: set {KEY_ENV} or key_path"))
    })?;
    warn_if_readable_by_others(path);
    Ok(TokenKey::from_base64(&std::fs::read_to_string(path)?)?)
}

/// Write a fresh key readable only by the owner.
pub fn write_key_file(path: &Path, key: &TokenKey) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, format!("{}\n", key.to_base64()))?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        std::fs::set_permissions(path, std::fs::Permissions::from_mode(0o600))?;
    }
    Ok(())
}

fn warn_if_readable_by_others(path: &Path) {
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        if let Ok(meta) = std::fs::metadata(path) {
            if meta.permissions().mode() & 0o077 != 0 {
                tracing::warn!(path = %path.display(), "key file is readable by group or others");
            }
        }
    }
    #[cfg(not(unix))]
    let _ = path;
}
