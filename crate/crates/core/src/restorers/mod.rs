//! Restoration functions applied to de-warped plates before scoring.

mod classical;
pub mod plugin;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use classical::{restore_identity, restore_unsharp, restore_wiener};
pub use plugin::{PluginConfig, PluginError, PluginHost};

use crate::error::{Error, Result};
use crate::image::Image;

pub const DEFAULT_UNSHARP_AMOUNT: f64 = 1.0;
pub const DEFAULT_UNSHARP_SIGMA: f64 = 1.0;
pub const DEFAULT_WIENER_SIGMA: f64 = 1.0;
pub const DEFAULT_WIENER_NSR: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RestorerSpec {
    Identity,
    Unsharp {
        amount: f64,
        sigma: f64,
    },
    Wiener {
        sigma_est: f64,
        nsr: f64,
    },
    Plugin {
        cmd: String,
        workers: usize,
        fresh: bool,
        timeout_secs: f64,
    },
}

impl RestorerSpec {
    pub fn unsharp() -> Self {
        RestorerSpec::Unsharp {
            amount: DEFAULT_UNSHARP_AMOUNT,
            sigma: DEFAULT_UNSHARP_SIGMA,
        }
    }

    pub fn wiener() -> Self {
        RestorerSpec::Wiener {
            sigma_est: DEFAULT_WIENER_SIGMA,
            nsr: DEFAULT_WIENER_NSR,
        }
    }

    pub fn plugin(cmd: impl Into<String>) -> Self {
        RestorerSpec::Plugin {
            cmd: cmd.into(),
            workers: 1,
            fresh: false,
            timeout_secs: plugin::DEFAULT_TIMEOUT.as_secs_f64(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            RestorerSpec::Identity => "identity",
            RestorerSpec::Unsharp { .. } => "unsharp",
            RestorerSpec::Wiener { .. } => "wiener",
            RestorerSpec::Plugin { .. } => "plugin",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RestorerSpec::Identity => Ok(()),
            RestorerSpec::Unsharp { amount, sigma } => {
                if !(0.0..=3.0).contains(amount) || !(0.3..=3.0).contains(sigma) {
                    return Err(Error::OutOfRange(format!(
                        "unsharp needs amount in [0, 3] and sigma in [0.3, 3], got {amount}, {sigma}"
                    )));
                }
                Ok(())
            }
            RestorerSpec::Wiener { sigma_est, nsr } => {
                if !(*sigma_est > 0.0 && *nsr > 0.0 && sigma_est.is_finite() && nsr.is_finite()) {
                    return Err(Error::OutOfRange(format!(
                        "wiener needs positive sigma_est and nsr, got {sigma_est}, {nsr}"
                    )));
                }
                Ok(())
            }
            RestorerSpec::Plugin {
                cmd,
                workers,
                timeout_secs,
                ..
            } => {
                if cmd.trim().is_empty() {
                    return Err(Error::OutOfRange("plugin command is empty".into()));
                }
                if *workers == 0 {
                    return Err(Error::OutOfRange("plugin workers must be at least 1".into()));
                }
                if !(*timeout_secs > 0.0 && timeout_secs.is_finite()) {
                    return Err(Error::OutOfRange(format!(
                        "plugin timeout must be positive, got {timeout_secs}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Instantiates the restorer. Plugin processes are started lazily.
    pub fn build(&self) -> Result<Restorer> {
        self.validate()?;
        let inner = match self {
            RestorerSpec::Plugin {
                cmd,
                workers,
                fresh,
                timeout_secs,
            } => Inner::Plugin(PluginHost::new(PluginConfig {
                cmd: cmd.clone(),
                workers: *workers,
                fresh: *fresh,
                timeout: Duration::from_secs_f64(*timeout_secs),
            })),
            _ => Inner::Builtin,
        };
        Ok(Restorer {
            spec: self.clone(),
            inner,
        })
    }
}

/// Parses `identity`, `unsharp`, `wiener` or `plugin:CMD`.
impl FromStr for RestorerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(cmd) = s.strip_prefix("plugin:") {
            let cmd = cmd.trim();
            let cmd = cmd
                .strip_prefix('"')
                .and_then(|c| c.strip_suffix('"'))
                .unwrap_or(cmd);
            let spec = RestorerSpec::plugin(cmd);
            spec.validate()?;
            return Ok(spec);
        }
        match s {
            "identity" => Ok(RestorerSpec::Identity),
            "unsharp" => Ok(RestorerSpec::unsharp()),
            "wiener" => Ok(RestorerSpec::wiener()),
            other => Err(Error::OutOfRange(format!(
                "unknown restorer {other:?}; expected identity, unsharp, wiener or plugin:CMD"
            ))),
        }
    }
}

impl fmt::Display for RestorerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RestorerSpec::Plugin { cmd, .. } => write!(f, "plugin:{cmd}"),
            other => f.write_str(other.kind()),
        }
    }
}

enum Inner {
    Builtin,
    Plugin(PluginHost),
}

/// A ready-to-use restorer. Shareable across threads.
pub struct Restorer {
    spec: RestorerSpec,
    inner: Inner,
}

impl Restorer {
    pub fn spec(&self) -> &RestorerSpec {
        &self.spec
    }

    pub fn restore(&self, img: &Image) -> Result<Image> {
        self.restore_indexed(img, 0)
    }

    /// `job` picks the plugin worker; built-in restorers ignore it.
    pub fn restore_indexed(&self, img: &Image, job: usize) -> Result<Image> {
        match (&self.inner, &self.spec) {
            (Inner::Plugin(host), _) => Ok(host.restore(img, job)?),
            (Inner::Builtin, RestorerSpec::Identity) => Ok(restore_identity(img)),
            (Inner::Builtin, RestorerSpec::Unsharp { amount, sigma }) => {
                restore_unsharp(img, *amount, *sigma)
            }
            (Inner::Builtin, RestorerSpec::Wiener { sigma_est, nsr }) => {
                restore_wiener(img, *sigma_est, *nsr)
            }
            (Inner::Builtin, RestorerSpec::Plugin { .. }) => unreachable!("plugins use a host"),
        }
    }
}

impl fmt::Debug for Restorer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Restorer").field("spec", &self.spec).finish()
    }
}
