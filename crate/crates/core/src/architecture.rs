use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analytics::CryptoPath;
use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Architecture {
    #[serde(alias = "pqc")]
    PqcOnly,
    #[serde(alias = "qkd")]
    QkdOnly,
    #[serde(alias = "hybrid")]
    Hybrid,
}

impl Architecture {
    pub const ALL: [Architecture; 3] = [Architecture::PqcOnly, Architecture::QkdOnly, Architecture::Hybrid];

    pub fn label(self) -> &'static str {
        match self {
            Architecture::PqcOnly => "pqc",
            Architecture::QkdOnly => "qkd",
            Architecture::Hybrid => "hybrid",
        }
    }

    /// Crypto path of traffic served from the key pool.
    pub fn crypto_path(self) -> CryptoPath {
        match self {
            Architecture::PqcOnly => CryptoPath::Pqc,
            Architecture::QkdOnly | Architecture::Hybrid => CryptoPath::Qkd,
        }
    }

    pub fn uses_qkd(self) -> bool {
        self != Architecture::PqcOnly
    }

    pub fn uses_pqc(self) -> bool {
        self != Architecture::QkdOnly
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "pqc" | "pqconly" | "pqc-only" => Ok(Architecture::PqcOnly),
            "qkd" | "qkdonly" | "qkd-only" => Ok(Architecture::QkdOnly),
            "hybrid" => Ok(Architecture::Hybrid),
            _ => Err(Error::config(format!("unknown architecture {s}"))),
        }
    }
}
