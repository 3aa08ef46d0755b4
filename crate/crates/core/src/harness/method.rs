use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Learners the benchmark harness knows how to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    NoTransfer,
    RlsSrcFeat,
    AverageKt,
    BestSource,
    ForwardReg,
    Greedytl,
    Greedytl59,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::NoTransfer,
        Method::RlsSrcFeat,
        Method::AverageKt,
        Method::BestSource,
        Method::ForwardReg,
        Method::Greedytl,
        Method::Greedytl59,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Method::NoTransfer => "no_transfer",
            Method::RlsSrcFeat => "rls_src_feat",
            Method::AverageKt => "average_kt",
            Method::BestSource => "best_source",
            Method::ForwardReg => "forward_reg",
            Method::Greedytl => "greedytl",
            Method::Greedytl59 => "greedytl59",
        }
    }

    /// Methods whose score peeks at test labels.
    pub fn non_comparable(self) -> bool {
        matches!(self, Method::BestSource)
    }

    /// Methods that need source hypotheses or their predictions.
    pub fn uses_sources(self) -> bool {
        !matches!(self, Method::NoTransfer)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Method::ALL
            .into_iter()
            .find(|m| m.id() == s.trim())
            .ok_or_else(|| {
                let known: Vec<_> = Method::ALL.iter().map(|m| m.id()).collect();
                Error::Parameter(format!(
                    "unknown method '{s}' (known: {})",
                    known.join(", ")
                ))
            })
    }
}
