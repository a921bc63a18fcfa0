use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// One of the two conversation roles tracked by the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Wearer,
    Partner,
}

impl Speaker {
    pub const BOTH: [Speaker; 2] = [Speaker::Wearer, Speaker::Partner];

    pub fn other(self) -> Speaker {
        match self {
            Speaker::Wearer => Speaker::Partner,
            Speaker::Partner => Speaker::Wearer,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Speaker::Wearer => "wearer",
            Speaker::Partner => "partner",
        }
    }
}

impl fmt::Display for Speaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Speaker {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "wearer" => Ok(Speaker::Wearer),
            "partner" => Ok(Speaker::Partner),
            other => Err(Error::arg(format!("unknown speaker label `{other}`"))),
        }
    }
}
