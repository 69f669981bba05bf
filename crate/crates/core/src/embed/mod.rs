//! Online VC embedders.
//!
//! Both embedders walk the tree levels bottom-up (host, rack, pod, root) and
//! return the first feasible placement found inside a single subtree of the
//! current level. They differ in how VMs are spread inside that subtree.

mod oktopus;
mod tetris;

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::request::VcRequest;
use crate::topology::{FatTree, FatTreeSpec, Placement};

pub use oktopus::{max_vms_on_host, Oktopus};
pub use tetris::{score, BalanceScore, Tetris};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Level {
    Host,
    Rack,
    Pod,
    Root,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::Host, Level::Rack, Level::Pod, Level::Root];

    pub fn subtree_count(self, spec: &FatTreeSpec) -> usize {
        match self {
            Level::Host => spec.host_count(),
            Level::Rack => spec.rack_count(),
            Level::Pod => spec.pods,
            Level::Root => 1,
        }
    }

    /// Hosts below subtree `idx` of this level.
    pub fn hosts(self, spec: &FatTreeSpec, idx: usize) -> Range<usize> {
        match self {
            Level::Host => idx..idx + 1,
            Level::Rack => spec.hosts_in_rack(idx),
            Level::Pod => spec.hosts_in_pod(idx),
            Level::Root => 0..spec.host_count(),
        }
    }
}

pub trait Embedder {
    fn name(&self) -> &'static str;

    /// Finds a feasible placement for `req` on the current residuals, or
    /// `None` to reject. Does not modify the tree.
    fn embed(&self, tree: &FatTree, req: &VcRequest) -> Option<Placement>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKind {
    Oktopus,
    Tetris,
}

impl EmbedderKind {
    pub fn embedder(self) -> &'static dyn Embedder {
        match self {
            EmbedderKind::Oktopus => &Oktopus,
            EmbedderKind::Tetris => &Tetris,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EmbedderKind::Oktopus => "oktopus",
            EmbedderKind::Tetris => "tetris",
        }
    }
}

impl fmt::Display for EmbedderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EmbedderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "oktopus" => Ok(EmbedderKind::Oktopus),
            "tetris" => Ok(EmbedderKind::Tetris),
            other => Err(Error::Parse(format!("unknown embedder {other:?}"))),
        }
    }
}
