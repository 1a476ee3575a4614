//! A built MPEP map packaged for lookup: on-disk persistence, location
//! queries and a line-oriented TCP service.

mod format;
pub mod protocol;
mod server;

use std::time::{SystemTime, UNIX_EPOCH};

use thiserror::Error;
use tvws_core::radio::Location;
use tvws_core::reuse::{Mpep, MpepMap, SpaceClass};
use tvws_core::scenario::ScenarioConfig;

pub use format::{load, save, DB_MAGIC, DB_VERSION};
pub use server::Server;

#[derive(Debug, Error)]
pub enum DbError {
    #[error("not a database file (bad magic)")]
    BadMagic,
    #[error("unsupported database version {0}")]
    Version(u16),
    #[error("database checksum mismatch")]
    Checksum,
    #[error("database file is truncated")]
    Truncated,
    #[error("corrupt database: {0}")]
    Corrupt(String),
    #[error("location ({x:.4}, {y:.4}) km is outside the database area")]
    OutOfArea { x: f64, y: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Metadata {
    pub scenario: String,
    /// Build time in seconds since the Unix epoch.
    pub built_unix: u64,
    /// FNV-1a digest of the canonical text of the building configuration.
    pub digest: u64,
}

/// Read-only database: the MPEP map plus where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct DatabaseHandle {
    pub mpep: MpepMap,
    pub meta: Metadata,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QueryAnswer {
    Entry { power: Mpep, class: SpaceClass },
    OutOfCell,
}

impl DatabaseHandle {
    /// Stamps `mpep` with the digest of `cfg` and the current time.
    pub fn new(mpep: MpepMap, cfg: &ScenarioConfig) -> Self {
        let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        Self::with_metadata(
            mpep,
            Metadata {
                scenario: cfg.scenario.to_string(),
                built_unix: now,
                digest: cfg.digest(),
            },
        )
    }

    pub fn with_metadata(mpep: MpepMap, meta: Metadata) -> Self {
        DatabaseHandle { mpep, meta }
    }

    pub fn matches_config(&self, cfg: &ScenarioConfig) -> bool {
        self.meta.digest == cfg.digest()
    }

    /// Entry of the grid containing `loc`.
    pub fn query(&self, loc: &Location) -> Result<QueryAnswer, DbError> {
        let (r, c) = self
            .mpep
            .grid
            .cell_of(loc)
            .ok_or(DbError::OutOfArea { x: loc.x, y: loc.y })?;
        Ok(match self.mpep.get(r, c) {
            Some(e) => QueryAnswer::Entry {
                power: e.power,
                class: e.class,
            },
            None => QueryAnswer::OutOfCell,
        })
    }
}
