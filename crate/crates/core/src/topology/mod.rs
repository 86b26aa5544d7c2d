//! Declarative topologies: parsing, rule checks, launching and shifts.
//!
//! A topology file has three keys. `sources` lists the data stores with
//! their adapter configs, `components` lists wrappers, mediators and masks,
//! and `edges` connect an upper component to a lower one (or a wrapper to
//! its source).

mod config;
pub mod fixtures;
mod launch;
mod shift;
mod validate;

pub use config::{
    parse_topology, Component, ComponentConfig, ComponentKind, Edge, MaskComponentConfig, MaskKindName, MediatorConfig,
    ParseError, SourceDef, Topology, WrapperConfig, DEFAULT_BASE_PORT,
};
pub use launch::{launch, launch_subset, LaunchError, LaunchMode, RunningSystem};
pub use shift::{
    apply_shift, architecture, representation_kinds, wrappers_below, Action, Edit, EditLog, Shift, ShiftError,
    ShiftOutcome, MASK, MEDIATOR, MEDIATOR_PRIME, WRAPPER,
};
pub use validate::{rule, start_order, validate_topology, Violation};

use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// Reads and parses a topology file.
pub fn load_topology(path: &Path) -> Result<Topology, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(parse_topology(&text)?)
}
