//! Field dumps and saved solver results.

use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use normcrit_core::{RadialField, RadialGrid, StatePair};
use serde::{Deserialize, Serialize};

use crate::config::{RunSpec, SCHEMA};
use crate::json;

/// Nodal values of a state as stored inside result documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDump {
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl StateDump {
    pub fn of(s: &StatePair) -> Self {
        StateDump { r: s.grid().nodes().to_vec(), u: s.u.values().to_vec(), v: s.v.values().to_vec() }
    }

    pub fn to_state(&self, grid: &Arc<RadialGrid>) -> Result<StatePair> {
        if self.r.as_slice() != grid.nodes() {
            bail!("stored state does not live on the configured grid {}", grid.id());
        }
        Ok(StatePair::new(RadialField::new(grid.clone(), self.u.clone())?, RadialField::new(grid.clone(), self.v.clone())?)?)
    }
}

/// Envelope shared by every JSON output.
#[derive(Debug, Serialize, Deserialize)]
pub struct Document<T> {
    pub schema: String,
    pub command: String,
    pub spec: RunSpec,
    pub result: T,
}

impl<T: Serialize> Document<T> {
    pub fn new(command: &str, spec: &RunSpec, result: T) -> Self {
        Document { schema: SCHEMA.into(), command: command.into(), spec: spec.clone(), result }
    }

    pub fn render(&self) -> Result<String> {
        Ok(json::to_string(self)?)
    }
}

/// Writes to the path, or to stdout when absent.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn write_fields(path: &Path, s: &StatePair) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(["r", "u", "v"])?;
    for ((r, u), v) in s.grid().nodes().iter().zip(s.u.values()).zip(s.v.values()) {
        w.write_record([json::float(*r), json::float(*u), json::float(*v)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// The part of a solver document needed to restart from it.
#[derive(Debug, Deserialize)]
pub struct SavedSolve {
    pub state: StateDump,
}

pub fn read_solve(path: &Path) -> Result<Document<SavedSolve>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let doc: Document<SavedSolve> =
        serde_json::from_str(&text).with_context(|| format!("{} is not a solver result", path.display()))?;
    if doc.schema != SCHEMA {
        bail!("{} has schema {}, expected {SCHEMA}", path.display(), doc.schema);
    }
    Ok(doc)
}
