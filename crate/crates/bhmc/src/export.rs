//! `tree.json`: a fitted (or generated) hierarchy in a stable JSON layout.

use std::path::Path;

use bhmc_core::{Hyperparams, MixingMode, State};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::io::{read_file, write_file};

pub const SCHEMA_VERSION: &str = "1.0";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentWeight {
    /// 1-based component index.
    pub component: usize,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeExport {
    pub id: u64,
    pub parent: Option<u64>,
    pub depth: usize,
    pub n_thru: usize,
    /// Heaviest components at this node, by weight.
    pub top_components: Vec<ComponentWeight>,
    pub remainder: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeExport {
    pub schema_version: String,
    pub levels: usize,
    pub mode: MixingMode,
    pub nodes: Vec<NodeExport>,
    /// Root-to-leaf node ids per observation.
    pub paths: Vec<Vec<u64>>,
    /// 1-based component per observation.
    pub assignments: Vec<usize>,
    pub component_means: Vec<Vec<f64>>,
    pub hyperparams: Hyperparams,
    pub log_likelihood: f64,
}

impl TreeExport {
    pub fn from_state(state: &State, top_m: usize, log_likelihood: f64) -> Result<Self> {
        let nodes = state
            .tree
            .nodes()
            .map(|node| {
                let mut weights: Vec<ComponentWeight> = node
                    .mixing
                    .weights()
                    .iter()
                    .enumerate()
                    .map(|(k, &weight)| ComponentWeight { component: k + 1, weight })
                    .collect();
                weights.sort_by(|a, b| b.weight.total_cmp(&a.weight).then(a.component.cmp(&b.component)));
                weights.truncate(top_m);
                NodeExport {
                    id: node.id.0,
                    parent: node.parent.map(|p| p.0),
                    depth: node.depth,
                    n_thru: node.n_thru,
                    top_components: weights,
                    remainder: node.mixing.remainder(),
                }
            })
            .collect();
        let mut assignments = Vec::with_capacity(state.assignments.len());
        for (n, a) in state.assignments.iter().enumerate() {
            let k = a.component.ok_or(bhmc_core::Error::Unassigned(n))?;
            assignments.push(k + 1);
        }
        Ok(TreeExport {
            schema_version: SCHEMA_VERSION.to_owned(),
            levels: state.tree.levels(),
            mode: state.mode,
            nodes,
            paths: state.assignments.iter().map(|a| a.path.iter().map(|id| id.0).collect()).collect(),
            assignments,
            component_means: state.book.means.clone(),
            hyperparams: state.hp.clone(),
            log_likelihood,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("export is always serialisable");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Version {
            schema_version: String,
        }
        let json_err = |source| CliError::Json { path: path.to_owned(), source };
        let v: Version = serde_json::from_str(text).map_err(json_err)?;
        if v.schema_version.split('.').next() != SCHEMA_VERSION.split('.').next() {
            return Err(CliError::Schema { path: path.to_owned(), version: v.schema_version });
        }
        let export: TreeExport = serde_json::from_str(text).map_err(json_err)?;
        export.check()?;
        Ok(export)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_file(path)?, path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, self.to_json().as_bytes())
    }

    /// Structural checks: one root, known parents, paths through known nodes.
    pub fn check(&self) -> Result<()> {
        let ids: std::collections::BTreeSet<u64> = self.nodes.iter().map(|n| n.id).collect();
        if ids.len() != self.nodes.len() {
            return Err(CliError::Export("duplicate node id".into()));
        }
        if self.nodes.iter().filter(|n| n.parent.is_none()).count() != 1 {
            return Err(CliError::Export("expected exactly one root".into()));
        }
        for n in &self.nodes {
            if let Some(p) = n.parent {
                if !ids.contains(&p) {
                    return Err(CliError::Export(format!("node {} has unknown parent {p}", n.id)));
                }
            }
        }
        if self.paths.len() != self.assignments.len() {
            return Err(CliError::Export("paths and assignments differ in length".into()));
        }
        for (i, p) in self.paths.iter().enumerate() {
            if p.is_empty() || p.iter().any(|id| !ids.contains(id)) {
                return Err(CliError::Export(format!("path {} refers to unknown nodes", i + 1)));
            }
        }
        Ok(())
    }
}
