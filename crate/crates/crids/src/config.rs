//! Run configuration: one TOML document drives a whole study.
//!
//! Sections: `scenario` (sea-level rise), `run` (workers, grid cell,
//! summary thresholds), `transforms` (per-factor fuzzification),
//! `bindings` (factor to layer), `block_diagram` (optional topology
//! override), `options` (adaptation catalog), `planner` (mode and its
//! knobs), and `columns` (input header aliases).
//!
//! A user file overlays the shipped defaults: transform, binding, and
//! column entries merge per factor, while an `options` list or a
//! `block_diagram`, when present, replaces the default wholesale.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aggregate::{BlockDiagram, BlockNode};
use crate::error::{Error, Result};
use crate::fuzzify::TransformSpec;
use crate::geo::FactorBinding;
use crate::model::{AdaptationOption, Factor, Scenario};
use crate::plan::Objective;

/// The shipped default configuration document.
pub const DEFAULT_CONFIG_TOML: &str = include_str!("../config/default.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub name: String,
    pub sea_level_rise: f64,
    pub groundwater_response_ratio: f64,
    pub drainfield_depth: f64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        let s = Scenario::default();
        ScenarioSection {
            name: s.name,
            sea_level_rise: s.sea_level_rise,
            groundwater_response_ratio: s.groundwater_response_ratio,
            drainfield_depth: s.drainfield_depth,
        }
    }
}

impl ScenarioSection {
    pub fn to_scenario(&self) -> Scenario {
        Scenario {
            name: self.name.clone(),
            sea_level_rise: self.sea_level_rise,
            groundwater_response_ratio: self.groundwater_response_ratio,
            drainfield_depth: self.drainfield_depth,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Worker threads for per-site fan-out; 0 uses every core.
    pub workers: usize,
    /// Spatial index cell size, ft.
    pub grid_cell_size: f64,
    /// Index thresholds the summary reports shares for.
    pub summary_thresholds: Vec<f64>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            workers: 0,
            grid_cell_size: 500.0,
            summary_thresholds: vec![0.1, 0.5],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerMode {
    /// Minimize cost subject to per-site index floors.
    #[default]
    Threshold,
    /// Maximize the objective under a total budget.
    Budget,
    /// Enumerate the non-dominated (cost, objective) outcomes.
    Frontier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerSection {
    pub mode: PlannerMode,
    /// Index floor for threshold mode (per-site overrides may come from
    /// the sites file via `threshold_column`).
    pub threshold: f64,
    /// Sites-file column carrying per-site thresholds, if any.
    pub threshold_column: Option<String>,
    /// Total budget for budget mode.
    pub budget: Option<f64>,
    pub objective: Objective,
    /// Costs are rounded up to whole multiples of this for the budget
    /// solver; recorded in the run manifest.
    pub cost_quantum: f64,
    /// Optional spend ceiling for the frontier sweep.
    pub frontier_budget_cap: Option<f64>,
}

impl Default for PlannerSection {
    fn default() -> Self {
        PlannerSection {
            mode: PlannerMode::Threshold,
            threshold: 0.5,
            threshold_column: None,
            budget: None,
            objective: Objective::Sum,
            cost_quantum: 1.0,
            frontier_budget_cap: None,
        }
    }
}

/// Block diagram topology as written in configuration: a factor name (or
/// code) at the leaves, `series`/`parallel` lists above them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DiagramSpec {
    Leaf(String),
    Series { series: Vec<DiagramSpec> },
    Parallel { parallel: Vec<DiagramSpec> },
}

impl DiagramSpec {
    pub fn resolve(&self) -> Result<BlockNode> {
        match self {
            DiagramSpec::Leaf(name) => Factor::from_name(name)
                .or_else(|| Factor::from_code(name))
                .map(BlockNode::Leaf)
                .ok_or_else(|| {
                    Error::Config(format!("block diagram names unknown factor '{name}'"))
                }),
            DiagramSpec::Series { series } => {
                if series.is_empty() {
                    return Err(Error::Config("empty series block in diagram".into()));
                }
                Ok(BlockNode::Series(
                    series.iter().map(|s| s.resolve()).collect::<Result<_>>()?,
                ))
            }
            DiagramSpec::Parallel { parallel } => {
                if parallel.is_empty() {
                    return Err(Error::Config("empty parallel block in diagram".into()));
                }
                Ok(BlockNode::Parallel(
                    parallel.iter().map(|s| s.resolve()).collect::<Result<_>>()?,
                ))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub scenario: ScenarioSection,
    pub run: RunSection,
    pub transforms: BTreeMap<Factor, TransformSpec>,
    pub bindings: BTreeMap<Factor, FactorBinding>,
    pub block_diagram: Option<DiagramSpec>,
    pub options: Vec<AdaptationOption>,
    pub planner: PlannerSection,
    /// Input header aliases: file column name to canonical factor name
    /// (or to `id`/`x`/`y`).
    pub columns: BTreeMap<String, String>,
}

impl RunConfig {
    /// The shipped defaults, parsed from the embedded document.
    pub fn builtin() -> RunConfig {
        toml::from_str(DEFAULT_CONFIG_TOML).expect("embedded default config must parse")
    }

    /// Parse a user document and overlay it on the defaults.
    pub fn from_str_overlaid(text: &str) -> Result<RunConfig> {
        let user: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("cannot parse config: {e}")))?;
        let mut merged = RunConfig::builtin();
        merged.scenario = user.scenario;
        merged.run = user.run;
        merged.planner = user.planner;
        for (factor, spec) in user.transforms {
            merged.transforms.insert(factor, spec);
        }
        for (factor, binding) in user.bindings {
            merged.bindings.insert(factor, binding);
        }
        for (alias, target) in user.columns {
            merged.columns.insert(alias, target);
        }
        if user.block_diagram.is_some() {
            merged.block_diagram = user.block_diagram;
        }
        if !user.options.is_empty() {
            merged.options = user.options;
        }
        merged.validate()?;
        Ok(merged)
    }

    pub fn from_path(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        RunConfig::from_str_overlaid(&text)
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario.to_scenario()
    }

    /// The aggregation topology: the configured override, or the
    /// standard parallel-of-series layout.
    pub fn block_diagram(&self) -> Result<BlockDiagram> {
        match &self.block_diagram {
            Some(spec) => Ok(BlockDiagram {
                root: spec.resolve()?,
            }),
            None => Ok(BlockDiagram::standard()),
        }
    }

    /// Resolve a column header to what it feeds: canonical factor names
    /// and codes always work, aliases come from the `columns` section.
    pub fn resolve_column(&self, header: &str) -> ColumnRole {
        let target = self
            .columns
            .get(header)
            .map(String::as_str)
            .unwrap_or(header);
        match target {
            "id" => ColumnRole::Id,
            "x" => ColumnRole::X,
            "y" => ColumnRole::Y,
            name => match Factor::from_name(name).or_else(|| Factor::from_code(name)) {
                Some(factor) => ColumnRole::Factor(factor),
                None => ColumnRole::Metadata,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |message: String| Err(Error::Config(message));
        let s = &self.scenario;
        for (label, value) in [
            ("scenario.sea_level_rise", s.sea_level_rise),
            (
                "scenario.groundwater_response_ratio",
                s.groundwater_response_ratio,
            ),
            ("scenario.drainfield_depth", s.drainfield_depth),
        ] {
            if !value.is_finite() || value < 0.0 {
                return bad(format!("{label} must be finite and nonnegative, got {value}"));
            }
        }
        if !(self.run.grid_cell_size > 0.0) || !self.run.grid_cell_size.is_finite() {
            return bad(format!(
                "run.grid_cell_size must be positive, got {}",
                self.run.grid_cell_size
            ));
        }
        for &t in &self.run.summary_thresholds {
            if !(0.0..=1.0).contains(&t) {
                return bad(format!("run.summary_thresholds entries must be in [0, 1], got {t}"));
            }
        }
        if !(self.planner.cost_quantum > 0.0) || !self.planner.cost_quantum.is_finite() {
            return bad(format!(
                "planner.cost_quantum must be positive, got {}",
                self.planner.cost_quantum
            ));
        }
        if !(0.0..=1.0).contains(&self.planner.threshold) {
            return bad(format!(
                "planner.threshold must be in [0, 1], got {}",
                self.planner.threshold
            ));
        }
        if self.planner.mode == PlannerMode::Budget && self.planner.budget.is_none() {
            return bad("planner.mode = \"budget\" requires planner.budget".into());
        }
        if let Some(b) = self.planner.budget {
            if !b.is_finite() || b < 0.0 {
                return bad(format!("planner.budget must be finite and nonnegative, got {b}"));
            }
        }
        if let Some(spec) = &self.block_diagram {
            spec.resolve()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnRole {
    Id,
    X,
    Y,
    Factor(Factor),
    /// Unrecognized headers are preserved on the site as metadata.
    Metadata,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuzzify::{ReferenceMode, TransformKind};
    use crate::model::AdaptationKind;

    #[test]
    fn builtin_config_parses_and_validates() {
        let config = RunConfig::builtin();
        config.validate().unwrap();
        // Every non-derived registry factor carries a transform.
        for factor in Factor::ALL {
            if factor == Factor::GroundwaterContamination {
                assert!(!config.transforms.contains_key(&factor));
            } else {
                assert!(config.transforms.contains_key(&factor), "missing {factor}");
            }
        }
        // All five options ship, with the baseline present.
        assert_eq!(config.options.len(), 5);
        assert!(config
            .options
            .iter()
            .any(|o| o.kind == AdaptationKind::DoNothing));
        assert_eq!(config.planner.mode, PlannerMode::Threshold);
        assert_eq!(config.run.summary_thresholds, vec![0.1, 0.5]);
    }

    #[test]
    fn builtin_transform_anchors() {
        let config = RunConfig::builtin();
        let vsd = &config.transforms[&Factor::VerticalSeparation];
        assert_eq!(vsd.function, TransformKind::Sigmoid);
        assert_eq!(vsd.f2, Some(3.0));
        // Published anchor: the curve must clear 0.95 by 6 ft.
        let score =
            crate::fuzzify::sigmoid_membership(6.0, vsd.f1.unwrap(), vsd.f2.unwrap()).unwrap();
        assert!(score > 0.95);

        let wellhead = &config.transforms[&Factor::WellheadDistance];
        assert_eq!(wellhead.f2, Some(200.0));

        let sewer = &config.transforms[&Factor::SewerDistance];
        assert_eq!(sewer.reference, ReferenceMode::Median);
    }

    #[test]
    fn overlay_merges_transforms_and_replaces_options() {
        let user = r#"
[transforms.vertical_separation]
function = "sigmoid"
f1 = 6.0
f2 = 2.5

[[options]]
kind = "do_nothing"
cost = { flat = 0.0 }
masked_factors = []
formula = "full"
"#;
        let merged = RunConfig::from_str_overlaid(user).unwrap();
        assert_eq!(merged.transforms[&Factor::VerticalSeparation].f1, Some(6.0));
        // Untouched factors keep their defaults.
        assert_eq!(merged.transforms[&Factor::WellheadDistance].f2, Some(200.0));
        // A provided options list replaces the catalog wholesale.
        assert_eq!(merged.options.len(), 1);
    }

    #[test]
    fn diagram_override_resolves_names_and_codes() {
        let user = r#"
[block_diagram]
parallel = [
    "vertical_separation",
    { series = ["Re1", "overflow_distance"] },
]
"#;
        let config = RunConfig::from_str_overlaid(user).unwrap();
        let diagram = config.block_diagram().unwrap();
        let leaves = diagram.leaves();
        assert_eq!(
            leaves,
            vec![
                Factor::VerticalSeparation,
                Factor::SewerDistance,
                Factor::OverflowDistance
            ]
        );
    }

    #[test]
    fn bad_documents_are_rejected() {
        assert!(RunConfig::from_str_overlaid("run = 3").is_err());
        assert!(RunConfig::from_str_overlaid("[run]\nworkerz = 2").is_err());
        let unknown_leaf = "block_diagram = { series = [\"no_such_factor\"] }";
        assert!(RunConfig::from_str_overlaid(unknown_leaf).is_err());
        let bad_budget = "[planner]\nmode = \"budget\"";
        assert!(RunConfig::from_str_overlaid(bad_budget).is_err());
        let bad_quantum = "[planner]\ncost_quantum = 0.0";
        assert!(RunConfig::from_str_overlaid(bad_quantum).is_err());
    }

    #[test]
    fn column_resolution_prefers_aliases_then_names_then_codes() {
        let config = RunConfig::builtin();
        assert_eq!(config.resolve_column("APNO"), ColumnRole::Id);
        assert_eq!(
            config.resolve_column("VerticalSepDist"),
            ColumnRole::Factor(Factor::VerticalSeparation)
        );
        assert_eq!(
            config.resolve_column("vertical_separation"),
            ColumnRole::Factor(Factor::VerticalSeparation)
        );
        assert_eq!(
            config.resolve_column("R3"),
            ColumnRole::Factor(Factor::VerticalSeparation)
        );
        assert_eq!(config.resolve_column("notes"), ColumnRole::Metadata);
    }
}
