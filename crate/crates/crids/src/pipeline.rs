//! End-to-end batch runs: extraction, transformation, aggregation, and
//! planning, with delimited reports, threshold summaries, and a run
//! manifest.
//!
//! Reports are fully deterministic: rows are ordered by site id, numbers
//! are printed at fixed precision, and anything run-specific (time, tool
//! version, input digests) is quarantined to the manifest. Two runs over
//! identical inputs produce byte-identical report bodies.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::aggregate;
use crate::config::{PlannerMode, RunConfig};
use crate::error::{Error, Result};
use crate::fuzzify::TransformTable;
use crate::geo::{self, ElevationSample, FeatureLayer};
use crate::model::{AdaptationKind, AdaptationOption, Factor, MembershipVector, Plan, PlanStatus, Site};
use crate::plan::{self, FrontierPoint};

/// One site's assessment: the full membership vector on success, or the
/// rendered failure reason.
#[derive(Debug, Clone)]
pub struct SiteOutcome {
    pub site: Site,
    pub result: std::result::Result<MembershipVector, String>,
}

/// Assessment of a whole dataset. Every input site appears in
/// `outcomes` exactly once, ordered by site id.
#[derive(Debug, Clone)]
pub struct Assessment {
    pub outcomes: Vec<SiteOutcome>,
    /// Reference values the transforms resolved against the dataset
    /// (medians, or the configured fixed midpoints).
    pub references: BTreeMap<Factor, f64>,
    pub warnings: Vec<String>,
}

impl Assessment {
    pub fn assessed(&self) -> impl Iterator<Item = (&Site, &MembershipVector)> {
        self.outcomes
            .iter()
            .filter_map(|o| o.result.as_ref().ok().map(|m| (&o.site, m)))
    }

    pub fn failed(&self) -> impl Iterator<Item = (&Site, &str)> {
        self.outcomes
            .iter()
            .filter_map(|o| o.result.as_ref().err().map(|e| (&o.site, e.as_str())))
    }

    pub fn assessed_count(&self) -> usize {
        self.outcomes.iter().filter(|o| o.result.is_ok()).count()
    }

    pub fn failed_count(&self) -> usize {
        self.outcomes.len() - self.assessed_count()
    }

    /// Composite indices of the successfully assessed sites, in id order.
    pub fn indices(&self) -> Vec<f64> {
        self.assessed().map(|(_, m)| m.index).collect()
    }

    /// Post-transform score maps keyed by site id, as the planner wants
    /// them.
    pub fn scores_by_site(&self) -> BTreeMap<String, BTreeMap<Factor, f64>> {
        self.assessed()
            .map(|(site, m)| (site.id.clone(), m.scores.clone()))
            .collect()
    }
}

/// Run the assessment pipeline: fill raw factors from layers and
/// elevation samples, resolve transforms against the dataset, then score
/// every site. Site-local failures land in the per-site outcome; only
/// dataset-wide problems (config, missing layers, unresolvable
/// references) error out.
pub fn assess(
    sites: Vec<Site>,
    layers: &BTreeMap<String, FeatureLayer>,
    elevations: &BTreeMap<String, ElevationSample>,
    config: &RunConfig,
) -> Result<Assessment> {
    config.validate()?;
    crate::par::with_workers(config.run.workers, || {
        assess_in_pool(sites, layers, elevations, config)
    })?
}

fn assess_in_pool(
    mut sites: Vec<Site>,
    layers: &BTreeMap<String, FeatureLayer>,
    elevations: &BTreeMap<String, ElevationSample>,
    config: &RunConfig,
) -> Result<Assessment> {
    sites.sort_by(|a, b| a.id.cmp(&b.id));
    let scenario = config.scenario();
    let warnings = geo::extract_features(
        &mut sites,
        layers,
        elevations,
        &scenario,
        &config.bindings,
        config.run.grid_cell_size,
    )?;
    let table = TransformTable::resolve(config.transforms.clone(), &sites)?;
    // The closed form and the standard diagram agree to rounding; only a
    // configured override changes the index.
    let diagram = config.block_diagram.as_ref().map(|_| config.block_diagram()).transpose()?;

    let outcomes = crate::par::map(&sites, |site| {
        let result = table
            .transform_site(site)
            .map(|mut scores| {
                aggregate::insert_derived_contamination(&mut scores);
                let mut membership = MembershipVector::from_scores(scores);
                if let Some(diagram) = &diagram {
                    membership.index = diagram.evaluate(&membership.scores);
                }
                membership
            })
            .map_err(|e| e.to_string());
        SiteOutcome {
            site: site.clone(),
            result,
        }
    });
    Ok(Assessment {
        outcomes,
        references: table.resolved_references().clone(),
        warnings,
    })
}

fn fmt_raw(value: f64) -> String {
    format!("{value:.6}")
}

fn fmt_score(value: f64) -> String {
    format!("{value:.9}")
}

/// Render the assessment report: one row per input site with raw values
/// (6 decimals), per-factor scores (9 decimals), the three category
/// scores, and the composite index. Failed sites keep their raw values
/// and carry the error in the `error` column.
pub fn render_assess_report(assessment: &Assessment) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["id", "x", "y", "status", "error"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(Factor::ALL.iter().map(|f| format!("raw_{}", f.name())));
    header.extend(Factor::ALL.iter().map(|f| format!("score_{}", f.name())));
    header.extend(
        ["resistivity", "adaptability", "recovery", "index"]
            .iter()
            .map(|s| s.to_string()),
    );
    writer.write_record(&header).expect("in-memory write");

    for outcome in &assessment.outcomes {
        let site = &outcome.site;
        let mut row = vec![
            site.id.clone(),
            fmt_raw(site.point.x),
            fmt_raw(site.point.y),
        ];
        match &outcome.result {
            Ok(_) => {
                row.push("ok".to_string());
                row.push(String::new());
            }
            Err(message) => {
                row.push("error".to_string());
                row.push(message.clone());
            }
        }
        for factor in Factor::ALL {
            row.push(site.raw.get(&factor).map(|&v| fmt_raw(v)).unwrap_or_default());
        }
        match &outcome.result {
            Ok(membership) => {
                for factor in Factor::ALL {
                    row.push(
                        membership
                            .scores
                            .get(&factor)
                            .map(|&v| fmt_score(v))
                            .unwrap_or_default(),
                    );
                }
                row.push(fmt_score(membership.resistivity));
                row.push(fmt_score(membership.adaptability));
                row.push(fmt_score(membership.recovery));
                row.push(fmt_score(membership.index));
            }
            Err(_) => {
                row.extend(std::iter::repeat(String::new()).take(Factor::ALL.len() + 4));
            }
        }
        writer.write_record(&row).expect("in-memory write");
    }
    let bytes = writer.into_inner().expect("in-memory flush");
    String::from_utf8(bytes).expect("csv output is utf-8")
}

pub fn write_assess_report(path: &Path, assessment: &Assessment) -> Result<()> {
    std::fs::write(path, render_assess_report(assessment))?;
    Ok(())
}

/// Read the composite indices of successfully assessed sites back out of
/// a written report.
pub fn read_report_indices(path: &Path) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .from_path(path)
        .map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: 0,
            message: e.to_string(),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let status_col = headers.iter().position(|h| h == "status");
    let index_col = headers
        .iter()
        .position(|h| h == "index")
        .ok_or_else(|| Error::Parse {
            path: path.display().to_string(),
            line: 1,
            message: "report has no 'index' column".into(),
        })?;
    let mut indices = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        if let Some(status_col) = status_col {
            if record.get(status_col) != Some("ok") {
                continue;
            }
        }
        let text = record.get(index_col).unwrap_or("");
        if text.is_empty() {
            continue;
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        indices.push(text.parse::<f64>().map_err(|_| Error::Parse {
            path: path.display().to_string(),
            line,
            message: format!("cannot parse index value '{text}'"),
        })?);
    }
    Ok(indices)
}

/// Result of a planning run: a single assignment, or the cost/benefit
/// frontier when that mode is configured.
#[derive(Debug, Clone)]
pub enum PlanOutput {
    Assignment(Plan),
    Frontier(Vec<FrontierPoint>),
}

impl PlanOutput {
    /// Site ids the planner could not serve, if any.
    pub fn infeasible_sites(&self) -> &[String] {
        match self {
            PlanOutput::Assignment(plan) => match &plan.status {
                PlanStatus::Infeasible(ids) => ids,
                PlanStatus::Optimal => &[],
            },
            PlanOutput::Frontier(_) => &[],
        }
    }
}

/// Plan adaptation for the assessed sites under the configured mode.
/// `cost_overrides` supplies per-site option costs loaded alongside the
/// dataset; entries override the options' flat costs.
pub fn plan_adaptation(
    assessment: &Assessment,
    config: &RunConfig,
    cost_overrides: &BTreeMap<AdaptationKind, BTreeMap<String, f64>>,
) -> Result<PlanOutput> {
    config.validate()?;
    let mut options = config.options.clone();
    for option in &mut options {
        if let Some(per_site) = cost_overrides.get(&option.kind) {
            option
                .cost
                .per_site
                .extend(per_site.iter().map(|(k, &v)| (k.clone(), v)));
        }
    }
    let sites: Vec<Site> = assessment.assessed().map(|(site, _)| site.clone()).collect();
    let scores = assessment.scores_by_site();

    let mut thresholds = BTreeMap::new();
    if let Some(column) = &config.planner.threshold_column {
        for site in &sites {
            if let Some(text) = site.metadata.get(column) {
                let value: f64 = text.parse().map_err(|_| {
                    Error::Config(format!(
                        "site {}: cannot parse threshold column '{column}' value '{text}'",
                        site.id
                    ))
                })?;
                thresholds.insert(site.id.clone(), value);
            }
        }
    }

    let instance = plan::build_instance(
        &sites,
        &scores,
        &options,
        config.planner.threshold,
        &thresholds,
    )?;
    match config.planner.mode {
        PlannerMode::Threshold => Ok(PlanOutput::Assignment(plan::min_cost_assignment(&instance))),
        PlannerMode::Budget => {
            let budget = config
                .planner
                .budget
                .ok_or_else(|| Error::Config("budget mode requires planner.budget".into()))?;
            Ok(PlanOutput::Assignment(plan::max_resilience_under_budget(
                &instance,
                budget,
                config.planner.objective,
                config.planner.cost_quantum,
            )?))
        }
        PlannerMode::Frontier => Ok(PlanOutput::Frontier(plan::pareto_frontier(
            &instance,
            config.planner.objective,
            config.planner.cost_quantum,
            config.planner.frontier_budget_cap,
        )?)),
    }
}

/// Render the plan report. Assignment mode: one row per site with the
/// chosen option, its cost, and the post-adaptation index; unservable
/// sites appear with status `infeasible`. Frontier mode: one row per
/// non-dominated (cost, index) point.
pub fn render_plan_report(output: &PlanOutput, options: &[AdaptationOption]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    match output {
        PlanOutput::Assignment(plan) => {
            writer
                .write_record(["id", "status", "option_id", "option", "cost", "index"])
                .expect("in-memory write");
            let mut ids: Vec<&String> = plan.assignments.keys().collect();
            let infeasible: &[String] = match &plan.status {
                PlanStatus::Infeasible(list) => list,
                PlanStatus::Optimal => &[],
            };
            ids.extend(infeasible.iter());
            ids.sort();
            ids.dedup();
            for id in ids {
                let row: Vec<String> = match plan.assignments.get(id) {
                    Some(&option_id) => {
                        let option = options.iter().find(|o| o.id() == option_id);
                        let name = option.map(|o| o.kind.name()).unwrap_or("");
                        let cost = option.map(|o| o.cost.cost_for(id)).unwrap_or(0.0);
                        let index = plan.per_site_index.get(id).copied().unwrap_or(f64::NAN);
                        vec![
                            id.clone(),
                            "ok".to_string(),
                            option_id.to_string(),
                            name.to_string(),
                            format!("{cost:.2}"),
                            fmt_score(index),
                        ]
                    }
                    None => vec![
                        id.clone(),
                        "infeasible".to_string(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                    ],
                };
                writer.write_record(&row).expect("in-memory write");
            }
        }
        PlanOutput::Frontier(points) => {
            writer
                .write_record(["total_cost", "total_index"])
                .expect("in-memory write");
            for point in points {
                writer
                    .write_record([
                        format!("{:.2}", point.total_cost),
                        fmt_score(point.total_index),
                    ])
                    .expect("in-memory write");
            }
        }
    }
    let bytes = writer.into_inner().expect("in-memory flush");
    String::from_utf8(bytes).expect("csv output is utf-8")
}

pub fn write_plan_report(
    path: &Path,
    output: &PlanOutput,
    options: &[AdaptationOption],
) -> Result<()> {
    std::fs::write(path, render_plan_report(output, options))?;
    Ok(())
}

/// Count and share of sites below one threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdStat {
    pub threshold: f64,
    pub count: usize,
    pub share_percent: f64,
}

/// Threshold statistics and a 10-bin histogram over composite indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub total: usize,
    pub thresholds: Vec<ThresholdStat>,
    /// Counts over [0, 0.1), [0.1, 0.2), ..., [0.9, 1.0].
    pub histogram: [usize; 10],
}

/// Tally indices against the thresholds (strictly below counts) and into
/// ten fixed-width bins. An empty index list yields all-zero counts.
pub fn summarize(indices: &[f64], thresholds: &[f64]) -> Summary {
    let total = indices.len();
    let stats = thresholds
        .iter()
        .map(|&threshold| {
            let count = indices.iter().filter(|&&v| v < threshold).count();
            let share_percent = if total == 0 {
                0.0
            } else {
                count as f64 * 100.0 / total as f64
            };
            ThresholdStat {
                threshold,
                count,
                share_percent,
            }
        })
        .collect();
    let mut histogram = [0usize; 10];
    for &value in indices {
        let bin = ((value * 10.0).floor() as isize).clamp(0, 9) as usize;
        histogram[bin] += 1;
    }
    Summary {
        total,
        thresholds: stats,
        histogram,
    }
}

/// Plain-text summary: per-threshold lines and a fixed-width histogram.
pub fn render_summary(summary: &Summary) -> String {
    let mut out = String::new();
    out.push_str(&format!("sites: {}\n", summary.total));
    for stat in &summary.thresholds {
        out.push_str(&format!(
            "index < {}: {} ({:.1}%)\n",
            stat.threshold, stat.count, stat.share_percent
        ));
    }
    out.push_str("histogram of index, bin width 0.1:\n");
    let max_count = summary.histogram.iter().copied().max().unwrap_or(0);
    for (bin, &count) in summary.histogram.iter().enumerate() {
        let low = bin as f64 / 10.0;
        let high = low + 0.1;
        let close = if bin == 9 { ']' } else { ')' };
        let bar_len = if count == 0 || max_count == 0 {
            0
        } else {
            1 + count * 39 / max_count
        };
        out.push_str(&format!(
            "[{low:.1}, {high:.1}{close} {count:>7} |{}\n",
            "#".repeat(bar_len)
        ));
    }
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Provenance record emitted beside every report. Everything that can
/// vary between runs over identical inputs (the timestamp) lives here,
/// never in report bodies.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub generated_unix_seconds: u64,
    pub config_sha256: String,
    pub site_rows: usize,
    pub assessed_sites: usize,
    pub failed_sites: usize,
    pub layer_features: BTreeMap<String, usize>,
    pub elevation_rows: usize,
    pub scenario: crate::model::Scenario,
    /// Reference values resolved against the dataset, keyed by factor name.
    pub resolved_references: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

impl RunManifest {
    pub fn new(
        config_text: &str,
        config: &RunConfig,
        assessment: &Assessment,
        layers: &BTreeMap<String, FeatureLayer>,
        elevation_rows: usize,
    ) -> RunManifest {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            generated_unix_seconds: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            config_sha256: sha256_hex(config_text.as_bytes()),
            site_rows: assessment.outcomes.len(),
            assessed_sites: assessment.assessed_count(),
            failed_sites: assessment.failed_count(),
            layer_features: layers.iter().map(|(k, v)| (k.clone(), v.len())).collect(),
            elevation_rows,
            scenario: config.scenario(),
            resolved_references: assessment
                .references
                .iter()
                .map(|(f, &v)| (f.name().to_string(), v))
                .collect(),
            warnings: assessment.warnings.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        text
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}
