//! Adaptation planning: choose one option per site.
//!
//! Three solvers share one instance shape. Threshold mode minimizes total
//! cost subject to a per-site index floor and separates into independent
//! per-site picks. Budget mode maximizes the objective subject to a total
//! budget, an exact multiple-choice knapsack solved by dynamic
//! programming over quantized costs. The frontier enumerates every
//! non-dominated (cost, objective) outcome reachable from the instance.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::aggregate::post_adaptation_cri;
use crate::error::{Error, Result};
use crate::model::{AdaptationKind, AdaptationOption, Factor, Plan, PlanStatus, Site};

/// What the budget solver maximizes over the chosen per-site indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Sum of site indices.
    #[default]
    Sum,
    /// Worst site index.
    Min,
}

impl Objective {
    /// Neutral element for `combine`.
    pub fn identity(self) -> f64 {
        match self {
            Objective::Sum => 0.0,
            Objective::Min => f64::INFINITY,
        }
    }

    /// Folds one site's index into a running objective value.
    pub fn combine(self, value: f64, rest: f64) -> f64 {
        match self {
            Objective::Sum => value + rest,
            Objective::Min => value.min(rest),
        }
    }
}

/// One selectable option for one site, pre-priced and pre-scored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiteChoice {
    pub option_id: u8,
    pub cost: f64,
    pub index: f64,
}

/// One site's slice of the instance: its feasible choices, sorted by
/// option id, and its index floor for threshold mode.
#[derive(Debug, Clone, PartialEq)]
pub struct SitePlanning {
    pub site_id: String,
    pub threshold: f64,
    pub choices: Vec<SiteChoice>,
}

/// A fully priced planning problem. Sites are sorted by id so every
/// solver and tie-break is deterministic.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlanningInstance {
    pub sites: Vec<SitePlanning>,
}

/// Ids of the options a site may take, in option-id order. The do-nothing
/// option is never excluded.
pub fn feasible_options(site: &Site, options: &[AdaptationOption]) -> Vec<u8> {
    let mut ids: Vec<u8> = options
        .iter()
        .filter(|option| option.is_feasible(site))
        .map(|option| option.id())
        .collect();
    ids.sort_unstable();
    ids
}

/// Price and score every feasible (site, option) pair into an instance.
///
/// `scores` maps site id to its post-assessment membership scores;
/// `thresholds` overrides `default_threshold` per site id.
pub fn build_instance(
    sites: &[Site],
    scores: &BTreeMap<String, BTreeMap<Factor, f64>>,
    options: &[AdaptationOption],
    default_threshold: f64,
    thresholds: &BTreeMap<String, f64>,
) -> Result<PlanningInstance> {
    if !options
        .iter()
        .any(|o| o.kind == AdaptationKind::DoNothing)
    {
        return Err(Error::Config(
            "planner options must include do_nothing".into(),
        ));
    }
    let mut sorted_options: Vec<&AdaptationOption> = options.iter().collect();
    sorted_options.sort_by_key(|o| o.id());

    let mut planned = Vec::with_capacity(sites.len());
    for site in sites {
        let site_scores = scores.get(&site.id).ok_or_else(|| {
            Error::Config(format!("no membership scores for site {}", site.id))
        })?;
        let mut choices = Vec::new();
        for option in &sorted_options {
            if !option.is_feasible(site) {
                continue;
            }
            let cost = option.cost.cost_for(&site.id);
            if !(cost >= 0.0) || !cost.is_finite() {
                return Err(Error::Config(format!(
                    "option {} has invalid cost {cost} for site {}",
                    option.kind, site.id
                )));
            }
            choices.push(SiteChoice {
                option_id: option.id(),
                cost,
                index: post_adaptation_cri(site_scores, option),
            });
        }
        planned.push(SitePlanning {
            site_id: site.id.clone(),
            threshold: thresholds
                .get(&site.id)
                .copied()
                .unwrap_or(default_threshold),
            choices,
        });
    }
    planned.sort_by(|a, b| a.site_id.cmp(&b.site_id));
    Ok(PlanningInstance { sites: planned })
}

/// Threshold mode: cheapest feasible option meeting each site's floor.
///
/// The one-option-per-site constraint makes sites independent, so each
/// is solved alone: lowest cost, ties to the higher index, then to the
/// lower option id. Sites with no qualifying option are collected into
/// `PlanStatus::Infeasible`; qualifying sites keep their assignments so
/// a partial plan is still a usable triage list.
pub fn min_cost_assignment(instance: &PlanningInstance) -> Plan {
    let picks = crate::par::map(&instance.sites, |site| {
        let mut best: Option<&SiteChoice> = None;
        for choice in &site.choices {
            if choice.index < site.threshold {
                continue;
            }
            let better = match best {
                None => true,
                Some(b) => {
                    choice.cost < b.cost
                        || (choice.cost == b.cost
                            && (choice.index > b.index
                                || (choice.index == b.index && choice.option_id < b.option_id)))
                }
            };
            if better {
                best = Some(choice);
            }
        }
        best.copied()
    });

    let mut assignments = BTreeMap::new();
    let mut per_site_index = BTreeMap::new();
    let mut unservable = Vec::new();
    let mut total_cost = 0.0;
    for (site, pick) in instance.sites.iter().zip(picks) {
        match pick {
            Some(choice) => {
                assignments.insert(site.site_id.clone(), choice.option_id);
                per_site_index.insert(site.site_id.clone(), choice.index);
                total_cost += choice.cost;
            }
            None => unservable.push(site.site_id.clone()),
        }
    }
    let status = if unservable.is_empty() {
        PlanStatus::Optimal
    } else {
        PlanStatus::Infeasible(unservable)
    };
    Plan {
        assignments,
        total_cost,
        per_site_index,
        status,
    }
}

/// Hard ceiling on DP cells so a mis-set quantum fails fast instead of
/// exhausting memory.
const MAX_DP_CELLS: u128 = 64_000_000;

struct QuantizedInstance {
    /// Per site, (choice index into SitePlanning.choices, cost in quantum
    /// units), option-id order preserved.
    units: Vec<Vec<(usize, u32)>>,
    min_units_total: u64,
}

fn quantize(instance: &PlanningInstance, quantum: f64) -> Result<QuantizedInstance> {
    if !(quantum > 0.0) || !quantum.is_finite() {
        return Err(Error::Config(format!(
            "cost quantum must be positive, got {quantum}"
        )));
    }
    let mut units = Vec::with_capacity(instance.sites.len());
    let mut min_units_total: u64 = 0;
    for site in &instance.sites {
        let mut site_units = Vec::with_capacity(site.choices.len());
        let mut site_min = u32::MAX;
        for (i, choice) in site.choices.iter().enumerate() {
            // Round up: a plan the DP accepts can only be cheaper in
            // real currency than its quantized total.
            let u = (choice.cost / quantum).ceil();
            if u > u32::MAX as f64 {
                return Err(Error::Config(format!(
                    "cost {} at site {} overflows the quantum grid",
                    choice.cost, site.site_id
                )));
            }
            let u = u as u32;
            site_units.push((i, u));
            site_min = site_min.min(u);
        }
        if site_min != u32::MAX {
            min_units_total += site_min as u64;
        }
        units.push(site_units);
    }
    Ok(QuantizedInstance {
        units,
        min_units_total,
    })
}

/// Suffix DP table over (site, remaining budget units). `obj` holds the
/// best achievable objective, `used` the fewest cost units that achieve
/// it. Infeasible states carry `NEG_INFINITY`.
struct DpTable {
    width: usize,
    obj: Vec<f64>,
    used: Vec<u32>,
}

impl DpTable {
    fn at(&self, site: usize, budget: usize) -> (f64, u32) {
        let k = site * self.width + budget;
        (self.obj[k], self.used[k])
    }
}

fn solve_table(
    instance: &PlanningInstance,
    quantized: &QuantizedInstance,
    budget_units: u64,
    objective: Objective,
) -> Result<DpTable> {
    let n = instance.sites.len();
    let width_u128 = budget_units as u128 + 1;
    let cells = (n as u128 + 1) * width_u128;
    if cells > MAX_DP_CELLS {
        return Err(Error::Config(format!(
            "budget grid needs {cells} DP cells; raise the cost quantum or lower the budget"
        )));
    }
    let width = width_u128 as usize;
    let mut table = DpTable {
        width,
        obj: vec![f64::NEG_INFINITY; (n + 1) * width],
        used: vec![0; (n + 1) * width],
    };
    for b in 0..width {
        table.obj[n * width + b] = objective.identity();
    }
    for site_ix in (0..n).rev() {
        for b in 0..width {
            let mut best_obj = f64::NEG_INFINITY;
            let mut best_used = u32::MAX;
            for &(choice_ix, cost_units) in &quantized.units[site_ix] {
                let cost_units_usize = cost_units as usize;
                if cost_units_usize > b {
                    continue;
                }
                let (rest_obj, rest_used) = table.at(site_ix + 1, b - cost_units_usize);
                if rest_obj == f64::NEG_INFINITY {
                    continue;
                }
                let value = instance.sites[site_ix].choices[choice_ix].index;
                let cand_obj = objective.combine(value, rest_obj);
                let cand_used = cost_units + rest_used;
                // Strict improvement only, so earlier (lower) option ids
                // win exact ties.
                if cand_obj > best_obj || (cand_obj == best_obj && cand_used < best_used) {
                    best_obj = cand_obj;
                    best_used = cand_used;
                }
            }
            let k = site_ix * width + b;
            table.obj[k] = best_obj;
            if best_used != u32::MAX {
                table.used[k] = best_used;
            }
        }
    }
    Ok(table)
}

/// Walk the table from the top, re-deriving each site's candidate values
/// exactly as the fill did, and take the first (lowest option id) choice
/// that reproduces the stored optimum.
fn reconstruct(
    instance: &PlanningInstance,
    quantized: &QuantizedInstance,
    table: &DpTable,
    budget_units: usize,
    objective: Objective,
) -> Plan {
    let n = instance.sites.len();
    let mut assignments = BTreeMap::new();
    let mut per_site_index = BTreeMap::new();
    let mut total_cost = 0.0;
    let mut b = budget_units;
    for site_ix in 0..n {
        let (want_obj, want_used) = table.at(site_ix, b);
        let mut taken = None;
        for &(choice_ix, cost_units) in &quantized.units[site_ix] {
            let cost_units_usize = cost_units as usize;
            if cost_units_usize > b {
                continue;
            }
            let (rest_obj, rest_used) = table.at(site_ix + 1, b - cost_units_usize);
            if rest_obj == f64::NEG_INFINITY {
                continue;
            }
            let value = instance.sites[site_ix].choices[choice_ix].index;
            if objective.combine(value, rest_obj) == want_obj && cost_units + rest_used == want_used
            {
                taken = Some((choice_ix, cost_units_usize));
                break;
            }
        }
        let (choice_ix, cost_units) = taken.expect("table state is reachable by construction");
        let choice = instance.sites[site_ix].choices[choice_ix];
        let site = &instance.sites[site_ix];
        assignments.insert(site.site_id.clone(), choice.option_id);
        per_site_index.insert(site.site_id.clone(), choice.index);
        total_cost += choice.cost;
        b -= cost_units;
    }
    Plan {
        assignments,
        per_site_index,
        total_cost,
        status: PlanStatus::Optimal,
    }
}

/// Budget mode: maximize the objective over one feasible option per site
/// with total cost at most `budget`.
///
/// Costs are rounded up to whole multiples of `quantum` for the DP, so
/// any accepted plan's real cost is within budget. Ties break to fewer
/// quantized cost units, then to the lexicographically first site and
/// option order. Errors with `InvalidBudget` when even the cheapest
/// choices exceed the budget; sites with no feasible choice at all are
/// returned as `PlanStatus::Infeasible` without solving.
pub fn max_resilience_under_budget(
    instance: &PlanningInstance,
    budget: f64,
    objective: Objective,
    quantum: f64,
) -> Result<Plan> {
    if !(budget >= 0.0) || !budget.is_finite() {
        return Err(Error::Config(format!(
            "budget must be a nonnegative number, got {budget}"
        )));
    }
    let empty_sites: Vec<String> = instance
        .sites
        .iter()
        .filter(|s| s.choices.is_empty())
        .map(|s| s.site_id.clone())
        .collect();
    if !empty_sites.is_empty() {
        return Ok(Plan {
            assignments: BTreeMap::new(),
            per_site_index: BTreeMap::new(),
            total_cost: 0.0,
            status: PlanStatus::Infeasible(empty_sites),
        });
    }
    let quantized = quantize(instance, quantum)?;
    let budget_units = (budget / quantum).floor();
    let budget_units = if budget_units > u64::MAX as f64 {
        u64::MAX
    } else {
        budget_units as u64
    };
    if quantized.min_units_total > budget_units {
        // Minimum is reported on the quantized grid, the same arithmetic
        // that decides feasibility.
        return Err(Error::InvalidBudget {
            budget,
            minimum: quantized.min_units_total as f64 * quantum,
        });
    }
    // Budget beyond the most expensive full assignment buys nothing;
    // shrink the table to what can actually be spent.
    let max_units_total: u64 = quantized
        .units
        .iter()
        .map(|site| site.iter().map(|&(_, u)| u as u64).max().unwrap_or(0))
        .sum();
    let effective_units = budget_units.min(max_units_total);
    let table = solve_table(instance, &quantized, effective_units, objective)?;
    Ok(reconstruct(
        instance,
        &quantized,
        &table,
        effective_units as usize,
        objective,
    ))
}

/// One non-dominated outcome: spend `total_cost`, reach `total_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontierPoint {
    pub total_cost: f64,
    pub total_index: f64,
    pub plan: Plan,
}

/// Enumerate the non-dominated (cost, objective) outcomes reachable by
/// any full assignment, cheapest first, objective strictly increasing.
///
/// One DP table sized to the dearest full assignment (or `budget_cap`)
/// is solved, then every unit budget is read out, reconstructed, and
/// dominance-filtered.
pub fn pareto_frontier(
    instance: &PlanningInstance,
    objective: Objective,
    quantum: f64,
    budget_cap: Option<f64>,
) -> Result<Vec<FrontierPoint>> {
    if instance.sites.is_empty() || instance.sites.iter().any(|s| s.choices.is_empty()) {
        return Ok(Vec::new());
    }
    let quantized = quantize(instance, quantum)?;
    let max_units_total: u64 = quantized
        .units
        .iter()
        .map(|site| site.iter().map(|&(_, u)| u as u64).max().unwrap_or(0))
        .sum();
    let cap_units = match budget_cap {
        Some(cap) if cap >= 0.0 => ((cap / quantum).floor() as u64).min(max_units_total),
        _ => max_units_total,
    };
    if cap_units < quantized.min_units_total {
        return Ok(Vec::new());
    }
    let table = solve_table(instance, &quantized, cap_units, objective)?;

    let mut points: Vec<FrontierPoint> = Vec::new();
    for b in 0..=cap_units as usize {
        let (obj, _) = table.at(0, b);
        if obj == f64::NEG_INFINITY {
            continue;
        }
        let plan = reconstruct(instance, &quantized, &table, b, objective);
        if points
            .iter()
            .any(|p| p.total_cost == plan.total_cost && p.total_index == obj)
        {
            continue;
        }
        points.push(FrontierPoint {
            total_cost: plan.total_cost,
            total_index: obj,
            plan,
        });
    }

    // Dominance filter: cheapest first, and cost may only buy a strictly
    // better objective.
    points.sort_by(|a, b| {
        a.total_cost
            .total_cmp(&b.total_cost)
            .then(b.total_index.total_cmp(&a.total_index))
    });
    let mut frontier: Vec<FrontierPoint> = Vec::new();
    for point in points {
        let dominated = frontier
            .last()
            .map_or(false, |kept| kept.total_index >= point.total_index);
        if !dominated {
            frontier.push(point);
        }
    }
    Ok(frontier)
}
