//! Domain types shared by the whole pipeline: the factor registry, site
//! records, membership vectors, scenarios, adaptation options, and plans.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// The three capacity groups a factor can belong to.
///
/// Resistive factors shape the ability to keep functioning under stress,
/// adaptive factors shape how far an impact propagates once the system
/// fails, and recovery factors shape how easily service is restored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorCategory {
    Resistive,
    Adaptive,
    Recovery,
}

impl FactorCategory {
    pub const ALL: [FactorCategory; 3] = [
        FactorCategory::Resistive,
        FactorCategory::Adaptive,
        FactorCategory::Recovery,
    ];
}

impl fmt::Display for FactorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FactorCategory::Resistive => "resistive",
            FactorCategory::Adaptive => "adaptive",
            FactorCategory::Recovery => "recovery",
        };
        f.write_str(s)
    }
}

/// One of the fifteen canonical resilience factors.
///
/// Declaration order is the canonical registry order: the three resistive
/// factors, then the eight adaptive factors, then the four recovery
/// factors. Category products and report columns follow this order.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    CapacityRedundancy,
    FloodExposure,
    VerticalSeparation,
    WetlandDistance,
    WellfieldProtectionZone,
    WellheadDistance,
    GroundwaterContamination,
    SystemAge,
    CanalDistance,
    DrainageDistance,
    LandUse,
    SewerDistance,
    MedianHouseholdIncome,
    OverflowDistance,
    MoratoriumStatus,
}

impl Factor {
    pub const ALL: [Factor; 15] = [
        Factor::CapacityRedundancy,
        Factor::FloodExposure,
        Factor::VerticalSeparation,
        Factor::WetlandDistance,
        Factor::WellfieldProtectionZone,
        Factor::WellheadDistance,
        Factor::GroundwaterContamination,
        Factor::SystemAge,
        Factor::CanalDistance,
        Factor::DrainageDistance,
        Factor::LandUse,
        Factor::SewerDistance,
        Factor::MedianHouseholdIncome,
        Factor::OverflowDistance,
        Factor::MoratoriumStatus,
    ];

    pub fn category(self) -> FactorCategory {
        match self {
            Factor::CapacityRedundancy | Factor::FloodExposure | Factor::VerticalSeparation => {
                FactorCategory::Resistive
            }
            Factor::SewerDistance
            | Factor::MedianHouseholdIncome
            | Factor::OverflowDistance
            | Factor::MoratoriumStatus => FactorCategory::Recovery,
            _ => FactorCategory::Adaptive,
        }
    }

    /// 1-based position within the factor's category.
    pub fn ordinal(self) -> u8 {
        let mut n = 0;
        for f in Factor::ALL {
            if f.category() == self.category() {
                n += 1;
            }
            if f == self {
                return n;
            }
        }
        unreachable!()
    }

    /// Short code such as `R3`, `A4`, or `Re1`.
    pub fn code(self) -> String {
        let prefix = match self.category() {
            FactorCategory::Resistive => "R",
            FactorCategory::Adaptive => "A",
            FactorCategory::Recovery => "Re",
        };
        format!("{prefix}{}", self.ordinal())
    }

    /// Stable identifier used in configuration and report columns.
    pub fn name(self) -> &'static str {
        match self {
            Factor::CapacityRedundancy => "capacity_redundancy",
            Factor::FloodExposure => "flood_exposure",
            Factor::VerticalSeparation => "vertical_separation",
            Factor::WetlandDistance => "wetland_distance",
            Factor::WellfieldProtectionZone => "wellfield_protection_zone",
            Factor::WellheadDistance => "wellhead_distance",
            Factor::GroundwaterContamination => "groundwater_contamination",
            Factor::SystemAge => "system_age",
            Factor::CanalDistance => "canal_distance",
            Factor::DrainageDistance => "drainage_distance",
            Factor::LandUse => "land_use",
            Factor::SewerDistance => "sewer_distance",
            Factor::MedianHouseholdIncome => "median_household_income",
            Factor::OverflowDistance => "overflow_distance",
            Factor::MoratoriumStatus => "moratorium_status",
        }
    }

    pub fn from_name(name: &str) -> Option<Factor> {
        Factor::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn from_code(code: &str) -> Option<Factor> {
        Factor::ALL.into_iter().find(|f| f.code() == code)
    }

    /// Factors of one category in registry order.
    pub fn in_category(category: FactorCategory) -> impl Iterator<Item = Factor> {
        Factor::ALL.into_iter().filter(move |f| f.category() == category)
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.name(), self.code())
    }
}

/// The fifteen canonical factors in registry order.
pub fn registry() -> Vec<Factor> {
    Factor::ALL.to_vec()
}

/// Planar coordinate pair in projected units (US ft).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

/// One decentralized system: identity, location, and raw attribute values.
///
/// `raw` may omit factors; an omitted factor resolves to the neutral
/// membership score of 1 during aggregation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub id: String,
    pub point: Point,
    pub raw: BTreeMap<Factor, f64>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl Site {
    pub fn new(id: impl Into<String>, x: f64, y: f64) -> Self {
        Site {
            id: id.into(),
            point: Point::new(x, y),
            raw: BTreeMap::new(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_raw(mut self, factor: Factor, value: f64) -> Self {
        self.raw.insert(factor, value);
        self
    }
}

/// Per-factor membership scores plus the category scores and overall index.
///
/// Built via [`MembershipVector::from_scores`] so the category products and
/// the index stay consistent with the scores by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipVector {
    pub scores: BTreeMap<Factor, f64>,
    pub resistivity: f64,
    pub adaptability: f64,
    pub recovery: f64,
    pub index: f64,
}

impl MembershipVector {
    /// Compute the three category products and the composite index from a
    /// score map. Absent factors count as the neutral 1.
    pub fn from_scores(scores: BTreeMap<Factor, f64>) -> Self {
        let resistivity = crate::aggregate::category_score(&scores, FactorCategory::Resistive);
        let adaptability = crate::aggregate::category_score(&scores, FactorCategory::Adaptive);
        let recovery = crate::aggregate::category_score(&scores, FactorCategory::Recovery);
        let index = crate::aggregate::cri_ds(resistivity, adaptability, recovery);
        MembershipVector {
            scores,
            resistivity,
            adaptability,
            recovery,
            index,
        }
    }

    pub fn score(&self, factor: Factor) -> f64 {
        self.scores.get(&factor).copied().unwrap_or(1.0)
    }
}

/// Sea-level-rise scenario driving the vertical separation computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    /// Projected sea-level rise in ft. Must be nonnegative.
    pub sea_level_rise: f64,
    /// Fraction of sea-level rise that shows up as groundwater rise.
    pub groundwater_response_ratio: f64,
    /// Depth of the drain field below grade, ft.
    pub drainfield_depth: f64,
}

impl Scenario {
    pub const DEFAULT_RESPONSE_RATIO: f64 = 0.345;
    pub const DEFAULT_DRAINFIELD_DEPTH: f64 = 3.0;

    pub fn current() -> Self {
        Scenario {
            name: "current".to_string(),
            sea_level_rise: 0.0,
            groundwater_response_ratio: Self::DEFAULT_RESPONSE_RATIO,
            drainfield_depth: Self::DEFAULT_DRAINFIELD_DEPTH,
        }
    }

    /// Groundwater rise implied by the scenario, ft.
    pub fn groundwater_rise(&self) -> f64 {
        self.sea_level_rise * self.groundwater_response_ratio
    }
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario::current()
    }
}

/// The five adaptation choices a planner can assign to a site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptationKind {
    DoNothing,
    SewerExtension,
    MoundSystem,
    CommunityTreatment,
    OnsiteTreatment,
}

impl AdaptationKind {
    pub const ALL: [AdaptationKind; 5] = [
        AdaptationKind::DoNothing,
        AdaptationKind::SewerExtension,
        AdaptationKind::MoundSystem,
        AdaptationKind::CommunityTreatment,
        AdaptationKind::OnsiteTreatment,
    ];

    pub fn id(self) -> u8 {
        match self {
            AdaptationKind::DoNothing => 1,
            AdaptationKind::SewerExtension => 2,
            AdaptationKind::MoundSystem => 3,
            AdaptationKind::CommunityTreatment => 4,
            AdaptationKind::OnsiteTreatment => 5,
        }
    }

    pub fn from_id(id: u8) -> Option<AdaptationKind> {
        AdaptationKind::ALL.into_iter().find(|k| k.id() == id)
    }

    pub fn name(self) -> &'static str {
        match self {
            AdaptationKind::DoNothing => "do_nothing",
            AdaptationKind::SewerExtension => "sewer_extension",
            AdaptationKind::MoundSystem => "mound_system",
            AdaptationKind::CommunityTreatment => "community_treatment",
            AdaptationKind::OnsiteTreatment => "onsite_treatment",
        }
    }

    pub fn from_name(name: &str) -> Option<AdaptationKind> {
        AdaptationKind::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Post-adaptation index formula this option uses by default.
    pub fn default_formula(self) -> IndexFormula {
        match self {
            AdaptationKind::DoNothing => IndexFormula::Full,
            AdaptationKind::SewerExtension | AdaptationKind::CommunityTreatment => {
                IndexFormula::RecoveryOnly
            }
            AdaptationKind::MoundSystem | AdaptationKind::OnsiteTreatment => IndexFormula::Mound,
        }
    }

    /// Factors this option neutralizes by default.
    pub fn default_mask(self) -> Vec<Factor> {
        match self {
            AdaptationKind::MoundSystem | AdaptationKind::OnsiteTreatment => vec![
                Factor::VerticalSeparation,
                Factor::GroundwaterContamination,
                Factor::SystemAge,
            ],
            _ => Vec::new(),
        }
    }
}

impl fmt::Display for AdaptationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which post-adaptation index formula an option evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexFormula {
    /// The full series/parallel composite on the (masked) scores.
    Full,
    /// Series product over the recovery factors only.
    RecoveryOnly,
    /// Full composite with the mound-neutralized factors removed.
    Mound,
}

/// Cost of an option: a flat default plus optional per-site overrides.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CostModel {
    pub flat: f64,
    #[serde(default)]
    pub per_site: BTreeMap<String, f64>,
}

impl CostModel {
    pub fn flat(cost: f64) -> Self {
        CostModel {
            flat: cost,
            per_site: BTreeMap::new(),
        }
    }

    pub fn cost_for(&self, site_id: &str) -> f64 {
        self.per_site.get(site_id).copied().unwrap_or(self.flat)
    }
}

/// Declarative feasibility rule: forbids an option when a site's raw value
/// satisfies the comparison. Absent raw values never trigger a rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityRule {
    pub factor: Factor,
    pub condition: Condition,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Below(f64),
    AtOrAbove(f64),
    Equals(f64),
}

impl FeasibilityRule {
    pub fn triggers(&self, site: &Site) -> bool {
        let Some(&value) = site.raw.get(&self.factor) else {
            return false;
        };
        match self.condition {
            Condition::Below(limit) => value < limit,
            Condition::AtOrAbove(limit) => value >= limit,
            Condition::Equals(target) => value == target,
        }
    }
}

/// One adaptation option: identity, cost model, factor mask, index formula,
/// and the rules that can forbid it for a given site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptationOption {
    pub kind: AdaptationKind,
    pub cost: CostModel,
    pub masked_factors: Vec<Factor>,
    pub formula: IndexFormula,
    #[serde(default)]
    pub forbid_when: Vec<FeasibilityRule>,
}

impl AdaptationOption {
    /// Option with the kind-derived mask, formula, and built-in
    /// feasibility rules, at a flat cost.
    pub fn standard(kind: AdaptationKind, flat_cost: f64) -> Self {
        let forbid_when = match kind {
            // Sewer connection is barred while the pump station basin is on
            // moratorium (raw moratorium_status of 0 marks the flag).
            AdaptationKind::SewerExtension => vec![FeasibilityRule {
                factor: Factor::MoratoriumStatus,
                condition: Condition::Equals(0.0),
            }],
            // Mounds need at least 1 ft of existing vertical separation.
            AdaptationKind::MoundSystem => vec![FeasibilityRule {
                factor: Factor::VerticalSeparation,
                condition: Condition::Below(1.0),
            }],
            _ => Vec::new(),
        };
        AdaptationOption {
            kind,
            cost: CostModel::flat(flat_cost),
            masked_factors: kind.default_mask(),
            formula: kind.default_formula(),
            forbid_when,
        }
    }

    pub fn id(&self) -> u8 {
        self.kind.id()
    }

    pub fn is_feasible(&self, site: &Site) -> bool {
        self.kind == AdaptationKind::DoNothing
            || !self.forbid_when.iter().any(|rule| rule.triggers(site))
    }
}

/// Outcome of a planning run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PlanStatus {
    Optimal,
    /// Sites for which no option satisfies the constraints.
    Infeasible(Vec<String>),
}

/// Per-site option choices with the resulting indices and total cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub assignments: BTreeMap<String, u8>,
    pub total_cost: f64,
    pub per_site_index: BTreeMap<String, f64>,
    pub status: PlanStatus,
}

impl Plan {
    pub fn is_optimal(&self) -> bool {
        matches!(self.status, PlanStatus::Optimal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_has_fifteen_factors_in_category_order() {
        let all = registry();
        assert_eq!(all.len(), 15);
        assert_eq!(all[0], Factor::CapacityRedundancy);
        let resistive = all
            .iter()
            .filter(|f| f.category() == FactorCategory::Resistive)
            .count();
        let adaptive = all
            .iter()
            .filter(|f| f.category() == FactorCategory::Adaptive)
            .count();
        let recovery = all
            .iter()
            .filter(|f| f.category() == FactorCategory::Recovery)
            .count();
        assert_eq!((resistive, adaptive, recovery), (3, 8, 4));

        // Category blocks are contiguous in registry order.
        let cats: Vec<_> = all.iter().map(|f| f.category()).collect();
        let mut sorted = cats.clone();
        sorted.sort();
        assert_eq!(cats, sorted);
    }

    #[test]
    fn factor_codes_and_names_round_trip() {
        for f in Factor::ALL {
            assert_eq!(Factor::from_name(f.name()), Some(f));
            assert_eq!(Factor::from_code(&f.code()), Some(f));
        }
        assert_eq!(Factor::VerticalSeparation.code(), "R3");
        assert_eq!(Factor::GroundwaterContamination.code(), "A4");
        assert_eq!(Factor::SystemAge.code(), "A5");
        assert_eq!(Factor::SewerDistance.code(), "Re1");
        assert_eq!(Factor::MoratoriumStatus.code(), "Re4");
    }

    #[test]
    fn scenario_groundwater_rise_is_slr_times_ratio() {
        let s = Scenario {
            name: "2100-intermediate".into(),
            sea_level_rise: 1.837,
            groundwater_response_ratio: 0.345,
            drainfield_depth: 3.0,
        };
        assert!((s.groundwater_rise() - 1.837 * 0.345).abs() < 1e-15);
    }

    #[test]
    fn adaptation_defaults_follow_option_kind() {
        let mound = AdaptationOption::standard(AdaptationKind::MoundSystem, 40_000.0);
        assert_eq!(mound.formula, IndexFormula::Mound);
        assert_eq!(
            mound.masked_factors,
            vec![
                Factor::VerticalSeparation,
                Factor::GroundwaterContamination,
                Factor::SystemAge
            ]
        );

        let nothing = AdaptationOption::standard(AdaptationKind::DoNothing, 0.0);
        assert!(nothing.masked_factors.is_empty());
        assert_eq!(nothing.formula, IndexFormula::Full);

        let sewer = AdaptationOption::standard(AdaptationKind::SewerExtension, 60_000.0);
        assert_eq!(sewer.formula, IndexFormula::RecoveryOnly);

        for (kind, id) in AdaptationKind::ALL.into_iter().zip(1u8..=5) {
            assert_eq!(kind.id(), id);
            assert_eq!(AdaptationKind::from_id(id), Some(kind));
        }
    }

    #[test]
    fn feasibility_rules_trigger_on_raw_values() {
        let mound = AdaptationOption::standard(AdaptationKind::MoundSystem, 0.0);
        let shallow = Site::new("s1", 0.0, 0.0).with_raw(Factor::VerticalSeparation, 0.5);
        let deep = Site::new("s2", 0.0, 0.0).with_raw(Factor::VerticalSeparation, 2.0);
        let unknown = Site::new("s3", 0.0, 0.0);
        assert!(!mound.is_feasible(&shallow));
        assert!(mound.is_feasible(&deep));
        assert!(mound.is_feasible(&unknown));

        let sewer = AdaptationOption::standard(AdaptationKind::SewerExtension, 0.0);
        let moratorium = Site::new("s4", 0.0, 0.0).with_raw(Factor::MoratoriumStatus, 0.0);
        let clear = Site::new("s5", 0.0, 0.0).with_raw(Factor::MoratoriumStatus, 1.0);
        assert!(!sewer.is_feasible(&moratorium));
        assert!(sewer.is_feasible(&clear));
    }
}
