//! Aggregation: combine per-factor membership scores into category scores
//! and the composite resilience index through a series/parallel block
//! diagram, plus the post-adaptation index variants.
//!
//! Series blocks multiply (every element must function); parallel blocks
//! complement-multiply (the system survives if any branch does). The
//! standard topology puts the resistive chain in parallel with the
//! response chain, where response is the adaptive and recovery chains in
//! series.

use std::collections::BTreeMap;

use crate::model::{AdaptationOption, Factor, FactorCategory, IndexFormula};

/// Groundwater contamination is never measured directly. Its score is the
/// product of the vertical-separation score and the wetland-distance
/// score: effluent reaches groundwater when the unsaturated soil column is
/// thin, and propagates when sensitive waters are close.
pub fn derive_groundwater_contamination(vsd_score: f64, wetland_score: f64) -> f64 {
    vsd_score * wetland_score
}

/// Insert the derived contamination score into a score map, overwriting
/// anything a raw input column may have put there. Absent inputs count as
/// the neutral 1, so an unmeasured site derives a neutral score.
pub fn insert_derived_contamination(scores: &mut BTreeMap<Factor, f64>) {
    let vsd = scores
        .get(&Factor::VerticalSeparation)
        .copied()
        .unwrap_or(1.0);
    let wetland = scores.get(&Factor::WetlandDistance).copied().unwrap_or(1.0);
    scores.insert(
        Factor::GroundwaterContamination,
        derive_groundwater_contamination(vsd, wetland),
    );
}

/// Product of scores over one category's factors, taken in registry order
/// so runs are bit-reproducible. Absent factors contribute the series
/// neutral 1.
pub fn category_score(scores: &BTreeMap<Factor, f64>, category: FactorCategory) -> f64 {
    let mut product = 1.0;
    for factor in Factor::in_category(category) {
        if let Some(&score) = scores.get(&factor) {
            product *= score;
        }
    }
    product
}

/// Composite index from the three category scores:
/// `1 - (1 - resistivity) * (1 - adaptability * recovery)`.
///
/// The resistive branch sits in parallel with the response branch, so the
/// result dominates both `resistivity` and `adaptability * recovery`.
pub fn cri_ds(resistivity: f64, adaptability: f64, recovery: f64) -> f64 {
    1.0 - (1.0 - resistivity) * (1.0 - adaptability * recovery)
}

/// One node of a reliability block diagram.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockNode {
    Leaf(Factor),
    /// All children must function: value is the product.
    Series(Vec<BlockNode>),
    /// Any child suffices: value is 1 minus the product of complements.
    Parallel(Vec<BlockNode>),
}

impl BlockNode {
    /// Evaluate against a score map. Leaves absent from the map default to
    /// the neutral 1, matching the category-product convention.
    pub fn evaluate(&self, scores: &BTreeMap<Factor, f64>) -> f64 {
        match self {
            BlockNode::Leaf(factor) => scores.get(factor).copied().unwrap_or(1.0),
            BlockNode::Series(children) => {
                children.iter().map(|c| c.evaluate(scores)).product()
            }
            BlockNode::Parallel(children) => {
                1.0 - children
                    .iter()
                    .map(|c| 1.0 - c.evaluate(scores))
                    .product::<f64>()
            }
        }
    }

    fn collect_leaves(&self, out: &mut Vec<Factor>) {
        match self {
            BlockNode::Leaf(factor) => out.push(*factor),
            BlockNode::Series(children) | BlockNode::Parallel(children) => {
                for child in children {
                    child.collect_leaves(out);
                }
            }
        }
    }
}

/// A reliability block diagram over the factor registry.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiagram {
    pub root: BlockNode,
}

impl BlockDiagram {
    /// The standard topology: the resistive series chain in parallel with
    /// the response chain, where response is the adaptive chain in series
    /// with the recovery chain. Every registry factor appears exactly
    /// once.
    pub fn standard() -> Self {
        let series_of = |category: FactorCategory| {
            BlockNode::Series(
                Factor::in_category(category)
                    .into_iter()
                    .map(BlockNode::Leaf)
                    .collect(),
            )
        };
        BlockDiagram {
            root: BlockNode::Parallel(vec![
                series_of(FactorCategory::Resistive),
                BlockNode::Series(vec![
                    series_of(FactorCategory::Adaptive),
                    series_of(FactorCategory::Recovery),
                ]),
            ]),
        }
    }

    pub fn evaluate(&self, scores: &BTreeMap<Factor, f64>) -> f64 {
        self.root.evaluate(scores)
    }

    /// Every leaf factor in depth-first order, duplicates included.
    pub fn leaves(&self) -> Vec<Factor> {
        let mut out = Vec::new();
        self.root.collect_leaves(&mut out);
        out
    }
}

impl Default for BlockDiagram {
    fn default() -> Self {
        BlockDiagram::standard()
    }
}

/// Index of a site after applying one adaptation option.
///
/// The option's masked factors are neutralized to 1, then the option's
/// formula runs on the masked map:
/// - `Full`: the standard composite.
/// - `Mound`: the standard composite with the vertical-separation,
///   contamination, and age factors removed in addition to the mask. The
///   mound rebuilds the soil column, so those three cease to bind.
/// - `RecoveryOnly`: the series product over the recovery factors alone.
///   Connection to a sewer or community plant makes resistive and
///   adaptive failure modes moot; what remains is the receiving side.
pub fn post_adaptation_cri(scores: &BTreeMap<Factor, f64>, option: &AdaptationOption) -> f64 {
    let mut masked = scores.clone();
    for &factor in &option.masked_factors {
        masked.insert(factor, 1.0);
    }
    match option.formula {
        IndexFormula::Full => composite(&masked),
        IndexFormula::Mound => {
            for factor in [
                Factor::VerticalSeparation,
                Factor::GroundwaterContamination,
                Factor::SystemAge,
            ] {
                masked.insert(factor, 1.0);
            }
            composite(&masked)
        }
        IndexFormula::RecoveryOnly => category_score(&masked, FactorCategory::Recovery),
    }
}

fn composite(scores: &BTreeMap<Factor, f64>) -> f64 {
    cri_ds(
        category_score(scores, FactorCategory::Resistive),
        category_score(scores, FactorCategory::Adaptive),
        category_score(scores, FactorCategory::Recovery),
    )
}
