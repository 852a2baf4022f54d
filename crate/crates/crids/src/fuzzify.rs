//! Fuzzification: map raw factor measurements onto membership scores in
//! [0, 1] through one of four monotone transform families.
//!
//! The sigmoid pair shares one structure. With `u = (x / f2)^f1`, the
//! increasing branch returns `u / (1 + u)` and the decreasing branch
//! `1 / (1 + u)`, so the two always sum to exactly 1 for the same input.
//! `f2` is the midpoint (score 0.5) and `f1` steers the steepness.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Factor, Site};

/// Increasing S-curve: 0 at the origin, 0.5 at `x = f2`, approaching 1 for
/// large `x`. Inputs at or below zero clamp to 0, the worst case.
pub fn sigmoid_membership(x: f64, f1: f64, f2: f64) -> Result<f64> {
    check_shape_params(f1, f2)?;
    Ok(sigmoid_raw(x, f1, f2))
}

/// Decreasing S-curve: 1 at the origin, 0.5 at `x = f2`, converging to 0
/// as `x` grows. Inputs at or below zero clamp to 1.
pub fn inverse_sigmoid_membership(x: f64, f1: f64, f2: f64) -> Result<f64> {
    check_shape_params(f1, f2)?;
    Ok(inverse_sigmoid_raw(x, f1, f2))
}

/// Linear ramp from 0 at `x_min` to 1 at `x_max`, clamped outside.
pub fn grade_membership(x: f64, x_min: f64, x_max: f64) -> Result<f64> {
    check_bounds(x_min, x_max)?;
    Ok(grade_raw(x, x_min, x_max))
}

/// Linear ramp from 1 at `x_min` down to 0 at `x_max`, clamped outside.
pub fn inverse_grade_membership(x: f64, x_min: f64, x_max: f64) -> Result<f64> {
    check_bounds(x_min, x_max)?;
    Ok(inverse_grade_raw(x, x_min, x_max))
}

fn check_shape_params(f1: f64, f2: f64) -> Result<()> {
    if !(f1 > 0.0) || !f1.is_finite() {
        return Err(Error::InvalidParameter {
            factor: None,
            message: format!("shape parameter f1 must be positive, got {f1}"),
        });
    }
    if !(f2 > 0.0) || !f2.is_finite() {
        return Err(Error::InvalidParameter {
            factor: None,
            message: format!("reference value f2 must be positive, got {f2}"),
        });
    }
    Ok(())
}

fn check_bounds(x_min: f64, x_max: f64) -> Result<()> {
    if !(x_min < x_max) {
        return Err(Error::InvalidParameter {
            factor: None,
            message: format!("grade bounds require x_min < x_max, got [{x_min}, {x_max}]"),
        });
    }
    Ok(())
}

fn sigmoid_raw(x: f64, f1: f64, f2: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let u = (x / f2).powf(f1);
    if u.is_infinite() {
        1.0
    } else {
        u / (1.0 + u)
    }
}

fn inverse_sigmoid_raw(x: f64, f1: f64, f2: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let u = (x / f2).powf(f1);
    // 1 / inf is 0, so saturation needs no special case here.
    1.0 / (1.0 + u)
}

fn grade_raw(x: f64, x_min: f64, x_max: f64) -> f64 {
    if x <= x_min {
        0.0
    } else if x >= x_max {
        1.0
    } else {
        (x - x_min) / (x_max - x_min)
    }
}

fn inverse_grade_raw(x: f64, x_min: f64, x_max: f64) -> f64 {
    if x <= x_min {
        1.0
    } else if x >= x_max {
        0.0
    } else {
        (x_max - x) / (x_max - x_min)
    }
}

/// How a transform obtains its reference value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMode {
    /// Use `f2` exactly as configured.
    #[default]
    Fixed,
    /// Resolve `f2` to the dataset median at load time.
    Median,
}

/// The transform family applied to one factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    Sigmoid,
    InverseSigmoid,
    Grade,
    InverseGrade,
    /// Raw value is already a membership score in [0, 1].
    Passthrough,
}

/// Per-factor transform choice and parameters, as written in configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub function: TransformKind,
    /// Shape parameter for the sigmoid family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f1: Option<f64>,
    /// Reference value for the sigmoid family (midpoint of the curve).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f2: Option<f64>,
    #[serde(default)]
    pub reference: ReferenceMode,
    /// Lower bound for the grade family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_min: Option<f64>,
    /// Upper bound for the grade family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_max: Option<f64>,
}

impl TransformSpec {
    pub fn sigmoid(f1: f64, f2: f64) -> Self {
        TransformSpec {
            function: TransformKind::Sigmoid,
            f1: Some(f1),
            f2: Some(f2),
            reference: ReferenceMode::Fixed,
            x_min: None,
            x_max: None,
        }
    }

    pub fn inverse_sigmoid(f1: f64, f2: f64) -> Self {
        TransformSpec {
            function: TransformKind::InverseSigmoid,
            f1: Some(f1),
            f2: Some(f2),
            reference: ReferenceMode::Fixed,
            x_min: None,
            x_max: None,
        }
    }

    pub fn sigmoid_median(f1: f64) -> Self {
        TransformSpec {
            function: TransformKind::Sigmoid,
            f1: Some(f1),
            f2: None,
            reference: ReferenceMode::Median,
            x_min: None,
            x_max: None,
        }
    }

    pub fn inverse_sigmoid_median(f1: f64) -> Self {
        TransformSpec {
            function: TransformKind::InverseSigmoid,
            f1: Some(f1),
            f2: None,
            reference: ReferenceMode::Median,
            x_min: None,
            x_max: None,
        }
    }

    pub fn grade(x_min: f64, x_max: f64) -> Self {
        TransformSpec {
            function: TransformKind::Grade,
            f1: None,
            f2: None,
            reference: ReferenceMode::Fixed,
            x_min: Some(x_min),
            x_max: Some(x_max),
        }
    }

    pub fn inverse_grade(x_min: f64, x_max: f64) -> Self {
        TransformSpec {
            function: TransformKind::InverseGrade,
            f1: None,
            f2: None,
            reference: ReferenceMode::Fixed,
            x_min: Some(x_min),
            x_max: Some(x_max),
        }
    }

    pub fn passthrough() -> Self {
        TransformSpec {
            function: TransformKind::Passthrough,
            f1: None,
            f2: None,
            reference: ReferenceMode::Fixed,
            x_min: None,
            x_max: None,
        }
    }

    fn validate(&self, factor: Factor) -> Result<()> {
        let err = |message: String| Error::InvalidParameter {
            factor: Some(factor),
            message,
        };
        match self.function {
            TransformKind::Sigmoid | TransformKind::InverseSigmoid => {
                let f1 = self
                    .f1
                    .ok_or_else(|| err("sigmoid transforms require f1".into()))?;
                if !(f1 > 0.0) || !f1.is_finite() {
                    return Err(err(format!("f1 must be positive, got {f1}")));
                }
                match self.reference {
                    ReferenceMode::Fixed => {
                        let f2 = self.f2.ok_or_else(|| {
                            err("fixed-reference sigmoid transforms require f2".into())
                        })?;
                        if !(f2 > 0.0) || !f2.is_finite() {
                            return Err(err(format!("f2 must be positive, got {f2}")));
                        }
                    }
                    ReferenceMode::Median => {}
                }
            }
            TransformKind::Grade | TransformKind::InverseGrade => {
                let (lo, hi) = match (self.x_min, self.x_max) {
                    (Some(lo), Some(hi)) => (lo, hi),
                    _ => return Err(err("grade transforms require x_min and x_max".into())),
                };
                if !(lo < hi) {
                    return Err(err(format!(
                        "grade bounds require x_min < x_max, got [{lo}, {hi}]"
                    )));
                }
            }
            TransformKind::Passthrough => {}
        }
        Ok(())
    }
}

/// Dataset median: mean of the two central order statistics for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        Some(sorted[n / 2])
    } else {
        Some((sorted[n / 2 - 1] + sorted[n / 2]) / 2.0)
    }
}

/// Resolve a spec's reference value against the dataset it will score.
///
/// Fixed references pass through unchanged; median mode returns the median
/// of `values` and fails on an empty dataset.
pub fn resolve_reference(values: &[f64], spec: &TransformSpec) -> Result<f64> {
    match spec.reference {
        ReferenceMode::Fixed => spec.f2.ok_or_else(|| Error::InvalidParameter {
            factor: None,
            message: "fixed-reference spec has no f2".into(),
        }),
        ReferenceMode::Median => median(values).ok_or_else(|| Error::EmptyDataset {
            context: "reference resolution".into(),
        }),
    }
}

/// A spec with every reference resolved to a number, ready to evaluate.
#[derive(Debug, Clone, Copy, PartialEq)]
enum ResolvedTransform {
    Sigmoid { f1: f64, f2: f64 },
    InverseSigmoid { f1: f64, f2: f64 },
    Grade { x_min: f64, x_max: f64 },
    InverseGrade { x_min: f64, x_max: f64 },
    Passthrough,
}

impl ResolvedTransform {
    fn eval(self, x: f64, factor: Factor) -> Result<f64> {
        match self {
            ResolvedTransform::Sigmoid { f1, f2 } => Ok(sigmoid_raw(x, f1, f2)),
            ResolvedTransform::InverseSigmoid { f1, f2 } => Ok(inverse_sigmoid_raw(x, f1, f2)),
            ResolvedTransform::Grade { x_min, x_max } => Ok(grade_raw(x, x_min, x_max)),
            ResolvedTransform::InverseGrade { x_min, x_max } => {
                Ok(inverse_grade_raw(x, x_min, x_max))
            }
            ResolvedTransform::Passthrough => {
                if (0.0..=1.0).contains(&x) {
                    Ok(x)
                } else {
                    Err(Error::InvalidParameter {
                        factor: Some(factor),
                        message: format!("passthrough raw value {x} is outside [0, 1]"),
                    })
                }
            }
        }
    }
}

/// The full set of per-factor transforms for one run, with references
/// resolved once against the loaded dataset.
///
/// `groundwater_contamination` takes no transform: it is always derived
/// from the vertical-separation and wetland scores during aggregation,
/// never read from input.
#[derive(Debug, Clone)]
pub struct TransformTable {
    specs: BTreeMap<Factor, TransformSpec>,
    resolved: BTreeMap<Factor, ResolvedTransform>,
    resolved_references: BTreeMap<Factor, f64>,
}

impl TransformTable {
    /// Validate specs and resolve median references against the dataset.
    pub fn resolve(specs: BTreeMap<Factor, TransformSpec>, sites: &[Site]) -> Result<Self> {
        let mut resolved = BTreeMap::new();
        let mut resolved_references = BTreeMap::new();
        for (&factor, spec) in &specs {
            if factor == Factor::GroundwaterContamination {
                continue;
            }
            spec.validate(factor)?;
            let r = match spec.function {
                TransformKind::Sigmoid | TransformKind::InverseSigmoid => {
                    let values: Vec<f64> = sites
                        .iter()
                        .filter_map(|s| s.raw.get(&factor).copied())
                        .collect();
                    // A median-referenced factor nobody measured can
                    // never fire; leave it out rather than failing the
                    // whole dataset over an unused transform.
                    if values.is_empty() && spec.reference == ReferenceMode::Median {
                        continue;
                    }
                    let f2 = resolve_reference(&values, spec)?;
                    if !(f2 > 0.0) || !f2.is_finite() {
                        return Err(Error::InvalidParameter {
                            factor: Some(factor),
                            message: format!("resolved reference must be positive, got {f2}"),
                        });
                    }
                    resolved_references.insert(factor, f2);
                    let f1 = spec.f1.expect("validated");
                    match spec.function {
                        TransformKind::Sigmoid => ResolvedTransform::Sigmoid { f1, f2 },
                        _ => ResolvedTransform::InverseSigmoid { f1, f2 },
                    }
                }
                TransformKind::Grade => ResolvedTransform::Grade {
                    x_min: spec.x_min.expect("validated"),
                    x_max: spec.x_max.expect("validated"),
                },
                TransformKind::InverseGrade => ResolvedTransform::InverseGrade {
                    x_min: spec.x_min.expect("validated"),
                    x_max: spec.x_max.expect("validated"),
                },
                TransformKind::Passthrough => ResolvedTransform::Passthrough,
            };
            resolved.insert(factor, r);
        }
        Ok(TransformTable {
            specs,
            resolved,
            resolved_references,
        })
    }

    /// Median-resolved (or fixed) reference per sigmoid-family factor,
    /// recorded in the run manifest.
    pub fn resolved_references(&self) -> &BTreeMap<Factor, f64> {
        &self.resolved_references
    }

    pub fn specs(&self) -> &BTreeMap<Factor, TransformSpec> {
        &self.specs
    }

    pub fn spec(&self, factor: Factor) -> Option<&TransformSpec> {
        self.specs.get(&factor)
    }

    /// Map every present raw factor through its transform. Factors absent
    /// from the site's raw map are left out of the result; readers treat
    /// them as the neutral score 1. The derived contamination factor is
    /// skipped even when a raw column carries it.
    pub fn transform_site(&self, site: &Site) -> Result<BTreeMap<Factor, f64>> {
        let mut scores = BTreeMap::new();
        for (&factor, &raw) in &site.raw {
            if factor == Factor::GroundwaterContamination {
                continue;
            }
            let Some(resolved) = self.resolved.get(&factor) else {
                return Err(Error::InvalidParameter {
                    factor: Some(factor),
                    message: "no transform configured for this factor".into(),
                });
            };
            let score = resolved.eval(raw, factor)?;
            scores.insert(factor, score);
        }
        Ok(scores)
    }
}
