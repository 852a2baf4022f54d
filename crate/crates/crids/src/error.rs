//! Error type shared by every module in the crate.

use crate::model::Factor;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A transform or diagram was handed a parameter outside its admissible range.
    #[error("invalid parameter{}: {message}", factor_suffix(.factor))]
    InvalidParameter {
        factor: Option<Factor>,
        message: String,
    },

    /// Median reference resolution was asked to run over zero measurements.
    #[error("cannot resolve median reference for {context}: dataset is empty")]
    EmptyDataset { context: String },

    /// A spatial query was issued against a layer with no features.
    #[error("layer '{layer}' has no features")]
    EmptyLayer { layer: String },

    /// A factor is bound to a layer that was not supplied.
    #[error("factor {factor} is bound to layer '{layer}' which was not loaded")]
    MissingLayer { factor: Factor, layer: String },

    /// A layer's geometry does not match the kind the binding expects.
    #[error("layer '{layer}' holds {found} but {expected} were expected")]
    GeometryKind {
        layer: String,
        expected: String,
        found: String,
    },

    /// A feature in a geo-interchange document could not be interpreted.
    #[error("unparseable geometry in '{layer}' at feature {index}: {message}")]
    BadGeometry {
        layer: String,
        index: usize,
        message: String,
    },

    /// A delimited input file failed to parse.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    /// Two site records share an id.
    #[error("duplicate site id '{id}'")]
    DuplicateSite { id: String },

    /// A block diagram leaf has no score and no default.
    #[error("block diagram leaf {factor} has no score")]
    UnknownLeaf { factor: Factor },

    /// The planner budget cannot cover the cheapest feasible option set.
    #[error("budget {budget} is below the minimum feasible total cost {minimum}")]
    InvalidBudget { budget: f64, minimum: f64 },

    /// The run configuration is internally inconsistent.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn factor_suffix(factor: &Option<Factor>) -> String {
    match factor {
        Some(f) => format!(" for factor {f}"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
