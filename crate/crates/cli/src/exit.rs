use std::fmt;

use hae_core::autodiff::CheckpointError;
use hae_core::hin::HinError;
use hae_core::layers::LayerError;
use hae_core::semantics::{SemanticsError, StructureError};
use hae_core::train::TrainError;

pub const USAGE: u8 = 1;
pub const DATA: u8 = 2;
pub const NUMERIC: u8 = 3;

/// Failures detected by the CLI itself rather than by the library.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

/// Exit code for an error: 1 usage/config, 2 data, 3 numeric.
///
/// Library errors wrap each other transparently, which hides the inner
/// variant from `source()`, so the nested enums are matched directly.
pub fn classify(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<CliError>() {
            return match e {
                CliError::Usage(_) => USAGE,
                CliError::Data(_) => DATA,
            };
        }
        if let Some(e) = cause.downcast_ref::<TrainError>() {
            return train_code(e);
        }
        if let Some(e) = cause.downcast_ref::<LayerError>() {
            return layer_code(e);
        }
        if let Some(e) = cause.downcast_ref::<SemanticsError>() {
            return semantics_code(e);
        }
        if let Some(e) = cause.downcast_ref::<HinError>() {
            return hin_code(e);
        }
        if cause.downcast_ref::<StructureError>().is_some() {
            return USAGE;
        }
        if cause.downcast_ref::<CheckpointError>().is_some() {
            return DATA;
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return USAGE;
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return DATA;
        }
    }
    DATA
}

fn train_code(e: &TrainError) -> u8 {
    match e {
        TrainError::Config(_) => USAGE,
        TrainError::NonFinite { .. } | TrainError::Tensor(_) => NUMERIC,
        TrainError::Layer(e) => layer_code(e),
        TrainError::Graph(e) => hin_code(e),
        TrainError::EmptySplit(_)
        | TrainError::SingleClass
        | TrainError::Labels(_)
        | TrainError::LengthMismatch(..)
        | TrainError::Clusters { .. } => DATA,
    }
}

fn layer_code(e: &LayerError) -> u8 {
    match e {
        LayerError::Config(_) | LayerError::UnknownVariant(_) | LayerError::HeadDivisibility { .. } => USAGE,
        LayerError::Dimension(_) | LayerError::Parameters(_) => DATA,
        LayerError::Tensor(_) => NUMERIC,
        LayerError::Semantics(e) => semantics_code(e),
        LayerError::Graph(e) => hin_code(e),
    }
}

fn semantics_code(e: &SemanticsError) -> u8 {
    match e {
        SemanticsError::Structure(_) | SemanticsError::TargetMismatch(..) => USAGE,
        SemanticsError::Graph(e) => hin_code(e),
        SemanticsError::Overflow(_) => NUMERIC,
        SemanticsError::Shape(_) | SemanticsError::Simplex(_) | SemanticsError::ZeroDegree(_) => DATA,
    }
}

fn hin_code(e: &HinError) -> u8 {
    match e {
        HinError::InvalidConfig(_) | HinError::Split(_) => USAGE,
        _ => DATA,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use hae_core::semantics::SemanticStructure;

    #[test]
    fn nested_library_errors_keep_their_class() {
        let structure = SemanticStructure::parse("A-P-").unwrap_err();
        let nested = TrainError::Layer(LayerError::Semantics(SemanticsError::Structure(structure)));
        assert_eq!(classify(&anyhow::Error::new(nested).context("train")), USAGE);

        let numeric = TrainError::NonFinite { epoch: 3 };
        assert_eq!(classify(&anyhow::Error::new(numeric)), NUMERIC);

        let data = LayerError::Parameters("missing scl0.theta".into());
        assert_eq!(classify(&anyhow::Error::new(data).context("load")), DATA);

        let parse = SemanticStructure::parse("A-P-(C)-P-A").unwrap_err();
        assert_eq!(classify(&anyhow::Error::new(parse)), USAGE);

        let usage = CliError::Usage("bad flag".into());
        assert_eq!(classify(&anyhow::Error::new(usage)), USAGE);
    }
}
