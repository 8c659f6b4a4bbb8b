use extsketch::stream::ParseError;
use extsketch::Error;
use thiserror::Error as ThisError;

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Precondition(String),
    #[error("{0}")]
    Saturation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Precondition(_) => 3,
            CliError::Saturation(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::VertexOutOfRange { .. }
            | Error::SelfLoop(..)
            | Error::InvalidHyperedge(_)
            | Error::WeightOutOfRange { .. } => CliError::Parse(msg),
            Error::DensityPrecondition { .. } | Error::BucketOverflow { .. } => CliError::Precondition(msg),
            Error::Saturated { .. } | Error::RecoveryShortfall { .. } => CliError::Saturation(msg),
            _ => CliError::Usage(msg),
        }
    }
}

impl From<ParseError> for CliError {
    fn from(e: ParseError) -> Self {
        CliError::Parse(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn library_errors_map_to_exit_codes() {
        let code = |e: Error| CliError::from(e).exit_code();
        assert_eq!(code(Error::Saturated { k: 3, levels: 4 }), 4);
        assert_eq!(code(Error::RecoveryShortfall { bucket: 0, recovered: 1, wanted: 2 }), 4);
        assert_eq!(code(Error::DensityPrecondition { ratio: 1.0, required: 2.0 }), 3);
        assert_eq!(code(Error::SelfLoop(1, 1)), 2);
        assert_eq!(code(Error::InvalidArgument("eps".into())), 1);
    }
}
