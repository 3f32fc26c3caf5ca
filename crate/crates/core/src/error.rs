use thiserror::Error;

use crate::{data_io::DataError, eki::EkiError, interp::InterpError, nndmd::DmdError, nnls::NnlsError, pde::PdeError};

/// Crate-level error wrapping the per-module error types.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Interp(#[from] InterpError),
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error(transparent)]
    Eki(#[from] EkiError),
    #[error(transparent)]
    Nnls(#[from] NnlsError),
    #[error(transparent)]
    Dmd(#[from] DmdError),
    #[error(transparent)]
    Data(#[from] DataError),
}

impl Error {
    /// True for failures caused by malformed or inconsistent input, as opposed to a
    /// numerical breakdown inside an algorithm.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Data(e) => !matches!(e, DataError::Numerical(_) | DataError::Io { .. } | DataError::Pde(_)),
            Error::Interp(_) => true,
            Error::Eki(EkiError::DataYearMismatch(_) | EkiError::EmptyBracket { .. } | EkiError::InvalidConfig(_) | EkiError::DimensionMismatch(_)) => true,
            Error::Eki(EkiError::Pde(PdeError::BracketOutOfRange { .. })) => true,
            Error::Pde(PdeError::BracketOutOfRange { .. }) => true,
            Error::Dmd(DmdError::TooFewSnapshots(_) | DmdError::DimensionMismatch(_) | DmdError::NonpositiveData { .. }) => true,
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
