//! CLI error type and its mapping onto process exit codes.
//!
//! The binary promises stable exit codes for scripting: 0 on success, 2 for
//! configuration problems, 3 when a numerical routine fails to converge,
//! 4 when an achievable-distance criterion cannot be bracketed, and 1 for
//! plain I/O failures. Core errors are folded into those four classes here
//! so the subcommand code can use `?` freely.

use uwqkd_core::bb84::Bb84Error;
use uwqkd_core::channel::ChannelError;
use uwqkd_core::decoy::DecoyError;
use uwqkd_core::montecarlo::McError;
use uwqkd_core::noise::NoiseError;
use uwqkd_core::numerics::NumericsError;

/// Exit code for I/O failures outside the config/numeric/bracket classes.
pub const EXIT_IO: i32 = 1;
/// Exit code for configuration and validation errors.
pub const EXIT_CONFIG: i32 = 2;
/// Exit code for numerical non-convergence.
pub const EXIT_NUMERIC: i32 = 3;
/// Exit code for bracket failures in distance solves.
pub const EXIT_BRACKET: i32 = 4;

/// Anything the CLI can fail with, keyed by exit class.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Unreadable, unparseable, or invalid scenario input.
    #[error("config error: {0}")]
    Config(String),
    /// A quadrature or bound evaluation did not converge.
    #[error("numeric error: {0}")]
    NonConvergence(String),
    /// An achievable-distance criterion held (or failed) over the whole
    /// search range, so there is no crossing to bisect.
    #[error("bracket error: {0}")]
    Bracket(String),
    /// Reading or writing a file failed.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    /// The process exit code this error class maps to.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::NonConvergence(_) => EXIT_NUMERIC,
            CliError::Bracket(_) => EXIT_BRACKET,
            CliError::Io { .. } => EXIT_IO,
        }
    }

    /// Wraps an I/O error with the path it concerned.
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

impl From<NumericsError> for CliError {
    fn from(e: NumericsError) -> Self {
        match e {
            NumericsError::NoConvergence { .. } => CliError::NonConvergence(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<ChannelError> for CliError {
    fn from(e: ChannelError) -> Self {
        match e {
            ChannelError::Numerics(inner) => inner.into(),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<NoiseError> for CliError {
    fn from(e: NoiseError) -> Self {
        match e {
            NoiseError::Channel(inner) => inner.into(),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<Bb84Error> for CliError {
    fn from(e: Bb84Error) -> Self {
        match e {
            Bb84Error::NoBracket { .. } => CliError::Bracket(e.to_string()),
            Bb84Error::IndeterminateQber => CliError::NonConvergence(e.to_string()),
            Bb84Error::Channel(inner) => inner.into(),
            Bb84Error::Noise(inner) => inner.into(),
            Bb84Error::Numerics(inner) => inner.into(),
            Bb84Error::InvalidParameter { .. } => CliError::Config(e.to_string()),
        }
    }
}

impl From<uwqkd_core::relay::RelayError> for CliError {
    fn from(e: uwqkd_core::relay::RelayError) -> Self {
        use uwqkd_core::relay::RelayError;
        match e {
            RelayError::NoBracket { .. } => CliError::Bracket(e.to_string()),
            RelayError::IndeterminateQber => CliError::NonConvergence(e.to_string()),
            RelayError::Channel(inner) => inner.into(),
            RelayError::Noise(inner) => inner.into(),
            RelayError::Protocol(inner) => inner.into(),
            RelayError::InvalidParameter { .. } => CliError::Config(e.to_string()),
        }
    }
}

impl From<DecoyError> for CliError {
    fn from(e: DecoyError) -> Self {
        match e {
            DecoyError::NoBracket { .. } => CliError::Bracket(e.to_string()),
            DecoyError::IndeterminateBound(_) => CliError::NonConvergence(e.to_string()),
            DecoyError::Channel(inner) => inner.into(),
            DecoyError::Numerics(inner) => inner.into(),
            DecoyError::InvalidParameter { .. } => CliError::Config(e.to_string()),
        }
    }
}

impl From<McError> for CliError {
    fn from(e: McError) -> Self {
        CliError::Config(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bracket_errors_map_to_exit_4() {
        let e: CliError = Bb84Error::NoBracket {
            lo: 1.0,
            hi: 2.0,
            reason: "qber above limit everywhere".into(),
        }
        .into();
        assert_eq!(e.exit_code(), EXIT_BRACKET);
    }

    #[test]
    fn quadrature_exhaustion_maps_to_exit_3() {
        let e: CliError = NumericsError::NoConvergence {
            estimate: 1.0,
            error_bound: 0.5,
            subdivisions: 100,
        }
        .into();
        assert_eq!(e.exit_code(), EXIT_NUMERIC);
    }

    #[test]
    fn nested_channel_errors_keep_their_class() {
        let nested = Bb84Error::Channel(ChannelError::Numerics(NumericsError::NoConvergence {
            estimate: 0.0,
            error_bound: 1.0,
            subdivisions: 40,
        }));
        assert_eq!(CliError::from(nested).exit_code(), EXIT_NUMERIC);

        let invalid = Bb84Error::Channel(ChannelError::NonPositiveDistance(-3.0));
        assert_eq!(CliError::from(invalid).exit_code(), EXIT_CONFIG);
    }
}
