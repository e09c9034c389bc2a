//! Process exit codes.
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 2 | invalid arguments or configuration |
//! | 3 | file missing or I/O failure |
//! | 4 | malformed manifest, matrix file or report |
//! | 5 | invalid pool (stimuli, model ids, non-finite data, shapes) |
//! | 6 | pool does not match the trained model |
//! | 7 | numerical failure (SVD, degenerate template, objective increase) |
//! | 8 | not converged within `--max-iters` (only with `--strict`) |
//! | 9 | metric precondition violated (too few stimuli, K too large) |

use baryalign::Error;

pub const USAGE: u8 = 2;
pub const IO: u8 = 3;
pub const FORMAT: u8 = 4;
pub const POOL: u8 = 5;
pub const MODEL_MISMATCH: u8 = 6;
pub const NUMERICAL: u8 = 7;
pub const NOT_CONVERGED: u8 = 8;
pub const METRIC: u8 = 9;

pub fn code_for(err: &anyhow::Error) -> u8 {
    let Some(err) = err.downcast_ref::<Error>() else {
        return USAGE;
    };
    match err {
        Error::InvalidConfig(_) | Error::InvalidSpec(_) => USAGE,
        Error::IoFailure { .. } | Error::MissingFile { .. } => IO,
        Error::BadMagic { .. }
        | Error::VersionUnsupported { .. }
        | Error::TruncatedPayload { .. }
        | Error::ManifestParse { .. }
        | Error::ParseFailure { .. } => FORMAT,
        Error::EmptyMatrix { .. }
        | Error::StimulusCountMismatch { .. }
        | Error::DuplicateStimulusId { .. }
        | Error::NonFiniteData { .. }
        | Error::MismatchedStimuli { .. }
        | Error::DuplicateModelId(_)
        | Error::TooFewModels(_)
        | Error::TargetTooSmall { .. }
        | Error::ShapeMismatch(_)
        | Error::NonFiniteInput(_)
        | Error::InvalidModelId(_)
        | Error::InvalidStimulusId(_) => POOL,
        Error::UnknownModelId(_) | Error::WidthMismatch { .. } | Error::ModelPoolMismatch(_) => {
            MODEL_MISMATCH
        }
        Error::SvdFailure { .. }
        | Error::DegenerateTemplate { .. }
        | Error::NumericalInstability { .. } => NUMERICAL,
        Error::TooFewStimuli { .. }
        | Error::KTooLarge { .. }
        | Error::StimulusMismatch
        | Error::NoVaryingDimensions(_) => METRIC,
    }
}
