use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // Pool construction and validation.
    #[error("representation matrix `{model_id}` is empty ({rows}x{cols})")]
    EmptyMatrix {
        model_id: String,
        rows: usize,
        cols: usize,
    },
    #[error("model `{model_id}` has {ids} stimulus ids for {rows} rows")]
    StimulusCountMismatch {
        model_id: String,
        ids: usize,
        rows: usize,
    },
    #[error("model `{model_id}` repeats stimulus id `{stimulus_id}`")]
    DuplicateStimulusId {
        model_id: String,
        stimulus_id: String,
    },
    #[error("model `{model_id}` has a non-finite entry at ({row}, {col})")]
    NonFiniteData {
        model_id: String,
        row: usize,
        col: usize,
    },
    #[error("model `{model_id}` does not share the pool's stimulus ids and order")]
    MismatchedStimuli { model_id: String },
    #[error("duplicate model id `{0}`")]
    DuplicateModelId(String),
    #[error("a pool needs at least 2 models, got {0}")]
    TooFewModels(usize),
    #[error("padding target width {target} is smaller than member width {width}")]
    TargetTooSmall { target: usize, width: usize },

    // Linear algebra.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite input to {0}")]
    NonFiniteInput(&'static str),
    #[error("singular value decomposition did not converge ({rows}x{cols})")]
    SvdFailure { rows: usize, cols: usize },

    // Training.
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("template has zero Frobenius norm at iteration {iteration}")]
    DegenerateTemplate { iteration: usize },
    #[error("objective increased from {previous} to {current} at iteration {iteration}")]
    NumericalInstability {
        iteration: usize,
        previous: f64,
        current: f64,
    },

    // Model/pool agreement.
    #[error("model `{0}` is not part of the trained alignment model")]
    UnknownModelId(String),
    #[error("model `{model_id}` has width {actual}, trained with width {expected}")]
    WidthMismatch {
        model_id: String,
        expected: usize,
        actual: usize,
    },
    #[error("pool does not match alignment model: {0}")]
    ModelPoolMismatch(String),

    // Metrics.
    #[error("need at least {required} stimuli, got {actual}")]
    TooFewStimuli { required: usize, actual: usize },
    #[error("K = {k} is invalid for {stimuli} stimuli")]
    KTooLarge { k: usize, stimuli: usize },
    #[error("reports do not share stimulus ids and order")]
    StimulusMismatch,
    #[error("model `{0}` has no non-constant dimension shared with any partner")]
    NoVaryingDimensions(String),

    // Synthetic data.
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    // Storage.
    #[error("{}: bad magic bytes", path.display())]
    BadMagic { path: PathBuf },
    #[error("{}: unsupported format version {version}", path.display())]
    VersionUnsupported { path: PathBuf, version: u16 },
    #[error("{}: payload is {actual} bytes, header implies {expected}", path.display())]
    TruncatedPayload {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },
    #[error("{}: {source}", path.display())]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: file not found", path.display())]
    MissingFile { path: PathBuf },
    #[error("{}: {message}", path.display())]
    ManifestParse { path: PathBuf, message: String },
    #[error("{}: line {line}: {message}", path.display())]
    ParseFailure {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("model id `{0}` cannot be used as a file name")]
    InvalidModelId(String),
    #[error("stimulus id {0:?} contains a line break or tab")]
    InvalidStimulusId(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile { path }
        } else {
            Error::IoFailure { path, source }
        }
    }
}
