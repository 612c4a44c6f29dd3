use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("unsolvable network: {0}")]
    UnsolvableNetwork(String),
    #[error("no detectable fault: |i_p - i_n| = {0:e} A is below the detection threshold")]
    NoDetectableFault(f64),
    #[error("insufficient resolution: {0}")]
    InsufficientResolution(String),
    #[error("incoherent sampling: {0}")]
    IncoherentSampling(String),
    #[error("generation failed at fault position {position_km} km: {source}")]
    GenerationFailed {
        position_km: f64,
        #[source]
        source: Box<Error>,
    },
    #[error("constant column {0}: min equals max")]
    ConstantColumn(usize),
    #[error("degenerate split: {0}")]
    DegenerateSplit(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("empty data")]
    EmptyData,
    #[error("config error: {0}")]
    Config(String),
    #[error("divergence: non-finite cost at epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("undefined MAPE: actual value at index {0} is zero")]
    UndefinedMape(usize),
    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),
    #[error("incompatible model: {0}")]
    IncompatibleModel(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
