use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported scheme parameters: {0}")]
    UnsupportedScheme(String),
    #[error("ciphertexts belong to different schemes")]
    SchemeMismatch,
    #[error("operation not supported by this scheme: {0}")]
    UnsupportedOperation(&'static str),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dataset is infeasible: {0}")]
    InfeasibleSpacing(String),
    #[error("duplicate keys in key-value set")]
    DuplicateKeys,
    #[error("duplicate identifier coordinate in dataset")]
    DuplicateId,
    #[error("store encoding failed after {attempts} attempt(s)")]
    EncodeFailure { attempts: u32 },
    #[error("cuckoo placement failed after {attempts} reseedings")]
    CuckooFailure { attempts: u32 },
    #[error("index {index} out of range for database of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("duplicate index in batch query")]
    DuplicateIndex,
    #[error("sparse row has weight {got}, expected {expected}")]
    WrongRowWeight { got: usize, expected: usize },
    #[error("induced graph is not null: edge ({i},{j}) carries axis {axis}")]
    NotNullGraph { i: usize, j: usize, axis: usize },
    #[error("induced graph is not {axis}-exclusive")]
    NotExclusive { axis: usize },
    #[error("partition is not a valid cover of the vertex set")]
    InvalidPartition,
    #[error("stripping heuristic failed to partition the dataset")]
    StripsFailed,
    #[error("labeled degree {measured} exceeds bound {bound}")]
    DegreeBound { measured: usize, bound: usize },
    #[error("negligible-probability event: value not invertible in the plaintext ring")]
    NonInvertible,
    #[error("recovered coordinate exceeds the coordinate domain")]
    CoordinateIntegrity,
    #[error("malformed message: {0}")]
    Wire(String),
    #[error("protocol error on {party} side: {source}")]
    Party {
        party: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Attribute an error to the party whose step produced it.
    pub fn at(self, party: &'static str) -> Error {
        Error::Party {
            party,
            source: Box::new(self),
        }
    }
}
