use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid external-memory parameters: {0}")]
    InvalidParams(String),

    #[error("device I/O failed: {0}")]
    Io(#[from] std::io::Error),

    #[error("vertex {vertex} out of range for {num_vertices} vertices")]
    VertexOutOfRange { vertex: u64, num_vertices: u64 },

    #[error("invalid edge ({0}, {1}): endpoints must be distinct")]
    SelfLoop(u32, u32),

    #[error("invalid hyperedge: {0}")]
    InvalidHyperedge(String),

    #[error("sketch parameters do not match: {0}")]
    ParamMismatch(String),

    #[error("index map is not a bijection: {0}")]
    NotBijective(String),

    #[error("record of {record_words} words is too wide for RAM of {ram_words} words")]
    RecordTooLarge { record_words: usize, ram_words: usize },

    #[error("corrupt sketch array: {0}")]
    Corrupt(String),

    #[error("every subsampling level saturated: min cut is at least {k} at level {levels}; increase k or the number of levels")]
    Saturated { k: usize, levels: usize },

    #[error("weight {weight} outside [1, {max_weight}]")]
    WeightOutOfRange { weight: f64, max_weight: f64 },

    #[error("density precondition failed: eps^2 E / V = {ratio:.4} is below {required:.4}")]
    DensityPrecondition { ratio: f64, required: f64 },

    #[error("bucket {bucket} holds {edges} edges, above the small-bucket limit {limit:.2}")]
    BucketOverflow { bucket: usize, edges: u64, limit: f64 },

    #[error("bucket {bucket}: recovered {recovered} of {wanted} sampled edges before the sketches ran out")]
    RecoveryShortfall { bucket: usize, recovered: u64, wanted: u64 },

    #[error("{0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
