use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("distance matrix is not square (row {row} has {len} entries, expected {n})")]
    NotSquare { row: usize, len: usize, n: usize },
    #[error("distance ({i},{j}) is not a finite non-negative number")]
    NonFinite { i: usize, j: usize },
    #[error("distance matrix is not symmetric at ({i},{j})")]
    AsymmetricMatrix { i: usize, j: usize },
    #[error("diagonal entry {i} is nonzero")]
    NonzeroDiagonal { i: usize },
    #[error("triangle inequality fails: d({i},{j}) > d({i},{k}) + d({k},{j})")]
    TriangleViolation { i: usize, j: usize, k: usize },
    #[error("points {i} and {j} are at distance zero")]
    DuplicatePoint { i: usize, j: usize },
    #[error("label count {labels} does not match matrix size {n}")]
    LabelMismatch { labels: usize, n: usize },
    #[error("duplicate point label {0:?}")]
    DuplicateLabel(String),
    #[error("operation needs at least two points")]
    SinglePoint,
    #[error("{what} must be at least {min}, got {got}")]
    TooSmall { what: &'static str, min: usize, got: usize },
    #[error("{what} must be at most {max}, got {got}")]
    TooLarge { what: &'static str, max: usize, got: usize },
    #[error("graph is disconnected: vertex {0} is unreachable from vertex 0")]
    Disconnected(usize),
    #[error("edge ({u},{v}) is invalid: {reason}")]
    BadGraphEdge { u: usize, v: usize, reason: &'static str },
    #[error("not an ultrametric: d({i},{j}) > max(d({i},{k}), d({k},{j}))")]
    NotUltrametric { i: usize, j: usize, k: usize },
    #[error("malformed ultrametric tree: {0}")]
    MalformedTree(String),
    #[error("unknown point {0:?}")]
    UnknownPoint(String),
    #[error("fault-tolerance parameter {value} at point {point} exceeds the number of centers {k}")]
    ProfileExceedsK { point: usize, value: usize, k: usize },
    #[error("profile has {got} entries, expected one per point ({n})")]
    ProfileLength { got: usize, n: usize },
    #[error("k = {k} exceeds the number of points {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("invalid solution: {0}")]
    InvalidSolution(String),
    #[error("clusters do not form a partition of the points: {0}")]
    NotAPartition(String),
    #[error("eps must lie in (0, 1), got {0}")]
    BadEps(f64),
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error("instance with {n} points exceeds the oracle cap of {cap}")]
    TooLargeForOracle { n: usize, cap: usize },
    #[error("no feasible solution exists: {0}")]
    Infeasible(String),
    #[error("edge index {edge} is not an edge of the {n}-cycle")]
    BadEdge { edge: usize, n: usize },
    #[error("embedding contracts the pair ({i},{j})")]
    NotNonContractive { i: usize, j: usize },
    #[error("no cycle edge with stretch at least {bound} (best was {best})")]
    CertificateMissing { bound: f64, best: f64 },
    #[error("all {0} samples failed; last error: {1}")]
    AllSamplesFailed(usize, Box<Error>),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable tag for diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotSquare { .. } => "not_square",
            Error::NonFinite { .. } => "non_finite",
            Error::AsymmetricMatrix { .. } => "asymmetric_matrix",
            Error::NonzeroDiagonal { .. } => "nonzero_diagonal",
            Error::TriangleViolation { .. } => "triangle_violation",
            Error::DuplicatePoint { .. } => "duplicate_point",
            Error::LabelMismatch { .. } => "label_mismatch",
            Error::DuplicateLabel(_) => "duplicate_label",
            Error::SinglePoint => "single_point",
            Error::TooSmall { .. } => "too_small",
            Error::TooLarge { .. } => "too_large",
            Error::Disconnected(_) => "disconnected",
            Error::BadGraphEdge { .. } => "bad_graph_edge",
            Error::NotUltrametric { .. } => "not_ultrametric",
            Error::MalformedTree(_) => "malformed_tree",
            Error::UnknownPoint(_) => "unknown_point",
            Error::ProfileExceedsK { .. } => "profile_exceeds_k",
            Error::ProfileLength { .. } => "profile_length",
            Error::KTooLarge { .. } => "k_too_large",
            Error::InvalidSolution(_) => "invalid_solution",
            Error::NotAPartition(_) => "not_a_partition",
            Error::BadEps(_) => "bad_eps",
            Error::BadParameter(_) => "bad_parameter",
            Error::TooLargeForOracle { .. } => "too_large_for_oracle",
            Error::Infeasible(_) => "infeasible",
            Error::BadEdge { .. } => "bad_edge",
            Error::NotNonContractive { .. } => "not_non_contractive",
            Error::CertificateMissing { .. } => "certificate_missing",
            Error::AllSamplesFailed(..) => "all_samples_failed",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
            Error::Io(_) => "io",
        }
    }

    /// True for errors caused by an instance exceeding a documented size cap.
    pub fn is_size_limit(&self) -> bool {
        match self {
            Error::TooLarge { .. } | Error::TooLargeForOracle { .. } => true,
            Error::AllSamplesFailed(_, inner) => inner.is_size_limit(),
            _ => false,
        }
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_) | Error::Csv(_))
    }
}
