use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),
    #[error("target mesh size must be positive and finite, got {0}")]
    InvalidMeshSize(f64),
    #[error("element {0} has non-positive area")]
    DegenerateElement(usize),
    #[error("edge ({0}, {1}) is shared by more than two elements")]
    NonManifoldEdge(usize, usize),
    #[error("vertex index {index} out of range for {count} vertices")]
    VertexOutOfRange { index: usize, count: usize },
    #[error("facet index {index} out of range for {count} facets")]
    FacetOutOfRange { index: usize, count: usize },
    #[error("triangulation failed: {0}")]
    Triangulation(String),
    #[error("malformed mesh file (line {line}): {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("polynomial degree must be at least 1, got {0}")]
    InvalidDegree(usize),
    #[error("unknown discretization variant `{0}` (expected hdg, edg or edg-hdg)")]
    UnknownVariant(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("element {element}: {what} is not positive definite")]
    NotPositiveDefinite { element: usize, what: &'static str },
    #[error("element {element}: divergence block is rank deficient")]
    RankDeficientDivergence { element: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("factorization of {what} failed: {msg}")]
    Factorization { what: String, msg: String },
    #[error("preconditioner `{0}` is not valid for this system")]
    IncompatiblePreconditioner(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{0}")]
    Setup(String),
    #[error("Krylov breakdown: {0}")]
    Breakdown(String),
}

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("matrix of size {size} exceeds the dense diagnostics cap of {cap}; use a coarser mesh")]
    SizeCap { size: usize, cap: usize },
    #[error("second matrix of the pencil is not positive definite on the deflated subspace")]
    IndefiniteWeight,
    #[error("eigenvalue computation failed")]
    Eigen,
    #[error("field length {got} does not match the layout ({expected})")]
    LayoutMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Umbrella error used by the study drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
