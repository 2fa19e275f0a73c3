use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("triangle {0} has non-positive area")]
    NonPositiveArea(usize),
    #[error("mesh is invalid: {0}")]
    InvalidMesh(String),
    #[error("mesh file line {line}: {msg}")]
    MeshParse { line: usize, msg: String },
    #[error("column {col} is dry (H = {depth:e} m)")]
    DryColumn { col: usize, depth: f64 },
    #[error("columns {a} and {b} share an edge but have {la} and {lb} layers")]
    NonConformingLayers { a: usize, b: usize, la: usize, lb: usize },
    #[error("layout shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("penalty length scale must be positive, got {0}")]
    NonPositiveLength(f64),
    #[error("degenerate layer: m_z = 0")]
    DegenerateLayer,
    #[error("external CFL number {courant:.4} exceeds 1/3 (dt2d = {dt2d} s)")]
    CflViolation { courant: f64, dt2d: f64 },
    #[error("singular mass matrix in column {col} (J2D = {j2d:e})")]
    SingularMass { col: usize, j2d: f64 },
    #[error("zero pivot at layer {layer}, node {node}")]
    ZeroPivot { layer: usize, node: usize },
    #[error("cannot split {triangles} triangles over {ranks} ranks")]
    TooManyRanks { ranks: usize, triangles: usize },
    #[error("halo channel closed (rank {rank})")]
    ChannelClosed { rank: usize },
    #[error("halo map mismatch: {0}")]
    MapMismatch(String),
    #[error("schedule violation: {0}")]
    ScheduleViolation(String),
    #[error("non-finite value in {field} at step {step}")]
    NonFinite { field: &'static str, step: usize },
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("{context}: {source}")]
    Step { context: String, source: Box<Error> },
}

impl Error {
    /// Wraps an error with step/field context for numeric aborts.
    pub fn at(self, context: impl Into<String>) -> Error {
        Error::Step { context: context.into(), source: Box::new(self) }
    }
}
