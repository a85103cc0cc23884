use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),

    #[error("condenser plates touch: obstacle node {node} lies on the outer boundary")]
    PlatesTouch { node: usize },

    #[error("no convergence after {iterations} iterations (last energy {last_energy:e})")]
    NoConvergence { iterations: usize, last_energy: f64 },

    #[error("capacity of the full cube is numerically zero ({0:e})")]
    VanishingDenominator(f64),

    #[error("time step {step} (t = {time}): {source}")]
    TimeStep {
        step: usize,
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("inside node {0} has no inside neighbour")]
    IsolatedNode(usize),

    #[error("amplitude A_{index} vanishes; the divergence hypothesis is violated")]
    ZeroAmplitude { index: usize },

    #[error("amplitude A_{index} = {value} is not below gamma_2 = {gamma_2}")]
    AmplitudeTooLarge { index: usize, value: f64, gamma_2: f64 },

    #[error("no admissible R_o in [{lo:e}, {hi:e}] for t_o = {t_o}; try a smaller epsilon or a wider search range")]
    NoAdmissibleRadius { lo: f64, hi: f64, t_o: f64 },

    #[error("empty region: {0}")]
    EmptyRegion(String),

    #[error("negative value {value:e} at node {node} (time index {time_index}); probe needs u >= 0")]
    NegativeValue { node: usize, time_index: usize, value: f64 },

    #[error("spreading hypothesis fails at node {node}: u = {value} < k = {k}")]
    SpreadingHypothesis { node: usize, value: f64, k: f64 },

    #[error("too few usable points for a fit: {0}")]
    TooFewPoints(usize),

    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
