pub mod asymptotics;
pub mod control;
pub mod dynamics;
pub mod erasure;
pub mod error;
pub mod numeric;
pub mod oracle;
pub mod speed_limit;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    validate_problem, Boundary, Direction, OptimalSolution, Piece, Problem, Protocol, Quench, Sample, Segment,
    SystemParams, Trajectory, Units,
};
