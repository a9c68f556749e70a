//! Revenue maximization over monotone allocation profiles.

mod ascent;
mod lp;
mod staircase;

pub use ascent::{
    coordinate_ascent, coordinate_ascent_with, default_tolerance, random_profile, repair,
    AscentOptions, SolveError, SolveReport, StartOutcome,
};
pub use lp::{build_coordinate_lp, solve_coordinate, CoordinateLP, LpError};
pub use staircase::normalize_staircase;
