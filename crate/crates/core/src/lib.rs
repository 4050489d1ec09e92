//! Simulation and analysis toolkit for open equity markets: an investable
//! universe restricted to the top n stocks by capitalization out of N, with
//! membership changing as ranks fluctuate.
//!
//! The crate provides market simulators, rank and censoring machinery,
//! local characteristics with numeraire and viability diagnostics,
//! functionally generated portfolios with master-formula verification, a
//! CAPM characterization, and universal portfolios over rank weights.

pub mod capm;
pub mod characteristics;
pub mod error;
pub mod fgp;
pub mod grid;
pub mod io;
pub mod local_time;
pub mod market;
pub mod model;
pub mod portfolio;
pub mod ranks;
pub mod universal;

pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use market::{increments, simulate, simulate_stream, IncrementSeries, MarketPath};
pub use model::{ModelSpec, VolSpec};
pub use ranks::{censored_increments, rank_path, RankView, TopNView};
