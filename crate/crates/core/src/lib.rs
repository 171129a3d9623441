//! Fluctuation identities for spectrally one-sided Levy processes: scale
//! functions with interchangeable numerical backends, the first-passage laws
//! of the drawdown and rally processes, exponential-Levy risk measures, and
//! a Monte Carlo oracle that validates all of it.

pub mod cli;
pub mod config;
pub mod drawdown;
pub mod error;
pub mod fluctuation;
pub mod laplace;
pub mod mc;
pub mod process;
pub mod quad;
pub mod risk;
pub mod scale;
pub mod special;
pub mod validation;

pub use error::{Error, Result};
pub use laplace::{Inversion, InversionConfig, InversionMethod};
pub use process::{Family, ProcessSpec};
pub use scale::{Backend, ScaleEngine, ScaleTable, Side};
pub use special::SeriesTolerance;
