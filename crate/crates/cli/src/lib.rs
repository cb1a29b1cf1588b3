//! Scenario simulation, epoch file I/O, and evaluation reports for the
//! cooperative ranging toolkit. The `covr` binary is a thin shell over these
//! modules; they are exported so test harnesses can drive the same code
//! paths directly.

pub mod epochs;
pub mod eval;
pub mod sim;
