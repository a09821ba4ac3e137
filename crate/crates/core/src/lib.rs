//! Trace-driven simulation of a cellular last-mile bottleneck with
//! bounded-delay active queue management (BoDe) and the usual baselines:
//! CoDel, PIE, tail-drop and head-drop FIFOs, optionally composed into
//! strict-priority DiffServ classes.
//!
//! ```no_run
//! use bodesim::scenario::preset;
//!
//! let scenario = preset("fig2-bode").unwrap();
//! let report = bodesim::run(&scenario).unwrap();
//! println!("{:?}", report.summary.overall.p99_queuing_delay_ms);
//! ```

pub mod aqm;
pub mod cli;
pub mod diffserv;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod packet;
pub mod scenario;
pub mod source;
pub mod time;
pub mod trace;

pub use engine::{run, Engine, EventLog, Scenario, SimReport};
pub use error::{Error, Result};
pub use time::SimTime;
