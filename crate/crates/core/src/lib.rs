//! Online multiple testing with decoupled exploration.
//!
//! The crate provides deterministic alpha-wealth procedures (LOND, LORD++,
//! SAFFRON, ADDIS, e-LOND) as predictable state machines, a wrapper that
//! perturbs their thresholds upward while feeding only virtual decisions back
//! into the base state, weighted-regret metrics, closed-form bound
//! calculators, and a paired Monte-Carlo harness behind a CLI.
//!
//! ```
//! use domt::model::StreamItem;
//! use domt::procedures::{ProcedureKind, ProcedureSpec};
//! use domt::sampling::RngState;
//! use domt::wrapper::{DomtConfig, Wrapper, WrapperKind};
//!
//! let base = ProcedureSpec::new(ProcedureKind::Lord, 0.05).build().unwrap();
//! let cfg = DomtConfig::new(WrapperKind::Domt, 3.0, 0.05).unwrap();
//! let mut w = Wrapper::new(cfg, base, RngState::new(42)).unwrap();
//! let rec = w.step(&StreamItem::new(1, 0.001, None).unwrap()).unwrap();
//! assert!(rec.lambda_actual >= rec.lambda_base);
//! assert!(!rec.delta_base || rec.delta_actual);
//! ```

pub mod cli;
pub mod environments;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod procedures;
pub mod sampling;
pub mod theory;
pub mod wrapper;

pub use error::{Error, Result};
