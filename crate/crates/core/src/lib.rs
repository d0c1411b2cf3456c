//! Energy-based swing-up control of a Furuta pendulum, with Entropy Search
//! over the controller's four gains.

pub mod baseline;
pub mod care;
pub mod config;
pub mod controller;
pub mod dynamics;
pub mod entropy_search;
pub mod error;
pub mod gp;
pub mod ode;
pub mod output;
pub mod simulator;
pub mod sweep;

pub use error::{Error, Result};
