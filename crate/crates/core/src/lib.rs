//! Representative scenarios for min-max robust combinatorial optimization
//! over a finite set of cost scenarios.
//!
//! Given scenarios `c¹, …, cᴺ`, the robust problem is
//! `min_{x ∈ X} max_i cⁱ·x`. Each method here builds one scenario `c`,
//! solves the nominal problem `min_{x ∈ X} c·x`, and certifies how far the
//! result can be from the robust optimum:
//!
//! * [`scenarios::midpoint_scenario`]: the average scenario;
//! * [`scenarios::worstcase_scenario`]: the element-wise maximum;
//! * [`scenarios::construct_lp_scenario`]: a convex combination chosen by
//!   an LP to maximize the provable guarantee.
//!
//! [`bounds`] turns a scenario into upper/lower bounds, [`experiments`]
//! runs the averaged selection-problem experiments, and [`lp`] is the
//! simplex engine behind both LPs.

pub mod bounds;
pub mod error;
pub mod experiments;
pub mod instance;
pub mod lp;
pub mod model;
pub mod problems;
pub mod scenarios;

pub use error::{Error, Result};
pub use model::{BinarySolution, BoundReport, ConvexWeights, Provenance, Scenario, UncertaintySet};
pub use problems::ProblemSpec;
