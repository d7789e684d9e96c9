//! Shortest escape paths through families of rotated and translated
//! boundaries.
//!
//! An unknown starting pose inside a region is replaced by a finite family
//! of moved copies of the region boundary. The escape path is a polyline
//! from a common anchor that touches every copy once, and its length is
//! minimized over point positions and over the visiting order.

pub mod acceptance;
pub mod analysis;
pub mod cli;
pub mod error;
pub mod export;
pub mod geometry;
pub mod nlp_solver;
pub mod order_search;
pub mod path;
pub mod scenario;

pub use error::{Error, Result};
pub use geometry::{BoundaryExpr, Point, RigidMotion, Vec2, Vec3};
pub use nlp_solver::{solve_fixed_order, SolveOptions, Solution};
pub use order_search::{OrderPlan, Strategy};
pub use path::{LengthReport, Polyline};
pub use scenario::{build_instance, Catalog, Instance, Mode, ScenarioSpec};
