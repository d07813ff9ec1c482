//! P1 finite elements on metric graphs with shared vertex DOFs.
//!
//! Continuity at vertices is structural (one DOF per vertex) and the Kirchhoff
//! condition is the natural boundary condition of the weak form, so no
//! explicit vertex rows are needed.

pub mod assembly;
pub mod function;
pub mod mesh;

pub use assembly::{
    assemble_operators, integrate_power, max_weight, nonlinear_load, stiffness_action, weighted_mass, Discretization,
    Operators,
};
pub use function::GraphFunction;
pub use mesh::{Element, Mesh, MeshGrading, NodeSite};
