//! Chemo-mechanical lithiation of silicon particles in contact with a rigid
//! obstacle: finite elements in space, adaptive multistep integration in time
//! and a semismooth Newton active-set solver for the contact constraints.

pub mod fem;
pub mod material;
pub mod sparse;
pub mod assembly;
pub mod contact;
pub mod newton;
pub mod integrator;
pub mod adaptivity;
pub mod sim;
