pub mod geometry;
pub mod io;
pub mod kinematics;
pub mod metrology;
pub mod par;
pub mod pipeline;
pub mod rng;
pub mod simulator;
pub mod stats;
pub mod thermal;
