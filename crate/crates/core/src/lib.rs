pub mod config;
pub mod convergence;
pub mod deformation;
pub mod flow;
pub mod grid;
pub mod io;
pub mod memory_kernel;
pub mod ode;
pub mod oracle;
pub mod orientation;
pub mod quad;
pub mod report;
pub mod sim;
pub mod spectral;
pub mod stress;
pub mod tensor;
