pub mod dae;
pub mod error;
pub mod matspace;
pub mod simulate;
pub mod spectral;
pub mod reduction;
pub mod riccati;
pub mod observer;
pub mod heatpde;
pub mod io;
pub mod cli;
