pub mod cli;
pub mod czd;
pub mod error;
pub mod family;
pub mod grid;
pub mod kernels;
pub mod operators;
pub mod oscillation;
pub mod quadrature;
pub mod report;
pub mod weights;
