//! Interior-point solver for arrowhead-structured linear programs with
//! distributed Schur-complement KKT solves.

pub mod ipm;
pub mod kkt;
pub mod linalg;
pub mod oracle;
pub mod problem;
pub mod runtime;
pub mod schur;
