//! Exact toolkit for linear bilevel optimization.

pub mod corpus;
pub mod instance;
pub mod kappa;
pub mod linalg;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod polyhedron;
pub mod reform;
pub mod verify;
