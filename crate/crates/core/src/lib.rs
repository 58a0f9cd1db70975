pub mod branches;
pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod family;
pub mod homotopy;
pub mod linalg;
pub mod ode;
pub mod output;
pub mod path;
pub mod perm;
pub mod repro;
pub mod scenarios;
pub mod singular;
pub mod svg;
pub mod tracker;
pub mod word;
