//! Exact p-adic linear algebra for Dieudonne modules over truncated Witt rings.

pub mod hodge;
pub mod instances;
pub mod deformation;
pub mod error;
pub mod io;
pub mod isocrystal;
pub mod lattice;
pub mod matrix;
pub mod series;
pub mod sign_groups;
pub mod strata;
pub mod witt;

pub use error::{Error, Result};
pub use witt::{WittContext, Zq};
pub use lattice::{Lattice, SemilinearMap};
pub use matrix::Mat;
