pub mod atlas;
pub mod bifurcation;
pub mod error;
pub mod lambert;
pub mod manifold;
pub mod model;
pub mod network;
pub mod normal_form;
pub mod reproduce;
pub mod solver;
pub mod spectrum;

pub use error::{Error, Result};
