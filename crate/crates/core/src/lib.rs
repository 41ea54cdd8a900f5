pub mod czmax;
pub mod dyadic;
pub mod error;
pub mod function;
pub mod hardy_bmo;
pub mod io;
pub mod measure;
pub mod operators;
pub mod region;
pub mod sampling;
pub mod tree;
pub mod verify;
