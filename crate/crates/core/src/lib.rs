pub mod affine;
pub mod canonical;
pub mod cloud;
pub mod error;
pub mod fps;
pub mod superquadric;
pub mod shape_space;
pub mod fitting;
pub mod metrics;
pub mod io;
