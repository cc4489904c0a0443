pub mod branch;
pub mod error;
pub mod homotopy;
pub mod hs;
pub mod lame;
pub mod periods;
pub mod poly;
pub mod quad;
pub mod quad_diff;
pub mod wkb;
