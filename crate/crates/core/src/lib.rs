pub mod hin;
pub mod linalg;
pub mod parallel;
pub mod sparse;
pub mod semantics;
pub mod autodiff;
pub mod layers;
pub mod train;
pub mod fixtures;
