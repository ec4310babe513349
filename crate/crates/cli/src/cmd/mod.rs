pub mod enroll;
pub mod eval;
pub mod infer;
pub mod prepare;
pub mod synth;
pub mod train;
