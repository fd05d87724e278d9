pub mod benchmark;
pub mod cluster;
pub mod denoise;
pub mod fit;
pub mod generate;
