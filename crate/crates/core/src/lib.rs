pub mod depgraph;
pub mod embedder;
pub mod frontend;
pub mod fsgnn;
pub mod persist;
pub mod pipeline;
pub mod resampler;
pub mod slicer;
