pub mod bench;
pub mod bundle;
pub mod fol;
pub mod gen;
pub mod graph;
pub mod hier;
pub mod task;
pub mod world;
