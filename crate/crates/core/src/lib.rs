pub mod coherence;
pub mod commands;
pub mod config;
pub mod error;
pub mod grid;
pub mod interferometer;
pub mod interp;
pub mod io;
pub mod linalg;
pub mod pipeline;
pub mod reconstruct;
pub mod schmidt;
pub mod spdc;
