//! File formats, dataset loaders, a threaded seed study and the `maxplus`
//! command-line driver on top of [`maxplus_core`].

pub mod cli;
pub mod io;
pub mod study;

pub use maxplus_core;
