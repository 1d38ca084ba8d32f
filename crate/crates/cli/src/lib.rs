//! File formats and report documents of the `hrx` command line tool,
//! exposed as a library so the formats can be tested and reused directly.

pub mod formats;
pub mod reports;
