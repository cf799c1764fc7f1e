//! Data generators for the experiment subcommands are provided by the
//! library's `demos` module so the verification suite exercises the same
//! code; this module re-exports them.

pub use flowstat::demos::*;
