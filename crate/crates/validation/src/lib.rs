//! Host crate for the `acceptance` test target, which exercises the core
//! library and the command-line scenarios together.
