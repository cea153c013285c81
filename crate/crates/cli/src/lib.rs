//! Problem-file schema, seeded corpus and subcommand implementations
//! behind the `halfline` binary.

pub mod commands;
pub mod corpus;
pub mod output;
pub mod schema;
