pub mod term;
pub mod syntax;
pub mod grammar;
pub mod thesaurus;
pub mod engine;
pub mod treepath;
pub mod theory;
pub mod frame;
pub mod pipeline;
