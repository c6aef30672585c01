pub mod lexer;
pub mod rtl_ast;
pub mod sva;
pub mod struct_features;
pub mod canonical;
pub mod semantic;
pub mod cluster;
pub mod spec_model;
pub mod mapping;
pub mod config;
pub mod pipeline;
pub mod feedback;
pub mod report;
