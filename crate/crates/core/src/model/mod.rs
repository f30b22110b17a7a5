//! Placeholder.
pub struct CompiledModel;
pub struct Diagnostic;
pub fn parse_model() {}
pub fn compile_model() {}
