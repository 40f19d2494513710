//! Parametric, stochastic, bracketed L-systems.

mod derive;
mod expr;
mod growth;
mod parse;
mod symbol;

pub use derive::{derive, Deriver};
pub use expr::{BinOp, Env, Expr, Scope};
pub use growth::{evaluate_growth, GrowthFunction};
pub use parse::{
    parse_model, parse_model_with, parse_module_list, ModelDefinition, ModuleTemplate, Production, Successor,
    DEFAULT_MAX_LENGTH,
};
pub use symbol::{ModuleSymbol, Name, SymbolString};
