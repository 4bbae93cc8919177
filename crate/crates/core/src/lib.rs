pub mod cli;
pub mod cost;
pub mod dsl;
pub mod entail;
pub mod expr;
pub mod interp;
pub mod invariants;
pub mod normal;
pub mod par;
pub mod predicate;
pub mod print;
pub mod render;
pub mod sample;
pub mod spec;
pub mod state;
pub mod stmt;
pub mod wks;
pub mod worksheet;
pub mod verify;
pub mod wp;
