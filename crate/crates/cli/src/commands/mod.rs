pub mod compare;
pub mod convergence;
pub mod eval;
pub mod export;
pub mod gittins;
pub mod structure;
pub mod sweep;
pub mod train;
