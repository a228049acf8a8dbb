use thiserror::Error;

use crate::{eval::EvalError, filters::FilterError, grid::GridError, io::LoadError, sim::SimError, visibility::VisibilityError};

/// Any error produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Visibility(#[from] VisibilityError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("usage: {0}")]
    Usage(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
