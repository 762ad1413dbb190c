use thiserror::Error;

use crate::edr::EdrError;
use crate::eval::EvalError;
use crate::gbtree::GbtError;
use crate::panel::PanelError;
use crate::tuning::TuningError;

/// Any error raised by the pipeline stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Panel(#[from] PanelError),
    #[error(transparent)]
    Edr(#[from] EdrError),
    #[error(transparent)]
    Model(#[from] GbtError),
    #[error(transparent)]
    Tuning(#[from] TuningError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}
