use thiserror::Error;

use crate::hose::Overload;
use crate::request::VcId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid request: {0}")]
    InvalidRequest(String),

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("invalid template set: {0}")]
    InvalidTemplates(String),

    #[error("request needs {needed} per VM but the largest template is {largest}")]
    Unpriceable { needed: String, largest: String },

    #[error("placement for vc {vc} is infeasible: {} overloaded element(s)", .overloads.len())]
    Infeasible { vc: VcId, overloads: Vec<Overload> },

    #[error("invalid placement: {0}")]
    InvalidPlacement(String),

    #[error("vc {0} is already reserved")]
    AlreadyReserved(VcId),

    #[error("vc {0} is not reserved (double release?)")]
    NotReserved(VcId),

    #[error("calibration impossible: {0}")]
    Calibration(String),

    #[error("invalid workload: {0}")]
    InvalidWorkload(String),

    #[error("scenarios do not share a workload: {0}")]
    WorkloadMismatch(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("simulation invariant violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
