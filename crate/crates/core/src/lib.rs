pub mod asymptotics;
pub mod canonical;
pub(crate) mod cells;
pub mod closed_form;
pub mod coefficient;
pub mod error;
pub mod measure;
pub mod numerics;
pub mod string;
pub mod sturm_liouville;
pub mod transfer;
pub mod weyl;
