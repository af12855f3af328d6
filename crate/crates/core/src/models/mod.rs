//! Built-in models.

pub mod beta;
pub mod binary;
pub mod gamma_strata;
pub mod matched_tables;
pub mod normal;
pub mod skew_normal;

pub use beta::{BetaLink, BetaRegDesign, BetaRegModel};
pub use binary::{BinaryDesign, BinaryLink, BinaryModel};
pub use gamma_strata::GammaStrataModel;
pub use matched_tables::{MatchedTablesDesign, MatchedTablesModel};
pub use normal::NormalModel;
pub use skew_normal::{skew_expectations, SkewExpectations, SkewNormalModel};
