//! Example games built on the generic machinery.

pub mod gbm;
pub mod grab_dollar;
pub mod jump;

pub use gbm::{build_gbm_entry, gbm_closed_forms, GbmClosedForms, GbmEntryFamily, GbmEntryModel, GbmEntryParams};
pub use grab_dollar::{build_grab_dollar, GrabDollarFamily, GrabDollarModel, GrabDollarParams};
pub use jump::{build_jump_model, jump_diagnostics, JumpDiagnostics, JumpFamily, JumpModel, JumpModelParams};
