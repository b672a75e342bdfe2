pub mod cli;
pub mod godel;
pub mod head;
pub mod lang;
pub mod numfmt;
pub mod qstate;
pub mod reading;
pub mod scaling;
