pub mod cli;
pub mod eigensystem;
pub mod extended;
pub mod extraction;
pub mod intervals;
pub mod mesh;
pub mod oracle;
pub mod polynomial;
pub mod registry;
