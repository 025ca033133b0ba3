pub mod chains;
pub mod expr;
pub mod invariants;
pub mod normalform;
pub mod pseries;
pub mod solutions;
