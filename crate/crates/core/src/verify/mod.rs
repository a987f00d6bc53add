//! Independent oracles for the closed-form solvers and the checks that
//! compare the two.

pub mod checks;
pub mod fd;
pub mod mc;
pub mod report;
