#![allow(dead_code)]

pub mod cases;
pub mod fixtures;
pub mod invariants;
pub mod oracles;
pub mod reference;
