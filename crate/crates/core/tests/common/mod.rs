#![allow(dead_code, clippy::needless_range_loop)]

pub mod gradcheck;
pub mod oracles;
pub mod receptive;
pub mod spectrum;
