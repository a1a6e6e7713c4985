//! Asymmetric commonly known beliefs and the group game.

pub mod asymmetric;
pub mod group;
