pub mod dynamics;
pub mod geometry;
pub mod seed;
pub mod interval;
pub mod partition;
pub mod robust_mdp;
pub mod abstraction;
pub mod controller;
pub mod harness;
