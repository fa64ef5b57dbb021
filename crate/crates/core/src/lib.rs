pub mod analysis;
pub mod config;
pub mod controller;
pub mod drt;
pub mod mobsim;
pub mod network;
pub mod population;
pub mod replanning;
pub mod scoring;
pub mod time;
pub mod transit;
pub mod xml;
