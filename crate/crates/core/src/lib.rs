pub mod agent;
pub mod bench;
pub mod bridge;
pub mod env;
pub mod envs;
pub mod nn;
pub mod ppo;
pub mod runner;
pub mod sac;
