//! Built-in environments.

pub mod bandit;
pub mod pendulum;
pub mod run_task;
mod spin_stub;

pub use bandit::Bandit;
pub use pendulum::Pendulum;
pub use run_task::{RunTask, RunTaskState};
pub use spin_stub::SpinStub;
