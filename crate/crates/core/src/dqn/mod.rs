//! Deep Q-network agent: network, replay memory, schedules, training loop and
//! checkpoints.

pub mod checkpoint;
pub mod network;
pub mod policy;
pub mod replay;
pub mod schedule;
pub mod train;

pub use checkpoint::{load_checkpoint, load_for_variant, save_checkpoint, Checkpoint};
pub use network::{Gradients, QNetwork};
pub use policy::{greedy_action, rollout_greedy, select_action, td_target, Rollout};
pub use replay::{ReplayMemory, Transition};
pub use schedule::{EpsilonSchedule, LearningRateSchedule};
pub use train::{train, write_log_csv, EpochLog, TrainConfig, Trained};
