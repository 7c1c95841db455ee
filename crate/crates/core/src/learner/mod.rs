//! DQN and DDQN learners: exploration schedule, replay memory, TD targets
//! and the training loop.

mod replay;
pub mod schedule;
mod targets;
mod train;

pub use replay::{ReplayBuffer, Transition};
pub use schedule::{
    draw, explore_probability, random_probability, select_action, select_from_values, Choice, ScheduleParams,
};
pub use targets::{ddqn_target, ddqn_target_from_values, dqn_target, dqn_target_from_values};
pub use train::{
    build_network, finetune, run_training, run_training_with, stats_csv, sync_target, train_step, Algo, EpisodeStats,
    Exploration, Learner, NetConfig, RunSetup, TrainOutcome, TrainParams, STATS_HEADER,
};
