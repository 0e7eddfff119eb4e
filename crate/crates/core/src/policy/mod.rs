//! Navigation policies: a multi-belief recurrent network with attention
//! fusion and social-feature auxiliary heads, its actor-critic training
//! harness, and two scripted baselines used for comparisons.

mod baselines;
mod net;
mod tape;
mod train;

pub use baselines::{observe_pose, GreedyPolicy, LearnedPolicy, SocialPolicy, TraceStep};
pub use net::{
    AuxTarget, HeadOutput, Layout, LossConfig, LossParts, Observation, ParamBlock, PolicyConfig,
    PolicyError, PolicyNet, Task, TrainSample, N_BELIEFS, SIGMA_FLOOR, TASKS,
};
pub use train::{
    aux_buffer_from_logs, train, train_aux, training_log_csv, Adam, AuxTrainReport, TrainConfig,
    TrainRow,
};
