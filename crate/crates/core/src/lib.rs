//! A self-contained 2D social-navigation laboratory.
//!
//! The crate is organized around a small pipeline:
//!
//! - [`world`]: occupancy grids, poses, geodesic distance, shortest paths,
//!   line of sight.
//! - [`simcore`]: episode semantics: agent kinematics, pedestrian patrols,
//!   rewards, termination, deterministic rollouts producing trajectory logs.
//! - [`socialfeat`]: ground-truth social features (risk and social compass).
//! - [`encounters`]: encounter extraction, classification, and per-class
//!   metrics (ESR / ALV / AD) over trajectory logs.
//! - [`navmetrics`]: episode-level Success / SPL / Human-Collision metrics
//!   and cross-run aggregation.
//! - [`policy`]: a toy multi-belief recurrent policy with social-task
//!   regressors, manual backprop, an actor-critic trainer, and scripted
//!   baselines.

pub mod encounters;
pub mod navmetrics;
pub mod policy;
pub mod simcore;
pub mod socialfeat;
pub mod world;
