//! Specification-guided dynamic task sampling for tabular reinforcement
//! learning.
//!
//! A task is written in a small temporal specification language
//! ([`spec`]), compiled into a DAG of guarded sub-tasks ([`graph`]) and
//! learned on a labeled MDP ([`env`], [`grid`]) by a Student of per-edge
//! Q-learning policies ([`student`]) that a bandit-style Teacher schedules
//! ([`teacher`]). [`baselines`] holds the comparison algorithms and
//! [`harness`] the seeded experiment runner behind the `lsts` binary.

pub mod baselines;
pub mod env;
pub mod graph;
pub mod grid;
pub mod harness;
pub mod rng;
pub mod spec;
pub mod student;
pub mod teacher;
