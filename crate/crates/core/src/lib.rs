//! Probing frozen per-layer sentence embeddings for label-relevant knowledge.
//!
//! Two complementary measures are provided: classic probing (held-out F1 of a
//! small feed-forward classifier) and the online-code description length of
//! the labels given the representations. On top of them sit the experiment
//! runner for multi-encoder, multi-layer, multi-seed grids, a synthetic data
//! generator with closed-form Bayes accuracy, and the pretraining cost model.

pub mod cli;
pub mod costmodel;
pub mod embstore;
pub mod mdl;
pub mod probecore;
pub mod rng;
pub mod runner;
pub mod synthgen;
