//! Query-limited black-box attacks as discrete set maximisation.
//!
//! An ℓ∞ perturbation is restricted to the vertices of the ε-ball: every
//! block of the noise canvas is pushed to `+ε` (blocks in the working set) or
//! `−ε`. The attack objective becomes a set function over blocks, maximised by
//! lazy greedy local search on a coarse-to-fine block hierarchy.
//!
//! - [`setfn`]: set functions, lazy insertion/deletion and local search
//! - [`blocks`]: the block grid and the hierarchical attack
//! - [`oracle`]: the loss oracle with query accounting
//! - [`models`]: small victims, FGSM and PGD
//! - [`analysis`]: exhaustive checks of the approximation theory
//! - [`verify`]: named, seeded property suites

pub mod analysis;
pub mod blocks;
pub mod models;
pub mod oracle;
pub mod setfn;
pub mod verify;

pub use blocks::{hierarchical_attack, AttackConfig, AttackResult, BlockGrid, ImageSpec, NoiseCanvas};
pub use oracle::{AttackMode, AttackObjective, Victim};
pub use setfn::{ElementSet, GroundSet, SetFunction};
