//! Generic finite identifiability of Gaussian DAG models with one latent source.
//!
//! The observed vector `X` satisfies `X = Λᵀ X + δ L + ε` where the latent `L`
//! is a standard normal parent of every observed node and `Λ` is supported on
//! the edges of a DAG `G`. This crate decides whether the covariance
//! parametrization `(Λ, Ω, δ) ↦ (I − Λᵀ)⁻¹ (Ω + δδᵀ) (I − Λ)⁻¹` is generically
//! finite-to-one, using
//!
//! * graphical sufficient and necessary conditions on complements of derived
//!   undirected graphs ([`criteria`]),
//! * an exact rational Jacobian rank test ([`jacobian`]),
//! * tetrad and Spearman-matrix machinery for subgraph extension ([`spearman`]),
//!
//! and it enumerates all unlabeled DAGs on a few nodes to tabulate how the
//! criteria compare ([`enumerate`]).

pub mod criteria;
pub mod enumerate;
pub mod error;
pub mod graph;
pub mod jacobian;
pub mod linalg;
pub mod maps;
pub mod spearman;

pub use error::{Error, Result};
pub use graph::{CanonicalKey, Dag, UGraph};
pub use linalg::{Rat, RatMatrix};
