//! Thermograph: an energy-oriented compiler for stochastic site-graph rewriting.
//!
//! The engine takes a model made of three ingredients — a contact graph (the
//! type of all graphs in play), a set of reversible generator rules, and a set
//! of connected energy patterns with real-valued costs — and compiles the
//! generators into a finite refined rule set in which every rule has a
//! context-independent balance vector: the exact number of instances of each
//! energy pattern it produces or consumes, however it is applied. Equipped
//! with any compatible rate map, the refined system is a continuous-time
//! Markov chain with detailed balance whose stationary distribution is the
//! Boltzmann distribution of the declared energy landscape.
//!
//! Crate layout mirrors the pipeline:
//!
//! - [`sitegraph`]: site graphs, contact maps, embeddings, canonical forms
//! - [`gluing`]: pullbacks, pushouts and minimal gluings (multi-sums)
//! - [`rules`]: reversible rules, rewriting, extensions and their mirrors
//! - [`refine`]: the absorb-or-avoid growth policy and mature-extension
//!   enumeration — the heart of the compiler
//! - [`energy`]: energy models, rate policies, compatibility checking
//! - [`sim`]: exact Gillespie simulation with observables and interventions
//! - [`verify`]: brute-force state-space enumeration and detailed-balance
//!   certification at desk scale
//! - [`model`]: the model-file grammar, diagnostics and compilation
//! - [`kasim`]: KaSim-syntax export of compiled rule sets

pub mod energy;
pub mod gluing;
pub mod kasim;
pub mod model;
pub mod refine;
pub mod rules;
pub mod sim;
pub mod sitegraph;
#[doc(hidden)]
pub mod testkit;
pub mod verify;

pub use model::{compile_model, parse_model, CompiledModel, Diagnostic};
