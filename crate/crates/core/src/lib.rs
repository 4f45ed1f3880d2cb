//! Network Lasso on weighted graphs and its minimum-cost flow dual.
//!
//! The network Lasso recovers a graph signal from labels on a few sampled
//! nodes by minimising half the squared label error plus `lambda` times the
//! weighted total variation. This crate provides
//!
//! - [`graph`]: the empirical graph, its incidence operator and divergence,
//! - [`signal`]: signals, labels, partitions and the primal objective,
//! - [`solver`]: a primal-dual splitting solver with duality-gap certificates,
//! - [`flow`]: flows on the graph extended by an accumulator node, the
//!   min-cost flow objective, and flow-based optimality certificates,
//! - [`oracle`]: slow reference solvers for small instances,
//! - [`io`], [`generate`] and [`cli`]: CSV formats, instance generators and the
//!   command-line front end.
//!
//! ```
//! use nlasso_flow::{graph::EmpiricalGraph, signal::Observations, solver::{run, SolverConfig}};
//!
//! let g = EmpiricalGraph::new(3, [(1, 2, 1.0), (2, 3, 1.0)]).unwrap();
//! let obs = Observations::new([(1, 1.0), (3, 1.0)]).unwrap();
//! let out = run(&g, &obs, &SolverConfig::default()).unwrap();
//! assert!((out.x_avg.at(2) - 1.0).abs() < 1e-2);
//! ```

pub mod cli;
pub mod error;
pub mod flow;
pub mod generate;
pub mod graph;
pub mod io;
pub mod oracle;
pub mod signal;
pub mod solver;

pub use error::{Error, Result};
