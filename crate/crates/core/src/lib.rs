//! Distances, curvature measures and convergence diagnostics for singular
//! conformal metrics `g = e^{2u} g₀` on a plane square or the flat torus.
//!
//! `u` is a sum of cone terms `β log|x − z|`, a sampled smooth part and a few
//! radial log terms; its curvature `K_g = −Δu` may carry atoms, line masses
//! and densities. Distances come from Dijkstra on wide-stencil lattices with
//! edge weights integrated exactly enough to keep cone singularities honest.
//!
//! - [`measure`], [`potential`]: signed measures and their log potentials.
//! - [`metric`], [`builtins`]: conformal factors and the named examples.
//! - [`geodesic`]: distances, lengths, areas, diameters, a-strings.
//! - [`curvature`]: flux identities and the weak Laplacian check.
//! - [`approx`]: mollification, cone splitting and convergence experiments.
//! - [`cylinder`]: decay along log-cylinders and end classification.
//! - [`scenario`], [`report`]: TOML scenarios and CSV/JSON reports.

pub mod approx;
pub mod builtins;
pub mod curvature;
pub mod cylinder;
pub mod field;
pub mod geodesic;
pub mod geom;
pub mod measure;
pub mod metric;
pub mod mollifier;
pub mod potential;
pub mod quadrature;
pub mod report;
pub mod scenario;
