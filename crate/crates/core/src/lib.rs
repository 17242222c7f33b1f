//! Numerical toolkit for high-momenta scattering of relativistic (Klein-Gordon)
//! wave packets outside handlebody obstacles, with long-range magnetic
//! potentials of Aharonov-Bohm type.
//!
//! The crate is organised around one forward chain and one inverse chain:
//!
//! * **forward**: [`geometry`] classifies straight lines by how they wind
//!   through the handles of the obstacle; [`potentials`] builds magnetic and
//!   electric potentials in the exterior domain; [`lineflux`] integrates them
//!   along lines, closure curves and circles; [`scattering`] turns those line
//!   integrals into the per-line diagonal phases that the scattering operator
//!   imprints on a high-momentum beam.
//! * **verification**: [`solver`] propagates the full two-component wave
//!   equation on a 2D slab grid in the time domain and measures the same
//!   phases from wave-packet overlaps, independently of the line-integral
//!   route.
//! * **inverse**: [`inversion`] consumes grids of measured phases and
//!   reconstructs the electric potential, the magnetic field, enclosed fluxes
//!   (modulo their natural ambiguity) and the angular data of the long-range
//!   tail.
//!
//! Shared numerical machinery lives in [`quad`] (adaptive quadrature),
//! [`fitting`] (sequence extrapolation and log-log fits), [`grid2`]
//! (row-major 2D arrays) and [`io`] (CSV and binary grid snapshots).
//!
//! Conventions used throughout:
//!
//! * unit system with `c = 1`; momenta, masses and inverse lengths share one
//!   scale,
//! * beams are parameterised by a base point `x` and unit direction `v`;
//!   the line is `r ↦ x + r v` with `r ∈ (-∞, ∞)`,
//! * the two diagonal components of the wave field are written `+`/`-`;
//!   phases always come as the pair `(theta_plus, theta_minus)`.

pub mod fitting;
pub mod geometry;
pub mod grid2;
pub mod inversion;
pub mod io;
pub mod lineflux;
pub mod potentials;
pub mod quad;
pub mod scattering;
pub mod solver;
pub mod vec3;

pub use vec3::Vec3;
