//! Gleason decompositions on polydiscs via the ∂̄-Koszul complex.
//!
//! Given a bounded holomorphic function g on a polydisc in C^n (n ≤ 3) with
//! g(α) = 0, the pipeline constructs holomorphic g_1..g_n with
//! g = Σ (z_j − α_j) g_j and verifies the identity and holomorphy residuals
//! on a shrunken interior. The ∂̄ problems that appear along the way are
//! solved with Cauchy–Pompeiu transforms chained by Dolbeault–Grothendieck
//! induction; the exterior-calculus laws behind the descent are checked
//! exactly on a complex-rational polynomial backend.
//!
//! Module map:
//! - [`symbolic`]: exact polynomials in z, z̄ over complex rationals.
//! - [`exterior`]: Γ_(r,s) forms, wedge, τ_F, ∂̄ — generic over coefficients.
//! - [`grid`]: polydisc grids, sampled fields, finite-difference ∂̄.
//! - [`dbar`]: Cauchy transforms (direct and FFT) and the polydisc solver.
//! - [`gleason`]: the decomposition pipeline.
//! - [`verify`]: independent residual reports, convergence studies, and the
//!   exact law suite.
//! - [`registry`]: built-in test functions.

pub mod dbar;
pub mod exterior;
pub mod gleason;
pub mod grid;
pub mod quadrature;
pub mod registry;
pub mod symbolic;
pub mod verify;
