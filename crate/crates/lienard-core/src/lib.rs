//! Solver core for T-periodic boundary value problems driven by the
//! p(t)-Laplacian Lienard equation
//!
//! ```text
//! (|u'|^{p(t)-2} u')' + f(u) u' + g(u) = h(t),   u(0) = u(T), u'(0) = u'(T),
//! ```
//!
//! where the exponent `p : [0,T] -> (1, inf)` is continuous with
//! `p(0) = p(T)` and the restoring force `g` may blow up at `0+`
//! (attractive singularity).
//!
//! The crate is organised around the half-linear periodic solution
//! operator: a right-hand side `w` is turned into the unique periodic
//! pair `(u, u')` through the flux identity `phi_{p(t)}(u') = a + W(t)`,
//! with the constant `a` fixed by zero mean of `u'`. On top of that sit
//!
//! * [`continuation`] — homotopy path following from the averaged
//!   (mean-field) root, gated by a one-dimensional Brouwer degree check;
//! * [`bounds`] — explicit a priori constants bounding every solution of
//!   the auxiliary problem families;
//! * [`lower_upper`] — truncation to a lower/upper solution bracket and
//!   the construction of constant lower and near-constant upper solutions;
//! * [`oracle`] — an independent finite-difference Newton solver used to
//!   cross-validate continuation output;
//! * [`pipeline`] — the existence/nonexistence certification engine.
//!
//! Everything is deterministic: no global state, no randomness, and all
//! float transcendentals are routed through `libm` so results do not
//! depend on the platform libm. The crate is `no_std` (with `alloc`);
//! file formats and the CLI live in the companion `lienard-cli` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod bounds;
pub mod continuation;
pub mod expr;
pub mod linalg;
pub mod lower_upper;
pub(crate) mod math;
pub mod operator;
pub mod oracle;
pub mod periodic;
pub mod pipeline;
pub mod rootfind;

pub use expr::Expr;
pub use operator::Rhs;
pub use periodic::{ExponentField, Grid, PeriodicSample};
pub use pipeline::{Certificate, CertificateStatus, Problem};
