//! Coverage functions on the Boolean cube `{-1, 1}^n`: their Fourier
//! structure, learners that recover them from random examples, and private
//! release of conjunction counting queries built on those learners.
//!
//! Points store the set of `-1` coordinates as a bitmask. A coverage
//! function is `c(x) = a + Σ_S w_S · OR_S(x)` where `OR_S(x) = 1` iff some
//! coordinate of `S` is `-1`, with non-negative weights of total at most 1.
//!
//! - [`cube`]: index sets, points, distributions and seeded randomness.
//! - [`coverage`]: coverage functions and their exact spectra.
//! - [`estimation`]: sampled coefficient estimates and the lattice search.
//! - [`regression`]: weighted ℓ1 regression by an active-set LP solver.
//! - [`learners`]: PAC, PMAC, proper, agnostic and DNF-reduction learners.
//! - [`privacy`]: datasets, the Laplace-noised query oracle and releases.
//! - [`cli`]: the experiment driver behind the `covlearn` binary.

pub mod cli;
pub mod coverage;
pub mod cube;
pub mod estimation;
pub mod learners;
pub mod oracle;
pub mod privacy;
pub mod regression;
