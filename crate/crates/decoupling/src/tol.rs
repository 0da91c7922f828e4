//! Centralized tolerances. Every comparison threshold used by the checkers,
//! certificates, and the acceptance suite lives here with its rationale; no
//! ad-hoc magic numbers at call sites.

/// Conditional-law matching: support points and probabilities are compared to
/// this tolerance. Laws on these spaces are built from table lookups and
/// dyadic-ish probability products, so anything beyond rounding noise is a
/// real mismatch.
pub const LAW_MATCH: f64 = 1e-12;

/// Martingale-difference property: |E(d_n | prior level)| per atom and
/// coordinate. Conditional means are short compensated sums; 1e-10 leaves two
/// orders of headroom over accumulated rounding at desk scale.
pub const COND_MEAN_ZERO: f64 = 1e-10;

/// Exact identities between two enumeration paths of the same quantity
/// (tower property, Fubini lift, round-trip re-evaluation, partition
/// invariance).
pub const EXACT_ENUMERATION: f64 = 1e-12;

/// Ratio identities that hold exactly in the underlying algebra (depth-1
/// ratio, Hilbert-space exponent-2 ratio, reciprocal products) but pass
/// through p-th roots, so allow root-level rounding.
pub const RATIO_IDENTITY: f64 = 1e-10;

/// Certificate slack floor: pointwise inequality certificates fail only when
/// slack drops below -CERT_SLACK.
pub const CERT_SLACK: f64 = 1e-10;

/// Conditional-independence factorization: a joint atom probability against
/// the product of its marginals. Both sides are short products of exactly
/// represented atom weights, while a genuine violation shifts mass in units
/// of an atom's probability, many orders larger.
pub const CI_FACTORIZATION: f64 = 1e-10;

/// Maximal-function comparison bound and other order-of-magnitude inequality
/// checks that chain several rooted moments.
pub const SUP_BOUND: f64 = 1e-9;

/// Control columns (Hilbert space at exponent 2) in experiment reports.
pub const CONTROL_COLUMN: f64 = 1e-8;

/// One-sided Jacobi sweep convergence: off-diagonal Gram mass relative to
/// column norms. Machine-precision orthogonalization for k <= 8.
pub const JACOBI_CONVERGENCE: f64 = 1e-15;
