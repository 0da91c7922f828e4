//! Finite-space laboratory for vector-valued martingale decoupling.
//!
//! Everything here runs on finite filtered probability spaces: a product of
//! independent finite coordinates carries a martingale difference sequence,
//! the decoupled tangent sequence is realized exactly on a doubled space, and
//! norm comparisons between the coupled and decoupled sums are computed by
//! exact enumeration, seeded Monte Carlo, or adversarial search.

#![forbid(unsafe_code)]

pub mod banach;
pub mod davis;
pub mod estimator;
pub mod experiments;
pub mod martingale;
pub mod probspace;
pub mod search;
pub mod tol;

use thiserror::Error;

/// Crate-wide error type. Variants carry enough context to name the violated
/// contract; callers that need exit-code semantics match on the variant.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid descriptor: {0}")]
    InvalidDescriptor(String),
    #[error("vector has {got} coordinates, space needs {want}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("space requires {required} atoms, cap is {cap}")]
    AtomCapExceeded { required: u128, cap: u64 },
    #[error("invalid coordinate: {0}")]
    InvalidCoordinate(String),
    #[error("invalid level {level}, space has {levels} levels")]
    InvalidLevel { level: usize, levels: usize },
    #[error("function is not measurable at declared level {level}: {detail}")]
    MeasurabilityViolation { level: usize, detail: String },
    #[error("nonzero conditional mean at step {n}: |mean| = {magnitude:.3e} exceeds {tolerance:.1e}")]
    NonzeroConditionalMean { n: usize, magnitude: f64, tolerance: f64 },
    #[error("structure mismatch: {0}")]
    StructureMismatch(String),
    #[error("not a stopping time: {{tau <= {n}}} is not level-{n} measurable")]
    NotStoppingTime { n: usize },
    #[error("predictability violation at step {n}: transform indicator is not level-{prior} measurable")]
    PredictabilityViolation { n: usize, prior: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("moment exponent must be finite and >= 1, got {0}")]
    InvalidExponent(f64),
    #[error("degenerate denominator: {0}")]
    DegenerateDenominator(String),
    #[error("depth {n} exceeds sign-enumeration cap {cap}")]
    DepthTooLarge { n: usize, cap: usize },
    #[error("kernel file malformed at line {line}: {detail}")]
    MalformedKernel { line: usize, detail: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Neumaier-compensated running sum. All expectation-style reductions in the
/// exact engine go through this so that their results do not depend on how
/// the atom set was chunked.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Sum an iterator with compensation.
pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = KahanSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// SplitMix64 finalizer. Used to derive independent RNG streams from a master
/// seed and a stream index (restart number, sample block, experiment row).
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a over bytes, rendered as fixed-width hex. Instance fingerprints are
/// this hash of the serialized kernel, so reports can name the exact instance
/// they measured.
pub fn fingerprint(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    format!("{h:016x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_recovers_cancellation() {
        // 1 + 1e-16 repeated: naive summation loses the small terms.
        let mut k = KahanSum::new();
        k.add(1.0);
        for _ in 0..1000 {
            k.add(1e-16);
        }
        assert!((k.value() - (1.0 + 1000.0 * 1e-16)).abs() < 1e-18);
    }

    #[test]
    fn kahan_matches_exact_on_dyadic_probs() {
        let vals = vec![0.25, 0.25, 0.125, 0.125, 0.125, 0.125];
        assert_eq!(kahan_sum(vals), 1.0);
    }

    #[test]
    fn mix_seed_separates_streams() {
        let a = mix_seed(42, 0);
        let b = mix_seed(42, 1);
        let c = mix_seed(43, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn fingerprint_is_stable_and_distinct() {
        let a = fingerprint(b"kernel v1");
        assert_eq!(a, fingerprint(b"kernel v1"));
        assert_ne!(a, fingerprint(b"kernel v2"));
        assert_eq!(a.len(), 16);
    }
}
