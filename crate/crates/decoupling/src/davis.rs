//! Davis decomposition of a generator kernel into a small part with a
//! predictable majorant and a large part with summable norms, plus the
//! pointwise threshold split of a decoupled pair. Each inequality the
//! construction promises is certified atom by atom.

use crate::banach::SpaceDescriptor;
use crate::martingale::{
    decouple, maximal, norm_leaf, pointwise_max, DecoupledPair, Filtration, GeneratorKernel,
};
use crate::probspace::{CoordinateSpace, LeafFn};
use crate::{tol, Result};
use serde::Serialize;

/// h_n = u_n + v_n split at the threshold 2 h*_{n-1}, re-centered into the
/// martingale-difference kernels h1 (small, with predictable majorant) and
/// h2 (large, with summable norms).
#[derive(Clone, Debug)]
pub struct DavisSplit {
    kernel: GeneratorKernel,
    u: Vec<LeafFn>,
    v: Vec<LeafFn>,
    h1: GeneratorKernel,
    h2: GeneratorKernel,
    hstar: Vec<LeafFn>,
}

impl DavisSplit {
    pub fn kernel(&self) -> &GeneratorKernel {
        &self.kernel
    }

    pub fn u(&self) -> &[LeafFn] {
        &self.u
    }

    pub fn v(&self) -> &[LeafFn] {
        &self.v
    }

    pub fn h1(&self) -> &GeneratorKernel {
        &self.h1
    }

    pub fn h2(&self) -> &GeneratorKernel {
        &self.h2
    }

    /// Running maxima h*_n of ||h_m||, m <= n; index 0 holds h*_1.
    pub fn hstar(&self) -> &[LeafFn] {
        &self.hstar
    }
}

/// Split a kernel at twice the running maximum of its own norms. Ties go to
/// the small part. h1_n = u_n - E(u_n | n-1) and h2_n = v_n + E(u_n | n-1),
/// so both parts are martingale differences and they sum back to h_n
/// (pointwise, up to one rounding of the conditional-mean shuttle).
pub fn davis_split(kernel: &GeneratorKernel) -> Result<DavisSplit> {
    let space = kernel.space();
    let banach = kernel.banach();
    let steps = kernel.steps();
    let (_, hstar) = maximal(kernel.h(), banach, space);
    let mut u = Vec::with_capacity(steps);
    let mut v = Vec::with_capacity(steps);
    let mut h1 = Vec::with_capacity(steps);
    let mut h2 = Vec::with_capacity(steps);
    let zero_prior = LeafFn::zero(space, 1);
    for n in 1..=steps {
        let hn = &kernel.h()[n - 1];
        let norm = norm_leaf(hn, banach);
        let prior = if n == 1 { &zero_prior } else { &hstar[n - 2] };
        let small = |atom: usize| norm.value(atom)[0] <= 2.0 * prior.value(atom)[0];
        let un = hn.map_atoms(hn.width(), n, |atom, val| {
            if small(atom) {
                val.to_vec()
            } else {
                vec![0.0; val.len()]
            }
        });
        let vn = hn.map_atoms(hn.width(), n, |atom, val| {
            if small(atom) {
                vec![0.0; val.len()]
            } else {
                val.to_vec()
            }
        });
        let shuttle = un.cond_expect(space, n - 1)?;
        h1.push(un.sub(&shuttle));
        h2.push(vn.add(&shuttle));
        u.push(un);
        v.push(vn);
    }
    Ok(DavisSplit {
        kernel: kernel.clone(),
        u,
        v,
        h1: GeneratorKernel::new(space.clone(), banach.clone(), h1)?,
        h2: GeneratorKernel::new(space.clone(), banach.clone(), h2)?,
        hstar,
    })
}

/// Worst pointwise slack of one certified inequality; nonnegative slack
/// everywhere (above -tolerance) means the inequality held.
#[derive(Clone, Debug, Serialize)]
pub struct CertificateEntry {
    pub inequality: String,
    pub worst_slack: f64,
    pub atom: usize,
    pub path: Vec<usize>,
    pub n: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct CertificateReport {
    pub entries: Vec<CertificateEntry>,
    pub tolerance: f64,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        self.entries
            .iter()
            .all(|e| e.worst_slack >= -self.tolerance)
    }

    pub fn worst(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.worst_slack)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

struct SlackTracker {
    inequality: &'static str,
    worst_slack: f64,
    atom: usize,
    n: usize,
}

impl SlackTracker {
    fn new(inequality: &'static str) -> Self {
        Self {
            inequality,
            worst_slack: f64::INFINITY,
            atom: 0,
            n: 0,
        }
    }

    fn observe(&mut self, slack: f64, atom: usize, n: usize) {
        if slack < self.worst_slack {
            self.worst_slack = slack;
            self.atom = atom;
            self.n = n;
        }
    }

    fn entry(self, space: &CoordinateSpace) -> CertificateEntry {
        CertificateEntry {
            inequality: self.inequality.to_string(),
            worst_slack: self.worst_slack,
            atom: self.atom,
            path: space.path_of(self.atom),
            n: self.n,
        }
    }
}

/// Certify the three pointwise inequalities of the decomposition on every atom:
/// (a) sum_n ||v_n|| <= 2 h*_N, (b) ||h1_n|| <= 4 h*_{n-1},
/// (c) ||u_n|| <= 2 h*_{n-1}. A negative worst slack beyond the tolerance
/// marks a bug in the construction, not a property of the instance.
pub fn certify_davis(split: &DavisSplit) -> CertificateReport {
    let space = split.kernel.space();
    let banach = split.kernel.banach();
    let steps = split.kernel.steps();
    let v_norms: Vec<LeafFn> = split.v.iter().map(|f| norm_leaf(f, banach)).collect();
    let u_norms: Vec<LeafFn> = split.u.iter().map(|f| norm_leaf(f, banach)).collect();
    let h1_norms: Vec<LeafFn> = split
        .h1
        .h()
        .iter()
        .map(|f| norm_leaf(f, banach))
        .collect();
    let mut sum_v = SlackTracker::new("sum ||v_n|| <= 2 h*_N");
    let mut h1_majorant = SlackTracker::new("||h1_n|| <= 4 h*_{n-1}");
    let mut u_majorant = SlackTracker::new("||u_n|| <= 2 h*_{n-1}");
    for atom in 0..space.atom_count() {
        let total_v: f64 = crate::kahan_sum(v_norms.iter().map(|f| f.value(atom)[0]));
        sum_v.observe(
            2.0 * split.hstar[steps - 1].value(atom)[0] - total_v,
            atom,
            steps,
        );
        for n in 1..=steps {
            let prior = if n == 1 {
                0.0
            } else {
                split.hstar[n - 2].value(atom)[0]
            };
            h1_majorant.observe(4.0 * prior - h1_norms[n - 1].value(atom)[0], atom, n);
            u_majorant.observe(2.0 * prior - u_norms[n - 1].value(atom)[0], atom, n);
        }
    }
    CertificateReport {
        entries: vec![
            sum_v.entry(space),
            h1_majorant.entry(space),
            u_majorant.entry(space),
        ],
        tolerance: tol::CERT_SLACK,
    }
}

/// Threshold split of a decoupled pair at twice the running maximum a_n of
/// all earlier difference norms on either side.
#[derive(Clone, Debug)]
pub struct PairThresholdSplit {
    doubled: CoordinateSpace,
    banach: SpaceDescriptor,
    base: usize,
    /// a[i] = a_{i+1}: a_1 = 0, a_{n+1} = max(a_n, ||d_n||, ||e_n||).
    a: Vec<LeafFn>,
    d_small: Vec<LeafFn>,
    d_large: Vec<LeafFn>,
    e_small: Vec<LeafFn>,
    e_large: Vec<LeafFn>,
}

impl PairThresholdSplit {
    pub fn a(&self) -> &[LeafFn] {
        &self.a
    }

    pub fn d_small(&self) -> &[LeafFn] {
        &self.d_small
    }

    pub fn d_large(&self) -> &[LeafFn] {
        &self.d_large
    }

    pub fn e_small(&self) -> &[LeafFn] {
        &self.e_small
    }

    pub fn e_large(&self) -> &[LeafFn] {
        &self.e_large
    }

    /// Certify ||d''_n|| <= 2 (a_{n+1} - a_n) and the same for e''.
    pub fn certify(&self) -> CertificateReport {
        let mut d_tracker = SlackTracker::new("||d''_n|| <= 2 (a_{n+1} - a_n)");
        let mut e_tracker = SlackTracker::new("||e''_n|| <= 2 (a_{n+1} - a_n)");
        let steps = self.d_small.len();
        for n in 1..=steps {
            let dn = norm_leaf(&self.d_large[n - 1], &self.banach);
            let en = norm_leaf(&self.e_large[n - 1], &self.banach);
            for atom in 0..self.doubled.atom_count() {
                let gap = 2.0 * (self.a[n].value(atom)[0] - self.a[n - 1].value(atom)[0]);
                d_tracker.observe(gap - dn.value(atom)[0], atom, n);
                e_tracker.observe(gap - en.value(atom)[0], atom, n);
            }
        }
        CertificateReport {
            entries: vec![d_tracker.entry(&self.doubled), e_tracker.entry(&self.doubled)],
            tolerance: tol::CERT_SLACK,
        }
    }

    /// Largest conditional-mean magnitude over all four part sequences. Zero
    /// (to rounding) exactly when the split parts are martingale differences,
    /// which the threshold construction only guarantees for conditionally
    /// symmetric input.
    pub fn martingale_defect(&self) -> f64 {
        let filt = Filtration::Interleaved { base: self.base };
        let levels = self.doubled.num_levels();
        let mut worst = 0.0f64;
        for parts in [&self.d_small, &self.d_large, &self.e_small, &self.e_large] {
            for (i, part) in parts.iter().enumerate() {
                let mean = part.cond_expect_mask(&self.doubled, &filt.mask(levels, i));
                for v in mean.data() {
                    worst = worst.max(v.abs());
                }
            }
        }
        worst
    }
}

pub fn pair_threshold_split(pair: &DecoupledPair) -> PairThresholdSplit {
    let doubled = pair.doubled().clone();
    let banach = pair.banach().clone();
    let steps = pair.steps();
    let mut a = Vec::with_capacity(steps + 1);
    a.push(LeafFn::zero(&doubled, 1));
    for n in 1..=steps {
        let dn = norm_leaf(&pair.d().diffs()[n - 1], &banach);
        let en = norm_leaf(&pair.e().diffs()[n - 1], &banach);
        a.push(pointwise_max(&a[n - 1], &pointwise_max(&dn, &en)));
    }
    let split_at = |diffs: &[LeafFn]| -> (Vec<LeafFn>, Vec<LeafFn>) {
        let mut small = Vec::with_capacity(steps);
        let mut large = Vec::with_capacity(steps);
        for n in 1..=steps {
            let f = &diffs[n - 1];
            let norm = norm_leaf(f, &banach);
            let keep_small =
                |atom: usize| norm.value(atom)[0] <= 2.0 * a[n - 1].value(atom)[0];
            small.push(f.map_atoms(f.width(), f.level(), |atom, val| {
                if keep_small(atom) {
                    val.to_vec()
                } else {
                    vec![0.0; val.len()]
                }
            }));
            large.push(f.map_atoms(f.width(), f.level(), |atom, val| {
                if keep_small(atom) {
                    vec![0.0; val.len()]
                } else {
                    val.to_vec()
                }
            }));
        }
        (small, large)
    };
    let (d_small, d_large) = split_at(pair.d().diffs());
    let (e_small, e_large) = split_at(pair.e().diffs());
    PairThresholdSplit {
        doubled,
        banach,
        base: pair.base().num_levels(),
        a,
        d_small,
        d_large,
        e_small,
        e_large,
    }
}

/// Convenience composition used by the good-lambda machinery: split the
/// kernel, decouple both parts.
pub fn split_pairs(kernel: &GeneratorKernel) -> Result<(DavisSplit, DecoupledPair, DecoupledPair)> {
    let split = davis_split(kernel)?;
    let pair1 = decouple(split.h1())?;
    let pair2 = decouple(split.h2())?;
    Ok((split, pair1, pair2))
}
