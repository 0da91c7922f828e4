//! Martingale difference sequences on coordinate spaces, the doubled-space
//! decoupling construction, tangency and conditional-independence checkers,
//! Paley-Walsh builders, maximal functions, and stopped transforms.
//!
//! A sequence on the doubled space is always measured against the
//! interleaved filtration: step n reveals (x_1..x_n, y_1..y_n). The x-block
//! alone generates the conditioning sigma-field for the decoupled side.

use crate::banach::SpaceDescriptor;
use crate::probspace::{CoordinateSpace, CylinderIndex, LeafFn};
use crate::{tol, Error, Result};
use rand::Rng;
use rayon::prelude::*;

/// Which filtration a sequence is adapted to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Filtration {
    /// F_n = sigma(first n coordinates).
    Prefix,
    /// On a doubled space with `base` x-levels: F_n = sigma(x_1..x_n, y_1..y_n).
    Interleaved { base: usize },
}

impl Filtration {
    /// Number of steps the filtration supports on a space with `levels`
    /// coordinates.
    pub fn steps(&self, levels: usize) -> usize {
        match self {
            Filtration::Prefix => levels,
            Filtration::Interleaved { base } => *base,
        }
    }

    /// Coordinate mask generating the level-n sigma-field.
    pub fn mask(&self, levels: usize, n: usize) -> Vec<bool> {
        match self {
            Filtration::Prefix => (0..levels).map(|i| i < n).collect(),
            Filtration::Interleaved { base } => (0..levels)
                .map(|i| i < n || (*base <= i && i < base + n))
                .collect(),
        }
    }
}

/// Mask for the sigma-field generated by the whole x-block of a doubled
/// space.
pub fn x_block_mask(base: usize) -> Vec<bool> {
    (0..2 * base).map(|i| i < base).collect()
}

/// Scalar function of pointwise norms of a vector-valued function.
pub fn norm_leaf(f: &LeafFn, banach: &SpaceDescriptor) -> LeafFn {
    f.map_atoms(1, f.level(), |_, v| vec![banach.norm_unchecked(v)])
        .with_interleaved(f.interleaved())
}

/// Scalar function of pointwise p-th powers of norms.
pub fn norm_pow_leaf(f: &LeafFn, banach: &SpaceDescriptor, p: f64) -> LeafFn {
    f.map_atoms(1, f.level(), |_, v| {
        vec![banach.norm_unchecked(v).powf(p)]
    })
    .with_interleaved(f.interleaved())
}

pub(crate) fn pointwise_max(a: &LeafFn, b: &LeafFn) -> LeafFn {
    assert_eq!(a.width(), 1);
    assert_eq!(b.width(), 1);
    let data: Vec<f64> = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| x.max(*y))
        .collect();
    let out = a.add(b); // borrow level metadata joining
    out.map_atoms(1, out.level(), |atom, _| vec![data[atom]])
        .with_interleaved(out.interleaved())
}

/// A martingale difference sequence: d_n is level-n measurable with zero
/// conditional mean given level n-1, both relative to `filtration`.
#[derive(Clone, Debug)]
pub struct Mds {
    space: CoordinateSpace,
    banach: SpaceDescriptor,
    filtration: Filtration,
    diffs: Vec<LeafFn>,
}

impl Mds {
    /// Validating constructor: checks adaptedness structurally and the
    /// martingale-difference property to `tol::COND_MEAN_ZERO` per atom and
    /// coordinate.
    pub fn new(
        space: CoordinateSpace,
        banach: SpaceDescriptor,
        filtration: Filtration,
        diffs: Vec<LeafFn>,
    ) -> Result<Self> {
        let m = Self::new_unchecked(space, banach, filtration, diffs)?;
        m.check_adapted()?;
        m.check_differences()?;
        Ok(m)
    }

    /// Shape checks only, no adaptedness or zero-mean validation; this is
    /// how deliberately corrupted sequences are built for the checkers to
    /// catch.
    pub fn new_unchecked(
        space: CoordinateSpace,
        banach: SpaceDescriptor,
        filtration: Filtration,
        diffs: Vec<LeafFn>,
    ) -> Result<Self> {
        banach.validate()?;
        let levels = space.num_levels();
        if let Filtration::Interleaved { base } = filtration {
            if levels != 2 * base {
                return Err(Error::StructureMismatch(format!(
                    "interleaved filtration with base {base} needs {} levels, space has {levels}",
                    2 * base
                )));
            }
        }
        if diffs.len() > filtration.steps(levels) {
            return Err(Error::StructureMismatch(format!(
                "{} differences exceed the {}-step filtration",
                diffs.len(),
                filtration.steps(levels)
            )));
        }
        for (i, d) in diffs.iter().enumerate() {
            if d.width() != banach.dim() {
                return Err(Error::DimensionMismatch {
                    got: d.width(),
                    want: banach.dim(),
                });
            }
            if d.data().len() != space.atom_count() * d.width() {
                return Err(Error::StructureMismatch(format!(
                    "difference {} table does not match the space",
                    i + 1
                )));
            }
        }
        Ok(Self {
            space,
            banach,
            filtration,
            diffs,
        })
    }

    fn check_adapted(&self) -> Result<()> {
        let levels = self.space.num_levels();
        for (i, d) in self.diffs.iter().enumerate() {
            if !d.is_mask_constant(&self.space, &self.filtration.mask(levels, i + 1)) {
                return Err(Error::MeasurabilityViolation {
                    level: i + 1,
                    detail: format!("difference {} is not adapted", i + 1),
                });
            }
        }
        Ok(())
    }

    fn check_differences(&self) -> Result<()> {
        let levels = self.space.num_levels();
        for (i, d) in self.diffs.iter().enumerate() {
            let mean = d.cond_expect_mask(&self.space, &self.filtration.mask(levels, i));
            let worst = mean.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if worst > tol::COND_MEAN_ZERO {
                return Err(Error::NonzeroConditionalMean {
                    n: i + 1,
                    magnitude: worst,
                    tolerance: tol::COND_MEAN_ZERO,
                });
            }
        }
        Ok(())
    }

    pub fn space(&self) -> &CoordinateSpace {
        &self.space
    }

    pub fn banach(&self) -> &SpaceDescriptor {
        &self.banach
    }

    pub fn filtration(&self) -> Filtration {
        self.filtration
    }

    pub fn len(&self) -> usize {
        self.diffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diffs.is_empty()
    }

    pub fn diffs(&self) -> &[LeafFn] {
        &self.diffs
    }

    /// Replace one difference table; metadata and the corruption itself are
    /// the caller's business. Used by adversarial tests.
    pub fn with_diff_replaced(&self, n: usize, diff: LeafFn) -> Mds {
        let mut diffs = self.diffs.clone();
        diffs[n - 1] = diff;
        Mds {
            space: self.space.clone(),
            banach: self.banach.clone(),
            filtration: self.filtration,
            diffs,
        }
    }

    /// True iff every conditional law of d_n given the prior level is
    /// symmetric under negation.
    pub fn is_conditionally_symmetric(&self) -> bool {
        let levels = self.space.num_levels();
        for (i, d) in self.diffs.iter().enumerate() {
            let mask = self.filtration.mask(levels, i);
            let laws = conditional_laws(d, &self.space, &mask);
            let negated = conditional_laws(&d.scale(-1.0), &self.space, &mask);
            for (a, b) in laws.laws.iter().zip(&negated.laws) {
                if !laws_equal(a, b) {
                    return false;
                }
            }
        }
        true
    }
}

/// Prefix sums f_n = d_1 + ... + d_n.
pub fn partial_sums(m: &Mds) -> Vec<LeafFn> {
    let mut out: Vec<LeafFn> = Vec::with_capacity(m.diffs.len());
    for d in &m.diffs {
        let next = match out.last() {
            Some(prev) => prev.add(d),
            None => d.clone(),
        };
        out.push(next);
    }
    out
}

/// Running maxima of norms: returns (final maximal function, running family
/// [f_1*, ..., f_N*]). An empty family has maximal function 0.
pub fn maximal(fs: &[LeafFn], banach: &SpaceDescriptor, space: &CoordinateSpace) -> (LeafFn, Vec<LeafFn>) {
    let mut running: Vec<LeafFn> = Vec::with_capacity(fs.len());
    for f in fs {
        let n = norm_leaf(f, banach);
        let next = match running.last() {
            Some(prev) => pointwise_max(prev, &n),
            None => n,
        };
        running.push(next);
    }
    let last = running
        .last()
        .cloned()
        .unwrap_or_else(|| LeafFn::zero(space, 1));
    (last, running)
}

/// The generating kernels h_1..h_N: h_n is a level-n function whose
/// conditional mean given level n-1 vanishes. Both halves of a decoupled
/// pair are table lookups into these.
#[derive(Clone, Debug)]
pub struct GeneratorKernel {
    space: CoordinateSpace,
    banach: SpaceDescriptor,
    h: Vec<LeafFn>,
}

impl GeneratorKernel {
    pub fn new(space: CoordinateSpace, banach: SpaceDescriptor, h: Vec<LeafFn>) -> Result<Self> {
        banach.validate()?;
        if h.len() != space.num_levels() {
            return Err(Error::StructureMismatch(format!(
                "{} kernels for a {}-level space",
                h.len(),
                space.num_levels()
            )));
        }
        for (i, hn) in h.iter().enumerate() {
            if hn.width() != banach.dim() {
                return Err(Error::DimensionMismatch {
                    got: hn.width(),
                    want: banach.dim(),
                });
            }
            if !hn.is_level_exact(&space, i + 1) {
                return Err(Error::MeasurabilityViolation {
                    level: i + 1,
                    detail: format!("kernel {} is not level-{} measurable", i + 1, i + 1),
                });
            }
            let mean = hn.cond_expect_mask(&space, &space.prefix_mask(i));
            let worst = mean.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if worst > tol::COND_MEAN_ZERO {
                return Err(Error::NonzeroConditionalMean {
                    n: i + 1,
                    magnitude: worst,
                    tolerance: tol::COND_MEAN_ZERO,
                });
            }
        }
        Ok(Self { space, banach, h })
    }

    /// Uniform random tables in [-1, 1], re-centered level by level so the
    /// kernel property holds by construction.
    pub fn random(
        space: &CoordinateSpace,
        banach: &SpaceDescriptor,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let dim = banach.dim();
        let mut h = Vec::with_capacity(space.num_levels());
        for n in 1..=space.num_levels() {
            let raw = LeafFn::from_prefix_fn(space, dim, n, |_| {
                (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
            })?;
            let centered = raw.sub(&raw.cond_expect(space, n - 1)?);
            h.push(centered);
        }
        GeneratorKernel::new(space.clone(), banach.clone(), h)
    }

    pub fn space(&self) -> &CoordinateSpace {
        &self.space
    }

    pub fn banach(&self) -> &SpaceDescriptor {
        &self.banach
    }

    pub fn h(&self) -> &[LeafFn] {
        &self.h
    }

    pub fn steps(&self) -> usize {
        self.h.len()
    }

    /// Reinterpret the value tables in another space of the same total
    /// dimension.
    pub fn with_banach(&self, banach: SpaceDescriptor) -> Result<Self> {
        banach.validate()?;
        if banach.dim() != self.banach.dim() {
            return Err(Error::DimensionMismatch {
                got: banach.dim(),
                want: self.banach.dim(),
            });
        }
        Ok(Self {
            space: self.space.clone(),
            banach,
            h: self.h.clone(),
        })
    }

    /// Restrict to the first n steps (and first n coordinates).
    pub fn truncate(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.steps() {
            return Err(Error::InvalidLevel {
                level: n,
                levels: self.steps(),
            });
        }
        let space = CoordinateSpace::with_cap(self.space.levels()[..n].to_vec(), self.space.cap())?;
        let dim = self.banach.dim();
        let mut h = Vec::with_capacity(n);
        for k in 1..=n {
            let hk = &self.h[k - 1];
            let table = LeafFn::from_prefix_fn(&space, dim, k, |prefix| {
                hk.value(self.space.index_of_prefix(prefix)).to_vec()
            })?;
            h.push(table);
        }
        GeneratorKernel::new(space, self.banach.clone(), h)
    }

    /// Text serialization: header (steps, coordinates, space descriptor)
    /// followed by each kernel's value table, one level-n cylinder per line
    /// in atom order. Floats print in shortest round-trip form, so parsing
    /// reproduces the tables bit for bit.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        out.push_str("kernel v1\n");
        out.push_str(&format!("space {}\n", self.banach.text()));
        out.push_str(&format!("levels {}\n", self.space.num_levels()));
        for (i, c) in self.space.levels().iter().enumerate() {
            let outcomes: Vec<String> = c.outcomes().iter().map(|v| format!("{v}")).collect();
            let probs: Vec<String> = c.probs().iter().map(|v| format!("{v}")).collect();
            out.push_str(&format!(
                "coord {} outcomes {} probs {}\n",
                i + 1,
                outcomes.join(","),
                probs.join(",")
            ));
        }
        for (n, hn) in self.h.iter().enumerate() {
            out.push_str(&format!("h {}\n", n + 1));
            let mut prefix = vec![0usize; n + 1];
            let cylinders: usize = self.space.levels()[..=n]
                .iter()
                .map(|c| c.arity())
                .product();
            for _ in 0..cylinders {
                let v = hn.value(self.space.index_of_prefix(&prefix));
                let cells: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
                out.push_str(&cells.join(" "));
                out.push('\n');
                for i in (0..=n).rev() {
                    prefix[i] += 1;
                    if prefix[i] < self.space.levels()[i].arity() {
                        break;
                    }
                    prefix[i] = 0;
                }
            }
        }
        out
    }

    pub fn fingerprint(&self) -> String {
        crate::fingerprint(self.serialize().as_bytes())
    }

    pub fn parse(text: &str) -> Result<Self> {
        parse_kernel(text)
    }
}

fn parse_kernel(text: &str) -> Result<GeneratorKernel> {
    use crate::probspace::Coordinate;
    let bad = |line: usize, detail: &str| Error::MalformedKernel {
        line,
        detail: detail.to_string(),
    };
    let mut lines = text.lines().enumerate();
    fn next_line<'a>(
        lines: &mut std::iter::Enumerate<std::str::Lines<'a>>,
    ) -> Option<(usize, &'a str)> {
        lines.next().map(|(i, s)| (i + 1, s.trim()))
    }
    let (ln, header) = next_line(&mut lines).ok_or_else(|| bad(1, "empty file"))?;
    if header != "kernel v1" {
        return Err(bad(ln, "expected header 'kernel v1'"));
    }
    let (ln, space_line) = next_line(&mut lines).ok_or_else(|| bad(2, "missing space line"))?;
    let banach = SpaceDescriptor::parse(
        space_line
            .strip_prefix("space ")
            .ok_or_else(|| bad(ln, "expected 'space <descriptor>'"))?,
    )?;
    let (ln, levels_line) = next_line(&mut lines).ok_or_else(|| bad(3, "missing levels line"))?;
    let n: usize = levels_line
        .strip_prefix("levels ")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad(ln, "expected 'levels <N>'"))?;
    if n == 0 {
        return Err(bad(ln, "levels must be >= 1"));
    }
    let parse_floats = |s: &str, ln: usize| -> Result<Vec<f64>> {
        s.split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| bad(ln, &format!("bad number {t:?}")))
            })
            .collect()
    };
    let mut coords = Vec::with_capacity(n);
    for i in 0..n {
        let (ln, line) =
            next_line(&mut lines).ok_or_else(|| bad(3 + i, "missing coord line"))?;
        let rest = line
            .strip_prefix(&format!("coord {} outcomes ", i + 1))
            .ok_or_else(|| bad(ln, &format!("expected 'coord {} outcomes ...'", i + 1)))?;
        let (outcomes_s, probs_s) = rest
            .split_once(" probs ")
            .ok_or_else(|| bad(ln, "expected '... probs ...'"))?;
        coords.push(Coordinate::new(
            parse_floats(outcomes_s, ln)?,
            parse_floats(probs_s, ln)?,
        )?);
    }
    let space = CoordinateSpace::new(coords)?;
    let dim = banach.dim();
    let mut h = Vec::with_capacity(n);
    for k in 1..=n {
        let (ln, line) = next_line(&mut lines).ok_or_else(|| bad(0, "missing kernel block"))?;
        if line != format!("h {k}") {
            return Err(bad(ln, &format!("expected 'h {k}'")));
        }
        let cylinders: usize = space.levels()[..k].iter().map(|c| c.arity()).product();
        let mut rows = Vec::with_capacity(cylinders);
        for _ in 0..cylinders {
            let (ln, line) = next_line(&mut lines).ok_or_else(|| bad(0, "missing kernel row"))?;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| bad(ln, &format!("bad number {t:?}")))
                })
                .collect::<Result<_>>()?;
            if row.len() != dim {
                return Err(bad(ln, &format!("expected {dim} values, got {}", row.len())));
            }
            rows.push(row);
        }
        let mut prefix = vec![0usize; k];
        // Fill by cylinder in the same order serialize wrote them.
        let mut row_iter = rows.into_iter();
        let mut cells: Vec<(usize, Vec<f64>)> = Vec::with_capacity(cylinders);
        for _ in 0..cylinders {
            cells.push((space.index_of_prefix(&prefix), row_iter.next().unwrap()));
            for i in (0..k).rev() {
                prefix[i] += 1;
                if prefix[i] < space.levels()[i].arity() {
                    break;
                }
                prefix[i] = 0;
            }
        }
        let block = space.atom_count()
            / space.levels()[..k]
                .iter()
                .map(|c| c.arity())
                .product::<usize>();
        let mut data = vec![0.0; space.atom_count() * dim];
        for (start, row) in cells {
            for a in start..start + block {
                data[a * dim..(a + 1) * dim].copy_from_slice(&row);
            }
        }
        h.push(LeafFn::from_raw(&space, dim, k, data)?);
    }
    if lines.next().is_some() {
        return Err(Error::MalformedKernel {
            line: 0,
            detail: "trailing content after kernel tables".into(),
        });
    }
    GeneratorKernel::new(space, banach, h)
}

/// A coupled sequence and its decoupled tangent on the doubled space.
/// d_n(x, y) = h_n(x_1..x_n); e_n(x, y) = h_n(x_1..x_{n-1}, y_n). The
/// conditioning sigma-field G is generated by the x-block.
#[derive(Clone, Debug)]
pub struct DecoupledPair {
    base: CoordinateSpace,
    doubled: CoordinateSpace,
    banach: SpaceDescriptor,
    kernel: GeneratorKernel,
    d: Mds,
    e: Mds,
}

impl DecoupledPair {
    pub fn base(&self) -> &CoordinateSpace {
        &self.base
    }

    pub fn doubled(&self) -> &CoordinateSpace {
        &self.doubled
    }

    pub fn banach(&self) -> &SpaceDescriptor {
        &self.banach
    }

    pub fn kernel(&self) -> &GeneratorKernel {
        &self.kernel
    }

    pub fn d(&self) -> &Mds {
        &self.d
    }

    pub fn e(&self) -> &Mds {
        &self.e
    }

    pub fn steps(&self) -> usize {
        self.d.len()
    }

    /// Assemble a pair from explicit parts without tangency or conditional
    /// independence validation; the checkers exist to judge such objects.
    pub fn from_parts(kernel: GeneratorKernel, d: Mds, e: Mds) -> Result<Self> {
        if d.space() != e.space() {
            return Err(Error::StructureMismatch("d and e live on different spaces".into()));
        }
        if d.len() != e.len() || d.len() != kernel.steps() {
            return Err(Error::StructureMismatch("step counts disagree".into()));
        }
        Ok(Self {
            base: kernel.space().clone(),
            doubled: d.space().clone(),
            banach: kernel.banach().clone(),
            kernel,
            d,
            e,
        })
    }

    /// Structural invariant of decoupled pairs: e_n may depend only on
    /// (x_1..x_{n-1}, y_n), and d_n only on (x_1..x_n).
    pub fn validate_structure(&self) -> Result<()> {
        let n_base = self.base.num_levels();
        for n in 1..=self.steps() {
            let mut mask = vec![false; 2 * n_base];
            for (i, m) in mask.iter_mut().enumerate().take(n) {
                if i < n - 1 {
                    *m = true;
                }
            }
            mask[n_base + n - 1] = true;
            if !self.e.diffs()[n - 1].is_mask_constant(&self.doubled, &mask) {
                return Err(Error::MeasurabilityViolation {
                    level: n,
                    detail: format!("decoupled difference {n} looks beyond (x_<{n}, y_{n})"),
                });
            }
            if !self.d.diffs()[n - 1].is_level_exact(&self.doubled, n) {
                return Err(Error::MeasurabilityViolation {
                    level: n,
                    detail: format!("coupled difference {n} looks beyond x_<={n}"),
                });
            }
        }
        Ok(())
    }
}

/// Realize the decoupled tangent pair of a kernel on the doubled space.
pub fn decouple(kernel: &GeneratorKernel) -> Result<DecoupledPair> {
    let base = kernel.space().clone();
    let doubled = base.doubled()?;
    let n_base = base.num_levels();
    let dim = kernel.banach().dim();
    let mut d_diffs = Vec::with_capacity(n_base);
    let mut e_diffs = Vec::with_capacity(n_base);
    for n in 1..=n_base {
        let hn = &kernel.h()[n - 1];
        let d = LeafFn::from_prefix_fn(&doubled, dim, n, |prefix| {
            hn.value(base.index_of_prefix(prefix)).to_vec()
        })?
        .with_interleaved(Some(n));
        let e = LeafFn::from_prefix_fn(&doubled, dim, n_base + n, |prefix| {
            let mut base_prefix: Vec<usize> = prefix[..n - 1].to_vec();
            base_prefix.push(prefix[n_base + n - 1]);
            hn.value(base.index_of_prefix(&base_prefix)).to_vec()
        })?
        .with_interleaved(Some(n));
        d_diffs.push(d);
        e_diffs.push(e);
    }
    let filt = Filtration::Interleaved { base: n_base };
    let d = Mds::new(
        doubled.clone(),
        kernel.banach().clone(),
        filt,
        d_diffs,
    )?;
    let e = Mds::new(doubled, kernel.banach().clone(), filt, e_diffs)?;
    DecoupledPair::from_parts(kernel.clone(), d, e)
}

/// Build a pair from an adapted scalar multiplier sequence and a predictable
/// vector sequence: the kernel is h_n = xi_n * w_n.
pub fn multiplier_mds(
    space: &CoordinateSpace,
    banach: &SpaceDescriptor,
    xi: &[LeafFn],
    w: &[LeafFn],
) -> Result<DecoupledPair> {
    if xi.len() != w.len() || xi.len() != space.num_levels() {
        return Err(Error::StructureMismatch(format!(
            "{} multipliers and {} weights for a {}-level space",
            xi.len(),
            w.len(),
            space.num_levels()
        )));
    }
    let mut h = Vec::with_capacity(xi.len());
    for n in 1..=xi.len() {
        let xin = &xi[n - 1];
        let wn = &w[n - 1];
        if xin.width() != 1 {
            return Err(Error::StructureMismatch(format!(
                "multiplier {n} must be scalar"
            )));
        }
        if !xin.is_level_exact(space, n) {
            return Err(Error::MeasurabilityViolation {
                level: n,
                detail: format!("multiplier {n} is not adapted"),
            });
        }
        if !wn.is_level_exact(space, n - 1) {
            return Err(Error::MeasurabilityViolation {
                level: n - 1,
                detail: format!("weight {n} is not predictable"),
            });
        }
        h.push(wn.mul_scalar_fn(xin));
    }
    decouple(&GeneratorKernel::new(space.clone(), banach.clone(), h)?)
}

/// Paley-Walsh martingale: d_n = r_n * f_n(r_1..r_{n-1}) on an all-Rademacher
/// space.
pub fn paley_walsh(
    space: &CoordinateSpace,
    banach: &SpaceDescriptor,
    generators: &[LeafFn],
) -> Result<Mds> {
    require_rademacher(space)?;
    if generators.len() != space.num_levels() {
        return Err(Error::StructureMismatch(format!(
            "{} generators for a {}-level space",
            generators.len(),
            space.num_levels()
        )));
    }
    let mut diffs = Vec::with_capacity(generators.len());
    for n in 1..=generators.len() {
        let f = &generators[n - 1];
        if !f.is_level_exact(space, n - 1) {
            return Err(Error::MeasurabilityViolation {
                level: n - 1,
                detail: format!("generator {n} must depend only on the first {} signs", n - 1),
            });
        }
        let r = rademacher_leaf(space, n)?;
        diffs.push(f.mul_scalar_fn(&r));
    }
    Mds::new(
        space.clone(),
        banach.clone(),
        Filtration::Prefix,
        diffs,
    )
}

/// The n-th Rademacher variable as a scalar function (outcome label of
/// coordinate n).
pub fn rademacher_leaf(space: &CoordinateSpace, n: usize) -> Result<LeafFn> {
    LeafFn::from_prefix_fn(space, 1, n, |prefix| {
        vec![space.levels()[n - 1].outcomes()[prefix[n - 1]]]
    })
}

pub fn require_rademacher(space: &CoordinateSpace) -> Result<()> {
    for (i, c) in space.levels().iter().enumerate() {
        if c.outcomes() != [-1.0, 1.0] || c.probs() != [0.5, 0.5] {
            return Err(Error::StructureMismatch(format!(
                "coordinate {} is not Rademacher",
                i + 1
            )));
        }
    }
    Ok(())
}

/// A finitely supported law: canonically sorted (value, probability) pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct Law(pub Vec<(Vec<f64>, f64)>);

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        let c = x.total_cmp(y);
        if c != std::cmp::Ordering::Equal {
            return c;
        }
    }
    a.len().cmp(&b.len())
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol::LAW_MATCH)
}

/// Sort support points lexicographically and merge points within the law
/// tolerance. Signed zeros are normalized first: -0.0 sorts apart from +0.0
/// under total_cmp, which would scatter equal support points and defeat the
/// adjacent merge.
pub fn canonical_law(mut points: Vec<(Vec<f64>, f64)>) -> Law {
    for (v, _) in &mut points {
        for c in v.iter_mut() {
            if *c == 0.0 {
                *c = 0.0;
            }
        }
    }
    points.sort_by(|a, b| lex_cmp(&a.0, &b.0));
    let mut merged: Vec<(Vec<f64>, f64)> = Vec::with_capacity(points.len());
    for (v, p) in points {
        match merged.last_mut() {
            Some((lv, lp)) if close(lv, &v) => *lp += p,
            _ => merged.push((v, p)),
        }
    }
    Law(merged)
}

pub fn laws_equal(a: &Law, b: &Law) -> bool {
    a.0.len() == b.0.len()
        && a.0
            .iter()
            .zip(&b.0)
            .all(|((va, pa), (vb, pb))| close(va, vb) && (pa - pb).abs() <= tol::LAW_MATCH)
}

/// Conditional laws of `f` on every cylinder of `mask`, plus a representative
/// description of each cylinder (the masked positions with their outcome
/// indices).
pub struct GroupedLaws {
    pub laws: Vec<Law>,
    pub cylinders: Vec<Vec<(usize, usize)>>,
}

pub fn conditional_laws(f: &LeafFn, space: &CoordinateSpace, mask: &[bool]) -> GroupedLaws {
    let cyl = CylinderIndex::new(space, mask);
    let mut buckets: Vec<Vec<(Vec<f64>, f64)>> = vec![Vec::new(); cyl.key_count()];
    let mut cylinders: Vec<Vec<(usize, usize)>> = vec![Vec::new(); cyl.key_count()];
    space.for_each_atom(|idx, path| {
        let key = cyl.key_of_path(path);
        if buckets[key].is_empty() {
            cylinders[key] = path
                .iter()
                .enumerate()
                .filter(|(i, _)| mask[*i])
                .map(|(i, &o)| (i, o))
                .collect();
        }
        buckets[key].push((f.value(idx).to_vec(), space.cond_weight(path, mask)));
    });
    GroupedLaws {
        laws: buckets.into_iter().map(canonical_law).collect(),
        cylinders,
    }
}

#[derive(Clone, Debug)]
pub struct TangentWitness {
    /// Step at which the conditional laws differ.
    pub n: usize,
    /// Fixed coordinates of the offending cylinder: (position, outcome index).
    pub cylinder: Vec<(usize, usize)>,
    pub left: Law,
    pub right: Law,
}

#[derive(Clone, Debug)]
pub enum TangentOutcome {
    Tangent,
    Failed(TangentWitness),
}

impl TangentOutcome {
    pub fn is_tangent(&self) -> bool {
        matches!(self, TangentOutcome::Tangent)
    }
}

/// Compare the one-step conditional laws of two sequences. Returns the
/// lexicographically first failure (smallest n, then smallest cylinder key)
/// regardless of the parallel schedule.
pub fn check_tangent(a: &Mds, b: &Mds) -> Result<TangentOutcome> {
    if a.space() != b.space() {
        return Err(Error::StructureMismatch("sequences on different spaces".into()));
    }
    if a.filtration() != b.filtration() {
        return Err(Error::StructureMismatch("sequences use different filtrations".into()));
    }
    if a.len() != b.len() {
        return Err(Error::StructureMismatch("sequences have different lengths".into()));
    }
    let levels = a.space().num_levels();
    let per_step: Vec<Option<TangentWitness>> = (1..=a.len())
        .into_par_iter()
        .map(|n| {
            let mask = a.filtration().mask(levels, n - 1);
            let ga = conditional_laws(&a.diffs()[n - 1], a.space(), &mask);
            let gb = conditional_laws(&b.diffs()[n - 1], b.space(), &mask);
            for (key, (la, lb)) in ga.laws.iter().zip(&gb.laws).enumerate() {
                if !laws_equal(la, lb) {
                    return Some(TangentWitness {
                        n,
                        cylinder: ga.cylinders[key].clone(),
                        left: la.clone(),
                        right: lb.clone(),
                    });
                }
            }
            None
        })
        .collect();
    Ok(per_step
        .into_iter()
        .flatten()
        .next()
        .map_or(TangentOutcome::Tangent, TangentOutcome::Failed))
}

#[derive(Clone, Debug)]
pub enum CiWitness {
    /// The conditional law of e_n given the x-block differs from its law
    /// given the interleaved prior level on some cylinder pair.
    Marginal {
        n: usize,
        x_path: Vec<usize>,
        cylinder: Vec<(usize, usize)>,
        given_g: Law,
        given_prior: Law,
    },
    /// The joint law given an x-path does not factor into its marginals.
    Factorization {
        x_path: Vec<usize>,
        tuple: Vec<f64>,
        joint_prob: f64,
        product_prob: f64,
    },
}

#[derive(Clone, Debug)]
pub enum CiOutcome {
    ConditionallyIndependent,
    Failed(Box<CiWitness>),
}

impl CiOutcome {
    pub fn holds(&self) -> bool {
        matches!(self, CiOutcome::ConditionallyIndependent)
    }
}

/// Verify the conditional-independence condition of the decoupled side:
/// given the x-block, the e_n are jointly independent, and each one-step
/// conditional law given the interleaved prior level agrees with the law
/// given the x-block. Singleton events generate everything on finite spaces.
///
/// Failures are reported deterministically: marginal mismatches first (by
/// step, then atom order), then factorization failures (by x-path).
pub fn check_ci(pair: &DecoupledPair) -> CiOutcome {
    let base = pair.base();
    let doubled = pair.doubled();
    let n_base = base.num_levels();
    let steps = pair.steps();
    let filt = Filtration::Interleaved { base: n_base };
    let g_mask = x_block_mask(n_base);

    let marginal: Vec<Option<CiWitness>> = (1..=steps)
        .into_par_iter()
        .map(|n| {
            let e_n = &pair.e().diffs()[n - 1];
            let given_g = conditional_laws(e_n, doubled, &g_mask);
            let prior_mask = filt.mask(2 * n_base, n - 1);
            let given_prior = conditional_laws(e_n, doubled, &prior_mask);
            let g_cyl = CylinderIndex::new(doubled, &g_mask);
            let p_cyl = CylinderIndex::new(doubled, &prior_mask);
            let mut seen = std::collections::HashSet::new();
            let mut witness = None;
            doubled.for_each_atom(|_, path| {
                if witness.is_some() {
                    return;
                }
                let gk = g_cyl.key_of_path(path);
                let pk = p_cyl.key_of_path(path);
                if !seen.insert((gk, pk)) {
                    return;
                }
                if !laws_equal(&given_g.laws[gk], &given_prior.laws[pk]) {
                    witness = Some(CiWitness::Marginal {
                        n,
                        x_path: path[..n_base].to_vec(),
                        cylinder: given_prior.cylinders[pk].clone(),
                        given_g: given_g.laws[gk].clone(),
                        given_prior: given_prior.laws[pk].clone(),
                    });
                }
            });
            witness
        })
        .collect();
    if let Some(w) = marginal.into_iter().flatten().next() {
        return CiOutcome::Failed(Box::new(w));
    }

    let dim = pair.banach().dim();
    let base_count = base.atom_count();
    let factor: Vec<Option<CiWitness>> = (0..base_count)
        .into_par_iter()
        .map(|ix| {
            // Joint law of (e_1..e_N) and its marginals over the y-block.
            let mut tuples: Vec<(Vec<f64>, f64)> = Vec::with_capacity(base_count);
            let mut margs: Vec<Vec<(Vec<f64>, f64)>> = vec![Vec::with_capacity(base_count); steps];
            for iy in 0..base_count {
                let atom = ix * base_count + iy;
                let py = base.atom_prob(iy);
                let mut tuple = Vec::with_capacity(steps * dim);
                for n in 0..steps {
                    let v = pair.e().diffs()[n].value(atom);
                    tuple.extend_from_slice(v);
                    margs[n].push((v.to_vec(), py));
                }
                tuples.push((tuple, py));
            }
            let joint = canonical_law(tuples);
            let margs: Vec<Law> = margs.into_iter().map(canonical_law).collect();
            let lookup = |law: &Law, v: &[f64]| -> f64 {
                law.0
                    .iter()
                    .find(|(sv, _)| close(sv, v))
                    .map(|(_, p)| *p)
                    .unwrap_or(0.0)
            };
            let mut product_mass = 0.0;
            for (tuple, jp) in &joint.0 {
                let mut prod = 1.0;
                for (n, marg) in margs.iter().enumerate() {
                    prod *= lookup(marg, &tuple[n * dim..(n + 1) * dim]);
                }
                product_mass += prod;
                if (jp - prod).abs() > tol::CI_FACTORIZATION {
                    return Some(CiWitness::Factorization {
                        x_path: base.path_of(ix),
                        tuple: tuple.clone(),
                        joint_prob: *jp,
                        product_prob: prod,
                    });
                }
            }
            if (product_mass - 1.0).abs() > tol::CI_FACTORIZATION {
                // Product measure puts mass outside the joint support, i.e.
                // some combination of marginal values never co-occurs.
                return Some(CiWitness::Factorization {
                    x_path: base.path_of(ix),
                    tuple: Vec::new(),
                    joint_prob: 0.0,
                    product_prob: 1.0 - product_mass,
                });
            }
            None
        })
        .collect();
    match factor.into_iter().flatten().next() {
        Some(w) => CiOutcome::Failed(Box::new(w)),
        None => CiOutcome::ConditionallyIndependent,
    }
}

/// Integer-valued random time on the doubled space. The sentinel for
/// "never" is horizon + 1; inf over an empty set returns it.
#[derive(Clone, Debug)]
pub struct StoppingTime {
    values: Vec<usize>,
    horizon: usize,
}

impl StoppingTime {
    /// Validates the stopping-time property against the interleaved
    /// filtration: {tau <= n} must be level-n measurable for every n.
    pub fn from_values(
        doubled: &CoordinateSpace,
        base: usize,
        values: Vec<usize>,
    ) -> Result<Self> {
        if values.len() != doubled.atom_count() {
            return Err(Error::StructureMismatch(
                "stopping time table does not match the space".into(),
            ));
        }
        let horizon = base;
        if let Some(v) = values.iter().find(|v| **v > horizon + 1) {
            return Err(Error::InvalidParameter(format!(
                "stopping value {v} beyond sentinel {}",
                horizon + 1
            )));
        }
        let filt = Filtration::Interleaved { base };
        let st = Self { values, horizon };
        for n in 0..=horizon {
            let indicator = st.le_indicator(doubled, n);
            if !indicator.is_mask_constant(doubled, &filt.mask(doubled.num_levels(), n)) {
                return Err(Error::NotStoppingTime { n });
            }
        }
        Ok(st)
    }

    pub fn constant(doubled: &CoordinateSpace, base: usize, value: usize) -> Result<Self> {
        Self::from_values(doubled, base, vec![value; doubled.atom_count()])
    }

    pub fn never(doubled: &CoordinateSpace, base: usize) -> Result<Self> {
        Self::constant(doubled, base, base + 1)
    }

    /// First passage above a strict threshold: inf { n : ||f_n|| > lambda }.
    pub fn first_passage(
        doubled: &CoordinateSpace,
        base: usize,
        fs: &[LeafFn],
        banach: &SpaceDescriptor,
        lambda: f64,
    ) -> Result<Self> {
        let norms: Vec<LeafFn> = fs.iter().map(|f| norm_leaf(f, banach)).collect();
        let values = (0..doubled.atom_count())
            .map(|atom| {
                norms
                    .iter()
                    .position(|nf| nf.value(atom)[0] > lambda)
                    .map_or(base + 1, |i| i + 1)
            })
            .collect();
        Self::from_values(doubled, base, values)
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn sentinel(&self) -> usize {
        self.horizon + 1
    }

    fn le_indicator(&self, doubled: &CoordinateSpace, n: usize) -> LeafFn {
        let data: Vec<f64> = self
            .values
            .iter()
            .map(|v| if *v <= n { 1.0 } else { 0.0 })
            .collect();
        LeafFn::zero(doubled, 1).map_atoms(1, doubled.num_levels(), |atom, _| vec![data[atom]])
    }
}

/// Parameters of the good-lambda construction.
#[derive(Clone, Copy, Debug)]
pub struct GoodLambdaParams {
    pub delta: f64,
    pub beta: f64,
    pub lambda: f64,
    pub p: f64,
}

impl GoodLambdaParams {
    pub fn new(delta: f64, beta: f64, lambda: f64, p: f64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidParameter(format!("delta must be > 0, got {delta}")));
        }
        if !(beta.is_finite() && beta > 1.0 + delta) {
            return Err(Error::InvalidParameter(format!(
                "beta must exceed 1 + delta = {}, got {beta}",
                1.0 + delta
            )));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be > 0, got {lambda}"
            )));
        }
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::InvalidExponent(p));
        }
        Ok(Self {
            delta,
            beta,
            lambda,
            p,
        })
    }
}

#[derive(Clone, Debug)]
pub struct StoppingTriple {
    pub mu: StoppingTime,
    pub nu: StoppingTime,
    pub sigma: StoppingTime,
    pub params: GoodLambdaParams,
}

impl StoppingTriple {
    pub fn new(
        mu: StoppingTime,
        nu: StoppingTime,
        sigma: StoppingTime,
        params: GoodLambdaParams,
    ) -> Result<Self> {
        if mu
            .values()
            .iter()
            .zip(nu.values())
            .any(|(m, n)| m > n)
        {
            return Err(Error::InvalidParameter("mu must not exceed nu".into()));
        }
        Ok(Self {
            mu,
            nu,
            sigma,
            params,
        })
    }
}

/// The G-conditional p-th moment of g_n, computed by integrating over the
/// y-block: a function of the x-path alone (and in fact of x_1..x_{n-1}).
pub fn g_conditional_moment(pair: &DecoupledPair, n: usize, p: f64) -> LeafFn {
    let g = partial_sums(pair.e());
    let powed = norm_pow_leaf(&g[n - 1], pair.banach(), p);
    powed.cond_expect_mask(pair.doubled(), &x_block_mask(pair.base().num_levels()))
}

/// sigma = inf { n : (E(||g_n||^p | G))^(1/p) > delta*lambda or
/// 4*max_{m<=n} ||d_m|| > delta*lambda }, with the running maxima taken from
/// `dstar` (callers that follow the two-stage construction pass the original
/// sequence's maxima rather than the split one's).
pub fn build_sigma_with_dstar(
    pair: &DecoupledPair,
    dstar: &[LeafFn],
    params: &GoodLambdaParams,
) -> Result<StoppingTime> {
    let n_base = pair.base().num_levels();
    let doubled = pair.doubled();
    let threshold = params.delta * params.lambda;
    let g = partial_sums(pair.e());
    let moments: Vec<LeafFn> = (1..=pair.steps())
        .map(|n| {
            let powed = norm_pow_leaf(&g[n - 1], pair.banach(), params.p);
            powed.cond_expect_mask(doubled, &x_block_mask(n_base))
        })
        .collect();
    let inv_p = 1.0 / params.p;
    let values: Vec<usize> = (0..doubled.atom_count())
        .map(|atom| {
            for n in 1..=pair.steps() {
                let moment = moments[n - 1].value(atom)[0].max(0.0).powf(inv_p);
                let dmax = dstar[n - 1].value(atom)[0];
                if moment > threshold || 4.0 * dmax > threshold {
                    return n;
                }
            }
            n_base + 1
        })
        .collect();
    StoppingTime::from_values(doubled, n_base, values)
}

/// sigma for the pair's own sequences.
pub fn build_sigma(pair: &DecoupledPair, params: &GoodLambdaParams) -> Result<StoppingTime> {
    let (_, dstar) = maximal(pair.d().diffs(), pair.banach(), pair.doubled());
    build_sigma_with_dstar(pair, &dstar, params)
}

/// Predictable stopped transform: difference k is kept exactly when
/// mu < k <= nu and k <= sigma. The indicator must be level-(k-1) measurable
/// in the x-block, which keeps the result a kernel-backed pair; first-passage
/// and control times built from the coupled block are all of this kind.
pub fn stopped_transform(pair: &DecoupledPair, st: &StoppingTriple) -> Result<DecoupledPair> {
    let base = pair.base();
    let doubled = pair.doubled();
    let mut h = Vec::with_capacity(pair.steps());
    for k in 1..=pair.steps() {
        let indicator: Vec<f64> = (0..doubled.atom_count())
            .map(|a| {
                let keep = st.mu.values()[a] < k
                    && k <= st.nu.values()[a].min(st.sigma.values()[a]);
                if keep {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let ind_fn = LeafFn::zero(doubled, 1).map_atoms(1, doubled.num_levels(), |a, _| {
            vec![indicator[a]]
        });
        if !ind_fn.is_level_exact(doubled, k - 1) {
            return Err(Error::PredictabilityViolation { n: k, prior: k - 1 });
        }
        // Restrict the x-measurable indicator to the base space and multiply
        // into the kernel.
        let base_ind = LeafFn::from_prefix_fn(base, 1, k - 1, |prefix| {
            let mut full = prefix.to_vec();
            full.resize(doubled.num_levels(), 0);
            vec![indicator[doubled.index_of(&full)]]
        })?;
        h.push(pair.kernel().h()[k - 1].mul_scalar_fn(&base_ind));
    }
    decouple(&GeneratorKernel::new(base.clone(), pair.banach().clone(), h)?)
}
