//! Finite product probability spaces with coordinate filtrations. The level-n
//! sigma-field is generated by the first n coordinates; conditional
//! expectations are exact probability-weighted averages over cylinder sets.
//!
//! Decoupled objects live on a doubled space whose coordinates are ordered
//! x-block then y-block, but are measured against the interleaved filtration:
//! level n there means dependence on (x_1..x_n, y_1..y_n). Grouping by an
//! arbitrary coordinate mask is the shared primitive behind both views.

use crate::{Error, KahanSum, Result};

/// Default ceiling on the number of atoms a space may enumerate.
pub const DEFAULT_ATOM_CAP: u64 = 1 << 24;

/// One independent coordinate: finitely many labeled outcomes with positive
/// probabilities summing to 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Coordinate {
    outcomes: Vec<f64>,
    probs: Vec<f64>,
}

impl Coordinate {
    pub fn new(outcomes: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if outcomes.is_empty() || outcomes.len() != probs.len() {
            return Err(Error::InvalidCoordinate(format!(
                "{} outcomes vs {} probabilities",
                outcomes.len(),
                probs.len()
            )));
        }
        for (i, a) in outcomes.iter().enumerate() {
            if !a.is_finite() {
                return Err(Error::InvalidCoordinate(format!("outcome {a} not finite")));
            }
            if outcomes[..i].contains(a) {
                return Err(Error::InvalidCoordinate(format!("duplicate outcome {a}")));
            }
        }
        if probs.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err(Error::InvalidCoordinate("probabilities must be positive".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidCoordinate(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self { outcomes, probs })
    }

    pub fn rademacher() -> Self {
        Self {
            outcomes: vec![-1.0, 1.0],
            probs: vec![0.5, 0.5],
        }
    }

    /// Uniform coordinate with `arity` evenly spaced outcomes in [-1, 1];
    /// arity 2 is exactly the Rademacher coordinate.
    pub fn uniform_symmetric(arity: usize) -> Result<Self> {
        if arity == 0 {
            return Err(Error::InvalidCoordinate("arity must be >= 1".into()));
        }
        let outcomes = if arity == 1 {
            vec![0.0]
        } else {
            (0..arity)
                .map(|i| -1.0 + 2.0 * i as f64 / (arity - 1) as f64)
                .collect()
        };
        Coordinate::new(outcomes, vec![1.0 / arity as f64; arity])
    }

    pub fn arity(&self) -> usize {
        self.outcomes.len()
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// A product of independent finite coordinates, atom-enumerable in
/// lexicographic path order (first coordinate most significant). The atom cap
/// is enforced at construction, so counts and strides are plain usizes
/// afterwards.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordinateSpace {
    levels: Vec<Coordinate>,
    cap: u64,
    strides: Vec<usize>,
    count: usize,
}

impl CoordinateSpace {
    pub fn new(levels: Vec<Coordinate>) -> Result<Self> {
        Self::with_cap(levels, DEFAULT_ATOM_CAP)
    }

    pub fn with_cap(levels: Vec<Coordinate>, cap: u64) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidCoordinate("space needs at least one level".into()));
        }
        let mut required: u128 = 1;
        for c in &levels {
            required = required.saturating_mul(c.arity() as u128);
        }
        if required > cap as u128 {
            return Err(Error::AtomCapExceeded { required, cap });
        }
        let n = levels.len();
        let mut strides = vec![1usize; n];
        for i in (0..n - 1).rev() {
            strides[i] = strides[i + 1] * levels[i + 1].arity();
        }
        let count = strides[0] * levels[0].arity();
        Ok(Self {
            levels,
            cap,
            strides,
            count,
        })
    }

    pub fn rademacher(n: usize) -> Result<Self> {
        Self::new(vec![Coordinate::rademacher(); n])
    }

    pub fn uniform(n: usize, arity: usize) -> Result<Self> {
        Self::new(vec![Coordinate::uniform_symmetric(arity)?; n])
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[Coordinate] {
        &self.levels
    }

    pub fn cap(&self) -> u64 {
        self.cap
    }

    pub fn atom_count(&self) -> usize {
        self.count
    }

    pub fn path_entry(&self, atom: usize, level: usize) -> usize {
        (atom / self.strides[level]) % self.levels[level].arity()
    }

    pub fn path_of(&self, atom: usize) -> Vec<usize> {
        (0..self.levels.len())
            .map(|i| self.path_entry(atom, i))
            .collect()
    }

    pub fn index_of(&self, path: &[usize]) -> usize {
        debug_assert_eq!(path.len(), self.levels.len());
        path.iter()
            .zip(&self.strides)
            .map(|(p, s)| p * s)
            .sum()
    }

    /// Atom index of the lexicographically first atom extending `prefix`.
    pub fn index_of_prefix(&self, prefix: &[usize]) -> usize {
        prefix
            .iter()
            .zip(&self.strides)
            .map(|(p, s)| p * s)
            .sum()
    }

    pub fn atom_prob(&self, atom: usize) -> f64 {
        let mut p = 1.0;
        for (i, c) in self.levels.iter().enumerate() {
            p *= c.probs[self.path_entry(atom, i)];
        }
        p
    }

    /// Visit every atom in lexicographic order with its path, maintained by
    /// an odometer instead of per-atom divmods.
    pub fn for_each_atom(&self, mut visit: impl FnMut(usize, &[usize])) {
        let n = self.levels.len();
        let mut path = vec![0usize; n];
        for idx in 0..self.count {
            visit(idx, &path);
            for i in (0..n).rev() {
                path[i] += 1;
                if path[i] < self.levels[i].arity() {
                    break;
                }
                path[i] = 0;
            }
        }
    }

    pub fn atoms(&self) -> Vec<Atom> {
        let mut out = Vec::with_capacity(self.count);
        self.for_each_atom(|idx, path| {
            out.push(Atom {
                path: path.to_vec(),
                prob: self.atom_prob(idx),
            })
        });
        out
    }

    /// The doubled space: x-block (copies of this space's levels) followed by
    /// an independent y-block of the same levels.
    pub fn doubled(&self) -> Result<CoordinateSpace> {
        let mut levels = self.levels.clone();
        levels.extend(self.levels.iter().cloned());
        CoordinateSpace::with_cap(levels, self.cap)
    }

    /// Coordinate mask for the plain prefix filtration at level n.
    pub fn prefix_mask(&self, n: usize) -> Vec<bool> {
        (0..self.levels.len()).map(|i| i < n).collect()
    }

    /// Conditional weight of an atom within its mask-cylinder: the product of
    /// the probabilities of its unmasked coordinates. These sum to 1 over
    /// each cylinder because the coordinates are independent.
    pub fn cond_weight(&self, path: &[usize], mask: &[bool]) -> f64 {
        let mut w = 1.0;
        for (i, c) in self.levels.iter().enumerate() {
            if !mask[i] {
                w *= c.probs[path[i]];
            }
        }
        w
    }

    fn check_level(&self, n: usize) -> Result<()> {
        if n > self.levels.len() {
            return Err(Error::InvalidLevel {
                level: n,
                levels: self.levels.len(),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub path: Vec<usize>,
    pub prob: f64,
}

/// Enumerates the cylinders of a coordinate mask: each atom maps to a key in
/// 0..key_count, keys ordered lexicographically by the masked coordinates.
#[derive(Clone, Debug)]
pub struct CylinderIndex {
    keymul: Vec<usize>,
    key_count: usize,
}

impl CylinderIndex {
    pub fn new(space: &CoordinateSpace, mask: &[bool]) -> Self {
        assert_eq!(mask.len(), space.num_levels());
        let mut keymul = vec![0usize; mask.len()];
        let mut mul = 1usize;
        for i in (0..mask.len()).rev() {
            if mask[i] {
                keymul[i] = mul;
                mul *= space.levels[i].arity();
            }
        }
        Self {
            keymul,
            key_count: mul,
        }
    }

    pub fn key_count(&self) -> usize {
        self.key_count
    }

    pub fn key_of_path(&self, path: &[usize]) -> usize {
        path.iter().zip(&self.keymul).map(|(p, m)| p * m).sum()
    }
}

/// A function on the atoms of a space, stored as a flat table in atom order
/// (`width` coordinates per atom). `level` declares plain prefix
/// measurability; `interleaved` optionally declares the interleaved level on
/// a doubled space.
#[derive(Clone, Debug, PartialEq)]
pub struct LeafFn {
    width: usize,
    level: usize,
    interleaved: Option<usize>,
    data: Vec<f64>,
}

impl LeafFn {
    /// Build a level-n function by evaluating one value per level-n cylinder
    /// and broadcasting it over the cylinder's atoms. Measurability holds by
    /// construction.
    pub fn from_prefix_fn(
        space: &CoordinateSpace,
        width: usize,
        level: usize,
        mut value: impl FnMut(&[usize]) -> Vec<f64>,
    ) -> Result<Self> {
        space.check_level(level)?;
        let mut data = vec![0.0; space.atom_count() * width];
        let block: usize = if level == 0 {
            space.atom_count()
        } else {
            space.strides[level - 1]
        };
        let cylinders = space.atom_count() / block;
        let mut prefix = vec![0usize; level];
        for cyl in 0..cylinders {
            let v = value(&prefix);
            assert_eq!(v.len(), width, "prefix function returned wrong width");
            let start = cyl * block;
            for a in start..start + block {
                data[a * width..(a + 1) * width].copy_from_slice(&v);
            }
            for i in (0..level).rev() {
                prefix[i] += 1;
                if prefix[i] < space.levels[i].arity() {
                    break;
                }
                prefix[i] = 0;
            }
        }
        Ok(Self {
            width,
            level,
            interleaved: None,
            data,
        })
    }

    /// Build from a per-atom evaluation, then verify the declared level: a
    /// claimed level-n function must be exactly constant on level-n
    /// cylinders.
    pub fn from_atom_fn(
        space: &CoordinateSpace,
        width: usize,
        level: usize,
        mut value: impl FnMut(usize, &[usize]) -> Vec<f64>,
    ) -> Result<Self> {
        space.check_level(level)?;
        let mut data = vec![0.0; space.atom_count() * width];
        space.for_each_atom(|idx, path| {
            let v = value(idx, path);
            assert_eq!(v.len(), width, "atom function returned wrong width");
            data[idx * width..(idx + 1) * width].copy_from_slice(&v);
        });
        let f = Self {
            width,
            level,
            interleaved: None,
            data,
        };
        f.require_level(space, level)?;
        Ok(f)
    }

    pub fn from_raw(
        space: &CoordinateSpace,
        width: usize,
        level: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        space.check_level(level)?;
        if data.len() != space.atom_count() * width {
            return Err(Error::DimensionMismatch {
                got: data.len(),
                want: space.atom_count() * width,
            });
        }
        let f = Self {
            width,
            level,
            interleaved: None,
            data,
        };
        f.require_level(space, level)?;
        Ok(f)
    }

    pub fn constant(space: &CoordinateSpace, value: &[f64]) -> Self {
        let mut data = Vec::with_capacity(space.atom_count() * value.len());
        for _ in 0..space.atom_count() {
            data.extend_from_slice(value);
        }
        Self {
            width: value.len(),
            level: 0,
            interleaved: None,
            data,
        }
    }

    pub fn zero(space: &CoordinateSpace, width: usize) -> Self {
        Self {
            width,
            level: 0,
            interleaved: None,
            data: vec![0.0; space.atom_count() * width],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn interleaved(&self) -> Option<usize> {
        self.interleaved
    }

    pub fn with_interleaved(mut self, level: Option<usize>) -> Self {
        self.interleaved = level;
        self
    }

    pub fn value(&self, atom: usize) -> &[f64] {
        &self.data[atom * self.width..(atom + 1) * self.width]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// True iff the table is exactly constant on every cylinder of `mask`.
    pub fn is_mask_constant(&self, space: &CoordinateSpace, mask: &[bool]) -> bool {
        let cyl = CylinderIndex::new(space, mask);
        let mut seen: Vec<Option<usize>> = vec![None; cyl.key_count()];
        let mut ok = true;
        space.for_each_atom(|idx, path| {
            if !ok {
                return;
            }
            let key = cyl.key_of_path(path);
            match seen[key] {
                None => seen[key] = Some(idx),
                Some(rep) => {
                    if self.value(rep) != self.value(idx) {
                        ok = false;
                    }
                }
            }
        });
        ok
    }

    pub fn is_level_exact(&self, space: &CoordinateSpace, n: usize) -> bool {
        self.is_mask_constant(space, &space.prefix_mask(n))
    }

    fn require_level(&self, space: &CoordinateSpace, n: usize) -> Result<()> {
        if !self.is_level_exact(space, n) {
            return Err(Error::MeasurabilityViolation {
                level: n,
                detail: "table varies within a cylinder".into(),
            });
        }
        Ok(())
    }

    /// E f, coordinatewise, with compensated summation.
    pub fn expect(&self, space: &CoordinateSpace) -> Vec<f64> {
        let mut acc = vec![KahanSum::new(); self.width];
        space.for_each_atom(|idx, _| {
            let p = space.atom_prob(idx);
            for (a, v) in acc.iter_mut().zip(self.value(idx)) {
                a.add(p * v);
            }
        });
        acc.into_iter().map(|a| a.value()).collect()
    }

    pub fn expect_scalar(&self, space: &CoordinateSpace) -> f64 {
        assert_eq!(self.width, 1);
        self.expect(space)[0]
    }

    /// Conditional expectation onto the cylinders of an arbitrary coordinate
    /// mask. The result is constant on each cylinder; its declared prefix
    /// level is the tightest one the mask guarantees.
    pub fn cond_expect_mask(&self, space: &CoordinateSpace, mask: &[bool]) -> LeafFn {
        let cyl = CylinderIndex::new(space, mask);
        let w = self.width;
        let mut sums = vec![KahanSum::new(); cyl.key_count() * w];
        space.for_each_atom(|idx, path| {
            let cw = space.cond_weight(path, mask);
            let key = cyl.key_of_path(path);
            for (c, v) in self.value(idx).iter().enumerate() {
                sums[key * w + c].add(cw * v);
            }
        });
        let group: Vec<f64> = sums.into_iter().map(|k| k.value()).collect();
        let mut data = vec![0.0; space.atom_count() * w];
        space.for_each_atom(|idx, path| {
            let key = cyl.key_of_path(path);
            data[idx * w..(idx + 1) * w].copy_from_slice(&group[key * w..(key + 1) * w]);
        });
        // The result depends only on the masked coordinates, so the tightest
        // guaranteed prefix level is one past the last masked position.
        let level = mask.iter().rposition(|&m| m).map_or(0, |i| i + 1);
        LeafFn {
            width: w,
            level,
            interleaved: None,
            data,
        }
    }

    /// Conditional expectation given the first n coordinates.
    pub fn cond_expect(&self, space: &CoordinateSpace, n: usize) -> Result<LeafFn> {
        space.check_level(n)?;
        if self.level <= n {
            // Already measurable: conditioning is the identity.
            let mut f = self.clone();
            f.level = self.level;
            return Ok(f);
        }
        let mut f = self.cond_expect_mask(space, &space.prefix_mask(n));
        f.level = n;
        Ok(f)
    }

    pub fn add(&self, other: &LeafFn) -> LeafFn {
        assert_eq!(self.width, other.width);
        assert_eq!(self.data.len(), other.data.len());
        LeafFn {
            width: self.width,
            level: self.level.max(other.level),
            interleaved: join_interleaved(self.interleaved, other.interleaved),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &LeafFn) -> LeafFn {
        assert_eq!(self.width, other.width);
        assert_eq!(self.data.len(), other.data.len());
        LeafFn {
            width: self.width,
            level: self.level.max(other.level),
            interleaved: join_interleaved(self.interleaved, other.interleaved),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn scale(&self, a: f64) -> LeafFn {
        LeafFn {
            width: self.width,
            level: self.level,
            interleaved: self.interleaved,
            data: self.data.iter().map(|v| a * v).collect(),
        }
    }

    /// Pointwise product with a scalar (width-1) function.
    pub fn mul_scalar_fn(&self, scalar: &LeafFn) -> LeafFn {
        assert_eq!(scalar.width, 1);
        assert_eq!(self.data.len() / self.width, scalar.data.len());
        let mut data = Vec::with_capacity(self.data.len());
        for atom in 0..scalar.data.len() {
            let s = scalar.data[atom];
            data.extend(self.value(atom).iter().map(|v| s * v));
        }
        LeafFn {
            width: self.width,
            level: self.level.max(scalar.level),
            interleaved: join_interleaved(self.interleaved, scalar.interleaved),
            data,
        }
    }

    /// Rebuild the table with a per-atom transform; measurability metadata is
    /// the caller's responsibility.
    pub fn map_atoms(
        &self,
        width: usize,
        level: usize,
        mut f: impl FnMut(usize, &[f64]) -> Vec<f64>,
    ) -> LeafFn {
        let atoms = self.data.len() / self.width;
        let mut data = Vec::with_capacity(atoms * width);
        for atom in 0..atoms {
            let v = f(atom, self.value(atom));
            assert_eq!(v.len(), width);
            data.extend(v);
        }
        LeafFn {
            width,
            level,
            interleaved: None,
            data,
        }
    }
}

fn join_interleaved(a: Option<usize>, b: Option<usize>) -> Option<usize> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        _ => None,
    }
}
