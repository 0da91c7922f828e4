//! Exact and Monte Carlo evaluation of the moment functionals: L^p norms of
//! martingale sums, decoupling ratios in both directions, weak-type
//! constants, the maximal/sup comparison, and the good-lambda probe that
//! exercises the stopped-transform machinery end to end.

use crate::banach::SpaceDescriptor;
use crate::davis::davis_split;
use crate::martingale::{
    build_sigma_with_dstar, decouple, maximal, norm_leaf, partial_sums, stopped_transform,
    DecoupledPair, GeneratorKernel, GoodLambdaParams, StoppingTime, StoppingTriple,
};
use crate::probspace::{CoordinateSpace, LeafFn};
use crate::{kahan_sum, mix_seed, tol, Error, KahanSum, Result};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Exact,
    Mc,
}

/// Which half of a decoupled pair to sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SumSide {
    F,
    G,
}

/// A measured constant with full provenance. Exact estimates carry no
/// sampling fields; Monte Carlo ones carry samples, seed, and the standard
/// error of the p-th moment estimate.
#[derive(Clone, Debug, Serialize)]
pub struct ConstantEstimate {
    pub value: f64,
    pub engine: Engine,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub fingerprint: String,
}

impl ConstantEstimate {
    pub fn exact(value: f64, fingerprint: String) -> Self {
        Self {
            value,
            engine: Engine::Exact,
            samples: None,
            std_error: None,
            seed: None,
            fingerprint,
        }
    }
}

fn validate_p(p: f64) -> Result<()> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::InvalidExponent(p));
    }
    Ok(())
}

/// E ||f||^p over the atoms, compensated.
pub fn pth_moment_exact(
    f: &LeafFn,
    banach: &SpaceDescriptor,
    p: f64,
    space: &CoordinateSpace,
) -> f64 {
    let mut acc = KahanSum::new();
    for atom in 0..space.atom_count() {
        acc.add(space.atom_prob(atom) * banach.norm_unchecked(f.value(atom)).powf(p));
    }
    acc.value()
}

/// (E ||f||^p)^(1/p).
pub fn lp_norm_exact(
    f: &LeafFn,
    banach: &SpaceDescriptor,
    p: f64,
    space: &CoordinateSpace,
) -> Result<f64> {
    validate_p(p)?;
    Ok(pth_moment_exact(f, banach, p, space).powf(1.0 / p))
}

fn sample_path(space: &CoordinateSpace, rng: &mut impl Rng) -> Vec<usize> {
    space
        .levels()
        .iter()
        .map(|c| {
            let u: f64 = rng.random();
            let mut cum = 0.0;
            for (i, pr) in c.probs().iter().enumerate() {
                cum += pr;
                if u < cum {
                    return i;
                }
            }
            c.arity() - 1
        })
        .collect()
}

const MC_BLOCK: u64 = 4096;

/// Unbiased Monte Carlo estimate of E ||sum||^p by independent path
/// sampling. Samples are assigned to fixed-size blocks whose generators
/// depend only on (seed, block index) and whose partial sums are combined in
/// block order, so the result is bit-identical for any worker count.
pub fn lp_norm_mc(
    kernel: &GeneratorKernel,
    side: SumSide,
    p: f64,
    samples: u64,
    seed: u64,
) -> Result<ConstantEstimate> {
    validate_p(p)?;
    if samples < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 samples, got {samples}"
        )));
    }
    let space = kernel.space();
    let banach = kernel.banach();
    let dim = banach.dim();
    let steps = kernel.steps();
    let blocks = samples.div_ceil(MC_BLOCK);
    let partials: Vec<(f64, f64)> = (0..blocks)
        .into_par_iter()
        .map(|block| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, block));
            let count = (samples - block * MC_BLOCK).min(MC_BLOCK);
            let mut sum = KahanSum::new();
            let mut sumsq = KahanSum::new();
            let mut total = vec![0.0f64; dim];
            for _ in 0..count {
                let x = sample_path(space, &mut rng);
                total.iter_mut().for_each(|v| *v = 0.0);
                match side {
                    SumSide::F => {
                        for n in 1..=steps {
                            let v = kernel.h()[n - 1].value(space.index_of_prefix(&x[..n]));
                            for (t, c) in total.iter_mut().zip(v) {
                                *t += c;
                            }
                        }
                    }
                    SumSide::G => {
                        let y = sample_path(space, &mut rng);
                        let mut prefix = Vec::with_capacity(steps);
                        for n in 1..=steps {
                            prefix.clear();
                            prefix.extend_from_slice(&x[..n - 1]);
                            prefix.push(y[n - 1]);
                            let v = kernel.h()[n - 1].value(space.index_of_prefix(&prefix));
                            for (t, c) in total.iter_mut().zip(v) {
                                *t += c;
                            }
                        }
                    }
                }
                let w = banach.norm_unchecked(&total).powf(p);
                sum.add(w);
                sumsq.add(w * w);
            }
            (sum.value(), sumsq.value())
        })
        .collect();
    let mut sum = KahanSum::new();
    let mut sumsq = KahanSum::new();
    for (s, sq) in partials {
        sum.add(s);
        sumsq.add(sq);
    }
    let n = samples as f64;
    let mean = sum.value() / n;
    let var = ((sumsq.value() - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(ConstantEstimate {
        value: mean,
        engine: Engine::Mc,
        samples: Some(samples),
        std_error: Some((var / n).sqrt()),
        seed: Some(seed),
        fingerprint: kernel.fingerprint(),
    })
}

/// Both directions of the decoupling comparison at depth n. A vanishing
/// moment on either side marks the ratio degenerate rather than producing a
/// quiet NaN.
#[derive(Clone, Debug, Serialize)]
pub struct RatioEstimate {
    /// (E||f_n||^p)^(1/p)
    pub f_moment: f64,
    /// (E||g_n||^p)^(1/p)
    pub g_moment: f64,
    /// f over g; None when g vanishes.
    pub forward: Option<f64>,
    /// g over f; None when f vanishes.
    pub reverse: Option<f64>,
    pub p: f64,
    pub n: usize,
    pub engine: Engine,
    pub fingerprint: String,
}

impl RatioEstimate {
    pub fn is_degenerate(&self) -> bool {
        self.forward.is_none() || self.reverse.is_none()
    }
}

pub fn decoupling_ratio(pair: &DecoupledPair, p: f64, n: usize) -> Result<RatioEstimate> {
    validate_p(p)?;
    if n == 0 || n > pair.steps() {
        return Err(Error::InvalidLevel {
            level: n,
            levels: pair.steps(),
        });
    }
    let doubled = pair.doubled();
    let banach = pair.banach();
    let f = &partial_sums(pair.d())[n - 1];
    let g = &partial_sums(pair.e())[n - 1];
    let f_moment = pth_moment_exact(f, banach, p, doubled).powf(1.0 / p);
    let g_moment = pth_moment_exact(g, banach, p, doubled).powf(1.0 / p);
    Ok(RatioEstimate {
        f_moment,
        g_moment,
        forward: (g_moment > 0.0).then(|| f_moment / g_moment),
        reverse: (f_moment > 0.0).then(|| g_moment / f_moment),
        p,
        n,
        engine: Engine::Exact,
        fingerprint: pair.kernel().fingerprint(),
    })
}

/// E||f_N||^p and E||g_N||^p straight from the kernel tables, without
/// materializing the doubled-space pair; used by the search loop where the
/// ratio is evaluated thousands of times.
pub fn kernel_pth_moments(kernel: &GeneratorKernel, p: f64) -> Result<(f64, f64)> {
    validate_p(p)?;
    let space = kernel.space();
    let banach = kernel.banach();
    let dim = banach.dim();
    let steps = kernel.steps();
    let count = space.atom_count();
    let paths: Vec<Vec<usize>> = (0..count).map(|a| space.path_of(a)).collect();

    let mut f_acc = KahanSum::new();
    let mut total = vec![0.0f64; dim];
    for (ix, xp) in paths.iter().enumerate() {
        total.iter_mut().for_each(|v| *v = 0.0);
        for n in 1..=steps {
            let v = kernel.h()[n - 1].value(space.index_of_prefix(&xp[..n]));
            for (t, c) in total.iter_mut().zip(v) {
                *t += c;
            }
        }
        f_acc.add(space.atom_prob(ix) * banach.norm_unchecked(&total).powf(p));
    }

    let g_partials: Vec<f64> = (0..count)
        .into_par_iter()
        .map(|ix| {
            let xp = &paths[ix];
            let px = space.atom_prob(ix);
            let mut acc = KahanSum::new();
            let mut total = vec![0.0f64; dim];
            let mut prefix = Vec::with_capacity(steps);
            for (iy, yp) in paths.iter().enumerate() {
                total.iter_mut().for_each(|v| *v = 0.0);
                for n in 1..=steps {
                    prefix.clear();
                    prefix.extend_from_slice(&xp[..n - 1]);
                    prefix.push(yp[n - 1]);
                    let v = kernel.h()[n - 1].value(space.index_of_prefix(&prefix));
                    for (t, c) in total.iter_mut().zip(v) {
                        *t += c;
                    }
                }
                acc.add(px * space.atom_prob(iy) * banach.norm_unchecked(&total).powf(p));
            }
            acc.value()
        })
        .collect();
    let g_acc = kahan_sum(g_partials.into_iter());
    Ok((f_acc.value(), g_acc))
}

pub fn kernel_ratio(kernel: &GeneratorKernel, p: f64) -> Result<RatioEstimate> {
    let (fm, gm) = kernel_pth_moments(kernel, p)?;
    let f_moment = fm.powf(1.0 / p);
    let g_moment = gm.powf(1.0 / p);
    Ok(RatioEstimate {
        f_moment,
        g_moment,
        forward: (g_moment > 0.0).then(|| f_moment / g_moment),
        reverse: (f_moment > 0.0).then(|| g_moment / f_moment),
        p,
        n: kernel.steps(),
        engine: Engine::Exact,
        fingerprint: kernel.fingerprint(),
    })
}

/// sup over lambda of lambda * P(||f_n|| > lambda) / E||g_n||, computed as
/// the max of a * P(||f_n|| >= a) over support points a of ||f_n||; the two
/// coincide for finitely supported laws and the support scan is exact.
#[derive(Clone, Debug, Serialize)]
pub struct WeakTypeEstimate {
    /// None when E||g_n|| vanishes.
    pub value: Option<f64>,
    /// Support point achieving the sup.
    pub at_level: f64,
    pub g_l1: f64,
    pub n: usize,
    pub fingerprint: String,
}

pub fn weak_type_constant(pair: &DecoupledPair, n: usize) -> Result<WeakTypeEstimate> {
    if n == 0 || n > pair.steps() {
        return Err(Error::InvalidLevel {
            level: n,
            levels: pair.steps(),
        });
    }
    let doubled = pair.doubled();
    let banach = pair.banach();
    let f = &partial_sums(pair.d())[n - 1];
    let g = &partial_sums(pair.e())[n - 1];
    let g_l1 = pth_moment_exact(g, banach, 1.0, doubled);
    let norms = norm_leaf(f, banach);
    let mut support: Vec<(f64, f64)> = (0..doubled.atom_count())
        .map(|a| (norms.value(a)[0], doubled.atom_prob(a)))
        .collect();
    support.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Walk support points from the top so P(||f|| >= a) accumulates exactly.
    let mut best = 0.0f64;
    let mut at = 0.0f64;
    let mut tail = KahanSum::new();
    let mut i = support.len();
    while i > 0 {
        let level = support[i - 1].0;
        while i > 0 && support[i - 1].0 == level {
            tail.add(support[i - 1].1);
            i -= 1;
        }
        let score = level * tail.value();
        if score > best {
            best = score;
            at = level;
        }
    }
    Ok(WeakTypeEstimate {
        value: (g_l1 > 0.0).then_some(best / g_l1),
        at_level: at,
        g_l1,
        n,
        fingerprint: pair.kernel().fingerprint(),
    })
}

/// L = (E max_{m<=n} ||g_m||^p)^(1/p) against R = max_{m<=n} (E||g_m||^p)^(1/p),
/// with the proof's comparison L <= 2^(1+1/p) R.
#[derive(Clone, Debug, Serialize)]
pub struct SupComparison {
    pub l: f64,
    pub r: f64,
    pub factor: f64,
    pub slack: f64,
    pub p: f64,
    pub n: usize,
}

impl SupComparison {
    pub fn holds(&self) -> bool {
        self.r <= self.l + tol::SUP_BOUND && self.slack >= -tol::SUP_BOUND
    }
}

pub fn sup_comparison(pair: &DecoupledPair, p: f64, n: usize) -> Result<SupComparison> {
    validate_p(p)?;
    if n == 0 || n > pair.steps() {
        return Err(Error::InvalidLevel {
            level: n,
            levels: pair.steps(),
        });
    }
    let doubled = pair.doubled();
    let banach = pair.banach();
    let sums = partial_sums(pair.e());
    let (gstar, _) = maximal(&sums[..n], banach, doubled);
    let mut l_acc = KahanSum::new();
    for atom in 0..doubled.atom_count() {
        l_acc.add(doubled.atom_prob(atom) * gstar.value(atom)[0].powf(p));
    }
    let l = l_acc.value().powf(1.0 / p);
    let r = (1..=n)
        .map(|m| pth_moment_exact(&sums[m - 1], banach, p, doubled).powf(1.0 / p))
        .fold(0.0f64, f64::max);
    let factor = 2.0f64.powf(1.0 + 1.0 / p);
    Ok(SupComparison {
        l,
        r,
        factor,
        slack: factor * r - l,
        p,
        n,
    })
}

/// Every quantity in the good-lambda step for one (delta, beta, lambda, p):
/// the stopped transform of the small Davis part, the corrected moment bound
/// (and the uncorrected form without its lambda^p factor, for reference),
/// the event inclusion, and the Markov bound on the exceedance probability.
#[derive(Clone, Debug, Serialize)]
pub struct GoodLambdaReport {
    pub delta: f64,
    pub beta: f64,
    pub lambda: f64,
    pub p: f64,
    /// E ||G_N||^p for the transformed decoupled side.
    pub g_moment: f64,
    /// 3^p delta^p lambda^p P(f1* > lambda).
    pub corrected_bound: f64,
    /// 3^p delta^p P(f1* > lambda), as displayed; dimensionally short one
    /// lambda^p factor.
    pub display_bound: f64,
    pub bound_slack: f64,
    /// P(f1* > beta lambda and the sigma controls never trigger).
    pub event_prob: f64,
    /// P(||F_N|| > (beta - delta - 1) lambda).
    pub exceed_prob: f64,
    pub inclusion_slack: f64,
    pub markov_bound: f64,
    pub markov_slack: f64,
    pub fingerprint: String,
}

impl GoodLambdaReport {
    pub fn passed(&self) -> bool {
        self.bound_slack >= -tol::CERT_SLACK
            && self.inclusion_slack >= -tol::CERT_SLACK
            && self.markov_slack >= -tol::CERT_SLACK
    }
}

pub fn good_lambda_probe(pair: &DecoupledPair, params: &GoodLambdaParams) -> Result<GoodLambdaReport> {
    let banach = pair.banach();
    let doubled = pair.doubled();
    let n_base = pair.base().num_levels();
    let split = davis_split(pair.kernel())?;
    let pair1 = decouple(split.h1())?;

    let f1 = partial_sums(pair1.d());
    let (f1star, _) = maximal(&f1, banach, doubled);
    let (_, dstar_orig) = maximal(pair.d().diffs(), banach, doubled);

    let mu = StoppingTime::first_passage(doubled, n_base, &f1, banach, params.lambda)?;
    let nu = StoppingTime::first_passage(doubled, n_base, &f1, banach, params.beta * params.lambda)?;
    let sigma = build_sigma_with_dstar(&pair1, &dstar_orig, params)?;
    let sentinel = sigma.sentinel();
    let sigma_never: Vec<bool> = sigma.values().iter().map(|v| *v == sentinel).collect();
    let triple = StoppingTriple::new(mu, nu, sigma, *params)?;
    let transformed = stopped_transform(&pair1, &triple)?;

    let capital_f = partial_sums(transformed.d()).pop().expect("steps >= 1");
    let capital_g = partial_sums(transformed.e()).pop().expect("steps >= 1");
    let g_moment = pth_moment_exact(&capital_g, banach, params.p, doubled);
    let f_moment = pth_moment_exact(&capital_f, banach, params.p, doubled);

    let mut p_fstar = KahanSum::new();
    let mut p_event = KahanSum::new();
    let mut p_exceed = KahanSum::new();
    let f_norm = norm_leaf(&capital_f, banach);
    let threshold = (params.beta - params.delta - 1.0) * params.lambda;
    for atom in 0..doubled.atom_count() {
        let prob = doubled.atom_prob(atom);
        let fs = f1star.value(atom)[0];
        if fs > params.lambda {
            p_fstar.add(prob);
        }
        if fs > params.beta * params.lambda && sigma_never[atom] {
            p_event.add(prob);
        }
        if f_norm.value(atom)[0] > threshold {
            p_exceed.add(prob);
        }
    }
    let scale = (3.0 * params.delta).powf(params.p);
    let corrected_bound = scale * params.lambda.powf(params.p) * p_fstar.value();
    let display_bound = scale * p_fstar.value();
    let markov_bound = f_moment / threshold.powf(params.p);
    Ok(GoodLambdaReport {
        delta: params.delta,
        beta: params.beta,
        lambda: params.lambda,
        p: params.p,
        g_moment,
        corrected_bound,
        display_bound,
        bound_slack: corrected_bound - g_moment,
        event_prob: p_event.value(),
        exceed_prob: p_exceed.value(),
        inclusion_slack: p_exceed.value() - p_event.value(),
        markov_bound,
        markov_slack: markov_bound - p_exceed.value(),
        fingerprint: pair.kernel().fingerprint(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::martingale::{paley_walsh, rademacher_leaf};
    use crate::probspace::Coordinate;

    fn scalar() -> SpaceDescriptor {
        SpaceDescriptor::scalar()
    }

    #[test]
    fn exact_norm_of_constants_and_walks() {
        let s = CoordinateSpace::rademacher(1).unwrap();
        let c = LeafFn::constant(&s, &[-2.0]);
        for p in [1.0, 2.0, 3.0] {
            assert!((lp_norm_exact(&c, &scalar(), p, &s).unwrap() - 2.0).abs() < 1e-15);
        }
        let r1 = rademacher_leaf(&s, 1).unwrap();
        for p in [1.0, 2.5, 4.0] {
            assert!((lp_norm_exact(&r1, &scalar(), p, &s).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn exact_norm_matches_four_atom_oracle() {
        // f_2 = r_1 + r_2 (1 + r_1) takes values 3, -1, -1, -1; E|f_2| = 1.5.
        let s = CoordinateSpace::rademacher(2).unwrap();
        let f1 = LeafFn::constant(&s, &[1.0]);
        let f2 = rademacher_leaf(&s, 1)
            .unwrap()
            .map_atoms(1, 1, |_, v| vec![1.0 + v[0]]);
        let m = paley_walsh(&s, &scalar(), &[f1, f2]).unwrap();
        let f = partial_sums(&m).pop().unwrap();
        assert!((lp_norm_exact(&f, &scalar(), 1.0, &s).unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn exact_engine_is_summation_order_invariant() {
        let s = CoordinateSpace::uniform(4, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let k = GeneratorKernel::random(&s, &SpaceDescriptor::lp(2, 1.5), &mut rng).unwrap();
        let pair = decouple(&k).unwrap();
        let f = partial_sums(pair.d()).pop().unwrap();
        let doubled = s.doubled().unwrap();
        let forward = pth_moment_exact(&f, &SpaceDescriptor::lp(2, 1.5), 1.0, &doubled);
        let mut acc = KahanSum::new();
        for atom in (0..doubled.atom_count()).rev() {
            acc.add(
                doubled.atom_prob(atom)
                    * SpaceDescriptor::lp(2, 1.5).norm_unchecked(f.value(atom)),
            );
        }
        assert!((forward - acc.value()).abs() <= tol::EXACT_ENUMERATION * forward.max(1.0));
    }

    #[test]
    fn mc_zero_kernel_is_exactly_zero() {
        let s = CoordinateSpace::rademacher(2).unwrap();
        let k = GeneratorKernel::new(
            s.clone(),
            scalar(),
            vec![LeafFn::zero(&s, 1), LeafFn::zero(&s, 1)],
        )
        .unwrap();
        let est = lp_norm_mc(&k, SumSide::F, 2.0, 1000, 7).unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.std_error, Some(0.0));
    }

    #[test]
    fn mc_degenerate_walk_hits_exact_value() {
        let s = CoordinateSpace::rademacher(1).unwrap();
        let k = GeneratorKernel::new(s.clone(), scalar(), vec![rademacher_leaf(&s, 1).unwrap()])
            .unwrap();
        let est = lp_norm_mc(&k, SumSide::F, 2.0, 10_000, 11).unwrap();
        // |r_1|^2 is identically 1, so the estimate is exact with zero
        // standard error.
        assert_eq!(est.value, 1.0);
        assert_eq!(est.std_error, Some(0.0));
        assert_eq!(est.samples, Some(10_000));
        assert_eq!(est.seed, Some(11));
    }

    #[test]
    fn mc_is_deterministic_and_thread_count_independent() {
        let s = CoordinateSpace::uniform(3, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let k = GeneratorKernel::random(&s, &SpaceDescriptor::lp(2, 2.0), &mut rng).unwrap();
        let a = lp_norm_mc(&k, SumSide::G, 1.0, 20_000, 99).unwrap();
        let b = lp_norm_mc(&k, SumSide::G, 1.0, 20_000, 99).unwrap();
        assert_eq!(a.value, b.value);
        assert_eq!(a.std_error, b.std_error);
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| lp_norm_mc(&k, SumSide::G, 1.0, 20_000, 99).unwrap());
        assert_eq!(a.value, single.value);
        assert_eq!(a.std_error, single.std_error);
    }

    #[test]
    fn mc_tracks_exact_moment_within_four_standard_errors() {
        let mut misses = 0;
        for seed in 0..20u64 {
            let s = CoordinateSpace::uniform(3, 2).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let k = GeneratorKernel::random(&s, &scalar(), &mut rng).unwrap();
            let pair = decouple(&k).unwrap();
            let g = partial_sums(pair.e()).pop().unwrap();
            let exact = pth_moment_exact(&g, &scalar(), 2.0, pair.doubled());
            let est = lp_norm_mc(&k, SumSide::G, 2.0, 40_000, seed).unwrap();
            let se = est.std_error.unwrap();
            if (est.value - exact).abs() > 4.0 * se {
                misses += 1;
            }
        }
        assert!(misses <= 1, "{misses} of 20 runs outside 4 standard errors");
    }

    #[test]
    fn depth_one_ratio_is_unity_for_every_exponent() {
        for arity in [2usize, 3] {
            let s = CoordinateSpace::uniform(1, arity).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(arity as u64);
            let k = GeneratorKernel::random(&s, &scalar(), &mut rng).unwrap();
            let pair = decouple(&k).unwrap();
            for p in [1.0, 2.0, 3.0] {
                let r = decoupling_ratio(&pair, p, 1).unwrap();
                assert!((r.forward.unwrap() - 1.0).abs() < tol::RATIO_IDENTITY);
            }
        }
    }

    #[test]
    fn hilbert_ratio_is_unity_at_exponent_two() {
        for seed in 0..5u64 {
            let s = CoordinateSpace::uniform(4, 2).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = GeneratorKernel::random(&s, &SpaceDescriptor::lp(3, 2.0), &mut rng).unwrap();
            let pair = decouple(&k).unwrap();
            let r = decoupling_ratio(&pair, 2.0, 4).unwrap();
            assert!((r.forward.unwrap() - 1.0).abs() < tol::RATIO_IDENTITY);
            assert!((r.reverse.unwrap() - 1.0).abs() < tol::RATIO_IDENTITY);
        }
    }

    #[test]
    fn ratio_matches_exhaustive_double_enumeration() {
        // Scalar N=3 kernel with an asymmetric second coordinate; oracle
        // evaluates both moments by direct nested loops with plain sums.
        let skew = Coordinate::new(vec![-1.0, 2.0], vec![2.0 / 3.0, 1.0 / 3.0]).unwrap();
        let s = CoordinateSpace::new(vec![
            Coordinate::rademacher(),
            skew,
            Coordinate::rademacher(),
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(321);
        let k = GeneratorKernel::random(&s, &scalar(), &mut rng).unwrap();
        let pair = decouple(&k).unwrap();
        let r = decoupling_ratio(&pair, 1.0, 3).unwrap();

        let mut ef = 0.0;
        let mut eg = 0.0;
        for ix in 0..s.atom_count() {
            let xp = s.path_of(ix);
            let px = s.atom_prob(ix);
            let mut f = 0.0;
            for n in 1..=3 {
                f += k.h()[n - 1].value(s.index_of_prefix(&xp[..n]))[0];
            }
            ef += px * f.abs();
            for iy in 0..s.atom_count() {
                let yp = s.path_of(iy);
                let mut g = 0.0;
                for n in 1..=3 {
                    let mut pre = xp[..n - 1].to_vec();
                    pre.push(yp[n - 1]);
                    g += k.h()[n - 1].value(s.index_of_prefix(&pre))[0];
                }
                eg += px * s.atom_prob(iy) * g.abs();
            }
        }
        assert!((r.f_moment - ef).abs() < 1e-12);
        assert!((r.g_moment - eg).abs() < 1e-12);
        assert!((r.forward.unwrap() - ef / eg).abs() < 1e-12);

        let fast = kernel_ratio(&k, 1.0).unwrap();
        assert!((fast.f_moment - r.f_moment).abs() < 1e-13);
        assert!((fast.g_moment - r.g_moment).abs() < 1e-13);
    }

    #[test]
    fn ratio_directions_are_reciprocal() {
        let s = CoordinateSpace::uniform(3, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let k = GeneratorKernel::random(&s, &SpaceDescriptor::lp(2, 1.0), &mut rng).unwrap();
        let pair = decouple(&k).unwrap();
        let r = decoupling_ratio(&pair, 1.5, 3).unwrap();
        assert!((r.forward.unwrap() * r.reverse.unwrap() - 1.0).abs() < tol::RATIO_IDENTITY);
    }

    #[test]
    fn degenerate_and_infinite_exponent_are_flagged() {
        let s = CoordinateSpace::rademacher(2).unwrap();
        let zk = GeneratorKernel::new(
            s.clone(),
            scalar(),
            vec![LeafFn::zero(&s, 1), LeafFn::zero(&s, 1)],
        )
        .unwrap();
        let pair = decouple(&zk).unwrap();
        let r = decoupling_ratio(&pair, 1.0, 2).unwrap();
        assert!(r.is_degenerate());
        assert!(r.forward.is_none());
        assert!(matches!(
            decoupling_ratio(&pair, f64::INFINITY, 2),
            Err(Error::InvalidExponent(_))
        ));
        let wt = weak_type_constant(&pair, 2).unwrap();
        assert!(wt.value.is_none());
    }

    #[test]
    fn weak_type_unit_walk_is_one() {
        let s = CoordinateSpace::rademacher(1).unwrap();
        let k = GeneratorKernel::new(s.clone(), scalar(), vec![rademacher_leaf(&s, 1).unwrap()])
            .unwrap();
        let pair = decouple(&k).unwrap();
        let wt = weak_type_constant(&pair, 1).unwrap();
        assert!((wt.value.unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(wt.at_level, 1.0);
    }

    #[test]
    fn weak_type_matches_support_scan_oracle() {
        let s = CoordinateSpace::rademacher(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let k = GeneratorKernel::random(&s, &scalar(), &mut rng).unwrap();
        let pair = decouple(&k).unwrap();
        let wt = weak_type_constant(&pair, 3).unwrap();

        let doubled = pair.doubled();
        let f = partial_sums(pair.d()).pop().unwrap();
        let g = partial_sums(pair.e()).pop().unwrap();
        let mut eg = 0.0;
        for a in 0..doubled.atom_count() {
            eg += doubled.atom_prob(a) * g.value(a)[0].abs();
        }
        let mut best = 0.0f64;
        for a in 0..doubled.atom_count() {
            let level = f.value(a)[0].abs();
            let mut tail = 0.0;
            for b in 0..doubled.atom_count() {
                if f.value(b)[0].abs() >= level {
                    tail += doubled.atom_prob(b);
                }
            }
            best = best.max(level * tail);
        }
        assert!((wt.value.unwrap() - best / eg).abs() < 1e-12);

        // Markov consistency against the p=1 ratio.
        let r = decoupling_ratio(&pair, 1.0, 3).unwrap();
        assert!(wt.value.unwrap() <= r.forward.unwrap() + tol::RATIO_IDENTITY);
    }

    #[test]
    fn sup_comparison_depth_one_collapses() {
        let s = CoordinateSpace::rademacher(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let k = GeneratorKernel::random(&s, &scalar(), &mut rng).unwrap();
        let pair = decouple(&k).unwrap();
        let sc = sup_comparison(&pair, 2.0, 1).unwrap();
        assert!((sc.l - sc.r).abs() < 1e-15);
        assert!(sc.holds());
    }

    #[test]
    fn sup_comparison_bound_holds_on_random_instances() {
        for seed in 0..20u64 {
            let s = CoordinateSpace::uniform(4, 2).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = GeneratorKernel::random(&s, &SpaceDescriptor::lp(2, 1.0), &mut rng).unwrap();
            let pair = decouple(&k).unwrap();
            for p in [1.0, 2.0] {
                let sc = sup_comparison(&pair, p, 4).unwrap();
                assert!(sc.holds(), "seed {seed} p {p}: {sc:?}");
                if p == 1.0 {
                    assert!((sc.factor - 4.0).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn good_lambda_empty_events_when_lambda_huge() {
        let s = CoordinateSpace::rademacher(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let k = GeneratorKernel::random(&s, &scalar(), &mut rng).unwrap();
        let pair = decouple(&k).unwrap();
        let params = GoodLambdaParams::new(0.5, 2.0, 1e9, 1.0).unwrap();
        let rep = good_lambda_probe(&pair, &params).unwrap();
        assert_eq!(rep.g_moment, 0.0);
        assert_eq!(rep.corrected_bound, 0.0);
        assert_eq!(rep.event_prob, 0.0);
        assert_eq!(rep.exceed_prob, 0.0);
        assert!(rep.passed());
    }

    #[test]
    fn good_lambda_underflowing_threshold_kills_the_transform() {
        let s = CoordinateSpace::rademacher(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let k = GeneratorKernel::random(&s, &scalar(), &mut rng).unwrap();
        // delta * lambda underflows to exactly 0, so sigma triggers at step 1
        // on every atom where the original difference is nonzero; the
        // transform window mu < k <= 1 is then empty throughout.
        assert!((0..2).all(|a| k.h()[0].value(a)[0] != 0.0));
        let pair = decouple(&k).unwrap();
        let params = GoodLambdaParams::new(1e-300, 2.0, 1e-300, 1.0).unwrap();
        let rep = good_lambda_probe(&pair, &params).unwrap();
        assert_eq!(rep.g_moment, 0.0);
    }

    #[test]
    fn good_lambda_report_matches_independent_enumeration() {
        let s = CoordinateSpace::rademacher(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2718);
        let k = GeneratorKernel::random(&s, &scalar(), &mut rng).unwrap();
        let pair = decouple(&k).unwrap();
        let doubled = pair.doubled();

        // Median of the f1* support as the probe level.
        let split = davis_split(&k).unwrap();
        let pair1 = decouple(split.h1()).unwrap();
        let f1 = partial_sums(pair1.d());
        let (f1star, _) = maximal(&f1, &scalar(), doubled);
        let mut levels: Vec<f64> = (0..doubled.atom_count())
            .map(|a| f1star.value(a)[0])
            .collect();
        levels.sort_by(f64::total_cmp);
        let lambda = levels[levels.len() / 2];
        assert!(lambda > 0.0);
        let params = GoodLambdaParams::new(0.5, 2.0, lambda, 1.0).unwrap();
        let rep = good_lambda_probe(&pair, &params).unwrap();

        // Independent recompute: stopping values per atom by scanning the
        // partial sums, then the transform sums by direct indicator algebra.
        let (_, dstar) = maximal(pair.d().diffs(), &scalar(), doubled);
        let g1 = partial_sums(pair1.e());
        let mut e_gmom = 0.0;
        let mut e_event = 0.0;
        let mut e_exceed = 0.0;
        let mut e_fstar = 0.0;
        for a in 0..doubled.atom_count() {
            let prob = doubled.atom_prob(a);
            let mu = (1..=3)
                .find(|n| f1[n - 1].value(a)[0].abs() > lambda)
                .unwrap_or(4);
            let nu = (1..=3)
                .find(|n| f1[n - 1].value(a)[0].abs() > 2.0 * lambda)
                .unwrap_or(4);
            let mut sigma = 4;
            for n in 1..=3 {
                // Conditional moment of ||g1_n|| given the x-block: average
                // over all y with the same x-prefix.
                let xpath = &doubled.path_of(a)[..3];
                let mut moment = 0.0;
                for iy in 0..s.atom_count() {
                    let mut full = xpath.to_vec();
                    full.extend(s.path_of(iy));
                    moment += s.atom_prob(iy) * g1[n - 1].value(doubled.index_of(&full))[0].abs();
                }
                if moment > 0.5 * lambda || 4.0 * dstar[n - 1].value(a)[0] > 0.5 * lambda {
                    sigma = n;
                    break;
                }
            }
            let mut fsum = 0.0;
            let mut gsum = 0.0;
            for kk in 1..=3usize {
                if mu < kk && kk <= nu.min(sigma) {
                    fsum += pair1.d().diffs()[kk - 1].value(a)[0];
                    gsum += pair1.e().diffs()[kk - 1].value(a)[0];
                }
            }
            e_gmom += prob * gsum.abs();
            let fstar = f1star.value(a)[0];
            if fstar > lambda {
                e_fstar += prob;
            }
            if fstar > 2.0 * lambda && sigma == 4 {
                e_event += prob;
            }
            if fsum.abs() > 0.5 * lambda {
                e_exceed += prob;
            }
        }
        assert!((rep.g_moment - e_gmom).abs() < 1e-12);
        assert!((rep.event_prob - e_event).abs() < 1e-14);
        assert!((rep.exceed_prob - e_exceed).abs() < 1e-14);
        assert!((rep.corrected_bound - 1.5 * lambda * e_fstar).abs() < 1e-12);
        assert!(rep.passed(), "{rep:?}");
    }
}
