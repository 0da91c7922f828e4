//! End-to-end acceptance checks, one test per contract item. Every test
//! prints a single PASS line with its measured figures (visible under
//! --nocapture); tolerances are stated inline next to each assertion.

use std::time::Instant;

use decoupling::banach::SpaceDescriptor;
use decoupling::davis::{certify_davis, davis_split};
use decoupling::estimator::{
    decoupling_ratio, good_lambda_probe, kernel_pth_moments, lp_norm_mc, sup_comparison,
    weak_type_constant, SumSide,
};
use decoupling::experiments::{run_named, ExperimentConfig};
use decoupling::martingale::{
    build_sigma_with_dstar, canonical_law, check_ci, check_tangent, decouple, laws_equal, maximal,
    partial_sums, stopped_transform, CiOutcome, DecoupledPair, GeneratorKernel, GoodLambdaParams,
    StoppingTime, StoppingTriple, TangentOutcome,
};
use decoupling::probspace::{Coordinate, CoordinateSpace, LeafFn};
use decoupling::search::{pw_randomization_norms, PaleyWalshInstance};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform coordinates two thirds of the time, skewed but exactly summing
/// probabilities otherwise.
fn mixed_space(arity: usize, n: usize, salt: usize) -> CoordinateSpace {
    if salt % 3 == 0 {
        let outcomes: Vec<f64> = (0..arity).map(|k| k as f64 * 1.5 - 1.0).collect();
        let probs = if arity == 2 {
            vec![0.25, 0.75]
        } else {
            vec![0.25, 0.25, 0.5]
        };
        let coord = Coordinate::new(outcomes, probs).unwrap();
        CoordinateSpace::new(vec![coord; n]).unwrap()
    } else {
        CoordinateSpace::uniform(n, arity).unwrap()
    }
}

fn banach_cycle(i: usize) -> SpaceDescriptor {
    match i % 4 {
        0 => SpaceDescriptor::scalar(),
        1 => SpaceDescriptor::lp(2, 1.0),
        2 => SpaceDescriptor::lp(3, 2.0),
        _ => SpaceDescriptor::linf(2),
    }
}

/// Shared fixture corpus: 50 kernels spanning arities, depths, and value
/// spaces, used by both the engine-agreement and weak-type tests.
fn fixture(f: usize) -> GeneratorKernel {
    let arity = 2 + f % 2;
    let n = 1 + f % 4;
    let space = mixed_space(arity, n, f);
    GeneratorKernel::random(&space, &banach_cycle(f), &mut rng(6_000 + f as u64)).unwrap()
}

#[test]
fn checkers_accept_decoupled_pairs_and_catch_single_atom_edits() {
    let start = Instant::now();
    let total = 500usize;
    let mut clean = 0usize;
    let mut detected = 0usize;
    for i in 0..total {
        let arity = 2 + i % 2;
        let n = 1 + i % 4;
        let banach = if i % 2 == 0 {
            SpaceDescriptor::scalar()
        } else {
            SpaceDescriptor::lp(2, 2.0)
        };
        let space = mixed_space(arity, n, i);
        let kernel = GeneratorKernel::random(&space, &banach, &mut rng(1_000 + i as u64)).unwrap();
        let pair = decouple(&kernel).unwrap();
        if check_tangent(pair.d(), pair.e()).unwrap().is_tangent() && check_ci(&pair).holds() {
            clean += 1;
        }

        let step = 1 + i % n;
        let diff = &pair.e().diffs()[step - 1];
        let atoms = pair.doubled().atom_count();
        let target = (i * 31) % atoms;
        let bump = 1.0 + (i % 3) as f64 * 0.5;
        let leaf_level = pair.doubled().num_levels();
        let mutated = diff.map_atoms(diff.width(), leaf_level, |a, v| {
            let mut out = v.to_vec();
            if a == target {
                out[0] += bump;
            }
            out
        });
        let e_mut = pair.e().with_diff_replaced(step, mutated);
        let caught = match check_tangent(pair.d(), &e_mut).unwrap() {
            TangentOutcome::Failed(w) => {
                assert!(
                    !w.left.0.is_empty() || !w.right.0.is_empty(),
                    "instance {i}: witness carries no laws"
                );
                true
            }
            TangentOutcome::Tangent => {
                let rebuilt =
                    DecoupledPair::from_parts(kernel.clone(), pair.d().clone(), e_mut).unwrap();
                match check_ci(&rebuilt) {
                    CiOutcome::Failed(w) => !format!("{w:?}").is_empty(),
                    CiOutcome::ConditionallyIndependent => false,
                }
            }
        };
        if caught {
            detected += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    assert_eq!(clean, total, "checkers rejected a genuine decoupled pair");
    assert!(
        detected * 100 >= total * 95,
        "only {detected}/{total} single-atom edits detected"
    );
    assert!(secs < 60.0, "soundness sweep took {secs:.1}s");
    println!(
        "PASS checker soundness: {clean}/{total} pairs clean, {detected}/{total} edits caught with witness, {secs:.1}s"
    );
}

#[test]
fn depth_one_and_hilbert_ratios_are_exactly_one() {
    let mut worst_depth_one = 0.0f64;
    for i in 0..100usize {
        let arity = 2 + i % 2;
        let banach = match i % 5 {
            0 => SpaceDescriptor::scalar(),
            1 => SpaceDescriptor::lp(2, 1.0),
            2 => SpaceDescriptor::lp(3, 2.0),
            3 => SpaceDescriptor::linf(2),
            _ => SpaceDescriptor::lp(2, 3.0),
        };
        let space = mixed_space(arity, 1, i);
        let kernel = GeneratorKernel::random(&space, &banach, &mut rng(2_000 + i as u64)).unwrap();
        let pair = decouple(&kernel).unwrap();
        for p in [1.0, 2.0, 3.0] {
            let r = decoupling_ratio(&pair, p, 1).unwrap();
            let fwd = r.forward.expect("degenerate depth-one ratio");
            worst_depth_one = worst_depth_one.max((fwd - 1.0).abs());
            assert!(
                (fwd - 1.0).abs() <= 1e-10,
                "instance {i}, p = {p}: ratio {fwd}"
            );
        }
    }
    let mut worst_hilbert = 0.0f64;
    for i in 0..100usize {
        let arity = 2 + i % 2;
        let n = 1 + i % 5;
        let banach = if i % 2 == 0 {
            SpaceDescriptor::scalar()
        } else {
            SpaceDescriptor::lp(1 + i % 3, 2.0)
        };
        let space = mixed_space(arity, n, i + 7);
        let kernel = GeneratorKernel::random(&space, &banach, &mut rng(3_000 + i as u64)).unwrap();
        let pair = decouple(&kernel).unwrap();
        let r = decoupling_ratio(&pair, 2.0, n).unwrap();
        let fwd = r.forward.expect("degenerate Hilbert ratio");
        worst_hilbert = worst_hilbert.max((fwd - 1.0).abs());
        assert!((fwd - 1.0).abs() <= 1e-10, "instance {i}: ratio {fwd}");
    }
    println!(
        "PASS exact identities: depth-one worst |ratio - 1| = {worst_depth_one:.2e}, Hilbert p=2 worst = {worst_hilbert:.2e}"
    );
}

#[test]
fn maximal_partial_sums_obey_the_comparison_bound() {
    let mut min_slack = f64::INFINITY;
    for i in 0..200usize {
        let arity = 2 + i % 2;
        let n = 1 + i % 5;
        let space = mixed_space(arity, n, i);
        let kernel =
            GeneratorKernel::random(&space, &banach_cycle(i), &mut rng(4_000 + i as u64)).unwrap();
        let pair = decouple(&kernel).unwrap();
        for p in [1.0, 2.0] {
            let sc = sup_comparison(&pair, p, pair.steps()).unwrap();
            min_slack = min_slack.min(sc.slack);
            assert!(
                sc.slack >= -1e-9,
                "instance {i}, p = {p}: L = {}, factor * R = {}",
                sc.l,
                sc.factor * sc.r
            );
            assert!(sc.holds());
        }
    }
    println!(
        "PASS maximal comparison: 200 instances, p in {{1, 2}}, min slack = {min_slack:.3e}"
    );
}

#[test]
fn davis_certificates_hold_and_split_reconstructs() {
    let mut min_slack = f64::INFINITY;
    let mut worst_recon = 0.0f64;
    for i in 0..1000usize {
        let arity = 2 + i % 2;
        let n = 1 + i % 4;
        let space = mixed_space(arity, n, i);
        let kernel =
            GeneratorKernel::random(&space, &banach_cycle(i), &mut rng(5_000 + i as u64)).unwrap();
        let split = davis_split(&kernel).unwrap();
        let report = certify_davis(&split);
        assert!(report.passed(), "instance {i}: {}", report.to_json());
        assert!(report.entries.len() >= 3);
        min_slack = min_slack.min(report.worst());
        for s in 0..kernel.steps() {
            let h = kernel.h()[s].data();
            let u = split.u()[s].data();
            let v = split.v()[s].data();
            let h1 = split.h1().h()[s].data();
            let h2 = split.h2().h()[s].data();
            for a in 0..h.len() {
                assert_eq!(u[a] + v[a], h[a], "instance {i}: threshold parts drift");
                let err = (h1[a] + h2[a] - h[a]).abs();
                worst_recon = worst_recon.max(err / (1.0 + h[a].abs()));
                assert!(
                    err <= 1e-12 * (1.0 + h[a].abs()),
                    "instance {i}, step {}, entry {a}",
                    s + 1
                );
            }
        }
    }
    assert!(min_slack >= -1e-10);
    println!(
        "PASS Davis certificates: 1000 kernels, min slack = {min_slack:.3e}, worst reconstruction error = {worst_recon:.2e} (relative)"
    );
}

#[test]
fn monte_carlo_agrees_with_exact_enumeration() {
    let mut min_hits = 100usize;
    for f in 0..50usize {
        let kernel = fixture(f);
        let p = [1.0, 2.0, 3.0][f % 3];
        let exact = kernel_pth_moments(&kernel, p).unwrap().0;
        let mut hits = 0usize;
        for s in 0..100u64 {
            let est = lp_norm_mc(&kernel, SumSide::F, p, 4096, 7_000 + 101 * f as u64 + s).unwrap();
            let se = est.std_error.unwrap();
            if (est.value - exact).abs() <= 4.0 * se {
                hits += 1;
            }
        }
        assert!(hits >= 95, "fixture {f}: only {hits}/100 seeds within 4 SE");
        min_hits = min_hits.min(hits);
    }
    println!(
        "PASS engine agreement: 50 fixtures x 100 seeds, min within-4-SE count = {min_hits}/100"
    );
}

#[test]
fn paley_walsh_law_identity_and_garling_match() {
    let mut worst_gap = 0.0f64;
    for i in 0..100usize {
        let n = 1 + i % 4;
        let dim = 1 + i % 3;
        let banach = match i % 3 {
            0 => SpaceDescriptor::lp(dim, 2.0),
            1 => SpaceDescriptor::lp(dim, 1.0),
            _ => SpaceDescriptor::linf(dim),
        };
        let space = CoordinateSpace::rademacher(n).unwrap();
        let inst = PaleyWalshInstance::random(&space, &banach, &mut rng(8_000 + i as u64)).unwrap();
        let kernel = inst.to_kernel().unwrap();
        let pair = decouple(&kernel).unwrap();
        let doubled = pair.doubled();
        let base = pair.base();
        let nb = base.num_levels();

        let sums = partial_sums(pair.e());
        let sum_e = &sums[n - 1];
        let mut pts = Vec::with_capacity(doubled.atom_count());
        for a in 0..doubled.atom_count() {
            pts.push((sum_e.value(a).to_vec(), doubled.atom_prob(a)));
        }
        let law_e = canonical_law(pts);

        // The sign-randomized form of the same sum: multiplier times both
        // the coupled and the fresh Rademacher coordinate.
        let randomized = LeafFn::from_atom_fn(doubled, dim, doubled.num_levels(), |_, path| {
            let mut tot = vec![0.0f64; dim];
            for step in 1..=n {
                let m = inst.multipliers()[step - 1].value(base.index_of_prefix(&path[..step - 1]));
                let rx = base.levels()[step - 1].outcomes()[path[step - 1]];
                let ry = base.levels()[step - 1].outcomes()[path[nb + step - 1]];
                for (t, c) in tot.iter_mut().zip(m) {
                    *t += c * (rx * ry);
                }
            }
            tot
        })
        .unwrap();
        let mut pts = Vec::with_capacity(doubled.atom_count());
        for a in 0..doubled.atom_count() {
            pts.push((randomized.value(a).to_vec(), doubled.atom_prob(a)));
        }
        let law_r = canonical_law(pts);
        assert!(laws_equal(&law_e, &law_r), "instance {i}: laws differ");
        assert_eq!(law_e, law_r, "instance {i}: laws differ beyond merge tolerance");

        let p = [1.0, 2.0, 3.0][i % 3];
        let (plain, rand_norm) = pw_randomization_norms(&inst, p).unwrap();
        assert!(rand_norm > 0.0, "instance {i}: degenerate randomized norm");
        let garling = plain / rand_norm;
        let ratio = decoupling_ratio(&pair, p, n)
            .unwrap()
            .forward
            .expect("degenerate decoupling ratio");
        worst_gap = worst_gap.max((garling - ratio).abs());
        assert!(
            (garling - ratio).abs() <= 1e-10,
            "instance {i}: Garling {garling} vs decoupling {ratio}"
        );
    }
    println!(
        "PASS Paley-Walsh specialization: 100 instances, summed laws identical, worst |Garling - decoupling| = {worst_gap:.2e}"
    );
}

#[test]
fn weak_type_never_exceeds_the_l1_ratio() {
    let mut checked = 0usize;
    let mut worst_gap = f64::NEG_INFINITY;
    for f in 0..50usize {
        let kernel = fixture(f);
        let pair = decouple(&kernel).unwrap();
        let n = pair.steps();
        let wt = weak_type_constant(&pair, n).unwrap();
        let Some(v) = wt.value else { continue };
        let ratio = decoupling_ratio(&pair, 1.0, n)
            .unwrap()
            .forward
            .expect("degenerate l1 ratio");
        worst_gap = worst_gap.max(v - ratio);
        assert!(
            v <= ratio + 1e-10,
            "fixture {f}: weak type {v} exceeds ratio {ratio}"
        );
        checked += 1;
    }
    assert!(checked >= 48, "too many degenerate fixtures: {checked}/50");
    println!(
        "PASS Markov consistency: {checked}/50 fixtures, max(weak type - l1 ratio) = {worst_gap:.3e}"
    );
}

#[test]
fn trend_experiments_hit_pins_and_reproduce_byte_identically() {
    let cfg = ExperimentConfig::default();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let start = Instant::now();
    let growth = pool.install(|| run_named("c0-growth", &cfg)).unwrap();
    let bounded = pool.install(|| run_named("l1-bounded", &cfg)).unwrap();
    let secs = start.elapsed().as_secs_f64();

    let col: Vec<f64> = growth
        .rows
        .iter()
        .map(|r| r[1].parse().unwrap())
        .collect();
    for w in col.windows(2) {
        assert!(
            w[1] > w[0],
            "best-constant column not strictly increasing: {col:?}"
        );
    }
    assert!(growth.passed(), "{:?}", growth.verdicts);
    assert!(bounded.passed(), "{:?}", bounded.verdicts);
    assert!(secs < 300.0, "experiments took {secs:.0}s single-core");

    // Rerun on the default pool: results must not depend on worker count.
    let growth2 = run_named("c0-growth", &cfg).unwrap();
    let bounded2 = run_named("l1-bounded", &cfg).unwrap();
    assert_eq!(growth.to_csv(), growth2.to_csv());
    assert_eq!(growth.summary_json(), growth2.summary_json());
    assert_eq!(growth.svg(), growth2.svg());
    assert_eq!(bounded.to_csv(), bounded2.to_csv());
    assert_eq!(bounded.summary_json(), bounded2.summary_json());
    assert_eq!(bounded.svg(), bounded2.svg());

    let last_over_first = col.last().unwrap() / col[0];
    println!(
        "PASS trend experiments: growth {last_over_first:.4} above pin {}, ceilings held, reruns byte-identical, {secs:.0}s single-core",
        cfg.c0_growth_threshold
    );
}

#[test]
fn stopped_transforms_remain_tangent_with_valid_good_lambda_bounds() {
    let mut min_bound_slack = f64::INFINITY;
    for i in 0..100usize {
        let arity = 2 + i % 2;
        let n = 1 + i % 4;
        let space = mixed_space(arity, n, i);
        let kernel =
            GeneratorKernel::random(&space, &banach_cycle(i), &mut rng(10_000 + i as u64)).unwrap();
        let pair = decouple(&kernel).unwrap();
        let banach = pair.banach();
        let doubled = pair.doubled();
        let nb = pair.base().num_levels();
        let f = partial_sums(pair.d());
        let (fstar, _) = maximal(&f, banach, doubled);
        let top = fstar.data().iter().fold(0.0f64, |m, v| m.max(*v));

        let mut r = rng(11_000 + i as u64);
        let delta: f64 = r.random_range(0.05..0.9);
        let beta = 1.0 + delta + r.random_range(0.1..2.0);
        let lambda = (top * r.random_range(0.2..2.0)).max(1e-6);
        let p = if i % 2 == 0 { 1.0 } else { 2.0 };
        let params = GoodLambdaParams::new(delta, beta, lambda, p).unwrap();

        let mu = StoppingTime::first_passage(doubled, nb, &f, banach, params.lambda).unwrap();
        let nu =
            StoppingTime::first_passage(doubled, nb, &f, banach, params.beta * params.lambda)
                .unwrap();
        let (_, dstar) = maximal(pair.d().diffs(), banach, doubled);
        let sigma = build_sigma_with_dstar(&pair, &dstar, &params).unwrap();
        let st = StoppingTriple::new(mu, nu, sigma, params).unwrap();
        let t = stopped_transform(&pair, &st).unwrap();
        assert!(
            check_tangent(t.d(), t.e()).unwrap().is_tangent(),
            "instance {i}: stopped transform lost tangency"
        );

        let report = good_lambda_probe(&pair, &params).unwrap();
        assert!(
            report.bound_slack >= -1e-10,
            "instance {i}: corrected bound slack {}",
            report.bound_slack
        );
        assert!(report.passed(), "instance {i}");
        min_bound_slack = min_bound_slack.min(report.bound_slack);
    }
    println!(
        "PASS stopped transforms: 100 instances tangent after stopping, min corrected-bound slack = {min_bound_slack:.3e}"
    );
}
