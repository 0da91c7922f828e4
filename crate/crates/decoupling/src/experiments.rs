//! Named reproducible studies: each maps one comparison of constants to a
//! runnable report with a CSV table, pass/fail verdicts against configurable
//! thresholds, and full provenance. Reports carry no timestamps, so a rerun
//! with identical parameters is byte-identical.

use crate::banach::SpaceDescriptor;
use crate::estimator::{kernel_pth_moments, kernel_ratio, pth_moment_exact};
use crate::martingale::{decouple, partial_sums, GeneratorKernel};
use crate::probspace::{CoordinateSpace, LeafFn};
use crate::search::{dimension_sweep, hill_climb, Mode, SearchConfig};
use crate::{mix_seed, tol, Error, KahanSum, Result};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Thresholds and search effort for the named experiments. The growth and
/// ceiling values are regression pins taken from the first runs at these
/// default parameters, not claims about true constants.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub budget: u64,
    pub restarts: usize,
    /// Search effort for flat control columns, where any instance scores 1.
    pub control_budget: u64,
    /// Verdict floor for last/first in the sup-norm growth sweep.
    pub c0_growth_threshold: f64,
    /// Verdict ceilings for the bounded sweeps.
    pub l1_ceiling: f64,
    pub nested_l1_ceiling: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 2026,
            budget: 10_000,
            restarts: 4,
            control_budget: 200,
            // First-run oracle values at these defaults: growth ratio
            // 1.05007..., l1 max 1.33243..., nested max 1.25494...; the pins
            // sit just inside those so a search regression trips a verdict
            // while byte-identical reruns pass.
            c0_growth_threshold: 1.04,
            l1_ceiling: 1.35,
            nested_l1_ceiling: 1.28,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub check: String,
    pub observed: f64,
    pub threshold: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub seed: u64,
    pub budget: u64,
    pub engine: String,
    pub fingerprints: Vec<String>,
}

/// A line chart specification rendered by `ExperimentReport::svg`.
#[derive(Clone, Debug, Serialize)]
pub struct Chart {
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<(String, Vec<(f64, f64)>)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub parameters: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub verdicts: Vec<Verdict>,
    pub provenance: Provenance,
    pub chart: Option<Chart>,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn svg(&self) -> Option<String> {
        let chart = self.chart.as_ref()?;
        let (w, h, ml, mb, mt, mr) = (640.0, 400.0, 70.0, 50.0, 40.0, 20.0);
        let pts: Vec<(f64, f64)> = chart
            .series
            .iter()
            .flat_map(|(_, s)| s.iter().copied())
            .collect();
        if pts.is_empty() {
            return None;
        }
        let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
        for (x, y) in &pts {
            x0 = x0.min(*x);
            x1 = x1.max(*x);
            y0 = y0.min(*y);
            y1 = y1.max(*y);
        }
        if x1 == x0 {
            x1 = x0 + 1.0;
        }
        if y1 == y0 {
            y1 = y0 + 1.0;
        }
        let sx = |x: f64| ml + (x - x0) / (x1 - x0) * (w - ml - mr);
        let sy = |y: f64| h - mb - (y - y0) / (y1 - y0) * (h - mb - mt);
        let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
        let mut svg = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">\n"
        );
        svg.push_str(&format!(
            "<rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
        ));
        svg.push_str(&format!(
            "<line x1=\"{ml}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
            h - mb,
            w - mr,
            h - mb
        ));
        svg.push_str(&format!(
            "<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>\n",
            h - mb
        ));
        for (i, (label, series)) in chart.series.iter().enumerate() {
            let color = colors[i % colors.len()];
            let path: Vec<String> = series
                .iter()
                .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
                .collect();
            svg.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
                path.join(" ")
            ));
            for (x, y) in series {
                svg.push_str(&format!(
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>\n",
                    sx(*x),
                    sy(*y)
                ));
            }
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{label}</text>\n",
                ml + 10.0,
                mt + 15.0 * (i as f64 + 1.0)
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            (ml + w - mr) / 2.0,
            h - 12.0,
            chart.x_label
        ));
        svg.push_str(&format!(
            "<text x=\"15\" y=\"{}\" transform=\"rotate(-90 15 {})\" text-anchor=\"middle\">{}</text>\n",
            (mt + h - mb) / 2.0,
            (mt + h - mb) / 2.0,
            chart.y_label
        ));
        svg.push_str(&format!(
            "<text x=\"{ml}\" y=\"20\" font-size=\"14\">{}</text>\n",
            self.name
        ));
        svg.push_str("</svg>\n");
        Some(svg)
    }
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Flat search on the dim-dimensional Hilbert space at exponent 2. Any
/// instance scores 1 there, so a short budget suffices; the value lands in
/// the control column.
fn hilbert_control(dim: usize, n: usize, cfg: &ExperimentConfig) -> Result<f64> {
    let sc = SearchConfig::new(
        SpaceDescriptor::lp(dim, 2.0),
        2.0,
        n,
        Mode::Decoupling,
        cfg.control_budget,
        cfg.seed,
        1,
    )?;
    Ok(hill_climb(&sc)?.best.value)
}

/// Sup-norm growth sweep: best-found decoupling constants in l^inf_d must
/// grow with d, in contrast to the flat Hilbert control column.
pub fn exp_c0_growth(
    dims: &[usize],
    n: usize,
    p: f64,
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport> {
    let template = SearchConfig::new(
        SpaceDescriptor::linf(dims[0]),
        p,
        n,
        Mode::Decoupling,
        cfg.budget,
        cfg.seed,
        cfg.restarts,
    )?;
    let sweep = dimension_sweep(&template, dims)?;
    let mut rows = Vec::new();
    let mut fingerprints = Vec::new();
    let mut series = Vec::new();
    let mut control_series = Vec::new();
    let mut worst_control: f64 = 1.0;
    for r in &sweep.rows {
        let control = hilbert_control(r.dim, n, cfg)?;
        worst_control = worst_control.max((control - 1.0).abs() + 1.0);
        series.push((r.dim as f64, r.best_constant));
        control_series.push((r.dim as f64, control));
        rows.push(vec![
            r.dim.to_string(),
            fmt(r.best_constant),
            fmt(control),
            r.seed.to_string(),
            r.budget.to_string(),
            r.fingerprint.clone(),
        ]);
        fingerprints.push(r.fingerprint.clone());
    }
    let first = sweep.rows.first().expect("nonempty sweep").best_constant;
    let last = sweep.rows.last().expect("nonempty sweep").best_constant;
    let growth = last / first;
    let verdicts = vec![
        Verdict {
            check: "last/first best constant exceeds growth threshold".into(),
            observed: growth,
            threshold: cfg.c0_growth_threshold,
            tolerance: 0.0,
            passed: growth > cfg.c0_growth_threshold,
        },
        Verdict {
            check: "Hilbert control column stays at 1".into(),
            observed: worst_control,
            threshold: 1.0,
            tolerance: tol::CONTROL_COLUMN,
            passed: (worst_control - 1.0).abs() <= tol::CONTROL_COLUMN,
        },
    ];
    Ok(ExperimentReport {
        name: "c0-growth".into(),
        parameters: vec![
            ("dims".into(), format!("{dims:?}")),
            ("N".into(), n.to_string()),
            ("p".into(), fmt(p)),
            ("budget".into(), cfg.budget.to_string()),
            ("seed".into(), cfg.seed.to_string()),
        ],
        columns: vec![
            "dim".into(),
            "best_constant".into(),
            "hilbert_control".into(),
            "seed".into(),
            "budget".into(),
            "fingerprint".into(),
        ],
        rows,
        verdicts,
        provenance: Provenance {
            seed: cfg.seed,
            budget: cfg.budget,
            engine: "exact".into(),
            fingerprints,
        },
        chart: Some(Chart {
            x_label: "dimension".into(),
            y_label: "best constant".into(),
            series: vec![
                ("sup-norm".into(), series),
                ("hilbert control".into(), control_series),
            ],
        }),
    })
}

/// Bounded sweeps: l^1_d and uniformly weighted L^1 over a fixed Hilbert
/// block, both expected to stay below their pinned ceilings.
pub fn exp_l1_bounded(
    dims: &[usize],
    n: usize,
    p: f64,
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport> {
    let template = SearchConfig::new(
        SpaceDescriptor::lp(dims[0], 1.0),
        p,
        n,
        Mode::Decoupling,
        cfg.budget,
        cfg.seed,
        cfg.restarts,
    )?;
    let sweep = dimension_sweep(&template, dims)?;
    let mut rows = Vec::new();
    let mut fingerprints = Vec::new();
    let mut l1_series = Vec::new();
    let mut nested_series = Vec::new();
    let mut nested_max: f64 = 0.0;
    for r in &sweep.rows {
        // Same harness on L^1 over r.dim uniform sections with plane Hilbert
        // sections; no embedding seeding across section counts.
        let nested = SpaceDescriptor::NestedL1 {
            weights: vec![1.0 / r.dim as f64; r.dim],
            inner: Box::new(SpaceDescriptor::lp(2, 2.0)),
        };
        let nc = SearchConfig::new(
            nested,
            p,
            n,
            Mode::Decoupling,
            cfg.budget,
            cfg.seed,
            cfg.restarts,
        )?;
        let nested_best = hill_climb(&nc)?;
        nested_max = nested_max.max(nested_best.best.value);
        l1_series.push((r.dim as f64, r.best_constant));
        nested_series.push((r.dim as f64, nested_best.best.value));
        rows.push(vec![
            r.dim.to_string(),
            fmt(r.best_constant),
            fmt(nested_best.best.value),
            r.seed.to_string(),
            r.budget.to_string(),
            r.fingerprint.clone(),
            nested_best.best.fingerprint.clone(),
        ]);
        fingerprints.push(r.fingerprint.clone());
        fingerprints.push(nested_best.best.fingerprint.clone());
    }
    let l1_max = sweep
        .rows
        .iter()
        .map(|r| r.best_constant)
        .fold(0.0f64, f64::max);
    let verdicts = vec![
        Verdict {
            check: "l1 sweep stays below ceiling".into(),
            observed: l1_max,
            threshold: cfg.l1_ceiling,
            tolerance: 0.0,
            passed: l1_max < cfg.l1_ceiling,
        },
        Verdict {
            check: "nested L1 sweep stays below ceiling".into(),
            observed: nested_max,
            threshold: cfg.nested_l1_ceiling,
            tolerance: 0.0,
            passed: nested_max < cfg.nested_l1_ceiling,
        },
    ];
    Ok(ExperimentReport {
        name: "l1-bounded".into(),
        parameters: vec![
            ("dims".into(), format!("{dims:?}")),
            ("N".into(), n.to_string()),
            ("p".into(), fmt(p)),
            ("budget".into(), cfg.budget.to_string()),
            ("seed".into(), cfg.seed.to_string()),
        ],
        columns: vec![
            "dim".into(),
            "l1_best".into(),
            "nested_l1_best".into(),
            "seed".into(),
            "budget".into(),
            "l1_fingerprint".into(),
            "nested_fingerprint".into(),
        ],
        rows,
        verdicts,
        provenance: Provenance {
            seed: cfg.seed,
            budget: cfg.budget,
            engine: "exact".into(),
            fingerprints,
        },
        chart: Some(Chart {
            x_label: "dimension".into(),
            y_label: "best constant".into(),
            series: vec![
                ("l1".into(), l1_series),
                ("nested L1".into(), nested_series),
            ],
        }),
    })
}

/// Check that gluing independent sections into one L^1(S;X)-valued instance
/// commutes with the moment functionals: the lifted p-th moment is the
/// weighted mean of the per-section ones, on both halves of the pair.
pub fn exp_fubini_lift(
    weights: &[f64],
    inner: &SpaceDescriptor,
    n: usize,
    p: f64,
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport> {
    if weights.is_empty() || weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::InvalidParameter(
            "section weights must be positive".into(),
        ));
    }
    inner.validate()?;
    let space = CoordinateSpace::rademacher(n)?;
    let dim = inner.dim();
    let sections: Vec<GeneratorKernel> = (0..weights.len())
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, j as u64));
            GeneratorKernel::random(&space, inner, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;

    // Glue: h_n is the concatenation of the sections' h_n blocks, valued in
    // L^1(weights; inner).
    let glued_banach = SpaceDescriptor::NestedL1 {
        weights: weights.to_vec(),
        inner: Box::new(inner.clone()),
    };
    let glued_h: Vec<LeafFn> = (0..n)
        .map(|i| {
            LeafFn::from_atom_fn(&space, dim * weights.len(), i + 1, |a, _| {
                let mut v = Vec::with_capacity(dim * weights.len());
                for s in &sections {
                    v.extend_from_slice(s.h()[i].value(a));
                }
                v
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let glued = GeneratorKernel::new(space.clone(), glued_banach, glued_h)?;
    let pair = decouple(&glued)?;
    let doubled = pair.doubled();

    // Left sides: expectation over atoms of the sectionwise weighted p-th
    // power of the inner norm.
    let lifted = |sum: &LeafFn| -> f64 {
        let mut acc = KahanSum::new();
        for atom in 0..doubled.atom_count() {
            let v = sum.value(atom);
            let mut through = KahanSum::new();
            for (j, w) in weights.iter().enumerate() {
                through.add(w * inner.norm_unchecked(&v[j * dim..(j + 1) * dim]).powf(p));
            }
            acc.add(doubled.atom_prob(atom) * through.value());
        }
        acc.value()
    };
    let f_sum = partial_sums(pair.d()).pop().expect("n >= 1");
    let g_sum = partial_sums(pair.e()).pop().expect("n >= 1");
    let lift_f = lifted(&f_sum);
    let lift_g = lifted(&g_sum);

    // Right sides: weighted means of the per-section moments, each computed
    // by its own enumeration.
    let mut rows = Vec::new();
    let mut fingerprints = vec![glued.fingerprint()];
    let mut mean_f = KahanSum::new();
    let mut mean_g = KahanSum::new();
    for (j, (w, s)) in weights.iter().zip(&sections).enumerate() {
        let (fm, gm) = kernel_pth_moments(s, p)?;
        mean_f.add(w * fm);
        mean_g.add(w * gm);
        rows.push(vec![
            j.to_string(),
            fmt(*w),
            fmt(fm),
            fmt(gm),
            cfg.seed.to_string(),
            s.fingerprint(),
        ]);
        fingerprints.push(s.fingerprint());
    }
    rows.push(vec![
        "lift".into(),
        fmt(weights.iter().sum::<f64>()),
        fmt(lift_f),
        fmt(lift_g),
        cfg.seed.to_string(),
        glued.fingerprint(),
    ]);

    let mut verdicts = vec![
        Verdict {
            check: "lifted moment of the plain sum equals the weighted section mean".into(),
            observed: (lift_f - mean_f.value()).abs(),
            threshold: 0.0,
            tolerance: tol::RATIO_IDENTITY,
            passed: (lift_f - mean_f.value()).abs() <= tol::RATIO_IDENTITY,
        },
        Verdict {
            check: "lifted moment of the decoupled sum equals the weighted section mean".into(),
            observed: (lift_g - mean_g.value()).abs(),
            threshold: 0.0,
            tolerance: tol::RATIO_IDENTITY,
            passed: (lift_g - mean_g.value()).abs() <= tol::RATIO_IDENTITY,
        },
    ];
    if p == 1.0 {
        // Third path through the nested norm descriptor itself.
        let via_descriptor = pth_moment_exact(&f_sum, pair.banach(), 1.0, doubled);
        verdicts.push(Verdict {
            check: "descriptor norm agrees with the sectionwise formula".into(),
            observed: (via_descriptor - lift_f).abs(),
            threshold: 0.0,
            tolerance: tol::RATIO_IDENTITY,
            passed: (via_descriptor - lift_f).abs() <= tol::RATIO_IDENTITY,
        });
    }
    Ok(ExperimentReport {
        name: "fubini-lift".into(),
        parameters: vec![
            ("weights".into(), format!("{weights:?}")),
            ("inner".into(), inner.text()),
            ("N".into(), n.to_string()),
            ("p".into(), fmt(p)),
            ("seed".into(), cfg.seed.to_string()),
        ],
        columns: vec![
            "section".into(),
            "weight".into(),
            "f_moment_p".into(),
            "g_moment_p".into(),
            "seed".into(),
            "fingerprint".into(),
        ],
        rows,
        verdicts,
        provenance: Provenance {
            seed: cfg.seed,
            budget: 0,
            engine: "exact".into(),
            fingerprints,
        },
        chart: None,
    })
}

/// Best-found constants across exponents for a fixed space; exploratory, no
/// verdict beyond the control invariant when the space is Hilbert at p = 2.
pub fn exp_p_dependence(
    space: &SpaceDescriptor,
    n: usize,
    ps: &[f64],
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport> {
    if ps.is_empty() {
        return Err(Error::InvalidParameter("no exponents to tabulate".into()));
    }
    let mut rows = Vec::new();
    let mut fingerprints = Vec::new();
    let mut series = Vec::new();
    for &p in ps {
        let sc = SearchConfig::new(
            space.clone(),
            p,
            n,
            Mode::Decoupling,
            cfg.budget,
            cfg.seed,
            cfg.restarts,
        )?;
        let out = hill_climb(&sc)?;
        series.push((p, out.best.value));
        rows.push(vec![
            fmt(p),
            fmt(out.best.value),
            cfg.seed.to_string(),
            cfg.budget.to_string(),
            out.best.fingerprint.clone(),
        ]);
        fingerprints.push(out.best.fingerprint);
    }
    Ok(ExperimentReport {
        name: "p-dependence".into(),
        parameters: vec![
            ("space".into(), space.text()),
            ("N".into(), n.to_string()),
            ("ps".into(), format!("{ps:?}")),
            ("budget".into(), cfg.budget.to_string()),
            ("seed".into(), cfg.seed.to_string()),
        ],
        columns: vec![
            "p".into(),
            "best_constant".into(),
            "seed".into(),
            "budget".into(),
            "fingerprint".into(),
        ],
        rows,
        verdicts: Vec::new(),
        provenance: Provenance {
            seed: cfg.seed,
            budget: cfg.budget,
            engine: "exact".into(),
            fingerprints,
        },
        chart: Some(Chart {
            x_label: "p".into(),
            y_label: "best constant".into(),
            series: vec![("best constant".into(), series)],
        }),
    })
}

/// Trace-norm trend probe across matrix sizes. Exploratory by design: a
/// bounded-looking column proves nothing, and the report says so. The
/// diagonal cross-check ties the matrix norm to the sequence-space case.
pub fn exp_schatten_probe(
    ks: &[usize],
    n: usize,
    p: f64,
    budget: u64,
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport> {
    if ks.is_empty() {
        return Err(Error::InvalidParameter("no matrix sizes to probe".into()));
    }
    let template = SearchConfig::new(
        SpaceDescriptor::TraceNorm { k: ks[0] },
        p,
        n,
        Mode::Decoupling,
        budget,
        cfg.seed,
        cfg.restarts,
    )?;
    let sweep = dimension_sweep(&template, ks)?;
    let mut rows = Vec::new();
    let mut fingerprints = Vec::new();
    let mut series = Vec::new();
    for r in &sweep.rows {
        series.push((r.dim as f64, r.best_constant));
        rows.push(vec![
            r.dim.to_string(),
            fmt(r.best_constant),
            r.seed.to_string(),
            r.budget.to_string(),
            r.fingerprint.clone(),
        ]);
        fingerprints.push(r.fingerprint.clone());
    }

    // Diagonal-matrix instances see only the absolute row sums, so their
    // ratio must match the same tables read as l^1_k vectors.
    let k = *ks.last().expect("nonempty");
    let space = CoordinateSpace::rademacher(n.min(3))?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 7));
    let l1_kernel = GeneratorKernel::random(&space, &SpaceDescriptor::lp(k, 1.0), &mut rng)?;
    let diag_h: Vec<LeafFn> = l1_kernel
        .h()
        .iter()
        .map(|t| {
            t.map_atoms(k * k, t.level(), |_, v| {
                let mut m = vec![0.0; k * k];
                for (i, c) in v.iter().enumerate() {
                    m[i * k + i] = *c;
                }
                m
            })
        })
        .collect();
    let diag_kernel = GeneratorKernel::new(
        space.clone(),
        SpaceDescriptor::TraceNorm { k },
        diag_h,
    )?;
    let diag_ratio = kernel_ratio(&diag_kernel, p)?;
    let l1_ratio = kernel_ratio(&l1_kernel, p)?;
    let deviation = match (diag_ratio.forward, l1_ratio.forward) {
        (Some(a), Some(b)) => (a - b).abs(),
        _ => f64::INFINITY,
    };
    let verdicts = vec![Verdict {
        check: "diagonal matrix instances reduce to the sequence-space value".into(),
        observed: deviation,
        threshold: 0.0,
        tolerance: tol::EXACT_ENUMERATION,
        passed: deviation <= tol::EXACT_ENUMERATION,
    }];
    Ok(ExperimentReport {
        name: "schatten-probe".into(),
        parameters: vec![
            ("ks".into(), format!("{ks:?}")),
            ("N".into(), n.to_string()),
            ("p".into(), fmt(p)),
            ("budget".into(), budget.to_string()),
            ("seed".into(), cfg.seed.to_string()),
            (
                "note".into(),
                "exploratory trend only; bounded columns decide nothing".into(),
            ),
        ],
        columns: vec![
            "k".into(),
            "best_constant".into(),
            "seed".into(),
            "budget".into(),
            "fingerprint".into(),
        ],
        rows,
        verdicts,
        provenance: Provenance {
            seed: cfg.seed,
            budget,
            engine: "exact".into(),
            fingerprints,
        },
        chart: Some(Chart {
            x_label: "matrix size k".into(),
            y_label: "best constant".into(),
            series: vec![("trace norm".into(), series)],
        }),
    })
}

/// Both one-sided randomization constants next to the decoupling constant,
/// with the distributional identity between the forward comparison and the
/// decoupled pair checked instance by instance.
pub fn exp_garling_split(
    space: &SpaceDescriptor,
    n: usize,
    p: f64,
    budget: u64,
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport> {
    use crate::search::{pw_randomization_norms, PaleyWalshInstance};
    let forward_cfg = SearchConfig::new(
        space.clone(),
        p,
        n,
        Mode::GarlingForward,
        budget,
        cfg.seed,
        cfg.restarts,
    )?;
    let reverse_cfg = SearchConfig::new(
        space.clone(),
        p,
        n,
        Mode::GarlingReverse,
        budget,
        cfg.seed,
        cfg.restarts,
    )?;
    let forward = hill_climb(&forward_cfg)?;
    let reverse = hill_climb(&reverse_cfg)?;

    // Distributional identity: on Paley-Walsh instances the independently
    // signed sum and the decoupled sum have the same law.
    let base = CoordinateSpace::rademacher(n)?;
    let mut worst = 0.0f64;
    for i in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 100 + i));
        let inst = PaleyWalshInstance::random(&base, space, &mut rng)?;
        let (plain, randomized) = pw_randomization_norms(&inst, p)?;
        let ratio = kernel_ratio(&inst.to_kernel()?, p)?;
        worst = worst
            .max((plain - ratio.f_moment).abs())
            .max((randomized - ratio.g_moment).abs());
    }
    let rows = vec![
        vec![
            "garling_forward_best".into(),
            fmt(forward.best.value),
            cfg.seed.to_string(),
            budget.to_string(),
            forward.best.fingerprint.clone(),
        ],
        vec![
            "garling_reverse_best".into(),
            fmt(reverse.best.value),
            cfg.seed.to_string(),
            budget.to_string(),
            reverse.best.fingerprint.clone(),
        ],
    ];
    let verdicts = vec![Verdict {
        check: "forward randomization norms equal the decoupled pair's".into(),
        observed: worst,
        threshold: 0.0,
        tolerance: tol::RATIO_IDENTITY,
        passed: worst <= tol::RATIO_IDENTITY,
    }];
    Ok(ExperimentReport {
        name: "garling-split".into(),
        parameters: vec![
            ("space".into(), space.text()),
            ("N".into(), n.to_string()),
            ("p".into(), fmt(p)),
            ("budget".into(), budget.to_string()),
            ("seed".into(), cfg.seed.to_string()),
        ],
        columns: vec![
            "quantity".into(),
            "value".into(),
            "seed".into(),
            "budget".into(),
            "fingerprint".into(),
        ],
        rows,
        verdicts,
        provenance: Provenance {
            seed: cfg.seed,
            budget,
            engine: "exact".into(),
            fingerprints: vec![
                forward.best.fingerprint.clone(),
                reverse.best.fingerprint.clone(),
            ],
        },
        chart: None,
    })
}

/// Run an experiment by its report name with the default desk-scale
/// parameters.
pub fn run_named(name: &str, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    match name {
        "c0-growth" => exp_c0_growth(&[2, 4, 8], 4, 1.0, cfg),
        "l1-bounded" => exp_l1_bounded(&[2, 4, 8], 4, 1.0, cfg),
        "fubini-lift" => exp_fubini_lift(
            &[0.25, 0.75],
            &SpaceDescriptor::lp(2, 1.0),
            3,
            1.0,
            cfg,
        ),
        "p-dependence" => exp_p_dependence(
            &SpaceDescriptor::lp(4, 1.0),
            3,
            &[1.0, 1.5, 2.0, 4.0],
            cfg,
        ),
        "schatten-probe" => exp_schatten_probe(&[2, 3, 4], 3, 1.0, cfg.budget.min(2_000), cfg),
        "garling-split" => exp_garling_split(&SpaceDescriptor::linf(4), 4, 1.0, cfg.budget, cfg),
        other => Err(Error::InvalidParameter(format!(
            "unknown experiment {other:?}; expected c0-growth, l1-bounded, fubini-lift, p-dependence, schatten-probe, or garling-split"
        ))),
    }
}

pub const EXPERIMENT_NAMES: [&str; 6] = [
    "c0-growth",
    "l1-bounded",
    "fubini-lift",
    "p-dependence",
    "schatten-probe",
    "garling-split",
];
