//! Orchestration of the verification suites and matrix export.

use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::braid::{
    self, covariance_residual, lexicographic, model_fingerprint, BraidWord, ExchangeChain,
    LabelLayout, Permutation,
};
use crate::config::{RunConfig, Suite};
use crate::error::{Error, Result};
use crate::fock::{FockSpace, RapidityGrid};
use crate::hierarchy::{check_abelian, check_flow, check_integral_of_motion, HierarchyCharge};
use crate::report::{CheckRecord, VerificationReport};
use crate::rmatrix::{Convention, ModelRegistry, RMatrixModel};
use crate::tensor::{max_abs_distance, MultiSiteOperator, C64};
use crate::vertex::{
    closed_form_dual_first, closed_form_first, closed_form_second, CoefficientKind,
    InfinityCoupling, VertexEngine,
};

struct Recorder<'a> {
    suite: Suite,
    config: &'a RunConfig,
    model: &'a RMatrixModel,
    fingerprint: String,
    records: Vec<CheckRecord>,
}

impl<'a> Recorder<'a> {
    fn new(suite: Suite, config: &'a RunConfig, model: &'a RMatrixModel) -> Self {
        Self {
            suite,
            config,
            model,
            fingerprint: model_fingerprint(model),
            records: Vec::new(),
        }
    }

    fn run(&mut self, check: &str, inputs: String, f: impl FnOnce() -> Result<f64>) {
        let start = Instant::now();
        let outcome = f();
        let elapsed = if self.config.timings {
            start.elapsed().as_millis() as u64
        } else {
            0
        };
        let inputs = format!("{check}|{}|{inputs}", self.fingerprint);
        self.records.push(CheckRecord::from_outcome(
            check,
            self.suite.name(),
            self.model.name(),
            &inputs,
            outcome,
            self.config.tolerance,
            elapsed,
        ));
    }
}

fn suite_rng(config: &RunConfig, suite: Suite) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(config.seed ^ suite.seed_offset().wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// `count` distinct rapidities from the model's window, avoiding `avoid`.
pub fn sample_rapidities(
    rng: &mut ChaCha8Rng,
    model: &RMatrixModel,
    count: usize,
    avoid: &[f64],
) -> Vec<f64> {
    let (lo, hi) = model.convention().sample_window();
    let mut out: Vec<f64> = Vec::with_capacity(count);
    while out.len() < count {
        let k = rng.random_range(lo..hi);
        if !out.contains(&k) && !avoid.contains(&k) {
            out.push(k);
        }
    }
    out
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter()
        .map(|x| format!("{x:e}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// Runs every configured suite and assembles the report.
pub fn run_suites(config: &RunConfig) -> Result<VerificationReport> {
    config.validate()?;
    let registry = ModelRegistry::new();
    let model = config.build_model(&registry)?;
    let mut suites = config.suites.clone();
    suites.sort();
    suites.dedup();
    let records = if config.parallel {
        std::thread::scope(|scope| {
            let handles: Vec<_> = suites
                .iter()
                .map(|&s| {
                    let model = &model;
                    scope.spawn(move || run_suite(config, model, s))
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("suite thread panicked"))
                .collect()
        })
    } else {
        suites
            .iter()
            .flat_map(|&s| run_suite(config, &model, s))
            .collect()
    };
    Ok(VerificationReport::new(config.clone(), records))
}

/// One suite. Failures inside a check become failed records.
pub fn run_suite(config: &RunConfig, model: &RMatrixModel, suite: Suite) -> Vec<CheckRecord> {
    let mut rec = Recorder::new(suite, config, model);
    let mut rng = suite_rng(config, suite);
    match suite {
        Suite::Rmatrix => rmatrix_checks(&mut rec, &mut rng),
        Suite::Braid => braid_checks(&mut rec, &mut rng),
        Suite::Vertex => vertex_checks(&mut rec, &mut rng),
        Suite::Fock => fock_checks(&mut rec),
        Suite::Hierarchy => hierarchy_checks(&mut rec, &mut rng),
    }
    rec.records
}

fn rmatrix_checks(rec: &mut Recorder<'_>, rng: &mut ChaCha8Rng) {
    let model = rec.model;
    let samples = rec.config.samples;
    let triples: Vec<Vec<f64>> = (0..samples)
        .map(|_| sample_rapidities(rng, model, 3, &[]))
        .collect();
    let inputs = triples
        .iter()
        .map(|t| fmt_list(t))
        .collect::<Vec<_>>()
        .join(";");
    rec.run("rmatrix.yang_baxter", inputs.clone(), || {
        triples.iter().try_fold(0.0f64, |acc, k| {
            Ok(acc.max(model.check_yang_baxter(k[0], k[1], k[2])?))
        })
    });
    rec.run("rmatrix.unitarity", inputs.clone(), || {
        triples.iter().try_fold(0.0f64, |acc, k| {
            Ok(acc.max(model.check_unitarity(k[0], k[1])?))
        })
    });
    let shifts: Vec<f64> = (0..samples).map(|_| rng.random_range(0.5..2.0)).collect();
    rec.run(
        "rmatrix.invariance",
        format!("{inputs}|{}", fmt_list(&shifts)),
        || {
            let mut worst = 0.0f64;
            for (k, &c) in triples.iter().zip(&shifts) {
                let base = model.evaluate(k[0], k[1])?;
                let moved = match model.convention() {
                    Convention::Additive => model.evaluate(k[0] + c, k[1] + c)?,
                    Convention::Multiplicative => model.evaluate(k[0] * c, k[1] * c)?,
                    Convention::Constant => model.evaluate(k[2], k[0] + c)?,
                };
                worst = worst.max(max_abs_distance(&base, &moved)?);
            }
            Ok(worst)
        },
    );
}

fn braid_checks(rec: &mut Recorder<'_>, rng: &mut ChaCha8Rng) {
    let model = rec.model;
    let n = model.local_dim();
    let ks3 = sample_rapidities(rng, model, 3, &[]);
    let ks4 = sample_rapidities(rng, model, 4, &[]);
    rec.run("braid.cocycle", fmt_list(&ks3), || {
        let mut worst = 0.0f64;
        for s in lexicographic(3) {
            for m in lexicographic(3) {
                let r = braid::check_cocycle(
                    model,
                    &BraidWord::new(s.clone()),
                    &BraidWord::new(m),
                    &ks3,
                )?;
                worst = worst.max(r);
            }
        }
        Ok(worst)
    });
    rec.run("braid.inverse", fmt_list(&ks4), || {
        let mut worst = 0.0f64;
        let id = MultiSiteOperator::identity(n, 4);
        for s in lexicographic(4) {
            let sigma = BraidWord::new(s.clone());
            let back = braid::r_sigma_relabelled(model, &sigma.inverse(), &s, &ks4)?;
            let prod = back.matmul(&braid::r_sigma(model, &sigma, &ks4)?)?;
            worst = worst.max(max_abs_distance(&prod, &id)?);
        }
        Ok(worst)
    });
    rec.run("braid.reduced_word_independence", fmt_list(&ks4), || {
        let mut worst = 0.0f64;
        let layout = LabelLayout::contiguous(&ks4, 0);
        for s in lexicographic(4) {
            let a = braid::r_sigma(model, &BraidWord::new(s.clone()), &ks4)?;
            let b = ExchangeChain::of_word(s.as_slice())?.dense(model, &layout)?;
            worst = worst.max(max_abs_distance(&a, &b)?);
        }
        let rev = Permutation::new(vec![2, 1, 0])?;
        let a = BraidWord::with_reduced_word(rev.clone(), vec![0, 1, 0])?;
        let b = BraidWord::with_reduced_word(rev, vec![1, 0, 1])?;
        let d = max_abs_distance(
            &braid::r_sigma(model, &a, &ks3)?,
            &braid::r_sigma(model, &b, &ks3)?,
        )?;
        Ok(worst.max(d))
    });
    for sites in [2usize, 3] {
        let ks = &ks3[..sites];
        let dim = n.pow(sites as u32);
        let raw = Array2::from_shape_fn((dim, dim), |_| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let base = MultiSiteOperator::new(n, sites, raw).expect("square shape");
        let rule = move |_: &[f64]| -> Result<MultiSiteOperator> { Ok(base.clone()) };
        let sym = |k: &[f64]| -> Result<MultiSiteOperator> {
            braid::symmetrize(model, &|x: &[f64]| rule(x), k, 0)
        };
        rec.run(
            &format!("braid.symmetrize_covariance[n={sites}]"),
            fmt_list(ks),
            || {
                let mut worst = 0.0f64;
                for s in lexicographic(sites) {
                    worst = worst.max(covariance_residual(model, &sym, &BraidWord::new(s), ks, 0)?);
                }
                Ok(worst)
            },
        );
        rec.run(
            &format!("braid.symmetrize_idempotent[n={sites}]"),
            fmt_list(ks),
            || {
                let once = sym(ks)?;
                let twice = braid::symmetrize(model, &sym, ks, 0)?;
                max_abs_distance(&once, &twice)
            },
        );
    }
}

fn vertex_checks(rec: &mut Recorder<'_>, rng: &mut ChaCha8Rng) {
    let model = rec.model;
    let config = rec.config;
    let k_inf = config.k_inf_for(model);
    let engine =
        VertexEngine::with_options(model.clone(), config.max_order, InfinityCoupling::Model);

    let tuples: Vec<Vec<f64>> = (0..5)
        .map(|_| sample_rapidities(rng, model, 2, &[k_inf]))
        .collect();
    let inputs = format!(
        "kinf={k_inf:e}|{}",
        tuples
            .iter()
            .map(|t| fmt_list(t))
            .collect::<Vec<_>>()
            .join(";")
    );
    rec.run("vertex.closed_form", inputs.clone(), || {
        let mut worst = 0.0f64;
        for t in &tuples {
            let t1 = engine.t_coefficient(k_inf, &t[..1])?;
            worst = worst.max(max_abs_distance(
                &t1.op,
                &closed_form_first(model, k_inf, t[0])?,
            )?);
            let t2 = engine.t_coefficient(k_inf, t)?;
            worst = worst.max(max_abs_distance(
                &t2.op,
                &closed_form_second(model, k_inf, t[0], t[1])?,
            )?);
        }
        Ok(worst)
    });
    rec.run("vertex.dual_closed_form", inputs, || {
        let mut worst = 0.0f64;
        for t in &tuples {
            let tb = engine.t_bar_coefficient(k_inf, &t[..1])?;
            worst = worst.max(max_abs_distance(
                &tb.op,
                &closed_form_dual_first(model, k_inf, t[0])?,
            )?);
        }
        Ok(worst)
    });

    for order in 1..=3 {
        rec.records.extend(vertex_order_checks_with(
            rec.config, model, &engine, order, rng,
        ));
    }

    let ks = sample_rapidities(rng, model, 3.min(config.max_order), &[k_inf]);
    rec.run(
        "vertex.structure_decoupled",
        format!("kinf={k_inf:e}|{}", fmt_list(&ks)),
        || {
            let e = VertexEngine::with_options(
                model.clone(),
                config.max_order,
                InfinityCoupling::Scaled(0.0),
            );
            let mut worst = 0.0f64;
            for n in 0..=ks.len() {
                let t = e.t_coefficient(k_inf, &ks[..n])?;
                worst = worst.max(max_abs_distance(
                    &t.op,
                    &MultiSiteOperator::identity(model.local_dim(), n + 1),
                )?);
            }
            Ok(worst)
        },
    );
    rec.run(
        "vertex.structure_trivial_coupling",
        format!("kinf={k_inf:e}|{}", fmt_list(&ks)),
        || {
            let e = VertexEngine::with_options(
                model.clone(),
                config.max_order,
                InfinityCoupling::Identity,
            );
            let mut worst = 0.0f64;
            for n in 1..=ks.len() {
                worst = worst.max(e.t_coefficient(k_inf, &ks[..n])?.op.max_abs());
            }
            Ok(worst)
        },
    );
}

/// Covariance under every permutation at `order`, and the characterization
/// relation from `order` to `order + 1` on `samples.min(10)` tuples.
pub fn vertex_order_checks(
    config: &RunConfig,
    model: &RMatrixModel,
    order: usize,
) -> Vec<CheckRecord> {
    let engine =
        VertexEngine::with_options(model.clone(), config.max_order, InfinityCoupling::Model);
    let mut rng = suite_rng(config, Suite::Vertex);
    vertex_order_checks_with(config, model, &engine, order, &mut rng)
}

fn vertex_order_checks_with(
    config: &RunConfig,
    model: &RMatrixModel,
    engine: &VertexEngine,
    order: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<CheckRecord> {
    let mut rec = Recorder::new(Suite::Vertex, config, model);
    let k_inf = config.k_inf_for(model);
    let ks = sample_rapidities(rng, model, order, &[k_inf]);
    rec.run(
        &format!("vertex.covariance[n={order}]"),
        format!("kinf={k_inf:e}|{}", fmt_list(&ks)),
        || {
            let coeff = engine.t_coefficient(k_inf, &ks)?;
            let mut worst = 0.0f64;
            for s in lexicographic(order) {
                worst = worst.max(engine.check_covariance(&coeff, &BraidWord::new(s))?);
            }
            Ok(worst)
        },
    );
    if order < 3 {
        let tuples: Vec<Vec<f64>> = (0..config.samples.min(10))
            .map(|_| sample_rapidities(rng, model, order + 1, &[k_inf]))
            .collect();
        let inputs = format!(
            "kinf={k_inf:e}|{}",
            tuples
                .iter()
                .map(|t| fmt_list(t))
                .collect::<Vec<_>>()
                .join(";")
        );
        rec.run(
            &format!("vertex.characterization[n={order}]"),
            inputs,
            || {
                tuples.iter().try_fold(0.0f64, |acc, t| {
                    Ok(acc.max(engine.check_characterization(k_inf, t[0], &t[1..])?))
                })
            },
        );
    }
    rec.records
}

fn fock_space(config: &RunConfig, model: &RMatrixModel) -> Result<FockSpace> {
    let grid = RapidityGrid::for_model(config.grid_points(model), model)?;
    Ok(FockSpace::with_limit(
        model.clone(),
        grid,
        config.sector_cap + 2,
    ))
}

fn fock_checks(rec: &mut Recorder<'_>) {
    let model = rec.model;
    let config = rec.config;
    let k_inf = config.k_inf_for(model);
    let k2 = config.k_frt_for(model);
    let cap = config.sector_cap;
    let space = match fock_space(config, model) {
        Ok(s) => s,
        Err(e) => {
            let msg = e.to_string();
            rec.run("fock.setup", String::new(), || Err(Error::Config(msg)));
            return;
        }
    };
    let grid = fmt_list(space.grid().points());
    let inputs = format!("grid={grid}|kinf={k_inf:e}|cap={cap}");
    let closed = space.check_sector_closed_forms(k_inf);
    for sector in 0..3 {
        let outcome = match &closed {
            Ok(r) => Ok(r[sector]),
            Err(e) => Err(Error::Config(e.to_string())),
        };
        rec.run(
            &format!("fock.sector_closed_form[n={sector}]"),
            inputs.clone(),
            || outcome,
        );
    }
    rec.run("fock.product_form", inputs.clone(), || {
        space.check_product_form(k_inf, cap)
    });
    rec.run("fock.coproduct", inputs.clone(), || {
        space.check_coproduct(k_inf)
    });
    rec.run("fock.well_bred", inputs.clone(), || {
        space.check_well_bred(k_inf, cap)
    });
    rec.run("fock.frt", format!("{inputs}|k2={k2:e}"), || {
        space.check_frt(k_inf, k2, cap)
    });
    rec.run("fock.inverse", inputs.clone(), || {
        space.check_inverse(k_inf, cap)
    });
    rec.run(
        "fock.tau_isomorphism",
        format!("grid={grid}|cap={cap}"),
        || space.check_tau_isomorphism(cap),
    );
}

fn hierarchy_checks(rec: &mut Recorder<'_>, rng: &mut ChaCha8Rng) {
    let model = rec.model;
    let config = rec.config;
    let k_inf = config.k_inf_for(model);
    let cap = config.sector_cap;
    let degrees = config.degrees.clone();
    let space = match fock_space(config, model) {
        Ok(s) => s,
        Err(e) => {
            let msg = e.to_string();
            rec.run("hierarchy.setup", String::new(), || Err(Error::Config(msg)));
            return;
        }
    };
    let grid = fmt_list(space.grid().points());
    let times: Vec<f64> = (0..config.flow_times)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    for &d in &degrees {
        rec.run(
            &format!("hierarchy.flow[n={d}]"),
            format!("grid={grid}|cap={cap}|t={}", fmt_list(&times)),
            || {
                let charge = HierarchyCharge::new(d, space.grid().clone(), model.local_dim())?;
                times.iter().try_fold(0.0f64, |acc, &t| {
                    Ok(acc.max(check_flow(&space, &charge, cap, t)?))
                })
            },
        );
    }
    let degree_list = degrees
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join(",");
    rec.run(
        "hierarchy.integral_of_motion",
        format!("grid={grid}|kinf={k_inf:e}|cap={cap}|degrees={degree_list}"),
        || check_integral_of_motion(&space, k_inf, cap, &degrees),
    );
    rec.run(
        "hierarchy.abelian",
        format!("grid={grid}|cap={cap}|degrees={degree_list}"),
        || check_abelian(space.grid(), model.local_dim(), cap, &degrees),
    );
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportTarget {
    R,
    RSigma,
    TCoeff,
    SectorT,
}

#[derive(Clone, Debug, Default)]
pub struct ExportParams {
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    /// One-based one-line notation.
    pub perm: Option<Vec<usize>>,
    pub ks: Vec<f64>,
    pub k_inf: Option<f64>,
    pub sector: Option<usize>,
    pub dual: bool,
}

fn need<T>(value: Option<T>, what: &str) -> Result<T> {
    value.ok_or_else(|| Error::Config(format!("export needs {what}")))
}

/// Builds the requested operator for export in the matrix dump format.
pub fn export_matrix(
    config: &RunConfig,
    target: ExportTarget,
    params: &ExportParams,
) -> Result<MultiSiteOperator> {
    config.validate()?;
    let registry = ModelRegistry::new();
    let model = config.build_model(&registry)?;
    let kind = if params.dual {
        CoefficientKind::Dual
    } else {
        CoefficientKind::Direct
    };
    match target {
        ExportTarget::R => model.evaluate(need(params.k1, "k1")?, need(params.k2, "k2")?),
        ExportTarget::RSigma => {
            let perm = Permutation::from_one_based(&need(params.perm.clone(), "a permutation")?)?;
            braid::r_sigma(&model, &BraidWord::new(perm), &params.ks)
        }
        ExportTarget::TCoeff => {
            let k_inf = params.k_inf.unwrap_or_else(|| config.k_inf_for(&model));
            let engine =
                VertexEngine::with_options(model, config.max_order, InfinityCoupling::Model);
            Ok(engine.coefficient(kind, k_inf, &params.ks)?.op)
        }
        ExportTarget::SectorT => {
            let k_inf = params.k_inf.unwrap_or_else(|| config.k_inf_for(&model));
            let space = fock_space(config, &model)?;
            space
                .sector_operator(kind, k_inf, need(params.sector, "a sector")?)?
                .to_operator()
        }
    }
}
