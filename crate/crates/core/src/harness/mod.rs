//! Config-driven experiments: each run produces a [`RunManifest`] holding a result table,
//! which [`emit_report`] persists as `results.csv`, `manifest.json` and SVG charts.

mod config;
mod report;
mod sweep;

use std::path::PathBuf;
use std::time::Instant;

use rand::Rng;

use crate::envy::{draw_pairs, pairwise_ef_rate, UniformCube};
use crate::erm::{
    optimize_mixture_weights, solve_deterministic_ef_erm, solve_randomized_ef_erm,
    DEFAULT_ENUMERATION_BUDGET,
};
use crate::error::{Error, Result};
use crate::extension::{extend, net_radius, Metric};
use crate::families::{natarajan_dim, product_family, restrict_family, FiniteFamily};
use crate::instance::ValueTable;
use crate::lowerbound::{build_grid, run_adversarial_experiment};
use crate::model::{
    FavoriteClassifier, Individual, LabelTable, LossModel, OutcomeSpace, PointMass,
    RandomizedAssignment, UtilityModel,
};
use crate::rng::{derive_seed, stream_rng};

pub use config::{Experiment, ExperimentConfig, MixtureMode};
pub use report::{emit_report, render_svg, Cell, PlotSpec, RunManifest, Table, CSV_SCHEMA_VERSION};
pub use sweep::{
    finite_class_control, finite_class_sample_size, generalization_sweep, sample_size_helper,
    FiniteClassReport, FiniteClassTrial, SampleSizeBounds, SweepRow, SyntheticProblem,
};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Lipschitz constant of the utility used by `extension-check`.
pub const EXTENSION_LIPSCHITZ: f64 = 1.0;
/// Largest family whose product family `natarajan` also searches.
pub const MAX_PRODUCT_SEARCH_MEMBERS: usize = 64;

struct Outcome {
    results: Table,
    summary: Vec<(String, Cell)>,
    plots: Vec<PlotSpec>,
}

impl Outcome {
    fn table(results: Table) -> Self {
        Self {
            results,
            summary: Vec::new(),
            plots: Vec::new(),
        }
    }

    fn note(mut self, key: &str, value: impl Into<Cell>) -> Self {
        self.summary.push((key.to_string(), value.into()));
        self
    }

    fn plot(mut self, file: &str, title: &str, x: &str, y: &[&str], log_x: bool) -> Self {
        self.plots.push(PlotSpec {
            file: file.into(),
            title: title.into(),
            x: x.into(),
            y: y.iter().map(|s| s.to_string()).collect(),
            log_x,
        });
        self
    }
}

/// Runs the configured experiment. Nothing is written to disk.
pub fn run(config: &ExperimentConfig) -> Result<RunManifest> {
    config.validate()?;
    let start = Instant::now();
    let outcome = match config.experiment {
        Experiment::Example1 => example1(config)?,
        Experiment::Erm => erm(config)?,
        Experiment::Lowerbound => lowerbound(config)?,
        Experiment::MixtureGen => match config.mode {
            MixtureMode::Sweep => mixture_sweep(config)?,
            MixtureMode::FiniteClass => mixture_finite_class(config)?,
        },
        Experiment::Natarajan => natarajan(config)?,
        Experiment::ExtensionCheck => extension_check(config)?,
    };
    Ok(RunManifest {
        experiment: config.experiment.name().to_string(),
        config_digest: config.digest()?,
        seed: config.seed,
        tool_version: TOOL_VERSION.to_string(),
        csv_schema_version: CSV_SCHEMA_VERSION,
        results: outcome.results,
        summary: outcome.summary,
        plots: outcome.plots,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// Runs the experiment and writes its report into `config.out_dir`.
pub fn run_and_emit(config: &ExperimentConfig) -> Result<(RunManifest, Vec<PathBuf>)> {
    let manifest = run(config)?;
    let files = emit_report(&manifest, &config.out_dir, config.plots)?;
    Ok((manifest, files))
}

/// Two individuals, three outcomes: the randomized optimum costs `1/gamma` in total while
/// every deterministic EF assignment costs 1.
pub fn example1_instance(gamma: f64) -> Result<(Vec<Individual>, UtilityModel, LossModel)> {
    if !(gamma >= 1.0) {
        return Err(Error::contract(format!("gamma must be >= 1, got {gamma}")));
    }
    let u = UtilityModel::table(&[0, 1], vec![vec![0.0, 1.0, 1.0 / gamma], vec![0.0, 0.0, 1.0]])?;
    let l = LossModel::table(&[0, 1], vec![vec![0.0, 1.0, 1.0], vec![1.0, 1.0, 0.0]])?;
    Ok((vec![Individual::opaque(0), Individual::opaque(1)], u, l))
}

fn example1(config: &ExperimentConfig) -> Result<Outcome> {
    let mut t = Table::new(&[
        "gamma",
        "randomized_loss",
        "deterministic_loss",
        "ratio",
        "mixture_loss",
    ]);
    let k = OutcomeSpace::new(3)?;
    for &gamma in &config.example_gammas {
        let (s, u, l) = example1_instance(gamma)?;
        let rand = solve_randomized_ef_erm(&s, &u, &l, k)?;
        let det = solve_deterministic_ef_erm(&s, &u, &l, k, DEFAULT_ENUMERATION_BUDGET)?;
        // Everyone at their zero-loss outcome, and x1 moved to its favorite.
        let h0 = LabelTable::new(3, [(0, 0), (1, 2)])?;
        let he = LabelTable::new(3, [(0, 1), (1, 2)])?;
        let mix = optimize_mixture_weights(&[&h0, &he], &s, &u, &l)?;
        t.push(vec![
            gamma.into(),
            round9(rand.total_loss).into(),
            det.total_loss.into(),
            round9(det.total_loss / rand.total_loss).into(),
            round9(mix.loss * s.len() as f64).into(),
        ]);
    }
    Ok(Outcome::table(t))
}

/// Rounds away LP noise below 1e-9 so reported values are stable.
fn round9(v: f64) -> f64 {
    (v * 1e9).round() / 1e9
}

fn erm(config: &ExperimentConfig) -> Result<Outcome> {
    let (Some(up), Some(lp)) = (&config.utility_path, &config.loss_path) else {
        return Err(Error::Config("erm needs utility_path and loss_path".into()));
    };
    let ut = ValueTable::read(up)?;
    let lt = ValueTable::read(lp)?;
    if ut.ids != lt.ids {
        return Err(Error::Parse {
            path: lp.clone(),
            msg: "loss rows must list the same ids in the same order as the utility file".into(),
        });
    }
    let k = OutcomeSpace::new(ut.num_outcomes())?;
    let sample = ut.individuals();
    let u: UtilityModel = ut.into_model()?;
    let l: LossModel = lt.into_model()?;
    let result = solve_randomized_ef_erm(&sample, &u, &l, k)?;

    let mut header = vec!["id".to_string()];
    header.extend((0..k.len()).map(|y| format!("p{y}")));
    let mut t = Table {
        header,
        rows: Vec::new(),
    };
    for (x, row) in sample.iter().zip(result.assignment.rows()) {
        let mut cells = vec![Cell::from(x.id)];
        cells.extend(row.probs().iter().map(|p| Cell::from(round9(*p))));
        t.push(cells);
    }
    let mut out = Outcome::table(t)
        .note("loss", round9(result.loss))
        .note("total_loss", round9(result.total_loss));
    if config.deterministic {
        let det = solve_deterministic_ef_erm(&sample, &u, &l, k, DEFAULT_ENUMERATION_BUDGET)?;
        out = out
            .note("deterministic_loss", det.loss)
            .note("deterministic_total_loss", det.total_loss);
    }
    Ok(out)
}

fn lowerbound(config: &ExperimentConfig) -> Result<Outcome> {
    let strategy = config.strategy.build();
    let mut t = Table::new(&[
        "seed",
        "theta",
        "y_star",
        "alpha_hat",
        "worst_gap",
        "favorites_0",
        "favorites_1",
        "balanced",
    ]);
    let mut witnessed = 0u64;
    for s in config.seed..config.seed + config.seeds {
        let world = build_grid(config.q, config.lipschitz, s)?;
        let r = run_adversarial_experiment(&world, strategy.as_ref(), s)?;
        witnessed += (r.envy_report.alpha_hat >= 0.04) as u64;
        t.push(vec![
            s.into(),
            r.theta.into(),
            r.y_star.into(),
            r.envy_report.alpha_hat.into(),
            r.envy_report.worst_gap.into(),
            r.favorite_balance.0.into(),
            r.favorite_balance.1.into(),
            r.balanced.into(),
        ]);
    }
    Ok(Outcome::table(t)
        .note("cubes", 4usize.pow(config.q as u32))
        .note("seeds_with_alpha_at_least_0.04", witnessed)
        .plot("alpha_vs_seed.svg", "envy rate per seed", "seed", &["alpha_hat"], false))
}

fn mixture_sweep(config: &ExperimentConfig) -> Result<Outcome> {
    let rows = generalization_sweep(config)?;
    let mut t = Table::new(&[
        "n",
        "train_alpha",
        "test_alpha",
        "gap",
        "train_loss",
        "fallback_rate",
        "within_7gamma",
    ]);
    for r in &rows {
        t.push(vec![
            r.n.into(),
            r.train_alpha.into(),
            r.test_alpha.into(),
            r.gap.into(),
            r.train_loss.into(),
            r.fallback_rate.into(),
            (r.test_alpha <= r.train_alpha + 7.0 * config.gamma).into(),
        ]);
    }
    let non_increasing = rows.windows(2).filter(|w| w[1].gap <= w[0].gap).count();
    Ok(Outcome::table(t)
        .note("test_beta", config.beta + 4.0 * config.gamma)
        .note("non_increasing_steps", non_increasing)
        .plot("gap_vs_n.svg", "test minus train envy", "n", &["gap", "test_alpha"], true))
}

fn mixture_finite_class(config: &ExperimentConfig) -> Result<Outcome> {
    let report = finite_class_control(config)?;
    let mut t = Table::new(&["trial", "worst_excess", "violated"]);
    for tr in &report.trials {
        t.push(vec![tr.trial.into(), tr.worst_excess.into(), tr.violated.into()]);
    }
    Ok(Outcome::table(t)
        .note("n_pairs", report.n_pairs)
        .note("class_size", report.class_size)
        .note("violations", report.violations()))
}

/// Random label tables; most labels follow a per-point default so dimensions vary.
pub fn random_label_family(seed: u64, max_members: usize, max_domain: usize) -> Result<FiniteFamily> {
    let mut rng = stream_rng(seed, 0);
    let members = rng.gen_range(1..=max_members);
    let points = rng.gen_range(1..=max_domain);
    let k = rng.gen_range(2..=3);
    let noise = rng.gen_range(0.1..0.6);
    let default: Vec<usize> = (0..points).map(|_| rng.gen_range(0..k)).collect();
    let rows: Vec<Vec<usize>> = (0..members)
        .map(|_| {
            default
                .iter()
                .map(|&d| if rng.gen_bool(noise) { rng.gen_range(0..k) } else { d })
                .collect()
        })
        .collect();
    let domain = (0..points as u64).map(Individual::opaque).collect();
    FiniteFamily::from_label_vectors(domain, k, &rows)
}

fn natarajan(config: &ExperimentConfig) -> Result<Outcome> {
    let mut t = Table::new(&[
        "family",
        "members",
        "domain",
        "k",
        "dim",
        "restriction_count",
        "sauer_bound",
        "product_dim",
    ]);
    let mut bound_violations = 0u64;
    let mut product_violations = 0u64;
    for f in 0..config.families {
        let fam = random_label_family(
            derive_seed(config.seed, f as u64),
            config.max_members.min(crate::families::MAX_DIM_MEMBERS),
            config.max_domain.min(crate::families::MAX_DIM_DOMAIN),
        )?;
        let d = natarajan_dim(&fam)?;
        let count = restrict_family(&fam, fam.domain())?.len();
        let bound = (fam.domain().len() as f64).powi(d as i32) * (fam.num_outcomes() as f64).powi(2 * d as i32);
        bound_violations += (count as f64 > bound) as u64;
        let product = if fam.len() <= MAX_PRODUCT_SEARCH_MEMBERS {
            let d2 = natarajan_dim(&product_family(&fam)?)?;
            product_violations += (d2 > 2 * d) as u64;
            Some(d2)
        } else {
            None
        };
        t.push(vec![
            f.into(),
            fam.len().into(),
            fam.domain().len().into(),
            fam.num_outcomes().into(),
            d.into(),
            count.into(),
            bound.into(),
            product.into(),
        ]);
    }
    Ok(Outcome::table(t)
        .note("sauer_violations", bound_violations)
        .note("product_violations", product_violations))
}

/// Random clamped linear utility whose per-outcome weight vectors have Euclidean norm at
/// most `lipschitz`, so it is `lipschitz`-Lipschitz in the Euclidean metric.
pub fn lipschitz_linear_utility(q: usize, k: usize, lipschitz: f64, seed: u64) -> Result<UtilityModel> {
    let mut rng = stream_rng(seed, 0);
    let weights = (0..k)
        .map(|_| {
            let v: Vec<f64> = (0..q).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
            let scale = lipschitz * rng.gen_range(0.5..1.0) / norm;
            v.iter().map(|a| a * scale).collect()
        })
        .collect();
    let bias = (0..k).map(|_| rng.gen_range(0.0..1.0)).collect();
    UtilityModel::linear(weights, bias)
}

/// Nearest-neighbor extension of an EF sample classifier under a Lipschitz utility: the
/// envy gap on holdout pairs is at most `2 L r` with `r` the net radius over those pairs.
fn extension_check(config: &ExperimentConfig) -> Result<Outcome> {
    let q = config.input_dim;
    let k = config.outcomes;
    let u = lipschitz_linear_utility(q, k, EXTENSION_LIPSCHITZ, derive_seed(config.seed, 1))?;
    let sampler = UniformCube { q };
    let sample: Vec<Individual> = draw_pairs(&sampler, derive_seed(config.seed, 2), config.sample_size.div_ceil(2))?
        .into_iter()
        .flat_map(|(a, b)| [a, b])
        .take(config.sample_size)
        .collect();
    let holdout = draw_pairs(&sampler, derive_seed(config.seed, 3), config.test_pairs)?;
    let points: Vec<Individual> = holdout.iter().flat_map(|(a, b)| [a.clone(), b.clone()]).collect();

    let mut t = Table::new(&[
        "base",
        "n",
        "net_radius",
        "bound",
        "worst_gap",
        "alpha_at_bound",
        "within_bound",
    ]);
    let mut bases: Vec<(&str, RandomizedAssignment)> = Vec::new();
    let fav = PointMass(FavoriteClassifier { utility: u.clone() });
    let rows = sample
        .iter()
        .map(|x| crate::model::Classifier::distribution(&fav, x))
        .collect::<Result<Vec<_>>>()?;
    bases.push(("favorite", RandomizedAssignment::new(sample.clone(), rows)?));
    let small = &sample[..sample.len().min(60)];
    let loss = LossModel::linear(
        (0..k).map(|y| vec![if y % 2 == 0 { 0.5 } else { -0.5 }; q]).collect(),
        vec![0.5; k],
    )?;
    let erm = solve_randomized_ef_erm(small, &u, &loss, OutcomeSpace::new(k)?)?;
    bases.push(("erm", erm.assignment));

    let mut all_within = true;
    for (name, base) in bases {
        let n = base.len();
        let r = net_radius(base.sample(), &points, Metric::Euclidean)?;
        let bound = 2.0 * EXTENSION_LIPSCHITZ * r;
        let ext = extend(base, Metric::Euclidean);
        let report = pairwise_ef_rate(&ext, &holdout, &u, bound)?;
        let within = report.worst_gap <= bound + 1e-9;
        all_within &= within;
        t.push(vec![
            name.into(),
            n.into(),
            r.into(),
            bound.into(),
            report.worst_gap.into(),
            report.alpha_hat.into(),
            within.into(),
        ]);
    }
    Ok(Outcome::table(t).note("all_within_bound", all_within))
}
