use ndarray::{Array1, Axis};
use pusmi_core::data::sample_gaussian_labeled;
use pusmi_core::experiment::{
    loglog_slope, mse_sweep_gaussian, mse_sweep_labeled, write_mse_csv, SweepAxis,
};
use pusmi_core::pca::pca_project;
use pusmi_core::puit::{permutation_test, type2_experiment, write_type2_csv};
use pusmi_core::purl::{train_purl, transform, PurlConfig};
use pusmi_core::pusmi::estimate_smi;
use pusmi_core::rng::derive_seed;
use serde::Serialize;

use crate::config::{DataConfig, ExperimentConfig, Generator};
use crate::output::OutputDir;
use crate::{AxisKind, Cli, CliError, Command, DataArgs};

fn apply_data(cfg: &mut DataConfig, args: DataArgs) {
    if let Some(p) = args.input {
        cfg.input = Some(p);
        cfg.generator = None;
    }
    if let Some(g) = args.generator {
        cfg.generator = Some(g.into());
        cfg.input = None;
    }
    cfg.n_p = args.n_p.or(cfg.n_p);
    cfg.n_u = args.n_u.or(cfg.n_u);
    cfg.sample_prior = args.sample_prior.or(cfg.sample_prior);
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::load(cli.config.as_deref())?;
    cfg.seed = cli.seed.or(cfg.seed);
    cfg.prior = cli.prior.or(cfg.prior);
    match cli.command {
        Command::Estimate { data } => {
            apply_data(&mut cfg.data, data);
            estimate(&cfg, OutputDir::new(&cli.out, "estimate"))
        }
        Command::Fig1Sweep {
            input,
            generator,
            axis,
            fixed,
            grid,
            trials,
        } => {
            apply_data(
                &mut cfg.data,
                DataArgs {
                    input,
                    generator,
                    n_p: None,
                    n_u: None,
                    sample_prior: None,
                },
            );
            if let Some(kind) = axis {
                let fixed = fixed.ok_or_else(|| {
                    CliError::Config("--axis needs --fixed (held size or ratio)".into())
                })?;
                cfg.sweep.axis = match kind {
                    AxisKind::Positive => SweepAxis::Positive { n_u: fixed },
                    AxisKind::Unlabeled => SweepAxis::Unlabeled { n_p: fixed },
                    AxisKind::Joint => SweepAxis::Joint {
                        unlabeled_per_positive: fixed,
                    },
                };
            } else if fixed.is_some() {
                return Err(CliError::Config("--fixed needs --axis".into()));
            }
            cfg.sweep.grid = grid.unwrap_or(cfg.sweep.grid);
            cfg.sweep.trials = trials.unwrap_or(cfg.sweep.trials);
            fig1_sweep(&cfg, OutputDir::new(&cli.out, "fig1-sweep"))
        }
        Command::PurlToy { epochs, n_p, n_u } => {
            cfg.purl_toy.n_p = n_p.unwrap_or(cfg.purl_toy.n_p);
            cfg.purl_toy.n_u = n_u.unwrap_or(cfg.purl_toy.n_u);
            let mut purl = cfg.purl.take().unwrap_or_else(PurlConfig::toy);
            purl.epochs = epochs.unwrap_or(purl.epochs);
            cfg.purl = Some(purl);
            purl_toy(&cfg, OutputDir::new(&cli.out, "purl-toy"))
        }
        Command::PurlTrain {
            data,
            epochs,
            validation_n_p,
            validation_n_u,
        } => {
            apply_data(&mut cfg.data, data);
            cfg.data.validation_n_p = validation_n_p.or(cfg.data.validation_n_p);
            cfg.data.validation_n_u = validation_n_u.or(cfg.data.validation_n_u);
            if let (Some(e), Some(p)) = (epochs, cfg.purl.as_mut()) {
                p.epochs = e;
            }
            purl_train(&cfg, epochs, OutputDir::new(&cli.out, "purl-train"))
        }
        Command::Puit {
            data,
            b_count,
            recv_per_round,
        } => {
            apply_data(&mut cfg.data, data);
            cfg.puit.b_count = b_count.unwrap_or(cfg.puit.b_count);
            cfg.puit.recv_per_round |= recv_per_round;
            puit(&cfg, OutputDir::new(&cli.out, "puit"))
        }
        Command::Type2Sweep {
            generator,
            n_p_grid,
            n_u_grid,
            level,
            trials,
            b_count,
        } => {
            if let Some(g) = generator {
                cfg.data.generator = Some(g.into());
            }
            cfg.type2.n_p_grid = n_p_grid.unwrap_or(cfg.type2.n_p_grid);
            cfg.type2.n_u_grid = n_u_grid.unwrap_or(cfg.type2.n_u_grid);
            cfg.type2.level = level.unwrap_or(cfg.type2.level);
            cfg.type2.trials = trials.unwrap_or(cfg.type2.trials);
            cfg.puit.b_count = b_count.unwrap_or(cfg.puit.b_count);
            type2_sweep(&cfg, OutputDir::new(&cli.out, "type2-sweep"))
        }
    }
}

fn estimate(cfg: &ExperimentConfig, out: OutputDir) -> Result<(), CliError> {
    let (data, _, prior) = cfg.pu_data()?;
    let est_cfg = cfg.estimator.clone().with_seed(derive_seed(cfg.seed(), 1));
    let (estimate, model, fit) = estimate_smi(&data, prior, &est_cfg)?;

    #[derive(Serialize)]
    struct EstimateReport<'a> {
        n_p: usize,
        n_u: usize,
        estimate: pusmi_core::SmiEstimate,
        j_hat: f64,
        fit: &'a pusmi_core::FitReport,
        model: &'a pusmi_core::RatioModel,
    }
    let report = EstimateReport {
        n_p: data.n_p(),
        n_u: data.n_u(),
        estimate,
        j_hat: estimate.j_hat,
        fit: &fit,
        model: &model,
    };
    print!("{}", out.json("estimate.json", cfg, &report)?);
    Ok(())
}

fn fig1_sweep(cfg: &ExperimentConfig, out: OutputDir) -> Result<(), CliError> {
    let s = &cfg.sweep;
    let seed = cfg.seed();
    let rows = match cfg.corpus()? {
        Some(corpus) => {
            let prior = cfg.corpus_prior(&corpus)?;
            mse_sweep_labeled(
                &corpus,
                prior,
                s.axis,
                &s.grid,
                s.trials,
                &cfg.estimator,
                seed,
            )?
        }
        None => {
            let spec = cfg.gaussian_spec()?;
            mse_sweep_gaussian(&spec, s.axis, &s.grid, s.trials, &cfg.estimator, seed)?
        }
    };
    out.table("fig1.csv", cfg, |buf| Ok(write_mse_csv(&rows, buf)?))?;
    let slope = loglog_slope(&rows).ok();
    println!(
        "{}",
        serde_json::json!({ "rows": rows.len(), "loglog_slope": slope, "table": "fig1.csv" })
    );
    Ok(())
}

fn purl_toy(cfg: &ExperimentConfig, out: OutputDir) -> Result<(), CliError> {
    let purl = cfg.purl.clone().unwrap_or_else(PurlConfig::toy);
    let mut toy = cfg.clone();
    toy.data.generator = Some(toy.data.generator.clone().unwrap_or(Generator::Toy));
    let spec = toy.gaussian_spec()?;
    if spec.dim() != 2 {
        return Err(CliError::Config(
            "purl-toy needs a two-dimensional generator".into(),
        ));
    }
    let seed = cfg.seed();
    let t = &cfg.purl_toy;
    let data = pusmi_core::sample_gaussian_pu(&spec, t.n_p, t.n_u, derive_seed(seed, 100))?;
    let result = train_purl(&data, &purl, derive_seed(seed, 1))?;
    let direction = result.linear_direction().ok_or_else(|| {
        CliError::Config("purl-toy needs a single linear layer mapping to one dimension".into())
    })?;
    let pca = pca_project(data.unlabeled(), 1)?;
    let pca_direction: Array1<f64> = pca.components.row(0).to_owned();

    #[derive(Serialize)]
    struct Cosines {
        purl_vs_e1: f64,
        pca_vs_e2: f64,
    }
    #[derive(Serialize)]
    struct ToyReport {
        purl_direction: Vec<f64>,
        pca_direction: Vec<f64>,
        cosines: Cosines,
        best_iteration: usize,
    }
    let report = ToyReport {
        cosines: Cosines {
            purl_vs_e1: direction[0].abs(),
            pca_vs_e2: pca_direction[1].abs(),
        },
        purl_direction: direction.to_vec(),
        pca_direction: pca_direction.to_vec(),
        best_iteration: result.best_iteration,
    };

    let eval = sample_gaussian_labeled(&spec, t.eval_n, derive_seed(seed, 102))?;
    let learned = transform(&result, eval.features())?;
    let baseline = pca.transform(eval.features())?;
    out.table("purl_toy_points.csv", cfg, |buf| {
        let mut w = csv::Writer::from_writer(buf);
        let io = |e: csv::Error| CliError::Config(e.to_string());
        w.write_record(["x1", "x2", "y", "purl", "pca"])
            .map_err(io)?;
        for (i, row) in eval.features().axis_iter(Axis(0)).enumerate() {
            w.write_record([
                row[0].to_string(),
                row[1].to_string(),
                eval.labels()[i].to_string(),
                learned[[i, 0]].to_string(),
                baseline[[i, 0]].to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| CliError::Config(e.to_string()))
    })?;
    print!("{}", out.json("purl_toy.json", cfg, &report)?);
    Ok(())
}

fn purl_train(
    cfg: &ExperimentConfig,
    epochs: Option<usize>,
    out: OutputDir,
) -> Result<(), CliError> {
    let (data, validation, _prior) = cfg.pu_data()?;
    let mut purl = match &cfg.purl {
        Some(p) => p.clone(),
        None => PurlConfig::standard(data.dim())?,
    };
    if let Some(e) = epochs {
        purl.epochs = e;
    }
    purl.validation = validation;
    let result = train_purl(&data, &purl, derive_seed(cfg.seed(), 1))?;
    out.table("purl_history.csv", cfg, |buf| {
        Ok(result.write_history_csv(buf)?)
    })?;

    #[derive(Serialize)]
    struct TrainReport<'a> {
        best_iteration: usize,
        best_train_j: f64,
        best_validation_j: Option<f64>,
        epochs_run: usize,
        model: &'a pusmi_core::PurlResult,
    }
    let best = &result.history[result.best_iteration];
    let report = TrainReport {
        best_iteration: result.best_iteration,
        best_train_j: best.train_j,
        best_validation_j: best.validation_j,
        epochs_run: result.history.len() - 1,
        model: &result,
    };
    out.json("purl_model.json", cfg, &report)?;
    println!(
        "{}",
        serde_json::json!({
            "best_iteration": report.best_iteration,
            "best_train_j": report.best_train_j,
            "best_validation_j": report.best_validation_j,
            "model": "purl_model.json",
            "history": "purl_history.csv",
        })
    );
    Ok(())
}

fn puit(cfg: &ExperimentConfig, out: OutputDir) -> Result<(), CliError> {
    let (data, _, prior) = cfg.pu_data()?;
    let result = permutation_test(&data, prior, &cfg.puit, derive_seed(cfg.seed(), 1))?;
    print!("{}", out.json("puit.json", cfg, &result)?);
    Ok(())
}

fn type2_sweep(cfg: &ExperimentConfig, out: OutputDir) -> Result<(), CliError> {
    if cfg.data.input.is_some() {
        return Err(CliError::Config(
            "type2-sweep draws from a generator, not a file".into(),
        ));
    }
    let spec = cfg.gaussian_spec()?;
    let t = &cfg.type2;
    let rows = type2_experiment(
        &spec,
        &t.n_p_grid,
        &t.n_u_grid,
        t.level,
        t.trials,
        &cfg.puit,
        cfg.seed(),
    )?;
    out.table("type2.csv", cfg, |buf| Ok(write_type2_csv(&rows, buf)?))?;
    println!(
        "{}",
        serde_json::json!({ "rows": rows.len(), "table": "type2.csv" })
    );
    Ok(())
}
