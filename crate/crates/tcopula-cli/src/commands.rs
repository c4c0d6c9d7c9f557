//! The subcommand implementations.

use crate::artifacts::{
    chain_cache_key, file_digest, fmt_f64, read_correlation, read_pseudo_obs, write_manifest,
    write_matrix,
};
use crate::config::RunConfig;
use std::fmt::Write as _;
use std::path::PathBuf;
use tcopula::copula::{simulate, CorrelationMatrix, DofVector, GroupConfig, PseudoSample};
use tcopula::error::{Error, Result};
use tcopula::mcmc::{
    diagnostics, load_chain, point_estimates, run_copula_chain, save_chain, ChainMetadata,
    PosteriorSample, PriorSpec,
};
use tcopula::pipeline::{
    garch_filter, garch_fit, ingest_csv, kendall_corr, log_returns, to_pseudo_obs, CsvSchema,
    ResidualMatrix,
};
use tcopula::risk::{cvar_from_losses, compare_models, Portfolio};
use tcopula::selection::{enumerate_models, run_selection_with, ModelFamily, SelectionOptions};

fn out_path(config: &RunConfig, name: &str) -> PathBuf {
    config.output_dir.join(name)
}

fn ensure_out_dir(config: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&config.output_dir)?;
    Ok(())
}

/// Ingest prices, filter each asset with GARCH(1,1), and write residuals,
/// pseudo-observations and the Kendall-tau correlation matrix.
pub fn cmd_filter(config: &RunConfig) -> Result<()> {
    ensure_out_dir(config)?;
    let schema = CsvSchema::new(
        config.data.date_column.clone(),
        &config.data.assets.iter().map(String::as_str).collect::<Vec<_>>(),
    )
    .invert_assets(&config.data.invert.iter().map(String::as_str).collect::<Vec<_>>());
    let report = ingest_csv(&config.data.csv, &schema)?;
    if report.dropped_rows > 0 {
        eprintln!("dropped {} incomplete rows", report.dropped_rows);
    }

    let mut garch_rows = String::from(
        "asset\tmu\tomega\talpha\tbeta\tsigma0_sq\tlog_lik\tconverged\n",
    );
    let mut residual_cols = Vec::new();
    for series in &report.series {
        let returns = log_returns(series)
            .map_err(|e| Error::data(format!("{}: {e}", series.label)))?;
        let fit = garch_fit(&returns)
            .map_err(|e| Error::data(format!("{}: GARCH fit failed: {e}", series.label)))?;
        let eps = garch_filter(&returns, &fit.params)?;
        let p = fit.params;
        writeln!(
            garch_rows,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            series.label,
            fmt_f64(p.mu),
            fmt_f64(p.omega),
            fmt_f64(p.alpha),
            fmt_f64(p.beta),
            fmt_f64(p.sigma0_sq),
            fmt_f64(fit.log_lik),
            fit.converged
        )
        .unwrap();
        residual_cols.push(eps);
    }
    std::fs::write(out_path(config, "garch_params.tsv"), garch_rows)?;

    let labels: Vec<String> = config.data.assets.clone();
    let residuals = ResidualMatrix::from_columns(&residual_cols, &labels)?;
    let res_rows: Vec<Vec<f64>> = (0..residuals.n_obs())
        .map(|j| (0..residuals.dim()).map(|i| residuals.get(j, i)).collect())
        .collect();
    write_matrix(&out_path(config, "residuals.tsv"), &labels, &res_rows)?;

    let pseudo = to_pseudo_obs(&residuals)?;
    let pseudo_rows: Vec<Vec<f64>> = (0..pseudo.n_obs()).map(|j| pseudo.row(j).to_vec()).collect();
    write_matrix(&out_path(config, "pseudo_obs.tsv"), &labels, &pseudo_rows)?;

    let corr = kendall_corr(&residuals)?;
    let corr_rows: Vec<Vec<f64>> = (0..corr.dim())
        .map(|i| (0..corr.dim()).map(|j| corr.entry(i, j)).collect())
        .collect();
    write_matrix(&out_path(config, "correlation.tsv"), &labels, &corr_rows)?;

    println!(
        "filtered {} assets, {} observations",
        labels.len(),
        pseudo.n_obs()
    );
    Ok(())
}

struct Inputs {
    sample: PseudoSample,
    corr: CorrelationMatrix,
    family: ModelFamily,
    data_digest: String,
}

fn load_inputs(config: &RunConfig) -> Result<Inputs> {
    let pseudo_path = out_path(config, "pseudo_obs.tsv");
    let corr_path = out_path(config, "correlation.tsv");
    if !pseudo_path.exists() || !corr_path.exists() {
        return Err(Error::data(format!(
            "pseudo-observations not found in {}; run `tcopula filter` first",
            config.output_dir.display()
        )));
    }
    let (_, sample) = read_pseudo_obs(&pseudo_path)?;
    let corr = read_correlation(&corr_path)?;
    if corr.dim() != sample.dim() {
        return Err(Error::shape(format!(
            "correlation is {}x{} but sample has {} margins",
            corr.dim(),
            corr.dim(),
            sample.dim()
        )));
    }
    let family = enumerate_models(sample.dim(), config.policy())?;
    Ok(Inputs {
        data_digest: file_digest(&pseudo_path)?,
        sample,
        corr,
        family,
    })
}

fn parse_model_id(family: &ModelFamily, id: &str) -> Result<usize> {
    let idx: Option<usize> = id
        .strip_prefix('M')
        .and_then(|s| s.parse().ok())
        .filter(|&h| h < family.len());
    idx.ok_or_else(|| {
        Error::domain(format!(
            "unknown model id {id:?}; valid ids are M0..M{}",
            family.len() - 1
        ))
    })
}

/// Obtain the chain for one model, loading a persisted run when the cache
/// key (data digest, model id, chain settings) matches.
#[allow(clippy::too_many_arguments)]
fn chain_for_model(
    config: &RunConfig,
    inputs: &Inputs,
    h: usize,
    prior: &PriorSpec,
    init: &[f64],
) -> Result<PosteriorSample> {
    let chain_dir = out_path(config, "chains");
    std::fs::create_dir_all(&chain_dir)?;
    let mut chain_cfg = config.chain_config();
    chain_cfg.seed = chain_cfg.seed.wrapping_add(h as u64);
    let model_id = inputs.family.model_id(h);
    let key = chain_cache_key(
        &inputs.data_digest,
        &model_id,
        &chain_cfg,
        config.quadrature.rel_tol,
    );
    let path = chain_dir.join(format!("{model_id}-{key}.tsv"));
    if path.exists() {
        let (chain, _meta) = load_chain(&path)?;
        println!("{model_id}: cache hit ({})", path.display());
        return Ok(chain);
    }
    let chain = run_copula_chain(
        &inputs.sample,
        inputs.family.model(h),
        &inputs.corr,
        prior,
        init,
        &chain_cfg,
        &config.density_config(),
    )?;
    save_chain(
        &path,
        &chain,
        &ChainMetadata {
            model_label: inputs.family.model(h).label(),
            seed: chain_cfg.seed,
            n_tune: chain_cfg.n_tune,
            n_burn: chain_cfg.n_burn,
        },
    )?;
    println!("{model_id}: sampled {} sweeps", chain.n_sweeps());
    Ok(chain)
}

fn selection_options(config: &RunConfig) -> SelectionOptions {
    let mut opts = SelectionOptions::new(config.chain_config());
    opts.density = config.density_config();
    opts.prior_bounds = (config.prior.nu_min, config.prior.nu_max);
    let n = config.chain.n_sample;
    if n < 100 {
        opts.batch_count = (n / 2).max(2);
    }
    opts
}

/// Fit one model by MLE and MCMC, persist the chain, and write an estimate
/// summary.
pub fn cmd_calibrate(config: &RunConfig, model_id: &str) -> Result<()> {
    let inputs = load_inputs(config)?;
    let h = parse_model_id(&inputs.family, model_id)?;
    let group = inputs.family.model(h);
    let m = group.group_count();
    let (lo, hi) = (config.prior.nu_min, config.prior.nu_max);
    let prior = PriorSpec::uniform(vec![lo; m], vec![hi; m])?;

    let init_dof = DofVector::constant(inputs.sample.dim(), 0.5 * (lo + hi).min(20.0), lo, hi)?;
    let mle = tcopula::copula::mle_fit(
        &inputs.sample,
        group,
        &inputs.corr,
        &init_dof,
        &tcopula::copula::MleOptions::default(),
    )?;
    let mle_group = group.collapse(&mle.dof)?;
    let init: Vec<f64> = mle_group
        .iter()
        .enumerate()
        .map(|(k, &v)| v.clamp(prior.lower(k) + 1e-3, prior.upper(k) - 1e-3))
        .collect();

    let chain = chain_for_model(config, &inputs, h, &prior, &init)?;
    let est = point_estimates(&chain)?;
    let q = if chain.n_sweeps() >= 100 { 50 } else { (chain.n_sweeps() / 2).max(2) };
    let diag = diagnostics(&chain, q)?;

    let mut out = String::new();
    writeln!(out, "model\t{model_id}").unwrap();
    writeln!(out, "grouping\t{}", group.label()).unwrap();
    writeln!(out, "mle_loglik\t{}", fmt_f64(mle.log_lik)).unwrap();
    writeln!(out, "map_loglik\t{}", fmt_f64(est.map_log_lik)).unwrap();
    for k in 0..m {
        writeln!(out, "mle_{k}\t{}", fmt_f64(mle_group[k])).unwrap();
        writeln!(out, "mmse_{k}\t{}", fmt_f64(est.mmse[k])).unwrap();
        writeln!(out, "map_{k}\t{}", fmt_f64(est.map[k])).unwrap();
        writeln!(out, "batch_se_{k}\t{}", fmt_f64(diag.batch_se[k])).unwrap();
        writeln!(out, "tau_{k}\t{}", fmt_f64(diag.tau[k])).unwrap();
        writeln!(out, "ess_{k}\t{}", fmt_f64(diag.ess[k])).unwrap();
        writeln!(out, "acceptance_{k}\t{}", fmt_f64(chain.acceptance[k])).unwrap();
    }
    let path = out_path(config, &format!("estimates_{model_id}.tsv"));
    std::fs::write(&path, out)?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Score the whole family and write ranked reports. Returns the number of
/// failed models so the caller can signal a partial failure.
pub fn cmd_select(config: &RunConfig) -> Result<usize> {
    let inputs = load_inputs(config)?;
    let opts = selection_options(config);
    let mut provider = |h: usize, prior: &PriorSpec, init: &[f64]| {
        chain_for_model(config, &inputs, h, prior, init)
    };
    let report = run_selection_with(&inputs.sample, &inputs.family, &inputs.corr, &opts, &mut provider)?;

    std::fs::write(out_path(config, "selection.tsv"), report.to_tsv())?;
    std::fs::write(out_path(config, "selection.json"), report.to_json()?)?;
    let best = report.best();
    println!(
        "best model: {} {} with probability {:.4}",
        best.model_id, best.label, best.post_prob
    );
    for f in &report.failures {
        eprintln!("model {} failed: {}", f.model_id, f.message);
    }
    Ok(report.failures.len())
}

fn read_estimates(config: &RunConfig, model_id: &str) -> Result<Vec<f64>> {
    let path = out_path(config, &format!("estimates_{model_id}.tsv"));
    if !path.exists() {
        return Err(Error::data(format!(
            "no estimates for {model_id}; run `tcopula calibrate --model {model_id}` first"
        )));
    }
    let text = std::fs::read_to_string(&path)?;
    let mut values = Vec::new();
    for k in 0.. {
        let key = format!("mmse_{k}\t");
        match text.lines().find(|l| l.starts_with(&key)) {
            Some(line) => values.push(
                line[key.len()..]
                    .parse::<f64>()
                    .map_err(|_| Error::data(format!("bad value in {}", path.display())))?,
            ),
            None => break,
        }
    }
    if values.is_empty() {
        return Err(Error::data(format!("no estimates in {}", path.display())));
    }
    Ok(values)
}

/// Simulate pseudo-observations from a fitted model and write them out.
pub fn cmd_simulate(config: &RunConfig, model_id: &str, n_draws: usize) -> Result<()> {
    let inputs = load_inputs(config)?;
    let h = parse_model_id(&inputs.family, model_id)?;
    let group = inputs.family.model(h);
    let group_dof = read_estimates(config, model_id)?;
    let dof = DofVector::new(
        group.expand(&group_dof)?,
        config.prior.nu_min,
        config.prior.nu_max,
    )?;
    let draws = simulate(group, &dof, &inputs.corr, n_draws, config.seed)?;
    let rows: Vec<Vec<f64>> = (0..draws.n_obs()).map(|j| draws.row(j).to_vec()).collect();
    let path = out_path(config, &format!("simulated_{model_id}.tsv"));
    write_matrix(&path, &config.data.assets, &rows)?;
    println!("wrote {} draws to {}", n_draws, path.display());
    Ok(())
}

/// Analytic sanity check of the tail estimator with uniform losses.
pub fn cmd_cvar_self_test(config: &RunConfig) -> Result<()> {
    let n = config.risk.n_sims.max(100_000);
    let losses: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
    for &alpha in &config.risk.alpha {
        let est = cvar_from_losses(losses.clone(), alpha)?;
        println!(
            "uniform self-test alpha={alpha}: cvar={:.6} (expected {:.6}), se={:.2e}",
            est.cvar,
            0.5 * (1.0 + alpha),
            est.std_error
        );
    }
    Ok(())
}

/// Monte Carlo CVaR comparison of two fitted models across the configured
/// portfolios and levels.
pub fn cmd_cvar(config: &RunConfig, model_a: &str, model_b: &str) -> Result<()> {
    let inputs = load_inputs(config)?;
    let ha = parse_model_id(&inputs.family, model_a)?;
    let hb = parse_model_id(&inputs.family, model_b)?;
    let (lo, hi) = (config.prior.nu_min, config.prior.nu_max);
    let make = |h: usize, id: &str| -> Result<(GroupConfig, DofVector)> {
        let group = inputs.family.model(h).clone();
        let dof = DofVector::new(group.expand(&read_estimates(config, id)?)?, lo, hi)?;
        Ok((group, dof))
    };
    let (group_a, dof_a) = make(ha, model_a)?;
    let (group_b, dof_b) = make(hb, model_b)?;
    if config.risk.portfolios.is_empty() {
        return Err(Error::domain(
            "no portfolios configured; add [[risk.portfolios]] weights".to_string(),
        ));
    }

    let mut out = String::from(
        "portfolio\talpha\tcvar_a\tse_a\tcvar_b\tse_b\trelative_difference\trelative_se\n",
    );
    let mut pretty = format!(
        "CVaR comparison {model_a} vs {model_b} ({} sims)\n",
        config.risk.n_sims
    );
    for (pi, weights) in config.risk.portfolios.iter().enumerate() {
        let portfolio = Portfolio::new(weights.clone(), config.data.assets.clone())?;
        if portfolio.unnormalized {
            eprintln!("portfolio {pi}: weights do not sum to 1");
        }
        for &alpha in &config.risk.alpha {
            let cmp = compare_models(
                (&group_a, &dof_a),
                (&group_b, &dof_b),
                &inputs.corr,
                &portfolio,
                alpha,
                config.risk.n_sims,
                config.seed.wrapping_add(pi as u64),
                config.loss_form(),
            )?;
            writeln!(
                out,
                "{pi}\t{alpha}\t{}\t{}\t{}\t{}\t{}\t{}",
                fmt_f64(cmp.base.cvar),
                fmt_f64(cmp.base.std_error),
                fmt_f64(cmp.other.cvar),
                fmt_f64(cmp.other.std_error),
                fmt_f64(cmp.relative_difference),
                fmt_f64(cmp.relative_std_error)
            )
            .unwrap();
            writeln!(
                pretty,
                "portfolio {pi} alpha {alpha}: {:.4} ({:.4}) vs {:.4} ({:.4}), delta {:+.1}%",
                cmp.base.cvar,
                cmp.base.std_error,
                cmp.other.cvar,
                cmp.other.std_error,
                100.0 * cmp.relative_difference
            )
            .unwrap();
        }
    }
    let path = out_path(config, &format!("cvar_{model_a}_{model_b}.tsv"));
    std::fs::write(&path, out)?;
    print!("{pretty}");
    println!("wrote {}", path.display());
    Ok(())
}

/// Digest every artifact in the output directory into a MANIFEST.
pub fn cmd_report(config: &RunConfig) -> Result<()> {
    if !config.output_dir.exists() {
        return Err(Error::data(format!(
            "output directory {} does not exist",
            config.output_dir.display()
        )));
    }
    let n = write_manifest(&config.output_dir)?;
    println!(
        "wrote MANIFEST covering {n} artifacts in {}",
        config.output_dir.display()
    );
    Ok(())
}
