//! The four subcommands as library functions.

use std::path::{Path, PathBuf};
use std::thread;

use bhmc_core::evaluation::{level_report, LevelReport};
use bhmc_core::model::{complete_data_log_likelihood, generate};
use bhmc_core::{Dataset, MixingMode, Rng, Sampler, State, Trace};

use crate::config::{HyperparamsConfig, RunConfig};
use crate::dot::to_dot;
use crate::error::{CliError, Result};
use crate::export::TreeExport;
use crate::io::{load_csv, read_file, write_csv, write_file};
use crate::pca::{pca_reduce, standardize};

/// Parse `infinite` or `finite:K`.
pub fn parse_mode(s: &str) -> Result<MixingMode> {
    match s.split_once(':') {
        None if s == "infinite" => Ok(MixingMode::Infinite),
        Some(("finite", k)) => match k.parse::<usize>() {
            Ok(k) if k > 0 => Ok(MixingMode::Finite(k)),
            _ => Err(CliError::Config(format!("bad component count in mode {s:?}"))),
        },
        _ => Err(CliError::Config(format!("unknown mode {s:?}; expected infinite or finite:K"))),
    }
}

/// Load, optionally standardise and reduce the data named by `cfg`.
pub fn prepare_data(cfg: &RunConfig) -> Result<Dataset> {
    let mut data = load_csv(&cfg.input, cfg.has_header)?;
    if cfg.standardize {
        data = standardize(&data)?;
    }
    if let Some(k) = cfg.pca_dim {
        if k > data.dim() {
            return Err(CliError::Config(format!("pca_dim {k} exceeds data dimension {}", data.dim())));
        }
        data = pca_reduce(&data, k)?;
    }
    Ok(data)
}

pub fn trace_csv(trace: &Trace) -> String {
    let mut out = String::from("iter,loglik,K,nodes,path_accepts,hyper_accept\n");
    for i in 0..trace.len() {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            trace.iterations[i],
            trace.log_likelihood[i],
            trace.components[i],
            trace.nodes[i],
            trace.path_accepts[i],
            u8::from(trace.hyper_accepts[i]),
        ));
    }
    out
}

pub fn metrics_csv(report: &LevelReport) -> String {
    let mut out = String::from("level,purity,nmi,ari,f_measure\n");
    for m in &report.levels {
        out.push_str(&format!("{},{},{},{},{}\n", m.level, m.purity, m.nmi, m.ari, m.f_measure));
    }
    out
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|source| CliError::Json { path: path.to_owned(), source })?;
    s.push('\n');
    write_file(path, s.as_bytes())
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Write { path: dir.to_owned(), source })
}

/// Result of a fit: the best state over all chains and that chain's trace.
#[derive(Debug)]
pub struct FitOutcome {
    pub state: State,
    pub log_likelihood: f64,
    pub chain: usize,
    pub trace: Trace,
    pub export: TreeExport,
    pub report: Option<LevelReport>,
}

/// Run `cfg.chains` independent chains, one thread each, on separate
/// streams of the configured seed; keep the best by complete-data log
/// likelihood.
pub fn run_chains(data: Dataset, cfg: &RunConfig) -> Result<(usize, State, f64, Trace)> {
    let hp = cfg.hyperparams.resolve(data.dim())?;
    let seed = cfg.sampler.seed;
    let results: Vec<Result<(State, f64, Trace)>> = thread::scope(|scope| {
        let handles: Vec<_> = (0..cfg.chains)
            .map(|c| {
                let data = data.clone();
                let hp = &hp;
                let sampler_cfg = cfg.sampler.clone();
                scope.spawn(move || -> Result<(State, f64, Trace)> {
                    let sampler = Sampler::with_rng(data, hp, sampler_cfg, Rng::with_stream(seed, c as u64))?;
                    let (state, trace) = sampler.run()?;
                    let ll = complete_data_log_likelihood(&state)?;
                    Ok((state, ll, trace))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap_or(Err(CliError::Chain))).collect()
    });
    let mut best: Option<(usize, State, f64, Trace)> = None;
    for (c, r) in results.into_iter().enumerate() {
        let (state, ll, trace) = r?;
        if best.as_ref().is_none_or(|b| ll > b.2) {
            best = Some((c, state, ll, trace));
        }
    }
    Ok(best.expect("at least one chain"))
}

/// `fit`: writes `tree.json`, `trace.csv` and, given a truth export,
/// `metrics.json` into the output directory.
pub fn cmd_fit(cfg: &RunConfig) -> Result<FitOutcome> {
    cfg.validate()?;
    let data = prepare_data(cfg)?;
    let truth = cfg.truth.as_deref().map(TreeExport::load).transpose()?;
    let (chain, state, log_likelihood, trace) = run_chains(data, cfg)?;
    let export = TreeExport::from_state(&state, cfg.top_components, log_likelihood)?;
    create_dir(&cfg.output_dir)?;
    export.save(&cfg.output_dir.join("tree.json"))?;
    write_file(&cfg.output_dir.join("trace.csv"), trace_csv(&trace).as_bytes())?;
    let report = match truth {
        Some(truth) => {
            let levels = cfg.eval_levels.unwrap_or(state.hp.levels + 1);
            let report = level_report(&export.paths, &truth.paths, levels)?;
            write_json(&cfg.output_dir.join("metrics.json"), &report)?;
            Some(report)
        }
        None => None,
    };
    Ok(FitOutcome { state, log_likelihood, chain, trace, export, report })
}

#[derive(Clone, Debug)]
pub struct GenerateArgs {
    pub n: usize,
    pub mode: MixingMode,
    pub seed: u64,
    pub out: PathBuf,
    pub dim: usize,
    pub hyperparams: HyperparamsConfig,
    pub top_components: usize,
}

/// `generate`: writes `data.csv` and `truth.json` drawn from the model.
pub fn cmd_generate(args: &GenerateArgs) -> Result<TreeExport> {
    let hp = args.hyperparams.resolve(args.dim)?;
    let g = generate(args.n, &hp, args.mode, &mut Rng::new(args.seed))?;
    let ll = complete_data_log_likelihood(&g.state)?;
    let export = TreeExport::from_state(&g.state, args.top_components, ll)?;
    create_dir(&args.out)?;
    write_csv(&args.out.join("data.csv"), &g.state.data)?;
    export.save(&args.out.join("truth.json"))?;
    Ok(export)
}

/// `eval`: level-wise metrics of `pred` against `truth`, written as
/// `metrics.json` and `metrics.csv` into `out`.
pub fn cmd_eval(pred: &Path, truth: &Path, levels: usize, out: &Path) -> Result<LevelReport> {
    let pred = TreeExport::load(pred)?;
    let truth = TreeExport::load(truth)?;
    let report = level_report(&pred.paths, &truth.paths, levels)?;
    create_dir(out)?;
    write_json(&out.join("metrics.json"), &report)?;
    write_file(&out.join("metrics.csv"), metrics_csv(&report).as_bytes())?;
    Ok(report)
}

/// `export-dot`: DOT text for a tree export.
pub fn cmd_export_dot(tree: &Path) -> Result<String> {
    let text = read_file(tree)?;
    Ok(to_dot(&TreeExport::from_json(&text, tree)?))
}
