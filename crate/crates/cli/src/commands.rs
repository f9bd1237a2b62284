//! The four subcommands.

use std::path::Path;

use bjns::gibbs::{run_chain_observed, ChainConfig, PriorConfig, PriorOddsMode, ShrinkageHyper};
use bjns::inference::{kappa, majority_vote, state_selection, FitResult, SelectionTrace};
use bjns::model::edges;
use bjns::screening::{iterative_reduce, PruneRule, ScreenConfig, ScreenReport};
use bjns::synthetic::{ar2_chain_k4, gen_block_k6, gen_random_shared, sample_groups, score_all, GroundTruth};
use bjns::{compute_group_stats, BjnsError, Component, GroupStats, ModelSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::args::{ChainArgs, Design, FitArgs, Rule, ScoreArgs, ScreenArgs, SimulateArgs, TraceMode};
use crate::error::{CliError, Result};
use crate::io::{
    self, csv_writer, ensure_dir, finish, load_manifest, num, read_json, write_json, write_row, Dataset, Manifest,
    ManifestGroup,
};

/// Settings echoed into fit.json.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub seed: u64,
    pub burnin: usize,
    pub samples: usize,
    pub prior_odds: PriorOddsMode,
    pub diag_sampler: String,
    pub center: bool,
    pub prior: PriorConfig,
    pub hyper: ShrinkageHyper,
}

/// Contents of fit.json.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitFile {
    pub groups: Vec<String>,
    pub variables: Vec<String>,
    pub settings: RunSettings,
    pub fit: FitResult,
}

fn chain_config(args: &ChainArgs) -> ChainConfig {
    ChainConfig {
        burnin: args.burnin,
        samples: args.samples,
        seed: args.seed,
        diag_sampler: args.diag_sampler.into(),
        ..ChainConfig::default()
    }
}

fn diag_name(args: &ChainArgs) -> String {
    format!("{:?}", args.diag_sampler).to_lowercase()
}

fn resolve_spec(spec: &str, groups: usize) -> Result<ModelSpec> {
    if spec == "full" {
        return Ok(ModelSpec::full(groups)?);
    }
    let parsed: ModelSpec = read_json(Path::new(spec))?;
    if parsed.groups() != groups {
        return Err(CliError::input(format!(
            "{spec}: spec is for {} groups, the manifest lists {groups}",
            parsed.groups()
        )));
    }
    Ok(parsed)
}

fn load_truth(path: &Path, p: usize, groups: usize) -> Result<GroundTruth> {
    let truth: GroundTruth = read_json(path)?;
    if truth.p() != p || truth.spec().groups() != groups {
        return Err(CliError::input(format!(
            "{}: truth has p={} and {} groups, expected p={p} and {groups}",
            path.display(),
            truth.p(),
            truth.spec().groups()
        )));
    }
    Ok(truth)
}

fn stats_of(data: &Dataset) -> Result<GroupStats> {
    Ok(compute_group_stats(&data.data, data.center)?)
}

pub fn fit(args: &FitArgs) -> Result<()> {
    let data = load_manifest(&args.manifest)?;
    let stats = stats_of(&data)?;
    let spec = resolve_spec(&args.spec, stats.groups())?;
    let truth = args
        .truth
        .as_deref()
        .map(|t| load_truth(t, stats.p(), stats.groups()))
        .transpose()?;
    let cfg = chain_config(&args.chain);
    let hyper = ShrinkageHyper::default();
    let prior = PriorConfig::defaults_for(stats.p(), stats.mean_n(), args.prior_odds.into());
    ensure_dir(&args.out)?;

    let trace_path = args.out.join("trace.csv");
    let mut trace_out = match args.trace {
        TraceMode::None => None,
        _ => {
            let mut w = csv_writer(&trace_path)?;
            write_row(&mut w, &trace_path, ["sweep", "i", "j", "component_index", "value"])?;
            Some(w)
        }
    };
    let kappa_path = args.out.join("kappa_or_stability.csv");
    let truth_sel = truth.as_ref().map(GroundTruth::selection);
    let mut kappas: Vec<(usize, bool, f64)> = Vec::new();
    let mut failure: Option<CliError> = None;
    let full = args.trace == TraceMode::Full;
    let mut retained = 0usize;

    let output = run_chain_observed(&stats, &spec, &cfg, &hyper, &prior, None, &mut |info, state| {
        if let Some(t) = &truth_sel {
            let k = kappa(&state_selection(&state.theta, &spec), t)?;
            kappas.push((info.sweep + 1, info.retained, k));
        }
        if !info.retained {
            return Ok(());
        }
        retained += 1;
        if let Some(w) = trace_out.as_mut() {
            let sweep = retained.to_string();
            for ((i, j), c) in edges(stats.p()).zip(state.theta.as_slice()) {
                if !full && c.component.is_none() {
                    continue;
                }
                let comp = c.component.map_or("-1".to_string(), |l| l.to_string());
                let fields = [sweep.clone(), (i + 1).to_string(), (j + 1).to_string(), comp, num(c.value)];
                if let Err(e) = write_row(w, &trace_path, fields.iter().map(String::as_str)) {
                    failure = Some(e);
                    return Err(BjnsError::InvalidArgument("trace output failed".into()));
                }
            }
        }
        Ok(())
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let output = output?;
    if let Some(w) = trace_out {
        finish(w, &trace_path)?;
    }

    let fit = majority_vote(&output.trace, &spec)?;
    let settings = RunSettings {
        seed: cfg.seed,
        burnin: cfg.burnin,
        samples: cfg.samples,
        prior_odds: prior.mode,
        diag_sampler: diag_name(&args.chain),
        center: data.center,
        prior,
        hyper,
    };
    write_fit_outputs(&args.out, &data, settings, &fit)?;
    match truth_sel {
        Some(_) => write_kappa(&kappa_path, &kappas),
        None => write_stability(&kappa_path, &output.trace, &fit),
    }
}

fn write_fit_outputs(out: &Path, data: &Dataset, settings: RunSettings, fit: &FitResult) -> Result<()> {
    let file = FitFile {
        groups: data.names.clone(),
        variables: data.variables.clone(),
        settings,
        fit: fit.clone(),
    };
    write_json(&out.join("fit.json"), &file)?;
    let path = out.join("edges_by_component.csv");
    let mut w = csv_writer(&path)?;
    write_row(&mut w, &path, ["component", "i", "j", "freq", "est", "ci_lo", "ci_hi"])?;
    for &comp in fit.spec.components() {
        for rec in fit.edges.iter().filter(|r| r.selected() == Some(comp)) {
            let (lo, hi) = rec.ci.map_or((String::new(), String::new()), |[a, b]| (num(a), num(b)));
            let fields = [comp.tag(), rec.i.to_string(), rec.j.to_string(), num(rec.freq), num(rec.est), lo, hi];
            write_row(&mut w, &path, fields.iter().map(String::as_str))?;
        }
    }
    finish(w, &path)
}

fn write_kappa(path: &Path, kappas: &[(usize, bool, f64)]) -> Result<()> {
    let mut w = csv_writer(path)?;
    write_row(&mut w, path, ["sweep", "retained", "kappa"])?;
    for &(sweep, retained, k) in kappas {
        let fields = [sweep.to_string(), u8::from(retained).to_string(), num(k)];
        write_row(&mut w, path, fields.iter().map(String::as_str))?;
    }
    finish(w, path)
}

/// Frequency of each edge's selected category in the two halves of the trace.
fn write_stability(path: &Path, trace: &SelectionTrace, fit: &FitResult) -> Result<()> {
    let mut w = csv_writer(path)?;
    write_row(&mut w, path, ["i", "j", "component", "freq_first_half", "freq_second_half", "abs_diff"])?;
    let first_len = trace.first_half_len();
    let second_len = trace.retained() - first_len;
    for (e, rec) in fit.edges.iter().enumerate() {
        let cat = rec.selected().and_then(|c| fit.spec.index_of(c)).map_or(0, |l| l + 1);
        let first = trace.first_half_counts(e)[cat] as f64;
        let second = trace.counts(e)[cat] as f64 - first;
        let f1 = if first_len == 0 { 0.0 } else { first / first_len as f64 };
        let f2 = if second_len == 0 { 0.0 } else { second / second_len as f64 };
        let label = rec.selected().map_or("none".to_string(), Component::tag);
        let fields = [rec.i.to_string(), rec.j.to_string(), label, num(f1), num(f2), num((f1 - f2).abs())];
        write_row(&mut w, path, fields.iter().map(String::as_str))?;
    }
    finish(w, path)
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let truth = match args.design {
        Design::Ar2ChainK4 => ar2_chain_k4(args.p, &mut rng)?,
        Design::RandomSharedK4 => gen_random_shared(args.p, args.sparsity, args.shared_fraction, 4, &mut rng)?,
        Design::BlockK6 => gen_block_k6(args.p, &mut rng)?,
    };
    let groups = truth.spec().groups();
    let data = sample_groups(&truth, &vec![args.n; groups], &mut rng)?;
    ensure_dir(&args.out)?;
    let header: Vec<String> = (1..=args.p).map(|i| format!("V{i}")).collect();
    let mut entries = Vec::new();
    for (k, y) in data.iter().enumerate() {
        let name = format!("group{}", k + 1);
        let file = format!("{name}.csv");
        io::write_matrix_csv(&args.out.join(&file), &header, y)?;
        entries.push(ManifestGroup {
            name,
            path: file.into(),
        });
    }
    // the generated data has mean zero
    let manifest = Manifest {
        groups: entries,
        center: false,
    };
    write_json(&args.out.join("manifest.json"), &manifest)?;
    write_json(&args.out.join("truth.json"), &truth)?;
    let path = args.out.join("truth_edges.csv");
    let mut w = csv_writer(&path)?;
    write_row(&mut w, &path, ["component", "i", "j", "value"])?;
    for &comp in truth.spec().components() {
        let idx = truth.spec().index_of(comp).expect("own component");
        for ((i, j), c) in edges(truth.p()).zip(truth.theta().as_slice()) {
            if c.component == Some(idx) {
                let fields = [comp.tag(), (i + 1).to_string(), (j + 1).to_string(), num(c.value)];
                write_row(&mut w, &path, fields.iter().map(String::as_str))?;
            }
        }
    }
    finish(w, &path)
}

pub fn screen(args: &ScreenArgs) -> Result<()> {
    let data = load_manifest(&args.manifest)?;
    let stats = stats_of(&data)?;
    let mut cfg = ScreenConfig::with_seed(args.chain.seed);
    cfg.pairwise.burnin = args.pairwise_burnin;
    cfg.pairwise.samples = args.pairwise_samples;
    cfg.pairwise.diag_sampler = args.chain.diag_sampler.into();
    cfg.reduced = chain_config(&args.chain);
    cfg.prior_mode = args.prior_odds.into();
    cfg.rule = match args.rule {
        Rule::Relative => PruneRule::Relative { alpha: args.alpha },
        Rule::TwoMeans => PruneRule::TwoMeans,
    };
    cfg.max_rounds = args.max_rounds;
    cfg.jobs = args.jobs;
    let (fit, report) = iterative_reduce(&stats, &cfg)?;
    ensure_dir(&args.out)?;
    write_json(&args.out.join("screen_report.json"), &report)?;
    write_barplot(&args.out.join("barplot.csv"), &report)?;
    write_json(&args.out.join("final_spec.json"), &fit.spec)?;
    let settings = RunSettings {
        seed: cfg.reduced.seed,
        burnin: cfg.reduced.burnin,
        samples: cfg.reduced.samples,
        prior_odds: cfg.prior_mode,
        diag_sampler: diag_name(&args.chain),
        center: data.center,
        prior: PriorConfig::defaults_for(stats.p(), stats.mean_n(), cfg.prior_mode),
        hyper: cfg.hyper,
    };
    write_fit_outputs(&args.out, &data, settings, &fit)
}

fn write_barplot(path: &Path, report: &ScreenReport) -> Result<()> {
    let mut w = csv_writer(path)?;
    write_row(&mut w, path, ["stage", "component", "edge_count", "active"])?;
    for e in &report.entries {
        let fields = [
            String::from(e.stage),
            e.component().tag(),
            e.edge_count.to_string(),
            u8::from(e.active).to_string(),
        ];
        write_row(&mut w, path, fields.iter().map(String::as_str))?;
    }
    finish(w, path)
}

pub fn score(args: &ScoreArgs) -> Result<()> {
    let file: FitFile = read_json(&args.fit)?;
    file.fit.validate()?;
    let truth = load_truth(&args.truth, file.fit.p, file.fit.spec.groups())?;
    let rows = score_all(&file.fit.selection(), &truth.selection(), truth.spec())?;
    let mut out: csv::Writer<Box<dyn std::io::Write>> = match &args.out {
        Some(path) => csv::Writer::from_writer(Box::new(std::io::BufWriter::new(
            std::fs::File::create(path).map_err(|e| CliError::io(path, e))?,
        ))),
        None => csv::Writer::from_writer(Box::new(std::io::stdout())),
    };
    let label = args.out.as_deref().unwrap_or(Path::new("<stdout>")).to_path_buf();
    let csv_err = |e: csv::Error| CliError::Csv {
        path: label.clone(),
        message: e.to_string(),
    };
    out.write_record(["target", "MC%", "SP%", "SE%", "TP", "TN", "FP", "FN"]).map_err(csv_err)?;
    for (target, m) in rows {
        out.write_record([
            target.label(),
            num(100.0 * m.mcc),
            num(100.0 * m.sp),
            num(100.0 * m.se),
            m.tp.to_string(),
            m.tn.to_string(),
            m.fp.to_string(),
            m.fn_.to_string(),
        ])
        .map_err(csv_err)?;
    }
    out.flush().map_err(|e| CliError::io(&label, e))
}
