use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dart2::sim::{
    eta_field, frozen_locations, run_replications, Coefficients, Procedure, ReplicationRow,
    Setting, SimScenario, TreeSpec, CENTERS,
};
use dart2::{
    bh_procedure, build_tree_from_distances, build_tree_from_ordering, dart2, max_layers,
    pvalue_to_z, summarize, Dart2Config, LayerAlphaRule, PValueVector, RefineMode, RejectionReport,
    StatisticVector,
};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::io::{
    ensure_dir, read_distances, read_locations, read_per_hypothesis, read_tree, write_csv,
    write_json, TreeFile,
};

#[derive(Debug, Parser)]
#[command(
    name = "dart2",
    version,
    about = "Two-stage multiple testing on aggregation trees"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an aggregation tree from distances or an ordering.
    Tree(TreeArgs),
    /// Run the procedure on one vector of statistics or p-values.
    Test(TestArgs),
    /// Run the synthetic replication study.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct TreeArgs {
    /// m × m distance matrix CSV (header row, then m rows).
    #[arg(
        long,
        conflicts_with = "ordering",
        required_unless_present = "ordering"
    )]
    pub distances: Option<PathBuf>,
    /// hypothesis_id,rank CSV.
    #[arg(long)]
    pub ordering: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub max_children: usize,
    #[arg(long, conflicts_with = "cm", required_unless_present = "cm")]
    pub layers: Option<usize>,
    /// Pick L so the top layer keeps at least this many nodes.
    #[arg(long)]
    pub cm: Option<usize>,
    /// Merge thresholds g2,g3,... (distances only).
    #[arg(long, value_delimiter = ',', conflicts_with = "ordering")]
    pub thresholds: Option<Vec<f64>>,
    /// Tree file to write; a manifest is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Naive,
    Robust,
}

impl From<ModeArg> for RefineMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Naive => RefineMode::Naive,
            ModeArg::Robust => RefineMode::Robust,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerAlphaArg {
    Scaled,
    Constant,
}

impl From<LayerAlphaArg> for LayerAlphaRule {
    fn from(r: LayerAlphaArg) -> Self {
        match r {
            LayerAlphaArg::Scaled => LayerAlphaRule::Scaled,
            LayerAlphaArg::Constant => LayerAlphaRule::Constant,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    Bh,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// hypothesis_id,z CSV of z statistics.
    #[arg(long, conflicts_with = "pvalues", required_unless_present = "pvalues")]
    pub stats: Option<PathBuf>,
    /// hypothesis_id,p CSV of one-sided p-values.
    #[arg(long)]
    pub pvalues: Option<PathBuf>,
    #[arg(long)]
    pub tree: PathBuf,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Robust)]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value_t = LayerAlphaArg::Scaled)]
    pub layer_alpha: LayerAlphaArg,
    #[arg(long, value_enum)]
    pub baseline: Option<Baseline>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SettingArg {
    Se1,
    Se2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CoeffsArg {
    Main,
    Appendix,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = SettingArg::Se1)]
    pub setting: SettingArg,
    #[arg(long, value_delimiter = ',', default_value = "0,0.2,0.4,0.6,0.8,1")]
    pub tau: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.05")]
    pub alpha: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = CoeffsArg::Main)]
    pub coeffs: CoeffsArg,
    /// Tree depths to run, one DART2 procedure each.
    #[arg(long, value_delimiter = ',', default_value = "7")]
    pub layers: Vec<usize>,
    #[arg(long, value_enum, default_value_t = ModeArg::Robust)]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value_t = LayerAlphaArg::Scaled)]
    pub layer_alpha: LayerAlphaArg,
    /// Skip the BH baseline.
    #[arg(long)]
    pub no_bh: bool,
    /// Observations per hypothesis.
    #[arg(long, default_value_t = 300)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub max_children: usize,
    /// Merge thresholds g2,g3,...; defaults are data-driven.
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
    /// x,y CSV replacing the bundled locations.
    #[arg(long)]
    pub locations: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub version: String,
    pub seed: Option<u64>,
    pub inputs: Vec<PathBuf>,
    pub config: serde_json::Value,
    pub outputs: Vec<PathBuf>,
    pub elapsed_seconds: f64,
}

impl RunManifest {
    fn new(
        command: &str,
        seed: Option<u64>,
        inputs: Vec<PathBuf>,
        config: serde_json::Value,
    ) -> Self {
        Self {
            command: command.to_string(),
            argv: std::env::args().collect(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            inputs,
            config,
            outputs: Vec::new(),
            elapsed_seconds: 0.0,
        }
    }

    fn finish(mut self, path: &Path, started: Instant) -> CliResult<()> {
        self.elapsed_seconds = started.elapsed().as_secs_f64();
        for out in &self.outputs {
            if !out.exists() {
                return Err(CliError::Core(dart2::Error::Invariant(format!(
                    "declared output {} was not written",
                    out.display()
                ))));
            }
        }
        write_json(path, &self)
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Tree(a) => cmd_tree(&a),
        Command::Test(a) => cmd_test(&a),
        Command::Simulate(a) => cmd_simulate(&a),
    }
}

pub fn cmd_tree(args: &TreeArgs) -> CliResult<()> {
    let started = Instant::now();
    let (tree, input) = if let Some(path) = &args.ordering {
        let ranks: Vec<usize> = read_per_hypothesis(path, "a positive integer rank")?;
        let layers = resolve_layers(args, ranks.len())?;
        (
            build_tree_from_ordering(&ranks, args.max_children, layers)?,
            path.clone(),
        )
    } else {
        let path = args.distances.as_ref().expect("clap requires one input");
        let d = read_distances(path)?;
        let layers = resolve_layers(args, d.m())?;
        let tree =
            build_tree_from_distances(&d, args.max_children, layers, args.thresholds.as_deref())?;
        (tree, path.clone())
    };
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    write_json(&args.out, &TreeFile::from_tree(&tree))?;

    let config = serde_json::json!({
        "max_children": args.max_children,
        "layers": tree.num_layers(),
        "cm": args.cm,
        "thresholds": args.thresholds,
    });
    let mut manifest = RunManifest::new("tree", None, vec![input], config);
    manifest.outputs.push(args.out.clone());
    let manifest_path = sibling_manifest(&args.out);
    println!(
        "wrote {} ({} hypotheses, {} layers)",
        args.out.display(),
        tree.m(),
        tree.num_layers()
    );
    manifest.finish(&manifest_path, started)
}

fn resolve_layers(args: &TreeArgs, m: usize) -> CliResult<usize> {
    match (args.layers, args.cm) {
        (Some(l), _) => Ok(l),
        (None, Some(cm)) => Ok(max_layers(m, args.max_children, cm)?),
        (None, None) => Err(CliError::Usage(
            "one of --layers or --cm is required".into(),
        )),
    }
}

fn sibling_manifest(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "tree".into());
    out.with_file_name(format!("{stem}.manifest.json"))
}

#[derive(Debug, Serialize)]
struct NodeOut {
    node: usize,
    members: Vec<usize>,
    node_statistic: f64,
    naive_threshold: f64,
    floored_threshold: f64,
    max_statistic: f64,
    threshold: f64,
    rejected: Vec<usize>,
}

#[derive(Debug, Serialize)]
struct LayerOut {
    layer: usize,
    alpha_level: f64,
    threshold: Option<f64>,
    qualified: usize,
    screened: Vec<NodeOut>,
}

#[derive(Debug, Serialize)]
struct ReportOut {
    m: usize,
    alpha: f64,
    mode: RefineMode,
    layer_alpha: LayerAlphaRule,
    rejected: Vec<usize>,
    layers: Vec<LayerOut>,
    bh_rejected: Option<Vec<usize>>,
}

fn one_based(v: impl IntoIterator<Item = usize>) -> Vec<usize> {
    v.into_iter().map(|i| i + 1).collect()
}

fn report_out(report: &RejectionReport, cfg: &Dart2Config, bh: Option<Vec<usize>>) -> ReportOut {
    ReportOut {
        m: report.m,
        alpha: cfg.alpha(),
        mode: report.mode,
        layer_alpha: cfg.layer_alpha_rule,
        rejected: one_based(report.rejected().iter().copied()),
        layers: report
            .layers
            .iter()
            .map(|l| LayerOut {
                layer: l.layer,
                alpha_level: l.alpha_level,
                threshold: l.threshold,
                qualified: l.qualified,
                screened: l
                    .screened
                    .iter()
                    .map(|r| NodeOut {
                        node: r.node + 1,
                        members: one_based(r.members.iter().copied()),
                        node_statistic: r.node_statistic,
                        naive_threshold: r.naive_threshold,
                        floored_threshold: r.floored_threshold,
                        max_statistic: r.max_statistic,
                        threshold: r.threshold,
                        rejected: one_based(r.rejected.iter().copied()),
                    })
                    .collect(),
            })
            .collect(),
        bh_rejected: bh,
    }
}

pub fn cmd_test(args: &TestArgs) -> CliResult<()> {
    let started = Instant::now();
    let cfg = Dart2Config::new(args.alpha)?
        .with_mode(args.mode.into())
        .with_layer_alpha_rule(args.layer_alpha.into());
    let (stats, pvalues, input) = match (&args.stats, &args.pvalues) {
        (Some(path), _) => {
            let z = StatisticVector::new(read_per_hypothesis(path, "a number")?)?;
            let p = z.to_pvalues();
            (z, p, path.clone())
        }
        (None, Some(path)) => {
            let p = PValueVector::new(read_per_hypothesis(path, "a number")?)?;
            (pvalue_to_z(&p)?, p, path.clone())
        }
        (None, None) => {
            return Err(CliError::Usage(
                "one of --stats or --pvalues is required".into(),
            ))
        }
    };
    let tree = read_tree(&args.tree)?;
    let report = dart2(&stats, &tree, &cfg)?;
    let out = ensure_dir(&args.out)?;

    let rejections = out.join("rejections.csv");
    write_csv(
        &rejections,
        &["hypothesis_id", "rejected_at_layer", "node_id", "threshold"],
        report.rejected().iter().map(|&i| {
            let p = report
                .provenance(i)
                .expect("rejected hypotheses carry provenance");
            vec![
                (i + 1).to_string(),
                p.layer.to_string(),
                (p.node + 1).to_string(),
                p.threshold.to_string(),
            ]
        }),
    )?;
    let mut outputs = vec![rejections];

    let bh = match args.baseline {
        Some(Baseline::Bh) => {
            let set = bh_procedure(&pvalues, cfg.alpha())?;
            let path = out.join("bh_rejections.csv");
            write_csv(
                &path,
                &["hypothesis_id", "p_value"],
                set.iter()
                    .map(|&i| vec![(i + 1).to_string(), pvalues.values()[i].to_string()]),
            )?;
            outputs.push(path);
            Some(one_based(set))
        }
        None => None,
    };

    let report_path = out.join("report.json");
    write_json(&report_path, &report_out(&report, &cfg, bh.clone()))?;
    outputs.push(report_path);

    let config = serde_json::json!({
        "alpha": cfg.alpha(),
        "mode": cfg.mode,
        "layer_alpha": cfg.layer_alpha_rule,
        "baseline": args.baseline,
        "m": tree.m(),
        "layers": tree.num_layers(),
    });
    let mut manifest = RunManifest::new("test", None, vec![input, args.tree.clone()], config);
    manifest.outputs = outputs;
    match &bh {
        Some(b) => println!("{} rejections ({} by BH)", report.rejected().len(), b.len()),
        None => println!("{} rejections", report.rejected().len()),
    }
    manifest.finish(&out.join("manifest.json"), started)
}

fn procedures(args: &SimulateArgs) -> Vec<Procedure> {
    let mut procs: Vec<Procedure> = args
        .layers
        .iter()
        .map(|&layers| Procedure::Dart2 {
            layers,
            mode: args.mode.into(),
            layer_alpha_rule: args.layer_alpha.into(),
        })
        .collect();
    if !args.no_bh {
        procs.push(Procedure::Bh);
    }
    procs
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<()> {
    let started = Instant::now();
    let (locations, inputs) = match &args.locations {
        Some(path) => (read_locations(path)?, vec![path.clone()]),
        None => (frozen_locations(), Vec::new()),
    };
    let coeffs = match args.coeffs {
        CoeffsArg::Main => Coefficients::MAIN,
        CoeffsArg::Appendix => Coefficients::APPENDIX,
    };
    let scenario = SimScenario {
        field: eta_field(&locations, coeffs, CENTERS)?,
        taus: args.tau.clone(),
        setting: match args.setting {
            SettingArg::Se1 => Setting::Se1,
            SettingArg::Se2 => Setting::Se2,
        },
        n: args.n,
        alphas: args.alpha.clone(),
        reps: args.reps,
        seed: args.seed,
    };
    scenario.validate()?;
    let procs = procedures(args);
    let spec = TreeSpec {
        max_children: args.max_children,
        thresholds: args.thresholds.clone(),
    };

    let rows = match args.threads {
        Some(0) => return Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))?
            .install(|| run_replications(&scenario, &procs, &spec))?,
        None => run_replications(&scenario, &procs, &spec)?,
    };

    let out = ensure_dir(&args.out)?;
    let results = out.join("results.csv");
    write_csv(
        &results,
        &["rep", "procedure", "alpha", "tau", "fdp", "sensitivity"],
        rows.iter().map(|r| {
            vec![
                (r.rep + 1).to_string(),
                r.procedure.clone(),
                r.alpha.to_string(),
                r.tau.to_string(),
                r.fdp.to_string(),
                r.sensitivity.to_string(),
            ]
        }),
    )?;
    let summary = out.join("summary.csv");
    write_csv(
        &summary,
        &[
            "procedure",
            "alpha",
            "tau",
            "reps",
            "fdr",
            "fdp_q05",
            "fdp_q95",
            "sensitivity",
            "sensitivity_q05",
            "sensitivity_q95",
        ],
        summary_rows(&rows)?,
    )?;

    let mut config = serde_json::to_value(args).expect("serializable");
    config["procedures"] = serde_json::to_value(&procs).expect("serializable");
    config["alternatives"] = scenario.field.alternatives().len().into();
    let mut manifest = RunManifest::new("simulate", Some(args.seed), inputs, config);
    manifest.outputs = vec![results, summary];
    println!(
        "{} rows for {} procedures, {} tau values, {} repetitions",
        rows.len(),
        procs.len(),
        args.tau.len(),
        args.reps
    );
    manifest.finish(&out.join("manifest.json"), started)
}

/// One line per (procedure, α, τ), in first-appearance order.
fn summary_rows(rows: &[ReplicationRow]) -> CliResult<Vec<Vec<String>>> {
    // (procedure, α bits, τ bits)
    type Key = (String, u64, u64);
    let mut order: Vec<Key> = Vec::new();
    let mut groups: BTreeMap<Key, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in rows {
        let key = (r.procedure.clone(), r.alpha.to_bits(), r.tau.to_bits());
        let entry = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            (Vec::new(), Vec::new())
        });
        entry.0.push(r.fdp);
        entry.1.push(r.sensitivity);
    }
    order
        .into_iter()
        .map(|key| {
            let (f, s) = &groups[&key];
            let f = summarize(f)?;
            let s = summarize(s)?;
            Ok(vec![
                key.0,
                f64::from_bits(key.1).to_string(),
                f64::from_bits(key.2).to_string(),
                f.count.to_string(),
                f.mean.to_string(),
                f.q05.to_string(),
                f.q95.to_string(),
                s.mean.to_string(),
                s.q05.to_string(),
                s.q95.to_string(),
            ])
        })
        .collect()
}
