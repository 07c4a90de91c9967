use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fernn_core::data::{
    gen_cct, gen_interval, gen_step_threshold, label_continuous, load_csv, reverse, write_csv, CctParams,
    StepThresholdParams,
};
use fernn_core::enumerate::{self, EnumConfig};
use fernn_core::fernn::{
    build_fixed_length, build_interval, build_up_to_length, extract_nnf, BuildOptions, Checkpoint, Head,
    IntervalKind,
};
use fernn_core::stl::{final_robustness, format_with_features, parse_with_features, sign};
use fernn_core::train::{evaluate_mcr, fit, TrainConfig, TrainReport};
use fernn_core::{Dataset, Formula, LabelKind, ModelSpec};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "fernn", version, about = "Learn past-time STL classifiers from labelled traces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset as CSV
    GenData(GenDataArgs),
    /// Train a formula network and report the extracted formula
    Train(TrainArgs),
    /// Grid-search formulas up to a length
    Enumerate(EnumArgs),
    /// Final robustness of a formula on every trace
    Monitor(FormulaArgs),
    /// Misclassification rate of a formula
    Eval(FormulaArgs),
    /// Summarize a saved checkpoint
    Inspect(InspectArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DataKind {
    StepThreshold,
    Cct,
    Interval,
}

#[derive(Args)]
struct GenDataArgs {
    kind: DataKind,
    /// number of traces
    #[arg(long)]
    n: Option<usize>,
    /// trace length (ignored for interval data, which is always 7 steps)
    #[arg(long = "T")]
    len: Option<usize>,
    #[arg(long)]
    seed: u64,
    /// positive-class level (step-threshold)
    #[arg(long, allow_negative_numbers = true)]
    c_pos: Option<f64>,
    /// negative-class level (step-threshold)
    #[arg(long, allow_negative_numbers = true)]
    c_neg: Option<f64>,
    /// noise amplitude (step-threshold)
    #[arg(long)]
    noise: Option<f64>,
    /// output CSV; standard output when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum IntervalArg {
    Once,
    Hist,
}

#[derive(Clone, Copy, ValueEnum)]
enum HeadArg {
    Tanh,
    Identity,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// fixed formula length
    #[arg(long, conflicts_with_all = ["up_to_length", "interval"], required_unless_present_any = ["up_to_length", "interval"])]
    length: Option<usize>,
    /// any formula length up to this one
    #[arg(long, conflicts_with = "interval")]
    up_to_length: Option<usize>,
    /// learn a bounded window instead of a fixed-length formula
    #[arg(long, requires = "window")]
    interval: Option<IntervalArg>,
    /// largest offset of the interval window
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// fraction of traces used for training
    #[arg(long)]
    split: Option<f64>,
    #[arg(long, overrides_with = "no_early_stop")]
    early_stop: bool,
    #[arg(long)]
    no_early_stop: bool,
    /// drop Since from the architecture and also train the paired model with it
    #[arg(long)]
    no_since: bool,
    /// with --no-since, skip the paired run
    #[arg(long)]
    no_paired_run: bool,
    /// relabel traces with the robustness of this formula
    #[arg(long, value_name = "FORMULA")]
    continuous_labels: Option<String>,
    /// output head; defaults to tanh for binary labels and identity otherwise
    #[arg(long)]
    head: Option<HeadArg>,
    /// train on time-reversed traces to learn a future-time formula
    #[arg(long)]
    reverse: bool,
    #[arg(long)]
    compare_unquantized: bool,
    #[arg(long)]
    no_normalize: bool,
    /// save the trained model here
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// write the JSON report here
    #[arg(long)]
    out: Option<PathBuf>,
    /// print the JSON report instead of a summary
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct EnumArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 2)]
    length: usize,
    /// threshold candidates per feature
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    no_early_exit: bool,
    #[arg(long)]
    target_mcr: Option<f64>,
    /// largest number of structures to enumerate
    #[arg(long)]
    cap: Option<usize>,
    /// keep the first --cap structures instead of failing
    #[arg(long)]
    allow_truncation: bool,
    /// accepted for uniformity; the search is deterministic
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct FormulaArgs {
    formula: String,
    data: PathBuf,
    /// evaluate on time-reversed traces
    #[arg(long)]
    reverse: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct InspectArgs {
    checkpoint: PathBuf,
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train(a),
        Command::Enumerate(a) => enumerate_cmd(a),
        Command::Monitor(a) => monitor(a),
        Command::Eval(a) => eval(a),
        Command::Inspect(a) => inspect(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn gen_data(a: GenDataArgs) -> Result<()> {
    let ds = match a.kind {
        DataKind::StepThreshold => {
            let d = StepThresholdParams::default();
            let p = StepThresholdParams {
                n: a.n.unwrap_or(d.n),
                len: a.len.unwrap_or(d.len),
                c_pos: a.c_pos.unwrap_or(d.c_pos),
                c_neg: a.c_neg.unwrap_or(d.c_neg),
                noise: a.noise.unwrap_or(d.noise),
            };
            gen_step_threshold(&p, a.seed)?
        }
        DataKind::Cct => {
            let d = CctParams::default();
            gen_cct(&CctParams { n: a.n.unwrap_or(d.n), len: a.len.unwrap_or(d.len) }, a.seed)?
        }
        DataKind::Interval => gen_interval(a.n.unwrap_or(200), a.seed)?,
    };
    match &a.out {
        Some(p) => {
            let f = fs::File::create(p).with_context(|| format!("cannot write {}", p.display()))?;
            write_csv(&ds, io::BufWriter::new(f))?;
            let (pos, neg) = ds.class_counts();
            eprintln!("wrote {} traces ({pos} positive, {neg} negative) to {}", ds.len(), p.display());
        }
        None => write_csv(&ds, io::stdout().lock())?,
    }
    Ok(())
}

fn load(path: &Path) -> Result<Dataset> {
    load_csv(path).with_context(|| format!("cannot load {}", path.display()))
}

fn parse_for(text: &str, ds: &Dataset) -> Result<Formula> {
    parse_with_features(text, &ds.feature_names).with_context(|| format!("cannot parse formula {text:?}"))
}

/// Writes `value` as pretty JSON to `out` (when given) and returns the text.
fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<String> {
    let text = serde_json::to_string_pretty(value)?;
    if let Some(p) = out {
        fs::write(p, format!("{text}\n")).with_context(|| format!("cannot write {}", p.display()))?;
    }
    Ok(text)
}

#[derive(Serialize)]
struct ModelInfo {
    /// `"fixed"`, `"up_to"` or `"interval"`
    kind: &'static str,
    length: Option<usize>,
    interval: Option<IntervalKind>,
    window: Option<usize>,
    use_since: bool,
    head: Head,
    embedded_structures: String,
}

#[derive(Serialize)]
struct PairedRun {
    formula: String,
    train_mcr: f64,
    test_mcr: f64,
    epochs: usize,
    wall_time_s: f64,
    /// wall time without Since divided by wall time with it
    runtime_ratio: f64,
}

#[derive(Serialize)]
struct TrainOutput {
    command: &'static str,
    data: String,
    continuous_labels: Option<String>,
    model: ModelInfo,
    #[serde(flatten)]
    report: TrainReport,
    paired_with_since: Option<PairedRun>,
}

fn build_model(a: &TrainArgs, dim: usize, opts: &BuildOptions) -> Result<(ModelSpec, ModelInfo)> {
    let (m, kind, length) = if let Some(kind) = a.interval {
        let kind = match kind {
            IntervalArg::Once => IntervalKind::Once,
            IntervalArg::Hist => IntervalKind::Hist,
        };
        let window = a.window.context("--interval needs --window")?;
        (build_interval(kind, window, dim, opts)?, "interval", Some(2))
    } else if let Some(l) = a.up_to_length {
        (build_up_to_length(l, dim, opts)?, "up_to", Some(l))
    } else {
        let l = a.length.context("one of --length, --up-to-length or --interval is required")?;
        (build_fixed_length(l, dim, opts)?, "fixed", Some(l))
    };
    let info = ModelInfo {
        kind,
        length,
        interval: a.interval.map(|k| match k {
            IntervalArg::Once => IntervalKind::Once,
            IntervalArg::Hist => IntervalKind::Hist,
        }),
        window: a.window.filter(|_| a.interval.is_some()),
        use_since: opts.use_since,
        head: opts.head,
        embedded_structures: m.embedded_structures().to_string(),
    };
    Ok((m, info))
}

fn train(a: TrainArgs) -> Result<()> {
    let mut ds = load(&a.data)?;
    if let Some(text) = &a.continuous_labels {
        let f = parse_for(text, &ds)?;
        ds = label_continuous(&ds, &f)?;
    }
    let head = match (a.head, ds.label_kind) {
        (Some(HeadArg::Tanh), LabelKind::Continuous) => {
            bail!("continuous labels need the identity head, not tanh")
        }
        (Some(HeadArg::Tanh), _) => Head::Tanh,
        (Some(HeadArg::Identity), _) | (None, LabelKind::Continuous) => Head::Identity,
        (None, LabelKind::Binary) => Head::Tanh,
    };
    if a.no_paired_run && !a.no_since {
        bail!("--no-paired-run only applies with --no-since");
    }

    let mut cfg = if a.up_to_length.is_some() { TrainConfig::up_to_length() } else { TrainConfig::default() };
    cfg.seed = a.seed;
    cfg.early_stop = !a.no_early_stop;
    cfg.reverse_traces = a.reverse;
    cfg.compare_unquantized = a.compare_unquantized;
    cfg.normalize = !a.no_normalize;
    cfg.batch_size = a.batch_size;
    if let Some(v) = a.lr {
        cfg.lr = v;
    }
    if let Some(v) = a.max_epochs {
        cfg.max_epochs = v;
    }
    if let Some(v) = a.patience {
        cfg.patience = v;
    }
    if let Some(v) = a.split {
        cfg.split = v;
    }
    cfg.validate()?;

    let opts = BuildOptions {
        use_since: !a.no_since,
        head,
        seed: a.seed,
        ..Default::default()
    };
    let (mut m, info) = build_model(&a, ds.dim(), &opts)?;
    let report = fit(&mut m, &ds, &cfg)?;

    let paired = if a.no_since && !a.no_paired_run {
        let with = BuildOptions { use_since: true, ..opts };
        let (mut pm, _) = build_model(&a, ds.dim(), &with)?;
        let r = fit(&mut pm, &ds, &cfg)?;
        Some(PairedRun {
            formula: r.formula,
            train_mcr: r.train_mcr,
            test_mcr: r.test_mcr,
            epochs: r.epochs,
            wall_time_s: r.wall_time_s,
            runtime_ratio: report.wall_time_s / r.wall_time_s.max(f64::MIN_POSITIVE),
        })
    } else {
        None
    };

    if let Some(p) = &a.checkpoint {
        let mut ck = Checkpoint::new(m, ds.feature_names.clone());
        ck.reversed = a.reverse;
        ck.save(p).with_context(|| format!("cannot write {}", p.display()))?;
    }

    let out = TrainOutput {
        command: "train",
        data: a.data.display().to_string(),
        continuous_labels: a.continuous_labels.clone(),
        model: info,
        report,
        paired_with_since: paired,
    };
    let text = emit_json(&out, a.out.as_deref())?;
    if a.json {
        println!("{text}");
        return Ok(());
    }
    let r = &out.report;
    println!("{}", r.formula);
    println!(
        "length {}  train MCR {:.4}  test MCR {:.4}  epochs {} (best {})  loss {:.6}  time {:.2}s",
        r.formula_length, r.train_mcr, r.test_mcr, r.epochs, r.best_epoch, r.best_loss, r.wall_time_s
    );
    if r.time_direction == "future" {
        println!("formula reads forward from time 0 of the original traces");
    }
    if let Some(u) = &r.unquantized {
        println!("unquantized: train MCR {:.4}  test MCR {:.4}", u.train_mcr, u.test_mcr);
    }
    if let Some(p) = &out.paired_with_since {
        println!(
            "with Since: {}  test MCR {:.4}  time {:.2}s  (runtime ratio {:.2})",
            p.formula, p.test_mcr, p.wall_time_s, p.runtime_ratio
        );
    }
    Ok(())
}

fn enumerate_cmd(a: EnumArgs) -> Result<()> {
    let ds = load(&a.data)?;
    let d = EnumConfig::default();
    let cfg = EnumConfig {
        max_length: a.length,
        grid: a.grid.unwrap_or(d.grid),
        early_exit: !a.no_early_exit,
        target_mcr: a.target_mcr.unwrap_or(d.target_mcr),
        structure_cap: a.cap.unwrap_or(d.structure_cap),
        allow_truncation: a.allow_truncation,
        ..d
    };
    let r = enumerate::run(&ds, &cfg)?;
    let text = emit_json(&r, a.out.as_deref())?;
    if a.json {
        println!("{text}");
    } else {
        println!("{}", r.best_formula);
        println!(
            "MCR {:.4}  structures {} (tried {}, skipped {})  time {:.2}s{}",
            r.mcr,
            r.structures_enumerated,
            r.structures_tried,
            r.structures_skipped,
            r.wall_time_s,
            if r.early_exit_hit { "  early exit" } else { "" }
        );
    }
    Ok(())
}

fn formula_data(a: &FormulaArgs) -> Result<(Formula, Dataset)> {
    let mut ds = load(&a.data)?;
    if a.reverse {
        ds = reverse(&ds);
    }
    let f = parse_for(&a.formula, &ds)?;
    Ok((f, ds))
}

#[derive(Serialize)]
struct MonitorRow {
    trace_id: String,
    robustness: f64,
    sign: i8,
    label: f64,
}

fn monitor(a: FormulaArgs) -> Result<()> {
    let (f, ds) = formula_data(&a)?;
    let rows = ds
        .traces
        .iter()
        .map(|t| {
            let rho = final_robustness(&f, t)?;
            Ok(MonitorRow { trace_id: t.id.clone(), robustness: rho, sign: sign(rho), label: t.label })
        })
        .collect::<Result<Vec<_>>>()?;
    if a.json {
        println!("{}", emit_json(&rows, a.out.as_deref())?);
        return Ok(());
    }
    let mut text = String::from("trace_id,robustness,sign,label\n");
    for r in &rows {
        text.push_str(&format!("{},{},{},{}\n", r.trace_id, r.robustness, r.sign, r.label));
    }
    match &a.out {
        Some(p) => fs::write(p, &text).with_context(|| format!("cannot write {}", p.display()))?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalOutput {
    command: &'static str,
    formula: String,
    data: String,
    n: usize,
    mcr: f64,
}

fn eval(a: FormulaArgs) -> Result<()> {
    let (f, ds) = formula_data(&a)?;
    let out = EvalOutput {
        command: "eval",
        formula: format_with_features(&f, &ds.feature_names),
        data: a.data.display().to_string(),
        n: ds.len(),
        mcr: evaluate_mcr(&f, &ds)?,
    };
    let text = emit_json(&out, a.out.as_deref())?;
    if a.json {
        println!("{text}");
    } else {
        println!("{}", out.mcr);
    }
    Ok(())
}

#[derive(Serialize)]
struct InspectOutput {
    command: &'static str,
    dim: usize,
    feature_names: Vec<String>,
    cells: usize,
    parameters: usize,
    choice_blocks: usize,
    embedded_structures: String,
    head: Head,
    normalized: bool,
    reversed: bool,
    formula: String,
    formula_length: usize,
}

fn inspect(a: InspectArgs) -> Result<()> {
    let ck = Checkpoint::load(&a.checkpoint).with_context(|| format!("cannot load {}", a.checkpoint.display()))?;
    let m = &ck.model;
    let f = extract_nnf(m)?;
    let names = if ck.feature_names.len() == m.dim {
        ck.feature_names.clone()
    } else {
        (0..m.dim).map(|k| format!("x{k}")).collect()
    };
    let out = InspectOutput {
        command: "inspect",
        dim: m.dim,
        feature_names: names.clone(),
        cells: m.cells.len(),
        parameters: m.params.len(),
        choice_blocks: m.choice_blocks(),
        embedded_structures: m.embedded_structures().to_string(),
        head: m.head,
        normalized: m.normalization.is_some(),
        reversed: ck.reversed,
        formula: format_with_features(&f, &names),
        formula_length: f.length(),
    };
    if a.json {
        println!("{}", emit_json(&out, None)?);
        return Ok(());
    }
    println!("{}", out.formula);
    println!(
        "dim {}  cells {}  parameters {}  choice blocks {}  embedded structures {}  head {:?}{}",
        out.dim,
        out.cells,
        out.parameters,
        out.choice_blocks,
        out.embedded_structures,
        out.head,
        if out.reversed { "  (future-time)" } else { "" }
    );
    Ok(())
}
