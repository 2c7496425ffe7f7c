//! `mdcn`: command-line front end for manifold-valued sequence models.
//!
//! Subcommands: `gen` (synthetic datasets), `train` (fit a classifier),
//! `eval` (accuracy and confusion counts), `permtest` (two-group
//! permutation test), `checkgrad` (gradient verification). Every run is
//! deterministic given its `--seed` and prints a resolved configuration
//! that replays it via `--config`. Exit codes: 0 success, 1 failed check
//! or runtime error, 2 usage error.

mod config;

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use manifold_dcn::data::{
    dataset_to_csv, gen_group_sequences, gen_rotating_spd, load_dataset, save_dataset,
    SequenceDataset,
};
use manifold_dcn::net::{network_forward, NetConfig, WeightsView};
use manifold_dcn::stats::{permutation_test, PermutationConfig};
use manifold_dcn::train::{check_gradients_with_fault, train_classifier, ModelParams, SgdConfig};

use config::{failure, resolve_net_config, usage, ArchDefaults, CliError, CliResult, RunConfig};

#[derive(Parser)]
#[command(name = "mdcn", version, about = "Manifold-valued sequence models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset
    Gen(GenArgs),
    /// Train a sequence classifier
    Train(TrainArgs),
    /// Evaluate a trained classifier
    Eval(EvalArgs),
    /// Two-group permutation test on sequence dynamics
    Permtest(PermtestArgs),
    /// Verify analytic gradients against finite differences
    Checkgrad(CheckgradArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Dataset family: spd-rotating | groups
    #[arg(long)]
    kind: Option<String>,
    /// Output dataset path (groups write <stem>_a/<stem>_b)
    #[arg(long)]
    out: Option<String>,
    /// Rotation angles in degrees, one class each (spd-rotating)
    #[arg(long)]
    classes: Option<String>,
    /// Sequences per class, or per group for groups
    #[arg(long)]
    n: Option<usize>,
    /// Sequence length (groups: longest length)
    #[arg(long)]
    len: Option<usize>,
    /// Matrix dimension
    #[arg(long)]
    dim: Option<usize>,
    /// Observation noise level
    #[arg(long)]
    noise: Option<f64>,
    /// Rotation rate in radians per step (groups)
    #[arg(long)]
    rate: Option<f64>,
    /// Relative rate difference of group B (groups)
    #[arg(long)]
    effect: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Also write a CSV view next to the dataset
    #[arg(long)]
    csv: bool,
    /// Plain-text config file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Training dataset (MSQ1)
    #[arg(long)]
    data: Option<String>,
    /// Output model path (MPAR)
    #[arg(long)]
    out: Option<String>,
    /// Residual blocks as "c_in,c_mid,c_out; ..."
    #[arg(long)]
    blocks: Option<String>,
    /// Taps per convolution
    #[arg(long)]
    kernel: Option<usize>,
    /// Classification head: invariant | tangent
    #[arg(long)]
    head: Option<String>,
    /// Frechet-mean templates (invariant head)
    #[arg(long)]
    templates: Option<usize>,
    /// Number of classes (default: inferred from labels)
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    /// Minibatch size
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Plain-text config file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Evaluation dataset (MSQ1)
    #[arg(long)]
    data: Option<String>,
    /// Trained model (MPAR)
    #[arg(long)]
    model: Option<String>,
    /// Optional metrics CSV output
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    blocks: Option<String>,
    #[arg(long)]
    kernel: Option<usize>,
    #[arg(long)]
    head: Option<String>,
    #[arg(long)]
    templates: Option<usize>,
    #[arg(long)]
    classes: Option<usize>,
    /// Plain-text config file (typically the train run's dump)
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct PermtestArgs {
    /// Group A dataset (MSQ1)
    #[arg(long)]
    a: Option<String>,
    /// Group B dataset (MSQ1)
    #[arg(long)]
    b: Option<String>,
    /// Results CSV path (histogram goes to <out stem>.hist.csv)
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    blocks: Option<String>,
    #[arg(long)]
    kernel: Option<usize>,
    #[arg(long)]
    head: Option<String>,
    #[arg(long)]
    templates: Option<usize>,
    /// Number of permutations
    #[arg(long)]
    perms: Option<usize>,
    /// Significance level reported alongside the p-value
    #[arg(long)]
    alpha: Option<f64>,
    /// Epochs of shared pretraining on the pooled groups
    #[arg(long = "pre-epochs")]
    pre_epochs: Option<usize>,
    /// Epochs of each per-group fine-tune
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the permutation loop (results are identical for
    /// any thread count)
    #[arg(long)]
    threads: Option<usize>,
    /// Plain-text config file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct CheckgradArgs {
    /// Geometry to check: spd | sphere
    #[arg(long)]
    manifold: Option<String>,
    /// Point dimension (default: 3 for spd, 8 for sphere)
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    blocks: Option<String>,
    #[arg(long)]
    kernel: Option<usize>,
    #[arg(long)]
    head: Option<String>,
    #[arg(long)]
    templates: Option<usize>,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Test hook: bias the analytic gradient of the named parameter groups
    #[arg(long = "inject-fault", hide = true)]
    inject_fault: Option<String>,
    /// Plain-text config file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli.command) {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Failure(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    };
    std::process::exit(code);
}

fn run(command: Command) -> CliResult<i32> {
    match command {
        Command::Gen(args) => cmd_gen(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Permtest(args) => cmd_permtest(args),
        Command::Checkgrad(args) => cmd_checkgrad(args),
    }
}

fn flag<T: Display>(flags: &mut Vec<(&'static str, String)>, key: &'static str, v: &Option<T>) {
    if let Some(v) = v {
        flags.push((key, v.to_string()));
    }
}

fn write_file(path: &Path, content: &str) -> CliResult<()> {
    std::fs::write(path, content)
        .map_err(|e| failure(format!("cannot write {}: {e}", path.display())))
}

fn parse_angles(text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| usage(format!("--classes needs comma-separated angles, got '{s}'")))
        })
        .collect()
}

/// d.msq -> (d_a.msq, d_b.msq)
fn group_paths(out: &Path) -> (PathBuf, PathBuf) {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "groups".to_string());
    let ext = out.extension().map(|e| format!(".{}", e.to_string_lossy())).unwrap_or_default();
    let name = |tag: &str| out.with_file_name(format!("{stem}_{tag}{ext}"));
    (name("a"), name("b"))
}

fn cmd_gen(args: GenArgs) -> CliResult<i32> {
    let mut flags = Vec::new();
    flag(&mut flags, "kind", &args.kind);
    flag(&mut flags, "out", &args.out);
    flag(&mut flags, "classes", &args.classes);
    flag(&mut flags, "n", &args.n);
    flag(&mut flags, "len", &args.len);
    flag(&mut flags, "dim", &args.dim);
    flag(&mut flags, "noise", &args.noise);
    flag(&mut flags, "rate", &args.rate);
    flag(&mut flags, "effect", &args.effect);
    flag(&mut flags, "seed", &args.seed);
    if args.csv {
        flags.push(("csv", "true".to_string()));
    }
    let mut cfg = RunConfig::build("gen", args.config.as_deref(), flags)?;

    let kind = cfg.string("kind", "spd-rotating");
    let out = cfg.required_path("out")?;
    let seed = cfg.u64("seed", 0)?;
    let n = cfg.usize("n", 100)?;
    let dim = cfg.usize("dim", 3)?;
    let want_csv = cfg.string("csv", "false") == "true";

    let describe = |path: &Path, ds: &SequenceDataset| {
        println!(
            "wrote {}: {} sequences, {} dim {}, {} channel(s)",
            path.display(),
            ds.len(),
            ds.kind().name(),
            ds.dim(),
            ds.channels()
        );
    };
    let csv_view = |path: &Path, ds: &SequenceDataset| -> CliResult<()> {
        if want_csv {
            let csv_path = PathBuf::from(format!("{}.csv", path.display()));
            write_file(&csv_path, &dataset_to_csv(ds))?;
            println!("wrote {}", csv_path.display());
        }
        Ok(())
    };

    match kind.as_str() {
        "spd-rotating" => {
            let angles = parse_angles(&cfg.string("classes", "30,60"))?;
            let len = cfg.usize("len", 20)?;
            let noise = cfg.f64("noise", 0.05)?;
            let ds = gen_rotating_spd(n, len, dim, &angles, noise, seed)?;
            save_dataset(&out, &ds)?;
            describe(&out, &ds);
            println!("classes: {} (balanced, {} per class)", angles.len(), n);
            csv_view(&out, &ds)?;
        }
        "groups" => {
            let len = cfg.usize("len", 40)?;
            let rate = cfg.f64("rate", 0.3)?;
            let effect = cfg.f64("effect", 0.0)?;
            let noise = cfg.f64("noise", 0.05)?;
            let (a, b) = gen_group_sequences(n, len, dim, rate, effect, noise, seed)?;
            let (path_a, path_b) = group_paths(&out);
            for (path, seqs) in [(&path_a, a), (&path_b, b)] {
                let mut ds = SequenceDataset::empty(manifold_dcn::manifold::ManifoldKind::Spd, dim, 1)?;
                for seq in seqs {
                    ds.push(seq, None)?;
                }
                save_dataset(path, &ds)?;
                describe(path, &ds);
                csv_view(path, &ds)?;
            }
        }
        other => return Err(usage(format!("unknown gen kind '{other}'"))),
    }
    cfg.finish(Some(&out))?;
    Ok(0)
}

/// Loads a dataset and reports the path on failure.
fn load_data(path: &Path) -> CliResult<SequenceDataset> {
    load_dataset(path).map_err(|e| failure(format!("{}: {e}", path.display())))
}

fn check_channels(net: &NetConfig, ds: &SequenceDataset, path: &Path) -> CliResult<()> {
    if ds.channels() != net.input_channels() {
        return Err(failure(format!(
            "{} has {} channel(s) but the first block expects {}",
            path.display(),
            ds.channels(),
            net.input_channels()
        )));
    }
    Ok(())
}

const TRAIN_ARCH: ArchDefaults =
    ArchDefaults { blocks: "1,3,3", kernel: 3, head: "invariant", templates: 3, classes: 2 };

fn cmd_train(args: TrainArgs) -> CliResult<i32> {
    let mut flags = Vec::new();
    flag(&mut flags, "data", &args.data);
    flag(&mut flags, "out", &args.out);
    flag(&mut flags, "blocks", &args.blocks);
    flag(&mut flags, "kernel", &args.kernel);
    flag(&mut flags, "head", &args.head);
    flag(&mut flags, "templates", &args.templates);
    flag(&mut flags, "classes", &args.classes);
    flag(&mut flags, "epochs", &args.epochs);
    flag(&mut flags, "lr", &args.lr);
    flag(&mut flags, "momentum", &args.momentum);
    flag(&mut flags, "batch", &args.batch);
    flag(&mut flags, "seed", &args.seed);
    let mut cfg = RunConfig::build("train", args.config.as_deref(), flags)?;

    let data_path = cfg.required_path("data")?;
    let out = cfg.required_path("out")?;
    let ds = load_data(&data_path)?;
    let samples = ds.labeled()?;
    if samples.is_empty() {
        return Err(failure(format!("{} holds no sequences", data_path.display())));
    }
    let n_classes = samples.iter().map(|(_, l)| l + 1).max().unwrap_or(2).max(2);

    let defaults = ArchDefaults { classes: n_classes, ..TRAIN_ARCH };
    let net = resolve_net_config(&mut cfg, ds.kind().name(), ds.dim(), &defaults)?;
    check_channels(&net, &ds, &data_path)?;
    if let Some((_, l)) = samples.iter().find(|(_, l)| *l >= net.classes) {
        return Err(failure(format!("label {l} outside the {} configured classes", net.classes)));
    }

    let sgd = SgdConfig {
        lr: cfg.f64("lr", 0.1)?,
        momentum: cfg.f64("momentum", 0.9)?,
        epochs: cfg.usize("epochs", 40)?,
        batch_size: cfg.usize("batch", 8)?,
        seed: cfg.u64("seed", 0)?,
    };

    let t0 = Instant::now();
    let (params, report) = train_classifier(&net, &samples, &sgd)?;
    for (i, e) in report.epochs.iter().enumerate() {
        eprintln!(
            "epoch {}/{}: loss {:.6} accuracy {:.4}",
            i + 1,
            report.epochs.len(),
            e.loss,
            e.accuracy
        );
    }
    params.save(&out)?;

    let last = report.epochs.last().expect("at least one epoch");
    println!(
        "trained {} parameters on {} sequences in {:.1}s",
        params.len(),
        samples.len(),
        t0.elapsed().as_secs_f64()
    );
    println!("final train loss {} accuracy {}", last.loss, last.accuracy);
    println!("wrote {}", out.display());
    cfg.finish(Some(&out))?;
    Ok(0)
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in xs.iter().enumerate() {
        if *v > xs[best] {
            best = i;
        }
    }
    best
}

fn cmd_eval(args: EvalArgs) -> CliResult<i32> {
    let mut flags = Vec::new();
    flag(&mut flags, "data", &args.data);
    flag(&mut flags, "model", &args.model);
    flag(&mut flags, "out", &args.out);
    flag(&mut flags, "blocks", &args.blocks);
    flag(&mut flags, "kernel", &args.kernel);
    flag(&mut flags, "head", &args.head);
    flag(&mut flags, "templates", &args.templates);
    flag(&mut flags, "classes", &args.classes);
    let mut cfg = RunConfig::build("eval", args.config.as_deref(), flags)?;

    let data_path = cfg.required_path("data")?;
    let model_path = cfg.required_path("model")?;
    let out = cfg.opt_string("out").map(PathBuf::from);
    let ds = load_data(&data_path)?;
    let samples = ds.labeled()?;
    if samples.is_empty() {
        return Err(failure(format!("{} holds no sequences", data_path.display())));
    }
    let n_classes = samples.iter().map(|(_, l)| l + 1).max().unwrap_or(2).max(2);

    let defaults = ArchDefaults { classes: n_classes, ..TRAIN_ARCH };
    let net = resolve_net_config(&mut cfg, ds.kind().name(), ds.dim(), &defaults)?;
    check_channels(&net, &ds, &data_path)?;
    let params =
        ModelParams::load(&model_path).map_err(|e| failure(format!("{}: {e}", model_path.display())))?;
    if !params.layout_matches(&net) {
        return Err(failure(format!(
            "{} holds {} parameters, which does not match the configured \
             architecture ({} parameters); pass the train run's config",
            model_path.display(),
            params.len(),
            net.param_count()
        )));
    }

    let view = WeightsView::from_flat(&net, params.values())?;
    let mut confusion = vec![vec![0usize; net.classes]; net.classes];
    for (seq, label) in &samples {
        let logits = network_forward(&net, &view, seq)?;
        confusion[*label][argmax(&logits)] += 1;
    }
    let correct: usize = (0..net.classes).map(|k| confusion[k][k]).sum();
    let total = samples.len();
    let accuracy = correct as f64 / total as f64;

    println!("accuracy {accuracy} ({correct}/{total})");
    println!("confusion (rows = true class, cols = predicted):");
    for (k, row) in confusion.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        println!("  class {k}: {}", cells.join(" "));
    }

    if let Some(out) = &out {
        let mut csv = String::from("kind,row,col,value\n");
        csv.push_str(&format!("accuracy,,,{accuracy}\n"));
        csv.push_str(&format!("correct,,,{correct}\n"));
        csv.push_str(&format!("total,,,{total}\n"));
        for (r, row) in confusion.iter().enumerate() {
            for (c, count) in row.iter().enumerate() {
                csv.push_str(&format!("confusion,{r},{c},{count}\n"));
            }
        }
        write_file(out, &csv)?;
        println!("wrote {}", out.display());
    }
    cfg.finish(out.as_deref())?;
    Ok(0)
}

fn cmd_permtest(args: PermtestArgs) -> CliResult<i32> {
    let mut flags = Vec::new();
    flag(&mut flags, "a", &args.a);
    flag(&mut flags, "b", &args.b);
    flag(&mut flags, "out", &args.out);
    flag(&mut flags, "blocks", &args.blocks);
    flag(&mut flags, "kernel", &args.kernel);
    flag(&mut flags, "head", &args.head);
    flag(&mut flags, "templates", &args.templates);
    flag(&mut flags, "perms", &args.perms);
    flag(&mut flags, "alpha", &args.alpha);
    flag(&mut flags, "pre-epochs", &args.pre_epochs);
    flag(&mut flags, "epochs", &args.epochs);
    flag(&mut flags, "lr", &args.lr);
    flag(&mut flags, "momentum", &args.momentum);
    flag(&mut flags, "batch", &args.batch);
    flag(&mut flags, "seed", &args.seed);
    flag(&mut flags, "threads", &args.threads);
    let mut cfg = RunConfig::build("permtest", args.config.as_deref(), flags)?;

    let path_a = cfg.required_path("a")?;
    let path_b = cfg.required_path("b")?;
    let out = cfg.required_path("out")?;
    let ds_a = load_data(&path_a)?;
    let ds_b = load_data(&path_b)?;
    if ds_a.kind() != ds_b.kind() || ds_a.dim() != ds_b.dim() || ds_a.channels() != ds_b.channels()
    {
        return Err(failure(format!(
            "groups disagree: {} is {} dim {} with {} channel(s), {} is {} dim {} with {}",
            path_a.display(),
            ds_a.kind().name(),
            ds_a.dim(),
            ds_a.channels(),
            path_b.display(),
            ds_b.kind().name(),
            ds_b.dim(),
            ds_b.channels()
        )));
    }

    let defaults =
        ArchDefaults { blocks: "1,1,1", kernel: 2, head: "invariant", templates: 1, classes: 2 };
    let net = resolve_net_config(&mut cfg, ds_a.kind().name(), ds_a.dim(), &defaults)?;
    check_channels(&net, &ds_a, &path_a)?;

    let lr = cfg.f64("lr", 0.05)?;
    let momentum = cfg.f64("momentum", 0.9)?;
    let batch = cfg.usize("batch", 1)?;
    let seed = cfg.u64("seed", 0)?;
    let pretrain = SgdConfig {
        lr,
        momentum,
        epochs: cfg.usize("pre-epochs", 3)?,
        batch_size: batch,
        seed,
    };
    let finetune = SgdConfig {
        lr,
        momentum,
        epochs: cfg.usize("epochs", 3)?,
        batch_size: batch,
        seed: seed.wrapping_add(1),
    };
    let perm = PermutationConfig {
        n_permutations: cfg.usize("perms", 200)?,
        alpha: cfg.f64("alpha", 0.05)?,
        seed: seed.wrapping_add(2),
        threads: cfg.usize("threads", 1)?,
    };

    let t0 = Instant::now();
    let result =
        permutation_test(&net, &ds_a.sequences(), &ds_b.sequences(), &pretrain, &finetune, &perm)?;
    let wall = t0.elapsed().as_secs_f64();

    let hist_path = out.with_extension("hist.csv");
    write_file(&out, &result.results_csv())?;
    write_file(&hist_path, &result.histogram_csv())?;

    println!("sigma {}", result.sigma);
    println!("p_value {}", result.p_value);
    println!("permutations {}", result.n_permutations);
    println!("significant {} (alpha {})", result.significant(), result.alpha);
    println!("wall_time_s {wall:.1}");
    println!("wrote {}", out.display());
    println!("wrote {}", hist_path.display());
    cfg.finish(Some(&out))?;
    Ok(0)
}

fn cmd_checkgrad(args: CheckgradArgs) -> CliResult<i32> {
    let mut flags = Vec::new();
    flag(&mut flags, "manifold", &args.manifold);
    flag(&mut flags, "dim", &args.dim);
    flag(&mut flags, "blocks", &args.blocks);
    flag(&mut flags, "kernel", &args.kernel);
    flag(&mut flags, "head", &args.head);
    flag(&mut flags, "templates", &args.templates);
    flag(&mut flags, "classes", &args.classes);
    flag(&mut flags, "seed", &args.seed);
    flag(&mut flags, "inject-fault", &args.inject_fault);
    let mut cfg = RunConfig::build("checkgrad", args.config.as_deref(), flags)?;

    let manifold = cfg.string("manifold", "spd");
    let (default_dim, defaults) = match manifold.as_str() {
        "spd" => (
            3,
            ArchDefaults {
                blocks: "1,2,2; 2,2,2; 2,2,2",
                kernel: 2,
                head: "invariant",
                templates: 2,
                classes: 2,
            },
        ),
        "sphere" => (
            8,
            ArchDefaults {
                blocks: "1,2,2; 2,2,2",
                kernel: 2,
                head: "tangent",
                templates: 2,
                classes: 2,
            },
        ),
        other => return Err(usage(format!("manifold must be 'spd' or 'sphere', got '{other}'"))),
    };
    let dim = match cfg.opt_string("dim") {
        Some(d) => {
            d.parse::<usize>().map_err(|_| usage(format!("--dim must be an integer, got '{d}'")))?
        }
        None => default_dim,
    };
    cfg.set("dim", dim);
    // resolve_net_config re-reads dim from the map it just saw, so the two
    // always agree here.
    let net = resolve_net_config(&mut cfg, &manifold, dim, &defaults)?;
    let seed = cfg.u64("seed", 0)?;
    let fault = cfg.opt_string("inject-fault");

    let report = check_gradients_with_fault(&net, seed, fault.as_deref())?;
    for (name, err) in &report.per_group {
        println!("group {name} rel_err {err:.3e}");
    }
    println!(
        "max relative error {:.3e} in {} ({} finite-difference fallbacks)",
        report.worst, report.worst_group, report.fd_fallbacks
    );
    cfg.finish(None)?;
    if report.passed {
        println!("PASS");
        Ok(0)
    } else {
        println!("FAIL: gradient check exceeded tolerance in {}", report.worst_group);
        Ok(1)
    }
}
