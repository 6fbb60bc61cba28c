use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use agreement_core::consensus::write_consensus;
use agreement_core::data::{generate_synthetic, save_sparse_dataset};
use agreement_core::eval::macro_auc_pr;
use agreement_core::experiment::{
    emit_csv, emit_report, parse_csv, parse_synthetic_spec, run_experiment_with, CellRecord, ExperimentConfig,
    ReportFormat, ResultRow,
};
use agreement_core::nn::write_mlp;

#[derive(Parser)]
#[command(name = "agreement", version, about = "Agreement-based training of multi-label MLP ensembles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (train fraction, seed, method) cell of a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run directory; defaults to the config's `output` key, then `runs/<config name>`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Parallel cells; 0 uses all cores.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Summarize the results.csv of a run directory, or of every run below it.
    Report {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Write a synthetic dataset in the sparse text format.
    Datagen {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Macro PR-AUC of a dense prediction matrix against a dense 0/1 label matrix.
    Eval {
        #[arg(long)]
        preds: PathBuf,
        #[arg(long)]
        labels: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config, out, workers } => run(&config, out, workers),
        Command::Report { runs, format } => report(&runs, format),
        Command::Datagen { spec, seed, out } => datagen(&spec, seed, &out),
        Command::Eval { preds, labels } => eval(&preds, &labels),
    }
}

fn cell_dir_name(row: &ResultRow) -> String {
    format!("f{}_s{}_{}", row.train_fraction, row.seed, row.method)
}

fn write_cell(dir: &Path, record: &CellRecord) -> Result<()> {
    let dir = dir.join("cells").join(cell_dir_name(&record.row));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let a = &record.artifacts;
    if let Some(e) = &record.error {
        fs::write(dir.join("error.txt"), format!("{e}\n"))?;
    }
    if !a.loss_history.is_empty() {
        fs::write(dir.join("loss.csv"), a.loss_log())?;
    }
    for (j, model) in a.models.iter().enumerate() {
        fs::write(dir.join(format!("model_{j}.txt")), write_mlp(model))?;
    }
    if let Some(c) = &a.consensus {
        fs::write(dir.join("consensus.txt"), write_consensus(c))?;
    }
    if let Some(i) = a.selected {
        fs::write(dir.join("selected.txt"), format!("{i}\n"))?;
    }
    fs::write(dir.join("row.csv"), emit_csv(std::slice::from_ref(&record.row))?)?;
    Ok(())
}

fn run(config_path: &Path, out: Option<PathBuf>, workers: Option<usize>) -> Result<()> {
    let mut config = ExperimentConfig::load(config_path)
        .with_context(|| format!("loading config {}", config_path.display()))?;
    if let Some(w) = workers {
        config.workers = w;
    }
    let dir = out.or_else(|| config.output.clone()).unwrap_or_else(|| {
        let stem = config_path.file_stem().map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
        PathBuf::from("runs").join(stem)
    });
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("config.txt"), config.to_string())?;

    let partial_path = dir.join("results.partial.csv");
    let partial = Mutex::new(fs::File::create(&partial_path)?);
    let errors = Mutex::new(Vec::new());
    let on_record = |record: &CellRecord| {
        let outcome = emit_csv(std::slice::from_ref(&record.row)).map_err(anyhow::Error::from).and_then(|csv| {
            let line = csv.lines().nth(1).unwrap_or_default();
            writeln!(partial.lock().expect("partial results lock"), "{line}")?;
            write_cell(&dir, record)
        });
        if let Err(e) = outcome {
            errors.lock().expect("error list lock").push(e);
        }
        if let Some(e) = &record.error {
            eprintln!("cell {} failed: {e}", cell_dir_name(&record.row));
        } else {
            eprintln!("{} auc={:.4}", cell_dir_name(&record.row), record.row.macro_auc_pr);
        }
    };
    let records = run_experiment_with(&config, &on_record)?;
    if let Some(e) = errors.into_inner().expect("error list lock").into_iter().next() {
        return Err(e.context("writing run artifacts"));
    }
    let rows: Vec<ResultRow> = records.into_iter().map(|r| r.row).collect();
    fs::write(dir.join("results.csv"), emit_csv(&rows)?)?;
    fs::remove_file(&partial_path)?;
    print!("{}", emit_report(&rows, ReportFormat::Table)?);
    Ok(())
}

fn collect_results(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let direct = dir.join("results.csv");
    if direct.is_file() {
        out.push(direct);
        return Ok(());
    }
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    entries.sort();
    for e in entries {
        collect_results(&e, out)?;
    }
    Ok(())
}

fn report(runs: &Path, format: Format) -> Result<()> {
    let mut files = Vec::new();
    collect_results(runs, &mut files)?;
    if files.is_empty() {
        bail!("no results.csv under {}", runs.display());
    }
    let mut rows = Vec::new();
    for f in files {
        let text = fs::read_to_string(&f).with_context(|| format!("reading {}", f.display()))?;
        rows.extend(parse_csv(&text).with_context(|| format!("parsing {}", f.display()))?);
    }
    let format = match format {
        Format::Table => ReportFormat::Table,
        Format::Csv => ReportFormat::Csv,
    };
    print!("{}", emit_report(&rows, format)?);
    Ok(())
}

fn datagen(spec_path: &Path, seed: u64, out: &Path) -> Result<()> {
    let text = fs::read_to_string(spec_path).with_context(|| format!("reading {}", spec_path.display()))?;
    let spec = parse_synthetic_spec(&text).with_context(|| format!("parsing {}", spec_path.display()))?;
    let data = generate_synthetic(&spec, seed)?;
    save_sparse_dataset(&data, out)?;
    eprintln!(
        "wrote {} rows, {} features, {} labels to {}",
        data.n_instances(),
        data.n_features(),
        spec.n_labels,
        out.display()
    );
    Ok(())
}

/// Whitespace-separated rows of numbers; blank and `#` lines skipped.
fn read_matrix(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>().with_context(|| format!("{}:{}: bad number `{t}`", path.display(), i + 1)))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first().map(Vec::len) {
            if row.len() != first {
                bail!("{}:{}: expected {first} columns, got {}", path.display(), i + 1, row.len());
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("{} has no rows", path.display());
    }
    Ok(rows)
}

fn to_array(rows: Vec<Vec<f64>>) -> Result<agreement_core::ndarray::Array2<f64>> {
    let (n, l) = (rows.len(), rows[0].len());
    Ok(agreement_core::ndarray::Array2::from_shape_vec((n, l), rows.concat())?)
}

fn eval(preds: &Path, labels: &Path) -> Result<()> {
    let p = to_array(read_matrix(preds)?)?;
    let y = to_array(read_matrix(labels)?)?;
    let score = macro_auc_pr(p.view(), y.view())?;
    println!("macro_auc_pr = {}", score.value);
    println!("degenerate_labels = {}", score.degenerate_labels);
    Ok(())
}
