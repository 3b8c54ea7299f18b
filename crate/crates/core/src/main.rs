use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;

use rfspectrum::cluster::{clustering_experiment, ClusteringConfig, DataSource, GramSource};
use rfspectrum::equivalent::{build_equivalent, classify, coefficients};
use rfspectrum::gmm::{class_statistics, estimate_tau, sample_mixture, statistic_norms, MixtureModel};
use rfspectrum::io::config::{ExperimentConfig, MixtureConfig};
use rfspectrum::io::csv::{format_f64, read_matrix, write_matrix, write_table};
use rfspectrum::io::experiment::{accuracy_rows, run_experiment, ACCURACY_COLUMNS, EEG_WINDOW};
use rfspectrum::io::svg::{Chart, PALETTE};
use rfspectrum::io::{data_dir_from_env, load_eeg, load_mnist, RawDataset};
use rfspectrum::kernels::{center_matrix, monte_carlo_gram, parse_activation_list, phi_matrix, Activation};
use rfspectrum::spectrum::{default_density_y, eig_sym, esd_histogram, ResolventModel, StieltjesOptions};
use rfspectrum::{Error, Result};

/// Random-feature kernels, their asymptotic equivalents and spectra.
#[derive(Parser)]
#[command(name = "rfspectrum", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a Gaussian mixture and write X, labels and class statistics.
    Gen(GenArgs),
    /// Expected kernel matrix Φ (closed form or Monte-Carlo), optionally centered.
    Kernel(KernelArgs),
    /// Coefficients (d0, d1, d2) and taxonomy of activations at a given τ.
    Equiv(EquivArgs),
    /// Eigenvalues, histogram and limiting density of a centered kernel.
    Spectrum(SpectrumArgs),
    /// Random-feature spectral clustering accuracy table.
    Cluster(ClusterArgs),
    /// Run a figure or table experiment.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct MixtureArgs {
    /// Mixture configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Number of samples.
    #[arg(short = 'T', long = "T", default_value_t = 256)]
    t: usize,
    /// Overrides the seed of the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    mixture: MixtureArgs,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct KernelArgs {
    /// Data matrix CSV (p rows, one column per observation).
    #[arg(long, conflicts_with = "config")]
    input: Option<PathBuf>,
    /// Mixture configuration to sample instead of reading a matrix.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(short = 'T', long = "T", default_value_t = 256)]
    t: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "relu")]
    activation: Activation,
    /// Center the kernel with P = I − 11ᵀ/T.
    #[arg(long)]
    center: bool,
    /// Estimate with this many realizations of W instead of the closed form.
    #[arg(long)]
    realizations: Option<usize>,
    /// Features per realization.
    #[arg(long, default_value_t = 512)]
    n: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EquivArgs {
    /// Comma-separated activations.
    #[arg(long, default_value = "linear,relu,abs,lrelu:1:0.5,indicator,sign,quad:1:1:0,cos,sin,erf,gauss-exp")]
    activations: String,
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    /// CSV output; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SpectrumArgs {
    /// Kernel matrix CSV (centered when --center is absent).
    #[arg(long, conflicts_with = "config")]
    matrix: Option<PathBuf>,
    /// Center the input matrix first.
    #[arg(long)]
    center: bool,
    /// Mixture configuration: Φ_c and Φ̃_c are computed from one sample.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(short = 'T', long = "T", default_value_t = 256)]
    t: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "relu")]
    activation: Activation,
    /// Use the estimate (1/T)Σ‖x_i‖² for τ instead of the model value.
    #[arg(long)]
    estimate_tau: bool,
    /// Random features for the limiting density (defaults to T).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 50)]
    bins: usize,
    /// Density grid points.
    #[arg(long, default_value_t = 400)]
    grid: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClusterArgs {
    /// Mixture configuration path, or `mnist` / `eeg` (read from RFSPECTRUM_DATA_DIR).
    #[arg(long)]
    data: String,
    #[arg(long, default_value = "linear,indicator,sign,sin,erf,abs,cos,gauss-exp,relu")]
    activations: String,
    /// Comma-separated sample sizes.
    #[arg(short = 'T', long = "T", default_value = "32,64,128", value_delimiter = ',')]
    t: Vec<usize>,
    #[arg(long, default_value_t = 32)]
    n: usize,
    #[arg(long, default_value_t = 50)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cluster with the expected kernel Φ instead of random features.
    #[arg(long)]
    expected: bool,
    /// Embedding dimension.
    #[arg(long, default_value_t = 2)]
    embed_dim: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment configuration (JSON).
    #[arg(long, conflicts_with = "id")]
    config: Option<PathBuf>,
    /// Experiment id with default settings.
    #[arg(long)]
    id: Option<String>,
    /// Output directory (with --id).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

fn load_mixture(path: &Path, seed: Option<u64>) -> Result<(MixtureModel, u64)> {
    let cfg = MixtureConfig::load(path)?;
    let seed = seed.or(cfg.seed).unwrap_or(0);
    Ok((cfg.build()?, seed))
}

fn header(command: &str, seed: u64) -> String {
    format!("rfspectrum {command} seed={seed}")
}

fn gen(args: GenArgs) -> Result<()> {
    let (model, seed) = load_mixture(&args.mixture.config, args.mixture.seed)?;
    let data = sample_mixture(&model, args.mixture.t, seed)?;
    let stats = class_statistics(&model, &data.class_sizes)?;
    std::fs::create_dir_all(&args.out)?;
    let h = header("gen", seed);
    write_matrix(&args.out.join("x.csv"), &[h.clone(), "p rows, one column per sample".into()], &data.x)?;
    let labels = DMatrix::from_fn(data.len(), 1, |i, _| (data.labels[i] + 1) as f64);
    write_matrix(&args.out.join("labels.csv"), &[h.clone(), "1-based class labels".into()], &labels)?;
    let (mean_norm, cov_norm) = statistic_norms(&stats);
    let rows = vec![
        vec!["tau".into(), format_f64(stats.tau)],
        vec!["tau_estimate".into(), format_f64(estimate_tau(&data.x)?)],
        vec!["mean_norm".into(), format_f64(mean_norm)],
        vec!["cov_norm".into(), format_f64(cov_norm)],
    ];
    write_table(&args.out.join("statistics.csv"), &[h], &["statistic", "value"], &rows)
}

fn kernel(args: KernelArgs) -> Result<()> {
    let x = match (&args.input, &args.config) {
        (Some(path), None) => read_matrix(path)?,
        (None, Some(path)) => {
            let (model, seed) = load_mixture(path, Some(args.seed))?;
            sample_mixture(&model, args.t, seed)?.x
        }
        _ => return Err(Error::InvalidArgument("give exactly one of --input or --config".into())),
    };
    let phi = match args.realizations {
        Some(r) => monte_carlo_gram(args.activation, &x, args.n, r, args.seed, false)?.mean,
        None => phi_matrix(args.activation, &x)?.values,
    };
    let phi = if args.center { center_matrix(&phi) } else { phi };
    let note = format!("activation={} centered={}", args.activation, args.center);
    write_matrix(&args.out, &[header("kernel", args.seed), note], &phi)
}

fn equiv(args: EquivArgs) -> Result<()> {
    let kinds = parse_activation_list(&args.activations)?;
    let mut rows = Vec::new();
    for kind in kinds {
        let c = coefficients(kind, args.tau)?;
        rows.push(vec![
            kind.to_string(),
            format_f64(c.d0),
            format_f64(c.d1),
            format_f64(c.d2),
            classify(&c).to_string(),
        ]);
    }
    let columns = ["activation", "d0", "d1", "d2", "taxonomy"];
    match args.out {
        Some(path) => write_table(&path, &[format!("rfspectrum equiv tau={}", args.tau)], &columns, &rows),
        None => {
            println!("{}", columns.join(","));
            for row in rows {
                println!("{}", row.join(","));
            }
            Ok(())
        }
    }
}

fn spectrum(args: SpectrumArgs) -> Result<()> {
    let (phi_c, tilde_c) = match (&args.matrix, &args.config) {
        (Some(path), None) => {
            let m = read_matrix(path)?;
            (if args.center { center_matrix(&m) } else { m }, None)
        }
        (None, Some(path)) => {
            let (model, seed) = load_mixture(path, Some(args.seed))?;
            let data = sample_mixture(&model, args.t, seed)?;
            let stats = class_statistics(&model, &data.class_sizes)?;
            let tau = if args.estimate_tau { estimate_tau(&data.x)? } else { stats.tau };
            let coeffs = coefficients(args.activation, tau)?;
            let phi_c = center_matrix(&phi_matrix(args.activation, &data.x)?.values);
            let tilde_c = center_matrix(&build_equivalent(&data, &stats, &coeffs)?.values);
            (phi_c, Some(tilde_c))
        }
        _ => return Err(Error::InvalidArgument("give exactly one of --matrix or --config".into())),
    };
    std::fs::create_dir_all(&args.out)?;
    let h = header("spectrum", args.seed);
    let spec = eig_sym(&phi_c)?;
    let eigs = spec.eigenvalues.as_slice();
    let mut eig_table = DMatrix::from_column_slice(eigs.len(), 1, eigs);
    let tilde_spec = tilde_c.as_ref().map(eig_sym).transpose()?;
    if let Some(ts) = &tilde_spec {
        eig_table = eig_table.insert_column(1, 0.0);
        eig_table.set_column(1, &ts.eigenvalues);
    }
    write_matrix(&args.out.join("eigenvalues.csv"), &[h.clone(), "ascending; columns: phi_c[, phi_tilde_c]".into()], &eig_table)?;

    let lo = eigs[0].min(0.0);
    let hi = spec.largest().max(lo + f64::EPSILON) * 1.05;
    let hist = esd_histogram(eigs, args.bins, Some((lo, hi)))?;
    let hist_table = DMatrix::from_fn(hist.bins(), 3, |r, c| match c {
        0 => hist.edges[r],
        1 => hist.edges[r + 1],
        _ => hist.density[r],
    });
    write_matrix(&args.out.join("histogram.csv"), &[h.clone(), "columns: bin_left, bin_right, density".into()], &hist_table)?;

    let n = args.n.unwrap_or(phi_c.nrows());
    let model = ResolventModel::from_eigenvalues(eigs, n)?;
    let xs: Vec<f64> = (0..args.grid.max(2)).map(|i| lo + (hi - lo) * i as f64 / (args.grid.max(2) - 1) as f64).collect();
    let y = default_density_y(model.norm());
    let rho = model.density(&xs, y, &StieltjesOptions::default(), true)?;
    let density = DMatrix::from_fn(xs.len(), 2, |r, c| if c == 0 { xs[r] } else { rho[r] });
    write_matrix(&args.out.join("density.csv"), &[h.clone(), format!("columns: x, rho; n={n} y={y}")], &density)?;

    let mut chart = Chart::new("Eigenvalues of the centered kernel", "eigenvalue", "density")
        .bars(&hist.edges, &hist.density, PALETTE[0], "Phi_c");
    if let Some(ts) = &tilde_spec {
        let th = esd_histogram(ts.eigenvalues.as_slice(), args.bins, Some((lo, hi)))?;
        chart = chart.bars(&th.edges, &th.density, PALETTE[1], "Phi~_c");
    }
    chart = chart.line(&xs, &rho, PALETTE[2], &format!("limiting density of G_c, n={n}"));
    let svg = format!("<!-- {h} -->\n{}", chart.render());
    std::fs::write(args.out.join("spectrum.svg"), svg)?;
    Ok(())
}

fn named_dataset(name: &str) -> Result<Option<RawDataset>> {
    let root = || {
        data_dir_from_env()
            .ok_or_else(|| Error::InvalidArgument("RFSPECTRUM_DATA_DIR is not set".into()))
    };
    match name {
        "mnist" => Ok(Some(load_mnist(&root()?, &[6, 8])?)),
        "eeg" => Ok(Some(load_eeg(&root()?, EEG_WINDOW)?)),
        _ => Ok(None),
    }
}

fn cluster(args: ClusterArgs) -> Result<()> {
    let config = ClusteringConfig {
        activations: parse_activation_list(&args.activations)?,
        sizes: args.t.clone(),
        gram: if args.expected { GramSource::Expected } else { GramSource::MonteCarlo { n: args.n } },
        runs: args.runs,
        seed: args.seed,
        embed_dim: args.embed_dim,
        ..ClusteringConfig::default()
    };
    if config.activations.is_empty() {
        return Err(Error::InvalidArgument("no activations given".into()));
    }
    let rows = match named_dataset(&args.data)? {
        Some(raw) => clustering_experiment(
            DataSource::Labeled { vectors: &raw.vectors, labels: &raw.labels },
            &config,
        )?,
        None => {
            let (model, _) = load_mixture(Path::new(&args.data), None)?;
            clustering_experiment(DataSource::Synthetic(&model), &config)?
        }
    };
    let note = format!(
        "rfspectrum cluster seed={} data={} n={} runs={}",
        args.seed, args.data, args.n, args.runs
    );
    write_table(&args.out, &[note], &ACCURACY_COLUMNS, &accuracy_rows(&rows))
}

fn experiment(args: ExperimentArgs) -> Result<()> {
    let mut config = match (&args.config, &args.id) {
        (Some(path), None) => ExperimentConfig::load(path)?,
        (None, Some(id)) => ExperimentConfig::for_id(id, &args.out),
        _ => return Err(Error::InvalidArgument("give exactly one of --config or --id".into())),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    for path in run_experiment(&config)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Kernel(a) => kernel(a),
        Command::Equiv(a) => equiv(a),
        Command::Spectrum(a) => spectrum(a),
        Command::Cluster(a) => cluster(a),
        Command::Experiment(a) => experiment(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.category().exit_code() as u8)
        }
    }
}
