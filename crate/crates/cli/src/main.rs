mod commands;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use failure::Failure;

/// Compress, inspect and evaluate Gaussian splatting models.
#[derive(Debug, Parser)]
#[command(name = "gscodec", version)]
struct Cli {
    /// Seed for every random choice (k-means seeding, synthetic scenes).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "GSCODEC_THREADS")]
    threads: Option<usize>,
    /// Print nothing except errors.
    #[arg(long, global = true)]
    quiet: bool,
    /// Machine-readable output on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cluster a PLY model into codebooks and write a .cgs container.
    Compress(CompressArgs),
    /// Expand a .cgs container back into a PLY model.
    Decompress { input: PathBuf, output: PathBuf },
    /// Print the memory breakdown and codebook usage of a container.
    Inspect {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Accounting::Packed)]
        accounting: Accounting,
    },
    /// PSNR, PSNR-AM and SSIM between two directories of PNG images.
    Eval { reference: PathBuf, test: PathBuf },
    /// Fit a 2D Gaussian scene to an image with quantization-aware training.
    Train2d(Train2dArgs),
    /// Encode a PLY model against the codebooks of an existing container.
    Assign {
        input: PathBuf,
        frozen: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        encode: EncodeArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Accounting {
    Packed,
    Unpacked32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Group {
    Dc,
    Sh,
    Scale,
    Rotation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InitArg {
    Kmeanspp,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OptimizerArg {
    Adam,
    Sgd,
}

#[derive(Debug, Args)]
struct EncodeArgs {
    /// Position bits: 4, 8, 16 or 32 (float).
    #[arg(long, default_value_t = 16)]
    position_bits: u32,
    /// Opacity bits: 4, 8, 16 or 32 (float).
    #[arg(long, default_value_t = 8)]
    opacity_bits: u32,
    /// Group whose indices are sorted and run-length encoded.
    #[arg(long, value_enum, default_value_t = Group::Rotation)]
    rle_group: Group,
}

#[derive(Debug, Args)]
struct CompressArgs {
    input: PathBuf,
    output: PathBuf,
    #[arg(long, default_value_t = 4096)]
    k_dc: usize,
    #[arg(long, default_value_t = 4096)]
    k_sh: usize,
    #[arg(long, default_value_t = 16384)]
    k_scale: usize,
    #[arg(long, default_value_t = 16384)]
    k_rot: usize,
    /// One codebook size for all groups; overrides the per-group flags.
    #[arg(long)]
    k_all: Option<usize>,
    #[arg(long, default_value_t = 30)]
    lloyd_iters: usize,
    #[arg(long, value_enum, default_value_t = InitArg::Kmeanspp)]
    init: InitArg,
    /// Store no spherical-harmonic coefficients.
    #[arg(long)]
    drop_sh: bool,
    /// Remove Gaussians below this opacity before clustering.
    #[arg(long)]
    prune_min_opacity: Option<f64>,
    #[command(flatten)]
    encode: EncodeArgs,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["target", "synthetic"]))]
struct Train2dArgs {
    /// Target image.
    #[arg(long)]
    target: Option<PathBuf>,
    /// Render the target from a random scene with this many Gaussians.
    #[arg(long)]
    synthetic: Option<usize>,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 64)]
    height: usize,
    /// Initial Gaussian count.
    #[arg(long, default_value_t = 200)]
    gaussians: usize,
    /// Scene checkpoint to write.
    #[arg(short, long)]
    output: PathBuf,
    /// Metrics trace (CSV).
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    trace_every: usize,
    /// Final render (PNG).
    #[arg(long)]
    render: Option<PathBuf>,
    /// Write the synthetic target (PNG).
    #[arg(long)]
    save_target: Option<PathBuf>,
    /// Start from the 30K-iteration schedule with λ = 1e-7.
    #[arg(long)]
    full_schedule: bool,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    qat_start: Option<f64>,
    /// Train without codebooks.
    #[arg(long)]
    no_qat: bool,
    #[arg(long)]
    assign_every: Option<usize>,
    #[arg(long)]
    assign_until: Option<f64>,
    #[arg(long)]
    reg_lambda: Option<f64>,
    #[arg(long)]
    reg_start: Option<f64>,
    #[arg(long)]
    reg_end: Option<f64>,
    #[arg(long)]
    prune_every: Option<usize>,
    #[arg(long)]
    min_opacity: Option<f64>,
    #[arg(long, default_value_t = 256)]
    k_color: usize,
    #[arg(long, default_value_t = 256)]
    k_scale: usize,
    #[arg(long, default_value_t = 64)]
    k_angle: usize,
    #[arg(long, default_value_t = 30)]
    lloyd_iters: usize,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Adam)]
    optimizer: OptimizerArg,
    #[arg(long)]
    lr_position: Option<f64>,
    #[arg(long)]
    lr_scale: Option<f64>,
    #[arg(long)]
    lr_angle: Option<f64>,
    #[arg(long)]
    lr_opacity: Option<f64>,
    #[arg(long)]
    lr_color: Option<f64>,
}

/// Flags shared by every subcommand.
pub struct Global {
    pub seed: u64,
    pub quiet: bool,
    pub json: bool,
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::invalid(anyhow::anyhow!("--threads {n}: {e}")))?;
    }
    let g = Global {
        seed: cli.seed,
        quiet: cli.quiet,
        json: cli.json,
    };
    match cli.command {
        Command::Compress(a) => commands::compress(&g, &a),
        Command::Decompress { input, output } => commands::decompress(&g, &input, &output),
        Command::Inspect { input, accounting } => commands::inspect(&g, &input, accounting),
        Command::Eval { reference, test } => commands::eval(&g, &reference, &test),
        Command::Train2d(a) => commands::train2d(&g, &a),
        Command::Assign {
            input,
            frozen,
            output,
            encode,
        } => commands::assign(&g, &input, &frozen, &output, &encode),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet {
        log::LevelFilter::Error
    } else {
        log::LevelFilter::Warn
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_env("GSCODEC_LOG")
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
