use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use colorsparse::analysis::{budget_for_sr, sparsify, SparseMethod};
use colorsparse::codec::container::read_container;
use colorsparse::codec::{decode_image, encode_image, EncoderConfig, Mode, TransformChoice};
use colorsparse::color::{
    apply_forward, learn_transform, ColorTransform, LearnConfig, TransformKind,
};
use colorsparse::dictionary::{DictParams, PrototypeSet};
use colorsparse::image_io::{read_ppm, write_ppm};
use colorsparse::metrics::{
    bpp, format_db, plane_correlation, psnr, sparsity_ratio, MetricsReport,
};
use colorsparse::wavelet::DEFAULT_LEVELS;
use colorsparse::{Error, RgbImage};

#[derive(Parser)]
#[command(
    name = "colorsparse",
    version,
    about = "Sparse cross-color wavelet image codec"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compress a P6 PPM image.
    Encode(EncodeArgs),
    /// Decompress to a P6 PPM image.
    Decode { input: PathBuf, output: PathBuf },
    /// PSNR / sparsity / rate of a reconstruction, or channel correlations over a corpus.
    Metrics(MetricsArgs),
    /// Learn a cross-color transform from a directory of PPM images.
    TrainTransform(TrainArgs),
    /// Sparse approximation at a fixed sparsity ratio, without coding.
    Sparsify(SparsifyArgs),
}

#[derive(Args)]
struct TransformArgs {
    /// identity, dct, ycbcr, pc or learned.
    #[arg(long, default_value = "dct", value_parser = parse_kind)]
    transform: TransformKind,
    /// Transform file written by train-transform (implies --transform learned).
    #[arg(long)]
    transform_file: Option<PathBuf>,
}

#[derive(Args)]
struct DictArgs {
    #[arg(long, default_value_t = DEFAULT_LEVELS)]
    levels: usize,
    #[arg(long, default_value_t = 16)]
    block_side: usize,
    /// Atoms per trigonometric family, as a multiple of the block side.
    #[arg(long, default_value_t = 2)]
    redundancy: usize,
    /// Leave the translated prototypes out of the dictionary.
    #[arg(long)]
    no_prototypes: bool,
}

impl DictArgs {
    fn params(&self) -> DictParams {
        DictParams {
            block_side: self.block_side,
            redundancy: self.redundancy,
            prototypes: if self.no_prototypes {
                PrototypeSet::None
            } else {
                PrototypeSet::Standard
            },
        }
    }
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("target").required(true).args(["target_psnr", "target_atoms", "target_sr"])))]
struct EncodeArgs {
    input: PathBuf,
    output: PathBuf,
    #[command(flatten)]
    transform: TransformArgs,
    #[command(flatten)]
    dict: DictArgs,
    /// Target PSNR in dB.
    #[arg(long)]
    target_psnr: Option<f64>,
    /// Total number of atoms.
    #[arg(long)]
    target_atoms: Option<usize>,
    /// Sparsity ratio; selects floor(3·width·height / SR) atoms.
    #[arg(long)]
    target_sr: Option<f64>,
    /// Quantisation step (searched in PSNR mode when absent).
    #[arg(long)]
    delta: Option<f64>,
    /// Dead-zone threshold (defaults to delta/2).
    #[arg(long)]
    theta: Option<f64>,
    /// Fail if the PSNR target needs more atoms than this.
    #[arg(long)]
    max_atoms: Option<usize>,
}

#[derive(Args)]
struct MetricsArgs {
    /// Reference image.
    reference: Option<PathBuf>,
    /// Reconstruction: a PPM, or a compressed file (adds sr and bpp).
    candidate: Option<PathBuf>,
    /// Directory of PPM images: one row of channel correlations per image.
    #[arg(long, conflicts_with_all = ["reference", "candidate"])]
    corpus: Option<PathBuf>,
    /// Transform applied before measuring correlations in corpus mode.
    #[arg(long, default_value = "identity", value_parser = parse_kind)]
    transform: TransformKind,
    #[arg(long)]
    transform_file: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    corpus: PathBuf,
    /// Output transform file.
    #[arg(long, short)]
    output: PathBuf,
    /// Trace CSV (iteration,error) of the best restart.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Wavelet coefficients kept per image.
    #[arg(long, short = 'k')]
    budget: usize,
    #[arg(long, default_value_t = 50)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random orthonormal initialisations; the lowest final error wins.
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    #[arg(long, default_value_t = DEFAULT_LEVELS)]
    levels: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum SparseMode {
    Truncate,
    Pursuit,
}

#[derive(Args)]
struct SparsifyArgs {
    input: PathBuf,
    #[command(flatten)]
    transform: TransformArgs,
    #[command(flatten)]
    dict: DictArgs,
    #[arg(long, default_value_t = 20.0)]
    sr: f64,
    #[arg(long, value_enum, default_value = "truncate")]
    mode: SparseMode,
    /// Write the approximation here.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn parse_kind(s: &str) -> Result<TransformKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Error with the process exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(_) => 3,
            Error::Parse { .. } | Error::Format(_) => 4,
            Error::TargetUnreachable { .. } => 5,
            Error::Config(_) | Error::ZeroCount => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure {
        code: 3,
        message: format!("{}: {e}", path.display()),
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes).map_err(|e| Failure {
        code: 3,
        message: format!("{}: {e}", path.display()),
    })
}

fn load_image(path: &Path) -> Result<RgbImage, Failure> {
    read_ppm(&read_file(path)?).map_err(|e| Failure {
        message: format!("{}: {e}", path.display()),
        ..Failure::from(e)
    })
}

fn load_transform(path: &Path) -> Result<ColorTransform, Failure> {
    let bytes = read_file(path)?;
    let (t, used) = ColorTransform::read_from(&bytes)?;
    if used != bytes.len() {
        return Err(Failure {
            code: 4,
            message: format!("{}: trailing bytes in transform file", path.display()),
        });
    }
    Ok(t)
}

fn transform_choice(args: &TransformArgs) -> Result<TransformChoice, Failure> {
    match (&args.transform_file, args.transform) {
        (Some(path), _) => Ok(TransformChoice::Fixed(load_transform(path)?)),
        (None, TransformKind::Learned) => Err(usage("--transform learned needs --transform-file")),
        (None, kind) => Ok(TransformChoice::Kind(kind)),
    }
}

fn resolve(choice: TransformChoice, img: &RgbImage) -> Result<ColorTransform, Failure> {
    Ok(match choice {
        TransformChoice::Kind(kind) => ColorTransform::of_kind(kind, img)?,
        TransformChoice::Fixed(t) => t,
    })
}

fn ppm_files(dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    let entries = std::fs::read_dir(dir).map_err(|e| Failure {
        code: 3,
        message: format!("{}: {e}", dir.display()),
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("ppm")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(usage(format!("{}: no .ppm files", dir.display())));
    }
    Ok(files)
}

fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn cmd_encode(args: EncodeArgs) -> Result<(), Failure> {
    let img = load_image(&args.input)?;
    let mode = match (args.target_psnr, args.target_atoms, args.target_sr) {
        (Some(p), None, None) => Mode::TargetPsnr(p),
        (None, Some(k), None) => Mode::TargetAtoms(k),
        (None, None, Some(sr)) => Mode::TargetAtoms(budget_for_sr(img.height(), img.width(), sr)?),
        _ => {
            return Err(usage(
                "exactly one of --target-psnr, --target-atoms, --target-sr",
            ))
        }
    };
    let cfg = EncoderConfig {
        transform: transform_choice(&args.transform)?,
        levels: args.dict.levels,
        dict: args.dict.params(),
        mode,
        delta: args.delta,
        theta: args.theta,
        max_atoms: args.max_atoms,
        ..Default::default()
    };
    let start = Instant::now();
    let out = encode_image(&img, &cfg)?;
    let elapsed = start.elapsed().as_secs_f64();
    write_file(&args.output, &out.bytes)?;
    let s = &out.stats;
    println!(
        "psnr={} sr={:.4} bpp={:.4} atoms={} stored={} delta={:.6} theta={:.6} bytes={} elapsed_s={elapsed:.3}",
        format_db(s.psnr),
        s.sr,
        s.bpp,
        s.atoms,
        s.stored,
        s.delta,
        s.theta,
        s.bytes
    );
    Ok(())
}

fn cmd_decode(input: &Path, output: &Path) -> Result<(), Failure> {
    let img = decode_image(&read_file(input)?).map_err(|e| Failure {
        message: format!("{}: {e}", input.display()),
        ..Failure::from(e)
    })?;
    write_file(output, &write_ppm(&img))
}

fn cmd_metrics(args: MetricsArgs) -> Result<(), Failure> {
    println!("{}", MetricsReport::CSV_HEADER);
    if let Some(dir) = &args.corpus {
        let fixed = match &args.transform_file {
            Some(p) => Some(load_transform(p)?),
            None if args.transform == TransformKind::Learned => {
                return Err(usage("--transform learned needs --transform-file"))
            }
            None => None,
        };
        let files = ppm_files(dir)?;
        let rows = files
            .iter()
            .map(|path| {
                let img = load_image(path)?;
                let t = match &fixed {
                    Some(t) => t.clone(),
                    None => ColorTransform::of_kind(args.transform, &img)?,
                };
                let r = plane_correlation(&apply_forward(&img.to_planes(), &t))?;
                Ok(format!(
                    "{},,,,{:.6},{:.6},{:.6}",
                    file_label(path),
                    r[0],
                    r[1],
                    r[2]
                ))
            })
            .collect::<Result<Vec<String>, Failure>>()?;
        for row in rows {
            println!("{row}");
        }
        return Ok(());
    }

    let (Some(reference), Some(candidate)) = (&args.reference, &args.candidate) else {
        return Err(usage("give two images, or --corpus DIR"));
    };
    let original = load_image(reference)?;
    let bytes = read_file(candidate)?;
    let (img, sr, rate) = if bytes.starts_with(colorsparse::codec::container::MAGIC) {
        let (_, stream) = read_container(&bytes)?;
        let img = decode_image(&bytes)?;
        let sr = sparsity_ratio(img.height(), img.width(), stream.entry_count()).ok();
        let rate = bpp(bytes.len() * 8, img.height(), img.width());
        (img, sr, Some(rate))
    } else {
        (load_image(candidate)?, None, None)
    };
    let p = psnr(&original, &img)?;
    let r = colorsparse::metrics::channel_correlation(&img);
    let opt = |v: Option<f64>| v.map(|v| format!("{v:.4}")).unwrap_or_default();
    let r = r
        .map(|r| r.map(|v| format!("{v:.6}")).join(","))
        .unwrap_or_else(|_| ",,".to_string());
    println!(
        "{},{},{},{},{r}",
        file_label(candidate),
        format_db(p),
        opt(sr),
        opt(rate)
    );
    Ok(())
}

/// Crops every image to the smallest common size (top-left aligned).
fn common_crop(images: Vec<RgbImage>) -> Vec<RgbImage> {
    let h = images.iter().map(RgbImage::height).min().unwrap_or(0);
    let w = images.iter().map(RgbImage::width).min().unwrap_or(0);
    images.into_iter().map(|im| im.crop(0, 0, h, w)).collect()
}

fn cmd_train(args: TrainArgs) -> Result<(), Failure> {
    if args.restarts == 0 {
        return Err(usage("--restarts must be at least 1"));
    }
    let images = ppm_files(&args.corpus)?
        .iter()
        .map(|p| load_image(p))
        .collect::<Result<Vec<_>, _>>()?;
    let images = common_crop(images);
    let cfg = LearnConfig {
        budget: args.budget,
        wavelet_levels: args.levels,
        max_iter: args.iters,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let inits: Vec<ColorTransform> = (0..args.restarts)
        .map(|_| ColorTransform::random_orthonormal(&mut rng))
        .collect();
    let mut best: Option<(ColorTransform, Vec<f64>)> = None;
    for init in &inits {
        let (t, trace) = learn_transform(&images, &cfg, init)?;
        let better = best.as_ref().is_none_or(|(_, b)| trace.last() < b.last());
        if better {
            best = Some((t, trace));
        }
    }
    let (t, trace) = best.expect("at least one restart");
    let mut bytes = Vec::new();
    t.write_to(&mut bytes);
    write_file(&args.output, &bytes)?;
    if let Some(path) = &args.trace {
        let mut csv = String::from("iteration,error\n");
        for (i, e) in trace.iter().enumerate() {
            csv.push_str(&format!("{i},{e}\n"));
        }
        write_file(path, csv.as_bytes())?;
    }
    println!(
        "images={} iterations={} initial_error={} final_error={}",
        images.len(),
        trace.len() - 1,
        trace[0],
        trace[trace.len() - 1]
    );
    Ok(())
}

fn cmd_sparsify(args: SparsifyArgs) -> Result<(), Failure> {
    let img = load_image(&args.input)?;
    let t = resolve(transform_choice(&args.transform)?, &img)?;
    let terms = budget_for_sr(img.height(), img.width(), args.sr)?;
    let method = match args.mode {
        SparseMode::Truncate => SparseMethod::Truncate,
        SparseMode::Pursuit => SparseMethod::Pursuit(args.dict.params()),
    };
    let start = Instant::now();
    let approx = sparsify(&img, &t, args.dict.levels, terms, method)?;
    let elapsed = start.elapsed().as_secs_f64();
    if let Some(out) = &args.output {
        write_file(out, &write_ppm(&approx))?;
    }
    println!(
        "psnr={} sr={:.4} terms={terms} elapsed_s={elapsed:.3}",
        format_db(psnr(&img, &approx)?),
        sparsity_ratio(img.height(), img.width(), terms)?
    );
    Ok(())
}

fn init_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("SRC_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(format!("SRC_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| usage(e.to_string()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    init_threads()?;
    match cli.command {
        Command::Encode(a) => cmd_encode(a),
        Command::Decode { input, output } => cmd_decode(&input, &output),
        Command::Metrics(a) => cmd_metrics(a),
        Command::TrainTransform(a) => cmd_train(a),
        Command::Sparsify(a) => cmd_sparsify(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
