mod config;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::Serialize;
use simu_core::dataset::{generate, read_dataset, GenerateConfig, DATASET_MAGIC};
use simu_core::engine::{
    benchmark, read_image, read_kspace, reconstruct, run_sequence_with, save_image, save_kspace, BenchConfig,
    BenchReport, EngineOptions, IMAGE_MAGIC, KSPACE_MAGIC,
};
use simu_core::eval::metric_report;
use simu_core::phantom::{load_maps, make_phantom, ParametricMaps, PhantomKind, DEFAULT_FOV_MM};
use simu_core::sequence::{build_sequence, BuildOptions, EventTimeline, SequenceKind, SequenceParams};
use simu_core::{ComplexImage, Error, FORMAT_VERSION};

/// 2D Bloch simulator for FSE, GRE-EPI and MOLED acquisitions.
#[derive(Parser, Debug)]
#[command(name = "simu", args_override_self = true)]
struct Cli {
    /// TOML file of default flag values (keys are long flag names); explicit flags win
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Generate a training dataset (SFDS1)
    Gen(GenArgs),
    /// Simulate one acquisition and write the reconstructed image (SFIMG)
    Run(RunArgs),
    /// Time the engine and print a JSON report
    Bench(BenchArgs),
    /// Compare predicted and reference images (PSNR, SSIM)
    Eval(EvalArgs),
    /// Write the event timeline of a sequence as JSON
    DumpTimeline(DumpArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Sequence: fse, epi or moled
    #[arg(long, value_parser = parse_kind)]
    seq: SequenceKind,
    /// Number of records
    #[arg(long = "n", value_name = "RECORDS")]
    records: usize,
    /// Matrix size
    #[arg(long, default_value_t = 128)]
    size: usize,
    /// Spins per pixel along each axis
    #[arg(long, default_value_t = 4)]
    oversample: usize,
    /// Master seed; generated and printed when absent
    #[arg(long)]
    seed: Option<u64>,
    /// Output dataset; an existing file with the same header is resumed
    #[arg(long)]
    out: PathBuf,
    /// Phantom family: uniform-disc, multi-ellipse or random-blobs
    #[arg(long, value_parser = parse_phantom, default_value = "random-blobs")]
    phantom: PhantomKind,
    /// Field of view in mm
    #[arg(long, default_value_t = DEFAULT_FOV_MM)]
    fov: f64,
    /// Offset of the position encoding impulses [default: size/4]
    #[arg(long)]
    pet_offset: Option<usize>,
    /// Worker threads [default: all cores]
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Debug)]
struct SeqArgs {
    /// Sequence: fse, epi or moled
    #[arg(long, value_parser = parse_kind)]
    seq: SequenceKind,
    /// Sequence parameter as name=value (te, esp, fa, refa, sg, etl, shots, spacing); repeatable
    #[arg(long, value_name = "K=V")]
    param: Vec<String>,
    /// Echo time in ms (epi)
    #[arg(long)]
    te: Option<f64>,
    /// Echo spacing in ms
    #[arg(long)]
    esp: Option<f64>,
    /// Excitation flip angle in degrees
    #[arg(long)]
    fa: Option<f64>,
    /// Refocusing flip angle in degrees (fse, moled)
    #[arg(long)]
    refa: Option<f64>,
    /// Readout gradient scale (epi, moled)
    #[arg(long)]
    sg: Option<f64>,
    /// Field of view in mm
    #[arg(long, default_value_t = DEFAULT_FOV_MM)]
    fov: f64,
    /// Accept parameters outside the training ranges
    #[arg(long)]
    physical: bool,
}

#[derive(Args, Debug)]
struct MapArgs {
    /// Parametric maps (SFMAP); otherwise a phantom is generated
    #[arg(long, conflicts_with = "phantom")]
    maps: Option<PathBuf>,
    /// Phantom family used when --maps is absent [default: multi-ellipse]
    #[arg(long, value_parser = parse_phantom)]
    phantom: Option<PhantomKind>,
    /// Phantom seed; generated and printed when absent
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    seq: SeqArgs,
    #[command(flatten)]
    maps: MapArgs,
    /// Matrix size [default: size of --maps, else 128]
    #[arg(long)]
    size: Option<usize>,
    /// Spins per pixel along each axis
    #[arg(long, default_value_t = 4)]
    oversample: usize,
    /// Worker threads [default: all cores]
    #[arg(long)]
    threads: Option<usize>,
    /// Reconstructed complex image (SFIMG)
    #[arg(long)]
    out: PathBuf,
    /// Also write the raw k-space (SFKSP)
    #[arg(long)]
    kspace_out: Option<PathBuf>,
    /// Also write the timeline JSON
    #[arg(long, value_name = "FILE")]
    dump_timeline: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    seq: SeqArgs,
    #[command(flatten)]
    maps: MapArgs,
    /// Matrix size [default: size of --maps, else 128]
    #[arg(long)]
    size: Option<usize>,
    /// Spins per pixel along each axis
    #[arg(long, default_value_t = 2)]
    oversample: usize,
    /// Threads for the parallel timing [default: all cores]
    #[arg(long)]
    threads: Option<usize>,
    /// Timed repetitions per configuration
    #[arg(long, default_value_t = 3)]
    repeat: usize,
    /// Also estimate the time to generate this many records
    #[arg(long)]
    records: Option<usize>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Prediction: SFIMG image, SFKSP k-space or SFDS1 dataset (targets)
    #[arg(long)]
    pred: PathBuf,
    /// Reference, in any of the same formats
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Print the report as JSON
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct DumpArgs {
    #[command(flatten)]
    seq: SeqArgs,
    /// Matrix size
    #[arg(long, default_value_t = 128)]
    size: usize,
    /// Output file, `-` for stdout
    #[arg(long)]
    out: PathBuf,
}

fn parse_kind(s: &str) -> Result<SequenceKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_phantom(s: &str) -> Result<PhantomKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn version() -> &'static str {
    let s = format!(
        "{} (formats: SFMAP1 SFKSP1 SFIMG1 SFDS1, format version {FORMAT_VERSION})",
        env!("CARGO_PKG_VERSION")
    );
    Box::leak(s.into_boxed_str())
}

fn main() -> ExitCode {
    let cmd = Cli::command().version(version());
    let mut argv: Vec<OsString> = std::env::args_os().collect();
    if let Some(path) = config::config_path(&argv) {
        match config::merge(&cmd, argv, Path::new(&path)) {
            Ok(a) => argv = a,
            Err(msg) => {
                eprintln!("error: {msg}");
                return ExitCode::from(2);
            }
        }
    }
    let cli = match cmd
        .try_get_matches_from(argv)
        .and_then(|mut m| Cli::from_arg_matches_mut(&mut m))
    {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cmd: Cmd) -> CliResult<()> {
    match cmd {
        Cmd::Gen(a) => cmd_gen(a),
        Cmd::Run(a) => cmd_run(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::Eval(a) => cmd_eval(a),
        Cmd::DumpTimeline(a) => cmd_dump(a),
    }
}

fn seed_or_random(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        eprintln!("seed: {s}");
        s
    })
}

fn print_json<T: Serialize>(v: &T) -> CliResult<()> {
    let s = serde_json::to_string_pretty(v).map_err(|e| Failure::Runtime(e.to_string()))?;
    println!("{s}");
    Ok(())
}

/// Defaults for `kind` at matrix `n`, then `--param` entries in order,
/// then the dedicated flags.
fn sequence_params(a: &SeqArgs, n: usize) -> CliResult<SequenceParams> {
    let mut p = SequenceParams::default_for(a.seq).with_shots_for(n);
    let set = |p: &mut SequenceParams, flag: &str, name: &str, v: f64| {
        p.set(name, v).map_err(|e| match e {
            Error::ParameterNotApplicable(_) => {
                Failure::Usage(format!("{flag}: parameter `{name}` does not apply to {}", a.seq))
            }
            e => Failure::Usage(format!("{flag}: {e}")),
        })
    };
    for kv in &a.param {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--param: expected name=value, got `{kv}`")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("--param {k}: `{v}` is not a number")))?;
        set(&mut p, "--param", k.trim(), v)?;
    }
    for (flag, name, v) in [
        ("--te", "te", a.te),
        ("--esp", "esp", a.esp),
        ("--fa", "fa", a.fa),
        ("--refa", "refa", a.refa),
        ("--sg", "sg", a.sg),
    ] {
        if let Some(v) = v {
            set(&mut p, flag, name, v)?;
        }
    }
    Ok(p)
}

fn build_options(a: &SeqArgs) -> BuildOptions {
    if a.physical {
        BuildOptions::physical()
    } else {
        BuildOptions::default()
    }
}

fn load_input_maps(a: &MapArgs, size: Option<usize>) -> CliResult<(ParametricMaps, usize)> {
    match &a.maps {
        Some(path) => {
            let maps = load_maps(path)?;
            let n = size.unwrap_or(maps.n());
            Ok((maps, n))
        }
        None => {
            let n = size.unwrap_or(128);
            let seed = seed_or_random(a.seed);
            let kind = a.phantom.unwrap_or(PhantomKind::MultiEllipse);
            Ok((make_phantom(n, kind, seed)?, n))
        }
    }
}

#[derive(Serialize)]
struct TimelineDocument<'a> {
    sequence: SequenceKind,
    matrix_n: usize,
    fov_mm: f64,
    params: &'a SequenceParams,
    shots: &'a [EventTimeline],
}

fn write_timeline(path: &Path, kind: SequenceKind, n: usize, fov: f64, p: &SequenceParams, shots: &[EventTimeline]) -> CliResult<()> {
    let doc = TimelineDocument { sequence: kind, matrix_n: n, fov_mm: fov, params: p, shots };
    let mut s = serde_json::to_string_pretty(&doc).map_err(|e| Failure::Runtime(e.to_string()))?;
    s.push('\n');
    if path == Path::new("-") {
        std::io::stdout().write_all(s.as_bytes())?;
    } else {
        std::fs::write(path, s).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn cmd_gen(a: GenArgs) -> CliResult<()> {
    let seed = seed_or_random(a.seed);
    let mut cfg = GenerateConfig::new(a.seq, a.records, a.size, seed);
    cfg.phantom = a.phantom;
    cfg.oversample = a.oversample;
    cfg.fov_mm = a.fov;
    cfg.pet_offset = a.pet_offset;
    cfg.threads = a.threads;
    let progress = |done: usize, total: usize| eprint!("\rgen: {done}/{total}");
    let summary = generate(&cfg, &a.out, &progress)?;
    eprintln!();

    #[derive(Serialize)]
    struct Summary<'a> {
        path: &'a Path,
        sequence: SequenceKind,
        records: usize,
        master_seed: u64,
        resumed_from: usize,
        written: usize,
        header_sha256: &'a str,
    }
    print_json(&Summary {
        path: &a.out,
        sequence: a.seq,
        records: a.records,
        master_seed: seed,
        resumed_from: summary.resumed_from,
        written: summary.written,
        header_sha256: &summary.header_sha256,
    })
}

fn cmd_run(a: RunArgs) -> CliResult<()> {
    let (maps, n) = load_input_maps(&a.maps, a.size)?;
    let p = sequence_params(&a.seq, n)?;
    let shots = build_sequence(&p, n, a.seq.fov, build_options(&a.seq))?;
    if let Some(path) = &a.dump_timeline {
        write_timeline(path, a.seq.seq, n, a.seq.fov, &p, &shots)?;
    }
    let mut opts = EngineOptions::new(a.oversample);
    if let Some(t) = a.threads {
        opts = opts.threads(t);
    }
    eprintln!("run: {} n={n} oversample={} shots={}", a.seq.seq, a.oversample, shots.len());
    let k = run_sequence_with(&maps, &shots, &opts)?;
    if let Some(path) = &a.kspace_out {
        save_kspace(path, &k)?;
    }
    save_image(&a.out, &reconstruct(&k))?;
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> CliResult<()> {
    let (maps, n) = load_input_maps(&a.maps, a.size)?;
    let params = sequence_params(&a.seq, n)?;
    let threads = a
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |t| t.get()));
    let cfg = BenchConfig {
        params,
        matrix_n: n,
        fov_mm: a.seq.fov,
        oversample: a.oversample,
        threads,
        repeat: a.repeat,
        build: build_options(&a.seq),
    };
    eprintln!("bench: {} n={n} oversample={} threads={threads} repeat={}", a.seq.seq, a.oversample, a.repeat);
    let report = benchmark(&maps, &cfg)?;

    #[derive(Serialize)]
    struct Output<'a> {
        #[serde(flatten)]
        report: &'a BenchReport,
        #[serde(skip_serializing_if = "Option::is_none")]
        records: Option<usize>,
        #[serde(skip_serializing_if = "Option::is_none")]
        estimate_s: Option<f64>,
    }
    print_json(&Output {
        report: &report,
        records: a.records,
        estimate_s: a.records.map(|r| report.estimate_s(r)),
    })
}

/// Images in `path`: one for SFIMG/SFKSP, every target for SFDS1.
fn load_images(path: &Path) -> CliResult<Vec<ComplexImage>> {
    let open = || File::open(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())));
    let mut magic = [0u8; 8];
    open()?
        .read_exact(&mut magic)
        .map_err(|_| Failure::Runtime(format!("{}: not a recognised file", path.display())))?;
    let mut r = BufReader::new(open()?);
    if &magic == IMAGE_MAGIC {
        Ok(vec![read_image(&mut r)?])
    } else if &magic == KSPACE_MAGIC {
        Ok(vec![reconstruct(&read_kspace(&mut r)?)])
    } else if &magic == DATASET_MAGIC {
        let reader = read_dataset(path)?;
        let n = reader.header().matrix_n;
        reader
            .map(|rec| Ok(rec?.target_image(n)))
            .collect::<simu_core::Result<Vec<_>>>()
            .map_err(Failure::from)
    } else {
        Err(Failure::Runtime(format!("{}: unrecognised magic", path.display())))
    }
}

fn cmd_eval(a: EvalArgs) -> CliResult<()> {
    let pred = load_images(&a.pred)?;
    let reference = load_images(&a.reference)?;
    if pred.len() != reference.len() {
        return Err(Failure::Runtime(format!(
            "--pred has {} images but --ref has {}",
            pred.len(),
            reference.len()
        )));
    }
    let pairs: Vec<_> = pred.into_iter().zip(reference).collect();
    let report = metric_report(&pairs)?;
    if a.json {
        return print_json(&report);
    }
    for (i, m) in report.images.iter().enumerate() {
        let psnr = if m.psnr_db.is_identical() {
            "identical".to_string()
        } else {
            format!("{:.3} dB", m.psnr_db.db())
        };
        println!("{i}: psnr {psnr}  ssim {:.5}", m.ssim);
    }
    match (report.psnr_mean, report.psnr_std) {
        (Some(m), Some(s)) => println!("psnr {m:.3} ± {s:.3} dB"),
        _ => println!("psnr identical"),
    }
    println!("ssim {:.5} ± {:.5}", report.ssim_mean, report.ssim_std);
    Ok(())
}

fn cmd_dump(a: DumpArgs) -> CliResult<()> {
    let p = sequence_params(&a.seq, a.size)?;
    let shots = build_sequence(&p, a.size, a.seq.fov, build_options(&a.seq))?;
    write_timeline(&a.out, a.seq.seq, a.size, a.seq.fov, &p, &shots)
}
