use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use homtrack::bench::{self, Challenges, EvalConfig, MotionScript, Prediction, SynthConfig};
use homtrack::condnum::{self, StudyConfig, Subgroup};
use homtrack::config::{RunConfig, SCHEMA_VERSION};
use homtrack::geometry::{decompose_params, CornerQuad, Homography};
use homtrack::raster::{rsew_warp, warp_homography, Boundary};
use homtrack::{losses, pgm, resest, simest, tracker, Error, Result};

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (config schema 1)");

#[derive(Parser)]
#[command(name = "homtrack", version = VERSION, about = "Planar tracking by homography decomposition")]
struct Cli {
    /// Flat TOML configuration; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for parallel stages (results do not depend on it).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Monte-Carlo condition-number study.
    Condnum(CondnumArgs),
    /// Condition number along the ray from identity to the range extreme.
    Raystudy(RayArgs),
    /// Warp a PGM by a homography (output pixel q reads input at H q).
    Warp(WarpArgs),
    /// Rotation-scale equivariant resampling of a square PGM.
    Rsew(RsewArgs),
    /// Similarity estimate between a template and a search image.
    Simest(PairArgs),
    /// Residual refinement between a template and an aligned search image.
    Resest(PairArgs),
    /// Track an object through a directory of PGM frames.
    Track(TrackArgs),
    /// Render a synthetic sequence with ground truth.
    Synth(SynthArgs),
    /// Score tracking results against ground truth.
    Eval(EvalArgs),
    /// Finite-difference check of every loss gradient.
    Losscheck(LossArgs),
}

#[derive(Args)]
struct CondnumArgs {
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value = "full8")]
    subgroup: Subgroup,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "condnum_out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct RayArgs {
    #[arg(long, default_value_t = 100)]
    steps: usize,
    #[arg(long, default_value = "raystudy.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct WarpArgs {
    #[arg(long)]
    input: PathBuf,
    /// Nine numbers, row-major.
    #[arg(long)]
    homography: String,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RsewArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    tx: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    ty: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PairArgs {
    #[arg(long)]
    template: PathBuf,
    #[arg(long)]
    search: PathBuf,
}

#[derive(Args)]
struct TrackArgs {
    #[arg(long)]
    frames: PathBuf,
    /// Eight corner coordinates on the first frame (LT, RT, RB, LB), space
    /// or comma separated.
    #[arg(long, num_args = 1..=8, required = true, allow_negative_numbers = true, value_delimiter = ',')]
    init: Vec<f64>,
    #[arg(long, default_value = "results.txt")]
    out: PathBuf,
    /// Sidecar of per-frame homographies; defaults to `<out>.homographies`.
    #[arg(long)]
    homographies: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Base image; a procedural texture is used when absent.
    #[arg(long)]
    base: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    frames: usize,
    #[arg(long, default_value_t = 20)]
    keyframe_every: usize,
    #[arg(long, default_value_t = 255)]
    size: usize,
    #[arg(long, default_value_t = 48.0)]
    object_half: f64,
    #[arg(long, default_value_t = 0.0)]
    blur: f64,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    results: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Per-frame homographies of the results (9 numbers per line).
    #[arg(long)]
    homographies: Option<PathBuf>,
    /// Ground-truth homographies (9 numbers per line).
    #[arg(long)]
    gt_homographies: Option<PathBuf>,
    #[arg(long, default_value = "report.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct LossArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    points: usize,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn read_homographies(path: &Path) -> Result<Vec<Homography>> {
    fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.parse::<Homography>())
        .collect()
}

fn write_homographies(path: &Path, hs: &[Homography]) -> Result<()> {
    let mut s = String::new();
    for h in hs {
        s.push_str(&h.to_line());
        s.push('\n');
    }
    fs::write(path, s)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    match cli.cmd {
        Cmd::Condnum(a) => {
            let mut study = StudyConfig::new(a.samples, a.subgroup, a.seed);
            study.ranges = cfg.conditioning_ranges();
            study.workers = cfg.workers;
            study.bin_width = cfg.bin_width;
            let res = condnum::monte_carlo_study(&study)?;
            fs::create_dir_all(&a.out_dir)?;
            res.write_rows_csv(create(&a.out_dir.join("condnum_samples.csv"))?)?;
            res.histogram.write_csv(create(&a.out_dir.join("condnum_histogram.csv"))?)?;
            println!(
                "subgroup {} samples {} rows {} rejected {}",
                a.subgroup,
                a.samples,
                res.rows.len(),
                res.rejected
            );
            println!(
                "max {:.6e} p50 {:.6e} p99 {:.6e}",
                res.max(),
                res.percentile(50.0),
                res.percentile(99.0)
            );
        }
        Cmd::Raystudy(a) => {
            let endpoint = cfg.conditioning_ranges().upper_extreme();
            let ray = condnum::ray_study(&endpoint, a.steps, &condnum::box_corners(127))?;
            ray.write_csv(create(&a.out)?)?;
            for s in Subgroup::ALL {
                println!("{} endpoint {:?}", s, ray.endpoint(s));
            }
            println!("increasing fraction {:?}", ray.increasing_fraction);
        }
        Cmd::Warp(a) => {
            let img = pgm::read(&a.input)?;
            let h: Homography = a.homography.parse()?;
            let out = warp_homography(
                &img,
                &h,
                a.width.unwrap_or(img.width()),
                a.height.unwrap_or(img.height()),
                Boundary::Zero,
            )?;
            pgm::write(&a.out, &out)?;
            println!("wrote {}x{}", out.width(), out.height());
        }
        Cmd::Rsew(a) => {
            let img = pgm::read(&a.input)?;
            let out = rsew_warp(&img, [a.tx, a.ty])?;
            pgm::write(&a.out, &out)?;
            println!("wrote {}x{}", out.width(), out.height());
        }
        Cmd::Simest(a) => {
            let t = pgm::read(&a.template)?;
            let s = pgm::read(&a.search)?;
            let e = simest::estimate_similarity(&t, &s, &cfg.sim())?;
            println!(
                "t1 {} t2 {} gamma {} theta {} confidence {}",
                e.t[0], e.t[1], e.gamma, e.theta, e.confidence
            );
        }
        Cmd::Resest(a) => {
            let t = pgm::read(&a.template)?;
            let s = pgm::read(&a.search)?;
            let r = resest::refine_residual(&t, &s, &cfg.refine())?;
            let x = decompose_params(&r.homography)?;
            let names = homtrack::TransformParams::NAMES;
            let parts: Vec<String> = names.iter().zip(x.to_array()).map(|(n, v)| format!("{n} {v}")).collect();
            println!("{}", parts.join(" "));
            println!("rms {} lost {}", r.rms, r.lost);
        }
        Cmd::Track(a) => {
            let frames = bench::load_frames(&a.frames)?;
            let init = CornerQuad::from_slice(&a.init)?;
            let outs = tracker::run_sequence(&frames, &init, &cfg.tracker())?;
            let mut s = String::new();
            for o in &outs {
                s.push_str(&format!("{} {}\n", bench::format_quad(&o.corners), o.confidence));
            }
            fs::write(&a.out, s)?;
            let side = a.homographies.unwrap_or_else(|| {
                let mut p = a.out.clone().into_os_string();
                p.push(".homographies");
                PathBuf::from(p)
            });
            write_homographies(&side, &outs.iter().map(|o| o.homography).collect::<Vec<_>>())?;
            let lost = outs.iter().filter(|o| o.lost).count();
            println!("frames {} lost {}", outs.len(), lost);
        }
        Cmd::Synth(a) => {
            let base = match &a.base {
                Some(p) => pgm::read(p)?,
                None => bench::procedural_texture(2 * a.size, 2 * a.size, a.seed),
            };
            let amplitude = homtrack::condnum::ParamRanges {
                t: homtrack::condnum::Interval::symmetric(a.size as f64 / 12.0),
                gamma: homtrack::condnum::Interval::new(0.9, 1.1),
                theta: homtrack::condnum::Interval::symmetric(0.4),
                k1: homtrack::condnum::Interval::new(0.96, 1.04),
                k2: homtrack::condnum::Interval::symmetric(0.01),
                nu: homtrack::condnum::Interval::symmetric(3e-4),
            };
            let script = MotionScript::random(a.frames, a.keyframe_every, &amplitude, a.seed).with_challenges(Challenges {
                blur_sigma: a.blur,
                noise_sigma: a.noise,
                ..Challenges::default()
            });
            let sc = SynthConfig {
                frame_width: a.size,
                frame_height: a.size,
                object_half: a.object_half,
                ..SynthConfig::default()
            };
            let seq = bench::synthesize(&base, &script, a.seed, &sc)?;
            bench::save_frames(&a.out_dir, &seq.frames)?;
            bench::write_ground_truth(a.out_dir.join("groundtruth.txt"), &seq.corners)?;
            write_homographies(&a.out_dir.join("groundtruth.homographies"), &seq.homographies)?;
            println!("frames {} init {}", seq.frames.len(), bench::format_quad(&seq.corners[0]));
        }
        Cmd::Eval(a) => {
            let text = fs::read_to_string(&a.results)?;
            let mut preds = Vec::new();
            for (i, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
                let vals: std::result::Result<Vec<f64>, _> = line.split_whitespace().map(str::parse::<f64>).collect();
                let vals = vals.map_err(|e| Error::Parse {
                    what: "results",
                    detail: format!("line {}: {e}", i + 1),
                })?;
                if vals.len() < 8 {
                    return Err(Error::Parse {
                        what: "results",
                        detail: format!("line {}: expected at least 8 numbers", i + 1),
                    });
                }
                preds.push(Prediction {
                    corners: CornerQuad::from_slice(&vals[..8])?,
                    homography: None,
                });
            }
            if let Some(p) = &a.homographies {
                let hs = read_homographies(p)?;
                if hs.len() != preds.len() {
                    return Err(Error::Shape("homography count differs from results".into()));
                }
                for (pr, h) in preds.iter_mut().zip(hs) {
                    pr.homography = Some(h);
                }
            }
            let gt = bench::read_ground_truth(&a.gt)?;
            let gt_h = a.gt_homographies.as_deref().map(read_homographies).transpose()?;
            let report = bench::evaluate(&preds, &gt, gt_h.as_deref(), &EvalConfig::default())?;
            report.write_csv(create(&a.out)?)?;
            print!("{}", report.summary());
        }
        Cmd::Losscheck(a) => {
            let checks = losses::gradient_suite(a.seed, a.points);
            let mut failed = 0;
            for c in &checks {
                let verdict = if c.passed() { "PASS" } else { "FAIL" };
                println!(
                    "{verdict} {} points {} max_rel_error {:.3e} tolerance {:.0e}",
                    c.name, c.points, c.max_rel_error, c.tolerance
                );
                failed += usize::from(!c.passed());
            }
            if failed > 0 {
                return Err(Error::InvalidParameter(format!("{failed} gradient checks failed")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    debug_assert_eq!(SCHEMA_VERSION, 1);
    let cli = Cli::parse();
    if let Some(w) = cli.workers {
        if w > 0 {
            // best effort; an already-initialized pool is fine
            let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error kind={} message={}", e.kind(), msg);
            ExitCode::from(2)
        }
    }
}
