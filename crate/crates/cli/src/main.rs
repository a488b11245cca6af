use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use clap::{Parser, Subcommand, ValueEnum};
use coggen::config::ExperimentConfig;
use coggen::io::{self, RunReport};
use coggen::optimizer::{ablation_arms, reconstruct, run_arm, AblationRow, AblationSuite, ProblemData};
use coggen::phantom::gen_phantom;
use coggen::theory::{theory_report, TheorySection};
use coggen::Error;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "coggen", version, about = "Curriculum-scheduled INR reconstruction of undersampled MRI")]
struct Cli {
    /// Overrides the seed from the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render the configured phantom to a CGIM file.
    GenPhantom {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw the configured sampling mask to a CGIM file.
    GenMask {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate measurements and reconstruct them.
    Reconstruct {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Plain uniform fitting with no curriculum.
        #[arg(long)]
        vanilla: bool,
    },
    /// Run every arm of an ablation suite over several seeds.
    Ablate {
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run the linearized-theory checks and write a JSON report.
    VerifyTheory {
        #[arg(long, value_enum, default_value_t = Section::All)]
        section: Section,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Backbone,
    CurriculumSize,
    ModeWeighting,
}

impl From<Suite> for AblationSuite {
    fn from(s: Suite) -> Self {
        match s {
            Suite::Backbone => AblationSuite::BackboneGain,
            Suite::CurriculumSize => AblationSuite::CurriculumSize,
            Suite::ModeWeighting => AblationSuite::ModeWeighting,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Section {
    Spectral,
    Pl,
    Bounds,
    All,
}

impl From<Section> for TheorySection {
    fn from(s: Section) -> Self {
        match s {
            Section::Spectral => TheorySection::Spectral,
            Section::Pl => TheorySection::Pl,
            Section::Bounds => TheorySection::Bounds,
            Section::All => TheorySection::All,
        }
    }
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_IO: u8 = 4;

fn exit_code(err: &Error) -> u8 {
    if err.is_io() {
        EXIT_IO
    } else if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_CONFIG
    }
}

fn load_config(path: &Path, seed: Option<u64>) -> coggen::Result<ExperimentConfig> {
    let text = fs::read_to_string(path)?;
    let cfg = ExperimentConfig::from_json(&text)?;
    Ok(match seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

fn write_json(path: &Path, value: &impl Serialize) -> coggen::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(fs::write(path, text)?)
}

fn cmd_reconstruct(cfg: &ExperimentConfig, out_dir: &Path) -> coggen::Result<()> {
    fs::create_dir_all(out_dir)?;
    let data = cfg.build_problem()?;
    io::write_grid(out_dir.join("ground_truth.cgim"), &data.ground_truth)?;
    io::write_mask(out_dir.join("mask.cgim"), &data.mask)?;
    let curve_path = out_dir.join("curve.csv");
    let result = match reconstruct(&cfg.run_config(), &data.mask, &data.y, Some(&data.ground_truth), None) {
        Ok(r) => r,
        Err(Error::NonFiniteLoss { iteration, loss, curve }) => {
            io::write_curve_csv(&curve_path, &curve)?;
            return Err(Error::NonFiniteLoss { iteration, loss, curve });
        }
        Err(e) => return Err(e),
    };
    io::write_grid(out_dir.join("recon.cgim"), &result.image)?;
    io::write_curve_csv(&curve_path, &result.curve)?;
    io::write_params(out_dir.join("params.json"), &result.params)?;
    if cfg.output.write_pgm {
        io::write_pgm(out_dir.join("recon.pgm"), &result.image)?;
        io::write_pgm(out_dir.join("ground_truth.pgm"), &data.ground_truth)?;
    }
    let report = RunReport::new(cfg, &result, "curve.csv");
    write_json(&out_dir.join("report.json"), &report)?;
    let last = result.final_point();
    println!(
        "{} iterations, final loss {:.4e}, RLNE_ROI {:.4}, PSNR {:.2} dB",
        result.iterations,
        last.loss,
        last.rlne_roi.unwrap_or(f64::NAN),
        last.psnr_db.unwrap_or(f64::NAN)
    );
    Ok(())
}

#[derive(Serialize)]
struct ArmMean {
    arm: String,
    seeds: usize,
    mean_final_rlne: f64,
    mean_final_psnr_db: f64,
    mean_best_rlne: f64,
}

#[derive(Serialize)]
struct AblationSummary {
    suite: AblationSuite,
    config: ExperimentConfig,
    rows: Vec<AblationRow>,
    means: Vec<ArmMean>,
}

fn worker_count() -> usize {
    std::env::var("COGGEN_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| thread::available_parallelism().map_or(1, |n| n.get()))
}

fn cmd_ablate(cfg: &ExperimentConfig, suite: AblationSuite, seeds: u64, out_dir: &Path) -> coggen::Result<()> {
    if seeds == 0 {
        return Err(Error::BadConfig("--seeds must be at least 1".into()));
    }
    let problems: Vec<(ExperimentConfig, ProblemData)> = (0..seeds)
        .map(|k| {
            let c = cfg.with_seed(cfg.seed + k);
            c.build_problem().map(|d| (c, d))
        })
        .collect::<coggen::Result<_>>()?;
    let jobs: Vec<(usize, String, coggen::optimizer::RunConfig)> = problems
        .iter()
        .enumerate()
        .flat_map(|(p, (c, _))| {
            ablation_arms(suite, &c.run_config())
                .into_iter()
                .map(move |(label, rc)| (p, label, rc))
        })
        .collect();

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<coggen::Result<AblationRow>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    let run_job = |(p, label, rc): &(usize, String, coggen::optimizer::RunConfig)| -> coggen::Result<AblationRow> {
        let (c, data) = &problems[*p];
        let dir = out_dir.join(format!("seed_{}", c.seed)).join(label);
        fs::create_dir_all(&dir)?;
        let arm = run_arm(label, rc, data)?;
        io::write_grid(dir.join("recon.cgim"), &arm.result.image)?;
        io::write_curve_csv(dir.join("curve.csv"), &arm.result.curve)?;
        eprintln!(
            "seed {} {label}: final RLNE_ROI {:.4} (best {:.4} at {})",
            c.seed, arm.row.final_rlne, arm.row.best_rlne, arm.row.best_iteration
        );
        Ok(arm.row)
    };
    thread::scope(|scope| {
        for _ in 0..worker_count().min(jobs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                let outcome = run_job(job);
                results.lock().expect("no worker panicked")[i] = Some(outcome);
            });
        }
    });
    let rows = results
        .into_inner()
        .expect("no worker panicked")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect::<coggen::Result<Vec<_>>>()?;

    let mut labels: Vec<String> = Vec::new();
    for row in &rows {
        if !labels.contains(&row.arm) {
            labels.push(row.arm.clone());
        }
    }
    let means = labels
        .into_iter()
        .map(|arm| {
            let of: Vec<&AblationRow> = rows.iter().filter(|r| r.arm == arm).collect();
            let mean = |f: fn(&AblationRow) -> f64| of.iter().map(|r| f(r)).sum::<f64>() / of.len() as f64;
            ArmMean {
                seeds: of.len(),
                mean_final_rlne: mean(|r| r.final_rlne),
                mean_final_psnr_db: mean(|r| r.final_psnr_db),
                mean_best_rlne: mean(|r| r.best_rlne),
                arm,
            }
        })
        .collect::<Vec<_>>();
    for m in &means {
        println!(
            "{:>14}  mean final RLNE_ROI {:.4}  PSNR {:.2} dB  ({} seeds)",
            m.arm, m.mean_final_rlne, m.mean_final_psnr_db, m.seeds
        );
    }
    let mut csv = String::from("arm,seed,final_rlne,final_psnr_db,best_rlne,best_iteration,final_loss\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{:.8e},{:.8e},{:.8e},{},{:.8e}\n",
            r.arm, r.seed, r.final_rlne, r.final_psnr_db, r.best_rlne, r.best_iteration, r.final_loss
        ));
    }
    fs::write(out_dir.join("ablation.csv"), csv)?;
    write_json(
        &out_dir.join("summary.json"),
        &AblationSummary {
            suite,
            config: cfg.clone(),
            rows,
            means,
        },
    )
}

fn run(cli: Cli) -> coggen::Result<()> {
    match cli.command {
        Command::GenPhantom { spec, out } => {
            let cfg = load_config(&spec, cli.seed)?;
            io::write_grid(out, &gen_phantom(&cfg.phantom)?)
        }
        Command::GenMask { spec, out } => {
            let cfg = load_config(&spec, cli.seed)?;
            let mask = cfg.build_mask()?;
            println!("{} of {} samples, AF {:.3}", mask.count(), mask.selected.len(), mask.achieved_af());
            io::write_mask(out, &mask)
        }
        Command::Reconstruct { config, out_dir, vanilla } => {
            let mut cfg = load_config(&config, cli.seed)?;
            cfg.optimizer.vanilla_mode |= vanilla;
            cmd_reconstruct(&cfg, &out_dir)
        }
        Command::Ablate {
            suite,
            config,
            seeds,
            out_dir,
        } => {
            let cfg = load_config(&config, cli.seed)?;
            fs::create_dir_all(&out_dir)?;
            cmd_ablate(&cfg, suite.into(), seeds, &out_dir)
        }
        Command::VerifyTheory { section, out } => {
            let report = theory_report(section.into(), cli.seed.unwrap_or(0))?;
            write_json(&out, &report)?;
            if report.passed {
                println!("theory checks passed");
                Ok(())
            } else {
                Err(Error::TheoryCheckFailed(format!("see {}", out.display())))
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
