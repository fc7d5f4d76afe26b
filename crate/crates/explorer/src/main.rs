use accel_explorer::error::{Error, Result};
use accel_explorer::hybrid::{DseFlags, HalvingMode, PsoParams};
use accel_explorer::model::{parse_network, parse_platform, HardwarePlatform, NetworkModel};
use accel_explorer::profile::{profile_csv, profile_network};
use accel_explorer::report::{
    benchmark, emit_report, sweep_case, sweep_rows_csv, BenchmarkOptions, Paradigm, SweepRow,
};
use accel_explorer::zoo;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "accel-explorer",
    about = "Benchmark and explore DNN accelerator designs from analytical models",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArg {
    /// JSON file overriding search parameters and model flags
    /// (population, iterations, inertia, c1, c2, stall_limit, batch_max,
    /// halving: "uniform"|"costliest", literal_double_count: bool).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Emit the per-layer workload profile as CSV.
    Profile {
        #[arg(long)]
        model: PathBuf,
        /// Output CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimize and evaluate one paradigm on one platform.
    Benchmark {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        platform: PathBuf,
        #[arg(long)]
        paradigm: String,
        #[arg(long, default_value_t = 1)]
        batch: u64,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Search the hybrid design space and emit the best design plus trace.
    Explore {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        platform: PathBuf,
        #[arg(long)]
        batch_max: Option<u64>,
        /// Swarm population.
        #[arg(long)]
        pop: Option<usize>,
        /// Search iterations.
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the built-in input-size and depth sweeps on a platform.
    Sweep {
        #[arg(long)]
        platform: PathBuf,
        /// Which sweep family: inputsize, depth, or all.
        #[arg(long, default_value = "all")]
        family: String,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: PathBuf,
    },
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn load_model(path: &Path) -> Result<NetworkModel> {
    parse_network(&read_to_string(path)?)
}

fn load_platform(path: &Path) -> Result<HardwarePlatform> {
    parse_platform(&read_to_string(path)?)
}

#[derive(serde::Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    population: Option<usize>,
    iterations: Option<usize>,
    inertia: Option<f64>,
    c1: Option<f64>,
    c2: Option<f64>,
    stall_limit: Option<usize>,
    batch_max: Option<u64>,
    sp_max: Option<u32>,
    seed: Option<u64>,
    halving: Option<String>,
    literal_double_count: Option<bool>,
}

fn load_config(arg: &ConfigArg) -> Result<(PsoParams, DseFlags)> {
    let mut params = PsoParams::default();
    let mut flags = DseFlags::default();
    if let Some(path) = &arg.config {
        let text = read_to_string(path)?;
        let cfg: ConfigFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            msg: e.to_string(),
        })?;
        if let Some(v) = cfg.population {
            params.population = v;
        }
        if let Some(v) = cfg.iterations {
            params.iterations = v;
        }
        if let Some(v) = cfg.inertia {
            params.inertia = v;
        }
        if let Some(v) = cfg.c1 {
            params.c1 = v;
        }
        if let Some(v) = cfg.c2 {
            params.c2 = v;
        }
        if let Some(v) = cfg.stall_limit {
            params.stall_limit = v;
        }
        if let Some(v) = cfg.batch_max {
            params.batch_max = v;
        }
        if let Some(v) = cfg.sp_max {
            params.sp_max = Some(v);
        }
        if let Some(v) = cfg.seed {
            params.seed = v;
        }
        match cfg.halving.as_deref() {
            None => {}
            Some("uniform") => flags.halving = HalvingMode::Uniform,
            Some("costliest") => flags.halving = HalvingMode::Costliest,
            Some(other) => {
                return Err(Error::Validation(format!(
                    "unknown halving mode '{other}' (uniform, costliest)"
                )))
            }
        }
        if let Some(v) = cfg.literal_double_count {
            flags.literal_double_count = v;
        }
    }
    Ok((params, flags))
}

fn init_threads() {
    if let Ok(v) = std::env::var("ACCEL_EXPLORER_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|e| Error::io(path, e))
}

fn run_sweep(
    platform: &HardwarePlatform,
    family: &str,
    opts: &BenchmarkOptions,
    out: &Path,
) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let paradigms = [Paradigm::Pipeline, Paradigm::Generic, Paradigm::Hybrid];

    if family == "inputsize" || family == "all" {
        let cases: Vec<(usize, u32, u32)> = zoo::input_size_cases()
            .iter()
            .enumerate()
            .map(|(i, &(h, w))| (i + 1, h, w))
            .collect();
        let jobs: Vec<(usize, u32, u32, Paradigm)> = cases
            .iter()
            .flat_map(|&(i, h, w)| paradigms.iter().map(move |&p| (i, h, w, p)))
            .collect();
        let rows: Vec<Result<SweepRow>> = jobs
            .par_iter()
            .map(|&(i, h, w, p)| {
                let net = zoo::vgg16_conv(h, w, 16);
                sweep_case(&net, platform, p, i, opts)
            })
            .collect();
        let mut ok_rows = Vec::new();
        for r in rows {
            match r {
                Ok(row) => ok_rows.push(row),
                Err(Error::Infeasible(_)) => {}
                Err(e) => return Err(e),
            }
        }
        ok_rows.sort_by_key(|r| (r.case_index, r.paradigm as u8));
        write_file(&out.join("efficiency_vs_input_size.csv"), &sweep_rows_csv(&ok_rows))?;
    }

    if family == "depth" || family == "all" {
        let jobs: Vec<(usize, u32, u32, Paradigm)> = zoo::depth_cases()
            .iter()
            .enumerate()
            .flat_map(|(i, &(extra, n_conv))| {
                paradigms.iter().map(move |&p| (i + 1, extra, n_conv, p))
            })
            .collect();
        let rows: Vec<Result<SweepRow>> = jobs
            .par_iter()
            .map(|&(i, extra, _n_conv, p)| {
                let net = zoo::vgg_like(extra, 224, 224, 16);
                sweep_case(&net, platform, p, i, opts)
            })
            .collect();
        let mut ok_rows = Vec::new();
        for r in rows {
            match r {
                Ok(row) => ok_rows.push(row),
                Err(Error::Infeasible(_)) => {}
                Err(e) => return Err(e),
            }
        }
        ok_rows.sort_by_key(|r| (r.case_index, r.paradigm as u8));
        write_file(&out.join("throughput_vs_depth.csv"), &sweep_rows_csv(&ok_rows))?;
    }

    if !["inputsize", "depth", "all"].contains(&family) {
        return Err(Error::Validation(format!(
            "unknown sweep family '{family}' (inputsize, depth, all)"
        )));
    }
    Ok(())
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    init_threads();
    match cli.command {
        Command::Profile { model, out } => {
            let net = load_model(&model)?;
            let csv = profile_csv(&profile_network(&net));
            match out {
                Some(path) => write_file(&path, &csv)?,
                None => print!("{csv}"),
            }
        }
        Command::Benchmark {
            model,
            platform,
            paradigm,
            batch,
            seed,
            config,
            out,
        } => {
            let net = load_model(&model)?;
            let plat = load_platform(&platform)?;
            let paradigm: Paradigm = paradigm.parse()?;
            let (pso, flags) = load_config(&config)?;
            let opts = BenchmarkOptions {
                batch,
                seed,
                pso: Some(pso),
                flags,
            };
            let (report, design) = benchmark(&net, &plat, paradigm, &opts)?;
            emit_report(&report, &design, &out)?;
            println!(
                "{}: {:.1} GOP/s, {:.2} frames/s, efficiency {:.3}",
                net.name, report.gops, report.frames_per_sec, report.dsp_efficiency
            );
        }
        Command::Explore {
            model,
            platform,
            batch_max,
            pop,
            iters,
            seed,
            config,
            out,
        } => {
            let net = load_model(&model)?;
            let plat = load_platform(&platform)?;
            let (mut pso, flags) = load_config(&config)?;
            if let Some(v) = batch_max {
                pso.batch_max = v;
            }
            if let Some(v) = pop {
                pso.population = v;
            }
            if let Some(v) = iters {
                pso.iterations = v;
            }
            let opts = BenchmarkOptions {
                batch: 1,
                seed,
                pso: Some(pso),
                flags,
            };
            let (report, design) = benchmark(&net, &plat, Paradigm::Hybrid, &opts)?;
            emit_report(&report, &design, &out)?;
            let search = report.search.as_ref().unwrap();
            println!(
                "{}: best {:.1} GOP/s (SP={}, batch={}), {} iterations in {:.1}s",
                net.name,
                report.gops,
                report.config["sp"],
                report.config["batch"],
                search.iterations_run,
                search.wall_time_s
            );
        }
        Command::Sweep {
            platform,
            family,
            seed,
            config,
            out,
        } => {
            let plat = load_platform(&platform)?;
            let (pso, flags) = load_config(&config)?;
            let opts = BenchmarkOptions {
                batch: 1,
                seed,
                pso: Some(pso),
                flags,
            };
            run_sweep(&plat, &family, &opts, &out)?;
            println!("sweep results written to {}", out.display());
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
