use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use ripplecache::config::Config;
use ripplecache::csvio::{write_hits, write_placement, write_rows, write_trace};
use ripplecache::internals::{dump_classic, dump_finder};
use ripplecache::summary::{summarize, RunRow, SessionRow};
use ripplecache::sweep::{expand_points, jobs, parse_param, run_all};
use ripplecache::topofile::format_topology;
use ripplecache_core::experiment::{plan_placement, PolicyKind};
use ripplecache_core::topology::{generate_ba_topology, BaParams};

#[derive(Parser)]
#[command(name = "ripplecache", version, about = "Bitrate-aware cache placement experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every policy and seed of a config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Write a delivery trace per run.
        #[arg(long)]
        traces: bool,
        /// Write a per-router lookup log per run (large).
        #[arg(long)]
        hits: bool,
    },
    /// Run a config over the product of parameter values.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// `name=v1,v2,...`; repeat for a grid. Names: omega, alpha, eta,
        /// consumers, horizon, mean_interval.
        #[arg(long = "param", required = true)]
        params: Vec<String>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Compute a static placement from a warm-up run and write it as CSV.
    SolvePlacement {
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "placement.csv")]
        out: PathBuf,
        #[arg(long)]
        eta: Option<f64>,
        /// Solve iterations (classic) or negotiation rounds (finder).
        #[arg(long)]
        iters: Option<usize>,
        /// Warm-up seed; defaults to the first configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for engine internals as CSV.
        #[arg(long)]
        dump_internals: Option<PathBuf>,
    },
    /// Generate a preferential-attachment topology file.
    GenTopology {
        #[arg(long)]
        nodes: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        producers: Option<usize>,
        #[arg(long)]
        edge_routers: Option<usize>,
        #[arg(long, default_value_t = 20.0)]
        bandwidth_mbps: f64,
        #[arg(long, default_value_t = 5.0)]
        delay_ms: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Classic,
    Finder,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn run_points(points: &[Config], out: &Path, traces: bool, hits: bool) -> Result<()> {
    let topology = points[0].topology()?;
    let jobs = jobs(points)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    if traces || hits {
        fs::create_dir_all(out.join("traces"))?;
    }
    fs::create_dir_all(out.join("placements"))?;
    let tag = |o: &ripplecache::sweep::RunOutcome| {
        let p = &o.job.point;
        format!("{}_w{}_a{}_e{}_s{}", o.job.policy, p.cache.omega, p.workload.alpha, p.solver.eta, o.job.seed)
    };
    let kept: Vec<(RunRow, Vec<SessionRow>)> = run_all(&topology, &jobs, |o| -> Result<_> {
        let name = tag(&o);
        if traces {
            write_trace(create(&out.join("traces").join(format!("{name}.csv")))?, &o.result.trace)?;
        }
        if hits {
            write_hits(create(&out.join("traces").join(format!("{name}_hits.csv")))?, &o.result.trace.hits)?;
        }
        if let Some(info) = &o.result.placement {
            write_placement(create(&out.join("placements").join(format!("{name}.csv")))?, &info.placement)?;
            if !info.converged {
                log::warn!("{name}: placement did not converge after {} iterations", info.iterations);
            }
        }
        Ok((o.row, o.sessions))
    })?
    .into_iter()
    .collect::<Result<_>>()?;
    let rows: Vec<RunRow> = kept.iter().map(|(r, _)| r.clone()).collect();
    let sessions: Vec<SessionRow> = kept.into_iter().flat_map(|(_, s)| s).collect();
    write_rows(create(&out.join("results.csv"))?, &rows)?;
    write_rows(create(&out.join("sessions.csv"))?, &sessions)?;
    let summary = summarize(&rows);
    write_rows(create(&out.join("summary.csv"))?, &summary)?;
    for s in &summary {
        let ci = |h: Option<f64>| h.map_or("n/a".to_owned(), |h| format!("{h:.3}"));
        println!(
            "{:<10} omega={} alpha={} eta={}  bitrate {:.3} ±{} Mbps  switches {:.2} ±{}  rebuffer {:.4} ±{}",
            s.policy,
            s.omega,
            s.alpha,
            s.eta,
            s.avg_bitrate_mbps,
            ci(s.avg_bitrate_mbps_ci95),
            s.switch_count_mean,
            ci(s.switch_count_mean_ci95),
            s.rebuffer_pct_mean,
            ci(s.rebuffer_pct_mean_ci95)
        );
    }
    Ok(())
}

fn main_inner(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out, traces, hits } => {
            let mut cfg = Config::load(&config)?;
            if hits {
                cfg.run.record_hits = true;
            }
            run_points(&[cfg], &out, traces, hits)
        }
        Command::Sweep { config, params, out } => {
            let cfg = Config::load(&config)?;
            let params = params.iter().map(|p| parse_param(p)).collect::<Result<Vec<_>, _>>()?;
            let points = expand_points(&cfg, &params)?;
            run_points(&points, &out, false, false)
        }
        Command::SolvePlacement { mode, config, out, eta, iters, seed, dump_internals } => {
            let mut cfg = Config::load(&config)?;
            if let Some(eta) = eta {
                cfg.set_param("eta", eta)?;
            }
            let policy = match mode {
                Mode::Classic => PolicyKind::Classic,
                Mode::Finder => PolicyKind::Finder,
            };
            if let Some(n) = iters {
                match mode {
                    Mode::Classic => cfg.solver.classic_max_iters = n,
                    Mode::Finder => cfg.solver.finder_iters = n,
                }
            }
            let seed = seed.unwrap_or(cfg.run.seeds[0]);
            let topology = cfg.topology()?;
            let params = cfg.params(policy, seed)?;
            let info = plan_placement(&topology, &params)?.expect("static policies always produce a placement");
            write_placement(create(&out)?, &info.placement)?;
            println!(
                "{} segments placed; {} iterations; converged: {}{}{}",
                info.placement.len(),
                info.iterations,
                info.converged,
                info.objective.map_or(String::new(), |o| format!("; objective {o:.1}")),
                if info.budget_hit { "; search budget reached" } else { "" }
            );
            if let Some(dir) = dump_internals {
                fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                if let Some(r) = &info.finder {
                    dump_finder(&dir, r)?;
                }
                if let Some(r) = &info.classic {
                    dump_classic(&dir, r)?;
                }
            }
            Ok(())
        }
        Command::GenTopology { nodes, seed, out, producers, edge_routers, bandwidth_mbps, delay_ms } => {
            if nodes < 2 {
                bail!("--nodes must be at least 2");
            }
            let mut p = BaParams::for_routers(nodes);
            p.bandwidth = bandwidth_mbps * 1e6;
            p.delay = delay_ms * 1e-3;
            if let Some(n) = producers {
                p.producers = n;
            }
            if let Some(n) = edge_routers {
                p.edge_routers = n;
            }
            let topo = generate_ba_topology(&p, seed)?;
            fs::write(&out, format_topology(&topo)).with_context(|| format!("writing {}", out.display()))?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
