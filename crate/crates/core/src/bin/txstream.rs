use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use txstream::harness::{self, parse_axis, write_csv, HarnessError, RunConfig};

#[derive(Parser)]
#[command(version, about = "Run transactional stream processing benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and print a CSV row.
    Run(Opts),
    /// Run one configuration per axis value.
    Sweep {
        /// `name=v1,v2,...`, e.g. `threads=1,2,4,8`.
        #[arg(long)]
        axis: String,
        #[command(flatten)]
        opts: Opts,
    },
}

#[derive(Args)]
struct Opts {
    /// `key=value` file applied before the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    app: Option<String>,
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    threads: Option<String>,
    #[arg(long)]
    interval: Option<String>,
    #[arg(long)]
    events: Option<String>,
    #[arg(long)]
    skew: Option<String>,
    #[arg(long)]
    read_ratio: Option<String>,
    #[arg(long)]
    mp_ratio: Option<String>,
    #[arg(long)]
    mp_length: Option<String>,
    #[arg(long)]
    partitions: Option<String>,
    #[arg(long)]
    placement: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    warmup_events: Option<String>,
    #[arg(long)]
    initial_balance: Option<String>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    output: Option<String>,
    /// Write the chain-evaluation trace to this file.
    #[arg(long)]
    trace: Option<String>,
    /// Write the generated input stream to this file.
    #[arg(long)]
    dump_events: Option<String>,
    #[arg(long, conflicts_with = "no_oracle")]
    oracle: bool,
    #[arg(long)]
    no_oracle: bool,
}

impl Opts {
    fn resolve(&self) -> Result<RunConfig, HarnessError> {
        let mut c = RunConfig::default();
        if let Some(path) = &self.config {
            c.apply_file(path)?;
        }
        let flags = [
            ("app", &self.app),
            ("scheme", &self.scheme),
            ("threads", &self.threads),
            ("interval", &self.interval),
            ("events", &self.events),
            ("skew", &self.skew),
            ("read_ratio", &self.read_ratio),
            ("mp_ratio", &self.mp_ratio),
            ("mp_length", &self.mp_length),
            ("partitions", &self.partitions),
            ("placement", &self.placement),
            ("seed", &self.seed),
            ("warmup_events", &self.warmup_events),
            ("initial_balance", &self.initial_balance),
            ("output", &self.output),
            ("trace", &self.trace),
            ("dump_events", &self.dump_events),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                c.set(k, v)?;
            }
        }
        if self.oracle {
            c.oracle = Some(true);
        }
        if self.no_oracle {
            c.oracle = Some(false);
        }
        Ok(c)
    }
}

fn sink(config: &RunConfig) -> io::Result<Box<dyn Write>> {
    Ok(match &config.output {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn main_inner(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run(opts) => {
            let config = opts.resolve()?;
            let report = harness::run(&config)?;
            write_csv(sink(&config)?, [&report])?;
            report.verdict()
        }
        Command::Sweep { axis, opts } => {
            let config = opts.resolve()?;
            let (name, values) = parse_axis(&axis)?;
            let reports = harness::sweep(&config, &name, &values)?;
            write_csv(sink(&config)?, &reports)?;
            reports.iter().try_for_each(|r| r.verdict())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
