use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use gidnet_core::analysis::{ComplexityReport, REFERENCE_SIZE};
use gidnet_core::imaging::{self, Bicubic, EvalProtocol, ImagePlane, Upscaler};
use gidnet_core::model::{self, Model, ModelConfig};
use gidnet_core::training::{train_to_dir, TrainConfig};
use gidnet_core::verify::{run_suite, Suite};

#[derive(Parser, Debug)]
#[command(name = "gidnet", version, about = "Grouped information-distilling super-resolution")]
struct Cli {
    /// Worker threads (default: GIDNET_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for every random choice; 0 when absent.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Arch {
    /// Distill width; the trunk is 4x this. Must be divisible by 4.
    #[arg(long, default_value_t = 16)]
    core: usize,
    /// Add the two non-local attention blocks.
    #[arg(long)]
    nla: bool,
    #[arg(long, default_value_t = 4)]
    scale: usize,
    /// Attention tile side.
    #[arg(long, default_value_t = 16)]
    tile: usize,
}

impl Arch {
    fn config(&self) -> Result<ModelConfig> {
        Ok(ModelConfig::new(self.core, self.nla)?
            .with_scale(self.scale)?
            .with_tile(self.tile)?)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a freshly initialized weight archive.
    Init {
        #[command(flatten)]
        arch: Arch,
        #[arg(long)]
        out: PathBuf,
    },
    /// Upscale one PNG.
    Sr {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 16)]
        tile: usize,
    },
    /// Print parameter, MAC, activation and conv counts.
    Count {
        #[command(flatten)]
        arch: Arch,
        /// HxW, e.g. 256x256.
        #[arg(long, value_parser = parse_size)]
        input_size: Option<(usize, usize)>,
        /// key=value output instead of the table.
        #[arg(long)]
        kv: bool,
    },
    /// PSNR over a folder of HR PNGs.
    Eval {
        #[arg(long, required_unless_present = "bicubic", conflicts_with = "bicubic")]
        model: Option<PathBuf>,
        /// Score plain bicubic upscaling instead of a model.
        #[arg(long)]
        bicubic: bool,
        #[arg(long)]
        hr_dir: PathBuf,
        /// Compare luma only.
        #[arg(long)]
        y: bool,
        /// Border to ignore (default: the scale).
        #[arg(long)]
        shave: Option<usize>,
        /// Scale for --bicubic; taken from the archive otherwise.
        #[arg(long, default_value_t = 4)]
        scale: usize,
        #[arg(long, default_value_t = 16)]
        tile: usize,
        #[arg(long)]
        kv: bool,
    },
    /// Train from a key=value config file.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Validation PNGs (default: the training images).
        #[arg(long)]
        val: Option<PathBuf>,
        /// Start from these weights instead of a fresh init.
        #[arg(long)]
        init: Option<PathBuf>,
    },
    /// Run the built-in oracle suites.
    Verify {
        #[arg(long, value_parser = parse_suite)]
        suite: Option<Suite>,
    },
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (h, w) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected HxW, got `{s}`"))?;
    let h: usize = h.trim().parse().map_err(|_| format!("bad height in `{s}`"))?;
    let w: usize = w.trim().parse().map_err(|_| format!("bad width in `{s}`"))?;
    if h == 0 || w == 0 {
        return Err(format!("input size `{s}` must be positive"));
    }
    Ok((h, w))
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse().map_err(|e: gidnet_core::Error| e.to_string())
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("GIDNET_THREADS") {
        Ok(v) if !v.trim().is_empty() => {
            let n = v.trim().parse().with_context(|| format!("GIDNET_THREADS=`{v}` is not a number"))?;
            Ok(Some(n))
        }
        _ => Ok(None),
    }
}

fn load_dir(dir: &Path) -> Result<Vec<ImagePlane>> {
    imaging::list_pngs(dir)?
        .iter()
        .map(|p| imaging::load_png(p).map_err(Into::into))
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = thread_count(cli.threads)? {
        if n == 0 {
            bail!("thread count must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::Init { arch, out } => {
            let m = Model::build(arch.config()?, seed)?;
            model::save_weights(&m, &out)?;
            println!("wrote {} ({} convs)", out.display(), m.conv_count());
        }
        Command::Sr { model, input, out, tile } => {
            let m = model::load_weights_inferred(&model, tile)?;
            let lr = imaging::load_png(&input)?;
            let sr = m.upscale(&lr)?;
            imaging::save_png(&sr, &out)?;
            println!("{}x{} -> {}x{}", lr.width(), lr.height(), sr.width(), sr.height());
        }
        Command::Count { arch, input_size, kv } => {
            let (h, w) = input_size.unwrap_or(REFERENCE_SIZE);
            let report = ComplexityReport::for_config(&arch.config()?, h, w);
            if kv {
                print!("{}", report.to_key_values());
            } else {
                println!("{report}");
            }
        }
        Command::Eval { model, bicubic, hr_dir, y, shave, scale, tile, kv } => {
            let up: Box<dyn Upscaler> = match (bicubic, model) {
                (true, _) => Box::new(Bicubic { scale }),
                (false, Some(p)) => Box::new(model::load_weights_inferred(&p, tile)?),
                (false, None) => bail!("either --model or --bicubic is required"),
            };
            let s = up.scale();
            let proto = EvalProtocol {
                scale: s,
                shave: shave.unwrap_or(s),
                luminance: y,
            };
            let report = imaging::eval_dataset(up.as_ref(), &hr_dir, &proto)?;
            if kv {
                print!("{}", report.to_key_values());
            } else {
                println!("{report}");
            }
        }
        Command::Train { config, data, out, val, init } => {
            let mut cfg = TrainConfig::from_file(&config)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let train_set = load_dir(&data).with_context(|| format!("loading training data from {}", data.display()))?;
            let val_set = match &val {
                Some(v) => load_dir(v)?,
                None => Vec::new(),
            };
            let m = match init {
                Some(p) => model::load_weights(&p, cfg.model_config()?)?,
                None => Model::build(cfg.model_config()?, cfg.seed)?,
            };
            let outcome = train_to_dir(m, &train_set, &val_set, &cfg, &out)?;
            for e in &outcome.log {
                println!("{e}");
            }
            println!(
                "best epoch {} -> {}",
                outcome.best_epoch,
                gidnet_core::training::checkpoint_path(&out, outcome.best_epoch).display()
            );
        }
        Command::Verify { suite } => {
            let suites = suite.map(|s| vec![s]).unwrap_or_else(|| Suite::ALL.to_vec());
            let mut failed = 0;
            for s in suites {
                for c in run_suite(s) {
                    println!("{c}");
                    failed += usize::from(!c.passed);
                }
            }
            if failed > 0 {
                bail!("{failed} check(s) failed");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
