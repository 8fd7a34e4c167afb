//! `srmcf`: inpainting and enhancement of grayscale images by sub-Riemannian
//! mean curvature flow.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use srmcf_core::config::load_config;
use srmcf_core::io::{load_image, load_mask, save_image};
use srmcf_core::pipelines::{
    curvature_map, enhance, heat_baseline, inpaint, inpaint_then_enhance, RunReport,
    DEFAULT_INPAINT_STEPS,
};
use srmcf_core::{Error, Image, Mask, PipelineConfig, Result};

#[derive(Parser, Debug)]
#[command(name = "srmcf", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Input image (PGM or PNG).
    #[arg(long)]
    input: PathBuf,
    /// Corrupted-region mask; pixels above 127 are corrupted.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Output image; the extension selects PGM or PNG.
    #[arg(long)]
    output: PathBuf,
    /// Configuration file of key=value lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Ground truth for PSNR (over the mask when one is given).
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Configuration override, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Complete the masked region.
    Inpaint(Common),
    /// Smooth along contours over the whole image.
    Enhance(Common),
    /// Inpaint, then enhance the result.
    Combo(Common),
    /// 2D heat-equation inpainting for comparison.
    Baseline(Common),
    /// Horizontal mean curvature of the lifted image.
    CurvatureMap(Common),
    /// Print per-step sup norms of a run and write the curvature map.
    Diagnose(Common),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Inpaint(_) => "inpaint",
            Command::Enhance(_) => "enhance",
            Command::Combo(_) => "combo",
            Command::Baseline(_) => "baseline",
            Command::CurvatureMap(_) => "curvature-map",
            Command::Diagnose(_) => "diagnose",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Inpaint(c)
            | Command::Enhance(c)
            | Command::Combo(c)
            | Command::Baseline(c)
            | Command::CurvatureMap(c)
            | Command::Diagnose(c) => c,
        }
    }
}

fn required_mask(args: &Common, img: &Image, command: &str) -> Result<Mask> {
    let path = args
        .mask
        .as_deref()
        .ok_or_else(|| Error::config(format!("{command} needs --mask")))?;
    load_mask(path, img.width(), img.height())
}

fn optional_mask(args: &Common, img: &Image) -> Result<Option<Mask>> {
    args.mask
        .as_deref()
        .map(|p| load_mask(p, img.width(), img.height()))
        .transpose()
}

fn print_report(command: &str, output: &Path, report: &RunReport, per_step: bool) {
    println!("command: {command}");
    println!("output: {}", output.display());
    println!("steps: {}", report.steps);
    println!("wall_time_s: {:.3}", report.wall_time.as_secs_f64());
    if let (Some(first), Some(last)) = (report.sup_norms.first(), report.sup_norms.last()) {
        println!("sup_norm_initial: {first}");
        println!("sup_norm_final: {last}");
    }
    if per_step {
        for (s, v) in report.sup_norms.iter().enumerate() {
            println!("sup_norm_{s}: {v}");
        }
    }
    if let Some(p) = report.psnr_region {
        println!("psnr_region: {p:.4}");
    }
    for w in &report.warnings {
        println!("warning: {w}");
    }
}

fn run(command: &Command) -> Result<()> {
    let args = command.common();
    let cfg: PipelineConfig = load_config(args.config.as_deref(), &args.overrides)?;
    let img = load_image(&args.input)?;
    let name = command.name();
    let (out, mut report, region) = match command {
        Command::Inpaint(_) => {
            let mask = required_mask(args, &img, name)?;
            let (out, r) = inpaint(&img, &mask, &cfg)?;
            (out, r, Some(mask))
        }
        Command::Combo(_) => {
            let mask = required_mask(args, &img, name)?;
            let (out, r) = inpaint_then_enhance(&img, &mask, &cfg)?;
            (out, r, Some(mask))
        }
        Command::Baseline(_) => {
            let mask = required_mask(args, &img, name)?;
            let steps = cfg.steps.unwrap_or(DEFAULT_INPAINT_STEPS);
            let out = heat_baseline(&img, &mask, steps)?;
            let report = RunReport {
                steps,
                ..Default::default()
            };
            (out, report, Some(mask))
        }
        Command::Enhance(_) => {
            let (out, r) = enhance(&img, &cfg)?;
            (out, r, optional_mask(args, &img)?)
        }
        Command::CurvatureMap(_) => (curvature_map(&img, &cfg)?, RunReport::default(), None),
        Command::Diagnose(_) => {
            let mask = optional_mask(args, &img)?;
            let (_, r) = match &mask {
                Some(m) => inpaint(&img, m, &cfg)?,
                None => enhance(&img, &cfg)?,
            };
            (curvature_map(&img, &cfg)?, r, None)
        }
    };
    if let Some(truth_path) = &args.truth {
        let truth = load_image(truth_path)?;
        report.score(&out, &truth, region.as_ref())?;
    }
    save_image(&out, &args.output)?;
    print_report(
        name,
        &args.output,
        &report,
        matches!(command, Command::Diagnose(_)),
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(3),
            };
        }
    };
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("srmcf: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
