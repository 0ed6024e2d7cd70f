use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use wavelet_prosody::annotate::{analyze_with_scale, pooled_word_scale, word_scale};
use wavelet_prosody::config::{Config, ScaleEstimation};
use wavelet_prosody::cwt::write_scalogram;
use wavelet_prosody::eval::{load_utterance, run_corpus, run_utterances, CorpusRun, Inputs, Manifest, ManifestEntry};
use wavelet_prosody::extract::{autocorr_f0, log_energy, Audio, VoicingParams};
use wavelet_prosody::loma::write_lines;
use wavelet_prosody::signal::io::{write_track, write_word_prosody};
use wavelet_prosody::signal::Utterance;
use wavelet_prosody::synth::{synth_corpus, write_corpus, SynthParams};

#[derive(Parser)]
#[command(name = "wavelet-prosody", version, about = "Unsupervised word prominence and boundary annotation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Log-energy and f0 tracks from a mono 16-bit WAV file.
    Extract(ExtractArgs),
    /// Per-word prominence and boundary values.
    Annotate(AnnotateArgs),
    /// Annotate a labelled corpus and print the scores.
    Evaluate(EvaluateArgs),
    /// Write a synthetic corpus with planted labels.
    SynthCorpus(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

/// Settings shared by all subcommands. Flags override `--config`, which
/// overrides the built-in defaults.
#[derive(Args)]
struct Settings {
    /// key = value file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra key=value setting; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Comma-separated subset of f0,en,dur.
    #[arg(long)]
    features: Option<String>,
    #[arg(long, value_enum)]
    gap_fill_energy: Option<OnOff>,
    /// threshold or kmeans
    #[arg(long)]
    binarize: Option<String>,
    #[arg(long)]
    calib_fraction: Option<f64>,
    /// utterance or paragraph
    #[arg(long)]
    scale_estimation: Option<String>,
    /// male, female or MIN:MAX in Hz
    #[arg(long)]
    pitch_range: Option<String>,
    /// Seconds.
    #[arg(long)]
    frame_shift: Option<f64>,
}

impl Settings {
    fn config(&self) -> Result<Config> {
        let mut cfg = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        let mut pairs: Vec<(String, String)> = Vec::new();
        let mut flag = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                pairs.push((key.to_string(), v));
            }
        };
        flag("features", self.features.clone());
        flag(
            "gap_fill_energy",
            self.gap_fill_energy.map(|v| matches!(v, OnOff::On).to_string()),
        );
        flag("binarize", self.binarize.clone());
        flag("calib.fraction", self.calib_fraction.map(|v| v.to_string()));
        flag("scale_estimation", self.scale_estimation.clone());
        flag("extract.pitch_range", self.pitch_range.clone());
        flag("frame_shift", self.frame_shift.map(|v| v.to_string()));
        for s in &self.set {
            let (k, v) = s.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got {s:?}"))?;
            pairs.push((k.to_string(), v.to_string()));
        }
        for (k, v) in pairs {
            cfg.set(&k, &v).with_context(|| format!("setting {k}"))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct ExtractArgs {
    #[command(flatten)]
    settings: Settings,
    #[arg(long)]
    wav: PathBuf,
    /// Output f0 track (Hz, 0 when unvoiced).
    #[arg(long)]
    f0_out: PathBuf,
    /// Output log-energy track.
    #[arg(long)]
    energy_out: PathBuf,
}

/// One utterance given on the command line.
#[derive(Args)]
struct SingleInput {
    /// Recording to extract tracks from, instead of --f0/--energy.
    #[arg(long, conflicts_with_all = ["f0", "energy", "manifest"])]
    wav: Option<PathBuf>,
    #[arg(long, requires = "energy", conflicts_with = "manifest")]
    f0: Option<PathBuf>,
    #[arg(long, requires = "f0", conflicts_with = "manifest")]
    energy: Option<PathBuf>,
    #[arg(long, conflicts_with = "manifest")]
    alignment: Option<PathBuf>,
    /// Reference labels, needed for threshold binarization.
    #[arg(long, conflicts_with = "manifest")]
    refs: Option<PathBuf>,
    /// Utterance id used in output names.
    #[arg(long, default_value = "utt")]
    id: String,
}

impl SingleInput {
    fn entry(&self) -> Result<ManifestEntry> {
        let inputs = match (&self.wav, &self.f0, &self.energy) {
            (Some(w), _, _) => Inputs::Wav(w.clone()),
            (None, Some(f0), Some(en)) => Inputs::Tracks {
                f0: f0.clone(),
                energy: en.clone(),
            },
            _ => bail!("give --manifest, --wav or --f0 with --energy"),
        };
        let Some(alignment) = self.alignment.clone() else {
            bail!("--alignment is required for a single utterance");
        };
        Ok(ManifestEntry {
            utt_id: self.id.clone(),
            inputs,
            alignment,
            refs: self.refs.clone(),
            paragraph: None,
        })
    }
}

#[derive(Args)]
struct AnnotateArgs {
    #[command(flatten)]
    settings: Settings,
    /// Corpus manifest; otherwise a single utterance is read.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[command(flatten)]
    input: SingleInput,
    /// Word prosody TSV for a single utterance; stdout when omitted.
    #[arg(long, conflicts_with = "manifest")]
    output: Option<PathBuf>,
    /// Directory for per-utterance TSVs and the report (manifest mode).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Directory for scalogram and line dumps.
    #[arg(long)]
    dump_dir: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    settings: Settings,
    #[arg(long)]
    manifest: PathBuf,
    /// Directory for per-utterance TSVs and the report.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Directory for scalogram and line dumps.
    #[arg(long)]
    dump_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 50)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// dB; omit for noise-free tracks.
    #[arg(long)]
    snr: Option<f64>,
    #[arg(long, default_value_t = 0.005)]
    frame_shift: f64,
}

fn dump(dir: &Path, utterances: &[Utterance], entries: &[ManifestEntry], cfg: &Config) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut groups: BTreeMap<&str, Vec<&Utterance>> = BTreeMap::new();
    for (u, e) in utterances.iter().zip(entries) {
        groups.entry(e.paragraph_key()).or_default().push(u);
    }
    for (u, e) in utterances.iter().zip(entries) {
        let scale = match cfg.scale_estimation {
            ScaleEstimation::Utterance => word_scale(&u.words)?,
            ScaleEstimation::Paragraph => pooled_word_scale(groups[e.paragraph_key()].iter().map(|u| &u.words))?,
        };
        let a = analyze_with_scale(u, cfg, scale)?;
        write_scalogram(&dir.join(format!("{}.prom.scalogram.tsv", u.id)), &a.prominence_scalogram)?;
        write_scalogram(&dir.join(format!("{}.bound.scalogram.tsv", u.id)), &a.boundary_scalogram)?;
        write_lines(&dir.join(format!("{}.peaks.tsv", u.id)), &a.peaks)?;
        write_lines(&dir.join(format!("{}.valleys.tsv", u.id)), &a.valleys)?;
    }
    info!("wrote dumps for {} utterances to {}", utterances.len(), dir.display());
    Ok(())
}

/// Loads the entries that also load inside the corpus run, for dumping.
fn dump_entries(dir: &Path, entries: &[ManifestEntry], cfg: &Config) -> Result<()> {
    let mut ok_entries = Vec::new();
    let mut utterances = Vec::new();
    for e in entries {
        if let Ok(u) = load_utterance(e, cfg) {
            utterances.push(u);
            ok_entries.push(e.clone());
        }
    }
    dump(dir, &utterances, &ok_entries, cfg)
}

fn finish_corpus(run: &CorpusRun, out_dir: Option<&Path>) -> Result<()> {
    if let Some(dir) = out_dir {
        run.write(dir)?;
        info!("wrote {} utterances to {}", run.utterances.len(), dir.display());
    }
    print!("{}", run.report.to_text());
    Ok(())
}

fn annotate(args: AnnotateArgs) -> Result<()> {
    let cfg = args.settings.config()?;
    if let Some(path) = &args.manifest {
        let manifest = Manifest::read(path)?;
        let run = run_corpus(&manifest, &cfg)?;
        if let Some(dir) = &args.dump_dir {
            dump_entries(dir, &manifest.entries, &cfg)?;
        }
        return finish_corpus(&run, args.out_dir.as_deref());
    }
    let entry = args.input.entry()?;
    let utt = load_utterance(&entry, &cfg)?;
    if let Some(dir) = &args.dump_dir {
        dump(dir, std::slice::from_ref(&utt), std::slice::from_ref(&entry), &cfg)?;
    }
    let run = run_utterances(vec![utt], &cfg)?;
    let words = &run.utterances[0].words;
    match &args.output {
        Some(path) => write_word_prosody(path, words)?,
        None => print!("{}", wavelet_prosody::signal::io::format_word_prosody(words)),
    }
    if let Some(dir) = &args.out_dir {
        run.write(dir)?;
    }
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let cfg = args.settings.config()?;
    let manifest = Manifest::read(&args.manifest)?;
    if manifest.entries.iter().all(|e| e.refs.is_none()) {
        bail!("no manifest entry has reference labels");
    }
    let run = run_corpus(&manifest, &cfg)?;
    if let Some(dir) = &args.dump_dir {
        dump_entries(dir, &manifest.entries, &cfg)?;
    }
    finish_corpus(&run, args.out_dir.as_deref())
}

fn extract(args: ExtractArgs) -> Result<()> {
    let cfg = args.settings.config()?;
    let audio = Audio::read_wav(&args.wav)?;
    let params = VoicingParams {
        min_autocorr: cfg.voicing_min_autocorr,
        max_zcr: cfg.voicing_max_zcr,
        energy_percentile: cfg.voicing_energy_percentile,
        energy_window: cfg.extract_window,
    };
    let (f0, _) = autocorr_f0(&audio, cfg.pitch_range, cfg.frame_shift, &params)?;
    let energy = log_energy(&audio, cfg.frame_shift, cfg.extract_window)?;
    write_track(&args.f0_out, &f0)?;
    write_track(&args.energy_out, &energy)?;
    info!("{} frames", f0.len());
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let params = SynthParams {
        frame_shift: args.frame_shift,
        snr_db: args.snr,
        ..SynthParams::default()
    };
    let utterances = synth_corpus(&params, args.seed, args.count)?;
    write_corpus(&args.out_dir, &utterances)?;
    println!("{}", args.out_dir.join("manifest.tsv").display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Extract(a) => extract(a),
        Command::Annotate(a) => annotate(a),
        Command::Evaluate(a) => evaluate(a),
        Command::SynthCorpus(a) => synth(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
