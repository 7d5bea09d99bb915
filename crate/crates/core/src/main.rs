use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use mhrnn::corpus::{load_control, load_corpus, Corpus};
use mhrnn::metrics::{evaluate, TruthSet};
use mhrnn::model_io::{load_alphabet, load_model, save_alphabet, save_model};
use mhrnn::pipeline::{run_pipeline, score_model, write_answers, EnsembleSpec, PreparedCorpus};
use mhrnn::preprocess::{build_alphabet, canonical_text, decode_utf8, encode, CanonicalRules, DEFAULT_THRESHOLD};
use mhrnn::scoring::VerdictSet;
use mhrnn::synth::{generate_synthetic, SynthSpec};
use mhrnn::trainer::{train_run, TrainConfig};
use mhrnn::{Error, Language, Result};

#[derive(Parser)]
#[command(name = "mhrnn", version, about = "Authorship verification with multi-headed character RNNs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Canonicalize a text file. Without --alphabet, induce and print an
    /// alphabet; with one, print the encoded canonical text.
    Preprocess {
        #[arg(long)]
        lang: Language,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        alphabet: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic corpus with truth file.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        problems: usize,
        #[arg(long, default_value_t = 2)]
        authors: usize,
        #[arg(long, default_value_t = 3000)]
        chars: usize,
        #[arg(long, default_value_t = 1.0)]
        separation: f64,
    },
    /// Train one model; writes <out> and <out>.alphabet.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        control: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        lang: Option<Language>,
        /// Training log, tab-separated.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Score a corpus with a trained model and write answers.
    Score {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Defaults to <model>.alphabet.
        #[arg(long)]
        alphabet: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Dump raw and normalized entropy matrices to <matrix>.raw.tsv and <matrix>.norm.tsv.
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        lang: Option<Language>,
    },
    /// Compare an answers file with a truth file: AUC, C@1, product.
    Evaluate {
        #[arg(long)]
        answers: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Train, score and average every member of an ensemble.
    Ensemble {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        control: Option<PathBuf>,
        /// Replace member seeds with seed, seed+1, ...
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        lang: Option<Language>,
        #[arg(long)]
        radius: Option<f64>,
    },
}

fn read_corpus(dir: &Path, lang: Option<Language>, control: Option<&Path>) -> Result<Corpus> {
    let mut corpus = load_corpus(dir, lang)?;
    if let Some(path) = control {
        corpus.control = Some(load_control(path)?);
    }
    Ok(corpus)
}

fn load_config(path: Option<&Path>) -> Result<TrainConfig> {
    match path {
        Some(p) => TrainConfig::load(p),
        None => Ok(TrainConfig::default()),
    }
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io { path: p.into(), source: e }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Preprocess { lang, input, alphabet, out } => {
            let bytes = std::fs::read(&input).map_err(|e| Error::Io { path: input.clone(), source: e })?;
            let text = decode_utf8(&bytes).map_err(|e| Error::Format { path: input.clone(), message: e.to_string() })?;
            let rules = CanonicalRules::for_language(lang);
            let canonical = canonical_text(text, &rules);
            match alphabet {
                None => {
                    let alphabet = build_alphabet(&[canonical], DEFAULT_THRESHOLD)?;
                    write_or_print(out.as_deref(), &alphabet.to_text())
                }
                Some(path) => {
                    let alphabet = load_alphabet(&path)?;
                    let seq = encode(&input.to_string_lossy(), &canonical, &alphabet);
                    write_or_print(out.as_deref(), &format!("{}\n", alphabet.decode(&seq.indices)))
                }
            }
        }
        Command::Synth { out, seed, problems, authors, chars, separation } => {
            let spec = SynthSpec { authors, problems, chars_per_doc: chars, separation, seed };
            generate_synthetic(&spec)?.write_dir(&out)
        }
        Command::Train { corpus, config, out, control, seed, lang, log } => {
            let mut config = load_config(config.as_deref())?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            let prepared = PreparedCorpus::new(read_corpus(&corpus, lang, control.as_deref())?)?;
            info!("alphabet of {} symbols", prepared.alphabet.len());
            let trained = train_run(&prepared.training_set(&config), &config)?;
            save_model(&out, &trained.params, &prepared.alphabet)?;
            save_alphabet(&with_suffix(&out, ".alphabet"), &prepared.alphabet)?;
            if let Some(log) = log {
                std::fs::write(&log, trained.log.to_tsv()).map_err(|e| Error::Io { path: log, source: e })?;
            }
            Ok(())
        }
        Command::Score { corpus, model, alphabet, config, out, matrix, radius, lang } => {
            let config = load_config(config.as_deref())?;
            let alphabet = load_alphabet(&alphabet.unwrap_or_else(|| with_suffix(&model, ".alphabet")))?;
            let params = load_model(&model, &alphabet)?;
            let prepared = PreparedCorpus::with_alphabet(read_corpus(&corpus, lang, None)?, alphabet)?;
            let radius = prepared.uncertainty_radius(radius);
            let (raw, normalized, _, verdicts) = score_model(&prepared, &params, &config, radius)?;
            if let Some(m) = matrix {
                for (suffix, mat) in [(".raw.tsv", &raw), (".norm.tsv", &normalized)] {
                    let path = with_suffix(&m, suffix);
                    std::fs::write(&path, mat.to_tsv()).map_err(|e| Error::Io { path, source: e })?;
                }
            }
            write_answers(&out, &verdicts)?;
            report(&prepared, &verdicts)
        }
        Command::Evaluate { answers, truth } => {
            let text = std::fs::read_to_string(&answers).map_err(|e| Error::Io { path: answers.clone(), source: e })?;
            let verdicts = VerdictSet::from_answers(&text)
                .map_err(|e| Error::Format { path: answers.clone(), message: e.to_string() })?;
            let truth = TruthSet::load(&truth)?;
            let e = evaluate(&verdicts, &truth)?;
            println!("AUC\tC@1\tscore");
            println!("{}", e.to_tsv());
            Ok(())
        }
        Command::Ensemble { corpus, config, out, control, seed, lang, radius } => {
            let mut spec = EnsembleSpec::load(&config)?;
            if let Some(seed) = seed {
                for (i, m) in spec.members.iter_mut().enumerate() {
                    m.seed = seed + i as u64;
                }
            }
            let corpus_dir = corpus
                .or_else(|| spec.corpus.clone())
                .ok_or_else(|| Error::Config("no corpus given (--corpus or \"corpus\" in the spec)".into()))?;
            let out = out
                .or_else(|| spec.output.clone())
                .ok_or_else(|| Error::Config("no output given (--out or \"output\" in the spec)".into()))?;
            let prepared = PreparedCorpus::new(read_corpus(&corpus_dir, lang, control.as_deref())?)?;
            let result = run_pipeline(&prepared, &spec.members, radius.or(spec.uncertainty_radius))?;
            write_answers(&out, &result.ensemble)?;
            for (i, e) in result.member_evaluations.iter().enumerate() {
                info!("member {i}: {}", e.to_tsv());
            }
            report(&prepared, &result.ensemble)
        }
    }
}

fn report(prepared: &PreparedCorpus, verdicts: &VerdictSet) -> Result<()> {
    if let Some(truth) = &prepared.corpus.truth {
        let e = evaluate(verdicts, truth)?;
        println!("AUC\tC@1\tscore");
        println!("{}", e.to_tsv());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
