use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use hytag::cg::{disambiguate_corpus, disambiguate_corpus_traced, Grammar, Tier};
use hytag::hmm::{open_class_guesser, train, BiasSpec, HmmTagger, TrainingParams};
use hytag::morph::{analyze_tokens, GuesserConfig, Lexicon};
use hytag::pipeline::{evaluate, report, report_tsv, run, ConfigLabel};
use hytag::{tokenize, AnnotatedCorpus, Tagset, TokenizationMode, TokenizationPolicy};

mod resources;

use resources::{load, ResourceDir};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_RESOURCE: u8 = 3;

#[derive(Parser)]
#[command(name = "hytag", version, about = "Rule-based and statistical part-of-speech disambiguation")]
struct Cli {
    /// Repeat for more log output (-v info, -vv debug)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tokenize text and list every lexical reading (configuration D0)
    Analyze {
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long)]
        guesser: PathBuf,
        /// Tokenization policy file (multiword units, contractions)
        #[arg(long)]
        policy: Option<PathBuf>,
        /// Input text [default: stdin]
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// Output corpus [default: stdout]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply constraint rules to an analyzed corpus
    Disambiguate {
        #[arg(long)]
        grammar: PathBuf,
        #[arg(long, value_enum, default_value_t = TierArg::Heuristic)]
        tier: TierArg,
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print every rule application to stderr
        #[arg(long)]
        trace: bool,
    },
    /// Train an HMM over coarse-lexicon classes with Baum-Welch
    TrainHmm {
        #[arg(long)]
        coarse_lexicon: PathBuf,
        /// Affix rules and open class for words outside the coarse lexicon
        #[arg(long)]
        coarse_guesser: Option<PathBuf>,
        #[arg(long)]
        bias: Option<PathBuf>,
        /// Untagged training text
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        iterations: usize,
        #[arg(long, default_value_t = 64)]
        block: usize,
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one cascade configuration over text
    Tag {
        #[arg(long, value_parser = parse_label)]
        config: ConfigLabel,
        /// Directory holding fine.lex, guesser.rules, grammar.cg, ...
        #[arg(long)]
        resources: PathBuf,
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score tagged corpora against a gold corpus
    Eval {
        #[arg(long)]
        gold: PathBuf,
        /// Output corpora, one table row each
        #[arg(long = "out", required = true, num_args = 1..)]
        outputs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TierArg {
    Grammar,
    Heuristic,
}

impl From<TierArg> for Tier {
    fn from(t: TierArg) -> Tier {
        match t {
            TierArg::Grammar => Tier::Grammar,
            TierArg::Heuristic => Tier::Heuristic,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Tsv,
}

fn parse_label(s: &str) -> Result<ConfigLabel, String> {
    s.parse().map_err(|e: hytag::Error| e.to_string())
}

/// An error message with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_DATA,
            message: message.into(),
        }
    }

    pub fn from_core(err: hytag::Error) -> Self {
        let code = if err.is_resource_inconsistency() { EXIT_RESOURCE } else { EXIT_DATA };
        CliError {
            code,
            message: err.to_string(),
        }
    }

    pub fn context(mut self, path: &Path) -> Self {
        self.message = format!("{}: {}", path.display(), self.message);
        self
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<hytag::Error> for CliError {
    fn from(err: hytag::Error) -> Self {
        CliError::from_core(err)
    }
}

impl From<io::Error> for CliError {
    fn from(err: io::Error) -> Self {
        CliError::data(err.to_string())
    }
}

fn read_text(input: Option<&Path>) -> Result<String, CliError> {
    match input {
        Some(p) => fs::read_to_string(p).map_err(|e| CliError::data(format!("{}: {e}", p.display()))),
        None => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s)?;
            Ok(s)
        }
    }
}

fn read_corpus(input: Option<&Path>, tagset: Tagset) -> Result<AnnotatedCorpus, CliError> {
    let text = read_text(input)?;
    AnnotatedCorpus::parse_str(&text, tagset).map_err(|e| match input {
        Some(p) => CliError::from_core(e).context(p),
        None => CliError::from_core(e).context(Path::new("<stdin>")),
    })
}

fn write_output(out: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), CliError> {
    let result = match out {
        Some(p) => {
            let file = File::create(p).map_err(|e| CliError::data(format!("{}: {e}", p.display())))?;
            let mut w = BufWriter::new(file);
            write(&mut w).and_then(|_| w.flush())
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            write(&mut w).and_then(|_| w.flush())
        }
    };
    result.map_err(CliError::from)
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Analyze {
            lexicon,
            guesser,
            policy,
            input,
            out,
        } => {
            let lexicon = load(&lexicon, |r| Lexicon::parse(r, Tagset::Fine))?;
            let guesser = load(&guesser, |r| GuesserConfig::parse(r, Tagset::Fine))?;
            let policy = match policy {
                Some(p) => load(&p, TokenizationPolicy::parse)?,
                None => TokenizationPolicy::default(),
            };
            let text = read_text(input.as_deref())?;
            let corpus = analyze_tokens(&tokenize(&text, &policy), &lexicon, &guesser)?;
            write_output(out.as_deref(), |w| corpus.write(w))
        }
        Command::Disambiguate {
            grammar,
            tier,
            input,
            out,
            trace,
        } => {
            let grammar = load(&grammar, Grammar::parse)?;
            let corpus = read_corpus(input.as_deref(), Tagset::Fine)?;
            let result = if trace {
                let stderr = io::stderr();
                let mut err = stderr.lock();
                disambiguate_corpus_traced(corpus, &grammar, tier.into(), &mut |event| {
                    let _ = writeln!(err, "{event}");
                })
            } else {
                disambiguate_corpus(corpus, &grammar, tier.into())
            };
            write_output(out.as_deref(), |w| result.write(w))
        }
        Command::TrainHmm {
            coarse_lexicon,
            coarse_guesser,
            bias,
            corpus,
            iterations,
            block,
            epsilon,
            out,
        } => {
            let lexicon = load(&coarse_lexicon, |r| Lexicon::parse(r, Tagset::Coarse))?;
            let guesser = match coarse_guesser {
                Some(p) => load(&p, |r| GuesserConfig::parse(r, Tagset::Coarse))?,
                None => open_class_guesser(&lexicon)?,
            };
            let biases = match bias {
                Some(p) => load(&p, BiasSpec::parse)?,
                None => BiasSpec::default(),
            };
            let text = read_text(Some(&corpus))?;
            let model = HmmTagger::initial_model(&lexicon, &guesser, &biases)?;
            let tagger = HmmTagger::new(model, lexicon, guesser);
            let policy = TokenizationPolicy::default().with_mode(TokenizationMode::Coarse);
            let sentences = tokenize(&text, &policy)
                .iter()
                .map(|s| tagger.encode(&s.iter().map(|t| t.surface.as_str()).collect::<Vec<_>>()))
                .collect::<hytag::Result<Vec<_>>>()?;
            let params = TrainingParams {
                iterations,
                block_size: block,
                convergence_epsilon: epsilon,
            };
            let outcome = train(tagger.model(), &sentences, &params)?;
            for (k, ll) in outcome.log_likelihoods.iter().enumerate() {
                info!("after {k} updates: log-likelihood {ll:.6}");
            }
            write_output(Some(&out), |w| outcome.model.write(w))
        }
        Command::Tag {
            config,
            resources,
            input,
            out,
        } => {
            let res = ResourceDir::new(&resources).load_for(config)?;
            let text = read_text(input.as_deref())?;
            let output = run(config, &text, &res)?;
            if config.uses_hmm() {
                info!("{config}: {} cohorts left ambiguous by the mapping", output.residual_count());
            }
            write_output(out.as_deref(), |w| output.corpus.write(w))
        }
        Command::Eval { gold, outputs, format } => {
            let gold_corpus = read_corpus(Some(&gold), Tagset::Fine)?;
            let mut rows = Vec::with_capacity(outputs.len());
            for path in &outputs {
                let corpus = read_corpus(Some(path), Tagset::Fine)?;
                let label = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
                rows.push(evaluate(&corpus, &gold_corpus, label).map_err(|e| CliError::from_core(e).context(path))?);
            }
            let text = match format {
                Format::Table => report(&rows)?,
                Format::Tsv => report_tsv(&rows),
            };
            write_output(None, |w| w.write_all(text.as_bytes()))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hytag: {e}");
            ExitCode::from(e.code)
        }
    }
}
