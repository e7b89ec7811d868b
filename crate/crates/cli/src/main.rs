use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use persona_signal::corpus::{load_corpus, save_corpus, Corpus, Label};
use persona_signal::gbt::GBTParams;
use persona_signal::pipeline::{
    age_group_anova, age_label_association, class_comparison, cross_validate, disclosed_age_groups, featurize_corpus,
    fit_ngram_vocabulary, generate_synthetic_corpus, schema_alpha, CvConfig, FeatureTable, FeaturizeConfig, GbtLearner,
    GeneratorSpec, Imputer, PipelineModel,
};
use persona_signal::providers::{DirImageSource, FixtureProvider, RemoteProvider, VisionProvider};
use persona_signal::select::{shadow_select, ForestParams, SelectParams};
use persona_signal::stats::TestResult;
use persona_signal::textfeat::NgramConfig;
use persona_signal::{Error, Result};

/// Multimodal profile featurization, feature selection and boosted-tree
/// classification.
#[derive(Debug, Parser)]
#[command(name = "persona-signal", version)]
struct Cli {
    /// Worker threads; results do not depend on this value.
    #[arg(long, global = true, env = "PERSONA_SIGNAL_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a labeled synthetic corpus with images and provider fixtures.
    Synth(SynthArgs),
    /// Validate a corpus and print a per-user summary.
    Ingest(IngestArgs),
    /// Extract the fused feature table.
    Featurize(FeaturizeArgs),
    /// Group comparisons: per-feature Welch tests, age-group ANOVA and an
    /// age by label chi-square test.
    Stats(StatsArgs),
    /// Shadow-feature selection ranking.
    Select(SelectArgs),
    /// Fit a pipeline model on the whole corpus.
    Train(TrainArgs),
    /// Stratified k-fold cross-validation.
    Evaluate(EvaluateArgs),
    /// Score every user of a corpus with a trained model.
    Predict(PredictArgs),
    /// Per-feature log-odds waterfall for one user.
    Explain(ExplainArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Total users, split evenly between the classes.
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Depressed users; overrides the even split together with `--control`.
    #[arg(long, requires = "control")]
    depressed: Option<usize>,
    #[arg(long, requires = "depressed")]
    control: Option<usize>,
    #[arg(long)]
    seed: u64,
    /// Corpus path; fixtures go to `<out>.fixtures` and images below the
    /// corpus directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProviderMode {
    Fixture,
    Remote,
}

#[derive(Debug, Args)]
struct InputArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Provider fixture file. Defaults to `<corpus>.fixtures`.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// Directory image references resolve against. Defaults to the corpus
    /// directory.
    #[arg(long)]
    images: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ProviderMode::Fixture)]
    provider: ProviderMode,
    /// Vision service URL for `--provider remote`.
    #[arg(long)]
    endpoint: Option<String>,
    /// Adds the top-k word n-grams (n <= 2) fitted on the corpus as features.
    #[arg(long)]
    ngrams: Option<usize>,
}

#[derive(Debug, Args)]
struct OutArgs {
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Rewrite the parsed corpus in canonical form.
    #[arg(long)]
    normalized: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct FeaturizeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Feature compared across disclosed age groups.
    #[arg(long, default_value = "profile_naturalness")]
    anova_feature: String,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct ForestArgs {
    /// Shadow iterations.
    #[arg(long, default_value_t = 20)]
    iterations: usize,
    #[arg(long, default_value_t = 100)]
    trees: usize,
    #[arg(long, default_value_t = 0.05)]
    select_alpha: f64,
}

impl ForestArgs {
    fn params(&self, seed: u64) -> SelectParams {
        SelectParams {
            iterations: self.iterations,
            alpha: self.select_alpha,
            forest: ForestParams { trees: self.trees, seed, ..Default::default() },
        }
    }
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    forest: ForestArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct BoostArgs {
    #[arg(long, default_value_t = 200)]
    rounds: usize,
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    #[arg(long, default_value_t = 4)]
    max_depth: usize,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0.0)]
    l1: f64,
    #[arg(long, default_value_t = 1.0)]
    min_child_hessian: f64,
}

impl BoostArgs {
    fn params(&self, seed: u64) -> GBTParams {
        GBTParams {
            rounds: self.rounds,
            learning_rate: self.learning_rate,
            max_depth: self.max_depth,
            lambda: self.lambda,
            gamma: self.gamma,
            alpha: self.l1,
            min_child_hessian: self.min_child_hessian,
            seed,
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    seed: u64,
    /// Model output path.
    #[arg(long)]
    model: PathBuf,
    /// Run shadow selection before fitting.
    #[arg(long)]
    select: bool,
    #[command(flatten)]
    boost: BoostArgs,
    #[command(flatten)]
    forest: ForestArgs,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// Run shadow selection inside every training fold.
    #[arg(long)]
    select: bool,
    #[command(flatten)]
    boost: BoostArgs,
    #[command(flatten)]
    forest: ForestArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct ExplainArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    user: String,
    #[command(flatten)]
    out: OutArgs,
}

fn emit(out: &OutArgs, text: &str) -> Result<()> {
    match &out.out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::InvalidInput(format!("{}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            match stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    Err(Error::InvalidInput(format!("stdout: {e}")))
                }
                _ => Ok(()),
            }
        }
    }
}

fn sidecar(corpus: &Path) -> PathBuf {
    let mut s = corpus.as_os_str().to_owned();
    s.push(".fixtures");
    PathBuf::from(s)
}

fn corpus_dir(corpus: &Path) -> PathBuf {
    match corpus.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

struct Loaded {
    corpus: Corpus,
    config: FeaturizeConfig,
    images: DirImageSource,
    provider: Box<dyn VisionProvider>,
}

impl InputArgs {
    fn load(&self) -> Result<Loaded> {
        let corpus = load_corpus(&self.corpus)?;
        let root = self.images.clone().unwrap_or_else(|| corpus_dir(&self.corpus));
        let provider: Box<dyn VisionProvider> = match self.provider {
            ProviderMode::Fixture => {
                let path = self.fixtures.clone().unwrap_or_else(|| sidecar(&self.corpus));
                if path.exists() {
                    Box::new(FixtureProvider::load(&path)?)
                } else if self.fixtures.is_some() {
                    return Err(Error::NotFound(path.display().to_string()));
                } else {
                    log::warn!("no fixture file at {}; face and OCR features will be masked", path.display());
                    Box::new(FixtureProvider::new())
                }
            }
            ProviderMode::Remote => {
                let endpoint = self
                    .endpoint
                    .clone()
                    .ok_or_else(|| Error::InvalidInput("--provider remote needs --endpoint".into()))?;
                Box::new(RemoteProvider::new(endpoint, DirImageSource::new(&root), 4))
            }
        };
        let mut config = FeaturizeConfig::default();
        if let Some(k) = self.ngrams {
            config.ngrams = Some(fit_ngram_vocabulary(&corpus, NgramConfig { max_n: 2, top_k: k }));
        }
        Ok(Loaded { corpus, config, images: DirImageSource::new(root), provider })
    }
}

impl Loaded {
    fn table(&self) -> FeatureTable {
        featurize_corpus(&self.corpus, &self.config, &self.images, self.provider.as_ref())
    }
}

fn synth(a: &SynthArgs) -> Result<String> {
    let spec = match (a.depressed, a.control) {
        (Some(d), Some(c)) => GeneratorSpec::calibrated(d, c),
        _ => GeneratorSpec::balanced(a.n),
    };
    let s = generate_synthetic_corpus(&spec, a.seed)?;
    s.write(&a.out, &sidecar(&a.out), &corpus_dir(&a.out))?;
    Ok(format!("users\t{}\nimages\t{}\nfixtures\t{}\n", s.corpus.len(), s.images.len(), s.provider.len()))
}

fn ingest(a: &IngestArgs) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let root = corpus_dir(&a.corpus);
    let mut out = String::from("user_id\tlabel\ttweets\tprofile_image\tshared_images\tmissing_images\treply_edges\n");
    for u in &corpus.users {
        let refs = u.profile_image.iter().chain(&u.shared_images);
        let missing = refs.filter(|r| !root.join(r).exists()).count();
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            u.user_id,
            u.label.map(|l| l.to_string()).unwrap_or_default(),
            u.tweets.len(),
            u8::from(u.profile_image.is_some()),
            u.shared_images.len(),
            missing,
            u.reply_edges.len()
        );
    }
    if let Some(p) = &a.normalized {
        save_corpus(&corpus, p)?;
    }
    emit(&a.out, &out)
}

fn fmt_test(t: &TestResult) -> String {
    format!(
        "{:.6}\t{:.6}\t{}\t{:.6e}",
        t.statistic,
        t.df,
        t.df2.map(|d| format!("{d:.6}")).unwrap_or_default(),
        t.p_value
    )
}

fn stats(a: &StatsArgs) -> Result<String> {
    let loaded = a.input.load()?;
    let table = loaded.table();
    let level = schema_alpha(&table.schema, a.alpha)?;
    let mut out = String::new();
    let _ =
        writeln!(out, "# class comparison\talpha\t{}\tfeatures\t{}\tlevel\t{level:.6e}", a.alpha, table.schema.len());
    out.push_str("feature\tmodality\tmean_depressed\tmean_control\tt\tdf\tdf2\tp\tci_low\tci_high\tsignificant\n");
    for row in class_comparison(&table) {
        let _ = write!(out, "{}\t{}\t{:.6}\t{:.6}\t", row.feature, row.modality, row.mean_depressed, row.mean_control);
        match &row.test {
            Some(t) => {
                let (lo, hi) = t.ci95.unwrap_or((f64::NAN, f64::NAN));
                let _ = writeln!(out, "{}\t{lo:.6}\t{hi:.6}\t{}", fmt_test(t), u8::from(t.significant(level)));
            }
            None => out.push_str("NA\tNA\t\tNA\tNA\tNA\t0\n"),
        }
    }
    let groups = disclosed_age_groups(&loaded.corpus);
    let _ = writeln!(out, "# age-group anova\tfeature\t{}", a.anova_feature);
    match age_group_anova(&table, &groups, &a.anova_feature) {
        Ok((summary, test)) => {
            out.push_str("group\tmean\tsd\n");
            for (g, m, sd) in summary {
                let _ = writeln!(out, "{g}\t{m:.6}\t{sd:.6}");
            }
            let _ = writeln!(out, "F\tdf1\tdf2\tp\n{}", fmt_test(&test));
        }
        Err(e) => {
            let _ = writeln!(out, "unavailable\t{e}");
        }
    }
    out.push_str("# age by label chi-square\n");
    match age_label_association(&loaded.corpus) {
        Ok((rows, test)) => {
            let _ = writeln!(out, "groups\t{}", rows.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(","));
            let _ = writeln!(out, "chi2\tdf\tdf2\tp\n{}", fmt_test(&test));
        }
        Err(e) => {
            let _ = writeln!(out, "unavailable\t{e}");
        }
    }
    Ok(out)
}

fn select(a: &SelectArgs) -> Result<String> {
    let table = a.input.load()?.table();
    let y = table.targets()?;
    let imputer = Imputer::fit(&table.rows)?;
    let x = imputer.transform_all(&table.rows)?;
    let report = shadow_select(&x, &y, &imputer.output_names(), &a.forest.params(a.seed))?;
    let mut out = String::from("feature\tz\thits\ttrials\tverdict\n");
    for f in report.ranking() {
        let _ = writeln!(out, "{}\t{:.6}\t{}\t{}\t{}", f.feature, f.z_mean_importance, f.hits, f.trials, f.verdict);
    }
    Ok(out)
}

fn train(a: &TrainArgs) -> Result<String> {
    let loaded = a.input.load()?;
    let table = loaded.table();
    let sel = a.select.then(|| a.forest.params(a.seed));
    let model = PipelineModel::fit(&table, &a.boost.params(a.seed), sel.as_ref(), loaded.config.ngrams.clone())?;
    model.save(&a.model)?;
    Ok(format!(
        "users\t{}\nfeatures\t{}\nkept\t{}\ntrees\t{}\n",
        table.len(),
        table.schema.len(),
        model.kept.len(),
        model.model.trees.len()
    ))
}

fn evaluate(a: &EvaluateArgs) -> Result<String> {
    let table = a.input.load()?.table();
    let y = table.targets()?;
    let cfg = CvConfig { k: a.folds, seed: a.seed, selection: a.select.then(|| a.forest.params(a.seed)) };
    let report = cross_validate(&table.rows, &y, &GbtLearner(a.boost.params(a.seed)), &cfg)?;
    Ok(report.to_tsv())
}

fn model_inputs(input: &InputArgs, model: &PipelineModel) -> Result<FeatureTable> {
    let mut loaded = input.load()?;
    loaded.config.ngrams = model.ngrams.clone();
    Ok(loaded.table())
}

fn predict(a: &PredictArgs) -> Result<String> {
    let model = PipelineModel::load(&a.model)?;
    let table = model_inputs(&a.input, &model)?;
    let mut out = String::from("user_id\tlogodds\tprobability\tpredicted\n");
    for (id, row) in table.user_ids.iter().zip(&table.rows) {
        let z = model.predict_logodds(row)?;
        let p = model.predict_proba(row)?;
        let label = if p >= 0.5 { Label::Depressed } else { Label::Control };
        let _ = writeln!(out, "{id}\t{z:.6}\t{p:.6}\t{label}");
    }
    Ok(out)
}

fn explain(a: &ExplainArgs) -> Result<String> {
    let model = PipelineModel::load(&a.model)?;
    let table = model_inputs(&a.input, &model)?;
    let i = table.user_ids.iter().position(|u| *u == a.user).ok_or_else(|| Error::UnknownUser(a.user.clone()))?;
    let w = model.explain(&table.rows[i])?;
    let mut out = String::from("feature\tdelta\trunning_total\n");
    let _ = writeln!(out, "bias\t{:.9}\t{:.9}", w.bias, w.bias);
    for (f, d, run) in w.rows() {
        let _ = writeln!(out, "{f}\t{d:.9}\t{run:.9}");
    }
    let _ = writeln!(out, "final_logodds\t\t{:.9}\nprobability\t\t{:.9}", w.final_logodds, w.probability);
    Ok(out)
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(a) => {
            let s = synth(a)?;
            emit(&OutArgs { out: None }, &s)
        }
        Command::Ingest(a) => ingest(a),
        Command::Featurize(a) => emit(&a.out, &a.input.load()?.table().to_tsv()),
        Command::Stats(a) => emit(&a.out, &stats(a)?),
        Command::Select(a) => emit(&a.out, &select(a)?),
        Command::Train(a) => emit(&OutArgs { out: None }, &train(a)?),
        Command::Evaluate(a) => emit(&a.out, &evaluate(a)?),
        Command::Predict(a) => emit(&a.out, &predict(a)?),
        Command::Explain(a) => emit(&a.out, &explain(a)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
