use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::path::{Path, PathBuf};

use serde::Serialize;
use triage_core::backend::train_baseline;
use triage_core::cascade::{summarize, triage_with, EnsembleResult, Gating, TriageOutcome};
use triage_core::corpus::{corpus_to_bytes, load_corpus, write_atomic, Corpus, LabeledReport, LoadOptions};
use triage_core::metrics::{eval_report, render_table, EvalReport};
use triage_core::preprocess::Pipeline;
use triage_core::sampler::{build_dataset, SplitSpec, UndersamplePolicy};
use triage_core::synth::{synth_corpus, SynthSpec};
use triage_core::{Error, Label, Task};

use crate::config::{default_model_path, RunConfig};
use crate::{BuildDatasetArgs, Cli, CliError, Command, EvaluateArgs, SynthArgs, TrainArgs, TriageArgs};

type CliResult<T = ()> = Result<T, CliError>;

struct Ctx {
    config: RunConfig,
    out_dir: PathBuf,
    seed: Option<u64>,
    strict: bool,
}

impl Ctx {
    fn seed(&self, command: &str) -> CliResult<u64> {
        self.seed.ok_or_else(|| {
            CliError::validation(format!(
                "{command} is randomized: pass --seed or set `seed` in the config"
            ))
        })
    }

    fn load_options(&self) -> CliResult<LoadOptions> {
        Ok(LoadOptions {
            strict: self.strict,
            sectioner: self.config.sectioner()?,
        })
    }

    fn load(&self, path: &Path) -> CliResult<Corpus> {
        if !path.exists() {
            return Err(CliError::validation(format!("{}: no such file", path.display())));
        }
        Ok(load_corpus(path, &self.load_options()?)?)
    }

    fn corpus_path(&self, flag: &Option<PathBuf>) -> CliResult<PathBuf> {
        flag.clone()
            .or_else(|| self.config.corpus.clone())
            .ok_or_else(|| CliError::validation("no corpus given: pass --corpus or set `corpus` in the config"))
    }
}

pub fn run(cli: Cli) -> CliResult {
    let config = match &cli.global.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let ctx = Ctx {
        out_dir: cli
            .global
            .out_dir
            .clone()
            .or_else(|| config.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out")),
        seed: cli.global.seed.or(config.seed),
        strict: cli.global.strict,
        config,
    };
    match cli.command {
        Command::Synth(a) => synth(&ctx, a),
        Command::BuildDataset(a) => build(&ctx, a),
        Command::TrainBaseline(a) => train(&ctx, a),
        Command::Triage(a) => triage(&ctx, a),
        Command::Evaluate(a) => evaluate(&ctx, a),
    }
}

fn write_output(path: &Path, bytes: &[u8]) -> CliResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::from(Error::io(parent, e)))?;
    }
    Ok(write_atomic(path, bytes)?)
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable");
    bytes.push(b'\n');
    bytes
}

fn synth(ctx: &Ctx, a: SynthArgs) -> CliResult {
    let spec = SynthSpec {
        n_reports: a.n,
        cancer_fraction: a.cancer_frac,
        reportable_fraction_within_cancer: a.reportable_frac,
        vocabulary_signal_strength: a.signal,
    };
    spec.validate()?;
    let seed = ctx.seed("synth")?;
    let corpus = synth_corpus(&spec, seed)?;
    let path = a.out.unwrap_or_else(|| ctx.out_dir.join("corpus.jsonl"));
    write_output(&path, &corpus_to_bytes(&corpus))?;
    println!(
        "wrote {} reports ({} cancer, {} reportable) to {} (seed {seed})",
        corpus.len(),
        spec.cancer_count(),
        spec.reportable_count(),
        path.display()
    );
    Ok(())
}

fn dataset_dir(out_dir: &Path, task: Task) -> PathBuf {
    out_dir.join("datasets").join(task.as_str())
}

fn build(ctx: &Ctx, a: BuildDatasetArgs) -> CliResult {
    let seed = ctx.seed("build-dataset")?;
    let corpus = ctx.load(&ctx.corpus_path(&a.corpus)?)?;
    let sampler = &ctx.config.sampler;
    let split = SplitSpec {
        train_fraction: sampler.train_fraction,
        seed,
        stratified: sampler.stratified,
    };
    let policy = UndersamplePolicy::for_task(a.tier, sampler.ratio(a.tier), seed);
    let built = build_dataset(&corpus, &split, &policy)?;

    let dir = dataset_dir(&ctx.out_dir, a.tier);
    write_output(&dir.join("train.jsonl"), &corpus_to_bytes(&built.train))?;
    write_output(&dir.join("test.jsonl"), &corpus_to_bytes(&built.test))?;
    write_output(&dir.join("manifest.json"), &to_json(&built.manifest))?;

    let m = &built.manifest;
    let after = &m.counts_train_after;
    println!(
        "{}: train {} ({} {}, {} {}), test {}; written to {}",
        a.tier,
        built.train.len(),
        after.get(policy.kept_class),
        policy.kept_class,
        after.get(policy.sampled_class),
        policy.sampled_class,
        built.test.len(),
        dir.display()
    );
    Ok(())
}

fn train(ctx: &Ctx, a: TrainArgs) -> CliResult {
    let seed = ctx.seed("train-baseline")?;
    let dataset = a
        .dataset
        .unwrap_or_else(|| dataset_dir(&ctx.out_dir, a.tier).join("train.jsonl"));
    let corpus = ctx.load(&dataset)?;
    let member = ctx.config.member(a.tier, a.variant);
    let pipeline = match &member {
        Some(m) => Pipeline::new(a.variant).with_budget(m.token_budget),
        None => Pipeline::new(a.variant),
    };
    let data = corpus
        .records
        .iter()
        .map(|r| {
            let label = r.label(a.tier).ok_or_else(|| Error::MissingLabel {
                report_id: r.id().to_owned(),
                task: a.tier,
            })?;
            Ok((pipeline.assemble(&r.report)?, label.is_positive()))
        })
        .collect::<Result<Vec<_>, Error>>()?;

    let model = train_baseline(&data, &ctx.config.training, seed)?;
    let path = a.model_out.unwrap_or_else(|| match &member {
        Some(m) => ctx.config.model_path(&ctx.out_dir, a.tier, m),
        None => default_model_path(&ctx.out_dir, a.tier, a.variant),
    });
    write_output(&path, &model.to_bytes())?;
    println!(
        "{} {}: final training loss {:.6}, seed {seed}, training accuracy {:.4}, {} examples; model {}",
        a.tier,
        a.variant,
        model.final_loss().unwrap_or(f64::NAN),
        model.accuracy(&data),
        data.len(),
        path.display()
    );
    Ok(())
}

fn triage(ctx: &Ctx, a: TriageArgs) -> CliResult {
    let corpus = ctx.load(&ctx.corpus_path(&a.corpus)?)?;
    let path = a.outcomes.unwrap_or_else(|| ctx.out_dir.join("outcomes.jsonl"));
    let outcomes = if corpus.is_empty() {
        Vec::new()
    } else {
        if a.gating == Gating::Gold {
            if let Some(r) = corpus.records.iter().find(|r| r.t1_label.is_none()) {
                return Err(CliError::validation(format!(
                    "gold gating needs t1 labels; report {:?} has none",
                    r.id()
                )));
            }
        }
        let t1 = ctx.config.build_tier(Task::T1, &ctx.out_dir)?;
        let t2 = ctx.config.build_tier(Task::T2, &ctx.out_dir)?;
        triage_with(&corpus.records, &t1, &t2, a.gating)?
    };

    let mut bytes = Vec::new();
    for o in &outcomes {
        serde_json::to_writer(&mut bytes, o).expect("outcome serializes");
        bytes.push(b'\n');
    }
    write_output(&path, &bytes)?;
    let counts: Vec<String> = summarize(&outcomes)
        .iter()
        .map(|(label, n)| format!("{}={n}", label.as_str()))
        .collect();
    println!(
        "triaged {} reports ({} gating): {}; outcomes {}",
        outcomes.len(),
        a.gating.as_str(),
        counts.join(" "),
        path.display()
    );
    Ok(())
}

fn read_outcomes(path: &Path) -> CliResult<Vec<TriageOutcome>> {
    let file = std::fs::File::open(path).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::from(Error::io(path, e)))?;
        if line.trim().is_empty() {
            continue;
        }
        let o: TriageOutcome = serde_json::from_str(&line)
            .map_err(|e| CliError::validation(format!("{} line {}: {e}", path.display(), i + 1)))?;
        out.push(o);
    }
    Ok(out)
}

fn id_list(ids: &[&str]) -> String {
    const SHOWN: usize = 10;
    let mut s = ids
        .iter()
        .take(SHOWN)
        .map(|id| format!("{id:?}"))
        .collect::<Vec<_>>()
        .join(", ");
    if ids.len() > SHOWN {
        s.push_str(&format!(" and {} more", ids.len() - SHOWN));
    }
    s
}

/// Pairs every outcome with its gold record; any id without a partner is an error.
fn join<'a>(outcomes: &'a [TriageOutcome], gold: &'a Corpus) -> CliResult<Vec<(&'a TriageOutcome, &'a LabeledReport)>> {
    let by_id: BTreeMap<&str, &LabeledReport> = gold.records.iter().map(|r| (r.id(), r)).collect();
    let outcome_ids: BTreeSet<&str> = outcomes.iter().map(|o| o.report_id.as_str()).collect();
    if outcome_ids.len() != outcomes.len() {
        return Err(CliError::validation("outcome file repeats a report_id"));
    }
    let no_gold: Vec<&str> = outcome_ids
        .iter()
        .filter(|id| !by_id.contains_key(*id))
        .copied()
        .collect();
    let no_outcome: Vec<&str> = by_id.keys().filter(|id| !outcome_ids.contains(*id)).copied().collect();
    if !no_gold.is_empty() || !no_outcome.is_empty() {
        let mut msg = String::from("unjoinable report_ids:");
        if !no_gold.is_empty() {
            msg.push_str(&format!(
                " {} outcome(s) without gold: {};",
                no_gold.len(),
                id_list(&no_gold)
            ));
        }
        if !no_outcome.is_empty() {
            msg.push_str(&format!(
                " {} gold record(s) without outcome: {};",
                no_outcome.len(),
                id_list(&no_outcome)
            ));
        }
        return Err(CliError::validation(msg.trim_end_matches(';')));
    }
    Ok(outcomes.iter().map(|o| (o, by_id[o.report_id.as_str()])).collect())
}

#[derive(Serialize)]
struct ModelEval<'a> {
    model: &'a str,
    report: &'a EvalReport,
}

#[derive(Serialize)]
struct EvalFile<'a> {
    task: Task,
    gating: Gating,
    n_evaluated: usize,
    models: Vec<ModelEval<'a>>,
}

/// Labels per model (member A, member B, combined) for one evaluated record.
fn model_labels(r: &EnsembleResult) -> Vec<Label> {
    r.member_decisions
        .iter()
        .map(|d| d.label)
        .chain(std::iter::once(r.combined_label))
        .collect()
}

fn evaluate(ctx: &Ctx, a: EvaluateArgs) -> CliResult {
    let outcomes = read_outcomes(&a.outcomes)?;
    let gold = ctx.load(&a.gold)?;
    let pairs = join(&outcomes, &gold)?;
    let recorded: BTreeSet<Gating> = outcomes.iter().map(|o| o.gating).collect();
    let gating = match a.gating {
        Some(g) => g,
        None if recorded.len() == 1 => *recorded.first().unwrap(),
        None if recorded.is_empty() => Gating::Predicted,
        None => return Err(CliError::validation("outcomes mix gating modes; pass --gating")),
    };

    let task = a.tier;
    let mut names: Option<Vec<String>> = None;
    let mut preds: Vec<Vec<Label>> = Vec::new();
    let mut golds: Vec<Label> = Vec::new();
    for (o, g) in &pairs {
        let (ensemble, gold_label) = match task {
            Task::T1 => (Some(&o.t1), g.label(Task::T1)),
            Task::T2 => match gating {
                Gating::Predicted => {
                    if g.t2_label.is_none() {
                        continue;
                    }
                    (o.t2.as_ref(), g.label(Task::T2))
                }
                Gating::Gold => {
                    if !g.t1_label.is_some_and(|l| l.is_positive()) {
                        continue;
                    }
                    let r = o.t2_for_evaluation().ok_or_else(|| {
                        CliError::validation(format!(
                            "report {:?} is a gold cancer without a tier-2 result; rerun triage with --gating gold",
                            o.report_id
                        ))
                    })?;
                    (Some(r), g.label(Task::T2))
                }
            },
        };
        let gold_label = gold_label.ok_or_else(|| Error::MissingLabel {
            report_id: o.report_id.clone(),
            task,
        })?;
        let labels = match ensemble {
            Some(r) => {
                let ids: Vec<String> = r.member_decisions.iter().map(|d| d.backend_id.clone()).collect();
                match &names {
                    None => names = Some(ids),
                    Some(n) if *n != ids => {
                        return Err(CliError::validation(format!(
                            "report {:?} was scored by {ids:?}, others by {n:?}",
                            o.report_id
                        )))
                    }
                    Some(_) => {}
                }
                model_labels(r)
            }
            // never reached tier 2 under predicted gating: every model says negative
            None => vec![task.negative(); 3],
        };
        preds.push(labels);
        golds.push(gold_label);
    }

    if golds.is_empty() {
        return Err(CliError::validation(format!("no records to evaluate for {task}")));
    }
    let mut model_names = names.unwrap_or_else(|| vec!["member A".into(), "member B".into()]);
    model_names.push("Combined".into());
    let reports: Vec<EvalReport> = (0..model_names.len())
        .map(|k| {
            let p: Vec<Label> = preds.iter().map(|row| row[k]).collect();
            eval_report(&p, &golds, task)
        })
        .collect::<Result<_, _>>()?;

    let rows: Vec<(&str, &EvalReport)> = model_names.iter().map(String::as_str).zip(&reports).collect();
    let table = render_table(&rows);
    let file = EvalFile {
        task,
        gating,
        n_evaluated: golds.len(),
        models: rows.iter().map(|(model, report)| ModelEval { model, report }).collect(),
    };
    write_output(&ctx.out_dir.join(format!("eval_{task}.json")), &to_json(&file))?;
    write_output(&ctx.out_dir.join(format!("eval_{task}.txt")), table.as_bytes())?;
    println!(
        "{task} evaluation ({} gating, {} records)",
        gating.as_str(),
        golds.len()
    );
    print!("{table}");
    Ok(())
}
