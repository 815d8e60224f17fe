use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use log::{info, warn};

use amn_srl::corpus::{build_vocabs, extract_all, write_conll, PredicateInstance, Sentence, NULL_ROLE};
use amn_srl::model::{ContextVectors, SrlModel};
use amn_srl::retrieval::{build_index, DistanceResources, NeighborIndex, WordVectors};
use amn_srl::synth::{gen_synthetic, SynthConfig};
use amn_srl::trainer::{
    ablate, build_indexes, evaluate, memory_positions, run_experiment, AblationGrid, Corpora, Evaluation, TrainConfig,
};

use crate::artifacts::{load_context, load_corpus, load_vectors, read_text, write_text, Manifest};
use crate::heatmap::{to_csv, to_pgm};
use crate::{
    AblateArgs, Cli, CliError, Command, DumpArgs, EvalArgs, IndexArgs, ModelInputs, PrepareArgs, SynthArgs, TrainArgs,
};

pub fn run(cli: &Cli) -> Result<()> {
    let config = resolve_config(cli)?;
    match &cli.command {
        Command::Prepare(a) => prepare(cli, &config, a),
        Command::Index(a) => index(cli, &config, a),
        Command::Train(a) => train(cli, &config, a),
        Command::Eval(a) => eval(cli, &config, a),
        Command::Ablate(a) => ablation(cli, &config, a),
        Command::DumpAttention(a) => dump_attention(cli, &config, a),
        Command::Confusion(a) => confusion(cli, &config, a),
        Command::GenSynthetic(a) => synthetic(a),
    }
}

/// Defaults, then the config file, then `--set` overrides.
fn resolve_config(cli: &Cli) -> Result<TrainConfig> {
    let mut config = TrainConfig::default();
    if let Some(path) = &cli.config {
        config
            .apply_text(&read_text(path)?)
            .with_context(|| format!("config file {}", path.display()))?;
    }
    for kv in &cli.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, found `{kv}`")))?;
        config.set(k.trim(), v.trim())?;
    }
    config.validate()?;
    Ok(config)
}

fn manifest(cli: &Cli, command: &str, config: &TrainConfig) -> Manifest {
    let mut m = Manifest::new(command);
    m.input("config", cli.config.as_deref());
    m.config = config.to_text();
    m
}

fn prepare(cli: &Cli, config: &TrainConfig, a: &PrepareArgs) -> Result<()> {
    let sentences = load_corpus(&a.train)?;
    let min_freq = a.min_freq.unwrap_or(config.min_freq);
    let vocabs = build_vocabs(&sentences, min_freq)?;
    let mut man = manifest(cli, "prepare", config);
    man.input("train", Some(&a.train));
    for (name, vocab) in [
        ("word", &vocabs.word),
        ("lemma", &vocabs.lemma),
        ("pos", &vocabs.pos),
        ("role", &vocabs.role),
    ] {
        let mut text = vocab.items().join("\n");
        text.push('\n');
        man.emit(a.out.join(format!("{name}.vocab")), &text)?;
    }

    let instances = extract_all(&sentences);
    let mut roles: BTreeMap<&str, usize> = BTreeMap::new();
    for label in instances.iter().flat_map(|i| &i.gold_labels) {
        if label != NULL_ROLE {
            *roles.entry(label).or_insert(0) += 1;
        }
    }
    let mut stats = String::new();
    let _ = writeln!(stats, "sentences\t{}", sentences.len());
    let _ = writeln!(stats, "tokens\t{}", sentences.iter().map(Sentence::len).sum::<usize>());
    let _ = writeln!(stats, "predicates\t{}", instances.len());
    let _ = writeln!(stats, "arguments\t{}", roles.values().sum::<usize>());
    let _ = writeln!(stats, "min_freq\t{min_freq}");
    for (name, v) in [("word", &vocabs.word), ("lemma", &vocabs.lemma), ("pos", &vocabs.pos), ("role", &vocabs.role)] {
        let _ = writeln!(stats, "vocab.{name}\t{}", v.len());
    }
    for (role, n) in &roles {
        let _ = writeln!(stats, "role.{role}\t{n}");
    }
    print!("{stats}");
    man.emit(a.out.join("stats.txt"), &stats)?;
    man.write_in(&a.out)?;
    Ok(())
}

fn index(cli: &Cli, config: &TrainConfig, a: &IndexArgs) -> Result<()> {
    let method = a.method.unwrap_or(config.method);
    let m = a.m.unwrap_or(config.model.hyper.m);
    let train_s = load_corpus(&a.train)?;
    let query_s = load_corpus(&a.query)?;
    let vectors = load_vectors(a.vectors.as_deref())?;
    let resources = DistanceResources::prepare(method, &train_s, vectors, config.sif_a)?;
    let index = build_index(&extract_all(&train_s), &extract_all(&query_s), method, m, &resources)?;
    let mut config = config.clone();
    config.method = method;
    config.model.hyper.m = m;
    let mut man = manifest(cli, "index", &config);
    man.input("train", Some(&a.train))
        .input("query", Some(&a.query))
        .input("vectors", a.vectors.as_deref());
    man.emit(a.out.clone(), &index.to_text())?;
    man.write_beside(&a.out)?;
    println!("{} queries, {m} neighbors each ({method})", index.len());
    Ok(())
}

fn load_index(path: &Path) -> Result<NeighborIndex> {
    NeighborIndex::parse(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn train(cli: &Cli, config: &TrainConfig, a: &TrainArgs) -> Result<()> {
    let train_s = load_corpus(&a.train)?;
    let dev_s = load_corpus(&a.dev)?;
    let vectors = load_vectors(a.vectors.as_deref())?;
    let ctx = load_context(a.ctx.as_deref())?;
    let (train, dev) = (extract_all(&train_s), extract_all(&dev_s));
    let data = Corpora {
        train_sentences: &train_s,
        train: &train,
        dev: &dev,
        vectors: vectors.as_ref(),
        ctx: ctx.as_ref(),
    };
    let mut man = manifest(cli, "train", config);
    man.seed = Some(config.seed);
    man.input("train", Some(&a.train))
        .input("dev", Some(&a.dev))
        .input("vectors", a.vectors.as_deref())
        .input("ctx", a.ctx.as_deref())
        .input("train_index", a.train_index.as_deref())
        .input("dev_index", a.dev_index.as_deref());

    let m = config.model.memory_size();
    let indexes = match (&a.train_index, &a.dev_index) {
        _ if m == 0 => None,
        (Some(t), Some(d)) => Some((load_index(t)?, load_index(d)?)),
        _ => {
            info!("building {} indexes with m={m}", config.method);
            let (t, d) = build_indexes(config, &data, m)?;
            man.emit(a.out.join("train.index"), &t.to_text())?;
            man.emit(a.out.join("dev.index"), &d.to_text())?;
            Some((t, d))
        }
    };
    let run = run_experiment(config, &data, indexes.as_ref().map(|(t, d)| (t, d)))?;
    let report = &run.outcome.report;
    man.emit(a.out.join("model.ckpt"), &run.outcome.best.to_checkpoint())?;
    man.emit(a.out.join("report.txt"), &report.to_text())?;
    man.emit(a.out.join("config.txt"), &config.to_text())?;
    man.write_in(&a.out)?;
    match report.best_dev() {
        Some(prf) => println!("best epoch {}: dev {prf}", report.best_epoch),
        None => println!("best epoch {} (no dev instances)", report.best_epoch),
    }
    println!("stopped: {} after {:.1}s", report.stop_reason, report.wall_clock_secs);
    Ok(())
}

/// A checkpoint with everything needed to tag a corpus.
struct Tagging {
    model: SrlModel,
    data: Vec<Sentence>,
    queries: Vec<PredicateInstance>,
    train: Vec<PredicateInstance>,
    memory: Vec<Vec<usize>>,
    ctx: Option<ContextVectors>,
}

fn load_model(path: &Path) -> Result<SrlModel> {
    SrlModel::from_checkpoint(&read_text(path)?).with_context(|| format!("loading {}", path.display()))
}

/// Memories of `queries` from an index file or by retrieval over `train`.
fn memories(
    config: &TrainConfig,
    m: usize,
    inputs: &ModelInputs,
    queries: &[PredicateInstance],
    train_s: &[Sentence],
    train: &[PredicateInstance],
    vectors: Option<WordVectors>,
) -> Result<Vec<Vec<usize>>> {
    if m == 0 {
        return Ok(vec![Vec::new(); queries.len()]);
    }
    let index = match &inputs.index {
        Some(path) => load_index(path)?,
        None => {
            let resources = DistanceResources::prepare(config.method, train_s, vectors, config.sif_a)?;
            build_index(train, queries, config.method, m, &resources)?
        }
    };
    Ok(memory_positions(&index, queries, train, m)?)
}

fn load_tagging(config: &TrainConfig, inputs: &ModelInputs, only: Option<&str>) -> Result<Tagging> {
    let model = load_model(&inputs.checkpoint)?;
    let data = load_corpus(&inputs.data)?;
    let mut queries = extract_all(&data);
    if let Some(id) = only {
        queries.retain(|q| q.id() == id);
        if queries.is_empty() {
            return Err(CliError::Data(format!("no instance `{id}` in {}", inputs.data.display())).into());
        }
    }
    let m = model.config.memory_size();
    let (train_s, train) = match (&inputs.train, m) {
        (_, 0) => (Vec::new(), Vec::new()),
        (Some(path), _) => {
            let s = load_corpus(path)?;
            let t = extract_all(&s);
            (s, t)
        }
        (None, _) => {
            return Err(CliError::Usage(format!("the checkpoint uses a memory of {m}; pass --train")).into());
        }
    };
    let vectors = load_vectors(inputs.vectors.as_deref())?;
    let memory = memories(config, m, inputs, &queries, &train_s, &train, vectors)?;
    let ctx = load_context(inputs.ctx.as_deref())?;
    if model.config.contextual() && ctx.is_none() {
        warn!("checkpoint expects contextual vectors; tagging with zeros");
    }
    Ok(Tagging {
        model,
        data,
        queries,
        train,
        memory,
        ctx,
    })
}

fn tagging_manifest(cli: &Cli, command: &str, config: &TrainConfig, inputs: &ModelInputs) -> Manifest {
    let mut man = manifest(cli, command, config);
    man.input("checkpoint", Some(&inputs.checkpoint))
        .input("data", Some(&inputs.data))
        .input("train", inputs.train.as_deref())
        .input("index", inputs.index.as_deref())
        .input("vectors", inputs.vectors.as_deref())
        .input("ctx", inputs.ctx.as_deref());
    man
}

fn run_eval(config: &TrainConfig, inputs: &ModelInputs) -> Result<(Tagging, Evaluation)> {
    let t = load_tagging(config, inputs, None)?;
    let eval = evaluate(&t.model, &t.queries, &t.memory, &t.train, t.ctx.as_ref())?;
    Ok((t, eval))
}

fn eval(cli: &Cli, config: &TrainConfig, a: &EvalArgs) -> Result<()> {
    let (t, e) = run_eval(config, &a.inputs)?;
    let mut man = tagging_manifest(cli, "eval", config, &a.inputs);
    man.emit(a.out.join("predictions.conll"), &write_conll(&t.data, Some(&e.predictions))?)?;
    let p = &e.prf;
    let scores = format!(
        "precision\t{}\nrecall\t{}\nf1\t{}\ngold_args\t{}\npred_args\t{}\ncorrect_args\t{}\n",
        p.precision, p.recall, p.f1, p.gold_args, p.pred_args, p.correct_args
    );
    man.emit(a.out.join("scores.txt"), &scores)?;
    man.write_in(&a.out)?;
    println!("{} instances: {p}", t.queries.len());
    Ok(())
}

fn confusion(cli: &Cli, config: &TrainConfig, a: &EvalArgs) -> Result<()> {
    let (_, e) = run_eval(config, &a.inputs)?;
    let mut man = tagging_manifest(cli, "confusion", config, &a.inputs);
    let tsv = e.confusion.to_tsv();
    man.emit(a.out.join("confusion.tsv"), &tsv)?;
    man.write_in(&a.out)?;
    print!("{tsv}");
    Ok(())
}

fn ablation(cli: &Cli, config: &TrainConfig, a: &AblateArgs) -> Result<()> {
    let train_s = load_corpus(&a.train)?;
    let dev_s = load_corpus(&a.dev)?;
    let vectors = load_vectors(a.vectors.as_deref())?;
    let ctx = load_context(a.ctx.as_deref())?;
    let (train, dev) = (extract_all(&train_s), extract_all(&dev_s));
    let data = Corpora {
        train_sentences: &train_s,
        train: &train,
        dev: &dev,
        vectors: vectors.as_ref(),
        ctx: ctx.as_ref(),
    };
    let grid = AblationGrid {
        methods: a.methods.clone(),
        merges: a.merges.clone(),
        sizes: a.sizes.clone(),
    };
    let report = ablate(config, &grid, &a.seeds, &data)?;
    let mut man = manifest(cli, "ablate", config);
    man.input("train", Some(&a.train))
        .input("dev", Some(&a.dev))
        .input("vectors", a.vectors.as_deref())
        .input("ctx", a.ctx.as_deref());
    let seeds: Vec<String> = a.seeds.iter().map(u64::to_string).collect();
    man.config.push_str(&format!("ablate.seeds={}\n", seeds.join(",")));
    let text = report.to_text();
    man.emit(a.out.join("ablation.tsv"), &text)?;
    man.write_in(&a.out)?;
    print!("{text}");
    Ok(())
}

fn tokens(s: &Sentence) -> Vec<String> {
    s.tokens.iter().map(|t| t.form.clone()).collect()
}

fn matrix_text(out: &mut String, m: &amn_srl::tensor::Tensor) {
    for row in m.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
        let _ = writeln!(out, "{}", cells.join("\t"));
    }
}

fn dump_attention(cli: &Cli, config: &TrainConfig, a: &DumpArgs) -> Result<()> {
    let t = load_tagging(config, &a.inputs, Some(&a.instance))?;
    if t.model.config.memory_size() == 0 {
        return Err(CliError::Usage("the checkpoint is a base tagger without attention".into()).into());
    }
    let query = &t.queries[0];
    let input = t.model.encode(query, t.ctx.as_ref(), true)?;
    let flag = t.model.config.memory_flag;
    let neighbours: Vec<&PredicateInstance> = t.memory[0].iter().map(|&p| &t.train[p]).collect();
    let memory = neighbours
        .iter()
        .map(|n| t.model.encode(n, t.ctx.as_ref(), flag))
        .collect::<amn_srl::Result<Vec<_>>>()?;
    let (ids, bundle) = t.model.predict_with_attention(&input, &memory)?;
    let bundle = bundle.ok_or_else(|| anyhow::anyhow!("model with memory returned no attention"))?;

    let mut man = tagging_manifest(cli, "dump-attention", config, &a.inputs);
    man.config.push_str(&format!("dump.instance={}\n", a.instance));
    let words = tokens(&query.sentence);
    let mut text = String::new();
    let _ = writeln!(text, "instance\t{}", query.id());
    let _ = writeln!(text, "merge\t{}", bundle.strategy);
    let _ = writeln!(text, "tokens\t{}", words.join(" "));
    let _ = writeln!(text, "gold\t{}", query.gold_labels.join(" "));
    let _ = writeln!(text, "predicted\t{}", t.model.role_names(&ids).join(" "));
    let mut memory_tokens = Vec::new();
    for (j, (n, alpha)) in neighbours.iter().zip(&bundle.alpha).enumerate() {
        let k = j + 1;
        let cols = tokens(&n.sentence);
        let _ = writeln!(text, "\n[memory {k}] {}", n.id());
        let _ = writeln!(text, "tokens\t{}", cols.join(" "));
        let _ = writeln!(text, "labels\t{}", n.gold_labels.join(" "));
        let _ = writeln!(text, "alpha {}x{}", alpha.nrows(), alpha.ncols());
        matrix_text(&mut text, alpha);
        man.emit(a.out.join(format!("alpha_{k}.csv")), &to_csv(alpha, &words, &cols))?;
        man.emit(a.out.join(format!("alpha_{k}.pgm")), &to_pgm(alpha, a.cell))?;
        memory_tokens.extend(cols.into_iter().map(|c| format!("{k}:{c}")));
    }
    if let Some(beta) = &bundle.beta {
        let cells: Vec<String> = beta.iter().map(|v| format!("{v:.6}")).collect();
        let _ = writeln!(text, "\nbeta\t{}", cells.join("\t"));
    }
    if let Some(gamma) = &bundle.gamma {
        let _ = writeln!(text, "\ngamma {}x{}", gamma.nrows(), gamma.ncols());
        matrix_text(&mut text, gamma);
        man.emit(a.out.join("gamma.csv"), &to_csv(gamma, &words, &memory_tokens))?;
        man.emit(a.out.join("gamma.pgm"), &to_pgm(gamma, a.cell))?;
    }
    man.emit(a.out.join("attention.txt"), &text)?;
    man.write_in(&a.out)?;
    print!("{text}");
    Ok(())
}

fn synthetic(a: &SynthArgs) -> Result<()> {
    let config = SynthConfig {
        sentences: a.sentences,
        roles: a.roles,
        clusters: a.clusters,
        nouns: a.nouns,
        two_predicate_rate: a.two_predicate_rate,
        shared_prepositions: a.shared_prepositions,
        seed: a.seed,
    };
    let corpus = gen_synthetic(&config)?;
    let mut man = Manifest::new("gen-synthetic");
    man.seed = Some(a.seed);
    man.config = format!(
        "sentences={}\nroles={}\nclusters={}\nnouns={}\ntwo_predicate_rate={}\nshared_prepositions={}\nseed={}\n",
        a.sentences, a.roles, a.clusters, a.nouns, a.two_predicate_rate, a.shared_prepositions, a.seed
    );
    let clusters: Vec<String> = corpus
        .sentences
        .iter()
        .zip(&corpus.clusters)
        .map(|(s, c)| format!("{}\t{c}", s.id))
        .collect();
    man.emit(a.out.clone(), &write_conll(&corpus.sentences, None)?)?;
    let mut cluster_path = a.out.as_os_str().to_os_string();
    cluster_path.push(".clusters");
    write_text(Path::new(&cluster_path), &(clusters.join("\n") + "\n"))?;
    man.artifacts.push(cluster_path.into());
    man.write_beside(&a.out)?;
    println!("{} sentences written to {}", corpus.sentences.len(), a.out.display());
    Ok(())
}
