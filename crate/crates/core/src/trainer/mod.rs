//! Training loop, evaluation and the ablation grid.

mod ablate;
mod config;
mod report;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use ablate::{ablate, AblationGrid, AblationReport, AblationRow};
pub use config::TrainConfig;
pub use report::{EpochStats, RunReport};

use crate::corpus::{build_vocabs, confusion_matrix, score, ConfusionMatrix, PredicateInstance, Prf, Sentence};
use crate::error::{Error, Result};
use crate::model::{ContextVectors, EncodedInstance, SrlModel};
use crate::retrieval::{build_index, DistanceResources, NeighborIndex, WordVectors};
use crate::tensor::{AdamState, GradBuffer, Graph};

/// Instances per gradient accumulation group. Groups run in parallel and
/// are summed in a fixed order, so results do not depend on thread count.
const GROUP: usize = 4;

/// Input corpora of one experiment.
#[derive(Clone, Copy, Debug)]
pub struct Corpora<'a> {
    pub train_sentences: &'a [Sentence],
    pub train: &'a [PredicateInstance],
    pub dev: &'a [PredicateInstance],
    pub vectors: Option<&'a WordVectors>,
    pub ctx: Option<&'a ContextVectors>,
}

/// Memory of every train and dev instance as positions into the train set.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct MemoryPlan {
    pub train: Vec<Vec<usize>>,
    pub dev: Vec<Vec<usize>>,
}

impl MemoryPlan {
    /// Empty memories for the base tagger.
    pub fn none(train: usize, dev: usize) -> Self {
        MemoryPlan {
            train: vec![Vec::new(); train],
            dev: vec![Vec::new(); dev],
        }
    }
}

/// First `m` neighbor positions of every query. Fails on any query missing
/// from the index or an index smaller than `m`.
pub fn memory_positions(
    index: &NeighborIndex,
    queries: &[PredicateInstance],
    train: &[PredicateInstance],
    m: usize,
) -> Result<Vec<Vec<usize>>> {
    if m == 0 {
        return Ok(vec![Vec::new(); queries.len()]);
    }
    if index.m < m {
        return Err(Error::Retrieval(format!("index holds {} neighbors, model needs {m}", index.m)));
    }
    let mut all = index.resolve(queries, train)?;
    for row in &mut all {
        row.truncate(m);
    }
    Ok(all)
}

/// Neighbor indexes of the train set (against itself) and of the dev set.
pub fn build_indexes(
    config: &TrainConfig,
    data: &Corpora,
    m: usize,
) -> Result<(NeighborIndex, NeighborIndex)> {
    let resources =
        DistanceResources::prepare(config.method, data.train_sentences, data.vectors.cloned(), config.sif_a)?;
    let train = build_index(data.train, data.train, config.method, m, &resources)?;
    let dev = build_index(data.train, data.dev, config.method, m, &resources)?;
    Ok((train, dev))
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ b.wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Visiting order of the training instances in `epoch`.
pub fn epoch_order(seed: u64, epoch: usize, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(seed, epoch as u64, 0)));
    order
}

/// Encoded inputs and memory-side encodings of a corpus pair.
struct Encoded {
    train_inputs: Vec<EncodedInstance>,
    train_memory: Vec<EncodedInstance>,
}

fn encode_all(model: &SrlModel, instances: &[PredicateInstance], ctx: Option<&ContextVectors>, flagged: bool) -> Result<Vec<EncodedInstance>> {
    instances.iter().map(|i| model.encode(i, ctx, flagged)).collect()
}

fn encode_train(model: &SrlModel, train: &[PredicateInstance], ctx: Option<&ContextVectors>) -> Result<Encoded> {
    let train_inputs = encode_all(model, train, ctx, true)?;
    let train_memory = if model.config.memory_flag {
        train_inputs.clone()
    } else {
        encode_all(model, train, ctx, false)?
    };
    Ok(Encoded {
        train_inputs,
        train_memory,
    })
}

fn gather(memory: &[EncodedInstance], positions: &[usize]) -> Vec<EncodedInstance> {
    positions.iter().map(|&p| memory[p].clone()).collect()
}

fn predict_encoded(
    model: &SrlModel,
    queries: &[PredicateInstance],
    inputs: &[EncodedInstance],
    memory: &[Vec<usize>],
    train_memory: &[EncodedInstance],
) -> Result<Vec<PredicateInstance>> {
    queries
        .par_iter()
        .zip(inputs.par_iter())
        .zip(memory.par_iter())
        .map(|((q, enc), mem)| {
            let ids = model.predict(enc, &gather(train_memory, mem))?;
            Ok(q.with_labels(model.role_names(&ids)))
        })
        .collect()
}

/// Greedy predictions for `queries`, whose memories index into `train`.
pub fn predict_all(
    model: &SrlModel,
    queries: &[PredicateInstance],
    memory: &[Vec<usize>],
    train: &[PredicateInstance],
    ctx: Option<&ContextVectors>,
) -> Result<Vec<PredicateInstance>> {
    if memory.len() != queries.len() {
        return Err(Error::Misaligned(format!("{} queries, {} memories", queries.len(), memory.len())));
    }
    let inputs = encode_all(model, queries, ctx, true)?;
    let needs_train = memory.iter().any(|m| !m.is_empty());
    let train_memory = if needs_train {
        encode_all(model, train, ctx, model.config.memory_flag)?
    } else {
        Vec::new()
    };
    predict_encoded(model, queries, &inputs, memory, &train_memory)
}

/// Scores of one evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub prf: Prf,
    pub confusion: ConfusionMatrix,
    pub predictions: Vec<PredicateInstance>,
}

/// Labels of a confusion matrix: the model's roles followed by any gold
/// label it has never seen.
pub fn confusion_labels(model: &SrlModel, gold: &[PredicateInstance]) -> Vec<String> {
    let mut labels: Vec<String> = model.vocabs.role.items().to_vec();
    let mut extra: Vec<&String> = gold
        .iter()
        .flat_map(|g| &g.gold_labels)
        .filter(|l| model.vocabs.role.get(l).is_none())
        .collect();
    extra.sort();
    extra.dedup();
    labels.extend(extra.into_iter().cloned());
    labels
}

pub fn evaluate(
    model: &SrlModel,
    queries: &[PredicateInstance],
    memory: &[Vec<usize>],
    train: &[PredicateInstance],
    ctx: Option<&ContextVectors>,
) -> Result<Evaluation> {
    let predictions = predict_all(model, queries, memory, train, ctx)?;
    let prf = score(queries, &predictions)?;
    let confusion = confusion_matrix(queries, &predictions, &confusion_labels(model, queries))?;
    Ok(Evaluation {
        prf,
        confusion,
        predictions,
    })
}

/// Result of [`train`]: the report and the best model seen.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub report: RunReport,
    pub best: SrlModel,
}

/// Optimize `model` on `train`, selecting the epoch with the best dev F1
/// (or the last epoch when `dev` is empty).
pub fn train(
    config: &TrainConfig,
    mut model: SrlModel,
    train: &[PredicateInstance],
    dev: &[PredicateInstance],
    plan: &MemoryPlan,
    ctx: Option<&ContextVectors>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Invalid("training set is empty".into()));
    }
    let m = model.config.memory_size();
    for (name, set, mem) in [("train", train, &plan.train), ("dev", dev, &plan.dev)] {
        if mem.len() != set.len() {
            return Err(Error::Retrieval(format!(
                "{name}: {} instances but {} memories",
                set.len(),
                mem.len()
            )));
        }
        if let Some((i, row)) = mem.iter().enumerate().find(|(_, r)| r.len() != m || r.iter().any(|&p| p >= train.len())) {
            return Err(Error::Retrieval(format!(
                "{name} instance {} has an invalid memory ({} entries, expected {m})",
                set[i].id(),
                row.len()
            )));
        }
    }

    let started = Instant::now();
    let enc = encode_train(&model, train, ctx)?;
    let dev_inputs = encode_all(&model, dev, ctx, true)?;
    let mut adam = AdamState::new(&model.store, model.config.hyper.l_r);
    let mut epochs = Vec::new();
    let mut best: Option<(usize, f64, SrlModel)> = None;
    let mut stale = 0usize;
    let mut stop_reason = "max_epochs".to_owned();

    for epoch in 1..=config.max_epochs {
        let order = epoch_order(config.seed, epoch, train.len());
        let mut loss_total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let store = &model.store;
            let model_ref = &model;
            let parts = batch
                .par_chunks(GROUP)
                .map(|group| -> Result<(f64, GradBuffer)> {
                    let mut grads = GradBuffer::zeros_like(store);
                    let mut loss = 0.0;
                    for &i in group {
                        let mut rng = ChaCha8Rng::seed_from_u64(mix(config.seed, epoch as u64, i as u64 + 1));
                        let memory = gather(&enc.train_memory, &plan.train[i]);
                        let mut g = Graph::new(store);
                        let l = model_ref.loss(&mut g, &enc.train_inputs[i], &memory, true, &mut rng)?;
                        loss += g.scalar(l);
                        g.backward(l, &mut grads)?;
                    }
                    Ok((loss, grads))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut total = GradBuffer::zeros_like(&model.store);
            for (loss, grads) in &parts {
                loss_total += loss;
                total.add_buffer(grads);
            }
            total.scale(1.0 / batch.len() as f64);
            if let Some(c) = config.clip {
                total.clip_norm(c);
            }
            adam.step(&mut model.store, &total);
        }
        let loss = loss_total / train.len() as f64;
        if !loss.is_finite() {
            return Err(Error::NonFinite("training loss"));
        }

        let evaluate_now = epoch % config.eval_every == 0 || epoch == config.max_epochs;
        let mut stats = EpochStats {
            epoch,
            loss,
            train: None,
            dev: None,
        };
        if evaluate_now {
            if config.eval_train || config.target_train_f1.is_some() {
                let preds = predict_encoded(&model, train, &enc.train_inputs, &plan.train, &enc.train_memory)?;
                stats.train = Some(score(train, &preds)?);
            }
            if !dev.is_empty() {
                let preds = predict_encoded(&model, dev, &dev_inputs, &plan.dev, &enc.train_memory)?;
                stats.dev = Some(score(dev, &preds)?);
            }
        }
        log::info!("epoch {epoch}: loss {loss:.6}");
        let dev_f1 = stats.dev.map(|p| p.f1);
        let train_f1 = stats.train.map(|p| p.f1);
        epochs.push(stats);

        if evaluate_now {
            let improved = match (&best, dev_f1) {
                (None, _) => true,
                (Some(_), None) => true,
                (Some((_, f, _)), Some(d)) => d > *f,
            };
            if improved {
                best = Some((epoch, dev_f1.unwrap_or(0.0), model.clone()));
                stale = 0;
            } else {
                stale += 1;
            }
            if let (Some(target), Some(f)) = (config.target_train_f1, train_f1) {
                if f >= target {
                    if dev.is_empty() {
                        best = Some((epoch, 0.0, model.clone()));
                    }
                    stop_reason = "target_train_f1".into();
                    break;
                }
            }
            if config.patience > 0 && stale >= config.patience && !dev.is_empty() {
                stop_reason = "patience".into();
                break;
            }
        }
    }

    let (best_epoch, _, best_model) = best.expect("the final epoch is always evaluated");
    let report = RunReport {
        config: config.to_text(),
        epochs,
        best_epoch,
        stop_reason,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    Ok(TrainOutcome {
        report,
        best: best_model,
    })
}

/// Everything a finished experiment produces.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub outcome: TrainOutcome,
    pub plan: MemoryPlan,
}

/// Build vocabularies, memories and a fresh model, then train it.
/// `indexes` are reused when given and must hold at least `m` neighbors.
pub fn run_experiment(
    config: &TrainConfig,
    data: &Corpora,
    indexes: Option<(&NeighborIndex, &NeighborIndex)>,
) -> Result<Experiment> {
    config.validate()?;
    let vocabs = build_vocabs(data.train_sentences, config.min_freq)?;
    let mut model_config = config.model.clone();
    if let Some(ctx) = data.ctx {
        if model_config.hyper.d_ce > 0 && model_config.ctx_width == 0 {
            model_config.ctx_width = ctx.width();
        }
    }
    let m = model_config.memory_size();
    let plan = if m == 0 {
        MemoryPlan::none(data.train.len(), data.dev.len())
    } else {
        let owned;
        let (ti, di) = match indexes {
            Some(pair) => pair,
            None => {
                owned = build_indexes(config, data, m)?;
                (&owned.0, &owned.1)
            }
        };
        MemoryPlan {
            train: memory_positions(ti, data.train, data.train, m)?,
            dev: memory_positions(di, data.dev, data.train, m)?,
        }
    };
    let model = SrlModel::new(model_config, vocabs, data.vectors, config.seed)?;
    let outcome = train(config, model, data.train, data.dev, &plan, data.ctx)?;
    Ok(Experiment { outcome, plan })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amn::MergeStrategy;
    use crate::corpus::extract_all;
    use crate::model::tests::tiny_config;
    use crate::synth::{gen_synthetic, SynthConfig};

    fn small() -> (Vec<Sentence>, Vec<PredicateInstance>) {
        let corpus = gen_synthetic(&SynthConfig {
            sentences: 12,
            clusters: 3,
            ..SynthConfig::default()
        })
        .unwrap();
        let inst = extract_all(&corpus.sentences);
        (corpus.sentences, inst)
    }

    fn config(merge: Option<MergeStrategy>) -> TrainConfig {
        TrainConfig {
            model: tiny_config(merge, 2),
            max_epochs: 3,
            batch_size: 4,
            patience: 0,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn order_is_a_function_of_seed_and_epoch() {
        assert_eq!(epoch_order(3, 1, 20), epoch_order(3, 1, 20));
        assert_ne!(epoch_order(3, 1, 20), epoch_order(3, 2, 20));
        let mut o = epoch_order(3, 1, 20);
        o.sort();
        assert_eq!(o, (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn runs_are_reproducible() {
        let (sentences, inst) = small();
        let (train, dev) = inst.split_at(inst.len() - 3);
        let data = Corpora {
            train_sentences: &sentences,
            train,
            dev,
            vectors: None,
            ctx: None,
        };
        let cfg = config(Some(MergeStrategy::Average));
        let a = run_experiment(&cfg, &data, None).unwrap();
        let b = run_experiment(&cfg, &data, None).unwrap();
        assert_eq!(a.outcome.best.to_checkpoint(), b.outcome.best.to_checkpoint());
        assert_eq!(a.outcome.report.to_text(), b.outcome.report.to_text());
        assert_eq!(a.outcome.report.epochs.len(), 3);
    }

    #[test]
    fn memory_gaps_fail_before_training() {
        let (sentences, inst) = small();
        let vocabs = build_vocabs(&sentences, 1).unwrap();
        let cfg = config(Some(MergeStrategy::Average));
        let model = SrlModel::new(cfg.model.clone(), vocabs, None, 1).unwrap();
        let mut plan = MemoryPlan::none(inst.len(), 0);
        plan.train[0] = vec![0];
        assert!(matches!(train(&cfg, model, &inst, &[], &plan, None), Err(Error::Retrieval(_))));
    }

    #[test]
    fn confusion_rows_match_gold_counts() {
        let (sentences, inst) = small();
        let vocabs = build_vocabs(&sentences, 1).unwrap();
        let model = SrlModel::new(tiny_config(None, 0), vocabs, None, 1).unwrap();
        let mem = vec![Vec::new(); inst.len()];
        let ev = evaluate(&model, &inst, &mem, &inst, None).unwrap();
        for (k, label) in ev.confusion.labels.iter().enumerate() {
            let gold = inst.iter().flat_map(|i| &i.gold_labels).filter(|l| *l == label).count() as u64;
            assert_eq!(ev.confusion.row_sum(k), gold, "{label}");
        }
    }
}
