//! The tagger: per-token word representation, optional memory attention,
//! a stacked BiLSTM encoder and a softmax classifier per token.

mod checkpoint;
mod config;
mod context;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};

pub(crate) use config::parse_value;
pub use config::{Hyperparams, ModelConfig};
pub use context::ContextVectors;

use crate::amn::{amn_forward, AmnOutput, AmnParams, ArgumentEmbeddingTable, AttentionBundle, MemoryInput};
use crate::corpus::{PredicateInstance, Vocabs};
use crate::error::{Error, Result};
use crate::retrieval::WordVectors;
use crate::tensor::{bilstm_apply, uniform_fan_in, Graph, LstmParams, ParamId, ParamStore, Tensor, Var};

/// Vocabulary ids of one instance.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedInstance {
    pub words: Vec<usize>,
    pub lemmas: Vec<usize>,
    pub pos: Vec<usize>,
    /// 1 at the predicate position, 0 elsewhere (all 0 when unflagged).
    pub flags: Vec<usize>,
    /// Gold role ids.
    pub roles: Vec<usize>,
    pub ctx: Option<Tensor>,
}

impl EncodedInstance {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct EmbeddingTables {
    word_re: Option<ParamId>,
    word_pe: Option<ParamId>,
    pos: Option<ParamId>,
    lemma: Option<ParamId>,
    flag: Option<ParamId>,
    ctx: Option<(ParamId, ParamId)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SrlModel {
    pub config: ModelConfig,
    pub vocabs: Vocabs,
    pub store: ParamStore,
    tables: EmbeddingTables,
    amn: Option<AmnParams>,
    lstm_e: LstmParams,
    w_out: ParamId,
    b_out: ParamId,
}

/// Handles produced by [`SrlModel::forward`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Forward {
    pub logits: Var,
    pub amn: Option<AmnOutput>,
}

fn embedding<R: Rng + ?Sized>(rows: usize, dim: usize, rng: &mut R) -> Tensor {
    let bound = (3.0 / dim.max(1) as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    Array2::from_shape_fn((rows, dim), |_| dist.sample(rng))
}

/// Per-position argmax; ties go to the lowest label id.
pub fn predict_ids(logits: &Tensor) -> Vec<usize> {
    logits
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

impl SrlModel {
    /// Build a freshly initialized model. `pretrained` rows must have width
    /// `d_pe`; words it lacks share the unknown word's row.
    pub fn new(config: ModelConfig, vocabs: Vocabs, pretrained: Option<&WordVectors>, seed: u64) -> Result<Self> {
        config.validate()?;
        let h = config.hyper.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let nw = vocabs.word.len();

        let word_re = (h.d_re > 0)
            .then(|| store.add("emb.word", embedding(nw, h.d_re, &mut rng), true))
            .transpose()?;
        let word_pe = if h.d_pe > 0 {
            let mut table = embedding(nw, h.d_pe, &mut rng);
            if let Some(v) = pretrained {
                if v.dim() != h.d_pe {
                    return Err(Error::Config(format!(
                        "pretrained vectors have width {}, d_pe is {}",
                        v.dim(),
                        h.d_pe
                    )));
                }
                let unk = table.row(vocabs.word.unknown_id()).to_owned();
                for (id, w) in vocabs.word.items().iter().enumerate().skip(1) {
                    match v.get(w) {
                        Some(row) => table.row_mut(id).assign(&row),
                        None => table.row_mut(id).assign(&unk),
                    }
                }
            }
            Some(store.add("emb.pretrained", table, config.tune_pretrained)?)
        } else {
            None
        };
        let pos = (h.d_pos > 0)
            .then(|| store.add("emb.pos", embedding(vocabs.pos.len(), h.d_pos, &mut rng), true))
            .transpose()?;
        let lemma = (h.d_le > 0)
            .then(|| store.add("emb.lemma", embedding(vocabs.lemma.len(), h.d_le, &mut rng), true))
            .transpose()?;
        let flag = (h.d_pred > 0)
            .then(|| store.add("emb.flag", embedding(2, h.d_pred, &mut rng), true))
            .transpose()?;
        let ctx = if config.contextual() {
            let w = store.add("emb.ctx.w", uniform_fan_in(config.ctx_width, h.d_ce, &mut rng), true)?;
            let b = store.add("emb.ctx.b", Array2::zeros((1, h.d_ce)), true)?;
            Some((w, b))
        } else {
            None
        };

        let amn = match config.merge {
            Some(merge) => Some(AmnParams {
                lstm_a: LstmParams::register(&mut store, "lstm_a", config.d_word(), h.d_a / 2, h.k_a, &mut rng)?,
                table: ArgumentEmbeddingTable::register(&mut store, "emb.arg", vocabs.role.len(), h.d_ae, &mut rng)?,
                merge,
            }),
            None => None,
        };
        let lstm_e = LstmParams::register(&mut store, "lstm_e", config.encoder_input(), h.d_e, h.k_e, &mut rng)?;
        let w_out = store.add("out.w", uniform_fan_in(2 * h.d_e, vocabs.role.len(), &mut rng), true)?;
        let b_out = store.add("out.b", Array2::zeros((1, vocabs.role.len())), true)?;
        Ok(SrlModel {
            config,
            vocabs,
            store,
            tables: EmbeddingTables {
                word_re,
                word_pe,
                pos,
                lemma,
                flag,
                ctx,
            },
            amn,
            lstm_e,
            w_out,
            b_out,
        })
    }

    pub fn classes(&self) -> usize {
        self.vocabs.role.len()
    }

    pub fn amn_params(&self) -> Option<&AmnParams> {
        self.amn.as_ref()
    }

    pub fn encoder(&self) -> &LstmParams {
        &self.lstm_e
    }

    pub fn classifier(&self) -> (ParamId, ParamId) {
        (self.w_out, self.b_out)
    }

    /// Map an instance to vocabulary ids. `flagged` marks its predicate.
    pub fn encode(
        &self,
        instance: &PredicateInstance,
        ctx: Option<&ContextVectors>,
        flagged: bool,
    ) -> Result<EncodedInstance> {
        let s = &instance.sentence;
        let v = &self.vocabs;
        let ctx = if self.config.contextual() {
            let n = s.len();
            match ctx.and_then(|c| c.get(&s.id)) {
                Some(m) if m.dim() == (n, self.config.ctx_width) => Some(m.clone()),
                Some(m) => {
                    return Err(Error::Shape {
                        op: "contextual vectors",
                        left: [m.nrows(), m.ncols()],
                        right: [n, self.config.ctx_width],
                    })
                }
                None => Some(Array2::zeros((n, self.config.ctx_width))),
            }
        } else {
            None
        };
        Ok(EncodedInstance {
            words: s.tokens.iter().map(|t| v.word.lookup(&t.form)).collect(),
            lemmas: s.tokens.iter().map(|t| v.lemma.lookup(&t.lemma)).collect(),
            pos: s.tokens.iter().map(|t| v.pos.lookup(&t.pos)).collect(),
            flags: (0..s.len())
                .map(|i| usize::from(flagged && i == instance.predicate_index))
                .collect(),
            roles: instance.gold_labels.iter().map(|r| v.role.lookup(r)).collect(),
            ctx,
        })
    }

    /// Word representation `n × d_word`, columns in the order random word,
    /// pretrained word, POS, lemma, contextual, predicate flag.
    pub fn embed_tokens(&self, g: &mut Graph, inst: &EncodedInstance) -> Result<Var> {
        let t = &self.tables;
        let mut cols = Vec::with_capacity(6);
        if let Some(id) = t.word_re {
            cols.push(g.lookup(id, &inst.words)?);
        }
        if let Some(id) = t.word_pe {
            cols.push(g.lookup(id, &inst.words)?);
        }
        if let Some(id) = t.pos {
            cols.push(g.lookup(id, &inst.pos)?);
        }
        if let Some(id) = t.lemma {
            cols.push(g.lookup(id, &inst.lemmas)?);
        }
        if let Some((w, b)) = t.ctx {
            let ctx = inst
                .ctx
                .as_ref()
                .ok_or_else(|| Error::Invalid("instance lacks contextual vectors".into()))?;
            if ctx.nrows() != inst.len() {
                return Err(Error::Shape {
                    op: "embed_tokens",
                    left: [ctx.nrows(), ctx.ncols()],
                    right: [inst.len(), self.config.ctx_width],
                });
            }
            let x = g.input(ctx.clone());
            let wv = g.param(w);
            let bv = g.param(b);
            let proj = g.matmul(x, wv)?;
            cols.push(g.add_row(proj, bv)?);
        }
        if let Some(id) = t.flag {
            cols.push(g.lookup(id, &inst.flags)?);
        }
        g.hcat(&cols)
    }

    /// Logits `n × classes`. `memory` must hold exactly `m` entries for a
    /// model with attention and none for the base tagger.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        g: &mut Graph,
        input: &EncodedInstance,
        memory: &[EncodedInstance],
        training: bool,
        rng: &mut R,
    ) -> Result<Forward> {
        if input.is_empty() {
            return Err(Error::Invalid("cannot tag an empty sentence".into()));
        }
        let expected = self.config.memory_size();
        if memory.len() != expected {
            return Err(Error::Invalid(format!(
                "model expects {expected} memory entries, got {}",
                memory.len()
            )));
        }
        let rate = self.config.hyper.r_d;
        let x = self.embed_tokens(g, input)?;
        let (enc_input, amn) = match &self.amn {
            Some(params) => {
                let mut mem = Vec::with_capacity(memory.len());
                for m in memory {
                    mem.push(MemoryInput {
                        embeddings: self.embed_tokens(g, m)?,
                        labels: &m.roles,
                    });
                }
                let out = amn_forward(g, params, x, &mem, rate, training, rng)?;
                (g.hcat(&[x, out.merged.output])?, Some(out))
            }
            None => (x, None),
        };
        let mut h = bilstm_apply(g, &self.lstm_e, enc_input, rate, training, rng)?;
        if training {
            h = g.dropout(h, rate, rng)?;
        }
        let w = g.param(self.w_out);
        let b = g.param(self.b_out);
        let proj = g.matmul(h, w)?;
        let logits = g.add_row(proj, b)?;
        Ok(Forward { logits, amn })
    }

    /// Mean token cross entropy of one instance.
    pub fn loss<R: Rng + ?Sized>(
        &self,
        g: &mut Graph,
        input: &EncodedInstance,
        memory: &[EncodedInstance],
        training: bool,
        rng: &mut R,
    ) -> Result<Var> {
        let f = self.forward(g, input, memory, training, rng)?;
        g.cross_entropy(f.logits, &input.roles)
    }

    /// Greedy role ids for one instance.
    pub fn predict(&self, input: &EncodedInstance, memory: &[EncodedInstance]) -> Result<Vec<usize>> {
        let mut g = Graph::new(&self.store);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let f = self.forward(&mut g, input, memory, false, &mut rng)?;
        Ok(predict_ids(g.value(f.logits)))
    }

    /// Greedy role ids together with the attention weights behind them;
    /// the bundle is `None` for the base tagger.
    pub fn predict_with_attention(
        &self,
        input: &EncodedInstance,
        memory: &[EncodedInstance],
    ) -> Result<(Vec<usize>, Option<AttentionBundle>)> {
        let mut g = Graph::new(&self.store);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let f = self.forward(&mut g, input, memory, false, &mut rng)?;
        let bundle = match (&f.amn, self.config.merge) {
            (Some(out), Some(strategy)) => Some(out.bundle(&g, strategy)),
            _ => None,
        };
        Ok((predict_ids(g.value(f.logits)), bundle))
    }

    pub fn role_names(&self, ids: &[usize]) -> Vec<String> {
        ids.iter().map(|&i| self.vocabs.role.inverse(i).to_owned()).collect()
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use ndarray::array;

    use super::*;
    use crate::amn::MergeStrategy;
    use crate::corpus::{build_vocabs, extract_all, parse_conll};
    use crate::tensor::{grad_check, GRAD_CHECK_STEP, GRAD_CHECK_TOL};

    pub(crate) fn tiny_config(merge: Option<MergeStrategy>, m: usize) -> ModelConfig {
        ModelConfig {
            hyper: Hyperparams {
                d_re: 2,
                d_pe: 2,
                d_pos: 2,
                d_le: 1,
                d_ce: 0,
                d_pred: 1,
                d_ae: 2,
                m,
                k_e: 1,
                k_a: 1,
                d_e: 2,
                d_a: 4,
                r_d: 0.0,
                l_r: 0.01,
            },
            merge,
            tune_pretrained: false,
            ctx_width: 0,
            memory_flag: true,
        }
    }

    fn lost() -> Vec<PredicateInstance> {
        extract_all(&parse_conll(crate::corpus::tests::LOST).unwrap())
    }

    #[test]
    fn argmax_ties_take_lowest_id() {
        assert_eq!(predict_ids(&array![[0.1, 0.7, 0.2], [1.0, 1.0, 0.0], [0.0, 2.0, 2.0]]), vec![1, 0, 1]);
        let shifted = array![[5.1, 5.7, 5.2]];
        assert_eq!(predict_ids(&shifted), vec![1]);
    }

    #[test]
    fn instances_of_one_sentence_differ_only_in_flags() {
        let text = "1\tA\ta\ta\tN\tN\t_\t_\t2\t2\tSBJ\tSBJ\tY\ta.01\tA0\t_\n\
                    2\tb\tb\tb\tV\tV\t_\t_\t0\t0\tROOT\tROOT\tY\tb.01\t_\tA1\n\n";
        let sentences = parse_conll(text).unwrap();
        let inst = extract_all(&sentences);
        let vocabs = build_vocabs(&sentences, 1).unwrap();
        let model = SrlModel::new(tiny_config(None, 0), vocabs, None, 1).unwrap();
        let a = model.encode(&inst[0], None, true).unwrap();
        let b = model.encode(&inst[1], None, true).unwrap();
        assert_eq!((&a.words, &a.lemmas, &a.pos), (&b.words, &b.lemmas, &b.pos));
        assert_eq!(a.flags, vec![1, 0]);
        assert_eq!(b.flags, vec![0, 1]);
        let mut g = Graph::new(&model.store);
        let ea = model.embed_tokens(&mut g, &a).unwrap();
        let eb = model.embed_tokens(&mut g, &b).unwrap();
        let (va, vb) = (g.value(ea), g.value(eb));
        let w = model.config.d_word();
        assert_eq!(va.ncols(), w);
        assert_eq!(va.slice(ndarray::s![.., ..w - 1]), vb.slice(ndarray::s![.., ..w - 1]));
        assert_ne!(va.column(w - 1), vb.column(w - 1));
    }

    #[test]
    fn contextual_column() {
        let inst = lost();
        let vocabs = build_vocabs(&parse_conll(crate::corpus::tests::LOST).unwrap(), 1).unwrap();
        let mut cfg = tiny_config(None, 0);
        cfg.hyper.d_ce = 3;
        cfg.ctx_width = 2;
        let model = SrlModel::new(cfg, vocabs, None, 1).unwrap();
        let n = inst[0].len();
        let mut ctx = ContextVectors::new(2);
        ctx.insert(inst[0].sentence.id.clone(), Array2::ones((n, 2))).unwrap();
        let enc = model.encode(&inst[0], Some(&ctx), true).unwrap();
        let mut g = Graph::new(&model.store);
        let e = model.embed_tokens(&mut g, &enc).unwrap();
        assert_eq!(g.shape(e), [n, model.config.d_word()]);
        // Absent sentences fall back to zeros; wrong lengths are errors.
        assert!(model.encode(&inst[0], None, true).unwrap().ctx.unwrap().iter().all(|&v| v == 0.0));
        let mut bad = ContextVectors::new(2);
        bad.insert(inst[0].sentence.id.clone(), Array2::ones((n + 1, 2))).unwrap();
        assert!(model.encode(&inst[0], Some(&bad), true).is_err());
    }

    #[test]
    fn memory_count_is_checked() {
        let inst = lost();
        let vocabs = build_vocabs(&parse_conll(crate::corpus::tests::LOST).unwrap(), 1).unwrap();
        let model = SrlModel::new(tiny_config(Some(MergeStrategy::Average), 2), vocabs, None, 1).unwrap();
        let e = model.encode(&inst[0], None, true).unwrap();
        assert!(model.predict(&e, std::slice::from_ref(&e)).is_err());
        assert_eq!(model.predict(&e, &[e.clone(), e.clone()]).unwrap().len(), e.len());
    }

    #[test]
    fn end_to_end_gradients() {
        let text = "1\tit\tit\tit\tPRP\tPRP\t_\t_\t2\t2\tSBJ\tSBJ\t_\t_\tA1\n\
                    2\truns\trun\trun\tVBZ\tVBZ\t_\t_\t0\t0\tROOT\tROOT\tY\trun.01\t_\n\
                    3\tfast\tfast\tfast\tRB\tRB\t_\t_\t2\t2\tADV\tADV\t_\t_\tAM-MNR\n\n";
        let sentences = parse_conll(text).unwrap();
        let inst = extract_all(&sentences);
        let vocabs = build_vocabs(&sentences, 1).unwrap();
        let mut cfg = tiny_config(Some(MergeStrategy::WeightedAverage), 2);
        cfg.hyper.d_e = 8;
        cfg.hyper.d_a = 8;
        cfg.tune_pretrained = true;
        let model = SrlModel::new(cfg, vocabs, None, 5).unwrap();
        let e = model.encode(&inst[0], None, true).unwrap();
        let mem = vec![e.clone(), e.clone()];
        let report = grad_check(&model.store, GRAD_CHECK_STEP, GRAD_CHECK_TOL, |g| {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            model.loss(g, &e, &mem, false, &mut rng)
        })
        .unwrap();
        assert!(report.passed(), "{report}");
    }
}
