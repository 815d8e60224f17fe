//! Inter-sentence attention over retrieved training instances and merging
//! of their label embeddings into one vector per input token.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{Error, Result};
use crate::tensor::{bilstm_apply, Graph, LstmParams, ParamId, ParamStore, Tensor, Var};

/// How per-entry attention embeddings are combined.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MergeStrategy {
    Concatenation,
    Average,
    WeightedAverage,
    Flat,
}

impl MergeStrategy {
    pub const ALL: [MergeStrategy; 4] = [
        MergeStrategy::Concatenation,
        MergeStrategy::Average,
        MergeStrategy::WeightedAverage,
        MergeStrategy::Flat,
    ];

    /// Width of the merged output for `m` entries of dimension `d_ae`.
    pub fn output_dim(self, m: usize, d_ae: usize) -> usize {
        match self {
            MergeStrategy::Concatenation => m * d_ae,
            _ => d_ae,
        }
    }
}

impl fmt::Display for MergeStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MergeStrategy::Concatenation => "concat",
            MergeStrategy::Average => "average",
            MergeStrategy::WeightedAverage => "weighted",
            MergeStrategy::Flat => "flat",
        })
    }
}

impl FromStr for MergeStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "concat" | "concatenation" => Ok(MergeStrategy::Concatenation),
            "average" | "avg" => Ok(MergeStrategy::Average),
            "weighted" | "weighted-average" | "weightedaverage" | "wa" => Ok(MergeStrategy::WeightedAverage),
            "flat" => Ok(MergeStrategy::Flat),
            _ => Err(Error::Config(format!(
                "unknown merge strategy `{s}` (expected concat, average, weighted or flat)"
            ))),
        }
    }
}

/// Learned embedding per role id, null role included.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ArgumentEmbeddingTable {
    pub id: ParamId,
    pub roles: usize,
    pub dim: usize,
}

impl ArgumentEmbeddingTable {
    pub fn register<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        roles: usize,
        dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if roles == 0 || dim == 0 {
            return Err(Error::Config("argument embedding table needs roles and d_ae > 0".into()));
        }
        let bound = (3.0 / dim as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        let table = Array2::from_shape_fn((roles, dim), |_| dist.sample(rng));
        Ok(ArgumentEmbeddingTable {
            id: store.add(name, table, true)?,
            roles,
            dim,
        })
    }
}

/// Attention-side parameters: the shared encoder and the label table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AmnParams {
    pub lstm_a: LstmParams,
    pub table: ArgumentEmbeddingTable,
    pub merge: MergeStrategy,
}

/// One memory entry as seen by the attention layer.
#[derive(Clone, Copy, Debug)]
pub struct MemoryInput<'a> {
    /// Word-embedding matrix of the associated sentence.
    pub embeddings: Var,
    /// Role id of each of its tokens.
    pub labels: &'a [usize],
}

/// Graph handles of one entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EntryVars {
    pub raw: Var,
    pub alpha: Var,
    /// Label embeddings `n_j × d_ae`.
    pub labels: Var,
    pub embedding: Var,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MergeVars {
    pub output: Var,
    pub beta: Option<Var>,
    pub gamma: Option<Var>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AmnOutput {
    pub entries: Vec<EntryVars>,
    pub merged: MergeVars,
}

/// Materialized attention values of one forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionBundle {
    pub strategy: MergeStrategy,
    pub raw: Vec<Tensor>,
    pub alpha: Vec<Tensor>,
    pub entry_embeddings: Vec<Tensor>,
    pub beta: Option<Vec<f64>>,
    pub gamma: Option<Tensor>,
    pub merged: Tensor,
}

impl AmnOutput {
    pub fn bundle(&self, g: &Graph, strategy: MergeStrategy) -> AttentionBundle {
        AttentionBundle {
            strategy,
            raw: self.entries.iter().map(|e| g.value(e.raw).clone()).collect(),
            alpha: self.entries.iter().map(|e| g.value(e.alpha).clone()).collect(),
            entry_embeddings: self.entries.iter().map(|e| g.value(e.embedding).clone()).collect(),
            beta: self.merged.beta.map(|b| g.value(b).row(0).to_vec()),
            gamma: self.merged.gamma.map(|v| g.value(v).clone()),
            merged: g.value(self.merged.output).clone(),
        }
    }
}

/// Contextual encoding `S' = LSTM_a(S)`.
pub fn encode_for_attention<R: Rng + ?Sized>(
    g: &mut Graph,
    lstm_a: &LstmParams,
    embeddings: Var,
    dropout: f64,
    training: bool,
    rng: &mut R,
) -> Result<Var> {
    bilstm_apply(g, lstm_a, embeddings, dropout, training, rng)
}

/// `M_raw = S' A'^T`.
pub fn raw_attention(g: &mut Graph, s_enc: Var, a_enc: Var) -> Result<Var> {
    g.matmul_t(s_enc, a_enc)
}

/// Row-wise softmax of a raw similarity matrix.
pub fn normalize_attention(g: &mut Graph, raw: Var) -> Result<Var> {
    g.softmax_rows(raw)
}

/// Embeddings of a label sequence, `n_j × d_ae`.
pub fn label_embeddings(g: &mut Graph, table: &ArgumentEmbeddingTable, labels: &[usize]) -> Result<Var> {
    if let Some(&bad) = labels.iter().find(|&&l| l >= table.roles) {
        return Err(Error::LabelOutOfRange {
            id: bad,
            classes: table.roles,
        });
    }
    g.lookup(table.id, labels)
}

/// `a_{i,j} = α_{i,j} · L_j`, for every input row `i` at once.
pub fn entry_label_embedding(g: &mut Graph, alpha: Var, labels: Var) -> Result<Var> {
    g.matmul(alpha, labels)
}

/// Combine per-entry results into the merged attention embedding.
pub fn merge(g: &mut Graph, strategy: MergeStrategy, entries: &[EntryVars]) -> Result<MergeVars> {
    if entries.is_empty() {
        return Err(Error::Invalid("memory must hold at least one entry".into()));
    }
    let embeddings: Vec<Var> = entries.iter().map(|e| e.embedding).collect();
    let mut beta = None;
    let mut gamma = None;
    let output = match strategy {
        MergeStrategy::Concatenation => g.hcat(&embeddings)?,
        MergeStrategy::Average => {
            let mut acc = embeddings[0];
            for &e in &embeddings[1..] {
                acc = g.add(acc, e)?;
            }
            g.scale(acc, 1.0 / entries.len() as f64)
        }
        MergeStrategy::WeightedAverage => {
            let means: Vec<Var> = entries.iter().map(|e| g.mean(e.raw)).collect();
            let row = g.hcat(&means)?;
            let b = g.softmax_rows(row)?;
            beta = Some(b);
            let mut acc = None;
            for (j, &e) in embeddings.iter().enumerate() {
                let w = g.slice(b, 0, 1, j, 1)?;
                let term = g.scale_by(e, w)?;
                acc = Some(match acc {
                    None => term,
                    Some(a) => g.add(a, term)?,
                });
            }
            acc.expect("non-empty memory")
        }
        MergeStrategy::Flat => {
            let raws: Vec<Var> = entries.iter().map(|e| e.raw).collect();
            let labels: Vec<Var> = entries.iter().map(|e| e.labels).collect();
            let all_raw = g.hcat(&raws)?;
            let all_labels = g.vcat(&labels)?;
            let gm = g.softmax_rows(all_raw)?;
            gamma = Some(gm);
            g.matmul(gm, all_labels)?
        }
    };
    Ok(MergeVars { output, beta, gamma })
}

/// Attention path for already-encoded sentences.
pub fn attend(
    g: &mut Graph,
    strategy: MergeStrategy,
    table: &ArgumentEmbeddingTable,
    s_enc: Var,
    memory: &[(Var, &[usize])],
) -> Result<AmnOutput> {
    let mut entries = Vec::with_capacity(memory.len());
    for &(a_enc, labels) in memory {
        if g.shape(a_enc)[0] != labels.len() {
            return Err(Error::Shape {
                op: "attend",
                left: g.shape(a_enc),
                right: [labels.len(), table.dim],
            });
        }
        let raw = raw_attention(g, s_enc, a_enc)?;
        let alpha = normalize_attention(g, raw)?;
        let label_vars = label_embeddings(g, table, labels)?;
        let embedding = entry_label_embedding(g, alpha, label_vars)?;
        entries.push(EntryVars {
            raw,
            alpha,
            labels: label_vars,
            embedding,
        });
    }
    let merged = merge(g, strategy, &entries)?;
    Ok(AmnOutput { entries, merged })
}

/// Full attention step: encode the input and every memory sentence with the
/// shared `LSTM_a`, attend, and merge.
pub fn amn_forward<R: Rng + ?Sized>(
    g: &mut Graph,
    params: &AmnParams,
    input: Var,
    memory: &[MemoryInput],
    dropout: f64,
    training: bool,
    rng: &mut R,
) -> Result<AmnOutput> {
    let s_enc = encode_for_attention(g, &params.lstm_a, input, dropout, training, rng)?;
    let mut encoded = Vec::with_capacity(memory.len());
    for entry in memory {
        let a_enc = encode_for_attention(g, &params.lstm_a, entry.embeddings, dropout, training, rng)?;
        encoded.push((a_enc, entry.labels));
    }
    attend(g, params.merge, &params.table, s_enc, &encoded)
}
