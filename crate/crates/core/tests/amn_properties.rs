use amn_srl::amn::{attend, ArgumentEmbeddingTable, MergeStrategy};
use amn_srl::tensor::{Graph, ParamStore, Tensor, Var};
use ndarray::Array2;
use proptest::prelude::*;

#[derive(Debug)]
struct Case {
    store: ParamStore,
    table: ArgumentEmbeddingTable,
    s: Tensor,
    memory: Vec<(Tensor, Vec<usize>)>,
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(-2.0f64..2.0, rows * cols)
        .prop_map(move |v| Array2::from_shape_vec((rows, cols), v).unwrap())
}

fn case() -> impl Strategy<Value = Case> {
    (2usize..5, 1usize..4, 1usize..4, 1usize..5, 1usize..4)
        .prop_flat_map(|(roles, d_ae, d, n_s, m)| {
            let entry = (1usize..5).prop_flat_map(move |n| (matrix(n, d), prop::collection::vec(0..roles, n)));
            (matrix(roles, d_ae), matrix(n_s, d), prop::collection::vec(entry, m))
        })
        .prop_map(|(ae, s, memory)| {
            let mut store = ParamStore::new();
            let (roles, dim) = ae.dim();
            let id = store.add("ae", ae, true).unwrap();
            Case {
                store,
                table: ArgumentEmbeddingTable { id, roles, dim },
                s,
                memory,
            }
        })
}

fn merged(c: &Case, strategy: MergeStrategy, order: &[usize]) -> Tensor {
    let mut g = Graph::new(&c.store);
    let s = g.input(c.s.clone());
    let mem: Vec<(Var, &[usize])> = order
        .iter()
        .map(|&j| (g.input(c.memory[j].0.clone()), c.memory[j].1.as_slice()))
        .collect();
    let out = attend(&mut g, strategy, &c.table, s, &mem).unwrap();
    g.value(out.merged.output).clone()
}

proptest! {
    #[test]
    fn pooled_merges_ignore_memory_order(c in case()) {
        let m = c.memory.len();
        let forward: Vec<usize> = (0..m).collect();
        let reverse: Vec<usize> = (0..m).rev().collect();
        for strategy in [MergeStrategy::Average, MergeStrategy::WeightedAverage, MergeStrategy::Flat] {
            let a = merged(&c, strategy, &forward);
            let b = merged(&c, strategy, &reverse);
            let gap = (&a - &b).iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            prop_assert!(gap < 1e-12, "{strategy}: {gap}");
        }
    }

    #[test]
    fn concatenation_permutes_blocks(c in case()) {
        let m = c.memory.len();
        let d = c.table.dim;
        let forward: Vec<usize> = (0..m).collect();
        let reverse: Vec<usize> = (0..m).rev().collect();
        let a = merged(&c, MergeStrategy::Concatenation, &forward);
        let b = merged(&c, MergeStrategy::Concatenation, &reverse);
        prop_assert_eq!(a.ncols(), m * d);
        for j in 0..m {
            let k = m - 1 - j;
            prop_assert_eq!(
                a.slice(ndarray::s![.., j * d..(j + 1) * d]),
                b.slice(ndarray::s![.., k * d..(k + 1) * d])
            );
        }
    }

    #[test]
    fn output_rows_match_sentence_length(c in case(), pick in 0usize..4) {
        let strategy = MergeStrategy::ALL[pick];
        let order: Vec<usize> = (0..c.memory.len()).collect();
        let out = merged(&c, strategy, &order);
        prop_assert_eq!(out.nrows(), c.s.nrows());
        prop_assert_eq!(out.ncols(), strategy.output_dim(c.memory.len(), c.table.dim));
    }
}
