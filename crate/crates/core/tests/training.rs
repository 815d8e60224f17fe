use amn_srl::amn::MergeStrategy;
use amn_srl::corpus::extract_all;
use amn_srl::model::{Hyperparams, ModelConfig};
use amn_srl::retrieval::DistanceMethod;
use amn_srl::synth::{gen_synthetic, SynthConfig};
use amn_srl::trainer::{ablate, run_experiment, AblationGrid, Corpora, TrainConfig};

fn small(m: usize, merge: Option<MergeStrategy>) -> TrainConfig {
    TrainConfig {
        model: ModelConfig {
            hyper: Hyperparams {
                d_re: 8,
                d_pe: 0,
                d_pos: 4,
                d_le: 4,
                d_ce: 0,
                d_pred: 2,
                d_ae: 4,
                m,
                k_e: 1,
                k_a: 1,
                d_e: 8,
                d_a: 8,
                r_d: 0.0,
                l_r: 0.01,
            },
            merge,
            ..ModelConfig::default()
        },
        max_epochs: 2,
        batch_size: 8,
        patience: 0,
        ..TrainConfig::default()
    }
}

#[test]
fn second_epoch_lowers_the_loss() {
    let corpus = gen_synthetic(&SynthConfig {
        sentences: 60,
        ..SynthConfig::default()
    })
    .unwrap();
    let (train_s, dev_s) = corpus.sentences.split_at(48);
    let (train, dev) = (extract_all(train_s), extract_all(dev_s));
    let data = Corpora {
        train_sentences: train_s,
        train: &train,
        dev: &dev,
        vectors: None,
        ctx: None,
    };
    for merge in [None, Some(MergeStrategy::Average)] {
        let run = run_experiment(&small(2, merge), &data, None).unwrap();
        let e = &run.outcome.report.epochs;
        assert_eq!(e.len(), 2);
        assert!(e[1].loss <= e[0].loss, "{merge:?}: {} then {}", e[0].loss, e[1].loss);
    }
}

#[test]
fn ablation_grid_produces_one_row_per_cell() {
    let corpus = gen_synthetic(&SynthConfig {
        sentences: 40,
        ..SynthConfig::default()
    })
    .unwrap();
    let (train_s, dev_s) = corpus.sentences.split_at(32);
    let (train, dev) = (extract_all(train_s), extract_all(dev_s));
    let data = Corpora {
        train_sentences: train_s,
        train: &train,
        dev: &dev,
        vectors: None,
        ctx: None,
    };
    let mut base = small(2, Some(MergeStrategy::Average));
    base.max_epochs = 1;
    let grid = AblationGrid {
        methods: vec![DistanceMethod::Ed, DistanceMethod::Rd { seed: 1 }],
        merges: vec![Some(MergeStrategy::Average)],
        sizes: vec![2, 4],
    };
    let report = ablate(&base, &grid, &[1], &data).unwrap();
    assert_eq!(report.rows.len(), 4);
    let cells: Vec<(String, usize)> = report
        .rows
        .iter()
        .map(|r| (r.method.unwrap().to_string(), r.m))
        .collect();
    assert_eq!(
        cells,
        vec![("ed".into(), 2), ("ed".into(), 4), ("rd:1".into(), 2), ("rd:1".into(), 4)]
    );
    assert!(report.rows.iter().all(|r| (0.0..=1.0).contains(&r.mean_f1)));
    let text = report.to_text();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 5);
}
