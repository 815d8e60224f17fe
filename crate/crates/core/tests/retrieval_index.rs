use std::sync::Arc;

use amn_srl::corpus::{extract_all, parse_conll, PredicateInstance, Sentence};
use amn_srl::retrieval::{
    build_index, pos_edit_distance, sentence_distance, DistanceMethod, DistanceResources, NeighborIndex, DEFAULT_SIF_A,
};
use amn_srl::synth::{gen_synthetic, SynthConfig};

fn corpus(n: usize) -> Vec<Sentence> {
    gen_synthetic(&SynthConfig {
        sentences: n,
        seed: 11,
        two_predicate_rate: 0.3,
        ..SynthConfig::default()
    })
    .unwrap()
    .sentences
}

fn renamed(s: &Sentence, id: &str) -> Sentence {
    Sentence {
        id: id.to_owned(),
        ..s.clone()
    }
}

#[test]
fn ed_index_uses_pos_edit_distance() {
    let sentences = corpus(30);
    let train = extract_all(&sentences[..20]);
    let queries = extract_all(&sentences[20..]);
    let res = DistanceResources::prepare(DistanceMethod::Ed, &sentences[..20], None, DEFAULT_SIF_A).unwrap();
    let index = build_index(&train, &queries, DistanceMethod::Ed, 3, &res).unwrap();
    for q in &queries {
        for n in index.get(&q.id()).unwrap() {
            let t = train.iter().find(|t| t.id() == n.id).unwrap();
            let want = pos_edit_distance(&q.sentence.pos_tags(), &t.sentence.pos_tags()) as f64;
            assert_eq!(n.distance, want);
        }
    }
}

#[test]
fn copy_under_another_id_is_at_distance_zero() {
    let sentences = corpus(12);
    let mut train_s = sentences.clone();
    train_s.push(renamed(&sentences[3], "copy"));
    let train = extract_all(&train_s);
    let queries: Vec<PredicateInstance> = extract_all(&sentences[3..4]);
    for method in [DistanceMethod::Ed, DistanceMethod::Rd { seed: 2 }] {
        let res = DistanceResources::prepare(method, &train_s, None, DEFAULT_SIF_A).unwrap();
        let index = build_index(&train, &queries, method, train.len() - 1, &res).unwrap();
        let got = index.get(&queries[0].id()).unwrap();
        assert!(got.iter().all(|n| !n.id.starts_with("4#")), "query retrieved itself: {got:?}");
        let copy = got.iter().find(|n| n.id.starts_with("copy#")).unwrap();
        if method == DistanceMethod::Ed {
            assert_eq!(copy.distance, 0.0);
        }
    }
}

#[test]
fn training_queries_never_retrieve_themselves() {
    let sentences = corpus(25);
    let train = extract_all(&sentences);
    let res = DistanceResources::prepare(DistanceMethod::Ed, &sentences, None, DEFAULT_SIF_A).unwrap();
    let index = build_index(&train, &train, DistanceMethod::Ed, 4, &res).unwrap();
    for q in &train {
        let own = q.id();
        assert!(index.get(&own).unwrap().iter().all(|n| n.id != own));
    }
    // A freshly parsed copy of the same sentence and predicate is the same
    // instance even though it does not share the allocation.
    let detached: Vec<PredicateInstance> = train
        .iter()
        .take(3)
        .map(|q| PredicateInstance {
            sentence: Arc::new((*q.sentence).clone()),
            ..q.clone()
        })
        .collect();
    let index = build_index(&train, &detached, DistanceMethod::Ed, 4, &res).unwrap();
    for q in &detached {
        assert!(index.get(&q.id()).unwrap().iter().all(|n| n.id != q.id()));
    }
}

#[test]
fn index_survives_text_round_trip() {
    let sentences = corpus(20);
    let train = extract_all(&sentences[..15]);
    let queries = extract_all(&sentences[15..]);
    let method = DistanceMethod::Rd { seed: 9 };
    let res = DistanceResources::prepare(method, &sentences[..15], None, DEFAULT_SIF_A).unwrap();
    let index = build_index(&train, &queries, method, 3, &res).unwrap();
    let back = NeighborIndex::parse(&index.to_text()).unwrap();
    assert_eq!(back, index);
    assert_eq!(back.resolve(&queries, &train).unwrap(), index.resolve(&queries, &train).unwrap());
    let memory = back.memory(&queries[0].id(), &train).unwrap();
    assert_eq!(memory.len(), 3);
    let d = sentence_distance(method, &queries[0], &memory[0].instance, &res).unwrap();
    assert_eq!(d, memory[0].distance);
}

#[test]
fn too_few_candidates_is_an_error() {
    let text = "\
1\tit\tit\tit\tPRP\tPRP\t_\t_\t2\t2\tSBJ\tSBJ\t_\t_\tA0
2\truns\trun\trun\tVBZ\tVBZ\t_\t_\t0\t0\tROOT\tROOT\tY\trun.01\t_
";
    let s = parse_conll(text).unwrap();
    let train = extract_all(&s);
    let res = DistanceResources::prepare(DistanceMethod::Ed, &s, None, DEFAULT_SIF_A).unwrap();
    assert!(build_index(&train, &train, DistanceMethod::Ed, 1, &res).is_err());
    assert!(build_index(&train, &train, DistanceMethod::Ed, 0, &res).is_err());
}
