use denoise_core::autodiff::Tape;
use denoise_core::graph::{gen_synthetic, invert_permutation, SynthConfig};
use denoise_core::losses::{contrastive_loss, feature_loss, structure_loss};
use denoise_core::model::{GraphAutoencoder, ModelConfig};
use denoise_core::protocol::{inject_noise, split_labels, Assignment};
use denoise_core::scorer::{agg_error_vector, fit_score_head, anomaly_score, HeadConfig};
use denoise_core::{Graph, Label, Matrix};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn graph_strategy() -> impl Strategy<Value = Graph> {
    (1usize..9, 1usize..4, any::<u64>()).prop_map(|(n, d, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(0.4) {
                    edges.push((i, j));
                }
            }
        }
        let attrs = Matrix::from_vec(n, d, (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        Graph::new(n, &edges, attrs, Label::Normal).unwrap()
    })
}

fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    p
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn permutation_round_trip(g in graph_strategy(), seed in any::<u64>()) {
        let p = permutation(g.node_count(), seed);
        let back = g.permute_nodes(&p).unwrap().permute_nodes(&invert_permutation(&p)).unwrap();
        prop_assert_eq!(back, g);
    }

    #[test]
    fn adjacency_is_symmetric_with_zero_diagonal(g in graph_strategy()) {
        let a = g.adjacency();
        for i in 0..g.node_count() {
            prop_assert_eq!(a[(i, i)], 0.0);
            for j in 0..g.node_count() {
                prop_assert_eq!(a[(i, j)], a[(j, i)]);
            }
        }
    }

    #[test]
    fn feature_loss_ignores_positive_row_scaling(
        g in graph_strategy(),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = g.attrs().clone();
        let noise = Matrix::from_vec(x.rows(), x.cols(), (0..x.rows() * x.cols()).map(|_| rng.random_range(-0.5..0.5)).collect()).unwrap();
        let x_hat = x.zip_map(&noise, |a, b| a + b);
        let scale = |m: &Matrix, rng: &mut ChaCha8Rng| {
            let mut out = m.clone();
            for i in 0..out.rows() {
                let c = rng.random_range(0.1..10.0);
                out.row_mut(i).iter_mut().for_each(|v| *v *= c);
            }
            out
        };
        let value = |a: Matrix, b: Matrix| {
            let mut t = Tape::new();
            let (a, b) = (t.constant(a).unwrap(), t.constant(b).unwrap());
            let l = feature_loss(&mut t, a, b).unwrap();
            t.value(l.total).item()
        };
        let base = value(x.clone(), x_hat.clone());
        let scaled = value(scale(&x, &mut rng), scale(&x_hat, &mut rng));
        prop_assert!((base - scaled).abs() < 1e-9);
    }

    #[test]
    fn structure_loss_decreases_towards_target(
        g in graph_strategy(),
        seed in any::<u64>(),
        tau in prop_oneof![Just(1.0), Just(0.0), Just(-1.0)],
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = g.node_count();
        let a = g.adjacency();
        let start = Matrix::from_vec(n, n, (0..n * n).map(|_| rng.random_range(0.05..0.95)).collect()).unwrap();
        let target = a.map(|v| if v == 1.0 { 0.999 } else { 0.001 });
        let mut last = f64::INFINITY;
        for step in 0..=10 {
            let s = step as f64 / 10.0;
            let p = start.zip_map(&target, |x, y| x + s * (y - x));
            let mut t = Tape::new();
            let pv = t.constant(p).unwrap();
            let total = structure_loss(&mut t, &a, pv, tau).unwrap().total;
            let l = t.value(total).item();
            prop_assert!(l <= last + 1e-12);
            last = l;
        }
    }

    #[test]
    fn contrastive_loss_rises_as_positive_rotates_in(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 4;
        let rand_row = |rng: &mut ChaCha8Rng| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
        let z = rand_row(&mut rng);
        let p0 = rand_row(&mut rng);
        let negs = Matrix::from_vec(2, d, [rand_row(&mut rng), rand_row(&mut rng)].concat()).unwrap();
        let value = |p: &[f64]| {
            let mut t = Tape::new();
            let zv = t.constant(Matrix::from_vec(1, d, z.clone()).unwrap()).unwrap();
            let pos = Matrix::from_vec(1, d, p.to_vec()).unwrap();
            let l = contrastive_loss(&mut t, zv, &pos, &negs, 0.5).unwrap();
            t.value(l).item()
        };
        let nz = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        let np = p0.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut last = value(&p0);
        for step in 1..=10 {
            let s = step as f64 / 10.0;
            let p: Vec<f64> = (0..d).map(|i| (1.0 - s) * p0[i] / np + s * z[i] / nz).collect();
            let v = value(&p);
            prop_assert!(v >= last - 1e-12);
            last = v;
        }
    }

    #[test]
    fn split_invariants(normals in 1usize..120, anomalies in 2usize..60, seed in any::<u64>(), beta in 0.0..0.5f64) {
        let mut labels = vec![Label::Normal; normals];
        labels.extend(std::iter::repeat(Label::Anomalous).take(anomalies));
        let mut split = split_labels(&labels, seed).unwrap();
        let count = |s: &denoise_core::protocol::SplitSpec, a: Assignment, l: Label| {
            (0..labels.len()).filter(|&i| s.assignment[i] == a && labels[i] == l).count()
        };
        let train_n = count(&split, Assignment::Train, Label::Normal);
        prop_assert!((train_n as f64 - 0.8 * normals as f64).abs() <= 1.0);
        prop_assert!((count(&split, Assignment::Val, Label::Normal) as f64 - 0.1 * normals as f64).abs() <= 1.0);
        prop_assert_eq!(count(&split, Assignment::Train, Label::Anomalous), 0);
        prop_assert_eq!(count(&split, Assignment::Unused, Label::Normal), 0);
        let va = count(&split, Assignment::Val, Label::Anomalous);
        prop_assert_eq!(va, count(&split, Assignment::Test, Label::Anomalous));
        prop_assert_eq!(va, ((0.05 * anomalies as f64).round() as usize).max(1));

        let val_before = split.ids(Assignment::Val);
        let test_before = split.ids(Assignment::Test);
        let requested = (beta * train_n as f64).round() as usize;
        match inject_noise(&mut split, beta, seed ^ 1) {
            Ok(train) => {
                prop_assert_eq!(split.injected.len(), requested);
                prop_assert_eq!(train.len(), train_n + requested);
                prop_assert!(train.windows(2).all(|w| w[0] < w[1]));
                for i in &split.injected {
                    prop_assert!(labels[*i].is_anomalous());
                    prop_assert!(!val_before.contains(i) && !test_before.contains(i));
                }
                prop_assert_eq!(split.ids(Assignment::Val), val_before);
                prop_assert_eq!(split.ids(Assignment::Test), test_before);
            }
            Err(denoise_core::Error::PoolExhausted { available, requested: r }) => {
                prop_assert_eq!(r, requested);
                prop_assert!(available < requested);
            }
            Err(e) => prop_assert!(false, "unexpected {e}"),
        }
    }
}

#[test]
fn embeddings_and_scores_are_permutation_invariant() {
    let ds = gen_synthetic(
        &SynthConfig {
            n_graphs: 20,
            ..SynthConfig::default()
        },
        17,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let model = GraphAutoencoder::init(ModelConfig::new(ds.attr_dim()), &mut rng).unwrap();
    let vectors: Vec<_> = ds.graphs().iter().map(|g| agg_error_vector(&model, g, 1.0).unwrap()).collect();
    let head = fit_score_head(&vectors, &HeadConfig { steps: 100, ..HeadConfig::default() }).unwrap();

    let mut worst: f64 = 0.0;
    for (gi, g) in ds.graphs().iter().enumerate() {
        let emb = model.embed_graph(g).unwrap();
        let z = &vectors[gi];
        let score = anomaly_score(z, &head).unwrap();
        for trial in 0..5 {
            let p = permutation(g.node_count(), 100 * gi as u64 + trial);
            let h = g.permute_nodes(&p).unwrap();
            let emb_p = model.embed_graph(&h).unwrap();
            for (a, b) in emb.as_slice().iter().zip(emb_p.as_slice()) {
                worst = worst.max(rel(*a, *b));
            }
            let z_p = agg_error_vector(&model, &h, 1.0).unwrap();
            for j in 0..4 {
                worst = worst.max(rel(z.0[j], z_p.0[j]));
            }
            worst = worst.max(rel(score, anomaly_score(&z_p, &head).unwrap()));
        }
    }
    assert!(worst <= 1e-6, "relative change {worst:e}");
}
