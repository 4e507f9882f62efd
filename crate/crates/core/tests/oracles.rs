//! Independent brute-force oracles checked against the library on
//! randomized small cases.

use denoise_core::anchor::{mixup_with_lambda, node_info_scores, select_topk_nodes, AnchorBank, MixupMode};
use denoise_core::autodiff::Tape;
use denoise_core::discriminator::{assign_pseudo_labels, graph_similarity_scores, quantile};
use denoise_core::protocol::auroc;
use denoise_core::{Label, Matrix};
use proptest::prelude::*;

const TOL: f64 = 1e-12;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-3.0..3.0f64, rows * cols).prop_map(move |d| Matrix::from_vec(rows, cols, d).unwrap())
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL * (1.0 + a.abs().max(b.abs()))
}

/// Order statistic by counting: the element with exactly `r` smaller
/// (or tied-and-earlier) entries.
fn kth_smallest(values: &[f64], r: usize) -> f64 {
    for (i, &v) in values.iter().enumerate() {
        let below = values
            .iter()
            .enumerate()
            .filter(|&(j, &w)| w < v || (w == v && j < i))
            .count();
        if below == r {
            return v;
        }
    }
    unreachable!()
}

fn quantile_oracle(values: &[f64], q: f64) -> f64 {
    let h = (values.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let a = kth_smallest(values, lo);
    let b = kth_smallest(values, hi);
    a + (h - lo as f64) * (b - a)
}

fn cos(a: &[f64], b: &[f64]) -> f64 {
    let mut ab = 0.0;
    let mut aa = 0.0;
    let mut bb = 0.0;
    for i in 0..a.len() {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    ab / (aa.sqrt().max(1e-8) * bb.sqrt().max(1e-8))
}

fn auroc_oracle(scores: &[f64], labels: &[Label]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, li) in labels.iter().enumerate() {
        for (j, lj) in labels.iter().enumerate() {
            if li.is_anomalous() && !lj.is_anomalous() {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn quantile_matches_order_statistics(
        values in prop::collection::vec(prop_oneof![-5.0..5.0f64, Just(1.0)], 1..30),
        q in 0.0..=1.0f64,
    ) {
        let got = quantile(&values, q).unwrap();
        prop_assert!(close(got, quantile_oracle(&values, q)), "{got} vs oracle");
    }

    #[test]
    fn pseudo_labels_flag_strictly_below_threshold(
        eta in prop::collection::vec(-1.0..1.0f64, 2..40),
        alpha in 0.0..0.5f64,
    ) {
        let labels = assign_pseudo_labels(&eta, alpha).unwrap();
        let t = quantile_oracle(&eta, alpha);
        for (i, &e) in eta.iter().enumerate() {
            prop_assert_eq!(labels.flagged[i], e < t);
        }
        let m = eta.len() as f64;
        prop_assert!(labels.flagged_count() as f64 <= (alpha * m).ceil());
    }

    #[test]
    fn eta_matches_pairwise_cosines(z in (2usize..12, 1usize..6).prop_flat_map(|(m, d)| matrix(m, d))) {
        let eta = graph_similarity_scores(&z).unwrap();
        let m = z.rows();
        for i in 0..m {
            let mut s = 0.0;
            for j in 0..m {
                if j != i {
                    s += cos(z.row(i), z.row(j));
                }
            }
            prop_assert!(close(eta[i], s / (m - 1) as f64));
        }
    }

    #[test]
    fn topk_matches_repeated_argmax(
        sizes in prop::collection::vec(1usize..6, 1..6),
        k in 1usize..20,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        // coarse scores so ties are common
        let scores: Vec<Vec<f64>> = sizes
            .iter()
            .map(|&n| (0..n).map(|_| rng.random_range(0..4) as f64 / 4.0).collect())
            .collect();
        let embeddings: Vec<Matrix> = sizes
            .iter()
            .map(|&n| Matrix::from_vec(n, 2, (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap())
            .collect();
        let ids: Vec<usize> = (0..sizes.len()).map(|i| 10 * i + 3).collect();
        let bank = select_topk_nodes(&scores, &embeddings, &ids, k).unwrap();

        let mut taken: Vec<(usize, usize)> = Vec::new();
        let total: usize = sizes.iter().sum();
        for _ in 0..k.min(total) {
            let mut best: Option<(f64, usize, usize, usize)> = None;
            for (slot, s) in scores.iter().enumerate() {
                for (node, &v) in s.iter().enumerate() {
                    if taken.contains(&(slot, node)) {
                        continue;
                    }
                    let better = match best {
                        None => true,
                        Some((bv, bg, bn, _)) => v > bv || (v == bv && (ids[slot], node) < (bg, bn)),
                    };
                    if better {
                        best = Some((v, ids[slot], node, slot));
                    }
                }
            }
            let (_, _, node, slot) = best.unwrap();
            taken.push((slot, node));
        }
        prop_assert_eq!(bank.k, taken.len());
        for (row, &(slot, node)) in taken.iter().enumerate() {
            prop_assert_eq!(bank.sources[row], (ids[slot], node));
            prop_assert_eq!(bank.embeddings.row(row), embeddings[slot].row(node));
        }
    }

    #[test]
    fn info_scores_match_mean_cosine(
        nodes in (1usize..5, 1usize..4).prop_flat_map(|(n, d)| (matrix(n, d), matrix(3, d))),
    ) {
        let (z, g) = nodes;
        let scores = node_info_scores(core::slice::from_ref(&z), &g).unwrap();
        for j in 0..z.rows() {
            let s: f64 = (0..g.rows()).map(|r| cos(z.row(j), g.row(r))).sum::<f64>() / g.rows() as f64;
            prop_assert!(close(scores[0][j], s));
        }
    }

    #[test]
    fn mixup_matches_explicit_loops(
        case in (1usize..5, 1usize..5, 1usize..4).prop_flat_map(|(n, k, d)| (matrix(n, d), matrix(k, d))),
        lambda in 0.0..1.0f64,
        softmax in any::<bool>(),
    ) {
        let (z, b) = case;
        let (n, k, d) = (z.rows(), b.rows(), z.cols());
        let bank = AnchorBank { embeddings: b.clone(), sources: vec![(0, 0); k], k };
        let mode = if softmax { MixupMode::SoftmaxNormalized } else { MixupMode::Verbatim };
        let mut tape = Tape::new();
        let zv = tape.constant(z.clone()).unwrap();
        let out = mixup_with_lambda(&mut tape, zv, &bank, lambda, mode).unwrap();
        let got = tape.value(out);
        for i in 0..n {
            let mut t: Vec<f64> = (0..k)
                .map(|a| (0..d).map(|c| z[(i, c)] * b[(a, c)]).sum())
                .collect();
            if softmax {
                let mx = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = t.iter().map(|v| (v - mx).exp()).collect();
                let s: f64 = e.iter().sum();
                t = e.iter().map(|v| v / s).collect();
            }
            for c in 0..d {
                let fused: f64 = (0..k).map(|a| t[a] * b[(a, c)]).sum();
                let want = lambda * z[(i, c)] + (1.0 - lambda) * fused;
                prop_assert!(close(got[(i, c)], want), "{} vs {}", got[(i, c)], want);
            }
        }
    }

    #[test]
    fn auroc_matches_pairwise_count(
        pairs in prop::collection::vec((0u8..6, any::<bool>()), 2..40),
    ) {
        let scores: Vec<f64> = pairs.iter().map(|p| p.0 as f64 / 2.0).collect();
        let labels: Vec<Label> = pairs
            .iter()
            .map(|p| if p.1 { Label::Anomalous } else { Label::Normal })
            .collect();
        let both = labels.iter().any(|l| l.is_anomalous()) && labels.iter().any(|l| !l.is_anomalous());
        prop_assume!(both);
        let got = auroc(&scores, &labels).unwrap();
        prop_assert!(close(got, auroc_oracle(&scores, &labels)));
    }

    #[test]
    fn auroc_flips_under_negation(
        pairs in prop::collection::vec((-1e3..1e3f64, any::<bool>()), 2..40),
    ) {
        let scores: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let labels: Vec<Label> = pairs.iter().map(|p| if p.1 { Label::Anomalous } else { Label::Normal }).collect();
        let both = labels.iter().any(|l| l.is_anomalous()) && labels.iter().any(|l| !l.is_anomalous());
        let mut sorted = scores.clone();
        sorted.sort_by(f64::total_cmp);
        let tie_free = sorted.windows(2).all(|w| w[0] != w[1]);
        prop_assume!(both && tie_free);
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        let a = auroc(&scores, &labels).unwrap();
        let b = auroc(&neg, &labels).unwrap();
        prop_assert!((a - (1.0 - b)).abs() < 1e-12);
    }
}
