//! Construction invariants: parameter budgets, seed discipline, shapes,
//! gradient flow through every family.

use scslab_nn::{ForwardMode, PMode, QMode};
use scslab_tensor::Tensor;
use scslab_zoo::{build_model, LayerVariantConfig, ARCH_FAMILIES};

fn cfg(arch: &str, kind: &str) -> LayerVariantConfig {
    LayerVariantConfig {
        layer_kind: kind.into(),
        arch_family: arch.into(),
        seed: 7,
        ..LayerVariantConfig::default()
    }
}

/// Deterministic quasi-random batch in roughly [-0.5, 0.5].
fn probe_batch(n: usize) -> Tensor {
    Tensor::from_fn(&[n, 3, 32, 32], |i| {
        let h = (i as u64).wrapping_mul(2654435761).wrapping_add(12345) % 1000;
        h as f64 / 1000.0 - 0.5
    })
}

#[test]
fn parameter_budgets_hold_for_every_kind() {
    for kind in ["conv", "cossim", "scs", "sdp"] {
        let small = build_model(&cfg("rohrer_small", kind)).unwrap();
        assert!(
            (20_000..=30_000).contains(&small.param_count()),
            "rohrer_small/{kind} has {} params",
            small.param_count()
        );
        let wide = build_model(&cfg("rohrer_100k", kind)).unwrap();
        assert!(
            (90_000..=110_000).contains(&wide.param_count()),
            "rohrer_100k/{kind} has {} params",
            wide.param_count()
        );
    }
}

#[test]
fn exact_parameter_counts_are_pinned() {
    assert_eq!(build_model(&cfg("rohrer_small", "conv")).unwrap().param_count(), 24_234);
    assert_eq!(build_model(&cfg("rohrer_small", "scs")).unwrap().param_count(), 24_237);
    assert_eq!(build_model(&cfg("rohrer_100k", "conv")).unwrap().param_count(), 106_338);
    assert_eq!(build_model(&cfg("rohrer_100k", "scs")).unwrap().param_count(), 106_341);
    assert_eq!(build_model(&cfg("mini_resnet", "conv")).unwrap().param_count(), 172_042);
}

#[test]
fn same_seed_gives_identical_kernels_across_kinds() {
    for arch in ARCH_FAMILIES {
        let base = build_model(&cfg(arch, "conv")).unwrap();
        let base_weights: Vec<(String, Vec<u64>)> = base
            .named_params()
            .into_iter()
            .filter(|(n, _)| n.ends_with(".weight"))
            .map(|(n, t)| (n, t.to_vec().iter().map(|v| v.to_bits()).collect()))
            .collect();
        for kind in ["cossim", "scs", "sdp"] {
            let other = build_model(&cfg(arch, kind)).unwrap();
            let other_weights: Vec<(String, Vec<u64>)> = other
                .named_params()
                .into_iter()
                .filter(|(n, _)| n.ends_with(".weight"))
                .map(|(n, t)| (n, t.to_vec().iter().map(|v| v.to_bits()).collect()))
                .collect();
            assert_eq!(
                base_weights, other_weights,
                "{arch}: {kind} kernels differ from conv on the same seed"
            );
        }
    }
}

#[test]
fn rebuilds_are_deterministic_and_seeds_matter() {
    let a = build_model(&cfg("rohrer_small", "scs")).unwrap();
    let b = build_model(&cfg("rohrer_small", "scs")).unwrap();
    for ((na, ta), (nb, tb)) in a.named_params().iter().zip(b.named_params().iter()) {
        assert_eq!(na, nb);
        assert_eq!(ta.to_vec(), tb.to_vec(), "{na} differs between rebuilds");
    }
    let mut other_seed = cfg("rohrer_small", "scs");
    other_seed.seed = 8;
    let c = build_model(&other_seed).unwrap();
    let wa = &a.named_params()[0].1.to_vec();
    let wc = &c.named_params()[0].1.to_vec();
    assert_ne!(wa, wc, "different seeds must draw different kernels");
}

#[test]
fn every_family_and_kind_maps_batches_to_class_scores() {
    let x = probe_batch(2);
    for arch in ARCH_FAMILIES {
        for kind in ["conv", "cossim", "scs", "sdp"] {
            let model = build_model(&cfg(arch, kind)).unwrap();
            let y = model.forward(&x, ForwardMode::Eval).unwrap();
            assert_eq!(y.shape(), &[2, 10], "{arch}/{kind}");
            y.assert_finite().unwrap();
        }
    }
}

#[test]
fn gradients_reach_every_parameter() {
    let x = probe_batch(2);
    for arch in ARCH_FAMILIES {
        let model = build_model(&cfg(arch, "scs")).unwrap();
        let y = model.forward(&x, ForwardMode::Train).unwrap();
        y.sum().backward().unwrap();
        for (name, t) in model.named_params() {
            let g = t
                .grad()
                .unwrap_or_else(|| panic!("{arch}: no grad on {name}"));
            assert_eq!(g.len(), t.numel());
            assert!(g.iter().all(|v| v.is_finite()), "{arch}: {name} grad not finite");
        }
        // the stem/first feature kernels must actually receive signal
        let (name, w) = &model.named_params()[0];
        assert!(name.ends_with(".weight"));
        assert!(
            w.grad().unwrap().iter().any(|&v| v != 0.0),
            "{arch}: first kernel grad identically zero"
        );
    }
}

#[test]
fn batchnorm_variants_expose_running_stats() {
    let mut c = cfg("rohrer_small", "conv");
    c.normalization = "batchnorm".into();
    let model = build_model(&c).unwrap();
    let buffers = model.named_buffers();
    assert_eq!(buffers.len(), 6); // mean+var for each of 3 stages
    assert!(buffers.iter().any(|(n, _)| n == "norm1.running_mean"));
    let plain = build_model(&cfg("rohrer_small", "conv")).unwrap();
    assert!(plain.named_buffers().is_empty());
}

#[test]
fn param_names_are_unique_and_dotted() {
    for arch in ARCH_FAMILIES {
        let model = build_model(&cfg(arch, "scs")).unwrap();
        let names: Vec<String> = model.named_params().into_iter().map(|(n, _)| n).collect();
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), names.len(), "{arch}: duplicate param names");
        assert!(names.iter().all(|n| n.contains('.')));
    }
    let resnet = build_model(&cfg("mini_resnet", "scs")).unwrap();
    let names: Vec<String> = resnet.named_params().into_iter().map(|(n, _)| n).collect();
    assert!(names.iter().any(|n| n == "s2b1.f1.weight"));
    assert!(names.iter().any(|n| n == "s3b2.f2.p_raw"));
}

#[test]
fn descriptor_flags_degenerate_conv_stack() {
    let mut c = cfg("rohrer_small", "conv");
    c.activation = "none".into();
    let flagged = build_model(&c).unwrap();
    assert_eq!(flagged.descriptor().flags.len(), 1);
    let normal = build_model(&cfg("rohrer_small", "conv")).unwrap();
    assert!(normal.descriptor().flags.is_empty());
    let mut s = cfg("rohrer_small", "scs");
    s.activation = "none".into();
    assert!(build_model(&s).unwrap().descriptor().flags.is_empty());
}

#[test]
fn unknown_names_are_rejected_with_candidates() {
    let mut c = cfg("rohrer_small", "convolution");
    let err = build_model(&c).unwrap_err().to_string();
    assert!(err.contains("convolution") && err.contains("conv"), "{err}");
    c = cfg("resnet50", "conv");
    let err = build_model(&c).unwrap_err().to_string();
    assert!(err.contains("architecture"), "{err}");
    c = cfg("rohrer_small", "conv");
    c.pooling = "avg".into();
    assert!(build_model(&c).is_err());
    c = cfg("rohrer_small", "scs");
    c.p_mode = PMode::Fixed(-1.0);
    assert!(build_model(&c).is_err());
    c = cfg("rohrer_small", "scs");
    c.q_mode = QMode::Fixed(-0.1);
    assert!(build_model(&c).is_err());
}

#[test]
fn fixed_modes_strip_raw_parameters() {
    let mut c = cfg("rohrer_small", "scs");
    c.p_mode = PMode::Fixed(2.0);
    c.q_mode = QMode::Fixed(0.0);
    let model = build_model(&c).unwrap();
    let names: Vec<String> = model.named_params().into_iter().map(|(n, _)| n).collect();
    assert!(names.iter().all(|n| !n.ends_with("p_raw") && !n.ends_with("q_raw")));
    // exact q = 0: the bare cosine still evaluates finitely
    let y = model.forward(&probe_batch(1), ForwardMode::Eval).unwrap();
    y.assert_finite().unwrap();
    let leaf_sharpness: Vec<Vec<f64>> = model
        .leaf_layers()
        .iter()
        .filter_map(|l| l.sharpness())
        .collect();
    assert_eq!(leaf_sharpness.len(), 3);
    assert!(leaf_sharpness.iter().flatten().all(|&p| p == 2.0));
}

#[test]
fn descriptor_spatial_path_matches_design() {
    let model = build_model(&cfg("rohrer_small", "conv")).unwrap();
    let d = model.descriptor();
    let shape_of = |name: &str| -> Vec<usize> {
        d.layers
            .iter()
            .find(|l| l.name == name)
            .unwrap_or_else(|| panic!("no layer {name}"))
            .output_shape
            .clone()
    };
    assert_eq!(shape_of("features1"), vec![16, 32, 32]);
    assert_eq!(shape_of("pool1"), vec![16, 16, 16]);
    assert_eq!(shape_of("pool2"), vec![32, 8, 8]);
    assert_eq!(shape_of("pool3"), vec![64, 4, 4]);
    assert_eq!(shape_of("avgpool"), vec![64, 1, 1]);
    assert_eq!(shape_of("head"), vec![10]);

    let resnet = build_model(&cfg("mini_resnet", "conv")).unwrap();
    let d = resnet.descriptor();
    let shape_of = |name: &str| -> Vec<usize> {
        d.layers
            .iter()
            .find(|l| l.name == name)
            .unwrap()
            .output_shape
            .clone()
    };
    assert_eq!(shape_of("stem_pool"), vec![16, 16, 16]);
    assert_eq!(shape_of("s1b2"), vec![16, 16, 16]);
    assert_eq!(shape_of("s2b1"), vec![32, 8, 8]);
    assert_eq!(shape_of("s3b1"), vec![64, 4, 4]);
    assert_eq!(shape_of("head"), vec![10]);
}

#[test]
fn structure_hash_tracks_architecture_not_kind_labels() {
    let conv = build_model(&cfg("rohrer_small", "conv")).unwrap();
    let small2 = {
        let mut c = cfg("rohrer_small", "conv");
        c.seed = 99;
        build_model(&c).unwrap()
    };
    // same structure, different seed: checkpoints are interchangeable
    assert_eq!(
        conv.descriptor().structure_hash(),
        small2.descriptor().structure_hash()
    );
    let scs = build_model(&cfg("rohrer_small", "scs")).unwrap();
    // scs swaps bias for p/q: different parameter layout, different hash
    assert_ne!(
        conv.descriptor().structure_hash(),
        scs.descriptor().structure_hash()
    );
    let wide = build_model(&cfg("rohrer_100k", "conv")).unwrap();
    assert_ne!(
        conv.descriptor().structure_hash(),
        wide.descriptor().structure_hash()
    );
}
