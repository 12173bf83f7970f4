use super::*;
use crate::rng::Rng;
use crate::tensor::Tensor;

fn tiny_net(seed: u64) -> Network<f32> {
    build_network(&NetworkConfig::tiny(), &mut Rng::new(seed)).unwrap()
}

#[test]
fn zeroed_residual_branch_is_relu_identity() {
    // in == out channels: identity shortcut; zero conv weights and gamma=0
    // collapse the main branch, so the block reduces to relu(x)
    let config = NetworkConfig {
        in_channels: 4,
        encoder_channels: [4, 4, 8],
        image_size: 8,
        ..NetworkConfig::tiny()
    };
    let mut net: Network<f32> = build_network(&config, &mut Rng::new(1)).unwrap();
    assert!(net.arch.enc[0].shortcut.is_none());
    for name in ["enc1.conv1.weight", "enc1.conv2.weight"] {
        let idx = net.store.lookup(name).unwrap();
        let zero = Tensor::zeros(net.store.value(idx).shape()).unwrap();
        net.store.set_value(idx, zero).unwrap();
    }
    for name in ["enc1.bn1.gamma", "enc1.bn2.gamma"] {
        let idx = net.store.lookup(name).unwrap();
        let zero = Tensor::zeros(net.store.value(idx).shape()).unwrap();
        net.store.set_value(idx, zero).unwrap();
    }
    let mut rng = Rng::new(2);
    let x: Tensor = rng.normal_tensor(&[1, 4, 8, 8], 0.0, 1.0).unwrap();
    let y = net.block_infer(&net.arch.enc[0], &x).unwrap();
    let expect = crate::ops::relu(&x);
    assert_eq!(y, expect);
}

#[test]
fn block_shape_contract() {
    let net = tiny_net(3);
    let mut rng = Rng::new(4);
    let x: Tensor = rng.normal_tensor(&[1, 3, 8, 8], 0.0, 1.0).unwrap();
    let y = net.block_infer(&net.arch.enc[0], &x).unwrap();
    assert_eq!(y.shape(), &[1, 2, 8, 8]);
}

#[test]
fn one_to_one_block_has_22_trainable_params() {
    let config = NetworkConfig {
        in_channels: 1,
        encoder_channels: [1, 2, 4],
        bridge_channels: 8,
        decoder_channels: [4, 2, 1],
        image_size: 8,
        ..NetworkConfig::default()
    };
    let net: Network<f32> = build_network(&config, &mut Rng::new(5)).unwrap();
    let count: usize = net
        .store
        .entries()
        .iter()
        .filter(|e| e.trainable && e.name.starts_with("enc1."))
        .map(|e| e.value.len())
        .sum();
    assert_eq!(count, 22);
}

#[test]
fn topology_deterministic_across_seeds() {
    let a = tiny_net(1);
    let b = tiny_net(2);
    assert_eq!(a.store.len(), b.store.len());
    for (ea, eb) in a.store.entries().iter().zip(b.store.entries()) {
        assert_eq!(ea.name, eb.name);
        assert_eq!(ea.value.shape(), eb.value.shape());
        assert_eq!(ea.trainable, eb.trainable);
    }
    // different seeds give different weights
    let wa = a.store.value(a.store.lookup("enc1.conv1.weight").unwrap());
    let wb = b.store.value(b.store.lookup("enc1.conv1.weight").unwrap());
    assert_ne!(wa, wb);
}

#[test]
fn same_seed_bitwise_identical_build() {
    let a = tiny_net(9);
    let b = tiny_net(9);
    for (ea, eb) in a.store.entries().iter().zip(b.store.entries()) {
        assert_eq!(ea.value, eb.value, "{}", ea.name);
    }
}

/// Independent per-layer summation of trainable scalars.
fn analytic_param_count(cfg: &NetworkConfig) -> usize {
    fn block(cin: usize, cout: usize) -> usize {
        let convs = cout * cin * 9 + cout * cout * 9;
        let bns = 2 * cout + 2 * cout;
        let shortcut = if cin != cout { cout * cin + 2 * cout } else { 0 };
        convs + bns + shortcut
    }
    let [e1, e2, e3] = cfg.encoder_channels;
    let [d1, d2, d3] = cfg.decoder_channels;
    let br = cfg.bridge_channels;
    let dec_in = if cfg.decoder_skip_fusion {
        [br + e3, d1 + e2, d2 + e1]
    } else {
        [br, d1, d2]
    };
    block(cfg.in_channels, e1)
        + block(e1, e2)
        + block(e2, e3)
        + block(e3, br)
        + block(dec_in[0], d1)
        + block(dec_in[1], d2)
        + block(dec_in[2], d3)
        + (e1 + e2 + e3 + d3) + 1
}

#[test]
fn param_count_matches_analytic_oracle() {
    for cfg in [
        NetworkConfig::default(),
        NetworkConfig::reduced(),
        NetworkConfig::tiny(),
        NetworkConfig {
            decoder_skip_fusion: true,
            ..NetworkConfig::reduced()
        },
    ] {
        assert_eq!(
            param_count(&cfg).unwrap(),
            analytic_param_count(&cfg),
            "{cfg:?}"
        );
    }
}

#[test]
fn param_count_monotone_in_widths() {
    let base = param_count(&NetworkConfig::tiny()).unwrap();
    for grow in 0..4 {
        let mut cfg = NetworkConfig::tiny();
        match grow {
            0 => cfg.encoder_channels[0] += 1,
            1 => cfg.encoder_channels[2] += 1,
            2 => cfg.bridge_channels += 1,
            _ => cfg.decoder_channels[1] += 1,
        }
        assert!(param_count(&cfg).unwrap() > base);
    }
}

#[test]
fn forward_shape_and_range() {
    let mut net = tiny_net(7);
    let mut rng = Rng::new(8);
    let x: Tensor = rng.normal_tensor(&[2, 3, 8, 8], 0.0, 1.0).unwrap();
    let y = net.forward(&x, Mode::Train).unwrap();
    assert_eq!(y.shape(), &[2, 1, 8, 8]);
    assert!(y.data().iter().all(|&v| v > 0.0 && v < 1.0));
}

#[test]
fn infer_is_resolution_flexible_and_stateless() {
    let net = tiny_net(10);
    let mut rng = Rng::new(11);
    // weights are resolution independent: infer at sizes other than config
    for s in [8usize, 16, 24] {
        let x: Tensor = rng.normal_tensor(&[1, 3, s, s], 0.0, 1.0).unwrap();
        let y1 = net.infer(&x).unwrap();
        assert_eq!(y1.shape(), &[1, 1, s, s]);
        let y2 = net.infer(&x).unwrap();
        assert_eq!(y1, y2);
    }
    let bad: Tensor = rng.normal_tensor(&[1, 3, 12, 12], 0.0, 1.0).unwrap();
    assert!(net.infer(&bad).is_err());
}

#[test]
fn train_mode_requires_config_size() {
    let mut net = tiny_net(12);
    let mut rng = Rng::new(13);
    let x: Tensor = rng.normal_tensor(&[1, 3, 16, 16], 0.0, 1.0).unwrap();
    assert!(net.forward_train(&x, true).is_err());
}

#[test]
fn wrong_channel_count_rejected() {
    let net = tiny_net(14);
    let x = Tensor::zeros(&[1, 2, 8, 8]).unwrap();
    assert!(matches!(net.infer(&x), Err(Error::ShapeMismatch(_))));
}

#[test]
fn bridge_is_one_eighth_resolution() {
    let net = tiny_net(15);
    let mut rng = Rng::new(16);
    let x: Tensor = rng.normal_tensor(&[1, 3, 16, 16], 0.0, 1.0).unwrap();
    let mut trace = Vec::new();
    net.infer_traced(&x, Some(&mut trace)).unwrap();
    let bridge = trace.iter().find(|(n, _)| n == "bridge").unwrap();
    assert_eq!(bridge.1, vec![1, 16, 2, 2]);
    // exactly 3 pools and 3 decoder stages
    assert_eq!(trace.iter().filter(|(n, _)| n.starts_with("pool")).count(), 3);
    assert_eq!(trace.iter().filter(|(n, _)| n.starts_with("dec")).count(), 3);
}

#[test]
fn skip_fusion_changes_only_channel_arithmetic() {
    let cfg = NetworkConfig {
        decoder_skip_fusion: true,
        ..NetworkConfig::tiny()
    };
    let mut net: Network<f32> = build_network(&cfg, &mut Rng::new(17)).unwrap();
    let mut rng = Rng::new(18);
    let x: Tensor = rng.normal_tensor(&[1, 3, 8, 8], 0.0, 1.0).unwrap();
    let y = net.forward(&x, Mode::Train).unwrap();
    assert_eq!(y.shape(), &[1, 1, 8, 8]);
    let y = net.infer(&x).unwrap();
    assert_eq!(y.shape(), &[1, 1, 8, 8]);
}

#[test]
fn invalid_config_rejected() {
    let mut bad = NetworkConfig::default();
    bad.image_size = 100; // not divisible by 8
    assert!(build_network::<f32>(&bad, &mut Rng::new(0)).is_err());
    let mut bad = NetworkConfig::default();
    bad.encoder_channels[1] = 0;
    assert!(build_network::<f32>(&bad, &mut Rng::new(0)).is_err());
}

mod checkpoint_roundtrip {
    use super::*;
    use std::fs;

    #[test]
    fn save_load_preserves_forward_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.rupn");
        let mut net = tiny_net(20);
        // perturb running stats so they are exercised by the round trip
        let mut rng = Rng::new(21);
        let x: Tensor = rng.normal_tensor(&[2, 3, 8, 8], 0.0, 1.0).unwrap();
        net.forward_train(&x, true).unwrap();
        net.tape = None;

        save_checkpoint(&net, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.config(), net.config());
        for (a, b) in net.store.entries().iter().zip(loaded.store.entries()) {
            assert_eq!(a.value, b.value, "{}", a.name);
        }
        let probe: Tensor = rng.normal_tensor(&[1, 3, 8, 8], 0.0, 1.0).unwrap();
        assert_eq!(net.infer(&probe).unwrap(), loaded.infer(&probe).unwrap());
    }

    #[test]
    fn truncated_checkpoint_reports_offset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.rupn");
        let net = tiny_net(22);
        save_checkpoint(&net, &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        let cut = bytes.len() / 2;
        fs::write(&path, &bytes[..cut]).unwrap();
        match load_checkpoint(&path) {
            Err(Error::CorruptCheckpoint { offset, .. }) => {
                assert!(offset <= cut as u64, "offset {offset} past cut {cut}");
            }
            other => panic!("expected corrupt-checkpoint error, got {other:?}"),
        }
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.rupn");
        let net = tiny_net(23);
        save_checkpoint(&net, &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[0] = b'X';
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(Error::CorruptCheckpoint { offset: 0, .. })
        ));
    }

    #[test]
    fn loaded_weights_run_at_other_resolutions() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.rupn");
        // config says 8x8; inference at 64x64 must still work
        let net = tiny_net(24);
        save_checkpoint(&net, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        let mut rng = Rng::new(25);
        let x: Tensor = rng.normal_tensor(&[1, 3, 64, 64], 0.0, 1.0).unwrap();
        let y = loaded.infer(&x).unwrap();
        assert_eq!(y.shape(), &[1, 1, 64, 64]);
    }
}
