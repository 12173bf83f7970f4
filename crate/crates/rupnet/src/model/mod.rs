//! The RUPNet network: three residual encoder blocks with 2x2 max pooling, a
//! residual bridge, three decoder stages of bilinear upsampling plus a
//! residual block, and a head that fuses full-resolution skip taps through a
//! 1x1 convolution and sigmoid.

mod checkpoint;
mod params;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use params::{ParamEntry, ParamStore};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::{self, Mode, OpRecord};
use crate::rng::Rng;
use crate::tensor::{concat_channels, split_channels, Scalar, TensorBase};

/// Channel widths, image size, and normalization constants; fully determines
/// the topology and parameter count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub in_channels: usize,
    pub encoder_channels: [usize; 3],
    pub bridge_channels: usize,
    pub decoder_channels: [usize; 3],
    pub image_size: usize,
    /// When true, each decoder block also consumes the matching encoder skip
    /// (conventional U-style fusion). The default follows the head-only
    /// fusion path; toggling changes channel arithmetic only, never shapes.
    pub decoder_skip_fusion: bool,
    pub bn_eps: f64,
    pub bn_momentum: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            in_channels: 3,
            encoder_channels: [16, 32, 64],
            bridge_channels: 128,
            decoder_channels: [64, 32, 16],
            image_size: 512,
            decoder_skip_fusion: false,
            bn_eps: 1e-5,
            bn_momentum: 0.1,
        }
    }
}

impl NetworkConfig {
    /// Small widths for fast desk-scale training.
    pub fn reduced() -> Self {
        Self {
            encoder_channels: [8, 16, 32],
            bridge_channels: 64,
            decoder_channels: [32, 16, 8],
            image_size: 64,
            ..Self::default()
        }
    }

    /// Minimal widths for finite-difference gradient checking.
    pub fn tiny() -> Self {
        Self {
            encoder_channels: [2, 4, 8],
            bridge_channels: 16,
            decoder_channels: [8, 4, 2],
            image_size: 8,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.image_size < 8 || self.image_size % 8 != 0 {
            return Err(Error::Config(format!(
                "image_size must be a positive multiple of 8, got {}",
                self.image_size
            )));
        }
        let channels = [self.in_channels, self.bridge_channels]
            .into_iter()
            .chain(self.encoder_channels)
            .chain(self.decoder_channels);
        for c in channels {
            if c == 0 {
                return Err(Error::Config("all channel counts must be >= 1".into()));
            }
        }
        if !(self.bn_eps > 0.0) {
            return Err(Error::Config("bn_eps must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.bn_momentum) {
            return Err(Error::Config("bn_momentum must be in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Store indices for one convolution.
#[derive(Debug, Clone)]
struct ConvRef {
    w: usize,
    b: Option<usize>,
    pad: usize,
}

/// Store indices for one batch-norm layer.
#[derive(Debug, Clone)]
struct BnRef {
    gamma: usize,
    beta: usize,
    rmean: usize,
    rvar: usize,
}

/// conv3x3 -> BN -> ReLU -> conv3x3 -> BN, plus an additive shortcut
/// (identity, or 1x1 conv + BN when the channel count changes), final ReLU.
#[derive(Debug, Clone)]
struct BlockRef {
    conv1: ConvRef,
    bn1: BnRef,
    conv2: ConvRef,
    bn2: BnRef,
    shortcut: Option<(ConvRef, BnRef)>,
}

#[derive(Debug, Clone)]
struct Arch {
    enc: Vec<BlockRef>,
    bridge: BlockRef,
    dec: Vec<BlockRef>,
    head: ConvRef,
}

/// Backward bookkeeping for one residual block.
struct BlockTape<E: Scalar> {
    conv1: OpRecord<E>,
    bn1: OpRecord<E>,
    relu1: OpRecord<E>,
    conv2: OpRecord<E>,
    bn2: OpRecord<E>,
    shortcut: Option<(OpRecord<E>, OpRecord<E>)>,
    relu_out: OpRecord<E>,
}

/// Pending running-statistics update from one train-mode batch-norm.
struct BnUpdate<E: Scalar> {
    rmean: usize,
    rvar: usize,
    stats: ops::BnBatchStats<E>,
}

/// Everything recorded by one train-mode forward, consumed by `backward`.
pub struct Tape<E: Scalar> {
    enc: Vec<(BlockTape<E>, OpRecord<E>)>,
    bridge: BlockTape<E>,
    /// Per decoder stage: upsample record, fusion channel split (upsampled
    /// channels, skip channels) when decoder_skip_fusion is on, block tape.
    dec: Vec<(OpRecord<E>, Option<[usize; 2]>, BlockTape<E>)>,
    head_up2: OpRecord<E>,
    head_up4: OpRecord<E>,
    head_split: [usize; 4],
    head_conv: OpRecord<E>,
    head_sig: OpRecord<E>,
}

/// The assembled network: configuration, parameter store, and layer wiring.
pub struct Network<E: Scalar> {
    config: NetworkConfig,
    store: ParamStore<E>,
    arch: Arch,
    tape: Option<Tape<E>>,
}

impl<E: Scalar> std::fmt::Debug for Network<E> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Network")
            .field("config", &self.config)
            .field("params", &self.param_count())
            .field("dtype", &E::NAME)
            .finish()
    }
}

/// Builds a network with fan-in-scaled normal initialization
/// (std = sqrt(2 / fan_in)), BN gamma 1 / beta 0, zero head bias. Parameter
/// names and creation order depend only on the config, so two builds with
/// equal config have identical topology.
pub fn build_network<E: Scalar>(config: &NetworkConfig, rng: &mut Rng) -> Result<Network<E>> {
    config.validate()?;
    let mut store = ParamStore::new();

    let mut make_conv = |store: &mut ParamStore<E>,
                         rng: &mut Rng,
                         name: &str,
                         cin: usize,
                         cout: usize,
                         k: usize,
                         bias: bool|
     -> Result<ConvRef> {
        let fan_in = cin * k * k;
        let std = (2.0 / fan_in as f64).sqrt();
        let w = rng.normal_tensor(&[cout, cin, k, k], 0.0, std)?;
        let w_idx = store.insert(&format!("{name}.weight"), w, true)?;
        let b_idx = if bias {
            Some(store.insert(&format!("{name}.bias"), TensorBase::zeros(&[cout])?, true)?)
        } else {
            None
        };
        Ok(ConvRef {
            w: w_idx,
            b: b_idx,
            pad: (k - 1) / 2,
        })
    };

    let make_bn = |store: &mut ParamStore<E>, name: &str, c: usize| -> Result<BnRef> {
        Ok(BnRef {
            gamma: store.insert(&format!("{name}.gamma"), TensorBase::new(&[c], E::one())?, true)?,
            beta: store.insert(&format!("{name}.beta"), TensorBase::zeros(&[c])?, true)?,
            rmean: store.insert(
                &format!("{name}.running_mean"),
                TensorBase::zeros(&[c])?,
                false,
            )?,
            rvar: store.insert(
                &format!("{name}.running_var"),
                TensorBase::new(&[c], E::one())?,
                false,
            )?,
        })
    };

    let mut make_block = |store: &mut ParamStore<E>,
                          rng: &mut Rng,
                          name: &str,
                          cin: usize,
                          cout: usize|
     -> Result<BlockRef> {
        let conv1 = make_conv(store, rng, &format!("{name}.conv1"), cin, cout, 3, false)?;
        let bn1 = make_bn(store, &format!("{name}.bn1"), cout)?;
        let conv2 = make_conv(store, rng, &format!("{name}.conv2"), cout, cout, 3, false)?;
        let bn2 = make_bn(store, &format!("{name}.bn2"), cout)?;
        let shortcut = if cin != cout {
            let c = make_conv(store, rng, &format!("{name}.shortcut.conv"), cin, cout, 1, false)?;
            let b = make_bn(store, &format!("{name}.shortcut.bn"), cout)?;
            Some((c, b))
        } else {
            None
        };
        Ok(BlockRef {
            conv1,
            bn1,
            conv2,
            bn2,
            shortcut,
        })
    };

    let [e1, e2, e3] = config.encoder_channels;
    let [d1, d2, d3] = config.decoder_channels;
    let br = config.bridge_channels;

    let enc = vec![
        make_block(&mut store, rng, "enc1", config.in_channels, e1)?,
        make_block(&mut store, rng, "enc2", e1, e2)?,
        make_block(&mut store, rng, "enc3", e2, e3)?,
    ];
    let bridge = make_block(&mut store, rng, "bridge", e3, br)?;
    // With fusion on, each decoder consumes the upsampled previous stage
    // concatenated with the matching encoder skip (deepest first).
    let dec_in = if config.decoder_skip_fusion {
        [br + e3, d1 + e2, d2 + e1]
    } else {
        [br, d1, d2]
    };
    let dec = vec![
        make_block(&mut store, rng, "dec1", dec_in[0], d1)?,
        make_block(&mut store, rng, "dec2", dec_in[1], d2)?,
        make_block(&mut store, rng, "dec3", dec_in[2], d3)?,
    ];
    let head_in = e1 + e2 + e3 + d3;
    let head = make_conv(&mut store, rng, "head.conv", head_in, 1, 1, true)?;

    Ok(Network {
        config: config.clone(),
        store,
        arch: Arch {
            enc,
            bridge,
            dec,
            head,
        },
        tape: None,
    })
}

/// Count of trainable scalars for a config (conv weights, head bias, BN
/// gamma/beta; running statistics excluded).
pub fn param_count(config: &NetworkConfig) -> Result<usize> {
    let mut rng = Rng::new(0);
    Ok(build_network::<f32>(config, &mut rng)?.param_count())
}

impl<E: Scalar> Network<E> {
    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore<E> {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore<E> {
        &mut self.store
    }

    pub fn param_count(&self) -> usize {
        self.store.trainable_scalars()
    }

    fn bn_vecs(&self, bn: &BnRef) -> (Vec<E>, Vec<E>) {
        (
            self.store.value(bn.gamma).data().to_vec(),
            self.store.value(bn.beta).data().to_vec(),
        )
    }

    fn eps(&self) -> E {
        E::from_f64(self.config.bn_eps)
    }

    fn check_input(&self, x: &TensorBase<E>, mode: Mode) -> Result<()> {
        let [_, c, h, w] = x.dims4()?;
        if c != self.config.in_channels {
            return Err(Error::ShapeMismatch(format!(
                "input has {c} channels, network expects {}",
                self.config.in_channels
            )));
        }
        match mode {
            Mode::Train => {
                let s = self.config.image_size;
                if h != s || w != s {
                    return Err(Error::ShapeMismatch(format!(
                        "train-mode input must be {s}x{s}, got {h}x{w}"
                    )));
                }
            }
            Mode::Infer => {
                if h < 8 || w < 8 || h % 8 != 0 || w % 8 != 0 {
                    return Err(Error::ShapeMismatch(format!(
                        "infer-mode spatial dims must be multiples of 8, got {h}x{w}"
                    )));
                }
            }
        }
        Ok(())
    }

    // ----- inference path (no state, no records) -----

    fn block_infer(&self, b: &BlockRef, x: &TensorBase<E>) -> Result<TensorBase<E>> {
        let eps = self.eps();
        let (g1, be1) = self.bn_vecs(&b.bn1);
        let h = ops::conv2d(x, self.store.value(b.conv1.w), None, b.conv1.pad)?;
        let h = ops::batchnorm_infer(
            &h,
            &g1,
            &be1,
            self.store.value(b.bn1.rmean).data(),
            self.store.value(b.bn1.rvar).data(),
            eps,
        )?;
        let h = ops::relu(&h);
        let h = ops::conv2d(&h, self.store.value(b.conv2.w), None, b.conv2.pad)?;
        let (g2, be2) = self.bn_vecs(&b.bn2);
        let h = ops::batchnorm_infer(
            &h,
            &g2,
            &be2,
            self.store.value(b.bn2.rmean).data(),
            self.store.value(b.bn2.rvar).data(),
            eps,
        )?;
        let s = match &b.shortcut {
            None => x.clone(),
            Some((conv, bn)) => {
                let s = ops::conv2d(x, self.store.value(conv.w), None, conv.pad)?;
                let (g, be) = self.bn_vecs(bn);
                ops::batchnorm_infer(
                    &s,
                    &g,
                    &be,
                    self.store.value(bn.rmean).data(),
                    self.store.value(bn.rvar).data(),
                    eps,
                )?
            }
        };
        Ok(ops::relu(&h.add(&s)?))
    }

    /// Read-only forward. Safe to call concurrently; accepts any spatial size
    /// divisible by 8.
    pub fn infer(&self, x: &TensorBase<E>) -> Result<TensorBase<E>> {
        Ok(self.infer_traced(x, None)?)
    }

    /// Like [`Network::infer`] but records the shape of each named stage when
    /// `trace` is given.
    pub fn infer_traced(
        &self,
        x: &TensorBase<E>,
        mut trace: Option<&mut Vec<(String, Vec<usize>)>>,
    ) -> Result<TensorBase<E>> {
        self.check_input(x, Mode::Infer)?;
        let mut rec = |name: &str, t: &TensorBase<E>| {
            if let Some(tr) = trace.as_deref_mut() {
                tr.push((name.to_string(), t.shape().to_vec()));
            }
        };
        let mut skips = Vec::with_capacity(3);
        let mut cur = x.clone();
        for (i, block) in self.arch.enc.iter().enumerate() {
            let e = self.block_infer(block, &cur)?;
            rec(&format!("enc{}", i + 1), &e);
            let (p, _) = ops::maxpool2x2(&e)?;
            rec(&format!("pool{}", i + 1), &p);
            skips.push(e);
            cur = p;
        }
        let mut cur = self.block_infer(&self.arch.bridge, &cur)?;
        rec("bridge", &cur);
        for (i, block) in self.arch.dec.iter().enumerate() {
            let up = ops::bilinear_upsample(&cur, 2)?;
            let block_in = if self.config.decoder_skip_fusion {
                concat_channels(&[&up, &skips[2 - i]])?
            } else {
                up
            };
            cur = self.block_infer(block, &block_in)?;
            rec(&format!("dec{}", i + 1), &cur);
        }
        let s2u = ops::bilinear_upsample(&skips[1], 2)?;
        let s3u = ops::bilinear_upsample(&skips[2], 4)?;
        let cat = concat_channels(&[&skips[0], &s2u, &s3u, &cur])?;
        let logits = ops::conv2d(
            &cat,
            self.store.value(self.arch.head.w),
            self.arch.head.b.map(|i| self.store.value(i)),
            self.arch.head.pad,
        )?;
        let y = ops::sigmoid(&logits);
        rec("head", &y);
        Ok(y)
    }

    // ----- training path (records tape, returns pending BN updates) -----

    fn block_train(
        &self,
        b: &BlockRef,
        x: TensorBase<E>,
        updates: &mut Vec<BnUpdate<E>>,
    ) -> Result<(TensorBase<E>, BlockTape<E>)> {
        let eps = self.eps();
        let mut bn_fwd = |bn: &BnRef,
                          input: TensorBase<E>,
                          updates: &mut Vec<BnUpdate<E>>|
         -> Result<(TensorBase<E>, OpRecord<E>)> {
            let (gamma, beta) = self.bn_vecs(bn);
            let (y, stats) = ops::batchnorm_train(&input, &gamma, &beta, eps)?;
            updates.push(BnUpdate {
                rmean: bn.rmean,
                rvar: bn.rvar,
                stats: stats.clone(),
            });
            Ok((
                y,
                OpRecord::BatchNorm {
                    x: input,
                    gamma,
                    beta,
                    stats,
                    eps,
                },
            ))
        };

        let (h, conv1) =
            OpRecord::conv2d(x.clone(), self.store.value(b.conv1.w).clone(), None, b.conv1.pad)?;
        let (h, bn1) = bn_fwd(&b.bn1, h, updates)?;
        let (h, relu1) = OpRecord::relu(h);
        let (h, conv2) =
            OpRecord::conv2d(h, self.store.value(b.conv2.w).clone(), None, b.conv2.pad)?;
        let (h, bn2) = bn_fwd(&b.bn2, h, updates)?;
        let (s, shortcut) = match &b.shortcut {
            None => (x, None),
            Some((conv, bn)) => {
                let (s, conv_rec) =
                    OpRecord::conv2d(x, self.store.value(conv.w).clone(), None, conv.pad)?;
                let (s, bn_rec) = bn_fwd(bn, s, updates)?;
                (s, Some((conv_rec, bn_rec)))
            }
        };
        let (y, relu_out) = OpRecord::relu(h.add(&s)?);
        Ok((
            y,
            BlockTape {
                conv1,
                bn1,
                relu1,
                conv2,
                bn2,
                shortcut,
                relu_out,
            },
        ))
    }

    /// Train-mode forward: records the tape for [`Network::backward`] and,
    /// when `update_running` is set, folds batch statistics into the running
    /// statistics. Gradient checking passes `false` to keep state frozen.
    pub fn forward_train(
        &mut self,
        x: &TensorBase<E>,
        update_running: bool,
    ) -> Result<TensorBase<E>> {
        self.check_input(x, Mode::Train)?;
        let mut updates = Vec::new();

        let mut skips = Vec::with_capacity(3);
        let mut enc_tapes = Vec::with_capacity(3);
        let mut cur = x.clone();
        for block in &self.arch.enc {
            let (e, tape) = self.block_train(block, cur, &mut updates)?;
            let (p, pool_rec) = OpRecord::maxpool2x2(e.clone())?;
            skips.push(e);
            enc_tapes.push((tape, pool_rec));
            cur = p;
        }
        let (mut cur, bridge_tape) = self.block_train(&self.arch.bridge, cur, &mut updates)?;
        let mut dec_tapes = Vec::with_capacity(3);
        for (i, block) in self.arch.dec.iter().enumerate() {
            let (up, up_rec) = OpRecord::bilinear_upsample(cur, 2)?;
            let (block_in, split) = if self.config.decoder_skip_fusion {
                let skip = &skips[2 - i];
                let split = [up.shape()[1], skip.shape()[1]];
                (concat_channels(&[&up, skip])?, Some(split))
            } else {
                (up, None)
            };
            let (y, tape) = self.block_train(block, block_in, &mut updates)?;
            dec_tapes.push((up_rec, split, tape));
            cur = y;
        }
        let (s2u, head_up2) = OpRecord::bilinear_upsample(skips[1].clone(), 2)?;
        let (s3u, head_up4) = OpRecord::bilinear_upsample(skips[2].clone(), 4)?;
        let head_split = [
            skips[0].shape()[1],
            s2u.shape()[1],
            s3u.shape()[1],
            cur.shape()[1],
        ];
        let cat = concat_channels(&[&skips[0], &s2u, &s3u, &cur])?;
        let (logits, head_conv) = OpRecord::conv2d(
            cat,
            self.store.value(self.arch.head.w).clone(),
            self.arch.head.b.map(|i| self.store.value(i).clone()),
            self.arch.head.pad,
        )?;
        let (y, head_sig) = OpRecord::sigmoid(logits);

        if update_running {
            let momentum = E::from_f64(self.config.bn_momentum);
            for u in &updates {
                let mut rmean = self.store.value(u.rmean).clone();
                let mut rvar = self.store.value(u.rvar).clone();
                ops::batchnorm_update_running(
                    &u.stats,
                    rmean.data_mut(),
                    rvar.data_mut(),
                    momentum,
                );
                self.store.set_value(u.rmean, rmean)?;
                self.store.set_value(u.rvar, rvar)?;
            }
        }

        self.tape = Some(Tape {
            enc: enc_tapes,
            bridge: bridge_tape,
            dec: dec_tapes,
            head_up2,
            head_up4,
            head_split,
            head_conv,
            head_sig,
        });
        Ok(y)
    }

    /// Spec-level forward: train mode records the tape and updates BN running
    /// stats; infer mode touches no state.
    pub fn forward(&mut self, x: &TensorBase<E>, mode: Mode) -> Result<TensorBase<E>> {
        match mode {
            Mode::Train => self.forward_train(x, true),
            Mode::Infer => self.infer(x),
        }
    }

    fn block_backward(
        &mut self,
        bref: &BlockRef,
        tape: &BlockTape<E>,
        d_out: &TensorBase<E>,
    ) -> Result<TensorBase<E>> {
        let (d_sum, _) = tape.relu_out.backward(d_out)?;
        let d_shortcut_in = match (&bref.shortcut, &tape.shortcut) {
            (None, None) => d_sum.clone(),
            (Some((conv, bn)), Some((conv_rec, bn_rec))) => {
                let (d_s, bn_grads) = bn_rec.backward(&d_sum)?;
                self.store.accumulate_grad(bn.gamma, &bn_grads[0])?;
                self.store.accumulate_grad(bn.beta, &bn_grads[1])?;
                let (d_x, conv_grads) = conv_rec.backward(&d_s)?;
                self.store.accumulate_grad(conv.w, &conv_grads[0])?;
                d_x
            }
            _ => {
                return Err(Error::InvalidArgument(
                    "tape does not match block wiring".into(),
                ))
            }
        };
        let (d_h, bn2_grads) = tape.bn2.backward(&d_sum)?;
        self.store.accumulate_grad(bref.bn2.gamma, &bn2_grads[0])?;
        self.store.accumulate_grad(bref.bn2.beta, &bn2_grads[1])?;
        let (d_h, conv2_grads) = tape.conv2.backward(&d_h)?;
        self.store.accumulate_grad(bref.conv2.w, &conv2_grads[0])?;
        let (d_h, _) = tape.relu1.backward(&d_h)?;
        let (d_h, bn1_grads) = tape.bn1.backward(&d_h)?;
        self.store.accumulate_grad(bref.bn1.gamma, &bn1_grads[0])?;
        self.store.accumulate_grad(bref.bn1.beta, &bn1_grads[1])?;
        let (d_main_in, conv1_grads) = tape.conv1.backward(&d_h)?;
        self.store.accumulate_grad(bref.conv1.w, &conv1_grads[0])?;
        d_main_in.add(&d_shortcut_in)
    }

    /// Backpropagates the loss gradient through the tape recorded by the last
    /// train-mode forward, accumulating parameter gradients in the store.
    /// Returns the gradient with respect to the network input.
    pub fn backward(&mut self, loss_grad: &TensorBase<E>) -> Result<TensorBase<E>> {
        let tape = self.tape.take().ok_or_else(|| {
            Error::InvalidArgument("backward called without a recorded train-mode forward".into())
        })?;
        let (d_logits, _) = tape.head_sig.backward(loss_grad)?;
        let (d_cat, head_grads) = tape.head_conv.backward(&d_logits)?;
        self.store
            .accumulate_grad(self.arch.head.w, &head_grads[0])?;
        if let Some(b_idx) = self.arch.head.b {
            self.store.accumulate_grad(b_idx, &head_grads[1])?;
        }
        let mut parts = split_channels(&d_cat, &tape.head_split)?;
        let d_dec_out = parts.pop().expect("head split has 4 parts");
        let d_s3u = parts.pop().expect("head split has 4 parts");
        let d_s2u = parts.pop().expect("head split has 4 parts");
        let d_s1 = parts.pop().expect("head split has 4 parts");
        let (d_e2_skip, _) = tape.head_up2.backward(&d_s2u)?;
        let (d_e3_skip, _) = tape.head_up4.backward(&d_s3u)?;
        let mut d_skips = vec![d_s1, d_e2_skip, d_e3_skip];

        let arch_dec = self.arch.dec.clone();
        let mut d = d_dec_out;
        for (i, (up_rec, split, block_tape)) in tape.dec.iter().enumerate().rev() {
            let d_block_in = self.block_backward(&arch_dec[i], block_tape, &d)?;
            let d_up_out = match split {
                None => d_block_in,
                Some(split) => {
                    let mut halves = split_channels(&d_block_in, split)?;
                    let d_skip_extra = halves.pop().expect("fusion split has 2 parts");
                    let d_up = halves.pop().expect("fusion split has 2 parts");
                    d_skips[2 - i] = d_skips[2 - i].add(&d_skip_extra)?;
                    d_up
                }
            };
            let (d_prev, _) = up_rec.backward(&d_up_out)?;
            d = d_prev;
        }

        let arch_bridge = self.arch.bridge.clone();
        d = self.block_backward(&arch_bridge, &tape.bridge, &d)?;

        let arch_enc = self.arch.enc.clone();
        for (i, (block_tape, pool_rec)) in tape.enc.iter().enumerate().rev() {
            let (d_e, _) = pool_rec.backward(&d)?;
            let d_e = d_e.add(&d_skips[i])?;
            d = self.block_backward(&arch_enc[i], block_tape, &d_e)?;
        }
        Ok(d)
    }
}

#[cfg(test)]
mod tests;
