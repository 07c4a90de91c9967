//! Full-batch training of a FERNN model: quantized forward pass, mean
//! absolute error at the last step, straight-through backward pass, Adam.

mod adam;
mod mcr;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::ParamId;
use crate::data::{reverse, DataError, Dataset, LabelKind};
use crate::fernn::{extract_nnf, Cell, FernnError, Head, ModelSpec, ModelTape, Normalization};
use crate::stl::{format_with_features, StlError};

pub use adam::{adam_step, AdamState, BETA1, BETA2, EPSILON};
pub use mcr::{evaluate_mcr, mcr_from_scores, Classifier, Unquantized};

/// Learning-rate halving on loss plateaus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    /// reductions before the next plateau stops training
    pub reductions: usize,
    pub factor: f64,
}

impl Default for Plateau {
    fn default() -> Self {
        Plateau {
            reductions: 5,
            factor: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub max_epochs: usize,
    /// stop once the best loss has not improved for `patience` epochs
    pub early_stop: bool,
    pub patience: usize,
    /// when set, a plateau halves the learning rate instead of stopping
    pub plateau: Option<Plateau>,
    /// fraction of traces used for training
    pub split: f64,
    pub seed: u64,
    /// `None` trains full-batch
    pub batch_size: Option<usize>,
    pub normalize: bool,
    pub reverse_traces: bool,
    /// also train a copy with real-valued choice weights
    pub compare_unquantized: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.003,
            max_epochs: 5000,
            early_stop: true,
            patience: 50,
            plateau: None,
            split: 0.8,
            seed: 0,
            batch_size: None,
            normalize: true,
            reverse_traces: false,
            compare_unquantized: false,
        }
    }
}

impl TrainConfig {
    /// Schedule for up-to-length models: lower learning rate, plateau halving.
    pub fn up_to_length() -> Self {
        TrainConfig {
            lr: 0.001,
            plateau: Some(Plateau::default()),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.into()));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return bad("split must be in (0, 1)");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1");
        }
        if self.batch_size == Some(0) {
            return bad("batch size must be at least 1");
        }
        if let Some(p) = self.plateau {
            if !(p.factor > 0.0 && p.factor < 1.0) {
                return bad("plateau factor must be in (0, 1)");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McrPair {
    pub train_mcr: f64,
    pub test_mcr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// extracted formula with negations pushed to the atoms
    pub formula: String,
    pub formula_length: usize,
    /// `"past"`, or `"future"` when trained on reversed traces (the formula
    /// then reads forward from time 0 of the original traces)
    pub time_direction: String,
    pub train_mcr: f64,
    pub test_mcr: f64,
    /// MCR of the copy trained with real-valued choice weights
    pub unquantized: Option<McrPair>,
    pub losses: Vec<f64>,
    pub epochs: usize,
    pub best_epoch: usize,
    pub best_loss: f64,
    pub lr_reductions: usize,
    pub final_lr: f64,
    pub skipped_gradients: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub label_kind: LabelKind,
    pub choice_blocks: usize,
    pub wall_time_s: f64,
    pub config: TrainConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] FernnError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Stl(#[from] StlError),
}

/// Result of one optimization run, before reporting.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub losses: Vec<f64>,
    pub best_epoch: usize,
    pub best_loss: f64,
    pub lr_reductions: usize,
    pub final_lr: f64,
    pub skipped_gradients: usize,
    pub optimizer: AdamState,
}

/// Trains `m` on `ds` and reports on a held-out split.
///
/// The model is left holding the best parameters seen (lowest training
/// loss) and the normalization fitted on the training split.
pub fn fit(m: &mut ModelSpec, ds: &Dataset, cfg: &TrainConfig) -> Result<TrainReport, TrainError> {
    let start = Instant::now();
    cfg.validate()?;
    if ds.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    ds.validate()?;
    if ds.dim() != m.dim {
        return Err(FernnError::DimensionMismatch {
            expected: m.dim,
            found: ds.dim(),
        }
        .into());
    }
    if ds.label_kind == LabelKind::Continuous && m.head == Head::Tanh {
        return Err(TrainError::Config("continuous labels need the identity head".into()));
    }
    let data = if cfg.reverse_traces { reverse(ds) } else { ds.clone() };
    let (train, test) = data.split(cfg.split, cfg.seed)?;
    m.normalization = cfg.normalize.then(|| Normalization::fit(&train.traces, m.dim));
    let initial = m.clone();

    let traj = optimize(m, &train, cfg, true)?;
    let train_mcr = evaluate_mcr(&*m, &train)?;
    let test_mcr = if test.is_empty() { train_mcr } else { evaluate_mcr(&*m, &test)? };

    let unquantized = if cfg.compare_unquantized {
        let mut u = initial;
        optimize(&mut u, &train, cfg, false)?;
        let tr = evaluate_mcr(&Unquantized(&u), &train)?;
        let te = if test.is_empty() { tr } else { evaluate_mcr(&Unquantized(&u), &test)? };
        Some(McrPair {
            train_mcr: tr,
            test_mcr: te,
        })
    } else {
        None
    };

    let formula = extract_nnf(m)?;
    Ok(TrainReport {
        formula: format_with_features(&formula, &ds.feature_names),
        formula_length: formula.length(),
        time_direction: if cfg.reverse_traces { "future" } else { "past" }.into(),
        train_mcr,
        test_mcr,
        unquantized,
        epochs: traj.losses.len(),
        losses: traj.losses,
        best_epoch: traj.best_epoch,
        best_loss: traj.best_loss,
        lr_reductions: traj.lr_reductions,
        final_lr: traj.final_lr,
        skipped_gradients: traj.skipped_gradients,
        n_train: train.len(),
        n_test: test.len(),
        label_kind: ds.label_kind,
        choice_blocks: m.choice_blocks(),
        wall_time_s: start.elapsed().as_secs_f64(),
        config: cfg.clone(),
    })
}

/// Interval cells with the parameter slot of their shift.
fn shift_slots(m: &ModelSpec) -> Vec<(usize, ParamId)> {
    m.cells
        .iter()
        .enumerate()
        .filter_map(|(i, c)| match c {
            Cell::Interval { shift, .. } => Some((i, *shift)),
            _ => None,
        })
        .collect()
}

/// Sets each interval shift to `1 - min` of the cell's input over the
/// training traces as of the last forward pass, so shifted inputs are >= 1.
fn update_shifts(tapes: &[ModelTape], slots: &[(usize, ParamId)], params: &mut [f64]) {
    for (cell, slot) in slots {
        let mut lo = f64::INFINITY;
        for mt in tapes {
            for (c, nodes) in &mt.window_inputs {
                if c == cell {
                    lo = nodes.iter().fold(lo, |acc, n| acc.min(mt.tape.value(*n)));
                }
            }
        }
        if lo.is_finite() {
            params[slot.index()] = 1.0 - lo;
        }
    }
}

/// Loss sum and gradient sum (of `loss / denom`) over the selected traces.
fn loss_and_grad(
    tapes: &mut [ModelTape],
    labels: &[f64],
    params: &[f64],
    select: Option<&[usize]>,
    denom: f64,
) -> Result<(f64, Vec<f64>), TrainError> {
    let np = params.len();
    let one = |mt: &mut ModelTape, y: f64| -> Result<(f64, Vec<f64>), TrainError> {
        mt.tape.set_params(params);
        let err = mt.forward() - y;
        let seed = if err > 0.0 {
            1.0
        } else if err < 0.0 {
            -1.0
        } else {
            0.0
        };
        let mut g = vec![0.0; np];
        if seed != 0.0 {
            mt.tape.backward_into(mt.output, seed / denom, &mut g).map_err(FernnError::from)?;
        }
        Ok((err.abs(), g))
    };
    let parts: Vec<(f64, Vec<f64>)> = match select {
        None => tapes
            .par_iter_mut()
            .zip(labels.par_iter())
            .map(|(mt, y)| one(mt, *y))
            .collect::<Result<_, _>>()?,
        Some(idx) => {
            let mut chosen: Vec<(usize, &mut ModelTape)> = tapes
                .iter_mut()
                .enumerate()
                .filter(|(i, _)| idx.binary_search(i).is_ok())
                .collect();
            chosen
                .par_iter_mut()
                .map(|(i, mt)| one(mt, labels[*i]))
                .collect::<Result<_, _>>()?
        }
    };
    // fixed-order reduction keeps results independent of thread scheduling
    let mut loss = 0.0;
    let mut grad = vec![0.0; np];
    for (l, g) in &parts {
        loss += l;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    Ok((loss, grad))
}

/// Runs the optimizer on `m` over every trace of `train`, leaving the
/// lowest-loss parameters in `m`. `quantized = false` trains with the
/// real-valued choice weights in the forward pass.
pub fn optimize(m: &mut ModelSpec, train: &Dataset, cfg: &TrainConfig, quantized: bool) -> Result<Trajectory, TrainError> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    m.validate()?;
    let mut tapes: Vec<ModelTape> = train
        .traces
        .par_iter()
        .map(|t| ModelTape::build(m, t))
        .collect::<Result<_, _>>()?;
    for mt in &mut tapes {
        mt.tape.set_quantized(quantized);
    }
    let labels: Vec<f64> = train.traces.iter().map(|t| t.label).collect();
    let n = tapes.len();
    let trainable = m.params.trainable_mask().to_vec();
    let slots = shift_slots(m);
    let mut params = m.params.values().to_vec();
    if !slots.is_empty() {
        tapes.par_iter_mut().for_each(|mt| {
            mt.tape.set_params(&params);
            mt.tape.forward();
        });
        update_shifts(&tapes, &slots, &mut params);
    }

    let mut state = AdamState::new(params.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_ba7c);
    let mut order: Vec<usize> = (0..n).collect();
    let mut lr = cfg.lr;
    let mut losses = Vec::new();
    let (mut best_loss, mut best_epoch, mut best_params) = (f64::INFINITY, 0, params.clone());
    let (mut stale, mut reductions, mut skipped) = (0, 0, 0);

    let mask = |g: &mut [f64]| {
        for (gi, t) in g.iter_mut().zip(&trainable) {
            if !t {
                *gi = 0.0;
            }
        }
    };

    for epoch in 0..cfg.max_epochs {
        let (loss_sum, mut grad) = loss_and_grad(&mut tapes, &labels, &params, None, n as f64)?;
        let loss = loss_sum / n as f64;
        losses.push(loss);
        if loss < best_loss {
            best_loss = loss;
            best_epoch = epoch;
            best_params.copy_from_slice(&params);
            stale = 0;
        } else {
            stale += 1;
        }
        if stale >= cfg.patience {
            match cfg.plateau {
                Some(p) if reductions < p.reductions => {
                    lr *= p.factor;
                    reductions += 1;
                    stale = 0;
                }
                Some(_) => break,
                None if cfg.early_stop => break,
                None => {}
            }
        }
        if epoch + 1 == cfg.max_epochs {
            break;
        }

        // the shift for the next epoch comes from this epoch's forward pass
        update_shifts(&tapes, &slots, &mut params);
        match cfg.batch_size {
            Some(b) if b < n => {
                order.shuffle(&mut rng);
                for chunk in order.chunks(b) {
                    let mut idx = chunk.to_vec();
                    idx.sort_unstable();
                    let (_, mut g) = loss_and_grad(&mut tapes, &labels, &params, Some(&idx), idx.len() as f64)?;
                    mask(&mut g);
                    skipped += adam_step(&mut params, &g, &mut state, lr);
                }
            }
            _ => {
                mask(&mut grad);
                skipped += adam_step(&mut params, &grad, &mut state, lr);
            }
        }
    }

    m.params.values_mut().copy_from_slice(&best_params);
    Ok(Trajectory {
        losses,
        best_epoch,
        best_loss,
        lr_reductions: reductions,
        final_lr: lr,
        skipped_gradients: skipped,
        optimizer: state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_step_threshold, StepThresholdParams};
    use crate::fernn::{build_fixed_length, BuildOptions};

    fn small() -> Dataset {
        gen_step_threshold(
            &StepThresholdParams {
                n: 20,
                len: 5,
                ..Default::default()
            },
            0,
        )
        .unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig { lr: 0.0, ..Default::default() },
            TrainConfig { split: 1.0, ..Default::default() },
            TrainConfig { patience: 0, ..Default::default() },
        ] {
            assert!(matches!(bad.validate(), Err(TrainError::Config(_))));
        }
    }

    #[test]
    fn loss_curve_matches_epochs() {
        let ds = small();
        let mut m = build_fixed_length(2, 1, &BuildOptions::default()).unwrap();
        let cfg = TrainConfig {
            max_epochs: 40,
            ..Default::default()
        };
        let r = fit(&mut m, &ds, &cfg).unwrap();
        assert_eq!(r.losses.len(), r.epochs);
        assert!(r.epochs <= 40);
        assert!((0.0..=1.0).contains(&r.train_mcr));
        assert_eq!(r.best_loss, r.losses[r.best_epoch]);
        assert_eq!(r.n_train + r.n_test, 20);
    }

    #[test]
    fn continuous_labels_need_identity_head() {
        let mut ds = small();
        ds.traces[0].label = 0.3;
        ds.label_kind = LabelKind::Continuous;
        let mut m = build_fixed_length(2, 1, &BuildOptions::default()).unwrap();
        assert!(matches!(fit(&mut m, &ds, &TrainConfig::default()), Err(TrainError::Config(_))));
    }

    #[test]
    fn minibatch_runs_and_is_seeded() {
        let ds = small();
        let cfg = TrainConfig {
            max_epochs: 20,
            batch_size: Some(4),
            ..Default::default()
        };
        let mut a = build_fixed_length(2, 1, &BuildOptions::default()).unwrap();
        let mut b = a.clone();
        let ra = fit(&mut a, &ds, &cfg).unwrap();
        let rb = fit(&mut b, &ds, &cfg).unwrap();
        assert_eq!(ra.losses, rb.losses);
        assert_eq!(a, b);
    }
}
