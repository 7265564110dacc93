//! Minibatch training loop for the decomposition model.
//!
//! One optimizer step per minibatch: every sample is pushed through the
//! extraction pathway, (in the richer modes) the complement pathway and the
//! auxiliary predictors, per-sample gradients are accumulated analytically
//! into per-network buffers, averaged over the batch, and applied with Adam.
//! The mode decides which networks participate: plain task training touches
//! only the extraction encoders and the main predictor, so the complement
//! pathway provably stays at its initialization.
//!
//! Determinism: given the same architecture seed, training seed and data,
//! the trained parameters are bitwise identical run to run. Shuffling draws
//! a fresh permutation per epoch from a seed-derived substream, and every
//! reduction runs in a fixed order. Logged wall-clock times are the one
//! intentionally nondeterministic field.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write as _};
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::diffcore::{
    adam_step, mlp_backward_acc, mlp_forward, AdamParams, MlpSpec, OptimState, ParamSet, TapeRecord,
};
use crate::error::{Error, Result};
use crate::model::{
    extract, init_model, predict_main, ArchConfig, DecompModel, Modality, NetworkId,
    Representations,
};
use crate::objectives::{
    assemble_total, loss_c, loss_c_grad_first, loss_p, loss_p_grad, LossBreakdown, LossConfig,
    Mode, ModalityTerms,
};
use crate::synthgen::MultimodalSample;

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Number of passes over the data; 0 is an explicit no-op.
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub mode: Mode,
    /// Emit a history record every this many optimizer steps.
    pub log_every: u64,
    pub shuffle: bool,
    pub loss: LossConfig,
}

impl TrainConfig {
    pub fn new(mode: Mode, seed: u64) -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 128,
            learning_rate: 1e-3,
            seed,
            mode,
            log_every: 50,
            shuffle: true,
            loss: LossConfig { mode, ..LossConfig::default() },
        }
    }

    pub fn validate(&self, n_samples: usize) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if self.batch_size > n_samples {
            return Err(Error::InvalidConfig(format!(
                "batch_size {} exceeds dataset size {n_samples}",
                self.batch_size
            )));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate {} must be > 0",
                self.learning_rate
            )));
        }
        if self.log_every == 0 {
            return Err(Error::InvalidConfig("log_every must be >= 1".into()));
        }
        self.loss.validate()
    }
}

/// One logged training step: batch-mean loss terms and batch accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub step: u64,
    pub epoch: usize,
    pub breakdown: LossBreakdown,
    /// Fraction of this batch classified correctly by the main predictor.
    pub train_accuracy: f64,
    /// Seconds since training started. Excluded from determinism
    /// comparisons.
    pub wall_clock_s: f64,
}

/// Training log: per-step records plus the seed material needed to replay
/// the exact shuffle order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub mode: Mode,
    /// Base of the per-epoch shuffle streams; epoch `e` shuffles with
    /// substream `e` of this seed.
    pub shuffle_base_seed: u64,
    pub records: Vec<LogRecord>,
}

impl TrainHistory {
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        {
            let file = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
            let mut w = BufWriter::new(file);
            serde_json::to_writer(&mut w, self).map_err(|e| Error::json(path, e))?;
            w.flush().map_err(|e| Error::io(&tmp, e))?;
        }
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<TrainHistory> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::json(path, e))
    }

    /// The deterministic portion of one record, for run-to-run comparisons.
    pub fn deterministic_view(&self) -> Vec<(u64, usize, LossBreakdown, f64)> {
        self.records
            .iter()
            .map(|r| (r.step, r.epoch, r.breakdown, r.train_accuracy))
            .collect()
    }
}

fn zero_terms() -> ModalityTerms {
    ModalityTerms {
        inv_r: 0.0,
        inv_cr: 0.0,
        inv_constr: 0.0,
        spec_r: 0.0,
        spec_cr: 0.0,
        spec_constr: 0.0,
    }
}

fn add_into(acc: &mut [f64], inc: &[f64]) {
    debug_assert_eq!(acc.len(), inc.len());
    for (a, b) in acc.iter_mut().zip(inc) {
        *a += b;
    }
}

/// Networks that receive gradients under `mode`.
fn active_networks(mode: Mode) -> Vec<NetworkId> {
    match mode {
        Mode::Net => vec![
            NetworkId::EncInv,
            NetworkId::EncSpec(Modality::M1),
            NetworkId::EncSpec(Modality::M2),
            NetworkId::PredMain,
        ],
        Mode::MpnsMinusC | Mode::Mpns => NetworkId::ALL.to_vec(),
    }
}

/// Forward + analytic backward for one sample. Parameter gradients are
/// accumulated (unscaled) into `grads`, indexed by [`NetworkId::storage_slot`].
/// Returns the sample's loss breakdown and main prediction.
fn process_sample(
    model: &DecompModel,
    specs: &[MlpSpec],
    sample: &MultimodalSample,
    mode: Mode,
    lcfg: &LossConfig,
    grads: &mut [ParamSet],
) -> Result<(LossBreakdown, f64)> {
    let arch = model.arch();
    let (dzi, dzs) = (arch.d_zi, arch.d_zs);
    let y = sample.label();
    let xs: [&[f64]; 2] = [&sample.x1, &sample.x2];
    let theta = lcfg.theta;

    let fwd = |id: NetworkId, x: &[f64]| -> Result<(Vec<f64>, TapeRecord)> {
        mlp_forward(&specs[id.storage_slot()], model.net(id), x)
    };

    // ---- Extraction pathway forwards -------------------------------------
    let mut r_i: Vec<Vec<f64>> = Vec::with_capacity(2);
    let mut t_ri: Vec<TapeRecord> = Vec::with_capacity(2);
    let mut r_s: Vec<Vec<f64>> = Vec::with_capacity(2);
    let mut t_rs: Vec<TapeRecord> = Vec::with_capacity(2);
    for (&x, &modality) in xs.iter().zip(&Modality::BOTH) {
        let (o, t) = fwd(NetworkId::EncInv, x)?;
        r_i.push(o);
        t_ri.push(t);
        let (o, t) = fwd(NetworkId::EncSpec(modality), x)?;
        r_s.push(o);
        t_rs.push(t);
    }

    let mut z = Vec::with_capacity(arch.main_input_dim());
    z.extend_from_slice(&r_i[0]);
    z.extend_from_slice(&r_i[1]);
    z.extend_from_slice(&r_s[0]);
    z.extend_from_slice(&r_s[1]);
    let (p_main_out, t_main) = fwd(NetworkId::PredMain, &z)?;
    let p_main = p_main_out[0];
    let task = loss_p(y, p_main)?;

    let mut modalities = [zero_terms(); 2];

    // ---- Complement pathway + auxiliary forwards (richer modes only) -----
    let mut c_i: Vec<Vec<f64>> = Vec::new();
    let mut t_ci: Vec<TapeRecord> = Vec::new();
    let mut c_s: Vec<Vec<f64>> = Vec::new();
    let mut t_cs: Vec<TapeRecord> = Vec::new();
    // Aux predictor outputs and tapes, per modality.
    let mut q = [0.0f64; 2]; // invariant predictor on representation
    let mut qc = [0.0f64; 2]; // invariant predictor on complement
    let mut u = [0.0f64; 2]; // specific predictor on representation
    let mut uc = [0.0f64; 2]; // specific predictor on complement
    let mut w = [0.0f64; 2]; // specific predictor on cross complement
    let mut t_q: Vec<TapeRecord> = Vec::new();
    let mut t_qc: Vec<TapeRecord> = Vec::new();
    let mut t_u: Vec<TapeRecord> = Vec::new();
    let mut t_uc: Vec<TapeRecord> = Vec::new();
    let mut t_w: Vec<TapeRecord> = Vec::new();

    if mode.uses_pns_terms() {
        for (&x, &modality) in xs.iter().zip(&Modality::BOTH) {
            let (o, t) = fwd(NetworkId::CompInv, x)?;
            c_i.push(o);
            t_ci.push(t);
            let (o, t) = fwd(NetworkId::CompSpec(modality), x)?;
            c_s.push(o);
            t_cs.push(t);
        }
        for m in 0..2 {
            let inv_id = NetworkId::PredInv(Modality::BOTH[m]);
            let spec_id = NetworkId::PredSpec(Modality::BOTH[m]);
            let (o, t) = fwd(inv_id, &r_i[m])?;
            q[m] = o[0];
            t_q.push(t);
            let (o, t) = fwd(inv_id, &c_i[m])?;
            qc[m] = o[0];
            t_qc.push(t);
            let (o, t) = fwd(spec_id, &r_s[m])?;
            u[m] = o[0];
            t_u.push(t);
            let (o, t) = fwd(spec_id, &c_s[m])?;
            uc[m] = o[0];
            t_uc.push(t);
        }
        if mode.uses_constraints() {
            for m in 0..2 {
                let spec_id = NetworkId::PredSpec(Modality::BOTH[m]);
                let (o, t) = fwd(spec_id, &c_s[1 - m])?;
                w[m] = o[0];
                t_w.push(t);
            }
        }
        for m in 0..2 {
            let inv_r = loss_p(y, q[m])?;
            let inv_cr = loss_c(y, qc[m], theta)?;
            let spec_r = loss_p(y, u[m])?;
            let spec_cr = loss_c(y, uc[m], theta)?;
            let (inv_constr, spec_constr) = if mode.uses_constraints() {
                (inv_r * inv_cr, loss_c(u[m], w[m], theta)?)
            } else {
                (0.0, 0.0)
            };
            modalities[m] = ModalityTerms { inv_r, inv_cr, inv_constr, spec_r, spec_cr, spec_constr };
        }
    }

    let total = assemble_total(mode, task, &modalities, lcfg);
    let breakdown = LossBreakdown { task, modalities, total };
    if !total.is_finite() {
        return Err(Error::NonFiniteLoss {
            step: 0, // caller rewrites with the true step
            detail: format!(
                "task={task} m1={:?} m2={:?} total={total}",
                breakdown.modalities[0], breakdown.modalities[1]
            ),
        });
    }

    // ---- Backward ---------------------------------------------------------
    let bwd = |id: NetworkId, tape: &TapeRecord, og: &[f64], grads: &mut [ParamSet]| -> Result<Vec<f64>> {
        mlp_backward_acc(
            &specs[id.storage_slot()],
            model.net(id),
            tape,
            og,
            &mut grads[id.storage_slot()],
        )
    };

    // Task loss through the main predictor; its input gradient seeds the
    // four representation gradients.
    let d_task = loss_p_grad(y, p_main)?;
    let dz = bwd(NetworkId::PredMain, &t_main, &[d_task], grads)?;
    let mut g_ri: [Vec<f64>; 2] = [dz[..dzi].to_vec(), dz[dzi..2 * dzi].to_vec()];
    let mut g_rs: [Vec<f64>; 2] = [
        dz[2 * dzi..2 * dzi + dzs].to_vec(),
        dz[2 * dzi + dzs..].to_vec(),
    ];

    if mode.uses_pns_terms() {
        let mut g_ci: [Vec<f64>; 2] = [vec![0.0; dzi], vec![0.0; dzi]];
        let mut g_cs: [Vec<f64>; 2] = [vec![0.0; dzs], vec![0.0; dzs]];
        let constraints = mode.uses_constraints();

        for m in 0..2 {
            let inv_id = NetworkId::PredInv(Modality::BOTH[m]);
            let spec_id = NetworkId::PredSpec(Modality::BOTH[m]);
            let t = &modalities[m];

            // d/dq: the label-alignment term, plus the product constraint
            // where the other factor is held as a coefficient.
            let mut dq = lcfg.lambda_r * loss_p_grad(y, q[m])?;
            if constraints {
                dq += lcfg.lambda_constr * t.inv_cr * loss_p_grad(y, q[m])?;
            }
            let gin = bwd(inv_id, &t_q[m], &[dq], grads)?;
            add_into(&mut g_ri[m], &gin);

            // d/dq̄: proximity penalty toward the label, plus the product
            // constraint with the alignment factor as coefficient.
            let mut dqc = lcfg.lambda_cr * loss_c_grad_first(qc[m], y, theta)?;
            if constraints {
                dqc += lcfg.lambda_constr * t.inv_r * loss_c_grad_first(qc[m], y, theta)?;
            }
            let gin = bwd(inv_id, &t_qc[m], &[dqc], grads)?;
            add_into(&mut g_ci[m], &gin);

            // d/du: label alignment plus the cross-modal agreement penalty.
            let mut du = lcfg.lambda_r * loss_p_grad(y, u[m])?;
            if constraints {
                du += lcfg.lambda_constr * loss_c_grad_first(u[m], w[m], theta)?;
            }
            let gin = bwd(spec_id, &t_u[m], &[du], grads)?;
            add_into(&mut g_rs[m], &gin);

            // d/dū: proximity penalty toward the label.
            let duc = lcfg.lambda_cr * loss_c_grad_first(uc[m], y, theta)?;
            let gin = bwd(spec_id, &t_uc[m], &[duc], grads)?;
            add_into(&mut g_cs[m], &gin);

            // d/dw: the cross term's other side; its input gradient lands
            // on the *other* modality's specific complement.
            if constraints {
                let dw = lcfg.lambda_constr * loss_c_grad_first(w[m], u[m], theta)?;
                let gin = bwd(spec_id, &t_w[m], &[dw], grads)?;
                add_into(&mut g_cs[1 - m], &gin);
            }
        }

        for m in 0..2 {
            bwd(NetworkId::CompInv, &t_ci[m], &g_ci[m], grads)?;
            bwd(NetworkId::CompSpec(Modality::BOTH[m]), &t_cs[m], &g_cs[m], grads)?;
        }
    }

    for m in 0..2 {
        bwd(NetworkId::EncInv, &t_ri[m], &g_ri[m], grads)?;
        bwd(NetworkId::EncSpec(Modality::BOTH[m]), &t_rs[m], &g_rs[m], grads)?;
    }

    Ok((breakdown, p_main))
}

fn accumulate_breakdown(acc: &mut LossBreakdown, b: &LossBreakdown) {
    acc.task += b.task;
    acc.total += b.total;
    for m in 0..2 {
        let a = &mut acc.modalities[m];
        let t = &b.modalities[m];
        a.inv_r += t.inv_r;
        a.inv_cr += t.inv_cr;
        a.inv_constr += t.inv_constr;
        a.spec_r += t.spec_r;
        a.spec_cr += t.spec_cr;
        a.spec_constr += t.spec_constr;
    }
}

fn scale_breakdown(acc: &mut LossBreakdown, c: f64) {
    acc.task *= c;
    acc.total *= c;
    for t in &mut acc.modalities {
        t.inv_r *= c;
        t.inv_cr *= c;
        t.inv_constr *= c;
        t.spec_r *= c;
        t.spec_cr *= c;
        t.spec_constr *= c;
    }
}

/// Trains `model` on `data` per `cfg`, returning the trained model and the
/// training log. `cfg.mode` selects the objective.
pub fn train(
    model: DecompModel,
    data: &[MultimodalSample],
    cfg: &TrainConfig,
) -> Result<(DecompModel, TrainHistory)> {
    cfg.validate(data.len())?;
    let mut model = model;
    let shuffle_base = crate::seeds::mix(cfg.seed, crate::seeds::domain::SHUFFLE);
    let mut history = TrainHistory {
        mode: cfg.mode,
        shuffle_base_seed: shuffle_base,
        records: Vec::new(),
    };
    if cfg.epochs == 0 {
        return Ok((model, history));
    }

    let specs: Vec<MlpSpec> = NetworkId::ALL.iter().map(|id| model.spec(*id)).collect();
    let active = active_networks(cfg.mode);
    let hyper = AdamParams { lr: cfg.learning_rate, ..AdamParams::default() };
    let mut grads: Vec<ParamSet> = specs.iter().map(ParamSet::zeros).collect();
    let mut optim: Vec<OptimState> = specs
        .iter()
        .map(|s| OptimState::new(s, hyper))
        .collect::<Result<_>>()?;

    let mut indices: Vec<usize> = (0..data.len()).collect();
    let started = Instant::now();
    let mut step: u64 = 0;

    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            let mut rng = crate::seeds::stream_rng(shuffle_base, epoch as u64);
            indices.shuffle(&mut rng);
        }
        for batch in indices.chunks(cfg.batch_size) {
            step += 1;
            for id in &active {
                grads[id.storage_slot()].reset_zero();
            }
            let mut batch_breakdown = LossBreakdown {
                task: 0.0,
                modalities: [zero_terms(); 2],
                total: 0.0,
            };
            let mut correct = 0usize;
            for &idx in batch {
                let sample = &data[idx];
                let (breakdown, p_main) =
                    process_sample(&model, &specs, sample, cfg.mode, &cfg.loss, &mut grads)
                        .map_err(|e| match e {
                            Error::NonFiniteLoss { detail, .. } => {
                                Error::NonFiniteLoss { step, detail }
                            }
                            other => other,
                        })?;
                accumulate_breakdown(&mut batch_breakdown, &breakdown);
                if (p_main >= 0.5) == (sample.y == 1) {
                    correct += 1;
                }
            }
            let inv_b = 1.0 / batch.len() as f64;
            scale_breakdown(&mut batch_breakdown, inv_b);
            for id in &active {
                let slot = id.storage_slot();
                grads[slot].scale(inv_b);
                adam_step(model.net_mut(*id), &grads[slot], &mut optim[slot])?;
            }
            if step.is_multiple_of(cfg.log_every) || step == 1 {
                history.records.push(LogRecord {
                    step,
                    epoch,
                    breakdown: batch_breakdown,
                    train_accuracy: correct as f64 / batch.len() as f64,
                    wall_clock_s: started.elapsed().as_secs_f64(),
                });
            }
        }
    }
    Ok((model, history))
}

/// Main-predictor probability for one sample's views (no complement work).
pub fn predict_probability(model: &DecompModel, x1: &[f64], x2: &[f64]) -> Result<f64> {
    let (ri1, rs1) = extract(model, x1, Modality::M1)?;
    let (ri2, rs2) = extract(model, x2, Modality::M2)?;
    let reps = Representations {
        r_i: [ri1, ri2],
        r_s: [rs1, rs2],
        c_i: [Vec::new(), Vec::new()],
        c_s: [Vec::new(), Vec::new()],
    };
    predict_main(model, &reps)
}

/// Fraction of samples whose thresholded main prediction (`ŷ ≥ 0.5` reads
/// as class 1) matches the label.
pub fn evaluate_accuracy(model: &DecompModel, data: &[MultimodalSample]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyInput("evaluation set is empty".into()));
    }
    let mut correct = 0usize;
    for sample in data {
        let p = predict_probability(model, &sample.x1, &sample.x2)?;
        if (p >= 0.5) == (sample.y == 1) {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Outcome of one (mode, dataset) training run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub model: DecompModel,
    pub history: TrainHistory,
    pub eval_accuracy: f64,
}

/// Initializes a model from `cfg.seed`, trains it on `train_data` with
/// `mode`, and evaluates on `eval_data`. Because initialization depends only
/// on the seed, different modes run from identical starting parameters and
/// the comparison isolates the objective.
pub fn run_mode(
    mode: Mode,
    arch: &ArchConfig,
    train_data: &[MultimodalSample],
    eval_data: &[MultimodalSample],
    cfg: &TrainConfig,
) -> Result<RunOutcome> {
    let mut cfg = cfg.clone();
    cfg.mode = mode;
    cfg.loss.mode = mode;
    let model = init_model(arch, cfg.seed)?;
    let (model, history) = train(model, train_data, &cfg)?;
    let eval_accuracy = evaluate_accuracy(&model, eval_data)?;
    Ok(RunOutcome { model, history, eval_accuracy })
}
