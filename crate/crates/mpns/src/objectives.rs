//! Training objectives for the decomposition model.
//!
//! Two base losses: binary cross entropy `loss_p` pulls a prediction toward
//! the label, and the inverse-distance score `loss_c = 1/(θ + |y − ŷ|)`
//! *penalizes* proximity — it is large when its arguments agree. The
//! representation-side terms combine them: each representation's predictor
//! should match the label (`*_r` terms), the same predictor fed the
//! complement representation should be far from the label (`*_cr` terms),
//! and two product/cross constraints keep the decomposition from collapsing
//! into trivial solutions (`*_constr` terms). Three training modes select
//! which terms are active.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{predict_aux, AuxHead, DecompModel, Modality};

/// Prediction clamp used by the probability losses, matching the sigmoid
/// head's clamp.
use crate::diffcore::SIGMOID_CLAMP;

/// Which objective family to train with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Task loss only: plain supervised training of the main predictor.
    Net,
    /// Task loss plus the representation/complement alignment terms, but
    /// without the constraint products.
    MpnsMinusC,
    /// The full objective: everything in [`Mode::MpnsMinusC`] plus the
    /// monotonicity and cross-modal constraint terms.
    Mpns,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Net, Mode::MpnsMinusC, Mode::Mpns];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Net => "net",
            Mode::MpnsMinusC => "mpns_minus_c",
            Mode::Mpns => "mpns",
        }
    }

    /// True when the alignment terms (`*_r`, `*_cr`) are active.
    pub fn uses_pns_terms(self) -> bool {
        !matches!(self, Mode::Net)
    }

    /// True when the constraint terms (`*_constr`) are active.
    pub fn uses_constraints(self) -> bool {
        matches!(self, Mode::Mpns)
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Mode> {
        match s {
            "net" => Ok(Mode::Net),
            "mpns_minus_c" => Ok(Mode::MpnsMinusC),
            "mpns" => Ok(Mode::Mpns),
            other => Err(Error::InvalidConfig(format!(
                "unknown mode '{other}' (expected net, mpns_minus_c or mpns)"
            ))),
        }
    }
}

/// Weights and stabilizers for the objective family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Stabilizer in `loss_c`'s denominator; keeps the score finite at
    /// exact agreement.
    pub theta: f64,
    /// Weight on the `*_r` terms.
    pub lambda_r: f64,
    /// Weight on the `*_cr` terms.
    pub lambda_cr: f64,
    /// Weight on the `*_constr` terms.
    pub lambda_constr: f64,
    /// Default mode for consumers that don't pass one explicitly.
    pub mode: Mode,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            theta: 0.01,
            lambda_r: 1.0,
            lambda_cr: 1.0,
            lambda_constr: 1.0,
            mode: Mode::Mpns,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta.is_finite() && self.theta > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "theta = {} must be finite and > 0",
                self.theta
            )));
        }
        for (name, l) in [
            ("lambda_r", self.lambda_r),
            ("lambda_cr", self.lambda_cr),
            ("lambda_constr", self.lambda_constr),
        ] {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} = {l} must be finite and >= 0"
                )));
            }
        }
        Ok(())
    }
}

fn check_label(y: f64) -> Result<()> {
    if !(y == 0.0 || y == 1.0) {
        return Err(Error::InvalidConfig(format!("label {y} must be exactly 0 or 1")));
    }
    Ok(())
}

fn check_probability(y_hat: f64) -> Result<f64> {
    if !y_hat.is_finite() || y_hat <= 0.0 || y_hat >= 1.0 {
        return Err(Error::InvalidConfig(format!(
            "predicted probability {y_hat} must lie strictly inside (0, 1)"
        )));
    }
    Ok(y_hat.clamp(SIGMOID_CLAMP, 1.0 - SIGMOID_CLAMP))
}

/// Binary cross entropy `−[y·ln ŷ + (1−y)·ln(1−ŷ)]` with the prediction
/// clamped into `[1e-7, 1 − 1e-7]`.
pub fn loss_p(y: f64, y_hat: f64) -> Result<f64> {
    check_label(y)?;
    let p = check_probability(y_hat)?;
    Ok(-(y * p.ln() + (1.0 - y) * (1.0 - p).ln()))
}

/// Derivative of [`loss_p`] with respect to the prediction, evaluated at
/// the clamped value: `−y/ŷ + (1−y)/(1−ŷ)`.
pub fn loss_p_grad(y: f64, y_hat: f64) -> Result<f64> {
    check_label(y)?;
    let p = check_probability(y_hat)?;
    Ok(-y / p + (1.0 - y) / (1.0 - p))
}

/// Inverse-distance score `1/(θ + |y − ŷ|)`: maximal (`1/θ`) at agreement,
/// strictly decreasing as the arguments separate. Used as a *proximity
/// penalty*: minimizing it pushes `ŷ` away from `y`.
pub fn loss_c(y: f64, y_hat: f64, theta: f64) -> Result<f64> {
    if !(theta.is_finite() && theta > 0.0) {
        return Err(Error::InvalidConfig(format!("theta = {theta} must be > 0")));
    }
    if !y.is_finite() || !y_hat.is_finite() {
        return Err(Error::NonFinite("loss_c inputs".into()));
    }
    Ok(1.0 / (theta + (y - y_hat).abs()))
}

/// Derivative of [`loss_c`]`(a, b, theta)` with respect to its *first*
/// argument: `−sign(a − b)/(θ + |a − b|)²`. By symmetry the derivative in
/// the second argument is `loss_c_grad_first(b, a, theta)`. At `a == b`
/// the (sub)gradient is taken as 0.
pub fn loss_c_grad_first(a: f64, b: f64, theta: f64) -> Result<f64> {
    let value = loss_c(a, b, theta)?;
    let sign = if a > b {
        1.0
    } else if a < b {
        -1.0
    } else {
        0.0
    };
    Ok(-sign * value * value)
}

/// One representation family's loss terms (`r` on the representation, `cr`
/// on its complement, `constr` the associated constraint term).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PnsTerms {
    pub r: f64,
    pub cr: f64,
    pub constr: f64,
}

/// Invariant-representation terms for one modality:
/// `r = loss_p(y, F(R))`, `cr = loss_c(y, F(C))`, `constr = r · cr`,
/// where `F` is that modality's invariant auxiliary predictor (one network
/// for both the representation and its complement).
pub fn invariant_pns_loss(
    modality: Modality,
    y: f64,
    r_inv: &[f64],
    c_inv: &[f64],
    model: &DecompModel,
    cfg: &LossConfig,
) -> Result<PnsTerms> {
    cfg.validate()?;
    let head = AuxHead::Invariant(modality);
    let on_rep = predict_aux(model, head, r_inv)?;
    let on_comp = predict_aux(model, head, c_inv)?;
    invariant_terms_from_predictions(y, on_rep, on_comp, cfg)
}

/// [`invariant_pns_loss`] on already-computed predictor outputs.
pub fn invariant_terms_from_predictions(
    y: f64,
    on_rep: f64,
    on_comp: f64,
    cfg: &LossConfig,
) -> Result<PnsTerms> {
    let r = loss_p(y, on_rep)?;
    let cr = loss_c(y, on_comp, cfg.theta)?;
    Ok(PnsTerms { r, cr, constr: r * cr })
}

/// Specific-representation terms for one modality. `r` and `cr` mirror the
/// invariant case on the modality's specific predictor; the constraint
/// compares that predictor's output on its own representation against its
/// output on the *other* modality's complement, penalizing agreement.
#[allow(clippy::too_many_arguments)]
pub fn specific_pns_loss(
    modality: Modality,
    other: Modality,
    y: f64,
    r_spec: &[f64],
    c_spec: &[f64],
    c_spec_other: &[f64],
    model: &DecompModel,
    cfg: &LossConfig,
) -> Result<PnsTerms> {
    cfg.validate()?;
    if other == modality {
        return Err(Error::InvalidConfig(
            "specific_pns_loss: the cross complement must come from the other modality".into(),
        ));
    }
    let head = AuxHead::Specific(modality);
    let on_rep = predict_aux(model, head, r_spec)?;
    let on_comp = predict_aux(model, head, c_spec)?;
    let on_cross = predict_aux(model, head, c_spec_other)?;
    specific_terms_from_predictions(y, on_rep, on_comp, on_cross, cfg)
}

/// [`specific_pns_loss`] on already-computed predictor outputs.
pub fn specific_terms_from_predictions(
    y: f64,
    on_rep: f64,
    on_comp: f64,
    on_cross: f64,
    cfg: &LossConfig,
) -> Result<PnsTerms> {
    let r = loss_p(y, on_rep)?;
    let cr = loss_c(y, on_comp, cfg.theta)?;
    let constr = loss_c(on_rep, on_cross, cfg.theta)?;
    Ok(PnsTerms { r, cr, constr })
}

/// Predictor outputs for one sample, everything the objective needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleForward {
    pub y: f64,
    /// Main predictor on the full representation concatenation.
    pub p_main: f64,
    /// Per modality: invariant predictor on (representation, complement).
    pub inv: [(f64, f64); 2],
    /// Per modality: specific predictor on (representation, complement,
    /// cross complement from the other modality).
    pub spec: [(f64, f64, f64); 2],
}

/// Loss terms of one modality, unweighted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModalityTerms {
    pub inv_r: f64,
    pub inv_cr: f64,
    pub inv_constr: f64,
    pub spec_r: f64,
    pub spec_cr: f64,
    pub spec_constr: f64,
}

/// Full per-sample (or per-batch mean) loss decomposition. The parts are
/// stored unweighted; `total` applies the configured λ weights to the parts
/// the mode activates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub task: f64,
    pub modalities: [ModalityTerms; 2],
    pub total: f64,
}

/// Assembles the mode-dependent total from one sample's predictor outputs.
///
/// The total is built in a fixed order as `base + constraints`, where
/// `base` is bitwise-identical between the two modes that share it — so the
/// difference between a full total and a constraint-free total equals the
/// weighted constraint sum to rounding error.
pub fn total_loss(mode: Mode, fw: &SampleForward, cfg: &LossConfig) -> Result<LossBreakdown> {
    cfg.validate()?;
    let task = loss_p(fw.y, fw.p_main)?;
    let mut modalities = [ModalityTerms {
        inv_r: 0.0,
        inv_cr: 0.0,
        inv_constr: 0.0,
        spec_r: 0.0,
        spec_cr: 0.0,
        spec_constr: 0.0,
    }; 2];
    for (slot, (&(inv_rep, inv_comp), &(spec_rep, spec_comp, spec_cross))) in
        modalities.iter_mut().zip(fw.inv.iter().zip(&fw.spec))
    {
        let inv = invariant_terms_from_predictions(fw.y, inv_rep, inv_comp, cfg)?;
        let spec = specific_terms_from_predictions(fw.y, spec_rep, spec_comp, spec_cross, cfg)?;
        *slot = ModalityTerms {
            inv_r: inv.r,
            inv_cr: inv.cr,
            inv_constr: inv.constr,
            spec_r: spec.r,
            spec_cr: spec.cr,
            spec_constr: spec.constr,
        };
    }
    let total = assemble_total(mode, task, &modalities, cfg);
    Ok(LossBreakdown { task, modalities, total })
}

/// Mode-dependent weighted sum over already-computed parts, in a fixed
/// summation order.
pub fn assemble_total(mode: Mode, task: f64, modalities: &[ModalityTerms; 2], cfg: &LossConfig) -> f64 {
    let mut base = task;
    if mode.uses_pns_terms() {
        for t in modalities {
            base += cfg.lambda_r * t.inv_r;
            base += cfg.lambda_cr * t.inv_cr;
            base += cfg.lambda_r * t.spec_r;
            base += cfg.lambda_cr * t.spec_cr;
        }
    }
    if mode.uses_constraints() {
        let mut constr = 0.0;
        for t in modalities {
            constr += cfg.lambda_constr * t.inv_constr;
            constr += cfg.lambda_constr * t.spec_constr;
        }
        base + constr
    } else {
        base
    }
}
