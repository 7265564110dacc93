//! Decomposition architecture for two-modality inputs.
//!
//! A shared invariant encoder plus per-modality specific encoders map each
//! modality view into (invariant, specific) representation pairs. A
//! mirrored complement extractor — identical shapes, fully separate
//! parameters — produces complement representations used only by the
//! training objectives. A main predictor reads the concatenated invariant
//! and specific representations of both modalities; four auxiliary
//! predictors each read a single representation (and are shared between a
//! representation and its complement, which is what couples the two
//! extraction pathways during training).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diffcore::{mlp_output, Activation, MlpSpec, ParamSet};
use crate::error::{Error, Result};
use crate::seeds::{self, domain};

/// Which of the two modality views an input belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Modality {
    M1,
    M2,
}

impl Modality {
    pub const BOTH: [Modality; 2] = [Modality::M1, Modality::M2];

    /// 1-based index used in interfaces and file names.
    pub fn index(self) -> usize {
        match self {
            Modality::M1 => 1,
            Modality::M2 => 2,
        }
    }

    /// 0-based slot for array indexing.
    pub fn slot(self) -> usize {
        self.index() - 1
    }

    /// The other modality (used by the cross-modal constraint term).
    pub fn other(self) -> Modality {
        match self {
            Modality::M1 => Modality::M2,
            Modality::M2 => Modality::M1,
        }
    }

    pub fn from_index(index: usize) -> Result<Modality> {
        match index {
            1 => Ok(Modality::M1),
            2 => Ok(Modality::M2),
            _ => Err(Error::InvalidConfig(format!(
                "modality index {index} must be 1 or 2"
            ))),
        }
    }
}

/// Network dimensions for the whole model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchConfig {
    /// Input width of one modality view.
    pub input_dim: usize,
    /// Invariant representation width.
    pub d_zi: usize,
    /// Specific representation width (same for both modalities; the
    /// cross-modal constraint compares specific-representation predictors
    /// across modalities).
    pub d_zs: usize,
    pub encoder_hidden: Vec<usize>,
    pub predictor_hidden: Vec<usize>,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            input_dim: 20,
            d_zi: 8,
            d_zs: 8,
            encoder_hidden: vec![64, 32],
            predictor_hidden: vec![64, 32],
        }
    }
}

impl ArchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.d_zi == 0 || self.d_zs == 0 {
            return Err(Error::InvalidConfig(
                "input_dim, d_zi and d_zs must all be >= 1".into(),
            ));
        }
        if self.encoder_hidden.contains(&0) || self.predictor_hidden.contains(&0) {
            return Err(Error::InvalidConfig("hidden layer widths must be >= 1".into()));
        }
        Ok(())
    }

    /// Input width of the main predictor: both invariant plus both
    /// specific representations.
    pub fn main_input_dim(&self) -> usize {
        2 * self.d_zi + 2 * self.d_zs
    }
}

/// Identifies one of the model's eleven networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NetworkId {
    /// Shared invariant encoder (one parameter set for both modalities).
    EncInv,
    /// Modality-specific encoder.
    EncSpec(Modality),
    /// Complement-side mirror of the invariant encoder.
    CompInv,
    /// Complement-side mirror of a specific encoder.
    CompSpec(Modality),
    /// Main predictor over all four representations.
    PredMain,
    /// Auxiliary predictor over one invariant representation (and its
    /// complement).
    PredInv(Modality),
    /// Auxiliary predictor over one specific representation (and
    /// complements fed to it by the constraint terms).
    PredSpec(Modality),
}

impl NetworkId {
    /// All networks in their fixed storage/initialization order.
    pub const ALL: [NetworkId; 11] = [
        NetworkId::EncInv,
        NetworkId::EncSpec(Modality::M1),
        NetworkId::EncSpec(Modality::M2),
        NetworkId::CompInv,
        NetworkId::CompSpec(Modality::M1),
        NetworkId::CompSpec(Modality::M2),
        NetworkId::PredMain,
        NetworkId::PredInv(Modality::M1),
        NetworkId::PredInv(Modality::M2),
        NetworkId::PredSpec(Modality::M1),
        NetworkId::PredSpec(Modality::M2),
    ];

    pub fn storage_slot(self) -> usize {
        Self::ALL
            .iter()
            .position(|id| *id == self)
            .expect("every id is in ALL")
    }

    /// Stable name used as the checkpoint key.
    pub fn name(self) -> &'static str {
        match self {
            NetworkId::EncInv => "enc_inv",
            NetworkId::EncSpec(Modality::M1) => "enc_spec1",
            NetworkId::EncSpec(Modality::M2) => "enc_spec2",
            NetworkId::CompInv => "comp_inv",
            NetworkId::CompSpec(Modality::M1) => "comp_spec1",
            NetworkId::CompSpec(Modality::M2) => "comp_spec2",
            NetworkId::PredMain => "pred_main",
            NetworkId::PredInv(Modality::M1) => "pred_inv1",
            NetworkId::PredInv(Modality::M2) => "pred_inv2",
            NetworkId::PredSpec(Modality::M1) => "pred_spec1",
            NetworkId::PredSpec(Modality::M2) => "pred_spec2",
        }
    }

    /// True for the complement extractor's networks.
    pub fn is_complement(self) -> bool {
        matches!(self, NetworkId::CompInv | NetworkId::CompSpec(_))
    }

    /// True for the auxiliary predictors.
    pub fn is_aux_predictor(self) -> bool {
        matches!(self, NetworkId::PredInv(_) | NetworkId::PredSpec(_))
    }

    /// Architecture of this network under `arch`.
    pub fn spec(self, arch: &ArchConfig) -> MlpSpec {
        match self {
            NetworkId::EncInv | NetworkId::CompInv => MlpSpec::new(
                arch.input_dim,
                arch.encoder_hidden.clone(),
                arch.d_zi,
                Activation::Linear,
            ),
            NetworkId::EncSpec(_) | NetworkId::CompSpec(_) => MlpSpec::new(
                arch.input_dim,
                arch.encoder_hidden.clone(),
                arch.d_zs,
                Activation::Linear,
            ),
            NetworkId::PredMain => MlpSpec::new(
                arch.main_input_dim(),
                arch.predictor_hidden.clone(),
                1,
                Activation::Sigmoid,
            ),
            NetworkId::PredInv(_) => MlpSpec::new(
                arch.d_zi,
                arch.predictor_hidden.clone(),
                1,
                Activation::Sigmoid,
            ),
            NetworkId::PredSpec(_) => MlpSpec::new(
                arch.d_zs,
                arch.predictor_hidden.clone(),
                1,
                Activation::Sigmoid,
            ),
        }
    }
}

/// Selects one auxiliary predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuxHead {
    Invariant(Modality),
    Specific(Modality),
}

impl AuxHead {
    pub fn network(self) -> NetworkId {
        match self {
            AuxHead::Invariant(m) => NetworkId::PredInv(m),
            AuxHead::Specific(m) => NetworkId::PredSpec(m),
        }
    }
}

/// Representation bundle for one sample: extraction (`r_*`) and complement
/// (`c_*`) outputs per modality, indexed by [`Modality::slot`].
#[derive(Debug, Clone, PartialEq)]
pub struct Representations {
    pub r_i: [Vec<f64>; 2],
    pub r_s: [Vec<f64>; 2],
    pub c_i: [Vec<f64>; 2],
    pub c_s: [Vec<f64>; 2],
}

const CHECKPOINT_VERSION: u32 = 1;
const KIND_FULL: &str = "full";
const KIND_INFERENCE: &str = "inference";

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format_version: u32,
    kind: String,
    arch: ArchConfig,
    networks: BTreeMap<String, ParamSet>,
}

fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let file = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer(&mut w, ckpt).map_err(|e| Error::json(path, e))?;
        use std::io::Write as _;
        w.flush().map_err(|e| Error::io(&tmp, e))?;
    }
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn read_checkpoint(path: &Path, expect_kind: &str) -> Result<Checkpoint> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let ckpt: Checkpoint =
        serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::json(path, e))?;
    if ckpt.format_version != CHECKPOINT_VERSION {
        return Err(Error::Parse {
            path: path.display().to_string(),
            detail: format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                ckpt.format_version
            ),
        });
    }
    if ckpt.kind != expect_kind {
        return Err(Error::Parse {
            path: path.display().to_string(),
            detail: format!("checkpoint kind '{}' (expected '{expect_kind}')", ckpt.kind),
        });
    }
    ckpt.arch.validate()?;
    Ok(ckpt)
}

fn take_network(
    path: &Path,
    networks: &mut BTreeMap<String, ParamSet>,
    arch: &ArchConfig,
    id: NetworkId,
) -> Result<ParamSet> {
    let params = networks.remove(id.name()).ok_or_else(|| Error::Parse {
        path: path.display().to_string(),
        detail: format!("checkpoint is missing network '{}'", id.name()),
    })?;
    if !params.matches_spec(&id.spec(arch)) {
        return Err(Error::Parse {
            path: path.display().to_string(),
            detail: format!("network '{}' does not match the declared architecture", id.name()),
        });
    }
    if !params.all_finite() {
        return Err(Error::NonFinite(format!("checkpoint network '{}'", id.name())));
    }
    Ok(params)
}

/// The full training-time model: extraction and complement pathways plus
/// all predictors. Indexed storage, one [`ParamSet`] per [`NetworkId`].
#[derive(Debug, Clone, PartialEq)]
pub struct DecompModel {
    arch: ArchConfig,
    nets: Vec<ParamSet>,
}

/// Builds a model with deterministic per-network initialization: network
/// `k` in [`NetworkId::ALL`] order draws from substream `k` of a
/// seed-derived stream family, so the extraction and complement pathways
/// start from different parameters.
pub fn init_model(arch: &ArchConfig, seed: u64) -> Result<DecompModel> {
    arch.validate()?;
    let base = seeds::mix(seed, domain::MODEL_INIT);
    let nets = NetworkId::ALL
        .iter()
        .enumerate()
        .map(|(k, id)| {
            let mut rng = seeds::stream_rng(base, k as u64);
            ParamSet::init(&id.spec(arch), &mut rng)
        })
        .collect();
    Ok(DecompModel { arch: arch.clone(), nets })
}

impl DecompModel {
    pub fn arch(&self) -> &ArchConfig {
        &self.arch
    }

    pub fn net(&self, id: NetworkId) -> &ParamSet {
        &self.nets[id.storage_slot()]
    }

    pub fn net_mut(&mut self, id: NetworkId) -> &mut ParamSet {
        &mut self.nets[id.storage_slot()]
    }

    pub fn spec(&self, id: NetworkId) -> MlpSpec {
        id.spec(&self.arch)
    }

    pub fn param_count(&self) -> usize {
        self.nets.iter().map(ParamSet::param_count).sum()
    }

    /// Runs both extractors on both modality views.
    pub fn represent(&self, x1: &[f64], x2: &[f64]) -> Result<Representations> {
        let (ri1, rs1) = extract(self, x1, Modality::M1)?;
        let (ri2, rs2) = extract(self, x2, Modality::M2)?;
        let (ci1, cs1) = extract_complement(self, x1, Modality::M1)?;
        let (ci2, cs2) = extract_complement(self, x2, Modality::M2)?;
        Ok(Representations {
            r_i: [ri1, ri2],
            r_s: [rs1, rs2],
            c_i: [ci1, ci2],
            c_s: [cs1, cs2],
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let networks = NetworkId::ALL
            .iter()
            .map(|id| (id.name().to_string(), self.net(*id).clone()))
            .collect();
        write_checkpoint(
            path,
            &Checkpoint {
                format_version: CHECKPOINT_VERSION,
                kind: KIND_FULL.into(),
                arch: self.arch.clone(),
                networks,
            },
        )
    }

    pub fn load(path: &Path) -> Result<DecompModel> {
        let mut ckpt = read_checkpoint(path, KIND_FULL)?;
        let nets = NetworkId::ALL
            .iter()
            .map(|id| take_network(path, &mut ckpt.networks, &ckpt.arch, *id))
            .collect::<Result<Vec<_>>>()?;
        if let Some(extra) = ckpt.networks.keys().next() {
            return Err(Error::Parse {
                path: path.display().to_string(),
                detail: format!("checkpoint holds unknown network '{extra}'"),
            });
        }
        Ok(DecompModel { arch: ckpt.arch, nets })
    }
}

/// Runs the extraction pathway on one modality view, returning the
/// (invariant, specific) representation pair. The invariant encoder's
/// parameters are shared across modalities; the specific encoder's are not.
pub fn extract(model: &DecompModel, x: &[f64], modality: Modality) -> Result<(Vec<f64>, Vec<f64>)> {
    let inv = mlp_output(&model.spec(NetworkId::EncInv), model.net(NetworkId::EncInv), x)?;
    let spec_id = NetworkId::EncSpec(modality);
    let spec = mlp_output(&model.spec(spec_id), model.net(spec_id), x)?;
    Ok((inv, spec))
}

/// Runs the complement pathway on one modality view; same shapes as
/// [`extract`], fully separate parameters.
pub fn extract_complement(
    model: &DecompModel,
    x: &[f64],
    modality: Modality,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let inv = mlp_output(&model.spec(NetworkId::CompInv), model.net(NetworkId::CompInv), x)?;
    let spec_id = NetworkId::CompSpec(modality);
    let spec = mlp_output(&model.spec(spec_id), model.net(spec_id), x)?;
    Ok((inv, spec))
}

/// Concatenation fed to the main predictor, in its fixed order:
/// `[R_inv^1, R_inv^2, R_spec^1, R_spec^2]`.
pub fn main_input(arch: &ArchConfig, reps: &Representations) -> Result<Vec<f64>> {
    for (name, v, want) in [
        ("invariant representation (modality 1)", &reps.r_i[0], arch.d_zi),
        ("invariant representation (modality 2)", &reps.r_i[1], arch.d_zi),
        ("specific representation (modality 1)", &reps.r_s[0], arch.d_zs),
        ("specific representation (modality 2)", &reps.r_s[1], arch.d_zs),
    ] {
        if v.len() != want {
            return Err(Error::ShapeMismatch {
                context: "predict_main representation",
                expected: want,
                got: v.len(),
            });
        }
        if v.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite(format!("predict_main: {name}")));
        }
    }
    let mut input = Vec::with_capacity(arch.main_input_dim());
    input.extend_from_slice(&reps.r_i[0]);
    input.extend_from_slice(&reps.r_i[1]);
    input.extend_from_slice(&reps.r_s[0]);
    input.extend_from_slice(&reps.r_s[1]);
    Ok(input)
}

/// Main prediction from a representation bundle (complements are ignored).
pub fn predict_main(model: &DecompModel, reps: &Representations) -> Result<f64> {
    let input = main_input(&model.arch, reps)?;
    let out = mlp_output(&model.spec(NetworkId::PredMain), model.net(NetworkId::PredMain), &input)?;
    Ok(out[0])
}

/// Auxiliary prediction from a single representation (or complement — the
/// same network serves both).
pub fn predict_aux(model: &DecompModel, head: AuxHead, rep: &[f64]) -> Result<f64> {
    let id = head.network();
    let out = mlp_output(&model.spec(id), model.net(id), rep)?;
    Ok(out[0])
}

/// Deployment model: extraction pathway and main predictor only. It has no
/// complement networks and no auxiliary predictors, and its checkpoints are
/// rejected by [`DecompModel::load`].
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceModel {
    arch: ArchConfig,
    enc_inv: ParamSet,
    enc_spec: [ParamSet; 2],
    pred_main: ParamSet,
}

/// Drops everything training-only from `model`: the complement extractor
/// and the auxiliary predictors. Predictions are unchanged.
pub fn strip_for_inference(model: &DecompModel) -> InferenceModel {
    InferenceModel {
        arch: model.arch.clone(),
        enc_inv: model.net(NetworkId::EncInv).clone(),
        enc_spec: [
            model.net(NetworkId::EncSpec(Modality::M1)).clone(),
            model.net(NetworkId::EncSpec(Modality::M2)).clone(),
        ],
        pred_main: model.net(NetworkId::PredMain).clone(),
    }
}

impl InferenceModel {
    pub fn arch(&self) -> &ArchConfig {
        &self.arch
    }

    /// Label probability for one two-view sample.
    pub fn predict(&self, x1: &[f64], x2: &[f64]) -> Result<f64> {
        let inv_spec = NetworkId::EncInv.spec(&self.arch);
        let mut input = Vec::with_capacity(self.arch.main_input_dim());
        let ri1 = mlp_output(&inv_spec, &self.enc_inv, x1)?;
        let ri2 = mlp_output(&inv_spec, &self.enc_inv, x2)?;
        input.extend_from_slice(&ri1);
        input.extend_from_slice(&ri2);
        for (slot, x) in [x1, x2].into_iter().enumerate() {
            let spec_id = NetworkId::EncSpec(Modality::BOTH[slot]);
            let rs = mlp_output(&spec_id.spec(&self.arch), &self.enc_spec[slot], x)?;
            input.extend_from_slice(&rs);
        }
        let out = mlp_output(
            &NetworkId::PredMain.spec(&self.arch),
            &self.pred_main,
            &input,
        )?;
        Ok(out[0])
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let networks = [
            (NetworkId::EncInv, &self.enc_inv),
            (NetworkId::EncSpec(Modality::M1), &self.enc_spec[0]),
            (NetworkId::EncSpec(Modality::M2), &self.enc_spec[1]),
            (NetworkId::PredMain, &self.pred_main),
        ]
        .into_iter()
        .map(|(id, p)| (id.name().to_string(), p.clone()))
        .collect();
        write_checkpoint(
            path,
            &Checkpoint {
                format_version: CHECKPOINT_VERSION,
                kind: KIND_INFERENCE.into(),
                arch: self.arch.clone(),
                networks,
            },
        )
    }

    pub fn load(path: &Path) -> Result<InferenceModel> {
        let mut ckpt = read_checkpoint(path, KIND_INFERENCE)?;
        let enc_inv = take_network(path, &mut ckpt.networks, &ckpt.arch, NetworkId::EncInv)?;
        let enc_spec1 =
            take_network(path, &mut ckpt.networks, &ckpt.arch, NetworkId::EncSpec(Modality::M1))?;
        let enc_spec2 =
            take_network(path, &mut ckpt.networks, &ckpt.arch, NetworkId::EncSpec(Modality::M2))?;
        let pred_main = take_network(path, &mut ckpt.networks, &ckpt.arch, NetworkId::PredMain)?;
        if let Some(extra) = ckpt.networks.keys().next() {
            return Err(Error::Parse {
                path: path.display().to_string(),
                detail: format!("checkpoint holds unknown network '{extra}'"),
            });
        }
        Ok(InferenceModel {
            arch: ckpt.arch,
            enc_inv,
            enc_spec: [enc_spec1, enc_spec2],
            pred_main,
        })
    }
}
