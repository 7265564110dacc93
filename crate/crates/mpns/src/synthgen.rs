//! Synthetic two-modality benchmark generator.
//!
//! Each sample is driven by four latent variables: a binary source signal
//! `sn` that (noisily) determines the label, a downstream indicator `sf`
//! that almost always tracks `sn`, a noisy child `nc` of `sn`, and a scalar
//! `sc` whose correlation with `sn` is tuned by the mixing degree `s`.
//! Every variable is broadcast into a `d`-wide block with additive Gaussian
//! noise, the blocks are split into two overlapping 20-dimensional modality
//! views (3 shared elements + 2 modality-specific elements per variable),
//! and each view passes through a double-hinge nonlinearity `kappa`.
//!
//! Generation is deterministic: every sample draws from its own
//! counter-based substream, so datasets are a pure function of the config
//! and can be produced in parallel without changing the output.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds::{self, domain};

/// Form of the `kappa` output nonlinearity.
///
/// `Sum` is the usable double-hinge `β·(max(t−α,0) + min(t+α,0))`: zero
/// inside the dead zone `|t| ≤ α` and linear with slope `β` outside.
/// `LiteralProduct` is `β·max(t−α,0)·min(t+α,0)`, which is identically zero
/// for `α > 0` because the factors are never simultaneously nonzero; it is
/// kept selectable for audits of that degeneracy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaForm {
    #[default]
    Sum,
    LiteralProduct,
}

/// Dead-zone threshold and outer slope for one modality's `kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaParams {
    pub alpha: f64,
    pub beta: f64,
}

/// Full description of one synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    /// Spurious-correlation degree in `[0, 1)`.
    pub s: f64,
    /// Block width per latent variable.
    pub d: usize,
    pub n_samples: usize,
    /// Probability that the label disagrees with `sn`.
    pub label_flip_p: f64,
    /// Probability that `sf = 1` when `sn = 0`.
    pub sf_leak_p: f64,
    /// Probability that `nc = 1` when `sn = 1`.
    pub nc_keep_p: f64,
    /// Standard deviation of the element-wise feature noise.
    pub noise_std: f64,
    pub kappa_m1: KappaParams,
    pub kappa_m2: KappaParams,
    pub kappa_form: KappaForm,
    pub seed: u64,
    /// First sample index; lets one seed serve disjoint train/eval ranges.
    pub start_index: u64,
}

impl SynthConfig {
    pub fn new(s: f64, n_samples: usize, seed: u64) -> Self {
        SynthConfig {
            s,
            d: 7,
            n_samples,
            label_flip_p: 0.15,
            sf_leak_p: 0.1,
            nc_keep_p: 0.9,
            noise_std: 0.3,
            kappa_m1: KappaParams { alpha: 0.8, beta: 2.2 },
            kappa_m2: KappaParams { alpha: 1.0, beta: 2.0 },
            kappa_form: KappaForm::Sum,
            seed,
            start_index: 0,
        }
    }

    pub fn with_start_index(mut self, start_index: u64) -> Self {
        self.start_index = start_index;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.s) {
            return Err(Error::InvalidConfig(format!(
                "mixing degree s = {} must lie in [0, 1)",
                self.s
            )));
        }
        if self.d < 5 {
            return Err(Error::InvalidConfig(format!(
                "block width d = {} too small: need 3 shared + 2 specific elements",
                self.d
            )));
        }
        if self.n_samples == 0 {
            return Err(Error::InvalidConfig("n_samples must be >= 1".into()));
        }
        for (name, p) in [
            ("label_flip_p", self.label_flip_p),
            ("sf_leak_p", self.sf_leak_p),
            ("nc_keep_p", self.nc_keep_p),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!(
                    "{name} = {p} is not a probability"
                )));
            }
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "noise_std = {} must be finite and >= 0",
                self.noise_std
            )));
        }
        for (name, k) in [("kappa_m1", self.kappa_m1), ("kappa_m2", self.kappa_m2)] {
            if !(k.alpha > 0.0 && k.beta > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name}: alpha and beta must be > 0, got ({}, {})",
                    k.alpha, k.beta
                )));
            }
        }
        Ok(())
    }

    fn layout(&self) -> ModalityLayout {
        ModalityLayout::new(self.d).expect("validated d")
    }
}

/// The four latent variable types, in their fixed block order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentVariable {
    Sn,
    Sf,
    Nc,
    Sc,
}

impl LatentVariable {
    pub const ALL: [LatentVariable; 4] = [
        LatentVariable::Sn,
        LatentVariable::Sf,
        LatentVariable::Nc,
        LatentVariable::Sc,
    ];

    pub fn index(self) -> usize {
        match self {
            LatentVariable::Sn => 0,
            LatentVariable::Sf => 1,
            LatentVariable::Nc => 2,
            LatentVariable::Sc => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LatentVariable::Sn => "sn",
            LatentVariable::Sf => "sf",
            LatentVariable::Nc => "nc",
            LatentVariable::Sc => "sc",
        }
    }
}

/// Latent draw for one sample. Binary fields are 0/1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatentVars {
    pub sn: u8,
    pub sf: u8,
    pub nc: u8,
    pub sc: f64,
    pub y: u8,
}

impl LatentVars {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("sn", self.sn), ("sf", self.sf), ("nc", self.nc), ("y", self.y)] {
            if v > 1 {
                return Err(Error::InvalidConfig(format!("latent {name} = {v} is not 0/1")));
            }
        }
        if !self.sc.is_finite() {
            return Err(Error::NonFinite("latent sc".into()));
        }
        if self.sn == 1 && self.sf != 1 {
            return Err(Error::InvalidConfig("structural violation: sn=1 requires sf=1".into()));
        }
        if self.sn == 0 && self.nc != 0 {
            return Err(Error::InvalidConfig("structural violation: sn=0 requires nc=0".into()));
        }
        Ok(())
    }

    /// Value of one variable as a real number (for feature blocks and
    /// evaluation targets).
    pub fn value(&self, var: LatentVariable) -> f64 {
        match var {
            LatentVariable::Sn => f64::from(self.sn),
            LatentVariable::Sf => f64::from(self.sf),
            LatentVariable::Nc => f64::from(self.nc),
            LatentVariable::Sc => self.sc,
        }
    }
}

/// Index bookkeeping for splitting the stacked feature vector `h` into the
/// two modality views.
///
/// Variable `v` occupies block `[d·v, d·v + d)` of `h`. Within a block the
/// first 3 elements are shared by both modalities, elements `{3, 4}` belong
/// to modality 1, and the last two elements belong to modality 2 (disjoint
/// from modality 1's whenever `d >= 7`). Within a modality view, variable
/// `v` occupies `[5v, 5v + 5)`: its 3 shared elements then its 2 specific
/// ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModalityLayout {
    d: usize,
}

pub const INVARIANT_WIDTH: usize = 3;
pub const SPECIFIC_WIDTH: usize = 2;
pub const MODALITY_DIM: usize = 4 * (INVARIANT_WIDTH + SPECIFIC_WIDTH);

impl ModalityLayout {
    pub fn new(d: usize) -> Result<Self> {
        if d < INVARIANT_WIDTH + SPECIFIC_WIDTH {
            return Err(Error::InvalidConfig(format!(
                "block width d = {d} too small for 3 shared + 2 specific elements"
            )));
        }
        Ok(ModalityLayout { d })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Length of the stacked feature vector `h`.
    pub fn h_len(&self) -> usize {
        4 * self.d
    }

    /// Indices of `h` that feed the given modality (1 or 2), in view order.
    pub fn modality_indices(&self, modality: usize) -> Vec<usize> {
        let specific: [usize; SPECIFIC_WIDTH] = match modality {
            1 => [3, 4],
            2 => [self.d - 2, self.d - 1],
            _ => panic!("modality must be 1 or 2"),
        };
        let mut idx = Vec::with_capacity(MODALITY_DIM);
        for v in 0..4 {
            let base = v * self.d;
            idx.extend((0..INVARIANT_WIDTH).map(|j| base + j));
            idx.extend(specific.iter().map(|&j| base + j));
        }
        idx
    }

    /// Slice of a modality view holding variable `var` (3 shared + 2
    /// specific elements).
    pub fn variable_slice(&self, var: LatentVariable) -> std::ops::Range<usize> {
        let v = var.index();
        let w = INVARIANT_WIDTH + SPECIFIC_WIDTH;
        v * w..(v + 1) * w
    }
}

/// One generated sample: the two modality views, the label, and the latent
/// draw (retained for evaluation only — the model never sees it).
#[derive(Debug, Clone, PartialEq)]
pub struct MultimodalSample {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub y: u8,
    pub latents: LatentVars,
}

/// Wire format: one flat JSON object per line.
#[derive(Serialize, Deserialize)]
struct RawSample {
    x1: Vec<f64>,
    x2: Vec<f64>,
    y: u8,
    sn: u8,
    sf: u8,
    nc: u8,
    sc: f64,
}

impl From<&MultimodalSample> for RawSample {
    fn from(s: &MultimodalSample) -> RawSample {
        RawSample {
            x1: s.x1.clone(),
            x2: s.x2.clone(),
            y: s.y,
            sn: s.latents.sn,
            sf: s.latents.sf,
            nc: s.latents.nc,
            sc: s.latents.sc,
        }
    }
}

impl MultimodalSample {
    fn from_raw(raw: RawSample) -> Result<Self> {
        let latents = LatentVars {
            sn: raw.sn,
            sf: raw.sf,
            nc: raw.nc,
            sc: raw.sc,
            y: raw.y,
        };
        latents.validate()?;
        if raw.x1.iter().chain(&raw.x2).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sample features".into()));
        }
        Ok(MultimodalSample { x1: raw.x1, x2: raw.x2, y: raw.y, latents })
    }

    pub fn label(&self) -> f64 {
        f64::from(self.y)
    }
}

fn draw_latents<R: Rng>(cfg: &SynthConfig, rng: &mut R) -> LatentVars {
    // Fixed draw order (and a draw for every branch, used or not) keeps the
    // per-sample stream layout identical across samples.
    let sn = u8::from(rng.random_bool(0.5));
    let flip = u8::from(rng.random_bool(cfg.label_flip_p));
    let sf_leak = u8::from(rng.random_bool(cfg.sf_leak_p));
    let nc_keep = u8::from(rng.random_bool(cfg.nc_keep_p));
    let noise: f64 = StandardNormal.sample(rng);
    LatentVars {
        sn,
        sf: if sn == 1 { 1 } else { sf_leak },
        nc: if sn == 1 { nc_keep } else { 0 },
        sc: cfg.s * f64::from(sn) + (1.0 - cfg.s) * noise,
        y: sn ^ flip,
    }
}

/// Draws the latent variables for one sample at mixing degree `s`, using the
/// default structural probabilities.
pub fn sample_variables<R: Rng>(s: f64, rng: &mut R) -> Result<LatentVars> {
    let cfg = SynthConfig::new(s, 1, 0);
    cfg.validate()?;
    Ok(draw_latents(&cfg, rng))
}

/// Broadcasts each latent variable into its `d`-wide block and adds
/// element-wise Gaussian noise with standard deviation `cfg.noise_std`.
pub fn build_feature_vector<R: Rng>(
    latents: &LatentVars,
    cfg: &SynthConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let mut h = Vec::with_capacity(4 * cfg.d);
    for var in LatentVariable::ALL {
        let value = latents.value(var);
        for _ in 0..cfg.d {
            let noise: f64 = StandardNormal.sample(rng);
            h.push(value + cfg.noise_std * noise);
        }
    }
    Ok(h)
}

/// Splits the stacked feature vector into the two modality views. Shared
/// elements are copied verbatim into both views, noise realization included.
pub fn split_modalities(h: &[f64], layout: &ModalityLayout) -> Result<(Vec<f64>, Vec<f64>)> {
    if h.len() != layout.h_len() {
        return Err(Error::ShapeMismatch {
            context: "split_modalities feature vector",
            expected: layout.h_len(),
            got: h.len(),
        });
    }
    let gather = |idx: Vec<usize>| idx.into_iter().map(|i| h[i]).collect::<Vec<f64>>();
    Ok((gather(layout.modality_indices(1)), gather(layout.modality_indices(2))))
}

/// Element-wise double-hinge nonlinearity; see [`KappaForm`] for the two
/// variants.
pub fn kappa(t: &[f64], alpha: f64, beta: f64, form: KappaForm) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "kappa needs alpha > 0 and beta > 0, got ({alpha}, {beta})"
        )));
    }
    let map = |&v: &f64| -> f64 {
        let upper = (v - alpha).max(0.0);
        let lower = (v + alpha).min(0.0);
        match form {
            KappaForm::Sum => beta * (upper + lower),
            KappaForm::LiteralProduct => beta * upper * lower,
        }
    };
    Ok(t.iter().map(map).collect())
}

fn generate_one(cfg: &SynthConfig, layout: &ModalityLayout, index: u64) -> Result<MultimodalSample> {
    let mut rng = seeds::stream_rng(seeds::mix(cfg.seed, domain::DATA), index);
    let latents = draw_latents(cfg, &mut rng);
    let h = build_feature_vector(&latents, cfg, &mut rng)?;
    let (h1, h2) = split_modalities(&h, layout)?;
    let x1 = kappa(&h1, cfg.kappa_m1.alpha, cfg.kappa_m1.beta, cfg.kappa_form)?;
    let x2 = kappa(&h2, cfg.kappa_m2.alpha, cfg.kappa_m2.beta, cfg.kappa_form)?;
    Ok(MultimodalSample { x1, x2, y: latents.y, latents })
}

/// Generates `cfg.n_samples` samples for indices
/// `cfg.start_index .. cfg.start_index + n`.
///
/// Each sample uses its own substream keyed by its absolute index, so the
/// result is a pure function of the config; samples are generated in
/// parallel but returned in index order.
pub fn generate_dataset(cfg: &SynthConfig) -> Result<Vec<MultimodalSample>> {
    cfg.validate()?;
    let layout = cfg.layout();
    (0..cfg.n_samples as u64)
        .into_par_iter()
        .map(|i| generate_one(cfg, &layout, cfg.start_index + i))
        .collect()
}

/// Writes samples as newline-delimited JSON (one object per line), going
/// through a temp file + rename so readers never see a partial file.
pub fn write_ndjson(path: &Path, samples: &[MultimodalSample]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let file = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        let mut w = BufWriter::new(file);
        for sample in samples {
            serde_json::to_writer(&mut w, &RawSample::from(sample))
                .map_err(|e| Error::json(path, e))?;
            w.write_all(b"\n").map_err(|e| Error::io(&tmp, e))?;
        }
        w.flush().map_err(|e| Error::io(&tmp, e))?;
    }
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a newline-delimited JSON dataset, validating structure and
/// finiteness of every sample.
pub fn read_ndjson(path: &Path) -> Result<Vec<MultimodalSample>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut samples = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawSample = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            detail: format!("line {}: {e}", lineno + 1),
        })?;
        let sample = MultimodalSample::from_raw(raw).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            detail: format!("line {}: {e}", lineno + 1),
        })?;
        samples.push(sample);
    }
    if samples.is_empty() {
        return Err(Error::EmptyInput(format!("{} holds no samples", path.display())));
    }
    Ok(samples)
}
