//! Evaluation statistics: distance correlation between learned
//! representations and the generator's latent variables, and the
//! observational difference-of-conditionals estimator for binary causes.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{extract, DecompModel, Modality};
use crate::synthgen::{LatentVariable, ModalityLayout, MultimodalSample};

/// What a representation is correlated against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// The raw scalar value of the latent variable (an `n × 1` target).
    LatentScalar,
    /// The variable's 5-dimensional post-nonlinearity slice of the
    /// modality view (an `n × 5` target).
    ModalitySlice,
}

impl TargetKind {
    /// Wire name; matches the serde representation.
    pub fn name(self) -> &'static str {
        match self {
            TargetKind::LatentScalar => "latent_scalar",
            TargetKind::ModalitySlice => "modality_slice",
        }
    }
}

/// One (modality, variable) correlation target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DcorTarget {
    pub kind: TargetKind,
    pub variable: LatentVariable,
    pub modality: Modality,
}

/// One computed correlation cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DcorCell {
    pub modality: usize,
    pub variable: LatentVariable,
    pub dcor: f64,
    pub n: usize,
    pub kind: TargetKind,
}

/// Correlations of each modality's `[invariant, specific]` representation
/// against all four latent variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcorReport {
    pub cells: Vec<DcorCell>,
}

impl DcorReport {
    pub fn get(&self, modality: Modality, variable: LatentVariable) -> Option<&DcorCell> {
        self.cells
            .iter()
            .find(|c| c.modality == modality.index() && c.variable == variable)
    }

    /// Renders the report as standalone CSV, one line per cell, with the
    /// run context (`mode`, `s`, `seed`) repeated on every line:
    /// `mode,s,seed,modality,variable,dcor,target_kind,n`.
    pub fn to_csv(&self, mode: &str, s: f64, seed: u64) -> String {
        let mut out = String::from("mode,s,seed,modality,variable,dcor,target_kind,n\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{mode},{s},{seed},{},{},{},{},{}\n",
                c.modality,
                c.variable.name(),
                c.dcor,
                c.kind.name(),
                c.n
            ));
        }
        out
    }
}

/// Squared Euclidean distance between two equally long slices.
#[inline]
fn dist(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (a, b) in x.iter().zip(y) {
        let d = a - b;
        acc += d * d;
    }
    acc.sqrt()
}

struct Centering {
    /// Row sums of the pairwise distance matrix.
    row_sums: Vec<f64>,
    /// Grand sum of all entries.
    total: f64,
}

/// One pass over the strict upper triangle, accumulating row and grand sums
/// (the diagonal is zero). Fixed iteration order keeps this deterministic.
fn distance_sums(data: &[f64], n: usize, p: usize) -> Centering {
    let mut row_sums = vec![0.0; n];
    for j in 0..n {
        let xj = &data[j * p..(j + 1) * p];
        let mut row_acc = 0.0;
        for k in j + 1..n {
            let d = dist(xj, &data[k * p..(k + 1) * p]);
            row_acc += d;
            row_sums[k] += d;
        }
        row_sums[j] += row_acc;
    }
    let total = row_sums.iter().sum();
    Centering { row_sums, total }
}

fn standardize(view: ArrayView2<'_, f64>, name: &'static str) -> Result<(Vec<f64>, usize, usize)> {
    let (n, p) = view.dim();
    if p == 0 {
        return Err(Error::InvalidConfig(format!(
            "distance_correlation: {name} has zero columns"
        )));
    }
    let owned = view.to_owned();
    let data = owned.into_raw_vec_and_offset().0;
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("distance_correlation: {name}")));
    }
    Ok((data, n, p))
}

/// Distance correlation (the V-statistic form) between two samples of `n`
/// paired observations.
///
/// Pairwise Euclidean distance matrices are double-centered (row mean,
/// column mean, grand mean); the squared distance covariance is the mean
/// elementwise product, normalized by the geometric mean of the two
/// distance variances. Returns a value in `[0, 1]`, with 0 by convention
/// when either sample is constant. Distances are recomputed on the fly in
/// two passes, so memory stays `O(n)` rather than `O(n²)`.
pub fn distance_correlation(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<f64> {
    let (n_a, _) = a.dim();
    let (n_b, _) = b.dim();
    if n_a != n_b {
        return Err(Error::ShapeMismatch {
            context: "distance_correlation row counts",
            expected: n_a,
            got: n_b,
        });
    }
    let n = n_a;
    if n < 4 {
        return Err(Error::InvalidConfig(format!(
            "distance_correlation needs n >= 4 samples, got {n}"
        )));
    }
    let (da, _, pa) = standardize(a, "first argument")?;
    let (db, _, pb) = standardize(b, "second argument")?;

    let ca = distance_sums(&da, n, pa);
    let cb = distance_sums(&db, n, pb);
    let nf = n as f64;
    let mean_a = ca.total / (nf * nf);
    let mean_b = cb.total / (nf * nf);

    // Second pass: accumulate the three double-centered inner products.
    // Off-diagonal entries are symmetric (counted twice); diagonal entries
    // have zero raw distance but nonzero centered value.
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for j in 0..n {
        let xj = &da[j * pa..(j + 1) * pa];
        let yj = &db[j * pb..(j + 1) * pb];
        let (mut cov_j, mut var_a_j, mut var_b_j) = (0.0, 0.0, 0.0);
        for k in j + 1..n {
            let ajk = dist(xj, &da[k * pa..(k + 1) * pa])
                - (ca.row_sums[j] + ca.row_sums[k]) / nf
                + mean_a;
            let bjk = dist(yj, &db[k * pb..(k + 1) * pb])
                - (cb.row_sums[j] + cb.row_sums[k]) / nf
                + mean_b;
            cov_j += ajk * bjk;
            var_a_j += ajk * ajk;
            var_b_j += bjk * bjk;
        }
        let ajj = mean_a - 2.0 * ca.row_sums[j] / nf;
        let bjj = mean_b - 2.0 * cb.row_sums[j] / nf;
        cov += 2.0 * cov_j + ajj * bjj;
        var_a += 2.0 * var_a_j + ajj * ajj;
        var_b += 2.0 * var_b_j + bjj * bjj;
    }
    // The 1/n² normalizations cancel in the ratio.
    if var_a <= 0.0 || var_b <= 0.0 {
        return Ok(0.0);
    }
    let r2 = cov / (var_a * var_b).sqrt();
    Ok(r2.max(0.0).sqrt().min(1.0))
}

/// Computes distance correlations between each modality's extracted
/// `[invariant, specific]` representation and all four latent variables.
///
/// Samples always retain their latent draw, so targets are available for
/// any dataset produced by the generator or loaded from disk. Cell order:
/// modality 1 then 2, variables in their block order.
pub fn dcor_report(
    model: &DecompModel,
    eval: &[MultimodalSample],
    layout: &ModalityLayout,
    kind: TargetKind,
) -> Result<DcorReport> {
    if eval.is_empty() {
        return Err(Error::EmptyInput("dcor_report evaluation set".into()));
    }
    let n = eval.len();
    let arch = model.arch();
    let rep_width = arch.d_zi + arch.d_zs;
    let mut cells = Vec::with_capacity(8);
    for modality in Modality::BOTH {
        let mut rep_flat = Vec::with_capacity(n * rep_width);
        for sample in eval {
            let x = match modality {
                Modality::M1 => &sample.x1,
                Modality::M2 => &sample.x2,
            };
            let (inv, spec) = extract(model, x, modality)?;
            rep_flat.extend_from_slice(&inv);
            rep_flat.extend_from_slice(&spec);
        }
        let rep = Array2::from_shape_vec((n, rep_width), rep_flat)
            .expect("representation matrix shape");
        for variable in LatentVariable::ALL {
            let target = match kind {
                TargetKind::LatentScalar => {
                    let flat: Vec<f64> = eval.iter().map(|s| s.latents.value(variable)).collect();
                    Array2::from_shape_vec((n, 1), flat).expect("target shape")
                }
                TargetKind::ModalitySlice => {
                    let slice = layout.variable_slice(variable);
                    let mut flat = Vec::with_capacity(n * slice.len());
                    for sample in eval {
                        let x = match modality {
                            Modality::M1 => &sample.x1,
                            Modality::M2 => &sample.x2,
                        };
                        flat.extend_from_slice(&x[slice.clone()]);
                    }
                    Array2::from_shape_vec((n, slice.len()), flat).expect("target shape")
                }
            };
            let dcor = distance_correlation(rep.view(), target.view())?;
            cells.push(DcorCell {
                modality: modality.index(),
                variable,
                dcor,
                n,
                kind,
            });
        }
    }
    Ok(DcorReport { cells })
}

/// Observational estimate of how much a binary cause moves a binary
/// outcome: `P̂(Y=1 | Z=z_val) − P̂(Y=1 | Z=z_bar_val)` from empirical
/// conditional frequencies.
pub fn estimate_pns_observational(z: &[u8], y: &[u8], z_val: u8, z_bar_val: u8) -> Result<f64> {
    if z.len() != y.len() {
        return Err(Error::ShapeMismatch {
            context: "estimate_pns_observational lengths",
            expected: z.len(),
            got: y.len(),
        });
    }
    if z.is_empty() {
        return Err(Error::EmptyInput("estimate_pns_observational sequences".into()));
    }
    if z_val == z_bar_val {
        return Err(Error::InvalidConfig(
            "estimate_pns_observational: the two conditioning values must differ".into(),
        ));
    }
    for (name, seq) in [("z", z), ("y", y)] {
        if seq.iter().any(|&v| v > 1) {
            return Err(Error::InvalidConfig(format!(
                "estimate_pns_observational: sequence {name} holds a value outside {{0,1}}"
            )));
        }
    }
    let mut count = [0usize; 2]; // [z_bar_val cell, z_val cell]
    let mut hits = [0usize; 2];
    for (&zi, &yi) in z.iter().zip(y) {
        let cell = if zi == z_val {
            1
        } else if zi == z_bar_val {
            0
        } else {
            continue;
        };
        count[cell] += 1;
        hits[cell] += usize::from(yi == 1);
    }
    for (cell, value) in [(1usize, z_val), (0usize, z_bar_val)] {
        if count[cell] == 0 {
            return Err(Error::EmptyCell(format!(
                "no observations with z = {value}; cannot condition on it"
            )));
        }
    }
    Ok(hits[1] as f64 / count[1] as f64 - hits[0] as f64 / count[0] as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::ParamSet;
    use crate::model::{init_model, ArchConfig, NetworkId};
    use crate::seeds;
    use crate::synthgen::{generate_dataset, SynthConfig};
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Independent textbook implementation: materializes both full distance
    /// matrices, centers them with explicit row/column/grand means, and
    /// takes plain means of the products. O(n²) memory, for small n only.
    fn dcor_naive(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        let n = a.nrows();
        let full = |m: &Array2<f64>| -> Vec<Vec<f64>> {
            let mut d = vec![vec![0.0; n]; n];
            for j in 0..n {
                for k in 0..n {
                    let mut s = 0.0;
                    for c in 0..m.ncols() {
                        s += (m[[j, c]] - m[[k, c]]).powi(2);
                    }
                    d[j][k] = s.sqrt();
                }
            }
            d
        };
        let center = |d: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            let nf = n as f64;
            let row: Vec<f64> = d.iter().map(|r| r.iter().sum::<f64>() / nf).collect();
            let grand = row.iter().sum::<f64>() / nf;
            (0..n)
                .map(|j| (0..n).map(|k| d[j][k] - row[j] - row[k] + grand).collect())
                .collect()
        };
        let ca = center(&full(a));
        let cb = center(&full(b));
        let mean_prod = |x: &Vec<Vec<f64>>, y: &Vec<Vec<f64>>| -> f64 {
            let mut s = 0.0;
            for j in 0..n {
                for k in 0..n {
                    s += x[j][k] * y[j][k];
                }
            }
            s / (n * n) as f64
        };
        let cov = mean_prod(&ca, &cb);
        let va = mean_prod(&ca, &ca);
        let vb = mean_prod(&cb, &cb);
        if va <= 0.0 || vb <= 0.0 {
            return 0.0;
        }
        (cov / (va * vb).sqrt()).max(0.0).sqrt()
    }

    fn random_matrix(rng: &mut impl Rng, n: usize, p: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, p), |_| rng.random_range(-3.0..3.0))
    }

    #[test]
    fn self_correlation_is_one() {
        let mut rng = seeds::stream_rng(201, 0);
        let a = random_matrix(&mut rng, 200, 3);
        let d = distance_correlation(a.view(), a.view()).unwrap();
        assert!((d - 1.0).abs() < 1e-12, "self correlation {d}");
    }

    #[test]
    fn constant_sample_gives_zero() {
        let a = Array2::from_elem((50, 2), 3.7);
        let mut rng = seeds::stream_rng(202, 0);
        let b = random_matrix(&mut rng, 50, 2);
        assert_eq!(distance_correlation(a.view(), b.view()).unwrap(), 0.0);
        assert_eq!(distance_correlation(b.view(), a.view()).unwrap(), 0.0);
    }

    #[test]
    fn four_point_ramp_matches_naive() {
        let a = Array2::from_shape_vec((4, 1), vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let fast = distance_correlation(a.view(), a.view()).unwrap();
        let slow = dcor_naive(&a, &a);
        assert!((fast - slow).abs() < 1e-12);
        assert!((fast - 1.0).abs() < 1e-12);
    }

    #[test]
    fn streaming_matches_naive_on_random_instances() {
        let mut rng = seeds::stream_rng(203, 0);
        for trial in 0..25 {
            let n = rng.random_range(4..64);
            let p = rng.random_range(1..4);
            let q = rng.random_range(1..4);
            let a = random_matrix(&mut rng, n, p);
            let b = random_matrix(&mut rng, n, q);
            let fast = distance_correlation(a.view(), b.view()).unwrap();
            let slow = dcor_naive(&a, &b);
            assert!(
                (fast - slow).abs() < 1e-10,
                "trial {trial}: streaming {fast} vs naive {slow}"
            );
        }
    }

    #[test]
    fn symmetric_in_its_arguments() {
        let mut rng = seeds::stream_rng(204, 0);
        let a = random_matrix(&mut rng, 60, 2);
        let b = random_matrix(&mut rng, 60, 3);
        let ab = distance_correlation(a.view(), b.view()).unwrap();
        let ba = distance_correlation(b.view(), a.view()).unwrap();
        assert!((ab - ba).abs() < 1e-12);
    }

    #[test]
    fn invariant_under_translation_and_positive_scaling() {
        let mut rng = seeds::stream_rng(205, 0);
        let a = random_matrix(&mut rng, 80, 3);
        let b = random_matrix(&mut rng, 80, 2);
        let reference = distance_correlation(a.view(), b.view()).unwrap();
        let shifted = a.mapv(|v| v + 17.5);
        let scaled = b.mapv(|v| v * 4.25);
        let d1 = distance_correlation(shifted.view(), b.view()).unwrap();
        let d2 = distance_correlation(a.view(), scaled.view()).unwrap();
        assert!((d1 - reference).abs() < 1e-9, "translation moved dcor: {d1} vs {reference}");
        assert!((d2 - reference).abs() < 1e-9, "scaling moved dcor: {d2} vs {reference}");
    }

    #[test]
    fn independent_normals_have_small_correlation() {
        let mut rng = seeds::stream_rng(206, 0);
        let n = 1000;
        let a = Array2::from_shape_fn((n, 1), |_| StandardNormal.sample(&mut rng));
        let b = Array2::from_shape_fn((n, 1), |_| StandardNormal.sample(&mut rng));
        let d = distance_correlation(a.view(), b.view()).unwrap();
        assert!(d < 0.08, "independent null too high: {d}");
    }

    #[test]
    fn rejects_degenerate_inputs() {
        let a = Array2::from_elem((3, 2), 0.0);
        assert!(distance_correlation(a.view(), a.view()).is_err());
        let a = Array2::from_elem((10, 2), 0.0);
        let b = Array2::from_elem((11, 2), 0.0);
        assert!(distance_correlation(a.view(), b.view()).is_err());
        let mut c = Array2::from_elem((10, 2), 0.5);
        c[[3, 1]] = f64::NAN;
        let d = Array2::from_elem((10, 2), 0.5);
        assert!(distance_correlation(c.view(), d.view()).is_err());
    }

    #[test]
    fn report_on_untrained_model_is_well_formed() {
        let data = generate_dataset(&SynthConfig::new(0.3, 200, 5)).unwrap();
        let layout = ModalityLayout::new(7).unwrap();
        let model = init_model(&ArchConfig::default(), 3).unwrap();
        for kind in [TargetKind::ModalitySlice, TargetKind::LatentScalar] {
            let report = dcor_report(&model, &data, &layout, kind).unwrap();
            assert_eq!(report.cells.len(), 8);
            for cell in &report.cells {
                assert!(cell.dcor.is_finite());
                assert!((0.0..=1.0).contains(&cell.dcor), "dcor {}", cell.dcor);
                assert_eq!(cell.n, 200);
                assert_eq!(cell.kind, kind);
            }
            assert!(report.get(Modality::M1, LatentVariable::Sn).is_some());
        }
    }

    /// Hand-built encoder that copies the first-variable slice through a
    /// ReLU pair (relu(x) − relu(−x) = x), making the invariant
    /// representation literally equal that slice.
    fn slice_copy_model() -> DecompModel {
        let arch = ArchConfig {
            input_dim: 20,
            d_zi: 5,
            d_zs: 2,
            encoder_hidden: vec![10],
            predictor_hidden: vec![4],
        };
        let mut model = init_model(&arch, 1).unwrap();
        let spec = NetworkId::EncInv.spec(&arch);
        let mut params = ParamSet::zeros(&spec);
        {
            let l0 = params.layer_mut(0); // 10 x 20
            for i in 0..5 {
                l0.weights[i * 20 + i] = 1.0;
                l0.weights[(i + 5) * 20 + i] = -1.0;
            }
        }
        {
            let l1 = params.layer_mut(1); // 5 x 10
            for i in 0..5 {
                l1.weights[i * 10 + i] = 1.0;
                l1.weights[i * 10 + i + 5] = -1.0;
            }
        }
        *model.net_mut(NetworkId::EncInv) = params;
        for m in Modality::BOTH {
            let id = NetworkId::EncSpec(m);
            *model.net_mut(id) = ParamSet::zeros(&id.spec(&arch));
        }
        model
    }

    #[test]
    fn slice_copying_encoder_saturates_its_variable() {
        let data = generate_dataset(&SynthConfig::new(0.0, 300, 9)).unwrap();
        let layout = ModalityLayout::new(7).unwrap();
        let model = slice_copy_model();
        let report = dcor_report(&model, &data, &layout, TargetKind::ModalitySlice).unwrap();
        let sn = report.get(Modality::M1, LatentVariable::Sn).unwrap().dcor;
        let sc = report.get(Modality::M1, LatentVariable::Sc).unwrap().dcor;
        assert!(sn > 0.999, "copied slice should self-correlate: {sn}");
        assert!(sn > sc, "label-driving slice should beat the spurious one: {sn} vs {sc}");
    }

    #[test]
    fn pns_perfect_determination_is_one() {
        let z: Vec<u8> = (0..100).map(|i| (i % 2) as u8).collect();
        assert_eq!(estimate_pns_observational(&z, &z, 1, 0).unwrap(), 1.0);
    }

    #[test]
    fn pns_independent_cause_is_near_zero() {
        let mut rng = seeds::stream_rng(207, 0);
        let n = 10_000;
        let z: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.5))).collect();
        let y: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.5))).collect();
        let est = estimate_pns_observational(&z, &y, 1, 0).unwrap();
        assert!(est.abs() < 0.03, "independent estimate {est}");
    }

    #[test]
    fn pns_generator_source_matches_analytic_value() {
        // The label copies the source except for a 0.15 flip, so the
        // difference of conditionals is (1 - 0.15) - 0.15 = 0.70.
        let data = generate_dataset(&SynthConfig::new(0.3, 40_000, 11)).unwrap();
        let z: Vec<u8> = data.iter().map(|s| s.latents.sn).collect();
        let y: Vec<u8> = data.iter().map(|s| s.y).collect();
        let est = estimate_pns_observational(&z, &y, 1, 0).unwrap();
        assert!((est - 0.70).abs() < 0.03, "estimate {est}");
    }

    #[test]
    fn pns_estimator_error_shrinks_with_sample_size() {
        let sizes = [400usize, 40_000];
        let mut errors = Vec::new();
        for (i, &n) in sizes.iter().enumerate() {
            let data = generate_dataset(&SynthConfig::new(0.0, n, 13 + i as u64)).unwrap();
            let z: Vec<u8> = data.iter().map(|s| s.latents.sn).collect();
            let y: Vec<u8> = data.iter().map(|s| s.y).collect();
            errors.push((estimate_pns_observational(&z, &y, 1, 0).unwrap() - 0.70).abs());
        }
        // 100x the samples: expect roughly 10x less error; allow slack.
        assert!(errors[1] < errors[0], "error did not shrink: {errors:?}");
    }

    #[test]
    fn pns_rejects_bad_inputs() {
        assert!(estimate_pns_observational(&[0, 1], &[0], 1, 0).is_err());
        assert!(estimate_pns_observational(&[], &[], 1, 0).is_err());
        assert!(estimate_pns_observational(&[0, 1], &[0, 1], 1, 1).is_err());
        assert!(estimate_pns_observational(&[0, 2], &[0, 1], 1, 0).is_err());
        // Conditioning value absent from the data.
        let err = estimate_pns_observational(&[0, 0, 0], &[0, 1, 0], 1, 0).unwrap_err();
        assert!(matches!(err, Error::EmptyCell(_)));
    }

    #[test]
    fn report_csv_lists_context_and_cells() {
        let report = DcorReport {
            cells: vec![
                DcorCell {
                    modality: 1,
                    variable: LatentVariable::Sn,
                    dcor: 0.5,
                    n: 64,
                    kind: TargetKind::ModalitySlice,
                },
                DcorCell {
                    modality: 2,
                    variable: LatentVariable::Sc,
                    dcor: 0.25,
                    n: 64,
                    kind: TargetKind::LatentScalar,
                },
            ],
        };
        let csv = report.to_csv("net", 0.3, 7);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines,
            vec![
                "mode,s,seed,modality,variable,dcor,target_kind,n",
                "net,0.3,7,1,sn,0.5,modality_slice,64",
                "net,0.3,7,2,sc,0.25,latent_scalar,64",
            ]
        );
    }
}
