//! Shared helpers for the integration suites: an independently coded
//! distance-correlation oracle and small dataset utilities.

#![allow(dead_code)]

/// Textbook distance correlation for small `n`: materializes both full
/// pairwise distance matrices, double-centers them with explicitly computed
/// row, column, and grand means, and averages elementwise products. This is
/// deliberately a different construction from the library's streaming
/// implementation so the two can check each other.
pub fn dcor_oracle(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    assert_eq!(a.len(), b.len(), "paired samples");
    let n = a.len();
    assert!(n >= 4, "oracle needs n >= 4");

    fn distances(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = x.len();
        let mut d = vec![vec![0.0; n]; n];
        for j in 0..n {
            for k in 0..n {
                d[j][k] = x[j]
                    .iter()
                    .zip(&x[k])
                    .map(|(p, q)| (p - q) * (p - q))
                    .sum::<f64>()
                    .sqrt();
            }
        }
        d
    }

    fn double_center(d: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = d.len();
        let nf = n as f64;
        let row_means: Vec<f64> = d.iter().map(|r| r.iter().sum::<f64>() / nf).collect();
        let col_means: Vec<f64> = (0..n)
            .map(|k| d.iter().map(|r| r[k]).sum::<f64>() / nf)
            .collect();
        let grand = row_means.iter().sum::<f64>() / nf;
        (0..n)
            .map(|j| {
                (0..n)
                    .map(|k| d[j][k] - row_means[j] - col_means[k] + grand)
                    .collect()
            })
            .collect()
    }

    fn mean_product(x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
        let n = x.len();
        let mut sum = 0.0;
        for j in 0..n {
            for k in 0..n {
                sum += x[j][k] * y[j][k];
            }
        }
        sum / (n * n) as f64
    }

    let ca = double_center(&distances(a));
    let cb = double_center(&distances(b));
    let cov = mean_product(&ca, &cb);
    let var_a = mean_product(&ca, &ca);
    let var_b = mean_product(&cb, &cb);
    if var_a <= 0.0 || var_b <= 0.0 {
        return 0.0;
    }
    (cov / (var_a * var_b).sqrt()).max(0.0).sqrt()
}

/// Converts a row-major ndarray matrix into the oracle's nested-vec form.
pub fn to_rows(m: &ndarray::Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}
