#![allow(dead_code)]

use coggen::math::linalg::SmallMatrix;

/// Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    eig.sort_by(|x, y| y.total_cmp(x));
    eig
}

/// Singular values via the Gram matrix `m^H m = A + iB`, embedded as the real
/// symmetric `[[A, -B], [B, A]]` whose spectrum repeats each eigenvalue twice.
pub fn gram_oracle(m: &SmallMatrix) -> Vec<f64> {
    hermitian_eigenvalues(&m.adjoint().matmul(m).unwrap())
        .iter()
        .map(|&l| l.max(0.0).sqrt())
        .collect()
}

/// Eigenvalues (descending) of a Hermitian matrix through the real embedding.
pub fn hermitian_eigenvalues(gram: &SmallMatrix) -> Vec<f64> {
    let n = gram.cols();
    let mut big = vec![vec![0.0; 2 * n]; 2 * n];
    for i in 0..n {
        for j in 0..n {
            let g = gram[(i, j)];
            big[i][j] = g.re;
            big[i + n][j + n] = g.re;
            big[i][j + n] = -g.im;
            big[i + n][j] = g.im;
        }
    }
    jacobi_eigenvalues(big).into_iter().step_by(2).collect()
}

