//! Small dense least-squares machinery: a pivoted Gaussian solve and a
//! Levenberg-Marquardt driver with forward-difference Jacobians, sized for the
//! handful-of-parameters fits used by the calibration pipeline.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("singular normal equations")]
    Singular,
    #[error("residual function returned non-finite values")]
    NonFinite,
    #[error("did not converge within {0} iterations")]
    NoConvergence(usize),
}

/// Solve A x = b in place (partial pivoting); A is row-major n×n.
pub fn solve_linear(a: &mut [Vec<f64>], b: &mut [f64]) -> Result<Vec<f64>, FitError> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col].abs() < 1e-300 {
            return Err(FitError::Singular);
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Ok(x)
}

/// Invert a symmetric positive (semi)definite matrix via the linear solver.
pub fn invert(m: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, FitError> {
    let n = m.len();
    let mut out = vec![vec![0.0; n]; n];
    for col in 0..n {
        let mut a: Vec<Vec<f64>> = m.to_vec();
        let mut e = vec![0.0; n];
        e[col] = 1.0;
        let x = solve_linear(&mut a, &mut e)?;
        for row in 0..n {
            out[row][col] = x[row];
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: Vec<f64>,
    /// Inverse of JᵀJ at the solution (scale by the residual variance to get
    /// the parameter covariance).
    pub jtj_inverse: Vec<Vec<f64>>,
    pub residual_sum_squares: f64,
    pub iterations: usize,
}

/// Minimize ‖r(p)‖² by Levenberg-Marquardt with a numerical Jacobian.
///
/// `scales` sets the finite-difference step per parameter (absolute).
pub fn levenberg_marquardt<R>(
    residuals: R,
    initial: &[f64],
    scales: &[f64],
    max_iterations: usize,
) -> Result<FitResult, FitError>
where
    R: Fn(&[f64]) -> Vec<f64>,
{
    let n = initial.len();
    let mut params = initial.to_vec();
    let mut r = residuals(&params);
    if r.iter().any(|v| !v.is_finite()) {
        return Err(FitError::NonFinite);
    }
    let mut rss: f64 = r.iter().map(|v| v * v).sum();
    let mut lambda = 1e-3;
    let mut jtj_store: Option<Vec<Vec<f64>>> = None;

    for iter in 0..max_iterations {
        // Forward-difference Jacobian.
        let mut jac: Vec<Vec<f64>> = Vec::with_capacity(n);
        for p in 0..n {
            let step = scales[p].max(1e-300);
            let mut shifted = params.clone();
            shifted[p] += step;
            let rs = residuals(&shifted);
            if rs.len() != r.len() {
                return Err(FitError::NonFinite);
            }
            jac.push(
                rs.iter()
                    .zip(&r)
                    .map(|(a, b)| (a - b) / step)
                    .collect::<Vec<f64>>(),
            );
        }

        let mut jtj = vec![vec![0.0; n]; n];
        let mut jtr = vec![0.0; n];
        for i in 0..n {
            for j in i..n {
                let dot: f64 = jac[i].iter().zip(&jac[j]).map(|(a, b)| a * b).sum();
                jtj[i][j] = dot;
                jtj[j][i] = dot;
            }
            jtr[i] = jac[i].iter().zip(&r).map(|(a, b)| a * b).sum();
        }
        jtj_store = Some(jtj.clone());

        let mut improved = false;
        for _ in 0..12 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[i][i] += lambda * jtj[i][i].max(1e-300);
            }
            let mut rhs: Vec<f64> = jtr.iter().map(|v| -v).collect();
            let Ok(delta) = solve_linear(&mut a, &mut rhs) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = params.iter().zip(&delta).map(|(p, d)| p + d).collect();
            let rt = residuals(&trial);
            let rss_t: f64 = rt.iter().map(|v| v * v).sum();
            if rss_t.is_finite() && rss_t <= rss {
                let rel_drop = (rss - rss_t) / rss.max(1e-300);
                let small_step = delta
                    .iter()
                    .zip(&params)
                    .all(|(d, p)| d.abs() <= 1e-10 * p.abs().max(1e-12));
                params = trial;
                r = rt;
                rss = rss_t;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                // A tiny relative drop only signals convergence when the step
                // was near-Gauss-Newton (small lambda); heavily damped steps
                // are short regardless of distance from the optimum.
                if (rel_drop < 1e-12 && lambda <= 1e-3) || small_step || rss == 0.0 {
                    let jtj_inverse = invert(jtj_store.as_ref().unwrap())?;
                    return Ok(FitResult {
                        params,
                        jtj_inverse,
                        residual_sum_squares: rss,
                        iterations: iter + 1,
                    });
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // Stuck at a (local) minimum: accept current point.
            let jtj_inverse = invert(jtj_store.as_ref().unwrap())?;
            return Ok(FitResult {
                params,
                jtj_inverse,
                residual_sum_squares: rss,
                iterations: iter + 1,
            });
        }
    }
    let jtj_inverse = invert(&jtj_store.ok_or(FitError::NoConvergence(max_iterations))?)?;
    Ok(FitResult {
        params,
        jtj_inverse,
        residual_sum_squares: rss,
        iterations: max_iterations,
    })
}

/// Ordinary least squares for y = Σ c_k basis_k(x); returns coefficients.
pub fn linear_least_squares(
    design: &[Vec<f64>],
    y: &[f64],
) -> Result<Vec<f64>, FitError> {
    let n = design.len();
    let mut jtj = vec![vec![0.0; n]; n];
    let mut jty = vec![0.0; n];
    for i in 0..n {
        for j in i..n {
            let dot: f64 = design[i].iter().zip(&design[j]).map(|(a, b)| a * b).sum();
            jtj[i][j] = dot;
            jtj[j][i] = dot;
        }
        jty[i] = design[i].iter().zip(y).map(|(a, b)| a * b).sum();
    }
    solve_linear(&mut jtj, &mut jty)
}
