//! Oracles that share no code with the library solvers.
//!
//! The default `paper` test field is re-derived here from its closed form, and every
//! implicit step is solved as one monolithic nonlinear system by damped
//! Newton iteration with a finite-difference Jacobian.

#![allow(dead_code)]

pub type V2 = [f64; 2];

pub fn perp(z: V2) -> V2 {
    [-z[1], z[0]]
}

pub fn norm(z: &[f64]) -> f64 {
    z.iter().map(|c| c * c).sum::<f64>().sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `b = 10/√(100 - r²)`, `φ = r²/2`.
pub mod paper {
    use super::V2;

    pub fn b(x: V2) -> f64 {
        10.0 / (100.0 - x[0] * x[0] - x[1] * x[1]).sqrt()
    }

    pub fn phi(x: V2) -> f64 {
        0.5 * (x[0] * x[0] + x[1] * x[1])
    }

    pub fn electric(x: V2) -> V2 {
        [-x[0], -x[1]]
    }

    /// `∇(1/b) = -x / (10 √(100 - r²))`.
    pub fn grad_inv_b(x: V2) -> V2 {
        let s = (100.0 - x[0] * x[0] - x[1] * x[1]).sqrt();
        [-x[0] / (10.0 * s), -x[1] / (10.0 * s)]
    }
}

/// Gaussian elimination with partial pivoting on a dense square system.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col] == 0.0 {
            return None;
        }
        a.swap(col, piv);
        rhs.swap(col, piv);
        let (top, rest) = a.split_at_mut(col + 1);
        let pivot_row = &top[col];
        for (i, row) in rest.iter_mut().enumerate() {
            let f = row[col] / pivot_row[col];
            for (r, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                *r -= f * p;
            }
            rhs[col + 1 + i] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (rhs[row] - s) / a[row][row];
    }
    Some(x)
}

/// Damped Newton on `F(z) = 0` with a central-difference Jacobian. Returns
/// the root once `‖F‖ ≤ tol` or the Newton update stalls below `tol`.
pub fn newton(f: impl Fn(&[f64]) -> Vec<f64>, z0: Vec<f64>, tol: f64) -> Option<Vec<f64>> {
    let n = z0.len();
    let mut z = z0;
    let mut fz = f(&z);
    for _ in 0..100 {
        let fnorm = norm(&fz);
        if fnorm <= tol {
            return Some(z);
        }
        let mut jac = vec![vec![0.0; n]; n];
        for j in 0..n {
            let h = 1e-7 * z[j].abs().max(1.0);
            let (mut zp, mut zm) = (z.clone(), z.clone());
            zp[j] += h;
            zm[j] -= h;
            let (fp, fm) = (f(&zp), f(&zm));
            for i in 0..n {
                jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let step = solve_dense(jac, fz.iter().map(|v| -v).collect())?;
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = z.iter().zip(&step).map(|(a, s)| a + t * s).collect();
            let ft = f(&trial);
            if ft.iter().all(|v| v.is_finite()) && norm(&ft) < fnorm {
                z = trial;
                fz = ft;
                break;
            }
            t *= 0.5;
            if t < 1e-6 {
                // no decrease possible: at the roundoff floor
                return (norm(&step) <= tol * 1e3 * norm(&z).max(1.0)).then_some(z);
            }
        }
        if norm(&step) * t <= tol * norm(&z).max(1.0) {
            return Some(z);
        }
    }
    None
}

/// One step of the augmented scheme for the `paper` test field, solved for
/// `(x', e', w')` simultaneously from the three midpoint equations.
pub fn ap_step_oracle(x: V2, e: f64, w: V2, eps: f64, dt: f64) -> Option<(V2, f64, V2)> {
    let lambda = dt / (eps * eps);
    let f = |z: &[f64]| -> Vec<f64> {
        let xp = [z[0], z[1]];
        let (ep, wp) = (z[2], [z[3], z[4]]);
        let xb = [0.5 * (x[0] + xp[0]), 0.5 * (x[1] + xp[1])];
        let wb = [0.5 * (w[0] + wp[0]), 0.5 * (w[1] + wp[1])];
        let eb = 0.5 * (e + ep);
        let ghost = eb - 0.5 * (wb[0] * wb[0] + wb[1] * wb[1]);
        let g = perp(paper::grad_inv_b(xb));
        let el = paper::electric(xb);
        let bb = paper::b(xb);
        let wbp = perp(wb);
        vec![
            xp[0] - x[0] - dt * (wb[0] / eps - ghost * g[0]),
            xp[1] - x[1] - dt * (wb[1] / eps - ghost * g[1]),
            ep - e + paper::phi(xp) - paper::phi(x),
            (wp[0] - w[0]) - (dt / eps) * el[0] + lambda * bb * wbp[0],
            (wp[1] - w[1]) - (dt / eps) * el[1] + lambda * bb * wbp[1],
        ]
    };
    // frozen-coefficient start: (I + a J) u = r with a = ½λb(x)
    let a = 0.5 * lambda * paper::b(x);
    let el = paper::electric(x);
    let r = [w[0] + 0.5 * eps * lambda * el[0], w[1] + 0.5 * eps * lambda * el[1]];
    let wb = solve_dense(vec![vec![1.0, -a], vec![a, 1.0]], r.to_vec())?;
    let z0 = vec![
        x[0] + dt * wb[0] / eps,
        x[1] + dt * wb[1] / eps,
        e,
        2.0 * wb[0] - w[0],
        2.0 * wb[1] - w[1],
    ];
    let z = newton(f, z0, 1e-14)?;
    Some(([z[0], z[1]], z[2], [z[3], z[4]]))
}

/// One step of the limit scheme for the `paper` test field.
pub fn limit_step_oracle(y: V2, g: f64, dt: f64) -> Option<(V2, f64)> {
    let f = |z: &[f64]| -> Vec<f64> {
        let yp = [z[0], z[1]];
        let yb = [0.5 * (y[0] + yp[0]), 0.5 * (y[1] + yp[1])];
        let gb = g - 0.5 * (paper::phi(yp) - paper::phi(y));
        let ep = perp(paper::electric(yb));
        let gp = perp(paper::grad_inv_b(yb));
        let bb = paper::b(yb);
        vec![
            yp[0] - y[0] + dt * (ep[0] / bb + gb * gp[0]),
            yp[1] - y[1] + dt * (ep[1] / bb + gb * gp[1]),
        ]
    };
    let z = newton(f, y.to_vec(), 1e-14)?;
    let yp = [z[0], z[1]];
    Some((yp, g - (paper::phi(yp) - paper::phi(y))))
}

/// Exact limit flow for the `paper` test field: rigid rotation about the origin
/// with `r` and `g` constant.
pub fn limit_exact(y0: V2, g0: f64, t: f64) -> V2 {
    let r2 = y0[0] * y0[0] + y0[1] * y0[1];
    let s = (100.0 - r2).sqrt();
    let omega = s / 10.0 + g0 / (10.0 * s);
    let (c, sn) = ((omega * t).cos(), (omega * t).sin());
    // counterclockwise rotation: ẏ = ω y⊥
    [c * y0[0] - sn * y0[1], sn * y0[0] + c * y0[1]]
}
