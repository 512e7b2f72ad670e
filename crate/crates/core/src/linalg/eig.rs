//! Nonsymmetric dense eigensolver: Householder reduction to Hessenberg form
//! followed by the shifted double-step QR iteration, after the public-domain
//! JAMA routines `orthes` and `hqr2`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Per-eigenvalue iteration budget before giving up.
const MAX_SWEEPS_PER_ROOT: usize = 200;

/// Eigenvalues in the order produced by the QR iteration, with optional
/// unit-norm eigenvectors (`vectors[k]` belongs to `values[k]`).
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<Complex64>,
    pub vectors: Option<Vec<Vec<Complex64>>>,
}

pub fn dense_eig(m: &DenseMatrix, want_vectors: bool) -> Result<Eigen> {
    if !m.is_square() {
        return Err(Error::invalid("eigenproblem needs a square matrix"));
    }
    let n = m.rows();
    if n == 0 {
        return Ok(Eigen {
            values: vec![],
            vectors: want_vectors.then(Vec::new),
        });
    }
    if m.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let mut h: Vec<Vec<f64>> = (0..n).map(|i| m.row(i).to_vec()).collect();
    let mut v = vec![vec![0.0; n]; n];
    orthes(&mut h, &mut v);
    let (d, e) = hqr2(&mut h, &mut v, want_vectors)?;
    let values: Vec<Complex64> = d.iter().zip(&e).map(|(&r, &i)| Complex64::new(r, i)).collect();
    let vectors = want_vectors.then(|| {
        let mut out = Vec::with_capacity(n);
        let mut j = 0;
        while j < n {
            if e[j] == 0.0 {
                out.push((0..n).map(|i| Complex64::new(v[i][j], 0.0)).collect());
                j += 1;
            } else {
                // columns j, j+1 hold re/im parts of the vector for d[j] + i e[j]
                let u: Vec<Complex64> = (0..n).map(|i| Complex64::new(v[i][j], v[i][j + 1])).collect();
                out.push(u.clone());
                out.push(u.iter().map(|z| z.conj()).collect());
                j += 2;
            }
        }
        for u in &mut out {
            let nrm = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if nrm > 0.0 {
                for z in u.iter_mut() {
                    *z /= nrm;
                }
            }
        }
        out
    });
    Ok(Eigen { values, vectors })
}

fn orthes(h: &mut [Vec<f64>], v: &mut [Vec<f64>]) {
    let n = h.len();
    let low = 0;
    let high = n - 1;
    let mut ort = vec![0.0; n];

    for m in low + 1..high {
        let scale: f64 = (m..=high).map(|i| h[i][m - 1].abs()).sum();
        if scale != 0.0 {
            let mut hh = 0.0;
            for i in (m..=high).rev() {
                ort[i] = h[i][m - 1] / scale;
                hh += ort[i] * ort[i];
            }
            let mut g = hh.sqrt();
            if ort[m] > 0.0 {
                g = -g;
            }
            hh -= ort[m] * g;
            ort[m] -= g;

            for j in m..n {
                let mut f = 0.0;
                for i in (m..=high).rev() {
                    f += ort[i] * h[i][j];
                }
                f /= hh;
                for i in m..=high {
                    h[i][j] -= f * ort[i];
                }
            }
            for row in h.iter_mut().take(high + 1) {
                let mut f = 0.0;
                for j in (m..=high).rev() {
                    f += ort[j] * row[j];
                }
                f /= hh;
                for j in m..=high {
                    row[j] -= f * ort[j];
                }
            }
            ort[m] *= scale;
            h[m][m - 1] = scale * g;
        }
    }

    for (i, row) in v.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = if i == j { 1.0 } else { 0.0 };
        }
    }

    if high < 2 {
        return;
    }
    for m in (low + 1..high).rev() {
        if h[m][m - 1] != 0.0 {
            for i in m + 1..=high {
                ort[i] = h[i][m - 1];
            }
            for j in m..=high {
                let mut g = 0.0;
                for i in m..=high {
                    g += ort[i] * v[i][j];
                }
                // double division avoids possible underflow
                g = (g / ort[m]) / h[m][m - 1];
                for i in m..=high {
                    v[i][j] += g * ort[i];
                }
            }
        }
    }
}

fn cdiv(xr: f64, xi: f64, yr: f64, yi: f64) -> (f64, f64) {
    if yr.abs() > yi.abs() {
        let r = yi / yr;
        let d = yr + r * yi;
        ((xr + r * xi) / d, (xi - r * xr) / d)
    } else {
        let r = yr / yi;
        let d = yi + r * yr;
        ((r * xr + xi) / d, (r * xi - xr) / d)
    }
}

#[allow(clippy::many_single_char_names)]
fn hqr2(h: &mut [Vec<f64>], v: &mut [Vec<f64>], want_vectors: bool) -> Result<(Vec<f64>, Vec<f64>)> {
    let nn = h.len();
    let mut d = vec![0.0; nn];
    let mut e = vec![0.0; nn];
    let mut n = nn as isize - 1;
    let low: isize = 0;
    let high: isize = nn as isize - 1;
    let eps = f64::EPSILON;
    let mut exshift = 0.0;
    let (mut p, mut q, mut r, mut s, mut z) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut t, mut w, mut x, mut y);

    let mut norm = 0.0;
    for i in 0..nn {
        for j in i.saturating_sub(1)..nn {
            norm += h[i][j].abs();
        }
    }

    let mut iter = 0usize;
    let mut total = 0usize;
    macro_rules! hh {
        ($i:expr, $j:expr) => {
            h[($i) as usize][($j) as usize]
        };
    }

    while n >= low {
        let mut l = n;
        while l > low {
            s = hh!(l - 1, l - 1).abs() + hh!(l, l).abs();
            if s == 0.0 {
                s = norm;
            }
            if hh!(l, l - 1).abs() < eps * s || hh!(l, l - 1) == 0.0 {
                break;
            }
            l -= 1;
        }

        if l == n {
            hh!(n, n) += exshift;
            d[n as usize] = hh!(n, n);
            e[n as usize] = 0.0;
            n -= 1;
            iter = 0;
        } else if l == n - 1 {
            w = hh!(n, n - 1) * hh!(n - 1, n);
            p = (hh!(n - 1, n - 1) - hh!(n, n)) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            hh!(n, n) += exshift;
            hh!(n - 1, n - 1) += exshift;
            x = hh!(n, n);

            if q >= 0.0 {
                z = if p >= 0.0 { p + z } else { p - z };
                d[(n - 1) as usize] = x + z;
                d[n as usize] = d[(n - 1) as usize];
                if z != 0.0 {
                    d[n as usize] = x - w / z;
                }
                e[(n - 1) as usize] = 0.0;
                e[n as usize] = 0.0;
                x = hh!(n, n - 1);
                s = x.abs() + z.abs();
                p = x / s;
                q = z / s;
                r = (p * p + q * q).sqrt();
                p /= r;
                q /= r;

                for j in (n - 1) as usize..nn {
                    z = h[(n - 1) as usize][j];
                    h[(n - 1) as usize][j] = q * z + p * h[n as usize][j];
                    h[n as usize][j] = q * h[n as usize][j] - p * z;
                }
                for row in h.iter_mut().take(n as usize + 1) {
                    z = row[(n - 1) as usize];
                    row[(n - 1) as usize] = q * z + p * row[n as usize];
                    row[n as usize] = q * row[n as usize] - p * z;
                }
                for row in v.iter_mut().take(high as usize + 1).skip(low as usize) {
                    z = row[(n - 1) as usize];
                    row[(n - 1) as usize] = q * z + p * row[n as usize];
                    row[n as usize] = q * row[n as usize] - p * z;
                }
            } else {
                d[(n - 1) as usize] = x + p;
                d[n as usize] = x + p;
                e[(n - 1) as usize] = z;
                e[n as usize] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            x = hh!(n, n);
            y = 0.0;
            w = 0.0;
            if l < n {
                y = hh!(n - 1, n - 1);
                w = hh!(n, n - 1) * hh!(n - 1, n);
            }

            // Wilkinson's original ad hoc shift
            if iter == 10 {
                exshift += x;
                for i in low..=n {
                    hh!(i, i) -= x;
                }
                s = hh!(n, n - 1).abs() + hh!(n - 1, n - 2).abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }

            // MATLAB's ad hoc shift
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in low..=n {
                        hh!(i, i) -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = x;
                    w = x;
                }
            }

            iter += 1;
            total += 1;
            if iter > MAX_SWEEPS_PER_ROOT {
                return Err(Error::EigNonConvergence { iterations: total });
            }

            let mut m = n - 2;
            while m >= l {
                z = hh!(m, m);
                r = x - z;
                s = y - z;
                p = (r * s - w) / hh!(m + 1, m) + hh!(m, m + 1);
                q = hh!(m + 1, m + 1) - z - r - s;
                r = hh!(m + 2, m + 1);
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if hh!(m, m - 1).abs() * (q.abs() + r.abs())
                    < eps * (p.abs() * (hh!(m - 1, m - 1).abs() + z.abs() + hh!(m + 1, m + 1).abs()))
                {
                    break;
                }
                m -= 1;
            }

            for i in m + 2..=n {
                hh!(i, i - 2) = 0.0;
                if i > m + 2 {
                    hh!(i, i - 3) = 0.0;
                }
            }

            let mut k = m;
            while k <= n - 1 {
                let notlast = k != n - 1;
                if k != m {
                    p = hh!(k, k - 1);
                    q = hh!(k + 1, k - 1);
                    r = if notlast { hh!(k + 2, k - 1) } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        k += 1;
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        hh!(k, k - 1) = -s * x;
                    } else if l != m {
                        hh!(k, k - 1) = -hh!(k, k - 1);
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;

                    let (ku, k1, k2) = (k as usize, (k + 1) as usize, (k + 2) as usize);
                    for j in ku..nn {
                        p = h[ku][j] + q * h[k1][j];
                        if notlast {
                            p += r * h[k2][j];
                            h[k2][j] -= p * z;
                        }
                        h[ku][j] -= p * x;
                        h[k1][j] -= p * y;
                    }
                    let imax = (n.min(k + 3)) as usize;
                    for row in h.iter_mut().take(imax + 1) {
                        p = x * row[ku] + y * row[k1];
                        if notlast {
                            p += z * row[k2];
                            row[k2] -= p * r;
                        }
                        row[ku] -= p;
                        row[k1] -= p * q;
                    }
                    for row in v.iter_mut().take(high as usize + 1).skip(low as usize) {
                        p = x * row[ku] + y * row[k1];
                        if notlast {
                            p += z * row[k2];
                            row[k2] -= p * r;
                        }
                        row[ku] -= p;
                        row[k1] -= p * q;
                    }
                }
                k += 1;
            }
        }
    }

    if !want_vectors || norm == 0.0 {
        return Ok((d, e));
    }

    // Back-substitute to find vectors of the upper triangular form.
    for n in (0..nn).rev() {
        p = d[n];
        q = e[n];
        if q == 0.0 {
            let mut l = n;
            h[n][n] = 1.0;
            for i in (0..n).rev() {
                w = h[i][i] - p;
                r = 0.0;
                for j in l..=n {
                    r += h[i][j] * h[j][n];
                }
                if e[i] < 0.0 {
                    z = w;
                    s = r;
                } else {
                    l = i;
                    if e[i] == 0.0 {
                        h[i][n] = if w != 0.0 { -r / w } else { -r / (eps * norm) };
                    } else {
                        x = h[i][i + 1];
                        y = h[i + 1][i];
                        q = (d[i] - p) * (d[i] - p) + e[i] * e[i];
                        t = (x * s - z * r) / q;
                        h[i][n] = t;
                        h[i + 1][n] = if x.abs() > z.abs() {
                            (-r - w * t) / x
                        } else {
                            (-s - y * t) / z
                        };
                    }
                    t = h[i][n].abs();
                    if (eps * t) * t > 1.0 {
                        for row in h.iter_mut().take(n + 1).skip(i) {
                            row[n] /= t;
                        }
                    }
                }
            }
        } else if q < 0.0 {
            let mut l = n - 1;
            if h[n][n - 1].abs() > h[n - 1][n].abs() {
                h[n - 1][n - 1] = q / h[n][n - 1];
                h[n - 1][n] = -(h[n][n] - p) / h[n][n - 1];
            } else {
                let (a, b) = cdiv(0.0, -h[n - 1][n], h[n - 1][n - 1] - p, q);
                h[n - 1][n - 1] = a;
                h[n - 1][n] = b;
            }
            h[n][n - 1] = 0.0;
            h[n][n] = 1.0;
            for i in (0..n.saturating_sub(1)).rev() {
                let mut ra = 0.0;
                let mut sa = 0.0;
                for j in l..=n {
                    ra += h[i][j] * h[j][n - 1];
                    sa += h[i][j] * h[j][n];
                }
                w = h[i][i] - p;

                if e[i] < 0.0 {
                    z = w;
                    r = ra;
                    s = sa;
                } else {
                    l = i;
                    if e[i] == 0.0 {
                        let (a, b) = cdiv(-ra, -sa, w, q);
                        h[i][n - 1] = a;
                        h[i][n] = b;
                    } else {
                        x = h[i][i + 1];
                        y = h[i + 1][i];
                        let mut vr = (d[i] - p) * (d[i] - p) + e[i] * e[i] - q * q;
                        let vi = (d[i] - p) * 2.0 * q;
                        if vr == 0.0 && vi == 0.0 {
                            vr = eps * norm * (w.abs() + q.abs() + x.abs() + y.abs() + z.abs());
                        }
                        let (a, b) = cdiv(x * r - z * ra + q * sa, x * s - z * sa - q * ra, vr, vi);
                        h[i][n - 1] = a;
                        h[i][n] = b;
                        if x.abs() > z.abs() + q.abs() {
                            h[i + 1][n - 1] = (-ra - w * h[i][n - 1] + q * h[i][n]) / x;
                            h[i + 1][n] = (-sa - w * h[i][n] - q * h[i][n - 1]) / x;
                        } else {
                            let (a, b) = cdiv(-r - y * h[i][n - 1], -s - y * h[i][n], z, q);
                            h[i + 1][n - 1] = a;
                            h[i + 1][n] = b;
                        }
                    }
                    t = h[i][n - 1].abs().max(h[i][n].abs());
                    if (eps * t) * t > 1.0 {
                        for row in h.iter_mut().take(n + 1).skip(i) {
                            row[n - 1] /= t;
                            row[n] /= t;
                        }
                    }
                }
            }
        }
    }

    // Back transformation to eigenvectors of the original matrix.
    for j in (0..nn).rev() {
        for i in 0..nn {
            let mut zz = 0.0;
            for k in 0..=j {
                zz += v[i][k] * h[k][j];
            }
            v[i][j] = zz;
        }
    }
    Ok((d, e))
}
