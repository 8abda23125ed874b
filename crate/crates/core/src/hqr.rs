//! Dense real eigenvalues by orthogonal Hessenberg reduction followed by the
//! Francis double-shift QR iteration (the classic EISPACK/JAMA `orthes` +
//! `hqr` pair, eigenvalues only). Iterations are hard-capped so
//! non-convergence is an error instead of a hang.

use crate::error::{Error, Result};

/// Eigenvalues of the leading `n x n` block as `(re, im)` pairs, unordered.
pub fn eigenvalues(a: &[[f64; 7]; 7], n: usize) -> Result<Vec<(f64, f64)>> {
    assert!(n <= 7);
    let mut h = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in 0..n {
            let v = a[i][j];
            if !v.is_finite() {
                return Err(Error::OracleFailure("non-finite matrix entry".into()));
            }
            h[i][j] = v;
        }
    }
    orthes(&mut h, n);
    hqr(&mut h, n)
}

/// Householder reduction to upper Hessenberg form, in place.
fn orthes(h: &mut [Vec<f64>], n: usize) {
    if n < 3 {
        return;
    }
    let mut ort = vec![0.0f64; n];
    for m in 1..n - 1 {
        let mut scale = 0.0;
        for row in h.iter().take(n).skip(m) {
            scale += row[m - 1].abs();
        }
        if scale == 0.0 {
            continue;
        }
        let mut hsum = 0.0;
        for i in (m..n).rev() {
            ort[i] = h[i][m - 1] / scale;
            hsum += ort[i] * ort[i];
        }
        let mut g = hsum.sqrt();
        if ort[m] > 0.0 {
            g = -g;
        }
        hsum -= ort[m] * g;
        ort[m] -= g;
        for j in m..n {
            let mut f = 0.0;
            for i in (m..n).rev() {
                f += ort[i] * h[i][j];
            }
            f /= hsum;
            for i in m..n {
                h[i][j] -= f * ort[i];
            }
        }
        for i in 0..n {
            let mut f = 0.0;
            for j in (m..n).rev() {
                f += ort[j] * h[i][j];
            }
            f /= hsum;
            for j in m..n {
                h[i][j] -= f * ort[j];
            }
        }
        h[m][m - 1] = scale * g;
        for i in m + 1..n {
            h[i][m - 1] = 0.0;
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix; eigenvalues only.
fn hqr(h: &mut [Vec<f64>], nn: usize) -> Result<Vec<(f64, f64)>> {
    let mut eig = Vec::with_capacity(nn);
    if nn == 0 {
        return Ok(eig);
    }
    let eps = f64::EPSILON;
    let mut norm = 0.0f64;
    for (i, row) in h.iter().enumerate().take(nn) {
        for j in i.saturating_sub(1)..nn {
            norm += row[j].abs();
        }
    }
    if norm == 0.0 {
        return Ok(vec![(0.0, 0.0); nn]);
    }

    let mut n = nn as isize - 1;
    let mut exshift = 0.0f64;
    let mut iter = 0usize;
    let total_cap = 60 * nn;
    let mut total = 0usize;

    while n >= 0 {
        total += 1;
        if total > total_cap + 200 {
            return Err(Error::OracleFailure("qr iteration budget exhausted".into()));
        }
        // Look for a single small subdiagonal element.
        let mut l = n;
        while l > 0 {
            let s = h[(l - 1) as usize][(l - 1) as usize].abs() + h[l as usize][l as usize].abs();
            let s = if s == 0.0 { norm } else { s };
            if h[l as usize][(l - 1) as usize].abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == n {
            // One root found.
            eig.push((h[n as usize][n as usize] + exshift, 0.0));
            n -= 1;
            iter = 0;
            continue;
        }
        let (un, un1) = (n as usize, (n - 1) as usize);
        let mut p;
        let mut q;
        let w = h[un][un1] * h[un1][un];
        if l == n - 1 {
            // Two roots found.
            p = (h[un1][un1] - h[un][un]) / 2.0;
            q = p * p + w;
            let z = q.abs().sqrt();
            let x = h[un][un] + exshift;
            if q >= 0.0 {
                let z = if p >= 0.0 { p + z } else { p - z };
                eig.push((x + z, 0.0));
                eig.push(if z != 0.0 { (x - w / z, 0.0) } else { (x + z, 0.0) });
            } else {
                eig.push((x + p, z));
                eig.push((x + p, -z));
            }
            n -= 2;
            iter = 0;
            continue;
        }

        if iter == 30 * nn {
            return Err(Error::OracleFailure(format!(
                "qr failed to converge after {iter} iterations"
            )));
        }
        // Form shift.
        let mut x = h[un][un];
        let mut y = h[un1][un1];
        let mut w = h[un][un1] * h[un1][un];
        if iter == 10 || iter == 20 {
            // Exceptional shift.
            exshift += x;
            for i in 0..=un {
                h[i][i] -= x;
            }
            let s = h[un][un1].abs() + h[un1][(n - 2) as usize].abs();
            x = 0.75 * s;
            y = x;
            w = -0.4375 * s * s;
        }
        iter += 1;

        // Look for two consecutive small subdiagonal elements.
        let mut m = n - 2;
        let mut pqr = [0.0f64; 3];
        while m >= l {
            let um = m as usize;
            let z = h[um][um];
            let r = x - z;
            let s = y - z;
            pqr[0] = (r * s - w) / h[um + 1][um] + h[um][um + 1];
            pqr[1] = h[um + 1][um + 1] - z - r - s;
            pqr[2] = h[um + 2][um + 1];
            let scale = pqr[0].abs() + pqr[1].abs() + pqr[2].abs();
            pqr[0] /= scale;
            pqr[1] /= scale;
            pqr[2] /= scale;
            if m == l {
                break;
            }
            let lhs = h[um][um - 1].abs() * (pqr[1].abs() + pqr[2].abs());
            let rhs = eps
                * pqr[0].abs()
                * (h[um - 1][um - 1].abs() + z.abs() + h[um + 1][um + 1].abs());
            if lhs < rhs {
                break;
            }
            m -= 1;
        }
        let um = m as usize;
        for i in um + 2..=un {
            h[i][i - 2] = 0.0;
            if i > um + 2 {
                h[i][i - 3] = 0.0;
            }
        }

        // Double QR step on rows l..=n and columns m..=n.
        let mut k = m;
        while k < n {
            let uk = k as usize;
            let notlast = k != n - 1;
            if k != m {
                pqr[0] = h[uk][uk - 1];
                pqr[1] = h[uk + 1][uk - 1];
                pqr[2] = if notlast { h[uk + 2][uk - 1] } else { 0.0 };
                x = pqr[0].abs() + pqr[1].abs() + pqr[2].abs();
                if x == 0.0 {
                    k += 1;
                    continue;
                }
                pqr[0] /= x;
                pqr[1] /= x;
                pqr[2] /= x;
            }
            p = pqr[0];
            q = pqr[1];
            let r = pqr[2];
            let mut s = (p * p + q * q + r * r).sqrt();
            if p < 0.0 {
                s = -s;
            }
            if s == 0.0 {
                k += 1;
                continue;
            }
            if k != m {
                h[uk][uk - 1] = -s * x;
            } else if l != m {
                h[uk][uk - 1] = -h[uk][uk - 1];
            }
            p += s;
            let x2 = p / s;
            let y2 = q / s;
            let z2 = r / s;
            let q2 = q / p;
            let r2 = r / p;

            // Row modification.
            for j in uk..nn {
                let mut pp = h[uk][j] + q2 * h[uk + 1][j];
                if notlast {
                    pp += r2 * h[uk + 2][j];
                    h[uk + 2][j] -= pp * z2;
                }
                h[uk][j] -= pp * x2;
                h[uk + 1][j] -= pp * y2;
            }
            // Column modification.
            let upper = if n < k + 3 { n } else { k + 3 } as usize;
            for i in 0..=upper {
                let mut pp = x2 * h[i][uk] + y2 * h[i][uk + 1];
                if notlast {
                    pp += z2 * h[i][uk + 2];
                    h[i][uk + 2] -= pp * r2;
                }
                h[i][uk] -= pp;
                h[i][uk + 1] -= pp * q2;
            }
            k += 1;
        }
    }
    Ok(eig)
}
