/// Eigenvalues of the symmetric tridiagonal matrix with diagonal `diag` and
/// sub-diagonal `off` (`off[i]` couples `i` and `i + 1`), by implicit QL with
/// Wilkinson-type shifts. On success `diag` holds the eigenvalues (unsorted);
/// `off` is destroyed.
pub fn tridiagonal_eigenvalues(diag: &mut [f64], off: &mut [f64]) -> Result<(), String> {
    let n = diag.len();
    if n == 0 {
        return Ok(());
    }
    if off.len() + 1 != n {
        return Err(format!(
            "off-diagonal length {} does not match dimension {n}",
            off.len()
        ));
    }
    let mut e = Vec::with_capacity(n);
    e.extend_from_slice(off);
    e.push(0.0);
    let d = diag;

    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > 60 {
                return Err(format!("QL iteration did not converge at index {l}"));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    if d.iter().any(|x| !x.is_finite()) {
        return Err("non-finite eigenvalue".into());
    }
    Ok(())
}
