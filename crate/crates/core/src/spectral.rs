//! Pole computation for small dense real matrices.
//!
//! Eigenvalues come from a Householder reduction to upper Hessenberg form
//! followed by Francis double-shift QR sweeps with deflation. For `n <= 4`
//! a characteristic-polynomial path (Faddeev–LeVerrier coefficients,
//! Durand–Kerner roots, Newton polish) is used if the QR sweeps stall.

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_shape, check_square, Matrix};
use crate::plant::PlantModel;

/// Largest matrix order the solver accepts.
pub const MAX_ORDER: usize = 6;

const MAX_QR_ITERATIONS: usize = 200;

/// One eigenvalue in rectangular and polar form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pole {
    pub re: f64,
    pub im: f64,
    pub mag: f64,
    pub angle: f64,
}

impl Pole {
    pub fn new(re: f64, im: f64) -> Self {
        Self {
            re,
            im,
            mag: re.hypot(im),
            angle: im.atan2(re),
        }
    }

    pub fn from_polar(mag: f64, angle: f64) -> Self {
        Self {
            re: mag * angle.cos(),
            im: mag * angle.sin(),
            mag,
            angle,
        }
    }

    pub fn as_complex(&self) -> Complex<f64> {
        Complex::new(self.re, self.im)
    }
}

/// Eigenvalue multiset of a real matrix, sorted by magnitude then `|angle|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleSet {
    pub poles: Vec<Pole>,
    pub spectral_radius: f64,
    pub stable: bool,
}

impl PoleSet {
    pub fn from_complex(values: &[Complex<f64>]) -> Self {
        let mut poles: Vec<Pole> = values.iter().map(|c| Pole::new(c.re, c.im)).collect();
        sort_poles(&mut poles);
        let spectral_radius = poles.iter().map(|p| p.mag).fold(0.0, f64::max);
        Self {
            poles,
            spectral_radius,
            stable: spectral_radius < 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.poles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poles.is_empty()
    }

    /// Multiset comparison against `(magnitude, angle)` pairs: true if some
    /// one-to-one assignment matches every pole within `tol` on both
    /// magnitude and angle.
    pub fn matches_polar(&self, expected: &[(f64, f64)], tol: f64) -> bool {
        if expected.len() != self.poles.len() {
            return false;
        }
        let close = |p: &Pole, &(mag, angle): &(f64, f64)| (p.mag - mag).abs() <= tol && (p.angle - angle).abs() <= tol;
        fn assign(
            poles: &[Pole],
            expected: &[(f64, f64)],
            used: &mut Vec<bool>,
            close: &dyn Fn(&Pole, &(f64, f64)) -> bool,
        ) -> bool {
            let Some((first, rest)) = poles.split_first() else {
                return true;
            };
            for j in 0..expected.len() {
                if !used[j] && close(first, &expected[j]) {
                    used[j] = true;
                    if assign(rest, expected, used, close) {
                        return true;
                    }
                    used[j] = false;
                }
            }
            false
        }
        assign(&self.poles, expected, &mut vec![false; expected.len()], &close)
    }

    /// Polar rendering, e.g. `0.9801 e^{±0.0219}` for conjugate pairs.
    pub fn polar_summary(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < self.poles.len() {
            let p = self.poles[i];
            if p.im.abs() > 1e-12 && i + 1 < self.poles.len() && (self.poles[i + 1].im + p.im).abs() < 1e-9 {
                out.push(format!("{:.4} e^{{±{:.4}}}", p.mag, p.angle.abs()));
                i += 2;
            } else {
                out.push(format!("{:.4}", p.re));
                i += 1;
            }
        }
        out
    }
}

fn sort_poles(poles: &mut [Pole]) {
    poles.sort_by(|a, b| {
        a.mag
            .total_cmp(&b.mag)
            .then(a.angle.abs().total_cmp(&b.angle.abs()))
            .then(a.angle.total_cmp(&b.angle))
    });
}

/// All eigenvalues of a real square matrix of order at most [`MAX_ORDER`].
pub fn eigenvalues(m: &Matrix) -> Result<PoleSet> {
    check_square(m, "matrix")?;
    let n = m.nrows();
    if n > MAX_ORDER {
        return Err(Error::dim("matrix", format!("order <= {MAX_ORDER}"), n));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Config("matrix has non-finite entries".into()));
    }
    let values = match hessenberg_qr(&hessenberg(m)) {
        Some(v) => v,
        None if n <= 4 => polynomial_roots(&characteristic_polynomial(m)).ok_or(Error::Eigen { n })?,
        None => return Err(Error::Eigen { n }),
    };
    Ok(PoleSet::from_complex(&values))
}

/// Feedback law whose closed loop is analysed.
#[derive(Debug, Clone, Copy)]
pub enum Feedback<'a> {
    /// `u = −K Z`, closed loop `A − B K`.
    Gain(&'a Matrix),
    /// `u = W_aᵀ Z`, closed loop `A + B W_aᵀ`.
    Actor(&'a Matrix),
}

pub fn closed_loop_matrix(model: &PlantModel, feedback: Feedback<'_>) -> Result<Matrix> {
    let (n, m) = (model.n(), model.m());
    match feedback {
        Feedback::Gain(k) => {
            check_shape(k, m, n, "K")?;
            Ok(model.a() - model.b() * k)
        }
        Feedback::Actor(w) => {
            check_shape(w, n, m, "W_a")?;
            Ok(model.a() + model.b() * w.transpose())
        }
    }
}

pub fn closed_loop_poles(model: &PlantModel, feedback: Feedback<'_>) -> Result<PoleSet> {
    eigenvalues(&closed_loop_matrix(model, feedback)?)
}

pub fn open_loop_poles(model: &PlantModel) -> Result<PoleSet> {
    eigenvalues(model.a())
}

/// Householder similarity reduction to upper Hessenberg form.
fn hessenberg(m: &Matrix) -> Matrix {
    let n = m.nrows();
    let mut h = m.clone();
    for k in 0..n.saturating_sub(2) {
        let mut v: Vec<f64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if v[0] > 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= vnorm);

        // H <- (I − 2vvᵀ) H
        for j in 0..n {
            let dot: f64 = v.iter().enumerate().map(|(i, vi)| vi * h[(k + 1 + i, j)]).sum();
            for (i, vi) in v.iter().enumerate() {
                h[(k + 1 + i, j)] -= 2.0 * vi * dot;
            }
        }
        // H <- H (I − 2vvᵀ)
        for i in 0..n {
            let dot: f64 = v.iter().enumerate().map(|(j, vj)| vj * h[(i, k + 1 + j)]).sum();
            for (j, vj) in v.iter().enumerate() {
                h[(i, k + 1 + j)] -= 2.0 * vj * dot;
            }
        }
        for i in k + 2..n {
            h[(i, k)] = 0.0;
        }
    }
    h
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix. Returns `None`
/// when an eigenvalue fails to deflate within the iteration budget.
fn hessenberg_qr(h: &Matrix) -> Option<Vec<Complex<f64>>> {
    let n = h.nrows();
    let mut a = h.clone();
    let mut out = vec![Complex::new(0.0, 0.0); n];
    let eps = f64::EPSILON;
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[(i, j)].abs();
        }
    }

    let mut nn = n as isize - 1;
    let mut t = 0.0;
    let mut its = 0;
    while nn >= 0 {
        let nu = nn as usize;
        // Look for a negligible subdiagonal element.
        let mut l = nu;
        while l > 0 {
            let mut s = a[(l - 1, l - 1)].abs() + a[(l, l)].abs();
            if s == 0.0 {
                s = anorm;
            }
            if a[(l, l - 1)].abs() <= eps * s {
                a[(l, l - 1)] = 0.0;
                break;
            }
            l -= 1;
        }
        let mut x = a[(nu, nu)];
        if l == nu {
            out[nu] = Complex::new(x + t, 0.0);
            nn -= 1;
            its = 0;
            continue;
        }
        let mut y = a[(nu - 1, nu - 1)];
        let mut w = a[(nu, nu - 1)] * a[(nu - 1, nu)];
        if l == nu - 1 {
            let p = 0.5 * (y - x);
            let q = p * p + w;
            let mut z = q.abs().sqrt();
            x += t;
            if q >= 0.0 {
                z = p + sign(z, p);
                out[nu - 1] = Complex::new(x + z, 0.0);
                out[nu] = Complex::new(if z != 0.0 { x - w / z } else { x + z }, 0.0);
            } else {
                out[nu] = Complex::new(x + p, -z);
                out[nu - 1] = Complex::new(x + p, z);
            }
            nn -= 2;
            its = 0;
            continue;
        }

        if its == MAX_QR_ITERATIONS {
            return None;
        }
        if its > 0 && its % 10 == 0 {
            // Exceptional shift.
            t += x;
            for i in 0..=nu {
                a[(i, i)] -= x;
            }
            let s = a[(nu, nu - 1)].abs() + a[(nu - 1, nu - 2)].abs();
            x = 0.75 * s;
            y = x;
            w = -0.4375 * s * s;
        }
        its += 1;

        let (mut p, mut q, mut r);
        let mut m = nu - 2;
        loop {
            let z = a[(m, m)];
            let rr = x - z;
            let ss = y - z;
            p = (rr * ss - w) / a[(m + 1, m)] + a[(m, m + 1)];
            q = a[(m + 1, m + 1)] - z - rr - ss;
            r = a[(m + 2, m + 1)];
            let s = p.abs() + q.abs() + r.abs();
            p /= s;
            q /= s;
            r /= s;
            if m == l {
                break;
            }
            let u = a[(m, m - 1)].abs() * (q.abs() + r.abs());
            let v = p.abs() * (a[(m - 1, m - 1)].abs() + z.abs() + a[(m + 1, m + 1)].abs());
            if u <= eps * v {
                break;
            }
            m -= 1;
        }
        for i in m..nu - 1 {
            a[(i + 2, i)] = 0.0;
            if i != m {
                a[(i + 2, i - 1)] = 0.0;
            }
        }

        let mut k = m;
        while k < nu {
            if k != m {
                p = a[(k, k - 1)];
                q = a[(k + 1, k - 1)];
                r = if k + 1 != nu { a[(k + 2, k - 1)] } else { 0.0 };
                x = p.abs() + q.abs() + r.abs();
                if x != 0.0 {
                    p /= x;
                    q /= x;
                    r /= x;
                }
            }
            let s = sign((p * p + q * q + r * r).sqrt(), p);
            if s != 0.0 {
                if k == m {
                    if l != m {
                        a[(k, k - 1)] = -a[(k, k - 1)];
                    }
                } else {
                    a[(k, k - 1)] = -s * x;
                }
                p += s;
                x = p / s;
                y = q / s;
                let z = r / s;
                q /= p;
                r /= p;
                for j in k..=nu {
                    let mut pp = a[(k, j)] + q * a[(k + 1, j)];
                    if k + 1 != nu {
                        pp += r * a[(k + 2, j)];
                        a[(k + 2, j)] -= pp * z;
                    }
                    a[(k + 1, j)] -= pp * y;
                    a[(k, j)] -= pp * x;
                }
                let mmin = if nu < k + 3 { nu } else { k + 3 };
                for i in l..=mmin {
                    let mut pp = x * a[(i, k)] + y * a[(i, k + 1)];
                    if k + 1 != nu {
                        pp += z * a[(i, k + 2)];
                        a[(i, k + 2)] -= pp * r;
                    }
                    a[(i, k + 1)] -= pp * q;
                    a[(i, k)] -= pp;
                }
            }
            k += 1;
        }
    }
    Some(out)
}

/// Coefficients `[1, c_1, …, c_n]` of `det(λI − M) = λⁿ + c_1 λⁿ⁻¹ + … + c_n`.
pub fn characteristic_polynomial(m: &Matrix) -> Vec<f64> {
    let n = m.nrows();
    let mut coeffs = vec![1.0];
    let mut mk = Matrix::zeros(n, n);
    let identity = Matrix::identity(n, n);
    for k in 1..=n {
        let c_prev = *coeffs.last().unwrap();
        mk = m * (&mk + &identity * c_prev);
        let c = -mk.trace() / k as f64;
        coeffs.push(c);
    }
    coeffs
}

/// Roots of a monic real polynomial via Durand–Kerner with Newton polish.
fn polynomial_roots(coeffs: &[f64]) -> Option<Vec<Complex<f64>>> {
    let n = coeffs.len() - 1;
    if n == 0 {
        return Some(Vec::new());
    }
    let eval = |z: Complex<f64>| coeffs.iter().fold(Complex::new(0.0, 0.0), |acc, &c| acc * z + c);
    let deriv = |z: Complex<f64>| {
        coeffs[..n]
            .iter()
            .enumerate()
            .fold(Complex::new(0.0, 0.0), |acc, (i, &c)| acc * z + c * (n - i) as f64)
    };
    let radius = 1.0 + coeffs[1..].iter().fold(0.0_f64, |acc, c| acc.max(c.abs()));
    let seed = Complex::new(0.4, 0.9);
    let mut roots: Vec<Complex<f64>> = (0..n).map(|i| seed.powu(i as u32) * radius).collect();

    for _ in 0..2000 {
        let mut shift = 0.0_f64;
        for i in 0..n {
            let mut denom = Complex::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    denom *= roots[i] - roots[j];
                }
            }
            if denom.norm() == 0.0 {
                denom = Complex::new(1e-12, 0.0);
            }
            let delta = eval(roots[i]) / denom;
            roots[i] -= delta;
            shift = shift.max(delta.norm());
        }
        if shift < 1e-15 * radius {
            break;
        }
    }
    for root in roots.iter_mut() {
        for _ in 0..5 {
            let d = deriv(*root);
            if d.norm() == 0.0 {
                break;
            }
            *root -= eval(*root) / d;
        }
        if !root.re.is_finite() || !root.im.is_finite() {
            return None;
        }
    }
    Some(roots)
}
