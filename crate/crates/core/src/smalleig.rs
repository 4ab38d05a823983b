//! Closed-form eigen decomposition of 2×2 and 3×3 real matrices.
//!
//! Roots of the characteristic polynomial come from the quadratic formula or
//! the trigonometric/Cardano cubic, then get one Newton step on the
//! polynomial. Real eigenvectors are null vectors of `M − λI` taken as the
//! best-conditioned cross product of two rows; a complex pair is described by
//! an orthonormal basis of its real invariant plane.

use std::cmp::Ordering;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrator::FundamentalMatrix;
use crate::linalg::{cross, Matrix, StateVector};

/// Relative discriminant threshold below which roots count as repeated.
pub const REPEATED_ROOT_TOL: f64 = 1e-12;

/// Geometric object attached to an eigenvalue.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum EigenStructure {
    /// Unit eigenvector of a real eigenvalue.
    RealLine(StateVector),
    /// Orthonormal basis of the invariant plane of a complex pair.
    ComplexPlane(StateVector, StateVector),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    /// Sorted by descending real part, ties by descending imaginary part.
    pub eigenvalues: Vec<Complex64>,
    /// One slot per eigenvalue. A complex pair carries its plane on the
    /// positive-imaginary member only; missing eigenvectors are `None`.
    pub structures: Vec<Option<EigenStructure>>,
    /// Set when some repeated eigenvalue lacks a full set of eigenvectors.
    pub defective: bool,
    /// Set when the discriminant test found repeated roots.
    pub repeated: bool,
}

impl Spectrum {
    pub fn real_parts(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|z| z.re).collect()
    }

    pub fn has_complex_pair(&self) -> bool {
        self.eigenvalues.iter().any(|z| z.im != 0.0)
    }
}

fn eig_order(a: &Complex64, b: &Complex64) -> Ordering {
    b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im))
}

/// Characteristic polynomial λⁿ + c[n−1]λⁿ⁻¹ + … + c[0], coefficients low to high.
fn char_poly(m: &Matrix) -> Vec<f64> {
    match m.dim() {
        2 => vec![m.determinant(), -m.trace()],
        3 => {
            let a = |i, j| m.get(i, j);
            let minors = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0) + a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0)
                + a(1, 1) * a(2, 2)
                - a(1, 2) * a(2, 1);
            vec![-m.determinant(), minors, -m.trace()]
        }
        d => panic!("unsupported dimension {d}"),
    }
}

fn poly_eval(c: &[f64], z: Complex64) -> (Complex64, Complex64) {
    // Horner for p and p' with a monic leading term.
    let mut p = Complex64::new(1.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &ck in c.iter().rev() {
        dp = dp * z + p;
        p = p * z + ck;
    }
    (p, dp)
}

/// One Newton step, kept only if it reduces |p|.
fn polish(c: &[f64], z: Complex64) -> Complex64 {
    let (p, dp) = poly_eval(c, z);
    if dp.norm() < 1e-300 || p.norm() == 0.0 {
        return z;
    }
    let next = z - p / dp;
    if next.re.is_finite() && next.im.is_finite() && poly_eval(c, next).0.norm() < p.norm() {
        next
    } else {
        z
    }
}

/// Roots of the characteristic polynomial and whether any are repeated.
///
/// The matrix is first shifted by tr/n so the polynomial coefficients carry
/// the eigenvalue spread at full relative precision; clustered spectra such as
/// those of a short-window monodromy matrix (≈ I + TJ) stay resolvable.
fn roots(m: &Matrix) -> (Vec<Complex64>, bool) {
    let n = m.dim();
    let shift = m.trace() / n as f64;
    let mut b = *m;
    for i in 0..n {
        b.set(i, i, m.get(i, i) - shift);
    }
    let scale = b.max_abs();
    let at = |z: Complex64| z + shift;
    let same = Complex64::new(shift, 0.0);
    if scale == 0.0 || scale <= 4.0 * f64::EPSILON * m.max_abs() {
        return (vec![same; n], true);
    }
    let mut c = char_poly(&b);
    c[n - 1] = 0.0;
    if n == 2 {
        let disc = -c[0];
        if disc.abs() <= REPEATED_ROOT_TOL * scale * scale {
            return (vec![same, same], true);
        }
        let r = disc.abs().sqrt();
        if disc > 0.0 {
            let r1 = polish(&c, Complex64::new(r, 0.0));
            let r2 = polish(&c, Complex64::new(-r, 0.0));
            return (vec![at(r1), at(r2)], false);
        }
        let z = polish(&c, Complex64::new(0.0, r));
        let z = at(Complex64::new(z.re, z.im.abs()));
        return (vec![z, z.conj()], false);
    }
    let (q, p) = (c[0], c[1]);
    let d = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    if d.abs() <= REPEATED_ROOT_TOL * scale.powi(6) {
        if p.abs() <= 1e-8 * scale * scale {
            return (vec![same; 3], true);
        }
        let single = polish(&c, Complex64::new(3.0 * q / p, 0.0));
        let double = Complex64::new(-1.5 * q / p, 0.0);
        return (vec![at(single), at(double), at(double)], true);
    }
    if d > 0.0 {
        let sq = d.sqrt();
        let u = -q.signum() * (q.abs() / 2.0 + sq).cbrt();
        let v = if u != 0.0 { -p / (3.0 * u) } else { 0.0 };
        let real = polish(&c, Complex64::new(u + v, 0.0));
        let pair = polish(&c, Complex64::new(-(u + v) / 2.0, 3f64.sqrt() / 2.0 * (u - v).abs()));
        let pair = at(Complex64::new(pair.re, pair.im.abs()));
        return (vec![at(real), pair, pair.conj()], false);
    }
    let r = 2.0 * (-p / 3.0).sqrt();
    let arg = ((3.0 * q / (2.0 * p)) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
    let phi = arg.acos() / 3.0;
    let rs = (0..3)
        .map(|k| at(polish(&c, Complex64::new(r * (phi - 2.0 * PI * k as f64 / 3.0).cos(), 0.0))))
        .collect();
    (rs, false)
}

fn unit(v: [f64; 3], dim: usize) -> Option<StateVector> {
    StateVector::from_slice(&v[..dim]).ok()?.normalized()
}

/// Orthonormal complement of a unit vector `r` in R³.
fn complement(r: &StateVector) -> (StateVector, StateVector) {
    let rp = r.padded();
    let k = (0..3).min_by(|&i, &j| rp[i].abs().total_cmp(&rp[j].abs())).unwrap();
    let mut e = [0.0; 3];
    e[k] = 1.0;
    let u = unit(cross(&rp, &e), 3).unwrap();
    let w = unit(cross(&rp, &u.padded()), 3).unwrap();
    (u, w)
}

fn basis(dim: usize) -> Vec<StateVector> {
    (0..dim)
        .map(|i| {
            let mut v = StateVector::zeros(dim);
            v[i] = 1.0;
            v
        })
        .collect()
}

/// Null-space basis of `M − λI` for real λ. When `repeated` is false a single
/// best-conditioned direction is returned.
fn real_null_space(m: &Matrix, lambda: f64, repeated: bool) -> Vec<StateVector> {
    let n = m.dim();
    let mut a = *m;
    for i in 0..n {
        a.set(i, i, m.get(i, i) - lambda);
    }
    let anorm = a.frobenius_norm();
    let scale = m.max_abs().max(f64::MIN_POSITIVE);
    if repeated && anorm <= 1e-6 * scale {
        return basis(n);
    }
    if n == 2 {
        let r = if a.row(0).norm() >= a.row(1).norm() { a.row(0) } else { a.row(1) };
        return StateVector::new2(-r[1], r[0]).normalized().into_iter().collect();
    }
    let rows: Vec<[f64; 3]> = (0..3).map(|i| a.row(i).padded()).collect();
    let best = [(0, 1), (0, 2), (1, 2)]
        .iter()
        .map(|&(i, j)| cross(&rows[i], &rows[j]))
        .max_by(|x, y| norm3(x).total_cmp(&norm3(y)))
        .unwrap();
    if repeated && norm3(&best) <= 1e-6 * anorm * anorm {
        // Rank one: the null space is the plane orthogonal to the dominant row.
        let r = (0..3).map(|i| a.row(i)).max_by(|x, y| x.norm().total_cmp(&y.norm())).unwrap();
        let (u, w) = complement(&r.normalized().unwrap());
        return vec![u, w];
    }
    unit(best, 3).into_iter().collect()
}

fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Orthonormal basis of the real plane spanned by Re v, Im v of a complex null vector.
fn complex_plane(m: &Matrix, lambda: Complex64) -> Option<(StateVector, StateVector)> {
    let n = m.dim();
    let a = |i: usize, j: usize| {
        let d = if i == j { lambda } else { Complex64::new(0.0, 0.0) };
        Complex64::new(m.get(i, j), 0.0) - d
    };
    let v: Vec<Complex64> = if n == 2 {
        let r0 = (a(0, 0), a(0, 1));
        let r1 = (a(1, 0), a(1, 1));
        let r = if r0.0.norm_sqr() + r0.1.norm_sqr() >= r1.0.norm_sqr() + r1.1.norm_sqr() { r0 } else { r1 };
        vec![-r.1, r.0]
    } else {
        let rows: Vec<[Complex64; 3]> = (0..3).map(|i| [a(i, 0), a(i, 1), a(i, 2)]).collect();
        let ccross = |x: &[Complex64; 3], y: &[Complex64; 3]| {
            [x[1] * y[2] - x[2] * y[1], x[2] * y[0] - x[0] * y[2], x[0] * y[1] - x[1] * y[0]]
        };
        let cn = |v: &[Complex64; 3]| v.iter().map(|z| z.norm_sqr()).sum::<f64>();
        [(0, 1), (0, 2), (1, 2)]
            .iter()
            .map(|&(i, j)| ccross(&rows[i], &rows[j]))
            .max_by(|x, y| cn(x).total_cmp(&cn(y)))
            .unwrap()
            .to_vec()
    };
    let re: Vec<f64> = v.iter().map(|z| z.re).collect();
    let im: Vec<f64> = v.iter().map(|z| z.im).collect();
    let (re, im) = (StateVector::from_slice(&re).ok()?, StateVector::from_slice(&im).ok()?);
    let (first, second) = if re.norm() >= im.norm() { (re, im) } else { (im, re) };
    let u1 = first.normalized()?;
    let u2 = (second - u1.scale(second.dot(&u1))).normalized()?;
    Some((u1, u2))
}

/// Eigenvalues and eigen-structures of a 2×2 or 3×3 real matrix.
pub fn eigen(m: &Matrix) -> Spectrum {
    let n = m.dim();
    assert!(n == 2 || n == 3, "eigen supports 2×2 and 3×3 matrices");
    let (vals, repeated) = roots(m);

    let mut entries: Vec<(Complex64, Option<EigenStructure>)> = Vec::with_capacity(n);
    let mut defective = false;
    let mut i = 0;
    while i < vals.len() {
        let z = vals[i];
        if z.im != 0.0 {
            let plane = complex_plane(m, Complex64::new(z.re, z.im.abs()));
            let s = plane.map(|(u, w)| EigenStructure::ComplexPlane(u, w));
            entries.push((Complex64::new(z.re, z.im.abs()), s));
            entries.push((Complex64::new(z.re, -z.im.abs()), None));
            i += 2;
            continue;
        }
        let mult = vals[i..].iter().take_while(|w| **w == z).count();
        let vectors = real_null_space(m, z.re, mult > 1);
        if vectors.len() < mult {
            defective = true;
        }
        for k in 0..mult {
            entries.push((z, vectors.get(k).copied().map(EigenStructure::RealLine)));
        }
        i += mult;
    }
    entries.sort_by(|a, b| eig_order(&a.0, &b.0));
    let (eigenvalues, structures) = entries.into_iter().unzip();
    Spectrum { eigenvalues, structures, defective, repeated }
}

/// Generalized Floquet exponents over one window.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FloquetExponents {
    /// ln|λᵢ(Φ)| / T, descending.
    pub real: Vec<f64>,
    /// arg λᵢ(Φ) / T in (−π/T, π/T]. The matrix-logarithm branch is not
    /// unique, so these are informational only.
    pub imag: Vec<f64>,
    pub window: f64,
}

/// Exponents (1/T) ln λᵢ of the monodromy matrix over T = t1 − t0.
pub fn floquet_from_monodromy(phi: &FundamentalMatrix) -> Result<FloquetExponents> {
    let t = phi.span();
    if !(t > 0.0) {
        return Err(Error::InvalidInput(format!("window length must be positive, got {t}")));
    }
    let spec = eigen(&phi.phi);
    let mut pairs = Vec::with_capacity(spec.eigenvalues.len());
    for z in &spec.eigenvalues {
        let modulus = z.norm();
        if !(modulus >= 1e-300) {
            return Err(Error::SingularMonodromy { modulus });
        }
        let arg = if z.im == 0.0 && z.re < 0.0 { PI } else { z.arg() };
        pairs.push(Complex64::new(modulus.ln() / t, arg / t));
    }
    pairs.sort_by(eig_order);
    Ok(FloquetExponents {
        real: pairs.iter().map(|z| z.re).collect(),
        imag: pairs.iter().map(|z| z.im).collect(),
        window: t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn m3(rows: [[f64; 3]; 3]) -> Matrix {
        Matrix::from_array3(rows)
    }

    fn residual(m: &Matrix, lambda: f64, v: &StateVector) -> f64 {
        let mut a = *m;
        for i in 0..m.dim() {
            a.set(i, i, m.get(i, i) - lambda);
        }
        a.mul_vec(v).norm()
    }

    /// Independent oracle: real roots by bisection between the critical
    /// points of the cubic, the remaining pair by quadratic deflation.
    fn oracle_cubic(m: &Matrix) -> Vec<Complex64> {
        let c = char_poly(m);
        let p = |x: f64| ((x + c[2]) * x + c[1]) * x + c[0];
        let bound = 1.0 + c.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let bisect = |mut lo: f64, mut hi: f64| {
            let slo = p(lo).signum();
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if p(mid).signum() == slo {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        // p'(x) = 3x² + 2c2 x + c1
        let disc = c[2] * c[2] - 3.0 * c[1];
        let mut knots = vec![-bound];
        if disc > 0.0 {
            let s = disc.sqrt();
            knots.push((-c[2] - s) / 3.0);
            knots.push((-c[2] + s) / 3.0);
        }
        knots.push(bound);
        let mut reals = Vec::new();
        for w in knots.windows(2) {
            if p(w[0]) * p(w[1]) <= 0.0 && w[1] > w[0] {
                reals.push(bisect(w[0], w[1]));
            }
        }
        let r = reals[0];
        // Deflate: p(x) = (x − r)(x² + βx + γ)
        let beta = c[2] + r;
        let gamma = c[1] + r * beta;
        let d = beta * beta / 4.0 - gamma;
        let mut out = vec![Complex64::new(r, 0.0)];
        if d >= 0.0 {
            out.push(Complex64::new(-beta / 2.0 + d.sqrt(), 0.0));
            out.push(Complex64::new(-beta / 2.0 - d.sqrt(), 0.0));
        } else {
            out.push(Complex64::new(-beta / 2.0, (-d).sqrt()));
            out.push(Complex64::new(-beta / 2.0, -(-d).sqrt()));
        }
        out.sort_by(eig_order);
        out
    }

    #[test]
    fn identity_is_repeated_with_full_eigenspace() {
        let s = eigen(&Matrix::identity(3));
        assert_eq!(s.eigenvalues, vec![Complex64::new(1.0, 0.0); 3]);
        assert!(s.repeated);
        assert!(!s.defective);
        assert!(s.structures.iter().all(|x| matches!(x, Some(EigenStructure::RealLine(_)))));
    }

    #[test]
    fn rosenbrock_frozen_matrix() {
        let s = eigen(&Matrix::from_array2([[-10.0, 12.0], [0.0, -1.0]]));
        assert_eq!(s.eigenvalues, vec![Complex64::new(-1.0, 0.0), Complex64::new(-10.0, 0.0)]);
        assert!(!s.defective);
    }

    #[test]
    fn vanderpol_pair() {
        let s = eigen(&Matrix::from_array2([[0.0, 1.0], [-1.0, 1.0]]));
        let h = 3f64.sqrt() / 2.0;
        assert!((s.eigenvalues[0] - Complex64::new(0.5, h)).norm() < 1e-14);
        assert!((s.eigenvalues[1] - Complex64::new(0.5, -h)).norm() < 1e-14);
        assert!(matches!(s.structures[0], Some(EigenStructure::ComplexPlane(..))));
        assert!(s.structures[1].is_none());
    }

    #[test]
    fn defective_double_root_2x2() {
        // Jacobian of the circle system at (0, 1): λ = −1 twice, one eigenvector.
        let s = eigen(&Matrix::from_array2([[0.0, 1.0], [-1.0, -2.0]]));
        assert_eq!(s.eigenvalues, vec![Complex64::new(-1.0, 0.0); 2]);
        assert!(s.defective);
        let Some(EigenStructure::RealLine(v)) = s.structures[0] else { panic!() };
        assert!(residual(&Matrix::from_array2([[0.0, 1.0], [-1.0, -2.0]]), -1.0, &v) < 1e-12);
        assert!(s.structures[1].is_none());
    }

    #[test]
    fn defective_and_semisimple_3x3() {
        let jordan = m3([[2.0, 1.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, -1.0]]);
        let s = eigen(&jordan);
        assert!(s.repeated && s.defective);
        let semi = m3([[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, -1.0]]);
        let s = eigen(&semi);
        assert!(s.repeated && !s.defective);
        assert_eq!(s.structures.iter().filter(|x| x.is_some()).count(), 3);
    }

    #[test]
    fn complex_plane_is_invariant_and_orthonormal() {
        let m = m3([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [-1.0, -1.0, -0.8]]);
        let s = eigen(&m);
        let (u, w) = s
            .structures
            .iter()
            .find_map(|x| match x {
                Some(EigenStructure::ComplexPlane(u, w)) => Some((*u, *w)),
                _ => None,
            })
            .unwrap();
        assert!((u.norm() - 1.0).abs() < 1e-14 && (w.norm() - 1.0).abs() < 1e-14 && u.dot(&w).abs() < 1e-14);
        // M maps the plane into itself: the component of Mu normal to the plane vanishes.
        let normal = StateVector::from_slice(&cross(&u.padded(), &w.padded())).unwrap();
        assert!(m.mul_vec(&u).dot(&normal).abs() < 1e-12);
        assert!(m.mul_vec(&w).dot(&normal).abs() < 1e-12);
    }

    #[test]
    fn random_matrices_satisfy_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..10_000 {
            let mut m = Matrix::zeros(3);
            for i in 0..3 {
                for j in 0..3 {
                    m.set(i, j, rng.gen_range(-5.0..5.0));
                }
            }
            let s = eigen(&m);
            let sum: Complex64 = s.eigenvalues.iter().sum();
            let prod: Complex64 = s.eigenvalues.iter().product();
            assert!((sum.re - m.trace()).abs() <= 1e-10 && sum.im.abs() <= 1e-10);
            let det = m.determinant();
            assert!((prod.re - det).abs() <= 1e-9 * det.abs().max(1.0), "{prod} vs {det}");
            let mnorm = m.frobenius_norm();
            let c = char_poly(&m);
            for (z, st) in s.eigenvalues.iter().zip(&s.structures) {
                assert!(poly_eval(&c, *z).0.norm() <= 1e-8 * (1.0 + mnorm.powi(3)));
                if let (true, Some(EigenStructure::RealLine(v))) = (!s.defective, st) {
                    assert!(residual(&m, z.re, v) <= 1e-8 * mnorm);
                }
            }
            let pairs = s.eigenvalues.iter().filter(|z| z.im != 0.0).count();
            assert!(pairs == 0 || pairs == 2);
        }
    }

    #[test]
    fn agrees_with_bisection_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..1000 {
            let mut m = Matrix::zeros(3);
            for i in 0..3 {
                for j in 0..3 {
                    m.set(i, j, rng.gen_range(-5.0..5.0));
                }
            }
            let got = eigen(&m).eigenvalues;
            let want = oracle_cubic(&m);
            for (a, b) in got.iter().zip(&want) {
                assert!((a - b).norm() <= 1e-9, "{got:?} vs {want:?}");
            }
        }
    }

    #[test]
    fn floquet_examples() {
        let id = FundamentalMatrix { t0: 0.0, t1: 2.5, phi: Matrix::identity(3) };
        let f = floquet_from_monodromy(&id).unwrap();
        assert_eq!(f.real, vec![0.0; 3]);
        let zero = FundamentalMatrix { t0: 0.0, t1: 1.0, phi: Matrix::zeros(2) };
        assert!(matches!(floquet_from_monodromy(&zero), Err(Error::SingularMonodromy { .. })));
        let t = 2.0;
        let rot = Matrix::from_array2([[0.0, -1.0], [1.0, 0.0]]).scale(3f64.exp());
        let f = floquet_from_monodromy(&FundamentalMatrix { t0: 1.0, t1: 1.0 + t, phi: rot }).unwrap();
        assert!((f.real[0] - 1.5).abs() < 1e-14 && (f.real[1] - 1.5).abs() < 1e-14);
        assert!((f.imag[0] - PI / 4.0).abs() < 1e-14 && (f.imag[1] + PI / 4.0).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn floquet_sum_matches_log_det(entries in proptest::collection::vec(-2.0f64..2.0, 9), t in 0.1f64..10.0) {
            let mut m = Matrix::identity(3).scale(3.0);
            for (k, e) in entries.iter().enumerate() {
                m.set(k / 3, k % 3, m.get(k / 3, k % 3) + e);
            }
            let det = m.determinant();
            prop_assume!(det > 1e-3);
            let f = floquet_from_monodromy(&FundamentalMatrix { t0: 0.0, t1: t, phi: m }).unwrap();
            let sum: f64 = f.real.iter().sum();
            prop_assert!((sum - det.ln() / t).abs() <= 1e-9);
            prop_assert!(f.real.windows(2).all(|w| w[0] >= w[1]));
        }

        #[test]
        fn ordering_is_deterministic(entries in proptest::collection::vec(-5.0f64..5.0, 4)) {
            let m = Matrix::from_array2([[entries[0], entries[1]], [entries[2], entries[3]]]);
            let (a, b) = (eigen(&m), eigen(&m));
            prop_assert_eq!(&a.eigenvalues, &b.eigenvalues);
            prop_assert!(a.eigenvalues.windows(2).all(|w| eig_order(&w[0], &w[1]) != Ordering::Greater));
        }
    }
}
