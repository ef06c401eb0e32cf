//! Reference implementations used as test oracles. None of them call into the
//! library's numerical routines.

#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Vector3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type CMat = DMatrix<Complex64>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn gaussian_c(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    c(re, im)
}

pub fn random_cmatrix(rng: &mut ChaCha8Rng, r: usize, cols: usize) -> CMat {
    CMat::from_fn(r, cols, |_, _| gaussian_c(rng))
}

pub fn random_unit3(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [StandardNormal.sample(rng), StandardNormal.sample(rng), StandardNormal.sample(rng)];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-6 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Random unitary matrix from Gram-Schmidt on a Gaussian matrix.
pub fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    let mut q = random_cmatrix(rng, n, n);
    for j in 0..n {
        for i in 0..j {
            let proj: Complex64 = (0..n).map(|r| q[(r, i)].conj() * q[(r, j)]).sum();
            for r in 0..n {
                let v = q[(r, i)] * proj;
                q[(r, j)] -= v;
            }
        }
        let norm = (0..n).map(|r| q[(r, j)].norm_sqr()).sum::<f64>().sqrt();
        for r in 0..n {
            q[(r, j)] /= norm;
        }
    }
    q
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on Pₙ.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// ∫ f dΩ with Gauss-Legendre in cosθ and a uniform rule in φ. Exact for
/// band-limited integrands of degree below `2·n_theta` and `n_phi`.
pub fn sphere_integral<T, F>(n_theta: usize, n_phi: usize, mut f: F) -> T
where
    T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
    F: FnMut(f64, f64) -> T,
{
    let (x, w) = gauss_legendre(n_theta);
    let dphi = 2.0 * PI / n_phi as f64;
    let mut acc = T::default();
    for (xi, wi) in x.iter().zip(&w) {
        let theta = xi.acos();
        for j in 0..n_phi {
            let phi = j as f64 * dphi;
            acc = acc + f(theta, phi) * (wi * dphi);
        }
    }
    acc
}

/// Tangential complex field `(E_θ, E_φ)`.
pub type Tangential = (Complex64, Complex64);

/// Normalized l = 1 gradient harmonics `Ψ₁ₘ = ∇_Ω Y₁ₘ / √2` in spherical
/// components, built from the scalar harmonics
/// `Y₁₀ = √(3/4π) cosθ`, `Y₁,±₁ = ∓√(3/8π) sinθ e^{±iφ}`.
pub fn psi_1m(m: i32, theta: f64, phi: f64) -> Tangential {
    let (st, ct) = theta.sin_cos();
    let s2 = 2f64.sqrt();
    match m {
        0 => {
            // ∂θ Y₁₀ = -√(3/4π) sinθ, no φ dependence
            let d_theta = -(3.0 / (4.0 * PI)).sqrt() * st;
            (c(d_theta / s2, 0.0), c(0.0, 0.0))
        }
        1 | -1 => {
            let sign = if m == 1 { -1.0 } else { 1.0 };
            let a = sign * (3.0 / (8.0 * PI)).sqrt();
            let e = Complex64::from_polar(1.0, m as f64 * phi);
            // Y = a sinθ e^{imφ}: ∂θY = a cosθ e^{imφ}, (1/sinθ)∂φY = a i m e^{imφ}
            let d_theta = e * (a * ct);
            let d_phi = e * c(0.0, a * m as f64);
            (d_theta / s2, d_phi / s2)
        }
        _ => panic!("l = 1 only"),
    }
}

pub fn theta_hat(theta: f64, phi: f64) -> Vector3<f64> {
    Vector3::new(theta.cos() * phi.cos(), theta.cos() * phi.sin(), -theta.sin())
}

pub fn phi_hat(phi: f64) -> Vector3<f64> {
    Vector3::new(-phi.sin(), phi.cos(), 0.0)
}

pub fn r_hat(theta: f64, phi: f64) -> Vector3<f64> {
    Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
}

/// Far field of a short dipole along the unit vector `p`: the z-axis pattern
/// `amp·sinθ θ̂` rotated so its axis lies along `p`, i.e. `amp·((p·r̂)r̂ - p)`.
pub fn rotated_sin_pattern(p: Vector3<f64>, amp: f64, theta: f64, phi: f64) -> Tangential {
    let r = r_hat(theta, phi);
    let e = (r * p.dot(&r) - p) * amp;
    (c(e.dot(&theta_hat(theta, phi)), 0.0), c(e.dot(&phi_hat(phi)), 0.0))
}

/// Projects a tangential field onto the l = 1 basis `B_m = -Ψ₁ₘ` by
/// quadrature, returning `(a₋₁, a₀, a₊₁)` for the expansion `r·E = (1/k) Σ a_m B_m`.
pub fn project_l1<F: Fn(f64, f64) -> Tangential>(field: F, k: f64, n_theta: usize, n_phi: usize) -> [Complex64; 3] {
    let mut out = [c(0.0, 0.0); 3];
    for (slot, m) in [-1, 0, 1].into_iter().enumerate() {
        let v: ComplexSum = sphere_integral(n_theta, n_phi, |t, p| {
            let (et, ep) = field(t, p);
            let (bt, bp) = psi_1m(m, t, p);
            ComplexSum(-(et * bt.conj() + ep * bp.conj()))
        });
        out[slot] = v.0 * k;
    }
    out
}

#[derive(Clone, Copy, Default)]
pub struct ComplexSum(pub Complex64);

impl std::ops::Add for ComplexSum {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        ComplexSum(self.0 + o.0)
    }
}

impl std::ops::Mul<f64> for ComplexSum {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        ComplexSum(self.0 * s)
    }
}

/// Determinant by cofactor expansion along the first row.
pub fn det_cofactor(m: &CMat) -> Complex64 {
    let n = m.nrows();
    assert_eq!(n, m.ncols());
    if n == 1 {
        return m[(0, 0)];
    }
    let mut total = c(0.0, 0.0);
    for j in 0..n {
        let minor = CMat::from_fn(n - 1, n - 1, |r, col| m[(r + 1, if col < j { col } else { col + 1 })]);
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        total += m[(0, j)] * det_cofactor(&minor) * sign;
    }
    total
}

/// `½·log₂ det(V·V†)` via the cofactor determinant.
pub fn h1_oracle(v: &CMat) -> f64 {
    let gram = v * v.adjoint();
    0.5 * det_cofactor(&gram).re.log2()
}

/// All k-subsets of 0..n in lexicographic order, by recursion.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

pub fn residual(v_r: &CMat, w: &[f64], v: &DVector<Complex64>) -> f64 {
    let wc = DVector::from_iterator(w.len(), w.iter().map(|&x| c(x, 0.0)));
    (v_r * wc - v).norm()
}

/// `f(center + d) - f(center)` for `f(w) = ‖V w - v‖²`, expanded so that the
/// difference keeps full relative precision for small steps.
fn objective_delta(v_r: &CMat, v: &DVector<Complex64>, center: &[f64; 3], d: &[f64; 3]) -> f64 {
    let to_c = |x: &[f64; 3]| DVector::from_iterator(3, x.iter().map(|&t| c(t, 0.0)));
    let vd = v_r * to_c(d);
    let r0 = v_r * to_c(center) - v;
    vd.norm_squared() + 2.0 * vd.iter().zip(r0.iter()).map(|(a, b)| (a.conj() * b).re).sum::<f64>()
}

/// Minimizes `‖V w - v‖²` over real `w ∈ ℝ³` by dense grid refinement: an
/// 11³ grid around the incumbent, recentered on the best point, halved when
/// the best point is interior.
pub fn grid_lse_oracle(v_r: &CMat, v: &DVector<Complex64>) -> [f64; 3] {
    let mut center = [0.0; 3];
    let mut half = 4.0;
    const N: i32 = 5;
    for _ in 0..5000 {
        let step = half / N as f64;
        let mut best = (0.0, [0i32; 3]);
        for i in -N..=N {
            for j in -N..=N {
                for l in -N..=N {
                    let d = [i as f64 * step, j as f64 * step, l as f64 * step];
                    let f = objective_delta(v_r, v, &center, &d);
                    if f < best.0 {
                        best = (f, [i, j, l]);
                    }
                }
            }
        }
        let idx = best.1;
        for a in 0..3 {
            center[a] += idx[a] as f64 * step;
        }
        if idx.iter().all(|i| i.abs() < N) {
            half *= 0.5;
        }
        if half < 1e-13 {
            break;
        }
    }
    center
}

/// Coefficient of `sinθ` in the half-wave pattern `cos(π/2·cosθ)/sinθ`,
/// `⟨f, sinθ⟩ / ⟨sinθ, sinθ⟩` on the sphere, by Gauss-Legendre in `u = cosθ`.
pub fn half_wave_l1_coefficient() -> f64 {
    let (x, w) = gauss_legendre(64);
    let num: f64 = x.iter().zip(&w).map(|(u, wi)| wi * (PI / 2.0 * u).cos()).sum();
    let den: f64 = x.iter().zip(&w).map(|(u, wi)| wi * (1.0 - u * u)).sum();
    num / den
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}
