//! Slow, independent reference computations.
//!
//! Nothing in here shares code with `spinmetro`: exponentials come from a
//! Padé(13) scaling-and-squaring routine instead of eigendecompositions,
//! product-space operators are assembled from explicit Kronecker products,
//! and derivatives are taken by finite differences or quadrature.

use nalgebra::{DMatrix, DVector, Matrix3};

pub type C64 = nalgebra::Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn one_norm(a: &CMatrix) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(a)` by scaling and squaring with a degree-13 Padé approximant.
pub fn expm(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let theta13 = 5.371920351148152;
    let norm = one_norm(a);
    let s = if norm > theta13 {
        (norm / theta13).log2().ceil() as i32
    } else {
        0
    };
    let a = a.scale(0.5f64.powi(s));
    let id = CMatrix::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = |k: usize| C64::new(PADE13[k], 0.0);

    let u_inner = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9))
        + &a6 * b(7)
        + &a4 * b(5)
        + &a2 * b(3)
        + &id * b(1);
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8))
        + &a6 * b(6)
        + &a4 * b(4)
        + &a2 * b(2)
        + &id * b(0);

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).expect("Padé denominator is singular");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// Pauli matrices divided by two, ordered x, y, z, with |0⟩ = spin up.
pub fn half_paulis() -> [CMatrix; 3] {
    let z = C64::new(0.0, 0.0);
    let h = C64::new(0.5, 0.0);
    let ih = C64::new(0.0, 0.5);
    [
        CMatrix::from_row_slice(2, 2, &[z, h, h, z]),
        CMatrix::from_row_slice(2, 2, &[z, -ih, ih, z]),
        CMatrix::from_row_slice(2, 2, &[h, z, z, -h]),
    ]
}

/// Single-site operator acting on spin `site` of `n` spins (site 0 is the
/// leftmost Kronecker factor).
pub fn site_operator(op: &CMatrix, site: usize, n: usize) -> CMatrix {
    let id = CMatrix::identity(2, 2);
    let mut out = CMatrix::identity(1, 1);
    for k in 0..n {
        out = out.kronecker(if k == site { op } else { &id });
    }
    out
}

/// Collective spin operators on the full 2^n product space.
pub fn product_collective(n: usize) -> [CMatrix; 3] {
    let dim = 1usize << n;
    let paulis = half_paulis();
    let mut out = [
        CMatrix::zeros(dim, dim),
        CMatrix::zeros(dim, dim),
        CMatrix::zeros(dim, dim),
    ];
    for (axis, p) in paulis.iter().enumerate() {
        for site in 0..n {
            out[axis] += site_operator(p, site, n);
        }
    }
    out
}

pub fn binomial(n: usize, k: usize) -> f64 {
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Isometry from the Dicke basis (index k = number of down spins, i.e.
/// m = n/2 − k) into the product basis, built by enumerating bitstrings.
pub fn dicke_isometry(n: usize) -> CMatrix {
    let dim = 1usize << n;
    let mut w = CMatrix::zeros(dim, n + 1);
    for bits in 0..dim {
        let downs = (bits as u64).count_ones() as usize;
        w[(bits, downs)] = C64::new(1.0 / binomial(n, downs).sqrt(), 0.0);
    }
    w
}

fn hamiltonian(ops: &[CMatrix; 3], phi: [f64; 3]) -> CMatrix {
    ops[0].scale(phi[0]) + ops[1].scale(phi[1]) + ops[2].scale(phi[2])
}

/// A_μ = ∫₀¹ e^{iuH} J_μ e^{−iuH} du by composite Simpson with `nodes`
/// (odd) points.
pub fn simpson_generators(ops: &[CMatrix; 3], phi: [f64; 3], nodes: usize) -> [CMatrix; 3] {
    assert!(nodes >= 3 && nodes % 2 == 1);
    let h = hamiltonian(ops, phi);
    let dim = h.nrows();
    let step = 1.0 / (nodes - 1) as f64;
    let mut acc = [
        CMatrix::zeros(dim, dim),
        CMatrix::zeros(dim, dim),
        CMatrix::zeros(dim, dim),
    ];
    for k in 0..nodes {
        let u = k as f64 * step;
        let w = if k == 0 || k == nodes - 1 {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let fwd = expm(&h.map(|z| z * C64::new(0.0, u)));
        let bwd = fwd.adjoint();
        for (a, op) in acc.iter_mut().zip(ops.iter()) {
            *a += (&fwd * op * &bwd).scale(w);
        }
    }
    acc.map(|a| a.scale(step / 3.0))
}

/// Pure-state QFIM from central differences of the encoded state vector
/// e^{−iH(φ)}|ψ⟩, with `ops` the collective operators of whatever space
/// `psi` lives in.
pub fn finite_difference_qfim(ops: &[CMatrix; 3], psi: &CVector, phi: [f64; 3], step: f64) -> Matrix3<f64> {
    let encode = |p: [f64; 3]| -> CVector {
        let h = hamiltonian(ops, p);
        expm(&h.map(|z| z * C64::new(0.0, -1.0))) * psi
    };
    let center = encode(phi);
    let derivs: Vec<CVector> = (0..3)
        .map(|mu| {
            let mut plus = phi;
            let mut minus = phi;
            plus[mu] += step;
            minus[mu] -= step;
            (encode(plus) - encode(minus)).unscale(2.0 * step)
        })
        .collect();
    let mut out = Matrix3::zeros();
    for mu in 0..3 {
        for nu in 0..3 {
            let g = derivs[mu].dotc(&derivs[nu]);
            let b = derivs[mu].dotc(&center) * center.dotc(&derivs[nu]);
            out[(mu, nu)] = 4.0 * (g - b).re;
        }
    }
    out
}

/// Product-space state obtained from Dicke amplitudes.
pub fn embed(n: usize, dicke: &CVector) -> CVector {
    dicke_isometry(n) * dicke
}

/// Classical Fisher information of a finite outcome distribution from
/// central differences of the probabilities.
pub fn finite_difference_cfim(
    probabilities: impl Fn([f64; 3]) -> Vec<f64>,
    phi: [f64; 3],
    step: f64,
    floor: f64,
) -> Matrix3<f64> {
    let p0 = probabilities(phi);
    let grads: Vec<Vec<f64>> = (0..3)
        .map(|mu| {
            let mut plus = phi;
            let mut minus = phi;
            plus[mu] += step;
            minus[mu] -= step;
            let pp = probabilities(plus);
            let pm = probabilities(minus);
            pp.iter().zip(pm).map(|(a, b)| (a - b) / (2.0 * step)).collect()
        })
        .collect();
    let mut out = Matrix3::zeros();
    for (k, &p) in p0.iter().enumerate() {
        if p <= floor {
            continue;
        }
        for mu in 0..3 {
            for nu in 0..3 {
                out[(mu, nu)] += grads[mu][k] * grads[nu][k] / p;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_diagonal() {
        let a = CMatrix::from_diagonal(&CVector::from_vec(vec![
            C64::new(0.3, 0.0),
            C64::new(0.0, -2.0),
            C64::new(-7.5, 1.0),
        ]));
        let e = expm(&a);
        for k in 0..3 {
            assert!((e[(k, k)] - a[(k, k)].exp()).norm() < 1e-13);
        }
    }

    #[test]
    fn expm_of_rotation_generator() {
        // exp(θ [[0,-1],[1,0]]) is a rotation by θ
        let t = 1.3;
        let a = CMatrix::from_row_slice(
            2,
            2,
            &[C64::new(0.0, 0.0), C64::new(-t, 0.0), C64::new(t, 0.0), C64::new(0.0, 0.0)],
        );
        let e = expm(&a);
        assert!((e[(0, 0)].re - t.cos()).abs() < 1e-14);
        assert!((e[(1, 0)].re - t.sin()).abs() < 1e-14);
    }

    #[test]
    fn isometry_columns_are_orthonormal() {
        let w = dicke_isometry(5);
        let g = w.adjoint() * &w;
        assert!((g - CMatrix::identity(6, 6)).norm() < 1e-14);
    }
}
