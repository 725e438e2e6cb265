//! Brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use hmm_polar::decoder::PriorProfile;
use hmm_polar::field::{FieldElement, KernelMatrix, PrimeField};
use hmm_polar::hmm::MarkovSource;
use rand::Rng;

/// `M ⊗ … ⊗ M` (`t` factors) as a dense row-major `m × m` matrix. Entry
/// `(r, c)` is the product of `M[r_d][c_d]` over the base-`k` digits.
pub fn dense_kronecker(kernel: &KernelMatrix, t: u32) -> Vec<Vec<FieldElement>> {
    let k = kernel.side();
    let f = kernel.field();
    let m = k.pow(t);
    (0..m)
        .map(|r| {
            (0..m)
                .map(|c| {
                    let (mut r, mut c, mut acc) = (r, c, 1u8);
                    for _ in 0..t {
                        acc = f.mul(acc, kernel.get(r % k, c % k));
                        r /= k;
                        c /= k;
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

pub fn dense_apply(
    f: &PrimeField,
    dense: &[Vec<FieldElement>],
    z: &[FieldElement],
) -> Vec<FieldElement> {
    dense
        .iter()
        .map(|row| {
            row.iter()
                .zip(z)
                .fold(0, |acc, (&a, &b)| f.add(acc, f.mul(a, b)))
        })
        .collect()
}

/// Every vector of `F_q^m` in lexicographic order.
pub fn all_vectors(q: usize, m: usize) -> Vec<Vec<FieldElement>> {
    let total = q.pow(m as u32);
    (0..total)
        .map(|mut x| {
            (0..m)
                .map(|_| {
                    let d = (x % q) as FieldElement;
                    x /= q;
                    d
                })
                .collect()
        })
        .collect()
}

/// Same decision rule as the decoder: first symbol within relative 1e-12
/// of the maximum.
pub fn oracle_argmax(dist: &[f64]) -> FieldElement {
    let best = dist.iter().copied().fold(0.0, f64::max);
    dist.iter()
        .position(|&p| p >= best * (1.0 - 1e-12))
        .unwrap_or(0) as FieldElement
}

struct Enumerated {
    u: Vec<FieldElement>,
    z: Vec<FieldElement>,
    weight: f64,
}

fn enumerate(kernel: &KernelMatrix, t: u32, prior: &PriorProfile) -> Vec<Enumerated> {
    let q = kernel.field().size();
    let dense = dense_kronecker(kernel, t);
    let m = dense.len();
    all_vectors(q, m)
        .into_iter()
        .map(|z| Enumerated {
            u: dense_apply(kernel.field(), &dense, &z),
            weight: z
                .iter()
                .enumerate()
                .map(|(i, &s)| prior.at(i)[s as usize])
                .product(),
            z,
        })
        .collect()
}

fn conditional(cands: &[&Enumerated], p: usize, q: usize) -> Vec<f64> {
    let mut dist = vec![0.0; q];
    for c in cands {
        dist[c.u[p] as usize] += c.weight;
    }
    let total: f64 = dist.iter().sum();
    if total > 0.0 {
        dist.iter_mut().for_each(|x| *x /= total);
    }
    dist
}

/// Sequential SC by exhaustive marginalization over `F_q^m`: returns
/// `(ẑ, û)`.
pub fn sc_oracle(
    kernel: &KernelMatrix,
    t: u32,
    prior: &PriorProfile,
    u: &[Option<FieldElement>],
) -> (Vec<FieldElement>, Vec<FieldElement>) {
    let q = kernel.field().size();
    let all = enumerate(kernel, t, prior);
    let mut cands: Vec<&Enumerated> = all.iter().collect();
    let mut u_hat = Vec::with_capacity(u.len());
    for (p, spec) in u.iter().enumerate() {
        let value = match spec {
            Some(v) => *v,
            None => oracle_argmax(&conditional(&cands, p, q)),
        };
        u_hat.push(value);
        cands.retain(|c| c.u[p] == value);
    }
    let z_hat = all
        .iter()
        .find(|c| c.u == u_hat)
        .expect("transform is a bijection")
        .z
        .clone();
    (z_hat, u_hat)
}

/// `P(U_p | U_{<p} = true prefix)` for every `p`, by exhaustive marginalization.
pub fn scan_oracle(
    kernel: &KernelMatrix,
    t: u32,
    prior: &PriorProfile,
    z_true: &[FieldElement],
) -> Vec<Vec<f64>> {
    let q = kernel.field().size();
    let all = enumerate(kernel, t, prior);
    let u_true = &all.iter().find(|c| c.z == z_true).unwrap().u;
    let mut cands: Vec<&Enumerated> = all.iter().collect();
    (0..u_true.len())
        .map(|p| {
            let dist = conditional(&cands, p, q);
            cands.retain(|c| c.u[p] == u_true[p]);
            dist
        })
        .collect()
}

/// `P(Y_n = · | Y_{<n} = prefix)` by summing over every hidden path.
pub fn path_enumeration(source: &MarkovSource, prefix: &[FieldElement]) -> Vec<f64> {
    let l = source.states();
    let q = source.q();
    let n = prefix.len() + 1;
    let mut joint = vec![0.0; q];
    for path in all_vectors(l, n) {
        let path: Vec<usize> = path.into_iter().map(usize::from).collect();
        let mut w = source.stationary()[path[0]];
        for i in 1..n {
            w *= source.transition(path[i], path[i - 1]);
        }
        for (i, &y) in prefix.iter().enumerate() {
            w *= source.emission(path[i], y);
        }
        for (y, slot) in joint.iter_mut().enumerate() {
            *slot += w * source.emission(path[n - 1], y as FieldElement);
        }
    }
    let total: f64 = joint.iter().sum();
    joint.iter_mut().for_each(|x| *x /= total);
    joint
}

/// A uniformly random invertible `k × k` kernel over `F_q`.
pub fn random_kernel(q: u32, k: usize, rng: &mut impl Rng) -> KernelMatrix {
    let field = PrimeField::new(q).unwrap();
    loop {
        let entries = (0..k * k)
            .map(|_| rng.gen_range(0..q) as FieldElement)
            .collect();
        if let Ok(kernel) = KernelMatrix::from_entries(field.clone(), k, entries) {
            return kernel;
        }
    }
}

/// A random invertible kernel that mixes (not a scaled permutation).
pub fn random_mixing_kernel(q: u32, k: usize, rng: &mut impl Rng) -> KernelMatrix {
    loop {
        let kernel = random_kernel(q, k, rng);
        let nonzero = kernel.entries().iter().filter(|&&e| e != 0).count();
        if nonzero > k {
            return kernel;
        }
    }
}

/// Strictly positive random priors, skewed so that decisions are not
/// near-uniform.
pub fn random_prior(q: usize, m: usize, rng: &mut impl Rng) -> PriorProfile {
    let mut flat = Vec::with_capacity(q * m);
    for _ in 0..m {
        let raw: Vec<f64> = (0..q)
            .map(|_| rng.gen_range(0.01f64..1.0).powi(3))
            .collect();
        let total: f64 = raw.iter().sum();
        flat.extend(raw.iter().map(|x| x / total));
    }
    PriorProfile::from_flat(q, flat)
}
