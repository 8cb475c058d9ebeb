//! The two state vectors a sweep carries, `R` (target side) and `L` (zero
//! side), in a complex and a real-arithmetic flavour. Real targets with real
//! gates stay real through every SVD, so amplitude-encoded data takes the
//! real path at about a quarter of the cost.

use super::env_matrix;
use crate::smallalg::{singular_values_4x4, Matrix4, NEGLIGIBLE_COLUMN};
use crate::statevec::{Circuit, StateVector};

pub(super) trait Workspace {
    /// `R = target`, `L = U_2 … U_M |0⟩`.
    fn load(&mut self, target: &StateVector, circuit: &Circuit);
    fn env(&mut self, qa: usize, qb: usize) -> Matrix4;
    /// Sum of singular values of an environment this workspace produced.
    fn nuclear_norm(&self, e: &Matrix4) -> f64;
    /// `R ← U† R`.
    fn advance_target(&mut self, u: &Matrix4, qa: usize, qb: usize);
    /// `L ← U† L`.
    fn advance_zero(&mut self, u: &Matrix4, qa: usize, qb: usize);
}

pub(super) struct ComplexWorkspace {
    r: StateVector,
    l: StateVector,
}

impl ComplexWorkspace {
    pub(super) fn new(n_qubits: usize) -> Self {
        let zero = StateVector::zero(n_qubits).expect("qubit count was validated");
        ComplexWorkspace {
            r: zero.clone(),
            l: zero,
        }
    }
}

impl Workspace for ComplexWorkspace {
    fn load(&mut self, target: &StateVector, circuit: &Circuit) {
        self.r = target.clone();
        self.l = StateVector::zero(target.n_qubits()).expect("qubit count was validated");
        for g in circuit.gates()[1..].iter().rev() {
            self.l.apply_matrix(&g.matrix, g.qa, g.qb);
        }
    }

    fn nuclear_norm(&self, e: &Matrix4) -> f64 {
        singular_values_4x4(e).iter().sum()
    }

    fn env(&mut self, qa: usize, qb: usize) -> Matrix4 {
        env_matrix(self.r.amplitudes(), self.l.amplitudes(), qa, qb)
    }

    fn advance_target(&mut self, u: &Matrix4, qa: usize, qb: usize) {
        self.r.apply_matrix_adjoint(u, qa, qb);
    }

    fn advance_zero(&mut self, u: &Matrix4, qa: usize, qb: usize) {
        self.l.apply_matrix_adjoint(u, qa, qb);
    }
}

type Real4 = [[f64; 4]; 4];

/// Lowest pair bit for which the contiguous kernel applies.
const MIN_RUN_BIT: usize = 3;

/// A copy of `R` and `L` with qubit `q` moved to bit `(q + shift) mod n`.
/// Refreshed on first use after `R` or `L` changes.
struct RotatedCopy {
    to_rotated: Vec<u32>,
    r: Vec<f64>,
    l: Vec<f64>,
    stale: bool,
}

/// How to contract a given pair: which copy (0 = unrotated) and the bit
/// offsets of its four pair states.
#[derive(Clone, Copy)]
struct PairPlan {
    copy: usize,
    offsets: [usize; 4],
    lo: usize,
    hi: usize,
}

/// Real amplitudes plus rotated copies so that every pair can be contracted
/// over contiguous runs.
pub(super) struct RealWorkspace {
    n_qubits: usize,
    r: Vec<f64>,
    l: Vec<f64>,
    copies: Vec<RotatedCopy>,
    plans: Vec<Option<PairPlan>>,
    r_slices: Vec<f64>,
    l_slices: Vec<f64>,
}

impl RealWorkspace {
    pub(super) fn new(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        // Every cyclic shift; each pair uses the one that pushes both of its
        // bits highest.
        let shifts: Vec<usize> = if n_qubits >= 3 * MIN_RUN_BIT {
            vec![0, MIN_RUN_BIT, 2 * MIN_RUN_BIT]
        } else {
            vec![0]
        };
        let copies = shifts[1..]
            .iter()
            .map(|&shift| RotatedCopy {
                to_rotated: (0..dim)
                    .map(|i| rotate_bits(i, shift, n_qubits) as u32)
                    .collect(),
                r: vec![0.0; dim],
                l: vec![0.0; dim],
                stale: true,
            })
            .collect();
        let mut plans = vec![None; n_qubits * n_qubits];
        for qa in 0..n_qubits {
            for qb in 0..n_qubits {
                if qa == qb {
                    continue;
                }
                plans[qa * n_qubits + qb] = shifts
                    .iter()
                    .enumerate()
                    .map(|(copy, &shift)| {
                        let a = (qa + shift) % n_qubits;
                        let b = (qb + shift) % n_qubits;
                        PairPlan {
                            copy,
                            offsets: [0, 1 << b, 1 << a, (1 << a) | (1 << b)],
                            lo: a.min(b),
                            hi: a.max(b),
                        }
                    })
                    .filter(|p| p.lo >= MIN_RUN_BIT)
                    .max_by_key(|p| (p.lo, std::cmp::Reverse(p.copy)));
            }
        }
        RealWorkspace {
            n_qubits,
            r: vec![0.0; dim],
            l: vec![0.0; dim],
            copies,
            plans,
            r_slices: vec![0.0; dim],
            l_slices: vec![0.0; dim],
        }
    }

    /// True when the target and every gate have zero imaginary parts.
    pub(super) fn applies(target: &StateVector, circuit: &Circuit) -> bool {
        target.amplitudes().iter().all(|z| z.im == 0.0)
            && circuit
                .gates()
                .iter()
                .all(|g| g.matrix.0.iter().flatten().all(|z| z.im == 0.0))
    }

    fn mark_stale(&mut self) {
        self.copies.iter_mut().for_each(|c| c.stale = true);
    }

    fn real_env(&mut self, qa: usize, qb: usize) -> Real4 {
        match self.plans[qa * self.n_qubits + qb] {
            Some(plan) => {
                let (r, l) = if plan.copy == 0 {
                    (&self.r, &self.l)
                } else {
                    let c = &mut self.copies[plan.copy - 1];
                    if c.stale {
                        for ((&src_r, &src_l), &dst) in
                            self.r.iter().zip(&self.l).zip(&c.to_rotated)
                        {
                            c.r[dst as usize] = src_r;
                            c.l[dst as usize] = src_l;
                        }
                        c.stale = false;
                    }
                    (&c.r, &c.l)
                };
                run_products(r, l, &plan)
            }
            None => {
                gather(&self.r, qa, qb, &mut self.r_slices);
                gather(&self.l, qa, qb, &mut self.l_slices);
                slice_products(&self.r_slices, &self.l_slices)
            }
        }
    }
}

fn rotate_bits(i: usize, shift: usize, n: usize) -> usize {
    let mask = (1usize << n) - 1;
    ((i << shift) | (i >> (n - shift))) & mask
}

fn real_part(u: &Matrix4) -> Real4 {
    let mut m = [[0.0; 4]; 4];
    for (row, src) in m.iter_mut().zip(&u.0) {
        for (x, z) in row.iter_mut().zip(src) {
            *x = z.re;
        }
    }
    m
}

fn to_complex(m: &Real4) -> Matrix4 {
    Matrix4::from_real(*m)
}

impl Workspace for RealWorkspace {
    fn load(&mut self, target: &StateVector, circuit: &Circuit) {
        for (x, z) in self.r.iter_mut().zip(target.amplitudes()) {
            *x = z.re;
        }
        self.l.iter_mut().for_each(|x| *x = 0.0);
        self.l[0] = 1.0;
        for g in circuit.gates()[1..].iter().rev() {
            apply_real(&mut self.l, &real_part(&g.matrix), g.qa, g.qb);
        }
        self.mark_stale();
    }

    fn nuclear_norm(&self, e: &Matrix4) -> f64 {
        real_singular_value_sum(&mut real_part(e))
    }

    fn env(&mut self, qa: usize, qb: usize) -> Matrix4 {
        to_complex(&self.real_env(qa, qb))
    }

    fn advance_target(&mut self, u: &Matrix4, qa: usize, qb: usize) {
        apply_real(&mut self.r, &transpose(&real_part(u)), qa, qb);
        self.mark_stale();
    }

    fn advance_zero(&mut self, u: &Matrix4, qa: usize, qb: usize) {
        apply_real(&mut self.l, &transpose(&real_part(u)), qa, qb);
        self.mark_stale();
    }
}

fn transpose(m: &Real4) -> Real4 {
    let mut t = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            t[i][j] = m[j][i];
        }
    }
    t
}

fn apply_real(v: &mut [f64], m: &Real4, qa: usize, qb: usize) {
    let off = [
        0,
        1usize << qb,
        1usize << qa,
        (1usize << qa) | (1usize << qb),
    ];
    let (lo, hi) = if qa < qb { (qa, qb) } else { (qb, qa) };
    let run = 1usize << lo;
    for block in (0..v.len()).step_by(2 << hi) {
        let mut start = block;
        while start < block + (1 << hi) {
            if run < LANES {
                for k in start..start + run {
                    let x = off.map(|o| v[k + o]);
                    for (row, o) in m.iter().zip(off) {
                        v[k + o] = row[0] * x[0] + row[1] * x[1] + row[2] * x[2] + row[3] * x[3];
                    }
                }
            } else {
                for c in (start..start + run).step_by(LANES) {
                    let x: [[f64; LANES]; 4] =
                        off.map(|o| v[c + o..c + o + LANES].try_into().expect("chunk of LANES"));
                    for (row, o) in m.iter().zip(off) {
                        let out = &mut v[c + o..c + o + LANES];
                        for t in 0..LANES {
                            out[t] = row[0] * x[0][t]
                                + row[1] * x[1][t]
                                + row[2] * x[2][t]
                                + row[3] * x[3][t];
                        }
                    }
                }
            }
            start += 2 << lo;
        }
    }
}

/// Lay out `src` as four contiguous slices, slice `i` holding the amplitudes
/// whose pair bits read `i = 2·bit(qa) + bit(qb)`, in order of the rest bits.
fn gather(src: &[f64], qa: usize, qb: usize, out: &mut [f64]) {
    let quarter = src.len() >> 2;
    let offsets = [
        0,
        1usize << qb,
        1usize << qa,
        (1usize << qa) | (1usize << qb),
    ];
    let (lo, hi) = if qa < qb { (qa, qb) } else { (qb, qa) };
    let run = 1usize << lo;
    let mut k = 0;
    for block in (0..src.len()).step_by(2 << hi) {
        for start in (block..block + (1 << hi)).step_by(2 << lo) {
            for (i, off) in offsets.iter().enumerate() {
                out[i * quarter + k..i * quarter + k + run]
                    .copy_from_slice(&src[start + off..start + off + run]);
            }
            k += run;
        }
    }
}

/// `E[i][j] = ⟨r_i, l_j⟩` over the gathered slices.
fn slice_products(r: &[f64], l: &[f64]) -> Real4 {
    let q = r.len() / 4;
    let mut e = [[0.0; 4]; 4];
    for (i, row) in e.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = r[i * q..(i + 1) * q]
                .iter()
                .zip(&l[j * q..(j + 1) * q])
                .map(|(x, y)| x * y)
                .sum();
        }
    }
    e
}

const LANES: usize = 8;

/// `E[i][j] = Σ_rest r[rest + off_i] · l[rest + off_j]`, walking the rest
/// indices as contiguous runs of length `2^lo ≥ LANES`.
fn run_products(r: &[f64], l: &[f64], plan: &PairPlan) -> Real4 {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma")
        {
            // SAFETY: both features were detected at runtime.
            return unsafe { run_products_avx2(r, l, plan) };
        }
    }
    run_products_body(r, l, plan)
}

/// Start indices of the contiguous runs for a pair plan.
fn run_starts(len: usize, plan: &PairPlan) -> impl Iterator<Item = usize> {
    let (lo, hi) = (plan.lo, plan.hi);
    (0..len)
        .step_by(2 << hi)
        .flat_map(move |block| (block..block + (1 << hi)).step_by(2 << lo))
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn run_products_avx2(r: &[f64], l: &[f64], plan: &PairPlan) -> Real4 {
    use std::arch::x86_64::*;
    let len = r.len();
    let run = 1usize << plan.lo;
    let off = plan.offsets;
    // Every index touched is `start + off[_] + c` with `start + off[3] + run ≤ len`.
    assert!(l.len() == len && run >= LANES && plan.lo < plan.hi && (2usize << plan.hi) <= len);
    assert!(off[3] == (1 << plan.lo) | (1 << plan.hi) && off[1] | off[2] == off[3]);
    let (rp, lp) = (r.as_ptr(), l.as_ptr());
    let mut e = [[0.0; 4]; 4];
    for (i, row) in e.iter_mut().enumerate() {
        let mut acc = [_mm256_setzero_pd(); 8];
        let mut block = 0;
        while block < len {
            let mut start = block;
            while start < block + (1 << plan.hi) {
                let ri = rp.add(start + off[i]);
                let lj = off.map(|o| lp.add(start + o));
                let mut c = 0;
                while c < run {
                    let x_lo = _mm256_loadu_pd(ri.add(c));
                    let x_hi = _mm256_loadu_pd(ri.add(c + 4));
                    for j in 0..4 {
                        let y_lo = _mm256_loadu_pd(lj[j].add(c));
                        let y_hi = _mm256_loadu_pd(lj[j].add(c + 4));
                        acc[2 * j] = _mm256_fmadd_pd(x_lo, y_lo, acc[2 * j]);
                        acc[2 * j + 1] = _mm256_fmadd_pd(x_hi, y_hi, acc[2 * j + 1]);
                    }
                    c += LANES;
                }
                start += 2 << plan.lo;
            }
            block += 2 << plan.hi;
        }
        for (j, v) in row.iter_mut().enumerate() {
            let mut lanes = [0.0; LANES];
            _mm256_storeu_pd(lanes.as_mut_ptr(), acc[2 * j]);
            _mm256_storeu_pd(lanes.as_mut_ptr().add(4), acc[2 * j + 1]);
            *v = lanes.iter().sum();
        }
    }
    e
}

/// Portable twin of the vector kernel with the same summation order and
/// fused multiply-adds, so both give bit-identical results.
fn run_products_body(r: &[f64], l: &[f64], plan: &PairPlan) -> Real4 {
    let run = 1usize << plan.lo;
    let off = plan.offsets;
    let mut e = [[0.0; 4]; 4];
    for (i, row) in e.iter_mut().enumerate() {
        let mut acc = [[0.0; LANES]; 4];
        for start in run_starts(r.len(), plan) {
            let ri = &r[start + off[i]..start + off[i] + run];
            for (j, a) in acc.iter_mut().enumerate() {
                let lj = &l[start + off[j]..start + off[j] + run];
                for (x, y) in ri.chunks_exact(LANES).zip(lj.chunks_exact(LANES)) {
                    for t in 0..LANES {
                        a[t] = x[t].mul_add(y[t], a[t]);
                    }
                }
            }
        }
        for (v, a) in row.iter_mut().zip(&acc) {
            *v = a.iter().sum();
        }
    }
    e
}

/// Sum of singular values by one-sided Jacobi; `a` is overwritten.
fn real_singular_value_sum(a: &mut Real4) -> f64 {
    let floor = NEGLIGIBLE_COLUMN * a.iter().flatten().map(|x| x * x).sum::<f64>();
    for _ in 0..60 {
        let mut rotated = false;
        for p in 0..3 {
            for q in (p + 1)..4 {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for row in a.iter() {
                    alpha += row[p] * row[p];
                    beta += row[q] * row[q];
                    gamma += row[p] * row[q];
                }
                if gamma == 0.0
                    || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt()
                    || alpha.min(beta) <= floor
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for row in a.iter_mut() {
                    let (xp, xq) = (row[p], row[q]);
                    row[p] = c * xp - s * xq;
                    row[q] = s * xp + c * xq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    (0..4)
        .map(|c| a.iter().map(|row| row[c] * row[c]).sum::<f64>().sqrt())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn real_env_matches_complex_env() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2, 3, 4, 5, 6, 9, 10] {
            let x: Vec<f64> = (0..1 << n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let target = StateVector::from_classical(&x).unwrap();
            let mut circuit = Circuit::new(n).unwrap();
            for _ in 0..3 {
                circuit
                    .push(crate::statevec::TwoQubitGate::identity(0, 1).unwrap())
                    .unwrap();
            }
            let mut re = RealWorkspace::new(n);
            let mut cx = ComplexWorkspace::new(n);
            re.load(&target, &circuit);
            cx.load(&target, &circuit);
            for a in 0..n {
                for b in 0..n {
                    if a == b {
                        continue;
                    }
                    let e1 = re.env(a, b);
                    let e2 = cx.env(a, b);
                    let (s1, s2) = (re.nuclear_norm(&e1), cx.nuclear_norm(&e2));
                    assert!(e1.max_abs_diff(&e2) < 1e-14, "n={n} ({a},{b})");
                    assert!((s1 - s2).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn vector_and_portable_kernels_agree_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 10;
        let r: Vec<f64> = (0..1 << n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let l: Vec<f64> = (0..1 << n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let ws = RealWorkspace::new(n);
        for plan in ws.plans.iter().flatten().filter(|p| p.copy == 0) {
            let portable = run_products_body(&r, &l, plan);
            assert_eq!(portable, run_products(&r, &l, plan));
        }
    }

    #[test]
    fn real_gate_application_matches_complex() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for n in [4, 10] {
            for _ in 0..20 {
                let g = crate::statevec::tests::random_gate(&mut rng, n);
                let real_m = Matrix4::from_real(real_part(&g.matrix));
                let x: Vec<f64> = (0..1 << n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let mut v = x.clone();
                apply_real(&mut v, &real_part(&real_m), g.qa, g.qb);
                let mut s = StateVector::from_amplitudes(
                    x.iter()
                        .map(|&a| crate::smallalg::C64::new(a, 0.0))
                        .collect(),
                )
                .unwrap();
                s.apply_matrix(&real_m, g.qa, g.qb);
                for (a, b) in v.iter().zip(s.amplitudes()) {
                    assert!((a - b.re).abs() < 1e-14);
                }
            }
        }
    }
}
