//! Two-qubit gate synthesis into single-qubit gates and at most three CNOTs.
//!
//! Works in the magic basis, where local gates are real orthogonal and the
//! nonlocal part `exp(i(a·XX + b·YY + c·ZZ))` is diagonal. Gates that are
//! local, or locally equivalent to one CNOT, get the short forms.

use crate::error::{Error, Result};
use crate::smallalg::{symmetric_eigen, unitarity_defect, Matrix2, Matrix4, C64, ONE, ZERO};
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

/// Wire 0 is the gate's first qubit (the high tensor factor), wire 1 the second.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Wire {
    First,
    Second,
}

#[derive(Clone, Debug)]
pub(crate) enum Op {
    Single(Wire, Matrix2),
    /// CNOT with the given control; the other wire is the target.
    Cx(Wire),
}

const SYNTHESIS_TOL: f64 = 1e-9;

/// Execution-order ops whose product equals `u` up to global phase.
pub(crate) fn decompose(u: &Matrix4) -> Result<Vec<Op>> {
    if !u.is_finite() || unitarity_defect(u) > 1e-8 {
        return Err(Error::Decomposition("gate is not unitary".into()));
    }
    let parts = magic_split(u)?;
    let before = split_local(&parts.right)?;
    let after = split_local(&parts.left)?;

    let delta = parts.delta;
    if let Some(signs) = LOCAL_SIGNS.iter().find(|s| equal_up_to_phase(&delta, s)) {
        let local = (parts.left * real_diagonal(signs)) * parts.right;
        let (first, second) = split_local(&local)?;
        return finish(
            u,
            vec![
                Op::Single(Wire::First, first),
                Op::Single(Wire::Second, second),
            ],
        );
    }
    let mut ops = vec![
        Op::Single(Wire::First, before.0),
        Op::Single(Wire::Second, before.1),
    ];
    if let Some((left, right)) = cnot_equivalent(&parts)? {
        ops = vec![
            Op::Single(Wire::First, right.0),
            Op::Single(Wire::Second, right.1),
        ];
        ops.push(Op::Cx(Wire::First));
        ops.push(Op::Single(Wire::First, left.0));
        ops.push(Op::Single(Wire::Second, left.1));
        return finish(u, ops);
    } else {
        let [_, a, b, c] = canonical_coordinates(&delta);
        ops.extend(canonical_ops(a, b, c));
    }
    ops.push(Op::Single(Wire::First, after.0));
    ops.push(Op::Single(Wire::Second, after.1));
    finish(u, ops)
}

/// `B` with columns the magic basis.
fn magic() -> Matrix4 {
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    let ih = C64::new(0.0, FRAC_1_SQRT_2);
    Matrix4([
        [h, ZERO, ZERO, ih],
        [ZERO, ih, h, ZERO],
        [ZERO, ih, -h, ZERO],
        [h, ZERO, ZERO, -ih],
    ])
}

/// Sign patterns of `XX`, `YY`, `ZZ` on the magic basis.
const XX: [f64; 4] = [1.0, 1.0, -1.0, -1.0];
const YY: [f64; 4] = [-1.0, 1.0, -1.0, 1.0];
const ZZ: [f64; 4] = [1.0, -1.0, -1.0, 1.0];

/// Diagonals of `1`, `XX`, `YY`, `ZZ` in the magic basis: the local gates
/// among diagonal ones.
const LOCAL_SIGNS: [[f64; 4]; 4] = [[1.0; 4], XX, YY, ZZ];

fn equal_up_to_phase(delta: &[C64; 4], signs: &[f64; 4]) -> bool {
    let omega = delta[0] * signs[0];
    (0..4).all(|k| (delta[k] - omega * signs[k]).norm() < SYNTHESIS_TOL)
}

fn real_diagonal(d: &[f64; 4]) -> Matrix4 {
    Matrix4::diagonal(d.map(|x| C64::new(x, 0.0)))
}

/// `u / det(u)^{1/4} = B · left · diag(delta) · right · B†` with `left` and
/// `right` in SO(4) (stored complex with zero imaginary parts).
struct MagicParts {
    left: Matrix4,
    delta: [C64; 4],
    right: Matrix4,
}

fn magic_split(u: &Matrix4) -> Result<MagicParts> {
    let b = magic();
    let su = u.scale(u.det().powf(-0.25));
    let up = (b.adjoint() * su) * b;
    let m2 = up.transpose() * up;
    let p = real_orthogonal_diagonalizer(&m2)?;
    let d = (p.transpose() * m2) * p;
    let mut delta = [ZERO; 4];
    for (k, x) in delta.iter_mut().enumerate() {
        *x = d.0[k][k].sqrt();
    }
    let prod = delta.iter().fold(ONE, |acc, x| acc * x);
    if prod.re < 0.0 {
        delta[0] = -delta[0];
    }
    let inv = Matrix4::diagonal(delta.map(|x| x.inv()));
    let k1 = (up * p) * inv;
    if k1.0.iter().flatten().any(|z| z.im.abs() > 1e-7) {
        return Err(Error::Decomposition(
            "magic-basis factor is not real".into(),
        ));
    }
    Ok(MagicParts {
        left: k1.map(|z| C64::new(z.re, 0.0)),
        delta,
        right: p.transpose(),
    })
}

/// Real orthogonal `P` (det +1) with `Pᵀ·m·P` diagonal, for a symmetric
/// unitary `m`. Its real and imaginary parts commute, so a generic real
/// combination of them shares the eigenvectors.
fn real_orthogonal_diagonalizer(m: &Matrix4) -> Result<Matrix4> {
    for mix in [
        0.618_033_988_749_895,
        std::f64::consts::SQRT_2,
        0.278_464_542_761_074,
        std::f64::consts::E,
    ] {
        let mut a = [0.0; 16];
        for i in 0..4 {
            for j in 0..4 {
                let z = (m.0[i][j] + m.0[j][i]) * 0.5;
                a[4 * i + j] = z.re + mix * z.im;
            }
        }
        let (_, vecs) = symmetric_eigen(4, &a, true);
        let vecs = vecs.expect("eigenvectors were requested");
        let mut p = Matrix4::zeros();
        for i in 0..4 {
            for j in 0..4 {
                p.0[i][j] = C64::new(vecs[4 * i + j], 0.0);
            }
        }
        if p.det().re < 0.0 {
            for row in p.0.iter_mut() {
                row[0] = -row[0];
            }
        }
        let d = (&p.transpose() * m) * p;
        let off = (0..4)
            .flat_map(|i| (0..4).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| d.0[i][j].norm())
            .fold(0.0, f64::max);
        if off < 1e-9 {
            return Ok(p);
        }
    }
    Err(Error::Decomposition(
        "could not diagonalize the magic-basis square".into(),
    ))
}

/// Factor a local gate `B·k·B†` (k ∈ SO(4)) into `(first, second)` with
/// `first ⊗ second` equal to it.
fn split_local(k: &Matrix4) -> Result<(Matrix2, Matrix2)> {
    let b = magic();
    let g = (&b * k) * b.adjoint();
    let block = |i: usize, j: usize| {
        Matrix2([
            [g.0[2 * i][2 * j], g.0[2 * i][2 * j + 1]],
            [g.0[2 * i + 1][2 * j], g.0[2 * i + 1][2 * j + 1]],
        ])
    };
    let (bi, bj) = (0..2)
        .flat_map(|i| (0..2).map(move |j| (i, j)))
        .max_by(|&(i, j), &(p, q)| frob(&block(i, j)).total_cmp(&frob(&block(p, q))))
        .expect("four blocks");
    let seed = block(bi, bj);
    let second = seed.scale(seed.det().sqrt().inv());
    let mut first = Matrix2([[ZERO; 2]; 2]);
    for i in 0..2 {
        for j in 0..2 {
            let blk = &block(i, j);
            // blk = first[i][j] · second, and second is unitary.
            let t = second.adjoint() * *blk;
            first.0[i][j] = (t.0[0][0] + t.0[1][1]) * 0.5;
        }
    }
    if Matrix4::kron(&first, &second).max_abs_diff(&g) > 1e-8 {
        return Err(Error::Decomposition("local factor is not a product".into()));
    }
    Ok((first, second))
}

fn frob(m: &Matrix2) -> f64 {
    m.0.iter().flatten().map(|z| z.norm_sqr()).sum()
}

/// `[φ, a, b, c]` with `delta_k = exp(i(φ + a·XX_k + b·YY_k + c·ZZ_k))`.
fn canonical_coordinates(delta: &[C64; 4]) -> [f64; 4] {
    let theta = delta.map(|d| d.arg());
    let mut out = [0.0; 4];
    for k in 0..4 {
        out[0] += theta[k] / 4.0;
        out[1] += XX[k] * theta[k] / 4.0;
        out[2] += YY[k] * theta[k] / 4.0;
        out[3] += ZZ[k] * theta[k] / 4.0;
    }
    out
}

/// `exp(i(a·XX + b·YY + c·ZZ))` up to global phase, with three CNOTs.
fn canonical_ops(a: f64, b: f64, c: f64) -> Vec<Op> {
    use Wire::{First, Second};
    vec![
        Op::Single(Second, Matrix2::rz(-FRAC_PI_2)),
        Op::Cx(Second),
        Op::Single(First, Matrix2::rz(FRAC_PI_2 - 2.0 * c)),
        Op::Single(Second, Matrix2::ry(2.0 * a - FRAC_PI_2)),
        Op::Cx(First),
        Op::Single(Second, Matrix2::ry(FRAC_PI_2 - 2.0 * b)),
        Op::Cx(Second),
        Op::Single(First, Matrix2::rz(FRAC_PI_2)),
    ]
}

type LocalPair = (Matrix2, Matrix2);

/// If `parts` is locally a CNOT, the locals around it: `u ∝ left · CX · right`.
fn cnot_equivalent(parts: &MagicParts) -> Result<Option<(LocalPair, LocalPair)>> {
    let cx = magic_split(&Matrix4::cnot())?;
    let phases = [ONE, C64::new(0.0, 1.0), -ONE, C64::new(0.0, -1.0)];
    let candidates = permutations4().into_iter().flat_map(|perm| {
        LOCAL_SIGNS
            .iter()
            .flat_map(move |s| phases.map(|w| (perm, s, w)))
    });
    for (perm, signs, omega) in candidates {
        let hit = (0..4).all(|k| {
            (parts.delta[k] - omega * signs[k] * cx.delta[perm[k]]).norm() < SYNTHESIS_TOL
        });
        if !hit {
            continue;
        }
        // Π with (Π·D·Πᵀ)_kk = D_perm[k]; a sign flip fixes det Π = -1 and
        // commutes with the diagonal. The sign pattern is a local gate.
        let mut pi = Matrix4::zeros();
        for k in 0..4 {
            pi.0[k][perm[k]] = ONE;
        }
        if pi.det().re < 0.0 {
            for row in pi.0.iter_mut() {
                row[0] = -row[0];
            }
        }
        let left = ((parts.left * real_diagonal(signs)) * pi) * cx.left.transpose();
        let right = (cx.right.transpose() * pi.transpose()) * parts.right;
        return Ok(Some((split_local(&left)?, split_local(&right)?)));
    }
    Ok(None)
}

fn permutations4() -> Vec<[usize; 4]> {
    let mut out = Vec::with_capacity(24);
    for a in 0..4 {
        for b in (0..4).filter(|&b| b != a) {
            for c in (0..4).filter(|&c| c != a && c != b) {
                out.push([a, b, c, 6 - a - b - c]);
            }
        }
    }
    out
}

/// Merge runs of single-qubit gates and check the product against `u`.
fn finish(u: &Matrix4, ops: Vec<Op>) -> Result<Vec<Op>> {
    let mut merged: Vec<Op> = Vec::new();
    let mut pending: [Option<Matrix2>; 2] = [None, None];
    let slot = |w: Wire| if w == Wire::First { 0 } else { 1 };
    let wire = |s: usize| if s == 0 { Wire::First } else { Wire::Second };
    for op in ops {
        match op {
            Op::Single(w, m) => {
                let p = &mut pending[slot(w)];
                *p = Some(match p.take() {
                    Some(prev) => m * prev,
                    None => m,
                });
            }
            Op::Cx(c) => {
                for (s, p) in pending.iter_mut().enumerate() {
                    if let Some(m) = p.take() {
                        merged.push(Op::Single(wire(s), m));
                    }
                }
                merged.push(Op::Cx(c));
            }
        }
    }
    for (s, p) in pending.iter_mut().enumerate() {
        if let Some(m) = p.take() {
            merged.push(Op::Single(wire(s), m));
        }
    }
    merged.retain(|op| !matches!(op, Op::Single(_, m) if is_phase(m)));
    let product = ops_matrix(&merged);
    let overlap = (&product.adjoint() * u).trace().norm() / 4.0;
    if overlap < 1.0 - SYNTHESIS_TOL {
        return Err(Error::Decomposition(format!(
            "synthesized circuit misses the gate (overlap {overlap})"
        )));
    }
    Ok(merged)
}

/// True when `m` is a multiple of the identity.
pub(crate) fn is_phase(m: &Matrix2) -> bool {
    m.0[0][1].norm() < 1e-12 && m.0[1][0].norm() < 1e-12 && (m.0[0][0] - m.0[1][1]).norm() < 1e-12
}

/// The 4×4 operator of an execution-order op list.
pub(crate) fn ops_matrix(ops: &[Op]) -> Matrix4 {
    let mut acc = Matrix4::identity();
    for op in ops {
        let step = match op {
            Op::Single(Wire::First, m) => Matrix4::kron(m, &Matrix2::identity()),
            Op::Single(Wire::Second, m) => Matrix4::kron(&Matrix2::identity(), m),
            Op::Cx(Wire::First) => Matrix4::cnot(),
            Op::Cx(Wire::Second) => Matrix4::cnot().swap_qubits(),
        };
        acc = step * acc;
    }
    acc
}
