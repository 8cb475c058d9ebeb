//! Automatic quantum circuit encoding.
//!
//! Given a target state `|Ψ⟩`, build a circuit `C = U_1 U_2 … U_M` of
//! two-qubit gates that maximizes the fidelity `F = |⟨0ⁿ|C†|Ψ⟩|`. Each gate is
//! updated in turn by coordinate ascent: with every other gate fixed, the
//! overlap is linear in the gate, so the best gate for each candidate qubit
//! pair follows from the SVD of a 4×4 environment matrix, and the pair with
//! the largest sum of singular values wins. The circuit is grown by `δ`
//! identity gates whenever sweeping stalls below the target fidelity.
//!
//! Environment convention. Splitting `C = A · U_m · B` with
//! `A = U_1 … U_{m-1}` and `B = U_{m+1} … U_M`, the overlap is
//! `⟨0|C†|Ψ⟩ = ⟨B0| U_m† |A†Ψ⟩`. With `R = A†Ψ` and `L = B|0⟩`,
//!
//! ```text
//! E[i, j] = Σ_rest R[rest; i] · conj(L[rest; j]),     ⟨0|C†|Ψ⟩ = tr(E · U_m†)
//! ```
//!
//! where `i, j = 2·bit(qa) + bit(qb)`. Writing `E = X·D·Y`, the gate
//! `U_m = X·Y` makes the overlap real and equal to `Σ d_n`, its maximum.

use crate::error::{Error, Result};
use crate::smallalg::{nearest_unitary, svd_4x4, Matrix4, C64, ZERO};
use crate::statevec::{insert_zero_bit, Circuit, StateVector, TwoQubitGate};

mod workspace;

use workspace::{ComplexWorkspace, RealWorkspace, Workspace};

/// Encoder inputs `(M_0, δ, M_max, N, F_target)` plus stopping knobs.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodeParams {
    /// `M_0`: gates in the initial circuit.
    pub initial_gates: usize,
    /// `δ`: gates appended per growth step.
    pub delta: usize,
    /// `M_max`: gate budget.
    pub max_gates: usize,
    /// `N`: maximum sweeps between growth steps.
    pub sweeps: usize,
    pub target_fidelity: f64,
    /// A run of sweeps ends early once a full sweep gains less than this.
    pub sweep_tolerance: f64,
    /// Stop sweeping as soon as the target fidelity is reached.
    pub stop_at_target: bool,
}

pub const DEFAULT_SWEEPS: usize = 100;
pub const DEFAULT_SWEEP_TOLERANCE: f64 = 1e-6;
/// Hard ceiling on `M_max`.
pub const MAX_GATE_BUDGET: usize = 1024;

impl EncodeParams {
    /// `M_0 = δ`, `N` = [`DEFAULT_SWEEPS`].
    pub fn new(max_gates: usize, delta: usize, target_fidelity: f64) -> Self {
        EncodeParams {
            initial_gates: delta,
            delta,
            max_gates,
            sweeps: DEFAULT_SWEEPS,
            target_fidelity,
            sweep_tolerance: DEFAULT_SWEEP_TOLERANCE,
            stop_at_target: true,
        }
    }

    pub fn for_tier(tier: FidelityTier) -> Self {
        let (max_gates, delta) = tier.budget();
        Self::new(max_gates, delta, tier.threshold())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.initial_gates < 1 {
            return bad("initial gate count must be ≥ 1".into());
        }
        if self.delta < 1 {
            return bad("delta must be ≥ 1".into());
        }
        if self.initial_gates > self.max_gates {
            return bad(format!(
                "initial gate count {} exceeds the budget {}",
                self.initial_gates, self.max_gates
            ));
        }
        if self.max_gates > MAX_GATE_BUDGET {
            return bad(format!(
                "gate budget {} exceeds {MAX_GATE_BUDGET}",
                self.max_gates
            ));
        }
        if self.sweeps < 1 {
            return bad("sweep count must be ≥ 1".into());
        }
        if !(self.target_fidelity > 0.0 && self.target_fidelity <= 1.0) {
            return bad(format!(
                "target fidelity {} not in (0, 1]",
                self.target_fidelity
            ));
        }
        if self.sweep_tolerance.is_nan() || self.sweep_tolerance < 0.0 {
            return bad("sweep tolerance must be non-negative".into());
        }
        Ok(())
    }
}

/// The three published fidelity tiers and their gate budgets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FidelityTier {
    F80,
    F90,
    F95,
}

impl FidelityTier {
    pub const ALL: [FidelityTier; 3] = [FidelityTier::F80, FidelityTier::F90, FidelityTier::F95];

    pub fn threshold(self) -> f64 {
        match self {
            FidelityTier::F80 => 0.80,
            FidelityTier::F90 => 0.90,
            FidelityTier::F95 => 0.95,
        }
    }

    /// `(M_max, δ)`.
    pub fn budget(self) -> (usize, usize) {
        match self {
            FidelityTier::F80 => (25, 3),
            FidelityTier::F90 => (50, 6),
            FidelityTier::F95 => (100, 12),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            FidelityTier::F80 => "f80",
            FidelityTier::F90 => "f90",
            FidelityTier::F95 => "f95",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.tag() == tag)
    }
}

#[derive(Clone, Debug)]
pub struct EncodeResult {
    pub circuit: Circuit,
    pub fidelity: f64,
    pub sweeps_used: usize,
    pub gate_count: usize,
}

/// Progress events reported to an observer during [`encode_with_observer`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Step {
    /// Gate at `position` (0-based, operator order) was re-optimized.
    GateUpdate {
        position: usize,
        pair: (usize, usize),
        before: f64,
        after: f64,
    },
    /// `count` identity gates were appended.
    GatesAdded {
        count: usize,
        before: f64,
        after: f64,
    },
    /// A full sweep finished.
    SweepDone { gate_count: usize, fidelity: f64 },
}

/// Environment matrix of one gate slot for one qubit pair.
#[derive(Clone, Copy, Debug)]
pub struct FidelityEnv {
    pub matrix: Matrix4,
    pub pair: (usize, usize),
}

impl FidelityEnv {
    /// The overlap `⟨0|C†|Ψ⟩` obtained when `gate` fills this slot.
    pub fn overlap_with(&self, gate: &Matrix4) -> C64 {
        (self.matrix * gate.adjoint()).trace()
    }
}

/// `⟨0ⁿ|C†|Ψ⟩`.
pub fn overlap(circuit: &Circuit, target: &StateVector) -> Result<C64> {
    if circuit.n_qubits() != target.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: circuit.n_qubits(),
            found: target.n_qubits(),
        });
    }
    circuit.run_zero().inner(target)
}

/// `F = |⟨0ⁿ|C†|Ψ⟩|`.
pub fn fidelity(circuit: &Circuit, target: &StateVector) -> Result<f64> {
    overlap(circuit, target).map(|z| z.norm())
}

/// All unordered qubit pairs `(a, b)`, `a < b`, in lexicographic order.
pub fn candidate_pairs(n_qubits: usize) -> Vec<(usize, usize)> {
    (0..n_qubits)
        .flat_map(|a| ((a + 1)..n_qubits).map(move |b| (a, b)))
        .collect()
}

/// Environment of slot `position` (0-based; `position == M` means a new gate
/// appended at the end) for the qubit pair `pair`.
pub fn fidelity_env(
    circuit: &Circuit,
    target: &StateVector,
    position: usize,
    pair: (usize, usize),
) -> Result<FidelityEnv> {
    let n = circuit.n_qubits();
    if target.n_qubits() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: target.n_qubits(),
        });
    }
    if position > circuit.len() {
        return Err(Error::InvalidParams(format!(
            "gate position {position} outside 0..={}",
            circuit.len()
        )));
    }
    let (qa, qb) = pair;
    if qa == qb || qa.max(qb) >= n {
        return Err(Error::InvalidGate(format!(
            "invalid qubit pair ({qa}, {qb})"
        )));
    }
    let gates = circuit.gates();
    let mut r = target.clone();
    for g in &gates[..position] {
        r.apply_matrix_adjoint(&g.matrix, g.qa, g.qb);
    }
    let mut l = StateVector::zero(n)?;
    for g in gates[(position + 1).min(gates.len())..].iter().rev() {
        l.apply_matrix(&g.matrix, g.qa, g.qb);
    }
    Ok(FidelityEnv {
        matrix: env_matrix(r.amplitudes(), l.amplitudes(), qa, qb),
        pair,
    })
}

/// `E[i, j] = Σ_rest r[rest; i] · conj(l[rest; j])`.
pub(crate) fn env_matrix(r: &[C64], l: &[C64], qa: usize, qb: usize) -> Matrix4 {
    let ma = 1usize << qa;
    let mb = 1usize << qb;
    let (lo, hi) = if qa < qb { (qa, qb) } else { (qb, qa) };
    let mut acc = [[ZERO; 4]; 4];
    for k in 0..(r.len() >> 2) {
        let i00 = insert_zero_bit(insert_zero_bit(k, lo), hi);
        let idx = [i00, i00 | mb, i00 | ma, i00 | ma | mb];
        let rv = [r[idx[0]], r[idx[1]], r[idx[2]], r[idx[3]]];
        let lv = [
            l[idx[0]].conj(),
            l[idx[1]].conj(),
            l[idx[2]].conj(),
            l[idx[3]].conj(),
        ];
        for i in 0..4 {
            for j in 0..4 {
                acc[i][j] += rv[i] * lv[j];
            }
        }
    }
    Matrix4(acc)
}

/// The gate maximizing `|tr(E·U†)|`, and that maximum `Σ d_n`.
pub fn optimal_gate(env: &FidelityEnv) -> Result<(Matrix4, f64)> {
    let svd = svd_4x4(&env.matrix)?;
    Ok((svd.x * svd.y, svd.nuclear_norm()))
}

/// Singular values below this fraction of the largest count as zero.
const NULL_SPACE_RTOL: f64 = 1e-13;

/// Like [`optimal_gate`], but on directions the environment does not see the
/// gate stays as close as possible to `prev`. This makes the choice unique in
/// the rank-deficient case, which is common right after growth. Returns the
/// gate and the overlap modulus it attains.
fn optimal_gate_near(env: &Matrix4, prev: &Matrix4) -> Result<(Matrix4, f64)> {
    let svd = svd_4x4(env)?;
    let floor = svd.d[0] * NULL_SPACE_RTOL;
    let rank = svd.d.iter().filter(|&&d| d > floor && d > 0.0).count();
    let u = if rank == 4 {
        svd.x * svd.y
    } else {
        let mut seen = Matrix4::zeros();
        let mut out_proj = Matrix4::identity();
        let mut in_proj = Matrix4::identity();
        for k in 0..rank {
            for i in 0..4 {
                for j in 0..4 {
                    seen.0[i][j] += svd.x.0[i][k] * svd.y.0[k][j];
                    out_proj.0[i][j] -= svd.x.0[i][k] * svd.x.0[j][k].conj();
                    in_proj.0[i][j] -= svd.y.0[k][i].conj() * svd.y.0[k][j];
                }
            }
        }
        let rest = svd_4x4(&((&out_proj * prev) * in_proj))?;
        let mut partial = seen;
        for k in (0..4 - rank).filter(|&k| rest.d[k] > 1e-8) {
            for i in 0..4 {
                for j in 0..4 {
                    partial.0[i][j] += rest.x.0[i][k] * rest.y.0[k][j];
                }
            }
        }
        // Any directions still unassigned get an arbitrary completion.
        nearest_unitary(&partial)?
    };
    let f = (env * &u.adjoint()).trace().norm();
    Ok((u, f))
}

/// One pass of coordinate ascent over every gate, first to last in operator
/// order. Returns the updated circuit and its fidelity.
pub fn sweep(circuit: &Circuit, target: &StateVector) -> Result<(Circuit, f64)> {
    let mut out = circuit.clone();
    let f = Sweeper::new(target, circuit)?.sweep(&mut out, &mut |_| {})?;
    Ok((out, f))
}

pub fn encode(x: &[f64], params: &EncodeParams) -> Result<EncodeResult> {
    let target = StateVector::from_classical(x)?;
    encode_state(&target, params)
}

pub fn encode_state(target: &StateVector, params: &EncodeParams) -> Result<EncodeResult> {
    encode_with_observer(target, params, &mut |_| {})
}

/// Grow-and-sweep encoding, reporting every gate update and growth step.
pub fn encode_with_observer(
    target: &StateVector,
    params: &EncodeParams,
    observer: &mut dyn FnMut(&Step),
) -> Result<EncodeResult> {
    params.validate()?;
    if target.n_qubits() < 2 {
        return Err(Error::InvalidParams(
            "encoding needs at least two qubits".into(),
        ));
    }
    let mut circuit = Circuit::new(target.n_qubits())?;
    for _ in 0..params.initial_gates {
        circuit.push(TwoQubitGate::identity(0, 1)?)?;
    }
    let mut sweeper = Sweeper::new(target, &circuit)?;
    let mut f = fidelity(&circuit, target)?;
    let mut sweeps_used = 0;
    loop {
        for _ in 0..params.sweeps {
            let next = sweeper.sweep(&mut circuit, observer)?;
            sweeps_used += 1;
            observer(&Step::SweepDone {
                gate_count: circuit.len(),
                fidelity: next,
            });
            let gain = next - f;
            f = next;
            if gain < params.sweep_tolerance
                || (params.stop_at_target && f >= params.target_fidelity)
            {
                break;
            }
        }
        if f >= params.target_fidelity || circuit.len() >= params.max_gates {
            break;
        }
        let count = params.delta.min(params.max_gates - circuit.len());
        for _ in 0..count {
            circuit.push(TwoQubitGate::identity(0, 1)?)?;
        }
        let after = fidelity(&circuit, target)?;
        observer(&Step::GatesAdded {
            count,
            before: f,
            after,
        });
        f = after;
    }
    let fidelity = fidelity(&circuit, target)?;
    Ok(EncodeResult {
        gate_count: circuit.len(),
        circuit,
        fidelity,
        sweeps_used,
    })
}

/// Reusable sweep state for one target.
struct Sweeper<'a> {
    target: &'a StateVector,
    pairs: Vec<(usize, usize)>,
    space: Box<dyn Workspace>,
    scratch: Vec<Candidate>,
}

struct Candidate {
    index: usize,
    env: Matrix4,
    bound: f64,
    score: Option<f64>,
}

/// Relative slack within which two pair scores count as tied.
const TIE_RTOL: f64 = 1e-13;

/// The pair whose environment has the largest sum of singular values; among
/// scores within [`TIE_RTOL`] of the best, the first pair in `pairs`.
///
/// The sum of singular values is bounded above by the sum of row norms and
/// by the sum of column norms, so exact scores are only computed for pairs
/// whose bound can still reach the best score seen.
fn select_pair(
    pairs: &[(usize, usize)],
    space: &mut dyn Workspace,
    scratch: &mut Vec<Candidate>,
) -> ((usize, usize), Matrix4) {
    scratch.clear();
    for (index, &(qa, qb)) in pairs.iter().enumerate() {
        let env = space.env(qa, qb);
        let m = &env.0;
        let rows: f64 = (0..4)
            .map(|i| (0..4).map(|j| m[i][j].norm_sqr()).sum::<f64>().sqrt())
            .sum();
        let cols: f64 = (0..4)
            .map(|j| (0..4).map(|i| m[i][j].norm_sqr()).sum::<f64>().sqrt())
            .sum();
        scratch.push(Candidate {
            index,
            env,
            bound: rows.min(cols),
            score: None,
        });
    }
    scratch.sort_by(|a, b| b.bound.total_cmp(&a.bound).then(a.index.cmp(&b.index)));
    let mut best = f64::NEG_INFINITY;
    for c in scratch.iter_mut() {
        // Slack on the bound covers rounding in both it and the score.
        if c.bound * (1.0 + 1e-12) < best * (1.0 - TIE_RTOL) {
            break;
        }
        let s = space.nuclear_norm(&c.env);
        best = best.max(s);
        c.score = Some(s);
    }
    let winner = scratch
        .iter()
        .filter(|c| c.score.is_some_and(|s| s >= best * (1.0 - TIE_RTOL)))
        .min_by_key(|c| c.index)
        .expect("at least one pair is scored");
    (pairs[winner.index], winner.env)
}

impl<'a> Sweeper<'a> {
    /// Picks the real path when `target` and `circuit` are both real.
    fn new(target: &'a StateVector, circuit: &Circuit) -> Result<Self> {
        let n_qubits = circuit.n_qubits();
        if n_qubits < 2 {
            return Err(Error::InvalidParams(
                "encoding needs at least two qubits".into(),
            ));
        }
        if target.n_qubits() != n_qubits {
            return Err(Error::DimensionMismatch {
                expected: n_qubits,
                found: target.n_qubits(),
            });
        }
        let space: Box<dyn Workspace> = if RealWorkspace::applies(target, circuit) {
            Box::new(RealWorkspace::new(n_qubits))
        } else {
            Box::new(ComplexWorkspace::new(n_qubits))
        };
        Ok(Sweeper {
            target,
            pairs: candidate_pairs(n_qubits),
            space,
            scratch: Vec::new(),
        })
    }

    fn sweep(&mut self, circuit: &mut Circuit, observer: &mut dyn FnMut(&Step)) -> Result<f64> {
        let m = circuit.len();
        if m == 0 {
            return Err(Error::InvalidParams("cannot sweep an empty circuit".into()));
        }
        let space = self.space.as_mut();
        space.load(self.target, circuit);
        let mut f = 0.0;
        for p in 0..m {
            let current = circuit.gates()[p].clone();
            let before = space.env(current.qa, current.qb);
            let before = (before * current.matrix.adjoint()).trace().norm();

            let (best_pair, best_env) = select_pair(&self.pairs, space, &mut self.scratch);
            let prev = if (current.qa, current.qb) == best_pair {
                current.matrix
            } else {
                Matrix4::identity()
            };
            let (u, after) = optimal_gate_near(&best_env, &prev)?;
            let gate = TwoQubitGate {
                matrix: u,
                qa: best_pair.0,
                qb: best_pair.1,
            };
            observer(&Step::GateUpdate {
                position: p,
                pair: best_pair,
                before,
                after,
            });
            f = after;

            space.advance_target(&gate.matrix, gate.qa, gate.qb);
            circuit.gates_mut()[p] = gate;
            if p + 1 < m {
                let next = &circuit.gates()[p + 1];
                space.advance_zero(&next.matrix, next.qa, next.qb);
            }
        }
        Ok(f)
    }
}
