//! Fidelity kernel `K(x, y) = |⟨0…0| C_y† C_x |0…0⟩|²` between encoded
//! samples, and Gram matrices built from it.

use crate::error::{Error, Result};
use crate::smallalg::symmetric_eigen;
use crate::statevec::{Circuit, StateVector};
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum KernelMode {
    /// Simulate each circuit once and take squared overlaps.
    #[default]
    Statevector,
    /// Run `C_y† C_x` on `|0…0⟩` and read the all-zero probability.
    Concatenated,
}

impl KernelMode {
    pub fn name(self) -> &'static str {
        match self {
            KernelMode::Statevector => "statevector",
            KernelMode::Concatenated => "concatenated",
        }
    }
}

impl FromStr for KernelMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "statevector" => Ok(KernelMode::Statevector),
            "concatenated" => Ok(KernelMode::Concatenated),
            other => Err(Error::InvalidParams(format!(
                "unknown kernel mode `{other}`"
            ))),
        }
    }
}

fn same_width(a: &Circuit, b: &Circuit) -> Result<()> {
    if a.n_qubits() != b.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: a.n_qubits(),
            found: b.n_qubits(),
        });
    }
    Ok(())
}

pub fn kernel_entry(a: &Circuit, b: &Circuit, mode: KernelMode) -> Result<f64> {
    same_width(a, b)?;
    match mode {
        KernelMode::Statevector => state_kernel(&a.run_zero(), &b.run_zero()),
        KernelMode::Concatenated => {
            let out = b.run_adjoint(&a.run_zero())?;
            Ok(clamp_probability(out.amplitudes()[0].norm_sqr()))
        }
    }
}

/// `|⟨b|a⟩|²` for already simulated states.
pub fn state_kernel(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(clamp_probability(b.inner(a)?.norm_sqr()))
}

/// Rounding can push a probability a few ulps past 1.
fn clamp_probability(p: f64) -> f64 {
    p.clamp(0.0, 1.0)
}

/// Content hash of a circuit: qubit count, then each gate's qubits and the
/// exact bits of its matrix.
pub fn circuit_hash(c: &Circuit) -> String {
    let mut h = Sha256::new();
    h.update((c.n_qubits() as u64).to_le_bytes());
    for g in c.gates() {
        h.update((g.qa as u64).to_le_bytes());
        h.update((g.qb as u64).to_le_bytes());
        for z in g.matrix.to_flat() {
            h.update(z.re.to_bits().to_le_bytes());
            h.update(z.im.to_bits().to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

/// Symmetric kernel matrix over a list of samples.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    size: usize,
    entries: Vec<f64>,
    /// Content hash of each sample, in row order.
    pub sources: Vec<String>,
    pub mode: KernelMode,
}

pub const SYMMETRY_TOL: f64 = 1e-10;
pub const DIAGONAL_TOL: f64 = 1e-10;
pub const RANGE_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-8;
/// Largest Gram matrix whose spectrum [`GramMatrix::check`] computes.
pub const PSD_CHECK_MAX: usize = 200;

impl GramMatrix {
    pub fn from_entries(
        size: usize,
        entries: Vec<f64>,
        sources: Vec<String>,
        mode: KernelMode,
    ) -> Result<Self> {
        if entries.len() != size * size {
            return Err(Error::DimensionMismatch {
                expected: size * size,
                found: entries.len(),
            });
        }
        if sources.len() != size {
            return Err(Error::DimensionMismatch {
                expected: size,
                found: sources.len(),
            });
        }
        Ok(GramMatrix {
            size,
            entries,
            sources,
            mode,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.size..(i + 1) * self.size]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let (values, _) = symmetric_eigen(self.size, &self.entries, false);
        values.first().copied().unwrap_or(0.0)
    }

    /// Symmetry, unit diagonal, range, and (up to [`PSD_CHECK_MAX`] rows)
    /// positive semidefiniteness.
    pub fn check(&self) -> Result<()> {
        let bad = |message: String| Err(Error::InvalidParams(format!("gram matrix: {message}")));
        for i in 0..self.size {
            let d = self.get(i, i);
            if (d - 1.0).abs() > DIAGONAL_TOL {
                return bad(format!("diagonal entry {i} is {d}"));
            }
            for j in 0..self.size {
                let v = self.get(i, j);
                if !(-RANGE_TOL..=1.0 + RANGE_TOL).contains(&v) {
                    return bad(format!("entry ({i}, {j}) = {v} outside [0, 1]"));
                }
                if (v - self.get(j, i)).abs() > SYMMETRY_TOL {
                    return bad(format!("asymmetric at ({i}, {j})"));
                }
            }
        }
        if self.size <= PSD_CHECK_MAX {
            let low = self.min_eigenvalue();
            if low < -PSD_TOL {
                return bad(format!("minimum eigenvalue {low:e}"));
            }
        }
        Ok(())
    }

    /// Rows and columns reordered so that new row `k` is old row `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> GramMatrix {
        let n = order.len();
        let mut entries = Vec::with_capacity(n * n);
        for &i in order {
            entries.extend(order.iter().map(|&j| self.get(i, j)));
        }
        GramMatrix {
            size: n,
            entries,
            sources: order.iter().map(|&i| self.sources[i].clone()).collect(),
            mode: self.mode,
        }
    }

    /// Text format:
    ///
    /// ```text
    /// aqce-gram 1
    /// size <n>
    /// mode <statevector|concatenated>
    /// source <sha256 hex>      (n lines, row order)
    /// <n reals per line>       (n lines)
    /// ```
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "aqce-gram 1\nsize {}\nmode {}\n",
            self.size,
            self.mode.name()
        );
        for h in &self.sources {
            let _ = writeln!(s, "source {h}");
        }
        for i in 0..self.size {
            let row: Vec<String> = self.row(i).iter().map(|v| format!("{v:e}")).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines();
        let mut next = |what: &str| lines.next().ok_or_else(|| format!("missing {what}"));
        if next("magic line")?.trim() != "aqce-gram 1" {
            return Err("not an aqce-gram v1 file".into());
        }
        let size: usize = field(next("size")?, "size")?
            .parse()
            .map_err(|e| format!("bad size: {e}"))?;
        let mode: KernelMode = field(next("mode")?, "mode")?
            .parse()
            .map_err(|e: Error| e.to_string())?;
        let mut sources = Vec::with_capacity(size);
        for _ in 0..size {
            sources.push(field(next("source")?, "source")?.to_string());
        }
        let mut entries = Vec::with_capacity(size * size);
        for i in 0..size {
            let row = next("matrix row")?;
            let before = entries.len();
            for tok in row.split_whitespace() {
                entries.push(tok.parse::<f64>().map_err(|e| format!("row {i}: {e}"))?);
            }
            if entries.len() - before != size {
                return Err(format!(
                    "row {i} has {} entries, expected {size}",
                    entries.len() - before
                ));
            }
        }
        Ok(GramMatrix {
            size,
            entries,
            sources,
            mode,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text).map_err(|m| Error::format(path, m))
    }
}

fn field<'a>(line: &'a str, key: &str) -> std::result::Result<&'a str, String> {
    line.strip_prefix(key)
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .ok_or_else(|| format!("expected `{key} ...`, found `{line}`"))
}

/// Known kernel values keyed by the content hashes of both samples.
#[derive(Clone, Debug, Default)]
pub struct KernelCache {
    mode: KernelMode,
    values: HashMap<(String, String), f64>,
}

impl KernelCache {
    pub fn new(mode: KernelMode) -> Self {
        KernelCache {
            mode,
            values: HashMap::new(),
        }
    }

    /// Every pair of a saved Gram matrix. Empty when the mode differs.
    pub fn from_gram(gram: &GramMatrix, mode: KernelMode) -> Self {
        let mut cache = KernelCache::new(mode);
        if gram.mode == mode {
            cache.absorb(gram);
        }
        cache
    }

    pub fn absorb(&mut self, gram: &GramMatrix) {
        for (i, a) in gram.sources.iter().enumerate() {
            for (j, b) in gram.sources.iter().enumerate() {
                self.values.insert((a.clone(), b.clone()), gram.get(i, j));
            }
        }
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        self.values.get(&(a.to_string(), b.to_string())).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_list(circuits: &[Circuit]) -> Result<()> {
    let first = circuits
        .first()
        .ok_or_else(|| Error::InvalidParams("gram matrix of an empty list".into()))?;
    circuits.iter().try_for_each(|c| same_width(first, c))
}

/// Gram matrix over `circuits`. Only the upper triangle is computed.
pub fn gram(circuits: &[Circuit], mode: KernelMode) -> Result<GramMatrix> {
    gram_cached(circuits, mode, &KernelCache::new(mode))
}

/// As [`gram`], reusing cached entries for sample pairs seen before.
pub fn gram_cached(
    circuits: &[Circuit],
    mode: KernelMode,
    cache: &KernelCache,
) -> Result<GramMatrix> {
    check_list(circuits)?;
    let n = circuits.len();
    let sources: Vec<String> = circuits.par_iter().map(circuit_hash).collect();
    let usable = |i: usize, j: usize| {
        if cache.mode == mode {
            cache.get(&sources[i], &sources[j])
        } else {
            None
        }
    };
    let states: Option<Vec<StateVector>> = (mode == KernelMode::Statevector)
        .then(|| circuits.par_iter().map(Circuit::run_zero).collect());

    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let values = pairs
        .par_iter()
        .map(|&(i, j)| {
            if i == j {
                return Ok(1.0);
            }
            if let Some(v) = usable(i, j) {
                return Ok(v);
            }
            match &states {
                Some(s) => state_kernel(&s[i], &s[j]),
                None => kernel_entry(&circuits[i], &circuits[j], mode),
            }
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut entries = vec![0.0; n * n];
    for (&(i, j), v) in pairs.iter().zip(values) {
        entries[i * n + j] = v;
        entries[j * n + i] = v;
    }
    Ok(GramMatrix {
        size: n,
        entries,
        sources,
        mode,
    })
}

/// Content hash of a state: qubit count, then the exact amplitude bits.
pub fn state_hash(s: &StateVector) -> String {
    let mut h = Sha256::new();
    h.update((s.n_qubits() as u64).to_le_bytes());
    for z in s.amplitudes() {
        h.update(z.re.to_bits().to_le_bytes());
        h.update(z.im.to_bits().to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// Gram matrix over states given directly, as if each were prepared exactly.
pub fn state_gram(states: &[StateVector]) -> Result<GramMatrix> {
    if let Some(first) = states.first() {
        if let Some(s) = states.iter().find(|s| s.n_qubits() != first.n_qubits()) {
            return Err(Error::DimensionMismatch {
                expected: first.n_qubits(),
                found: s.n_qubits(),
            });
        }
    }
    let n = states.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| match i.cmp(&j) {
                    std::cmp::Ordering::Equal => Ok(1.0),
                    std::cmp::Ordering::Less => state_kernel(&states[i], &states[j]),
                    std::cmp::Ordering::Greater => state_kernel(&states[j], &states[i]),
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok(GramMatrix {
        size: n,
        entries: rows.concat(),
        sources: states.par_iter().map(state_hash).collect(),
        mode: KernelMode::Statevector,
    })
}

/// `K[r][c] = K(rows[r], cols[c])`, e.g. test samples against training ones.
pub fn cross_kernel(rows: &[Circuit], cols: &[Circuit], mode: KernelMode) -> Result<Vec<Vec<f64>>> {
    if let (Some(a), Some(b)) = (rows.first(), cols.first()) {
        check_list(rows)?;
        check_list(cols)?;
        same_width(b, a)?;
    }
    match mode {
        KernelMode::Statevector => {
            let col_states: Vec<StateVector> = cols.par_iter().map(Circuit::run_zero).collect();
            rows.par_iter()
                .map(|r| {
                    let s = r.run_zero();
                    col_states.iter().map(|c| state_kernel(&s, c)).collect()
                })
                .collect()
        }
        KernelMode::Concatenated => rows
            .par_iter()
            .map(|r| cols.iter().map(|c| kernel_entry(r, c, mode)).collect())
            .collect(),
    }
}
