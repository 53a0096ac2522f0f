//! Layer-one token moves with `Phi^(1)` and `theta^(1)` integrated out.

use rand::Rng;

use super::Cells;
use crate::error::{GbnError, Result};
use crate::matrix::CountMatrix;
use crate::model::{DocLatentState, GbnNetwork, LatentCountState};
use crate::scalar::Real;

/// Topic label of every layer-one token plus the count tables the update
/// needs. Tokens are ordered by document, then term, then token index.
#[derive(Clone, Debug)]
pub(crate) struct TokenState {
    k: usize,
    token_ptr: Vec<usize>,
    z: Vec<u32>,
    /// `x_{v.k}^(1)`, row-major `V x K`.
    n_vk: Vec<u32>,
    /// `x_{..k}^(1)`.
    n_k: Vec<u64>,
    eta: Vec<f64>,
    eta_sum: f64,
    cum: Vec<f64>,
}

impl TokenState {
    /// Label every token by a draw proportional to `phi_vk theta_kj`, and
    /// overwrite `m^(1)` and `x_{v.k}^(1)` with the resulting counts.
    pub fn from_partition<F: Real, R: Rng + ?Sized>(
        network: &GbnNetwork<F>,
        docs: &[DocLatentState<F>],
        cells: &Cells,
        counts: &mut LatentCountState,
        rng: &mut R,
    ) -> Result<Self> {
        let k = network.width(1);
        let v_count = cells.n_rows;
        let eta: Vec<f64> = (0..v_count).map(|v| network.hyper.eta(1).at(v)).collect();
        let mut state = Self {
            k,
            token_ptr: vec![0],
            z: Vec::new(),
            n_vk: vec![0; v_count * k],
            n_k: vec![0; k],
            eta_sum: eta.iter().sum(),
            eta,
            cum: vec![0.0; k],
        };
        let phi = &network.phi[0];
        for (j, (doc, dc)) in docs.iter().zip(counts.docs.iter_mut()).enumerate() {
            dc.m[0].iter_mut().for_each(|x| *x = 0);
            for i in cells.range(j) {
                let v = cells.rows[i] as usize;
                let mut total = 0.0;
                for kk in 0..k {
                    total += phi[(v, kk)].f() * doc.theta[0][kk].f();
                    state.cum[kk] = total;
                }
                if !(total > 0.0) {
                    return Err(GbnError::DegenerateRate { layer: 1, row: v, doc: j });
                }
                for _ in 0..cells.counts[i] {
                    let u = rng.random::<f64>() * total;
                    let label = state.cum.partition_point(|&c| c <= u).min(k - 1);
                    state.z.push(label as u32);
                    state.n_vk[v * k + label] += 1;
                    state.n_k[label] += 1;
                    dc.m[0][label] += 1;
                }
            }
            state.token_ptr.push(state.z.len());
        }
        Ok(state)
    }

    /// One pass over document `j`'s tokens:
    /// `P(z = k) ∝ (eta_v + n_vk) / (sum eta + n_k) * (n_jk + shape_k)`,
    /// all counts excluding the token being moved.
    pub fn sample_doc<R: Rng + ?Sized>(&mut self, j: usize, cells: &Cells, shape: &[f64], n_jk: &mut [u32], rng: &mut R) {
        let k = self.k;
        let mut pos = self.token_ptr[j];
        for i in cells.range(j) {
            let v = cells.rows[i] as usize;
            let eta_v = self.eta[v];
            let row = v * k;
            for _ in 0..cells.counts[i] {
                let old = self.z[pos] as usize;
                self.n_vk[row + old] -= 1;
                self.n_k[old] -= 1;
                n_jk[old] -= 1;
                let mut total = 0.0;
                for kk in 0..k {
                    let word = (eta_v + self.n_vk[row + kk] as f64) / (self.eta_sum + self.n_k[kk] as f64);
                    total += word * (n_jk[kk] as f64 + shape[kk]);
                    self.cum[kk] = total;
                }
                let u = rng.random::<f64>() * total;
                let new = self.cum.partition_point(|&c| c <= u).min(k - 1);
                self.z[pos] = new as u32;
                self.n_vk[row + new] += 1;
                self.n_k[new] += 1;
                n_jk[new] += 1;
                pos += 1;
            }
        }
    }

    pub fn write_row_factor(&self, rf: &mut CountMatrix) {
        let k = self.k;
        let rows = rf.rows();
        let data = rf.as_mut_slice();
        for v in 0..rows {
            for kk in 0..k {
                data[kk * rows + v] = self.n_vk[v * k + kk];
            }
        }
    }

    pub fn doc_labels(&self, j: usize) -> &[u32] {
        &self.z[self.token_ptr[j]..self.token_ptr[j + 1]]
    }

    /// Relabel after dropping factors; every dropped factor must be empty.
    pub fn remap(&mut self, keep: &[usize]) {
        let mut map = vec![u32::MAX; self.k];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new as u32;
        }
        for z in &mut self.z {
            *z = map[*z as usize];
            debug_assert!(*z != u32::MAX, "token on a pruned factor");
        }
        let v_count = self.n_vk.len() / self.k;
        let new_k = keep.len();
        let mut n_vk = vec![0; v_count * new_k];
        for v in 0..v_count {
            for (new, &old) in keep.iter().enumerate() {
                n_vk[v * new_k + new] = self.n_vk[v * self.k + old];
            }
        }
        self.n_vk = n_vk;
        self.n_k = keep.iter().map(|&old| self.n_k[old]).collect();
        self.k = new_k;
        self.cum = vec![0.0; new_k];
    }

    /// Recount everything from the labels and compare.
    pub fn check(&self, cells: &Cells, counts: &LatentCountState) -> Result<()> {
        let k = self.k;
        let mut n_vk = vec![0u32; self.n_vk.len()];
        let mut n_k = vec![0u64; k];
        for j in 0..cells.n_docs() {
            let mut n_jk = vec![0u32; k];
            let mut pos = self.token_ptr[j];
            for i in cells.range(j) {
                let v = cells.rows[i] as usize;
                for _ in 0..cells.counts[i] {
                    let z = self.z[pos] as usize;
                    if z >= k {
                        return Err(GbnError::Invariant(format!("token label {z} out of range")));
                    }
                    n_vk[v * k + z] += 1;
                    n_k[z] += 1;
                    n_jk[z] += 1;
                    pos += 1;
                }
            }
            if pos != self.token_ptr[j + 1] {
                return Err(GbnError::Invariant(format!("document {j}: token count changed")));
            }
            if n_jk != counts.docs[j].m[0] {
                return Err(GbnError::Invariant(format!("document {j}: x_.jk out of step with token labels")));
            }
        }
        if n_vk != self.n_vk || n_k != self.n_k {
            return Err(GbnError::Invariant("x_v.k / x_..k out of step with token labels".into()));
        }
        let rf = &counts.row_factor[0];
        for v in 0..rf.rows() {
            for kk in 0..k {
                if rf[(v, kk)] != n_vk[v * k + kk] {
                    return Err(GbnError::Invariant("layer-one row aggregates out of step with tokens".into()));
                }
            }
        }
        Ok(())
    }
}
