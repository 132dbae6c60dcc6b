use crate::env::EnvironmentField;
use crate::wfunc::WFunction;
use crate::{Error, Lattice, LatticeFunction, Result};

/// Compressed sparse rows.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds an `n×n` matrix, summing duplicate entries.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0; n + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().expect("entry exists") += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            indptr[r + 1] += indptr[r];
        }
        CsrMatrix {
            n,
            indptr,
            indices,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }
}

/// `𝕃_N` on `T_N^d` for a profile `W` and a coefficient field `Aᴺ`.
///
/// Bond `b = x·d + j` joins `x` and `x + e_j` and carries the conductance
/// `κ_b = N²ξ_{x,x+e_j} = N a_j(x) / ΔW_j(x_j)`.
#[derive(Clone, Debug)]
pub struct LatticeOperator {
    lattice: Lattice,
    wf: WFunction,
    field: EnvironmentField,
    /// `ΔW_j(c)` per axis and cell.
    increments: Vec<Vec<f64>>,
    conductance: Vec<f64>,
    matrix: CsrMatrix,
}

/// Assembles `𝕃_N` from `W` and a realized environment.
pub fn assemble(wf: &WFunction, field: &EnvironmentField) -> Result<LatticeOperator> {
    let lattice = field.lattice();
    wf.check_lattice(&lattice)?;
    let n = lattice.size();
    let d = lattice.dim();
    let increments: Vec<Vec<f64>> = (0..d).map(|j| wf.axis(j).increments(n)).collect();
    let nf = n as f64;
    let mut conductance = vec![0.0; lattice.num_bonds()];
    for x in 0..lattice.num_sites() {
        for j in 0..d {
            let xi = field.get(j, x) / (nf * increments[j][lattice.coord(x, j)]);
            conductance[x * d + j] = nf * nf * xi;
        }
    }
    let mut triplets = Vec::with_capacity(4 * lattice.num_bonds());
    for x in 0..lattice.num_sites() {
        for j in 0..d {
            let y = lattice.shift(x, j, 1);
            let k = conductance[x * d + j];
            triplets.extend([(x, y, k), (x, x, -k), (y, x, k), (y, y, -k)]);
        }
    }
    let matrix = CsrMatrix::from_triplets(lattice.num_sites(), triplets);
    Ok(LatticeOperator {
        lattice,
        wf: wf.clone(),
        field: field.clone(),
        increments,
        conductance,
        matrix,
    })
}

impl LatticeOperator {
    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn wfunction(&self) -> &WFunction {
        &self.wf
    }

    pub fn field(&self) -> &EnvironmentField {
        &self.field
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// `ΔW_j` of the cell `c` along axis `j`.
    #[inline]
    pub fn increment(&self, axis: usize, cell: usize) -> f64 {
        self.increments[axis][cell]
    }

    pub fn increments(&self, axis: usize) -> &[f64] {
        &self.increments[axis]
    }

    /// `N²ξ` of bond `x·d + j`.
    #[inline]
    pub fn conductance(&self, bond: usize) -> f64 {
        self.conductance[bond]
    }

    pub fn conductances(&self) -> &[f64] {
        &self.conductance
    }

    /// The symmetric rate `ξ_{x,x+e_j}` (without the `N²` speed-up).
    pub fn xi(&self, site: usize, axis: usize) -> f64 {
        let n = self.lattice.size() as f64;
        self.conductance[site * self.lattice.dim() + axis] / (n * n)
    }

    /// The constant-coefficient operator `∇ᴺA∇ᴺ_W` with the same `W`.
    pub fn with_coefficients(&self, diag: &[f64]) -> Result<LatticeOperator> {
        let field = EnvironmentField::constant_per_axis(self.lattice, diag)?;
        assemble(&self.wf, &field)
    }

    pub(crate) fn check(&self, f: &LatticeFunction) -> Result<()> {
        if f.lattice() != self.lattice {
            return Err(Error::DimensionMismatch(format!(
                "function on {:?}, operator on {:?}",
                f.lattice(),
                self.lattice
            )));
        }
        Ok(())
    }

    /// Rate form: `Σ_j N²[ξ_{x,x+e_j}(f(x+e_j) − f(x)) + ξ_{x−e_j,x}(f(x−e_j) − f(x))]`.
    pub fn apply(&self, f: &LatticeFunction) -> LatticeFunction {
        let mut out = vec![0.0; self.lattice.num_sites()];
        self.apply_into(f.values(), &mut out);
        LatticeFunction::from_values(self.lattice, out).expect("finite input gives finite output")
    }

    pub(crate) fn apply_into(&self, f: &[f64], out: &mut [f64]) {
        let d = self.lattice.dim();
        out.iter_mut().for_each(|v| *v = 0.0);
        for x in 0..self.lattice.num_sites() {
            for j in 0..d {
                let y = self.lattice.shift(x, j, 1);
                let flow = self.conductance[x * d + j] * (f[y] - f[x]);
                out[x] += flow;
                out[y] -= flow;
            }
        }
    }

    /// `𝕃ᴺ_j f`, the contribution of axis `j`.
    pub fn apply_axis(&self, axis: usize, f: &LatticeFunction) -> LatticeFunction {
        let d = self.lattice.dim();
        let fv = f.values();
        let mut out = vec![0.0; self.lattice.num_sites()];
        for x in 0..self.lattice.num_sites() {
            let y = self.lattice.shift(x, axis, 1);
            let flow = self.conductance[x * d + axis] * (fv[y] - fv[x]);
            out[x] += flow;
            out[y] -= flow;
        }
        LatticeFunction::from_values(self.lattice, out).expect("finite")
    }

    /// `∂ᴺ_{W_j} f(x) = (f(x+e_j) − f(x)) / ΔW_j(x_j)`.
    pub fn w_gradient(&self, axis: usize, f: &LatticeFunction) -> LatticeFunction {
        let fv = f.values();
        let vals = (0..self.lattice.num_sites())
            .map(|x| {
                let y = self.lattice.shift(x, axis, 1);
                (fv[y] - fv[x]) / self.increments[axis][self.lattice.coord(x, axis)]
            })
            .collect();
        LatticeFunction::from_values(self.lattice, vals).expect("finite")
    }

    /// Difference form `Σ_j ∂ᴺ_{x_j}(a_j ∂ᴺ_{W_j} f)`, with the outer
    /// difference taken backward so that both forms agree site by site.
    pub fn apply_difference_form(&self, f: &LatticeFunction) -> LatticeFunction {
        let n = self.lattice.size() as f64;
        let mut out = vec![0.0; self.lattice.num_sites()];
        for j in 0..self.lattice.dim() {
            let grad = self.w_gradient(j, f);
            let flux: Vec<f64> = grad
                .values()
                .iter()
                .zip(self.field.axis_values(j))
                .map(|(g, a)| a * g)
                .collect();
            for (x, o) in out.iter_mut().enumerate() {
                let back = self.lattice.shift(x, j, -1);
                *o += n * (flux[x] - flux[back]);
            }
        }
        LatticeFunction::from_values(self.lattice, out).expect("finite")
    }

    /// Matrix-vector product with the assembled sparse matrix.
    pub fn apply_matrix(&self, f: &LatticeFunction) -> LatticeFunction {
        LatticeFunction::from_values(self.lattice, self.matrix.matvec(f.values())).expect("finite")
    }

    /// Weighted gradient energy
    /// `N^{-(d-1)} Σ_j Σ_x a_j(x) (∂ᴺ_{W_j} f)² ΔW_j`, which equals `⟨−𝕃f, f⟩`.
    pub fn energy(&self, f: &LatticeFunction) -> f64 {
        let d = self.lattice.dim();
        let n = self.lattice.size();
        let fv = f.values();
        let mut sum = 0.0;
        for x in 0..self.lattice.num_sites() {
            for j in 0..d {
                let y = self.lattice.shift(x, j, 1);
                let inc = self.increments[j][self.lattice.coord(x, j)];
                let grad = (fv[y] - fv[x]) / inc;
                sum += self.field.get(j, x) * grad * grad * inc;
            }
        }
        sum / (n as f64).powi(d as i32 - 1)
    }
}
