use crate::mesh::Mesh;

/// Compressed sparse row matrix with sorted column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Zero matrix with the node-coupling pattern of `mesh` (nodes sharing an element).
    pub fn with_mesh_pattern(mesh: &Mesh) -> Self {
        let n = mesh.n_nodes();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for e in 0..mesh.n_elements() {
            let conn = mesh.element(e);
            for &a in conn {
                adj[a].extend_from_slice(conn);
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for row in adj.iter_mut() {
            row.sort_unstable();
            row.dedup();
            cols.extend_from_slice(row);
            row_ptr.push(cols.len());
        }
        let values = vec![0.0; cols.len()];
        CsrMatrix {
            n,
            row_ptr,
            cols,
            values,
        }
    }

    /// Builds from explicit triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            assert!(i < n && j < n, "triplet ({i}, {j}) outside {n}x{n}");
            rows[i].push((j, v));
        }
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut values = Vec::new();
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            for (j, v) in row {
                if cols.len() > *row_ptr.last().unwrap() && *cols.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    cols.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix {
            n,
            row_ptr,
            cols,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            n,
            row_ptr: (0..=n).collect(),
            cols: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn cols(&self) -> &[usize] {
        &self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Position of entry (i, j) in the value array, if structurally present.
    pub fn index_of(&self, i: usize, j: usize) -> Option<usize> {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[lo..hi].binary_search(&j).ok().map(|k| lo + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.index_of(i, j).map_or(0.0, |k| self.values[k])
    }

    /// Same structure, all values zero.
    pub fn zeros_like(&self) -> Self {
        CsrMatrix {
            values: vec![0.0; self.values.len()],
            ..self.clone()
        }
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut s = 0.0;
            for k in lo..hi {
                s += self.values[k] * x[self.cols[k]];
            }
            *yi = s;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// xᵀ A x
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for (i, &xi) in x.iter().enumerate() {
            let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut r = 0.0;
            for k in lo..hi {
                r += self.values[k] * x[self.cols[k]];
            }
            s += xi * r;
        }
        s
    }

    /// Sets `self = a * x + b * y` for matrices sharing this structure.
    pub fn set_linear_combination(&mut self, a: f64, x: &CsrMatrix, b: f64, y: &CsrMatrix) {
        assert!(x.cols == self.cols && y.cols == self.cols, "structure mismatch");
        for ((v, xv), yv) in self.values.iter_mut().zip(&x.values).zip(&y.values) {
            *v = a * xv + b * yv;
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                d[i][self.cols[k]] += self.values[k];
            }
        }
        d
    }

    /// Largest |A_ij - A_ji| relative to the largest |A_ij|.
    pub fn asymmetry(&self) -> f64 {
        let mut max_entry: f64 = 0.0;
        let mut max_diff: f64 = 0.0;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[k];
                max_entry = max_entry.max(self.values[k].abs());
                max_diff = max_diff.max((self.values[k] - self.get(j, i)).abs());
            }
        }
        if max_entry == 0.0 {
            0.0
        } else {
            max_diff / max_entry
        }
    }
}

/// For every element, the value-array positions of its local (a, b) block.
#[derive(Clone, Debug)]
pub struct ElementScatter {
    nv: usize,
    slots: Vec<usize>,
}

impl ElementScatter {
    pub fn new(mesh: &Mesh, matrix: &CsrMatrix) -> Self {
        let nv = mesh.nodes_per_element();
        let mut slots = Vec::with_capacity(mesh.n_elements() * nv * nv);
        for e in 0..mesh.n_elements() {
            let conn = mesh.element(e);
            for &a in conn {
                for &b in conn {
                    slots.push(matrix.index_of(a, b).expect("element pattern missing from matrix"));
                }
            }
        }
        ElementScatter { nv, slots }
    }

    /// Value positions of element `e`, row-major over local indices.
    pub fn element(&self, e: usize) -> &[usize] {
        let s = self.nv * self.nv;
        &self.slots[e * s..(e + 1) * s]
    }
}

/// Restriction of a square matrix to a subset of its rows and columns, with
/// a value map so the restricted copy can be refreshed cheaply.
#[derive(Clone, Debug)]
pub struct Restriction {
    keep: Vec<usize>,
    reduced_index: Vec<Option<usize>>,
    value_map: Vec<usize>,
    template: CsrMatrix,
}

impl Restriction {
    pub fn new(full: &CsrMatrix, keep: &[usize]) -> Self {
        let mut reduced_index = vec![None; full.n];
        for (r, &i) in keep.iter().enumerate() {
            reduced_index[i] = Some(r);
        }
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut value_map = Vec::new();
        for &i in keep {
            for k in full.row_ptr[i]..full.row_ptr[i + 1] {
                if let Some(rj) = reduced_index[full.cols[k]] {
                    cols.push(rj);
                    value_map.push(k);
                }
            }
            row_ptr.push(cols.len());
        }
        let values = vec![0.0; cols.len()];
        Restriction {
            keep: keep.to_vec(),
            reduced_index,
            value_map,
            template: CsrMatrix {
                n: keep.len(),
                row_ptr,
                cols,
                values,
            },
        }
    }

    pub fn kept(&self) -> &[usize] {
        &self.keep
    }

    pub fn reduced_index(&self, full_index: usize) -> Option<usize> {
        self.reduced_index[full_index]
    }

    pub fn restrict_matrix(&self, full: &CsrMatrix) -> CsrMatrix {
        let mut m = self.template.clone();
        self.restrict_into(full, &mut m);
        m
    }

    pub fn restrict_into(&self, full: &CsrMatrix, out: &mut CsrMatrix) {
        for (v, &k) in out.values.iter_mut().zip(&self.value_map) {
            *v = full.values[k];
        }
    }

    pub fn restrict_vec(&self, full: &[f64]) -> Vec<f64> {
        self.keep.iter().map(|&i| full[i]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 1, 2.0), (0, 0, 3.0), (1, 1, 5.0)]);
        assert_eq!(a.to_dense(), vec![vec![4.0, 2.0], vec![0.0, 5.0]]);
        assert_eq!(a.apply(&[1.0, 1.0]), vec![6.0, 5.0]);
        assert_eq!(a.quadratic_form(&[1.0, 2.0]), 4.0 + 4.0 + 20.0);
    }

    #[test]
    fn restriction_drops_rows_and_columns() {
        let a = CsrMatrix::from_triplets(
            3,
            &[(0, 0, 1.0), (0, 2, 2.0), (1, 1, 3.0), (2, 0, 2.0), (2, 2, 4.0), (1, 2, 7.0)],
        );
        let r = Restriction::new(&a, &[0, 2]);
        let sub = r.restrict_matrix(&a);
        assert_eq!(sub.to_dense(), vec![vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert_eq!(r.restrict_vec(&[9.0, 8.0, 7.0]), vec![9.0, 7.0]);
        assert_eq!(r.reduced_index(1), None);
    }
}
