use std::collections::BTreeMap;

use super::Tensor;

/// Handle to one tensor inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Ordered collection of named parameter tensors.
///
/// Insertion order is the canonical order: it is the order gradients are
/// reduced in, the order optimizers walk, and the order tensors are written
/// to a checkpoint.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    row_sparse: Vec<bool>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> ParamId {
        self.push(name.into(), tensor, false)
    }

    /// Adds a lookup table whose gradients only ever touch a few rows.
    pub fn add_row_sparse(&mut self, name: impl Into<String>, tensor: Tensor) -> ParamId {
        assert_eq!(tensor.shape().len(), 2, "row-sparse parameters must be matrices");
        self.push(name.into(), tensor, true)
    }

    fn push(&mut self, name: String, tensor: Tensor, sparse: bool) -> ParamId {
        assert!(self.find(&name).is_none(), "duplicate parameter name {name}");
        self.names.push(name);
        self.tensors.push(tensor);
        self.row_sparse.push(sparse);
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn is_row_sparse(&self, id: ParamId) -> bool {
        self.row_sparse[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor)> {
        self.names
            .iter()
            .zip(&self.tensors)
            .enumerate()
            .map(|(i, (n, t))| (ParamId(i), n.as_str(), t))
    }

    /// Total number of scalar parameters.
    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn round_to_f32(&mut self) {
        self.tensors.iter_mut().for_each(Tensor::round_to_f32);
    }
}

/// Gradient of one parameter: dense, or a set of touched rows.
#[derive(Clone, Debug, PartialEq)]
pub enum Grad {
    Dense(Tensor),
    Rows { shape: [usize; 2], rows: BTreeMap<usize, Vec<f64>> },
}

impl Grad {
    /// Writes the full gradient into `out`, zero where no row was touched.
    pub fn write_dense(&self, out: &mut [f64]) {
        match self {
            Grad::Dense(t) => out.copy_from_slice(t.as_slice()),
            Grad::Rows { shape, rows } => {
                assert_eq!(out.len(), shape[0] * shape[1]);
                out.iter_mut().for_each(|v| *v = 0.0);
                for (&r, vals) in rows {
                    out[r * shape[1]..(r + 1) * shape[1]].copy_from_slice(vals);
                }
            }
        }
    }

    pub fn to_dense(&self) -> Tensor {
        match self {
            Grad::Dense(t) => t.clone(),
            Grad::Rows { shape, .. } => {
                let mut t = Tensor::zeros(shape);
                self.write_dense(t.as_mut_slice());
                t
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Grad::Dense(t) => t.as_slice().iter().all(|v| *v == 0.0),
            Grad::Rows { rows, .. } => rows.values().flatten().all(|v| *v == 0.0),
        }
    }
}

/// Gradients laid out like a [`ParamStore`].
#[derive(Clone, Debug, PartialEq)]
pub struct Grads {
    entries: Vec<Grad>,
}

impl Grads {
    pub fn zeros_like(store: &ParamStore) -> Self {
        let entries = store
            .iter()
            .map(|(id, _, t)| {
                if store.is_row_sparse(id) {
                    Grad::Rows { shape: [t.rows(), t.cols()], rows: BTreeMap::new() }
                } else {
                    Grad::Dense(Tensor::zeros(t.shape()))
                }
            })
            .collect();
        Grads { entries }
    }

    pub fn get(&self, id: ParamId) -> &Grad {
        &self.entries[id.0]
    }

    pub fn dense_mut(&mut self, id: ParamId) -> &mut Tensor {
        match &mut self.entries[id.0] {
            Grad::Dense(t) => t,
            Grad::Rows { .. } => panic!("parameter {} is row-sparse", id.0),
        }
    }

    /// Mutable access to one row of a matrix gradient, allocating the row
    /// for row-sparse parameters on first touch.
    pub fn row_mut(&mut self, id: ParamId, row: usize) -> &mut [f64] {
        match &mut self.entries[id.0] {
            Grad::Dense(t) => t.row_mut(row),
            Grad::Rows { shape, rows } => {
                assert!(row < shape[0], "row {row} out of range");
                let cols = shape[1];
                rows.entry(row).or_insert_with(|| vec![0.0; cols])
            }
        }
    }

    /// `self += other`.
    pub fn accumulate(&mut self, other: &Grads) {
        assert_eq!(self.entries.len(), other.entries.len());
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            match (a, b) {
                (Grad::Dense(x), Grad::Dense(y)) => super::add_assign(x.as_mut_slice(), y.as_slice()),
                (Grad::Rows { rows: x, .. }, Grad::Rows { rows: y, .. }) => {
                    for (r, vals) in y {
                        match x.get_mut(r) {
                            Some(acc) => super::add_assign(acc, vals),
                            None => {
                                x.insert(*r, vals.clone());
                            }
                        }
                    }
                }
                _ => panic!("gradient layouts differ"),
            }
        }
    }

    pub fn scale(&mut self, f: f64) {
        for e in &mut self.entries {
            match e {
                Grad::Dense(t) => t.as_mut_slice().iter_mut().for_each(|v| *v *= f),
                Grad::Rows { rows, .. } => rows.values_mut().flatten().for_each(|v| *v *= f),
            }
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
