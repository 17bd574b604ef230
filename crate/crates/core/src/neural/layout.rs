use std::collections::HashMap;
use std::ops::Range;

use crate::error::NeuralError;
use crate::scalar::Scalar;

/// One named tensor inside the flat parameter vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub name: String,
    /// `[rows, cols]` for matrices, `[len]` for vectors.
    pub shape: Vec<usize>,
    pub offset: usize,
    pub trainable: bool,
}

impl Block {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Names, shapes and offsets of every tensor, shared by parameters,
/// gradients and optimizer moments.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParamLayout {
    blocks: Vec<Block>,
    by_name: HashMap<String, usize>,
    total: usize,
}

impl ParamLayout {
    pub(crate) fn push(&mut self, name: impl Into<String>, shape: Vec<usize>, trainable: bool) -> usize {
        let name = name.into();
        let block = Block {
            name: name.clone(),
            shape,
            offset: self.total,
            trainable,
        };
        self.total += block.len();
        let offset = block.offset;
        self.by_name.insert(name, self.blocks.len());
        self.blocks.push(block);
        offset
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn get(&self, name: &str) -> Option<&Block> {
        self.by_name.get(name).map(|&i| &self.blocks[i])
    }

    /// Number of scalars.
    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// One flag per scalar.
    pub fn trainable_mask(&self) -> Vec<bool> {
        let mut out = vec![false; self.total];
        for b in &self.blocks {
            if b.trainable {
                out[b.range()].fill(true);
            }
        }
        out
    }
}

/// Gradient with the same layout as the parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    pub data: Vec<T>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros(len: usize) -> Self {
        Gradients {
            data: vec![T::zero(); len],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn norm(&self) -> T {
        self.data.iter().map(|&g| g * g).sum::<T>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|g| g.is_finite())
    }

    pub fn scale(&mut self, s: T) {
        for g in &mut self.data {
            *g *= s;
        }
    }

    pub fn add_assign(&mut self, other: &Gradients<T>) -> Result<(), NeuralError> {
        if other.len() != self.len() {
            return Err(NeuralError::Shape(format!("gradient lengths {} and {}", self.len(), other.len())));
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// Slice for one named block.
    pub fn block<'a>(&'a self, layout: &ParamLayout, name: &str) -> Option<&'a [T]> {
        layout.get(name).map(|b| &self.data[b.range()])
    }
}
