//! Named parameter collections.
//!
//! A [`ParamSet`] is an ordered map from dotted names (for example
//! `enc0.block1.conv0.w`) to `f64` tensors. Order is insertion order and is
//! part of the contract: optimizers walk parameters by index, and the
//! checkpoint codec writes arrays in this order so serialization is
//! deterministic.

use std::collections::HashMap;

use ndarray::ArrayD;

use crate::error::{Error, Result};

#[derive(Clone, Default)]
pub struct ParamSet {
    names: Vec<String>,
    values: Vec<ArrayD<f64>>,
    index: HashMap<String, usize>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a tensor under `name`. Names must be unique.
    pub fn insert(&mut self, name: impl Into<String>, value: ArrayD<f64>) {
        let name = name.into();
        assert!(
            !self.index.contains_key(&name),
            "duplicate parameter name {name:?}"
        );
        self.index.insert(name.clone(), self.names.len());
        self.names.push(name);
        self.values.push(value);
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Total number of scalar elements across all tensors.
    pub fn element_count(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn get(&self, name: &str) -> Result<&ArrayD<f64>> {
        self.index
            .get(name)
            .map(|&i| &self.values[i])
            .ok_or_else(|| Error::param(format!("unknown parameter {name:?}")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut ArrayD<f64>> {
        match self.index.get(name) {
            Some(&i) => Ok(&mut self.values[i]),
            None => Err(Error::param(format!("unknown parameter {name:?}"))),
        }
    }

    pub fn name_at(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn value_at(&self, i: usize) -> &ArrayD<f64> {
        &self.values[i]
    }

    pub fn value_at_mut(&mut self, i: usize) -> &mut ArrayD<f64> {
        &mut self.values[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ArrayD<f64>)> {
        self.names
            .iter()
            .map(String::as_str)
            .zip(self.values.iter())
    }

    /// Checks that another set has identical names, order, and shapes.
    pub fn compatible_with(&self, other: &ParamSet) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::param(format!(
                "parameter count mismatch: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        for i in 0..self.len() {
            if self.names[i] != other.names[i] {
                return Err(Error::param(format!(
                    "parameter {} name mismatch: {:?} vs {:?}",
                    i, self.names[i], other.names[i]
                )));
            }
            if self.values[i].shape() != other.values[i].shape() {
                return Err(Error::param(format!(
                    "parameter {:?} shape mismatch: {:?} vs {:?}",
                    self.names[i],
                    self.values[i].shape(),
                    other.values[i].shape()
                )));
            }
        }
        Ok(())
    }
}

/// Prints names and shapes only; full tensors would swamp test output.
impl std::fmt::Debug for ParamSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut map = f.debug_map();
        for (name, value) in self.iter() {
            map.entry(&name, &value.shape());
        }
        map.finish()
    }
}
