use super::{NnError, Real};

/// One named, shaped parameter array.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<T>,
}

/// Ordered collection of named parameter arrays.
///
/// Entry order is insertion order and is what checkpoints serialize. Gradient
/// sets and optimizer moments are `ParamSet`s congruent with the parameters
/// they belong to.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet<T> {
    entries: Vec<ParamEntry<T>>,
}

impl<T: Real> ParamSet<T> {
    pub fn new() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn push(
        &mut self,
        name: impl Into<String>,
        shape: Vec<usize>,
        values: Vec<T>,
    ) -> Result<(), NnError> {
        let name = name.into();
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(NnError::Config(format!("invalid parameter name {name:?}")));
        }
        if self.entries.iter().any(|e| e.name == name) {
            return Err(NnError::Config(format!("duplicate parameter name {name}")));
        }
        let expected: usize = shape.iter().product();
        if expected != values.len() {
            return Err(NnError::Config(format!(
                "parameter {name}: shape {shape:?} needs {expected} values, got {}",
                values.len()
            )));
        }
        self.entries.push(ParamEntry {
            name,
            shape,
            values,
        });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalars across all entries.
    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|e| e.values.len()).sum()
    }

    pub fn entries(&self) -> &[ParamEntry<T>] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [ParamEntry<T>] {
        &mut self.entries
    }

    pub fn entry(&self, index: usize) -> &ParamEntry<T> {
        &self.entries[index]
    }

    pub fn get(&self, name: &str) -> Option<&ParamEntry<T>> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn values(&self, index: usize) -> &[T] {
        &self.entries[index].values
    }

    pub fn values_mut(&mut self, index: usize) -> &mut [T] {
        &mut self.entries[index].values
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .map(|e| ParamEntry {
                    name: e.name.clone(),
                    shape: e.shape.clone(),
                    values: vec![T::zero(); e.values.len()],
                })
                .collect(),
        }
    }

    /// True when names and shapes match entry by entry.
    pub fn is_congruent<U: Real>(&self, other: &ParamSet<U>) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(a, b)| a.name == b.name && a.shape == b.shape)
    }

    pub fn ensure_congruent<U: Real>(&self, other: &ParamSet<U>) -> Result<(), NnError> {
        if self.is_congruent(other) {
            Ok(())
        } else {
            Err(NnError::Config(
                "parameter sets differ in names or shapes".to_string(),
            ))
        }
    }

    pub fn cast<U: Real>(&self) -> ParamSet<U> {
        ParamSet {
            entries: self
                .entries
                .iter()
                .map(|e| ParamEntry {
                    name: e.name.clone(),
                    shape: e.shape.clone(),
                    values: e.values.iter().map(|v| U::of(v.as_f64())).collect(),
                })
                .collect(),
        }
    }

    /// Iterates every scalar in entry order.
    pub fn flat_iter(&self) -> impl Iterator<Item = T> + '_ {
        self.entries.iter().flat_map(|e| e.values.iter().copied())
    }

    /// L2 norm over all entries, accumulated in double precision.
    pub fn l2_norm(&self) -> f64 {
        self.flat_iter()
            .map(|v| {
                let v = v.as_f64();
                v * v
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: T) {
        for e in &mut self.entries {
            for v in &mut e.values {
                *v *= factor;
            }
        }
    }

    /// Concatenates sets under name prefixes: `prefix.name`.
    pub fn merged(parts: &[(&str, &ParamSet<T>)]) -> Result<Self, NnError> {
        let mut out = ParamSet::new();
        for (prefix, set) in parts {
            for e in &set.entries {
                out.push(format!("{prefix}.{}", e.name), e.shape.clone(), e.values.clone())?;
            }
        }
        Ok(out)
    }

    /// Extracts the entries under `prefix.` with the prefix stripped.
    pub fn scoped(&self, prefix: &str) -> Self {
        let lead = format!("{prefix}.");
        ParamSet {
            entries: self
                .entries
                .iter()
                .filter_map(|e| {
                    e.name.strip_prefix(&lead).map(|rest| ParamEntry {
                        name: rest.to_string(),
                        shape: e.shape.clone(),
                        values: e.values.clone(),
                    })
                })
                .collect(),
        }
    }

    /// Overwrites values from `source`, which must be congruent.
    pub fn assign(&mut self, source: &ParamSet<T>) -> Result<(), NnError> {
        self.ensure_congruent(source)?;
        for (dst, src) in self.entries.iter_mut().zip(&source.entries) {
            dst.values.copy_from_slice(&src.values);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicates_and_bad_lengths() {
        let mut p = ParamSet::<f32>::new();
        p.push("w", vec![2, 2], vec![0.0; 4]).unwrap();
        assert!(p.push("w", vec![1], vec![0.0]).is_err());
        assert!(p.push("b", vec![3], vec![0.0; 2]).is_err());
        assert!(p.push("has space", vec![1], vec![0.0]).is_err());
        assert_eq!(p.num_scalars(), 4);
    }

    #[test]
    fn merge_then_scope_recovers_parts() {
        let mut a = ParamSet::<f32>::new();
        a.push("l0.weight", vec![1, 2], vec![1.0, 2.0]).unwrap();
        let mut b = ParamSet::<f32>::new();
        b.push("l0.weight", vec![1, 1], vec![3.0]).unwrap();
        let m = ParamSet::merged(&[("policy", &a), ("value", &b)]).unwrap();
        assert_eq!(m.entry(1).name, "value.l0.weight");
        assert_eq!(m.scoped("policy"), a);
        assert_eq!(m.scoped("value"), b);
    }

    #[test]
    fn norm_of_three_four() {
        let mut p = ParamSet::<f64>::new();
        p.push("g", vec![2], vec![3.0, 4.0]).unwrap();
        assert_eq!(p.l2_norm(), 5.0);
    }
}
