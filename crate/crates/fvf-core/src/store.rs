//! Total variable stores. Every variable reads as the zero value of the
//! domain until assigned; entries remember first-assignment order so state
//! renderings stay stable.

/// The default value unassigned variables hold.
pub trait Zero: Clone + PartialEq {
    fn zero() -> Self;
}

impl Zero for i64 {
    fn zero() -> i64 {
        0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Store<V> {
    entries: Vec<(String, V)>,
}

impl<V: Zero> Store<V> {
    pub fn new() -> Store<V> {
        Store {
            entries: Vec::new(),
        }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, V)>) -> Store<V> {
        let mut s = Store::new();
        for (k, v) in pairs {
            s.set(&k, v);
        }
        s
    }

    pub fn get(&self, name: &str) -> V {
        self.entries
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.clone())
            .unwrap_or_else(V::zero)
    }

    pub fn set(&mut self, name: &str, value: V) {
        match self.entries.iter_mut().find(|(k, _)| k == name) {
            Some((_, v)) => *v = value,
            None => self.entries.push((name.to_string(), value)),
        }
    }

    /// Entries in first-assignment order.
    pub fn entries(&self) -> &[(String, V)] {
        &self.entries
    }

    /// Equality as total functions: explicit zeros and absent entries agree.
    pub fn semantic_eq(&self, other: &Store<V>) -> bool {
        self.entries.iter().all(|(k, v)| other.get(k) == *v)
            && other.entries.iter().all(|(k, v)| self.get(k) == *v)
    }
}

impl<V: Zero> Default for Store<V> {
    fn default() -> Store<V> {
        Store::new()
    }
}
