//! Finitely supported multi-indices over the coordinates 1, 2, 3, …
//!
//! A multi-index `s` assigns a non-negative integer order to every coordinate
//! of an infinite parameter vector, with only finitely many orders nonzero.
//! Only the nonzero entries are stored. Multi-indices label tensor-product
//! Hermite polynomials and sparse-grid difference operators, and are ordered
//! either lexicographically (on the dense expansion) or by a weight system's
//! `sigma` value.

mod set;
mod weight;

pub use set::{
    enumerate_level_set, enumerate_threshold_set, enumerate_two_weight_set, reorder_by_weight,
    sigma_ordered_prefix, IndexSet, LevelRegime, SetKind, DEFAULT_ENUMERATION_CAP,
};
pub use weight::{DecayRule, WeightSystem};

pub(crate) use weight::fnv1a;
#[cfg(test)]
pub(crate) use weight::dyadic_rho_ws;

use crate::error::{Error, Result};
use std::cmp::Ordering;
use std::fmt;

/// A finitely supported multi-index. Entries are `(coordinate, order)` pairs
/// with 1-based coordinates, strictly ascending, and strictly positive orders.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    entries: Vec<(u32, u32)>,
}

impl MultiIndex {
    /// The zero multi-index (empty support).
    pub fn zero() -> Self {
        MultiIndex::default()
    }

    /// The unit multi-index `e_j` (1-based coordinate).
    pub fn unit(j: u32) -> Self {
        assert!(j >= 1, "coordinates are 1-based");
        MultiIndex {
            entries: vec![(j, 1)],
        }
    }

    /// Builds a multi-index from `(coordinate, order)` pairs. Pairs may come
    /// in any order; zero orders are dropped; duplicate coordinates are an
    /// error.
    pub fn from_pairs<I: IntoIterator<Item = (u32, u32)>>(pairs: I) -> Result<Self> {
        let mut entries: Vec<(u32, u32)> = pairs.into_iter().filter(|&(_, s)| s > 0).collect();
        entries.sort_unstable();
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::invalid(format!(
                    "duplicate coordinate {} in multi-index",
                    w[0].0
                )));
            }
        }
        if let Some(&(j, _)) = entries.first() {
            if j == 0 {
                return Err(Error::invalid("coordinates are 1-based"));
            }
        }
        Ok(MultiIndex { entries })
    }

    /// Builds from a dense slice `(s_1, s_2, …)`.
    pub fn from_dense(dense: &[u32]) -> Self {
        MultiIndex {
            entries: dense
                .iter()
                .enumerate()
                .filter(|&(_, &s)| s > 0)
                .map(|(i, &s)| (i as u32 + 1, s))
                .collect(),
        }
    }

    /// Order in coordinate `j` (1-based); 0 outside the support.
    pub fn get(&self, j: u32) -> u32 {
        self.entries
            .binary_search_by_key(&j, |&(c, _)| c)
            .map(|i| self.entries[i].1)
            .unwrap_or(0)
    }

    /// Nonzero `(coordinate, order)` pairs in ascending coordinate order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.entries.iter().copied()
    }

    /// Coordinates with nonzero order.
    pub fn support(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.iter().map(|&(j, _)| j)
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// `|s|_1`, the total order.
    pub fn total_order(&self) -> u64 {
        self.entries.iter().map(|&(_, s)| s as u64).sum()
    }

    /// `|s|_inf`, the largest single order.
    pub fn max_order(&self) -> u32 {
        self.entries.iter().map(|&(_, s)| s).max().unwrap_or(0)
    }

    /// Largest coordinate in the support (0 for the zero index).
    pub fn max_coordinate(&self) -> u32 {
        self.entries.last().map(|&(j, _)| j).unwrap_or(0)
    }

    /// Componentwise `self <= other`.
    pub fn le(&self, other: &MultiIndex) -> bool {
        self.entries.iter().all(|&(j, s)| s <= other.get(j))
    }

    /// Copy with coordinate `j` incremented by one.
    pub fn incremented(&self, j: u32) -> Self {
        assert!(j >= 1, "coordinates are 1-based");
        let mut entries = self.entries.clone();
        match entries.binary_search_by_key(&j, |&(c, _)| c) {
            Ok(i) => entries[i].1 += 1,
            Err(i) => entries.insert(i, (j, 1)),
        }
        MultiIndex { entries }
    }

    /// Copy with coordinate `j` decremented by one. Errors if `s_j = 0`.
    pub fn decremented(&self, j: u32) -> Result<Self> {
        let mut entries = self.entries.clone();
        match entries.binary_search_by_key(&j, |&(c, _)| c) {
            Ok(i) => {
                if entries[i].1 == 1 {
                    entries.remove(i);
                } else {
                    entries[i].1 -= 1;
                }
                Ok(MultiIndex { entries })
            }
            Err(_) => Err(Error::invalid(format!(
                "cannot decrement coordinate {j} of {self}"
            ))),
        }
    }

    /// Componentwise difference `self - e` where `e` is a 0/1 mask supported
    /// on a subset of `self`'s support.
    pub fn minus_mask(&self, mask: &[u32]) -> MultiIndex {
        let mut out = self.clone();
        for &j in mask {
            out = out
                .decremented(j)
                .expect("mask must be supported on the index");
        }
        out
    }

    /// Dense lexicographic comparison of `(s_1, s_2, …)`.
    pub fn lex_cmp(&self, other: &MultiIndex) -> Ordering {
        let mut a = self.entries.iter().peekable();
        let mut b = other.entries.iter().peekable();
        loop {
            match (a.peek(), b.peek()) {
                (None, None) => return Ordering::Equal,
                (Some(_), None) => return Ordering::Greater,
                (None, Some(_)) => return Ordering::Less,
                (Some(&&(ja, sa)), Some(&&(jb, sb))) => {
                    if ja == jb {
                        if sa != sb {
                            return sa.cmp(&sb);
                        }
                        a.next();
                        b.next();
                    } else if ja < jb {
                        // a has a nonzero order where b has zero
                        return Ordering::Greater;
                    } else {
                        return Ordering::Less;
                    }
                }
            }
        }
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.lex_cmp(other)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.entries.is_empty() {
            return write!(f, "-");
        }
        let mut first = true;
        for &(j, s) in &self.entries {
            if !first {
                write!(f, " ")?;
            }
            write!(f, "{j}:{s}")?;
            first = false;
        }
        Ok(())
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{self}]")
    }
}
