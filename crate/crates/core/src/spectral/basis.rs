use std::sync::Arc;

use crate::error::{invalid, LabError, Result};
use crate::lattice::{within_radius, ModeIndex};

const ABSENT: u32 = u32::MAX;

/// Every nonzero wavenumber with `|k| ≤ radius`, in lexicographic order of
/// `(k1, k2)`. Each wavenumber carries one real basis function, so a
/// coefficient vector has one entry per listed mode.
#[derive(Debug, Clone)]
pub struct Basis {
    radius: f64,
    modes: Vec<ModeIndex>,
    norm_sq: Vec<f64>,
    half_width: i32,
    lookup: Vec<u32>,
}

impl PartialEq for Basis {
    fn eq(&self, other: &Self) -> bool {
        self.modes == other.modes
    }
}

impl Basis {
    pub fn new(radius: f64) -> Result<Arc<Self>> {
        if !(radius >= 1.0) || !radius.is_finite() {
            return Err(invalid(format!("truncation radius must be at least 1, got {radius}")));
        }
        let r = radius.floor() as i32;
        let width = (2 * r + 1) as usize;
        let mut modes = Vec::new();
        for k1 in -r..=r {
            for k2 in -r..=r {
                if (k1, k2) != (0, 0) && within_radius((k1 * k1 + k2 * k2) as i64, radius) {
                    modes.push(ModeIndex::of(k1, k2));
                }
            }
        }
        let mut lookup = vec![ABSENT; width * width];
        for (i, m) in modes.iter().enumerate() {
            lookup[((m.k1() + r) as usize) * width + (m.k2() + r) as usize] = i as u32;
        }
        let norm_sq = modes.iter().map(|m| m.norm_sq() as f64).collect();
        Ok(Arc::new(Self {
            radius,
            modes,
            norm_sq,
            half_width: r,
            lookup,
        }))
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[ModeIndex] {
        &self.modes
    }

    pub fn mode(&self, i: usize) -> ModeIndex {
        self.modes[i]
    }

    /// `|k|²` for the mode at position `i`.
    pub fn norm_sq(&self, i: usize) -> f64 {
        self.norm_sq[i]
    }

    pub fn norms_sq(&self) -> &[f64] {
        &self.norm_sq
    }

    pub fn position(&self, k1: i32, k2: i32) -> Option<usize> {
        let r = self.half_width;
        if k1.abs() > r || k2.abs() > r {
            return None;
        }
        let w = (2 * r + 1) as usize;
        match self.lookup[((k1 + r) as usize) * w + (k2 + r) as usize] {
            ABSENT => None,
            i => Some(i as usize),
        }
    }

    pub fn index_of(&self, k: ModeIndex) -> Option<usize> {
        self.position(k.k1(), k.k2())
    }

    pub fn index(&self, k: ModeIndex) -> Result<usize> {
        self.index_of(k)
            .ok_or(LabError::ModeOutsideBasis(k.k1(), k.k2()))
    }

    /// Position of `−k` for the mode at position `i`. Bases are symmetric.
    pub fn neg_index(&self, i: usize) -> usize {
        let m = self.modes[i];
        self.position(-m.k1(), -m.k2()).expect("bases are closed under negation")
    }
}
