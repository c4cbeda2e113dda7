//! Integer-lattice bookkeeping for how forcing propagates through the
//! quadratic nonlinearity.
//!
//! A forced wavenumber set `Z*` has a symmetric part `Z0 = Z* ∩ (−Z*)`.
//! Shells are generated by `Z_n = { ℓ + j : ℓ ∈ Z_{n−1}, j ∈ Z0 }` subject to
//! the two admissibility conditions `ℓ^⊥·j ≠ 0` and `|ℓ| ≠ |j|`. All
//! arithmetic here is exact integer arithmetic.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Neg;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, LabError, Result};

/// A nonzero wavenumber `k = (k1, k2)`.
///
/// The half-plane class decides the real basis function attached to the
/// mode: `sin(k·x)` on the upper class, `cos(k·x)` on the lower class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "[i32; 2]", into = "[i32; 2]")]
pub struct ModeIndex {
    k1: i32,
    k2: i32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignClass {
    /// `k2 > 0`, or `k1 > 0` and `k2 = 0`; basis function `sin(k·x)`.
    Plus,
    /// The negation of the plus class; basis function `cos(k·x)`.
    Minus,
}

impl ModeIndex {
    pub fn new(k1: i32, k2: i32) -> Result<Self> {
        if k1 == 0 && k2 == 0 {
            return Err(LabError::ZeroMode);
        }
        Ok(Self { k1, k2 })
    }

    /// Panics on `(0, 0)`. Intended for literals in tests and examples.
    pub fn of(k1: i32, k2: i32) -> Self {
        Self::new(k1, k2).expect("nonzero wavenumber")
    }

    pub const fn k1(self) -> i32 {
        self.k1
    }

    pub const fn k2(self) -> i32 {
        self.k2
    }

    pub fn class(self) -> SignClass {
        if self.k2 > 0 || (self.k2 == 0 && self.k1 > 0) {
            SignClass::Plus
        } else {
            SignClass::Minus
        }
    }

    pub fn is_plus(self) -> bool {
        self.class() == SignClass::Plus
    }

    /// `+1` on the plus class, `−1` on the minus class.
    pub fn sign(self) -> i32 {
        if self.is_plus() {
            1
        } else {
            -1
        }
    }

    /// The representative of `±k` lying in the plus class.
    pub fn canonical(self) -> Self {
        if self.is_plus() {
            self
        } else {
            -self
        }
    }

    /// `self^⊥ · other` with `k^⊥ = (−k2, k1)`.
    pub fn perp_dot(self, other: Self) -> i64 {
        -(self.k2 as i64) * other.k1 as i64 + self.k1 as i64 * other.k2 as i64
    }

    pub fn norm_sq(self) -> i64 {
        let (a, b) = (self.k1 as i64, self.k2 as i64);
        a * a + b * b
    }

    pub fn norm(self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    /// `self + other`, or `None` when the sum is the zero vector.
    pub fn checked_add(self, other: Self) -> Option<Self> {
        Self::new(self.k1 + other.k1, self.k2 + other.k2).ok()
    }

    pub fn within(self, radius: f64) -> bool {
        within_radius(self.norm_sq(), radius)
    }
}

pub(crate) fn within_radius(norm_sq: i64, radius: f64) -> bool {
    (norm_sq as f64) <= radius * radius * (1.0 + 1e-12)
}

impl Neg for ModeIndex {
    type Output = Self;

    fn neg(self) -> Self {
        Self {
            k1: -self.k1,
            k2: -self.k2,
        }
    }
}

impl fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.k1, self.k2)
    }
}

impl TryFrom<[i32; 2]> for ModeIndex {
    type Error = LabError;

    fn try_from(v: [i32; 2]) -> Result<Self> {
        Self::new(v[0], v[1])
    }
}

impl From<ModeIndex> for [i32; 2] {
    fn from(m: ModeIndex) -> Self {
        [m.k1, m.k2]
    }
}

pub type ModeSet = BTreeSet<ModeIndex>;

/// Builds a mode set from integer pairs, rejecting `(0, 0)`.
pub fn mode_set(pairs: &[[i32; 2]]) -> Result<ModeSet> {
    pairs.iter().map(|&p| ModeIndex::try_from(p)).collect()
}

/// `Z* ∩ (−Z*)`.
pub fn symmetric_part(z_star: &ModeSet) -> ModeSet {
    z_star.iter().copied().filter(|k| z_star.contains(&-*k)).collect()
}

/// The forced set together with its symmetric part.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<ModeIndex>", into = "Vec<ModeIndex>")]
pub struct ForcingGeometry {
    z_star: ModeSet,
    z_zero: ModeSet,
}

impl ForcingGeometry {
    pub fn new(z_star: ModeSet) -> Self {
        let z_zero = symmetric_part(&z_star);
        Self { z_star, z_zero }
    }

    pub fn from_pairs(pairs: &[[i32; 2]]) -> Result<Self> {
        Ok(Self::new(mode_set(pairs)?))
    }

    /// `sin x1, cos x1, sin(x1 + x2), cos(x1 + x2)`.
    pub fn four_mode() -> Self {
        Self::from_pairs(&[[1, 0], [-1, 0], [1, 1], [-1, -1]]).expect("nonzero modes")
    }

    pub fn unforced() -> Self {
        Self::new(ModeSet::new())
    }

    pub fn z_star(&self) -> &ModeSet {
        &self.z_star
    }

    pub fn z_zero(&self) -> &ModeSet {
        &self.z_zero
    }

    pub fn len(&self) -> usize {
        self.z_star.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z_star.is_empty()
    }

    pub fn max_norm(&self) -> f64 {
        self.z_star.iter().map(|k| k.norm()).fold(0.0, f64::max)
    }
}

impl From<Vec<ModeIndex>> for ForcingGeometry {
    fn from(v: Vec<ModeIndex>) -> Self {
        Self::new(v.into_iter().collect())
    }
}

impl From<ForcingGeometry> for Vec<ModeIndex> {
    fn from(g: ForcingGeometry) -> Self {
        g.z_star.into_iter().collect()
    }
}

fn admissible(l: ModeIndex, j: ModeIndex) -> bool {
    l.perp_dot(j) != 0 && l.norm_sq() != j.norm_sq()
}

/// One application of the shell recursion, unrestricted in radius.
pub fn next_shell(prev: &ModeSet, z_zero: &ModeSet) -> ModeSet {
    next_shell_witnessed(prev, z_zero, None).into_keys().collect()
}

/// Shell recursion recording, for each new mode, the first admissible pair
/// `(ℓ, j)` in lexicographic order over `(ℓ, j)`.
fn next_shell_witnessed(
    prev: &ModeSet,
    z_zero: &ModeSet,
    radius: Option<f64>,
) -> BTreeMap<ModeIndex, (ModeIndex, ModeIndex)> {
    let mut out = BTreeMap::new();
    for &l in prev {
        for &j in z_zero {
            if !admissible(l, j) {
                continue;
            }
            let Some(m) = l.checked_add(j) else { continue };
            if radius.is_some_and(|r| !m.within(r)) {
                continue;
            }
            out.entry(m).or_insert((l, j));
        }
    }
    out
}

/// A single generation step `to = from + step`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessStep {
    pub from: ModeIndex,
    pub step: ModeIndex,
    pub to: ModeIndex,
}

impl WitnessStep {
    /// Replays the step with exact integer arithmetic.
    pub fn is_valid(&self) -> bool {
        admissible(self.from, self.step) && self.from.checked_add(self.step) == Some(self.to)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReachabilityResult {
    /// `Z_1, Z_2, …` restricted to the radius.
    pub shells: Vec<ModeSet>,
    /// Union of the shells together with `Z*`.
    pub reached: ModeSet,
    /// The shell sequence reached a fixed point or cycle within the budget.
    pub saturated: bool,
    /// Generation chain for every reached mode outside `Z*`, starting in `Z0`.
    pub witness_paths: BTreeMap<ModeIndex, Vec<WitnessStep>>,
}

impl ReachabilityResult {
    /// Whether every lattice point with `|k| ≤ radius` was reached.
    pub fn covers_ball(&self, radius: f64) -> bool {
        ball(radius).iter().all(|k| self.reached.contains(k))
    }
}

/// Every nonzero lattice point with `|k| ≤ radius`.
pub fn ball(radius: f64) -> ModeSet {
    let r = radius.floor() as i32;
    let mut out = ModeSet::new();
    for k1 in -r..=r {
        for k2 in -r..=r {
            if let Ok(m) = ModeIndex::new(k1, k2) {
                if m.within(radius) {
                    out.insert(m);
                }
            }
        }
    }
    out
}

pub const DEFAULT_MAX_SHELLS: usize = 64;

/// Iterates the shell recursion inside `|k| ≤ radius`.
///
/// Modes generated outside the radius are dropped and never re-enter.
/// Iteration stops when a shell is empty or repeats an earlier shell
/// (the sequence is then periodic and the union cannot grow).
pub fn reachable_modes(
    geometry: &ForcingGeometry,
    radius: f64,
    max_shells: usize,
) -> Result<ReachabilityResult> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(invalid(format!("radius must be positive, got {radius}")));
    }
    if let Some(k) = geometry.z_star().iter().find(|k| !k.within(radius)) {
        return Err(invalid(format!(
            "forced mode {k} lies outside radius {radius}"
        )));
    }
    if max_shells == 0 {
        return Err(invalid("max_shells must be positive"));
    }

    let z_zero = geometry.z_zero();
    let mut history: Vec<ModeSet> = vec![z_zero.clone()];
    let mut witnesses: Vec<BTreeMap<ModeIndex, (ModeIndex, ModeIndex)>> = vec![BTreeMap::new()];
    let mut saturated = false;

    for _ in 0..max_shells {
        let prev = history.last().expect("nonempty history");
        let w = next_shell_witnessed(prev, z_zero, Some(radius));
        let shell: ModeSet = w.keys().copied().collect();
        let repeats = shell.is_empty() || history.contains(&shell);
        history.push(shell);
        witnesses.push(w);
        if repeats {
            saturated = true;
            break;
        }
    }

    let shells: Vec<ModeSet> = history[1..].to_vec();
    let mut reached: ModeSet = geometry.z_star().clone();
    let mut witness_paths = BTreeMap::new();
    for (n, shell) in shells.iter().enumerate() {
        let level = n + 1;
        for &m in shell {
            if !reached.insert(m) {
                continue;
            }
            let mut path = Vec::with_capacity(level);
            let mut cur = m;
            for lvl in (1..=level).rev() {
                let (l, j) = witnesses[lvl][&cur];
                path.push(WitnessStep {
                    from: l,
                    step: j,
                    to: cur,
                });
                cur = l;
            }
            path.reverse();
            witness_paths.insert(m, path);
        }
    }

    Ok(ReachabilityResult {
        shells,
        reached,
        saturated,
        witness_paths,
    })
}

/// Why a forcing geometry fails the generation criterion.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GenerationFailure {
    EmptySymmetricPart,
    /// The integer span of `Z0` is a proper sublattice. `index` is 0 when
    /// the span has rank below two.
    ProperSublattice { index: u64 },
    EqualNorms,
}

impl fmt::Display for GenerationFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EmptySymmetricPart => write!(f, "empty symmetric part"),
            Self::ProperSublattice { index: 0 } => {
                write!(f, "does not generate Z^2 (rank-deficient span)")
            }
            Self::ProperSublattice { index } => {
                write!(f, "does not generate Z^2 (sublattice of index {index})")
            }
            Self::EqualNorms => write!(f, "all members have equal euclidean norm"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationVerdict {
    pub generating: bool,
    pub failures: Vec<GenerationFailure>,
}

/// Triangular basis `[[a, 0], [b, c]]` (columns `(a, b)`, `(0, c)`) of the
/// integer span of `vectors`, via unimodular column operations.
pub fn lattice_basis(vectors: &[(i64, i64)]) -> ((i64, i64), i64) {
    let mut pivot: Option<(i64, i64)> = None;
    let mut second: i64 = 0;
    for &(c, d) in vectors {
        match pivot {
            None if c != 0 => pivot = Some((c, d)),
            None => second = gcd(second, d),
            Some((a, b)) => {
                if c == 0 {
                    second = gcd(second, d);
                    continue;
                }
                let (g, s, t) = ext_gcd(a, c);
                pivot = Some((g, s * b + t * d));
                // (c/g)·(a, b) − (a/g)·(c, d) has zero first coordinate.
                second = gcd(second, (c / g) * b - (a / g) * d);
            }
        }
    }
    match pivot {
        Some((a, b)) => {
            let c = second.abs();
            let b = if c != 0 { b.rem_euclid(c) } else { b };
            ((a.abs(), if a < 0 { -b } else { b }), c)
        }
        None => ((0, 0), second.abs()),
    }
}

/// Index of the integer span of `vectors` in `Z²` (0 when rank-deficient).
pub fn sublattice_index(vectors: &[(i64, i64)]) -> u64 {
    let ((a, _), c) = lattice_basis(vectors);
    (a * c).unsigned_abs()
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Returns `(g, s, t)` with `g = s·a + t·b = gcd(a, b) > 0` for `a ≠ 0`.
fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    let (mut r0, mut r1) = (a, b);
    let (mut s0, mut s1) = (1i64, 0i64);
    let (mut t0, mut t1) = (0i64, 1i64);
    while r1 != 0 {
        let q = r0.div_euclid(r1);
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 < 0 {
        (-r0, -s0, -t0)
    } else {
        (r0, s0, t0)
    }
}

/// The two-part criterion: `Z0` spans `Z²` over the integers, and `Z0`
/// has two members of unequal euclidean norm.
pub fn is_generating(geometry: &ForcingGeometry) -> GenerationVerdict {
    let z0 = geometry.z_zero();
    if z0.is_empty() {
        return GenerationVerdict {
            generating: false,
            failures: vec![GenerationFailure::EmptySymmetricPart],
        };
    }
    let mut failures = Vec::new();
    let vectors: Vec<(i64, i64)> = z0.iter().map(|k| (k.k1() as i64, k.k2() as i64)).collect();
    let index = sublattice_index(&vectors);
    if index != 1 {
        failures.push(GenerationFailure::ProperSublattice { index });
    }
    let first = z0.iter().next().expect("nonempty").norm_sq();
    if z0.iter().all(|k| k.norm_sq() == first) {
        failures.push(GenerationFailure::EqualNorms);
    }
    GenerationVerdict {
        generating: failures.is_empty(),
        failures,
    }
}
