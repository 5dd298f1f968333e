//! Dyadic intervals `[m 2^{-j}, (m + 1) 2^{-j})` with exact integer navigation.

use serde::{Deserialize, Serialize};

use crate::scalar::{lit, Scalar};

/// Number of uniform samples taken on `2Q` for fits and verification.
pub const SAMPLES_PER_INTERVAL: usize = 17;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicInterval {
    pub j: i32,
    pub m: i64,
}

impl DyadicInterval {
    pub fn new(j: i32, m: i64) -> Self {
        Self { j, m }
    }

    pub fn len<T: Scalar>(&self) -> T {
        lit::<T>(2.0).powi(-self.j)
    }

    pub fn lo<T: Scalar>(&self) -> T {
        T::from_i64(self.m).expect("index fits") * self.len::<T>()
    }

    pub fn hi<T: Scalar>(&self) -> T {
        T::from_i64(self.m + 1).expect("index fits") * self.len::<T>()
    }

    pub fn mid<T: Scalar>(&self) -> T {
        (T::from_i64(self.m).expect("index fits") + lit(0.5)) * self.len::<T>()
    }

    pub fn children(&self) -> [Self; 2] {
        [Self::new(self.j + 1, 2 * self.m), Self::new(self.j + 1, 2 * self.m + 1)]
    }

    pub fn parent(&self) -> Self {
        Self::new(self.j - 1, self.m.div_euclid(2))
    }

    /// Whether `other` is contained in `self`.
    pub fn contains(&self, other: &Self) -> bool {
        other.j >= self.j && (other.j - self.j) < 63 && other.m.div_euclid(1i64 << (other.j - self.j)) == self.m
    }

    /// `2Q`: same midpoint, twice the length.
    pub fn double<T: Scalar>(&self) -> (T, T) {
        let h = self.len::<T>() * lit(0.5);
        (self.lo::<T>() - h, self.hi::<T>() + h)
    }

    /// `Q/2`: same midpoint, half the length.
    pub fn half<T: Scalar>(&self) -> (T, T) {
        let q = self.len::<T>() * lit(0.25);
        (self.lo::<T>() + q, self.hi::<T>() - q)
    }

    /// The uniform samples of `2Q` (spacing `|Q| / 8`; the endpoints of `Q` are samples 4 and 12).
    pub fn samples<T: Scalar>(&self) -> Vec<T> {
        let (a, _) = self.double::<T>();
        let step = self.len::<T>() / lit((SAMPLES_PER_INTERVAL - 1) as f64 / 2.0);
        (0..SAMPLES_PER_INTERVAL).map(|i| a + step * lit(i as f64)).collect()
    }

    /// All intervals under `self` down to `depth` further levels (including `self`).
    pub fn descendants(&self, depth: u32) -> Vec<Self> {
        let mut out = Vec::new();
        for d in 0..=depth {
            let base = self.m << d;
            out.extend((0..1i64 << d).map(|k| Self::new(self.j + d as i32, base + k)));
        }
        out
    }
}

impl std::fmt::Display for DyadicInterval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.j, self.m)
    }
}

/// Sorts by left endpoint (then by length, shortest first).
pub fn sort_by_position(v: &mut [DyadicInterval]) {
    v.sort_by(|a, b| a.lo::<f64>().total_cmp(&b.lo::<f64>()).then(b.j.cmp(&a.j)));
}

/// `sum |Q|` over the intervals of `collection` contained in `q0`.
pub fn carleson_sum<T: Scalar>(collection: &[DyadicInterval], q0: &DyadicInterval) -> T {
    collection.iter().filter(|q| q0.contains(q)).fold(T::zero(), |acc, q| acc + q.len::<T>())
}
