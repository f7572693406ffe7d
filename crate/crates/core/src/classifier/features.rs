//! Signed feature hashing with TF-IDF weighting.

use std::collections::HashMap;

pub const HASH_BITS: u32 = 20;
pub const BUCKETS: u32 = 1 << HASH_BITS;

/// Maps a token to a bucket and a sign.
pub trait FeatureHasher: Send + Sync {
    fn buckets(&self) -> u32;
    fn hash(&self, token: &str) -> (u32, f64);
}

/// 64-bit FNV-1a; low bits choose the bucket, the top bit the sign.
#[derive(Debug, Clone, Copy, Default)]
pub struct Fnv1a;

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl FeatureHasher for Fnv1a {
    fn buckets(&self) -> u32 {
        BUCKETS
    }

    fn hash(&self, token: &str) -> (u32, f64) {
        let h = fnv1a(token.as_bytes());
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        ((h & (BUCKETS as u64 - 1)) as u32, sign)
    }
}

/// Lowercase alphanumeric word tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Sorted `(bucket, value)` pairs without duplicates or zeros.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVector {
    pub entries: Vec<(u32, f64)>,
}

impl SparseVector {
    pub fn from_map(map: HashMap<u32, f64>) -> Self {
        let mut entries: Vec<(u32, f64)> = map.into_iter().filter(|(_, v)| *v != 0.0).collect();
        entries.sort_unstable_by_key(|e| e.0);
        Self { entries }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        let (a, b) = (&self.entries, &other.entries);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }
}

/// Inverse document frequencies learned from a collection, smoothed:
/// `idf(b) = ln((1 + n) / (1 + df(b))) + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Idf {
    pub n_docs: u32,
    pub table: HashMap<u32, f64>,
}

impl Idf {
    pub fn uniform() -> Self {
        Self {
            n_docs: 0,
            table: HashMap::new(),
        }
    }

    pub fn fit<H: FeatureHasher + ?Sized, S: AsRef<str>>(hasher: &H, docs: &[S]) -> Self {
        let mut df: HashMap<u32, u32> = HashMap::new();
        for doc in docs {
            let mut seen: Vec<u32> = tokenize(doc.as_ref())
                .iter()
                .map(|t| hasher.hash(t).0)
                .collect();
            seen.sort_unstable();
            seen.dedup();
            for b in seen {
                *df.entry(b).or_default() += 1;
            }
        }
        let n = docs.len() as u32;
        let table = df
            .into_iter()
            .map(|(b, d)| (b, Self::formula(n, d)))
            .collect();
        Self { n_docs: n, table }
    }

    fn formula(n: u32, df: u32) -> f64 {
        ((1.0 + n as f64) / (1.0 + df as f64)).ln() + 1.0
    }

    pub fn get(&self, bucket: u32) -> f64 {
        self.table
            .get(&bucket)
            .copied()
            .unwrap_or_else(|| Self::formula(self.n_docs, 0))
    }
}

/// Term counts per bucket (signed), times IDF, L2-normalized. Empty text
/// gives the zero vector.
pub fn featurize_with<H: FeatureHasher + ?Sized>(
    hasher: &H,
    idf: &Idf,
    text: &str,
) -> SparseVector {
    let mut acc: HashMap<u32, f64> = HashMap::new();
    for tok in tokenize(text) {
        let (b, sign) = hasher.hash(&tok);
        *acc.entry(b).or_default() += sign;
    }
    for (b, v) in acc.iter_mut() {
        *v *= idf.get(*b);
    }
    let mut v = SparseVector::from_map(acc);
    let n = v.norm();
    if n > 0.0 {
        v.entries.iter_mut().for_each(|e| e.1 /= n);
    }
    v
}
