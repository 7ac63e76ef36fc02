//! Hashed unigram + bigram features.
//!
//! Tokens are the space-separated words of a normalized input. Each unigram
//! and each adjacent bigram is hashed with 64-bit FNV-1a into a fixed number
//! of buckets; the resulting count vector is scaled to unit L2 norm.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(parts: &[&[u8]]) -> u64 {
    let mut h = FNV_OFFSET;
    for part in parts {
        for &b in *part {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    h
}

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    pub entries: Vec<(u32, f64)>,
}

impl SparseVector {
    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| dense[i as usize] * v).sum()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }
}

pub fn is_valid_dim(feature_dim: usize) -> bool {
    feature_dim >= 2 && feature_dim.is_power_of_two() && feature_dim <= 1 << 31
}

/// Hashes `text` into `feature_dim` buckets (a power of two).
pub fn hash_features(text: &str, feature_dim: usize) -> SparseVector {
    debug_assert!(is_valid_dim(feature_dim));
    let mask = (feature_dim - 1) as u64;
    let tokens: Vec<&str> = text.split(' ').filter(|t| !t.is_empty()).collect();

    let mut idx: Vec<u32> = Vec::with_capacity(tokens.len() * 2);
    for t in &tokens {
        idx.push((fnv1a(&[b"u\x1f", t.as_bytes()]) & mask) as u32);
    }
    for pair in tokens.windows(2) {
        idx.push((fnv1a(&[b"b\x1f", pair[0].as_bytes(), b" ", pair[1].as_bytes()]) & mask) as u32);
    }
    idx.sort_unstable();

    let mut entries: Vec<(u32, f64)> = Vec::new();
    for i in idx {
        match entries.last_mut() {
            Some((last, count)) if *last == i => *count += 1.0,
            _ => entries.push((i, 1.0)),
        }
    }
    let norm = entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (_, v) in &mut entries {
            *v /= norm;
        }
    }
    SparseVector { entries }
}
