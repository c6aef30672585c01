//! Model-free stand-ins: template intent text and hashed bag-of-tokens
//! embeddings. Both use integer arithmetic only, so results are identical
//! across runs and platforms.

use crate::sva::{property_sketch, Implication, SignalFilter};

/// Deterministic intent text for an assertion.
///
/// `assert property (a |-> b);` becomes `implication: [a] implies [b]`.
pub fn canonical_intent(text: &str, filter: &SignalFilter) -> String {
    let sk = property_sketch(text, filter);
    let list = |v: &[String]| format!("[{}]", v.join(", "));
    let mut out = match sk.implication {
        Some(Implication::Overlapped) => {
            format!("implication: {} implies {}", list(&sk.antecedent), list(&sk.consequent))
        }
        Some(Implication::NextCycle) => {
            format!("implication: {} implies next cycle {}", list(&sk.antecedent), list(&sk.consequent))
        }
        None => format!("property: {}", list(&sk.antecedent)),
    };
    if !sk.temporal.is_empty() {
        out.push_str(&format!(" with [{}]", sk.temporal.join(", ")));
    }
    out
}

/// Lower-cased `[a-z0-9_]+` runs.
pub fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .filter(|t| !t.is_empty())
        .map(str::to_ascii_lowercase)
        .collect()
}

fn hash(seed: u64, bytes: &[u8]) -> u64 {
    // FNV-1a followed by a splitmix64 finaliser
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h ^= h >> 30;
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// Signed hashed token counts, L2-normalised.
pub fn hash_embedding(text: &str, dim: usize, seed: u64) -> Vec<f64> {
    let mut acc = vec![0i64; dim];
    let toks = tokens(text);
    let add = |acc: &mut [i64], bytes: &[u8]| {
        let h = hash(seed, bytes);
        let bucket = (h % dim as u64) as usize;
        acc[bucket] += if h >> 63 == 0 { 1 } else { -1 };
    };
    for t in &toks {
        add(&mut acc, t.as_bytes());
    }
    if acc.iter().all(|&c| c == 0) {
        // no tokens, or every token cancelled out
        add(&mut acc, text.as_bytes());
    }
    let norm = (acc.iter().map(|&c| (c * c) as f64).sum::<f64>()).sqrt();
    acc.into_iter().map(|c| c as f64 / norm).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn implication_template() {
        let f = SignalFilter::default();
        assert_eq!(canonical_intent("assert property (a |-> b);", &f), "implication: [a] implies [b]");
        assert_eq!(
            canonical_intent("assert property (a |-> b);", &f),
            canonical_intent("assert property (a |-> b);", &f)
        );
        assert_eq!(
            canonical_intent("assert property (@(posedge clk) req |=> ##1 $rose(ack));", &f),
            "implication: [req] implies next cycle [ack] with [##1, $rose]"
        );
        assert_eq!(canonical_intent("a && !b", &f), "property: [a, b]");
    }

    #[test]
    fn overlap_orders_similarity() {
        let (d, s) = (4096, 7);
        let a = hash_embedding("start stop read write", d, s);
        let b = hash_embedding("start stop read", d, s);
        let c = hash_embedding("voltage temperature", d, s);
        // bucket-level dot products computed by hand from the same hash
        let expect = |x: &str, y: &str| -> f64 {
            let mut vx = std::collections::HashMap::<usize, i64>::new();
            let mut vy = vx.clone();
            for t in tokens(x) {
                let h = hash(s, t.as_bytes());
                *vx.entry((h % d as u64) as usize).or_default() += if h >> 63 == 0 { 1 } else { -1 };
            }
            for t in tokens(y) {
                let h = hash(s, t.as_bytes());
                *vy.entry((h % d as u64) as usize).or_default() += if h >> 63 == 0 { 1 } else { -1 };
            }
            let dot: i64 = vx.iter().map(|(k, v)| v * vy.get(k).copied().unwrap_or(0)).sum();
            let nx: i64 = vx.values().map(|v| v * v).sum();
            let ny: i64 = vy.values().map(|v| v * v).sum();
            dot as f64 / ((nx as f64).sqrt() * (ny as f64).sqrt())
        };
        let ab = cosine(&a, &b);
        let ac = cosine(&a, &c);
        assert!((ab - expect("start stop read write", "start stop read")).abs() < 1e-12);
        assert!((ac - expect("start stop read write", "voltage temperature")).abs() < 1e-12);
        assert!(ab > ac);
        assert!((ab - 3.0 / 12f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn unit_norm_and_stable() {
        for text in ["x", "a b c d", "", "   ", "$$$"] {
            let v = hash_embedding(text, 64, 1);
            assert!((cosine(&v, &v) - 1.0).abs() < 1e-12, "{text:?}");
            assert_eq!(v, hash_embedding(text, 64, 1));
        }
        assert_ne!(hash_embedding("abc", 4096, 1), hash_embedding("abc", 4096, 2));
    }
}
