use crate::error::{Error, Result};

pub const EDIT_LEVELS: usize = 16;

/// Maps both vectors onto 16 uniform levels spanning their joint range.
pub fn quantize_pair(a: &[f64], b: &[f64]) -> (Vec<u8>, Vec<u8>) {
    let lo = a.iter().chain(b).copied().fold(f64::INFINITY, f64::min);
    let hi = a.iter().chain(b).copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let q = |v: &f64| -> u8 {
        if span > 0.0 {
            ((EDIT_LEVELS as f64 * (v - lo) / span) as usize).min(EDIT_LEVELS - 1) as u8
        } else {
            0
        }
    };
    (a.iter().map(q).collect(), b.iter().map(q).collect())
}

/// Levenshtein distance with unit costs.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Levenshtein distance over byte symbols, bit-parallel over `a` in 64-bit
/// blocks. Same result as [`levenshtein`].
pub fn levenshtein_bits(a: &[u8], b: &[u8]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let words = a.len().div_ceil(64);
    // Match masks per symbol, only for symbols that occur in `a`.
    let mut peq = vec![0u64; 256 * words];
    for (i, &c) in a.iter().enumerate() {
        peq[c as usize * words + i / 64] |= 1 << (i % 64);
    }
    let last = 1u64 << ((a.len() - 1) % 64);
    let mut vp = vec![!0u64; words];
    let mut vn = vec![0u64; words];
    let mut dist = a.len() as isize;
    for &c in b {
        let eq = &peq[c as usize * words..(c as usize + 1) * words];
        // The top boundary row grows by one per column.
        let (mut hp_carry, mut hn_carry) = (1u64, 0u64);
        for w in 0..words {
            let x = eq[w] | hn_carry;
            let d0 = (((x & vp[w]).wrapping_add(vp[w])) ^ vp[w]) | x | vn[w];
            let mut hp = vn[w] | !(d0 | vp[w]);
            let mut hn = d0 & vp[w];
            let (hp_in, hn_in) = (hp_carry, hn_carry);
            if w + 1 < words {
                hp_carry = hp >> 63;
                hn_carry = hn >> 63;
            } else {
                dist += isize::from(hp & last != 0) - isize::from(hn & last != 0);
            }
            hp = (hp << 1) | hp_in;
            hn = (hn << 1) | hn_in;
            vp[w] = hn | !(d0 | hp);
            vn[w] = hp & d0;
        }
    }
    dist as usize
}

/// Edit distance between the quantized symbol sequences of `a` and `b`.
pub fn edit_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyVector);
    }
    let (qa, qb) = quantize_pair(a, b);
    Ok(levenshtein_bits(&qa, &qb) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_distance_is_zero() {
        let a = [0.1, 5.0, -3.0, 2.2];
        assert_eq!(edit_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn removing_an_interior_element_costs_one() {
        let a = [0.0, 3.0, 7.0, 1.0, 10.0];
        let b = [0.0, 3.0, 1.0, 10.0];
        assert_eq!(edit_distance(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn bit_parallel_matches_dynamic_programming() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..400 {
            let n = rng.gen_range(0..200);
            let m = rng.gen_range(0..200);
            let k = rng.gen_range(1..17u8);
            let a: Vec<u8> = (0..n).map(|_| rng.gen_range(0..k)).collect();
            let b: Vec<u8> = (0..m).map(|_| rng.gen_range(0..k)).collect();
            assert_eq!(levenshtein_bits(&a, &b), levenshtein(&a, &b), "{a:?} {b:?}");
        }
    }

    #[test]
    fn quantization_spans_joint_range() {
        let (qa, qb) = quantize_pair(&[0.0, 1.0], &[0.5]);
        assert_eq!(qa, vec![0, 15]);
        assert_eq!(qb, vec![8]);
    }

    #[test]
    fn textbook_levenshtein() {
        assert_eq!(levenshtein(b"kitten", b"sitting"), 3);
        assert_eq!(levenshtein(b"", b"abc"), 3);
    }
}
