//! Counter-based random streams.
//!
//! Every random quantity in the library is a pure function of a [`StreamKey`]
//! and a counter, so results do not depend on iteration order or on the
//! number of worker threads. Keys are derived hierarchically:
//! `StreamKey::new(seed).child(matrix_id).cell(row, col)`.

use rand::RngCore;

use crate::error::{Error, Result};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey(u64);

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        StreamKey(mix64(seed ^ 0x5DEE_CE66_D1CE_4E5B))
    }

    pub fn raw(self) -> u64 {
        self.0
    }

    #[inline]
    pub fn child(self, id: u64) -> Self {
        StreamKey(mix64(self.0 ^ mix64(id.wrapping_add(GOLDEN))))
    }

    /// Key of matrix cell `(row, col)`.
    #[inline]
    pub fn cell(self, row: usize, col: usize) -> Self {
        self.child(row as u64).child(col as u64)
    }

    #[inline]
    pub fn rng(self) -> CounterRng {
        CounterRng { key: self.0, counter: 0 }
    }
}

/// Keyed counter generator: output `n` is a two-round hash of `(key, n)`.
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    #[inline]
    pub fn word(key: u64, counter: u64) -> u64 {
        mix64(mix64(counter.wrapping_mul(GOLDEN) ^ key) ^ key.rotate_left(29))
    }
}

impl RngCore for CounterRng {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        let out = Self::word(self.key, self.counter);
        self.counter = self.counter.wrapping_add(1);
        out
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let w = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&w[..chunk.len()]);
        }
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.fill_bytes(dest);
        Ok(())
    }
}

/// A random-access source of fair coin flips.
pub trait CoinSource: Sync {
    /// Total number of available bits, or `None` for an unbounded stream.
    fn len_bits(&self) -> Option<u64>;

    /// Bit at absolute position `index`.
    fn bit(&self, index: u64) -> bool;

    /// `n <= 128` bits starting at `offset`, most significant first.
    fn bits(&self, offset: u64, n: u32) -> Result<u128> {
        assert!(n <= 128, "at most 128 bits per draw");
        let end = offset + u64::from(n);
        if let Some(len) = self.len_bits() {
            if end > len {
                return Err(Error::CoinsExhausted { offset, end, available: len });
            }
        }
        let mut v: u128 = 0;
        for i in offset..end {
            v = (v << 1) | u128::from(self.bit(i));
        }
        Ok(v)
    }
}

/// Unbounded coin stream generated from a seed.
#[derive(Debug, Clone, Copy)]
pub struct SeededCoins {
    key: StreamKey,
}

impl SeededCoins {
    pub fn new(seed: u64) -> Self {
        SeededCoins { key: StreamKey::new(seed).child(0xC017) }
    }
}

impl CoinSource for SeededCoins {
    fn len_bits(&self) -> Option<u64> {
        None
    }

    #[inline]
    fn bit(&self, index: u64) -> bool {
        (CounterRng::word(self.key.raw(), index / 64) >> (index % 64)) & 1 == 1
    }

    fn bits(&self, offset: u64, n: u32) -> Result<u128> {
        assert!(n <= 128, "at most 128 bits per draw");
        // word-at-a-time extraction, same bit order as the default method
        let mut v: u128 = 0;
        let mut pos = offset;
        let end = offset + u64::from(n);
        while pos < end {
            let word = CounterRng::word(self.key.raw(), pos / 64);
            let lo = (pos % 64) as u32;
            let take = (64 - lo).min((end - pos) as u32);
            let chunk = (word >> lo) & if take == 64 { u64::MAX } else { (1u64 << take) - 1 };
            // bit order inside the chunk is LSB-first; reverse to MSB-first
            let rev = chunk.reverse_bits() >> (64 - take);
            v = (v << take) | u128::from(rev);
            pos += u64::from(take);
        }
        Ok(v)
    }
}

/// A finite, explicit coin sequence.
#[derive(Debug, Clone, Default)]
pub struct BitCoins {
    bits: Vec<bool>,
}

impl BitCoins {
    pub fn new(bits: Vec<bool>) -> Self {
        BitCoins { bits }
    }

    /// Materialize the first `n` bits of another source.
    pub fn take_from(src: &dyn CoinSource, n: u64) -> Self {
        BitCoins { bits: (0..n).map(|i| src.bit(i)).collect() }
    }
}

impl CoinSource for BitCoins {
    fn len_bits(&self) -> Option<u64> {
        Some(self.bits.len() as u64)
    }

    fn bit(&self, index: u64) -> bool {
        self.bits[index as usize]
    }
}

/// Sequential reader over a coin source that counts what it consumes.
pub struct CoinCursor<'a> {
    source: &'a dyn CoinSource,
    position: u64,
    consumed: u64,
}

impl<'a> CoinCursor<'a> {
    pub fn new(source: &'a dyn CoinSource, position: u64) -> Self {
        CoinCursor { source, position, consumed: 0 }
    }

    pub fn take(&mut self, n: u32) -> Result<u128> {
        let v = self.source.bits(self.position, n)?;
        self.position += u64::from(n);
        self.consumed += u64::from(n);
        Ok(v)
    }

    pub fn consumed(&self) -> u64 {
        self.consumed
    }

    pub fn position(&self) -> u64 {
        self.position
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let k = StreamKey::new(7);
        let a: Vec<u64> = (0..4).map(|_| 0).scan(k.rng(), |r, _| Some(r.next_u64())).collect();
        let b: Vec<u64> = (0..4).map(|_| 0).scan(k.rng(), |r, _| Some(r.next_u64())).collect();
        assert_eq!(a, b);
        assert_ne!(k.cell(0, 1).rng().next_u64(), k.cell(1, 0).rng().next_u64());
        assert_ne!(StreamKey::new(1), StreamKey::new(2));
    }

    #[test]
    fn uniform_mean_is_half() {
        let mut r = StreamKey::new(3).rng();
        let n = 200_000;
        let s: f64 = (0..n).map(|_| r.gen::<f64>()).sum();
        assert!((s / n as f64 - 0.5).abs() < 4.0 * (1.0 / 12.0f64 / n as f64).sqrt());
    }

    #[test]
    fn seeded_bits_match_bitwise_definition() {
        let c = SeededCoins::new(11);
        for &(off, n) in &[(0u64, 1u32), (3, 20), (60, 10), (64, 64), (5, 128), (127, 97)] {
            let fast = c.bits(off, n).unwrap();
            let mut slow: u128 = 0;
            for i in off..off + u64::from(n) {
                slow = (slow << 1) | u128::from(c.bit(i));
            }
            assert_eq!(fast, slow, "offset {off} n {n}");
        }
    }

    #[test]
    fn finite_stream_reports_exhaustion() {
        let c = BitCoins::new(vec![true, false, true]);
        assert_eq!(c.bits(0, 3).unwrap(), 0b101);
        assert!(matches!(c.bits(1, 3), Err(Error::CoinsExhausted { .. })));
        let mut cur = CoinCursor::new(&c, 0);
        cur.take(2).unwrap();
        assert_eq!(cur.consumed(), 2);
        assert!(cur.take(2).is_err());
    }

    #[test]
    fn coin_bias_is_fair() {
        let c = SeededCoins::new(5);
        let n = 100_000u64;
        let ones = (0..n).filter(|&i| c.bit(i)).count() as f64;
        assert!((ones / n as f64 - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt());
    }
}
