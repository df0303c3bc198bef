/// Fixed-capacity bit set over `0..len`.
#[derive(Clone, Debug)]
pub(crate) struct BitSet {
    words: Vec<u64>,
    len: usize,
}

impl BitSet {
    pub(crate) fn new(len: usize) -> Self {
        BitSet {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    #[inline]
    pub(crate) fn contains(&self, i: usize) -> bool {
        self.words[i >> 6] & (1 << (i & 63)) != 0
    }

    #[inline]
    pub(crate) fn insert(&mut self, i: usize) {
        self.words[i >> 6] |= 1 << (i & 63);
    }

    #[inline]
    pub(crate) fn remove(&mut self, i: usize) {
        self.words[i >> 6] &= !(1 << (i & 63));
    }

    /// Smallest absent index `>= from`, if any.
    pub(crate) fn first_absent_from(&self, from: usize) -> Option<usize> {
        if from >= self.len {
            return None;
        }
        let mut w = from >> 6;
        let mut word = !self.words[w] & (!0u64 << (from & 63));
        loop {
            if word != 0 {
                let i = (w << 6) + word.trailing_zeros() as usize;
                return (i < self.len).then_some(i);
            }
            w += 1;
            if w == self.words.len() {
                return None;
            }
            word = !self.words[w];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_absent_skips_members_across_words() {
        let mut s = BitSet::new(130);
        for i in 0..129 {
            s.insert(i);
        }
        assert_eq!(s.first_absent_from(0), Some(129));
        s.insert(129);
        assert_eq!(s.first_absent_from(0), None);
        s.remove(64);
        assert_eq!(s.first_absent_from(0), Some(64));
        assert_eq!(s.first_absent_from(65), None);
    }
}
