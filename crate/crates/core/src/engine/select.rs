use std::cmp::Ordering;

fn descending(a: &f64, b: &f64) -> Ordering {
    b.total_cmp(a)
}

/// Streaming selector of the `n` largest values of a multiset.
///
/// Values are pushed one at a time into a buffer of at most `2n` entries.
/// When the buffer fills it is partitioned at rank `n` and the lower half is
/// dropped; the `n`-th largest value seen so far then acts as a floor below
/// which later pushes are discarded without being stored.
#[derive(Debug, Clone)]
pub struct Selector {
    n: usize,
    buf: Vec<f64>,
    floor: f64,
    seen: usize,
}

impl Selector {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "selector needs n >= 1");
        Self { n, buf: Vec::with_capacity(2 * n), floor: f64::NEG_INFINITY, seen: 0 }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn reset(&mut self) {
        self.buf.clear();
        self.floor = f64::NEG_INFINITY;
        self.seen = 0;
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.seen += 1;
        // once n values >= floor are held, an x <= floor cannot change the
        // multiset of the n largest
        if x <= self.floor {
            return;
        }
        self.buf.push(x);
        if self.buf.len() == 2 * self.n {
            self.compact();
        }
    }

    fn compact(&mut self) {
        let n = self.n;
        self.buf.select_nth_unstable_by(n - 1, descending);
        self.buf.truncate(n);
        self.floor = self.buf[n - 1];
    }

    /// Writes the `n` largest pushed values, sorted nonincreasing, into
    /// `out` and resets the selector. Returns `false` (leaving `out` empty)
    /// if fewer than `n` values were pushed.
    pub fn finish_into(&mut self, out: &mut Vec<f64>) -> bool {
        out.clear();
        if self.seen < self.n {
            self.reset();
            return false;
        }
        if self.buf.len() > self.n {
            self.compact();
        }
        self.buf.sort_unstable_by(descending);
        std::mem::swap(out, &mut self.buf);
        self.reset();
        true
    }
}

/// Reference selection by full sort: with `y` the `n`-th largest child and
/// `p` the number of children strictly above `y`, keeps every child above
/// `y` plus `n - p` copies of `y`.
pub fn select_rightmost(children: &[f64], n: usize) -> Vec<f64> {
    assert!(n >= 1 && children.len() >= n, "need at least n children");
    let mut sorted = children.to_vec();
    sorted.sort_by(descending);
    let y = sorted[n - 1];
    let mut out: Vec<f64> = children.iter().copied().filter(|&c| c > y).collect();
    let p = out.len();
    out.extend(std::iter::repeat_n(y, n - p));
    out.sort_by(descending);
    out
}
