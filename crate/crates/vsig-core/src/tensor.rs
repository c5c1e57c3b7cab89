//! Truncated tensor algebra over an m-letter alphabet.
//!
//! Level `n` of a series is stored as a dense array of `m^n` coefficients in
//! base-m word order: the word `i_1 ... i_n` (letters in `1..=m`) sits at flat
//! index `((i_1 - 1) m + (i_2 - 1)) m + ...`. Dense per-level storage keeps
//! tensor products contiguous; the engines fill every entry anyway.

use crate::error::Error;
use crate::math::sqrt;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

/// A word over the alphabet `{1..m}`. The empty word is allowed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Word {
    alphabet: usize,
    letters: Vec<usize>,
}

impl Word {
    pub fn new(alphabet: usize, letters: Vec<usize>) -> Result<Self, Error> {
        if alphabet == 0 {
            return Err(Error::InvalidInput("alphabet size must be positive".into()));
        }
        for &l in &letters {
            if l == 0 || l > alphabet {
                return Err(Error::LetterOutOfRange {
                    letter: l,
                    alphabet,
                });
            }
        }
        Ok(Word { alphabet, letters })
    }

    pub fn empty(alphabet: usize) -> Self {
        Word {
            alphabet,
            letters: Vec::new(),
        }
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn letters(&self) -> &[usize] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Flat index of the word within its level; words of length n biject
    /// with `0..m^n` and `index(w.i) == index(w) * m + (i - 1)`.
    pub fn index(&self) -> usize {
        word_index(self.alphabet, &self.letters)
    }

    /// Inverse of [`Word::index`] for a given length.
    pub fn from_index(alphabet: usize, len: usize, mut index: usize) -> Self {
        let mut letters = vec![0usize; len];
        for slot in letters.iter_mut().rev() {
            *slot = index % alphabet + 1;
            index /= alphabet;
        }
        Word { alphabet, letters }
    }

    /// Dotted display form: empty word renders as an empty string.
    pub fn label(&self) -> String {
        let mut out = String::new();
        for (k, l) in self.letters.iter().enumerate() {
            if k > 0 {
                out.push('.');
            }
            out.push_str(&format!("{l}"));
        }
        out
    }
}

/// Flat base-m index of `letters` within level `letters.len()`.
pub fn word_index(alphabet: usize, letters: &[usize]) -> usize {
    let mut idx = 0usize;
    for &l in letters {
        debug_assert!(l >= 1 && l <= alphabet);
        idx = idx * alphabet + (l - 1);
    }
    idx
}

/// Element of the truncated tensor algebra `T^L(R^m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedTensorSeries {
    alphabet: usize,
    levels: Vec<Vec<f64>>,
}

impl TruncatedTensorSeries {
    /// The unit element: level 0 equal to one, all higher levels zero.
    pub fn unit(alphabet: usize, level: usize) -> Self {
        let mut s = Self::zero(alphabet, level);
        s.levels[0][0] = 1.0;
        s
    }

    /// The zero element.
    pub fn zero(alphabet: usize, level: usize) -> Self {
        let levels = (0..=level)
            .map(|n| vec![0.0; alphabet.pow(n as u32)])
            .collect();
        TruncatedTensorSeries { alphabet, levels }
    }

    pub fn from_levels(alphabet: usize, levels: Vec<Vec<f64>>) -> Result<Self, Error> {
        if alphabet == 0 {
            return Err(Error::InvalidInput("alphabet size must be positive".into()));
        }
        if levels.is_empty() {
            return Err(Error::InvalidInput("need at least level 0".into()));
        }
        for (n, lv) in levels.iter().enumerate() {
            if lv.len() != alphabet.pow(n as u32) {
                return Err(Error::DimensionMismatch(format!(
                    "level {n} has {} entries, expected {}",
                    lv.len(),
                    alphabet.pow(n as u32)
                )));
            }
            if lv.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("level {n} entry")));
            }
        }
        Ok(TruncatedTensorSeries { alphabet, levels })
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    /// Truncation level L.
    pub fn level(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    pub fn level_slice(&self, n: usize) -> &[f64] {
        &self.levels[n]
    }

    pub fn level_slice_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.levels[n]
    }

    /// Coefficient of a word (zero if the word is longer than the truncation).
    pub fn coeff(&self, word: &Word) -> Result<f64, Error> {
        if word.alphabet() != self.alphabet {
            return Err(Error::AlphabetMismatch {
                left: word.alphabet(),
                right: self.alphabet,
            });
        }
        if word.len() > self.level() {
            return Err(Error::WordTooLong {
                word_len: word.len(),
                level: self.level(),
            });
        }
        Ok(self.levels[word.len()][word.index()])
    }

    pub fn scale_in_place(&mut self, c: f64) {
        for lv in &mut self.levels {
            for x in lv.iter_mut() {
                *x *= c;
            }
        }
    }

    pub fn add_in_place(&mut self, other: &TruncatedTensorSeries) {
        debug_assert_eq!(self.alphabet, other.alphabet);
        for (a, b) in self.levels.iter_mut().zip(other.levels.iter()) {
            for (x, y) in a.iter_mut().zip(b.iter()) {
                *x += y;
            }
        }
    }

    /// `self += c * other`, level by level up to the shorter truncation.
    pub fn axpy_in_place(&mut self, c: f64, other: &TruncatedTensorSeries) {
        debug_assert_eq!(self.alphabet, other.alphabet);
        for (a, b) in self.levels.iter_mut().zip(other.levels.iter()) {
            for (x, y) in a.iter_mut().zip(b.iter()) {
                *x += c * y;
            }
        }
    }

    /// Hilbert-Schmidt norm over all stored levels.
    pub fn hs_norm(&self) -> f64 {
        sqrt(
            self.levels
                .iter()
                .flat_map(|lv| lv.iter())
                .map(|x| x * x)
                .sum(),
        )
    }

    /// Euclidean norm of a single level.
    pub fn level_norm(&self, n: usize) -> f64 {
        sqrt(self.levels[n].iter().map(|x| x * x).sum())
    }

    /// Largest absolute coefficient difference over shared levels.
    pub fn max_abs_diff(&self, other: &TruncatedTensorSeries) -> f64 {
        let mut best = 0.0f64;
        for (a, b) in self.levels.iter().zip(other.levels.iter()) {
            for (x, y) in a.iter().zip(b.iter()) {
                let d = crate::math::fabs(x - y);
                if d > best {
                    best = d;
                }
            }
        }
        best
    }

    /// Truncate (or zero-extend) to level `level`.
    pub fn truncated(&self, level: usize) -> TruncatedTensorSeries {
        let mut out = TruncatedTensorSeries::zero(self.alphabet, level);
        for n in 0..=level.min(self.level()) {
            out.levels[n].copy_from_slice(&self.levels[n]);
        }
        out
    }

    /// Neumann-series inverse, valid when level 0 is nonzero.
    ///
    /// Writes `self = c (1 + a)` and expands `(1 + a)^{-1} = sum (-a)^k`,
    /// which terminates exactly in the truncated algebra.
    pub fn inverse(&self) -> Result<TruncatedTensorSeries, Error> {
        let c = self.levels[0][0];
        if c == 0.0 {
            return Err(Error::InvalidInput(
                "series with zero level 0 has no inverse".into(),
            ));
        }
        let level = self.level();
        let mut a = self.clone();
        a.scale_in_place(1.0 / c);
        a.levels[0][0] = 0.0;
        let mut acc = TruncatedTensorSeries::unit(self.alphabet, level);
        let mut power = TruncatedTensorSeries::unit(self.alphabet, level);
        for _ in 1..=level {
            power = tensor_mul(&power, &a, level)?;
            power.scale_in_place(-1.0);
            acc.add_in_place(&power);
        }
        acc.scale_in_place(1.0 / c);
        Ok(acc)
    }
}

/// Truncated tensor product: level n of the result is
/// `sum_{k=0}^{n} a^(k) (x) b^(n-k)` for `n <= level`.
pub fn tensor_mul(
    a: &TruncatedTensorSeries,
    b: &TruncatedTensorSeries,
    level: usize,
) -> Result<TruncatedTensorSeries, Error> {
    if a.alphabet != b.alphabet {
        return Err(Error::AlphabetMismatch {
            left: a.alphabet,
            right: b.alphabet,
        });
    }
    let m = a.alphabet;
    let mut out = TruncatedTensorSeries::zero(m, level);
    for n in 0..=level {
        let target_len = out.levels[n].len();
        for k in 0..=n {
            if k > a.level() || n - k > b.level() {
                continue;
            }
            let left = &a.levels[k];
            let right = &b.levels[n - k];
            let dst = &mut out.levels[n];
            debug_assert_eq!(left.len() * right.len(), target_len);
            let mut pos = 0;
            for &lv in left.iter() {
                if lv == 0.0 {
                    pos += right.len();
                    continue;
                }
                for &rv in right.iter() {
                    dst[pos] += lv * rv;
                    pos += 1;
                }
            }
        }
    }
    Ok(out)
}

/// Hilbert-Schmidt inner product over levels `0..=min(L_a, L_b)`.
pub fn inner_product(a: &TruncatedTensorSeries, b: &TruncatedTensorSeries) -> Result<f64, Error> {
    if a.alphabet != b.alphabet {
        return Err(Error::AlphabetMismatch {
            left: a.alphabet,
            right: b.alphabet,
        });
    }
    let top = a.level().min(b.level());
    let mut acc = 0.0;
    for n in 0..=top {
        for (x, y) in a.levels[n].iter().zip(b.levels[n].iter()) {
            acc += x * y;
        }
    }
    Ok(acc)
}

/// Tensor exponential of a level-1 vector, exact up to the truncation level.
///
/// Level n is `v^(x)n / n!`; level n-1 already carries `1/(n-1)!`, so each
/// step multiplies by `v / n`.
pub fn tensor_exp(increment: &[f64], level: usize) -> TruncatedTensorSeries {
    let m = increment.len();
    let mut out = TruncatedTensorSeries::zero(m, level);
    out.levels[0][0] = 1.0;
    for n in 1..=level {
        let (lower, upper) = out.levels.split_at_mut(n);
        let prev = &lower[n - 1];
        let dst = &mut upper[0];
        let inv_n = 1.0 / n as f64;
        let mut pos = 0;
        for &pv in prev.iter() {
            for &iv in increment.iter() {
                dst[pos] = pv * iv * inv_n;
                pos += 1;
            }
        }
    }
    out
}

/// Finitely supported linear functional on the tensor algebra.
#[derive(Debug, Clone, Default)]
pub struct LinearFunctional {
    alphabet: usize,
    terms: BTreeMap<Vec<usize>, f64>,
}

impl LinearFunctional {
    pub fn new(alphabet: usize) -> Self {
        LinearFunctional {
            alphabet,
            terms: BTreeMap::new(),
        }
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    /// Adds `coeff * word`; coefficients on the same word accumulate.
    pub fn add_term(&mut self, word: Word, coeff: f64) -> Result<(), Error> {
        if word.alphabet() != self.alphabet {
            return Err(Error::AlphabetMismatch {
                left: word.alphabet(),
                right: self.alphabet,
            });
        }
        let entry = self.terms.entry(word.letters().to_vec()).or_insert(0.0);
        *entry += coeff;
        if *entry == 0.0 {
            self.terms.remove(word.letters());
        }
        Ok(())
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[usize], f64)> {
        self.terms.iter().map(|(w, &c)| (w.as_slice(), c))
    }

    pub fn max_word_len(&self) -> usize {
        self.terms.keys().map(|w| w.len()).max().unwrap_or(0)
    }

    /// Dual pairing `<l, x> = sum_k l_k x^{w_k}`.
    pub fn apply(&self, x: &TruncatedTensorSeries) -> Result<f64, Error> {
        if self.alphabet != x.alphabet() && !self.terms.is_empty() {
            return Err(Error::AlphabetMismatch {
                left: self.alphabet,
                right: x.alphabet(),
            });
        }
        let mut acc = 0.0;
        for (letters, coeff) in &self.terms {
            if letters.len() > x.level() {
                return Err(Error::WordTooLong {
                    word_len: letters.len(),
                    level: x.level(),
                });
            }
            acc += coeff * x.levels()[letters.len()][word_index(self.alphabet, letters)];
        }
        Ok(acc)
    }
}
