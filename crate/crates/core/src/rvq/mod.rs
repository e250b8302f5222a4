//! Random vector quantization (RVQ) feedback and distributed CSIT estimates.
//!
//! Receiver `i` quantizes its channel direction `h~_i` against an isotropic
//! random codebook, once per transmitter. Transmitter `j` gets `B_j` bits per
//! receiver, `B_j = round(alpha_j * log2 P)`, and assembles its own estimate
//! matrix from the two codewords it receives.

mod index;

use std::collections::HashSet;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{inner_product_herm, sample_cn_vec2, CMat2, CVec2, ChannelRealization};
use crate::error::{Error, Result};
use crate::rng::RngStream;

use index::SphereIndex;

/// Largest supported feedback size (16M codewords).
pub const MAX_CODEBOOK_BITS: u32 = 24;

/// Codebooks at least this large get a spatial index.
const INDEX_MIN_WORDS: usize = 2048;

const UNIT_NORM_TOL: f64 = 1e-9;

#[inline]
fn gain(h: &CVec2, w: &CVec2) -> f64 {
    inner_product_herm(h, w).norm_sqr()
}

fn exhaustive_best(words: &[CVec2], h: &CVec2) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, w) in words.iter().enumerate() {
        let g = gain(h, w);
        if g > best.1 {
            best = (i, g);
        }
    }
    best
}

/// `2^bits` unit-norm codewords.
#[derive(Debug, Clone)]
pub struct Codebook {
    bits: u32,
    words: Vec<CVec2>,
    index: Option<SphereIndex>,
}

impl Codebook {
    /// Wraps explicit codewords. The count must be a power of two and every
    /// word must have unit norm.
    pub fn from_words(words: Vec<CVec2>) -> Result<Self> {
        if words.is_empty() || !words.len().is_power_of_two() {
            return Err(Error::config(format!("codebook size {} is not a power of two", words.len())));
        }
        if let Some(w) = words.iter().find(|w| (w.norm() - 1.0).abs() > 1e-12 || !w.is_finite()) {
            return Err(Error::config(format!("codeword {w:?} is not unit norm")));
        }
        let bits = words.len().trailing_zeros();
        let index = (words.len() >= INDEX_MIN_WORDS).then(|| SphereIndex::build(&words));
        Ok(Codebook { bits, words, index })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn words(&self) -> &[CVec2] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Codeword maximizing `|h^H w|^2` as `(index, gain)`; ties go to the
    /// lowest index.
    pub fn best_match(&self, h: &CVec2) -> (usize, f64) {
        match &self.index {
            Some(idx) => idx.best_match(&self.words, h),
            None => exhaustive_best(&self.words, h),
        }
    }

    /// Linear scan over every codeword. Reference path for [`best_match`](Self::best_match).
    pub fn best_match_exhaustive(&self, h: &CVec2) -> (usize, f64) {
        exhaustive_best(&self.words, h)
    }

    fn shares_word_with(&self, other: &Codebook) -> bool {
        let key = |w: &CVec2| [w.0[0].re.to_bits(), w.0[0].im.to_bits(), w.0[1].re.to_bits(), w.0[1].im.to_bits()];
        let seen: HashSet<[u64; 4]> = self.words.iter().map(key).collect();
        other.words.iter().any(|w| seen.contains(&key(w)))
    }
}

/// Draws `2^bits` i.i.d. isotropic unit vectors (normalized `CN(0, I)` draws).
pub fn generate_codebook(bits: u32, stream: &RngStream) -> Result<Codebook> {
    if bits > MAX_CODEBOOK_BITS {
        return Err(Error::config(format!("{bits} feedback bits exceeds the cap of {MAX_CODEBOOK_BITS}")));
    }
    let mut rng = stream.generator();
    let words = (0..1usize << bits)
        .map(|_| loop {
            let v = sample_cn_vec2(&mut rng);
            let n = v.norm();
            if n > 0.0 {
                break v.scale(1.0 / n);
            }
        })
        .collect();
    Codebook::from_words(words)
}

/// Outcome of quantizing one unit direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizationResult {
    /// Position of the chosen word in its codebook.
    pub index: usize,
    pub h_hat: CVec2,
    /// Squared-sine error `Z = 1 - |h~^H h^|^2`.
    pub error_sq: f64,
    /// `sqrt(Z)`.
    pub z: f64,
    /// `sqrt(1 - Z)`.
    pub z_breve: f64,
}

/// Chordal-distance quantization of `h_tilde` against `cb`.
pub fn quantize_direction(h_tilde: &CVec2, cb: &Codebook) -> Result<QuantizationResult> {
    let n = h_tilde.norm();
    if (n - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::Domain { value: n, domain: "unit-norm direction (|h| = 1 +- 1e-9)" });
    }
    let (index, g) = cb.best_match(h_tilde);
    let error_sq = (1.0 - g).clamp(0.0, 1.0);
    Ok(QuantizationResult {
        index,
        h_hat: cb.words[index],
        error_sq,
        z: error_sq.sqrt(),
        z_breve: (1.0 - error_sq).sqrt(),
    })
}

/// Orthogonal split `h~ = z_breve * aligned + z * delta` of a direction
/// around its codeword.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    /// The codeword rotated by a unit phase so that `aligned^H h~ >= 0`.
    pub aligned: CVec2,
    /// Unit residual direction orthogonal to the codeword.
    pub delta: CVec2,
    /// Set when `Z = 0` and `delta` carries no information.
    pub degenerate: bool,
}

impl Decomposition {
    pub fn reconstruct(&self, q: &QuantizationResult) -> CVec2 {
        self.aligned.scale(q.z_breve) + self.delta.scale(q.z)
    }
}

fn unit_phase(z: Complex64) -> Complex64 {
    let n = z.norm();
    if n == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        z / n
    }
}

/// Residual direction of `h_tilde` with respect to its codeword.
///
/// The codeword's global phase is arbitrary, so the identity holds for the
/// phase-aligned codeword; the remaining phase is carried by `delta`.
pub fn decompose_estimate(h_tilde: &CVec2, q: &QuantizationResult) -> Decomposition {
    let w = q.h_hat;
    let aligned = w.scale_complex(unit_phase(inner_product_herm(&w, h_tilde)));
    // Unit vector spanning the orthogonal complement of w.
    let perp = CVec2::new(-w.e2().conj(), w.e1().conj());
    let proj = inner_product_herm(&perp, h_tilde);
    if q.error_sq == 0.0 || proj.norm() == 0.0 {
        let lead = if perp.e1().norm() > 0.0 { perp.e1() } else { perp.e2() };
        let delta = perp.scale_complex(unit_phase(lead).conj());
        return Decomposition { aligned, delta, degenerate: true };
    }
    Decomposition { aligned, delta: perp.scale_complex(unit_phase(proj)), degenerate: false }
}

/// CSIT scaling exponents `1 >= alpha1 >= alpha2 > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsitScalingVector {
    pub alpha1: f64,
    pub alpha2: f64,
}

impl CsitScalingVector {
    pub fn new(alpha1: f64, alpha2: f64) -> Result<Self> {
        if !(alpha1 <= 1.0 && alpha1 >= alpha2 && alpha2 > 0.0) {
            return Err(Error::config(format!(
                "CSIT exponents must satisfy 1 >= alpha1 >= alpha2 > 0 (got alpha1 = {alpha1}, alpha2 = {alpha2})"
            )));
        }
        Ok(CsitScalingVector { alpha1, alpha2 })
    }

    /// Exponent of transmitter `tx` (1 or 2).
    pub fn alpha(&self, tx: usize) -> f64 {
        if tx == 1 {
            self.alpha1
        } else {
            self.alpha2
        }
    }
}

/// `round(alpha * log2 P)`, the per-receiver feedback size at power `P`.
pub fn feedback_bits(alpha: f64, p: f64) -> Result<u32> {
    if !(p > 1.0) {
        return Err(Error::Domain { value: p, domain: "power P > 1" });
    }
    let b = (alpha * p.log2()).round();
    if b < 0.0 || b > MAX_CODEBOOK_BITS as f64 {
        return Err(Error::config(format!("{b} feedback bits outside [0, {MAX_CODEBOOK_BITS}]")));
    }
    Ok(b as u32)
}

/// One transmitter's view of the multi-user channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsitEstimate {
    /// 1 or 2.
    pub tx: usize,
    pub alpha: f64,
    pub bits: u32,
    /// Rows are `h^_i^H` (conjugated codewords).
    pub h_hat: CMat2,
    pub quantizations: [QuantizationResult; 2],
}

impl CsitEstimate {
    pub fn z_per_rx(&self) -> [f64; 2] {
        [self.quantizations[0].error_sq, self.quantizations[1].error_sq]
    }
}

/// The four codebooks of one Monte Carlo codebook draw, indexed
/// `[tx - 1][rx - 1]`.
#[derive(Debug, Clone)]
pub struct CodebookSet {
    alphas: CsitScalingVector,
    books: [[Arc<Codebook>; 2]; 2],
}

impl CodebookSet {
    /// Independent codebooks for every (receiver, transmitter) pair.
    pub fn draw(alphas: CsitScalingVector, p: f64, stream: &RngStream) -> Result<Self> {
        let mut books = Vec::with_capacity(4);
        for tx in 1..=2usize {
            let bits = feedback_bits(alphas.alpha(tx), p)?;
            for rx in 1..=2usize {
                books.push(Arc::new(generate_codebook(bits, &stream.derive((tx * 2 + rx) as u64))?));
            }
        }
        let [a, b, c, d]: [Arc<Codebook>; 4] = books.try_into().expect("four codebooks");
        let set = CodebookSet { alphas, books: [[a, b], [c, d]] };
        if cfg!(debug_assertions) {
            for tx in 0..2 {
                assert!(
                    !set.books[tx][0].shares_word_with(&set.books[tx][1]),
                    "codebooks of the two receivers share a codeword"
                );
            }
        }
        Ok(set)
    }

    /// Explicit codebooks, `books[tx - 1][rx - 1]`. The same `Arc` may be
    /// passed for both transmitters to force identical quantizers.
    pub fn from_books(alphas: CsitScalingVector, books: [[Arc<Codebook>; 2]; 2]) -> Self {
        CodebookSet { alphas, books }
    }

    pub fn codebook(&self, tx: usize, rx: usize) -> &Codebook {
        &self.books[tx - 1][rx - 1]
    }

    fn estimate_for(&self, ch: &ChannelRealization, tx: usize) -> Result<CsitEstimate> {
        let q1 = quantize_direction(&ch.directions[0], self.codebook(tx, 1))?;
        let q2 = quantize_direction(&ch.directions[1], self.codebook(tx, 2))?;
        Ok(CsitEstimate {
            tx,
            alpha: self.alphas.alpha(tx),
            bits: self.codebook(tx, 1).bits(),
            h_hat: CMat2::from_rows(q1.h_hat.conj(), q2.h_hat.conj()),
            quantizations: [q1, q2],
        })
    }

    /// Quantizes both receivers' directions for both transmitters.
    pub fn estimates(&self, ch: &ChannelRealization) -> Result<(CsitEstimate, CsitEstimate)> {
        Ok((self.estimate_for(ch, 1)?, self.estimate_for(ch, 2)?))
    }
}

/// Draws fresh codebooks from `stream` and returns both transmitters'
/// estimates of `ch`.
pub fn build_csit(
    ch: &ChannelRealization,
    alphas: CsitScalingVector,
    p: f64,
    stream: &RngStream,
) -> Result<(CsitEstimate, CsitEstimate)> {
    if !(p > 1.0) {
        return Err(Error::Domain { value: p, domain: "power P > 1" });
    }
    CodebookSet::draw(alphas, p, stream)?.estimates(ch)
}
