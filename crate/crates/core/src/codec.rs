//! The `.cgs` container.
//!
//! Gaussians are stably sorted by the code of one group (rotation by default)
//! so that stream can be stored as `k` run lengths instead of `N` indices. The
//! other index streams are bit-packed at `ceil(log2 k)` bits, MSB first.
//! Position and opacity are stored as float32 or Absmax codes. The byte layout
//! is documented in `format.md` at the repository root.

use serde::Serialize;

use crate::bitq::{absmax_dequantize, absmax_quantize, BitQuantChannel, BitWidth, BitqError};
use crate::matrix::Matrix;
use crate::model::{GaussianCloud, ParamGroup};
use crate::vq::{CloudCodebooks, Codebook};

pub const MAGIC: [u8; 4] = *b"CGS1";
pub const VERSION: u16 = 1;
pub const HEADER_BYTES: usize = 38;

const FLAG_DROP_SH: u16 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CodecError {
    #[error("bad magic {0:?}, expected \"CGS1\"")]
    BadMagic([u8; 4]),
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated container: {section} needs {needed} bytes, {available} available")]
    Truncated {
        section: &'static str,
        needed: usize,
        available: usize,
    },
    #[error("run-length counts sum to {found}, header declares {expected} Gaussians")]
    CountMismatch { expected: usize, found: u64 },
    #[error("{group} index {index} at position {position} is out of range for k = {k}")]
    IndexOutOfRange {
        group: ParamGroup,
        position: usize,
        index: u64,
        k: usize,
    },
    #[error("invalid header: {0}")]
    InvalidHeader(String),
    #[error("{0} trailing bytes after container payload")]
    TrailingBytes(usize),
    #[error("{group} codebook has {found} assignments, cloud has {expected} Gaussians")]
    LengthMismatch {
        group: ParamGroup,
        expected: usize,
        found: usize,
    },
    #[error("{group} codebook has dimension {found}, expected {expected}")]
    DimensionMismatch {
        group: ParamGroup,
        expected: usize,
        found: usize,
    },
    #[error("{group} codebook size {k} does not fit a 32-bit index")]
    KTooLarge { group: ParamGroup, k: usize },
    #[error("missing {0} codebook")]
    MissingCodebook(ParamGroup),
    #[error("cannot run-length encode the dropped SH group")]
    RleOnDroppedGroup,
    #[error(transparent)]
    Residual(#[from] BitqError),
}

/// Storage of the two non-codebooked fields. `None` keeps float32.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ResidualPolicy {
    pub position: Option<BitWidth>,
    pub opacity: Option<BitWidth>,
}

impl ResidualPolicy {
    pub fn float32() -> Self {
        Self::default()
    }

    /// 16-bit position, 8-bit opacity.
    pub fn compgs_bitq() -> Self {
        Self {
            position: Some(BitWidth::B16),
            opacity: Some(BitWidth::B8),
        }
    }

    pub fn uniform(bits: Option<BitWidth>) -> Self {
        Self {
            position: bits,
            opacity: bits,
        }
    }
}

impl From<&crate::bitq::BitQuantPolicy> for ResidualPolicy {
    fn from(p: &crate::bitq::BitQuantPolicy) -> Self {
        Self {
            position: p.position,
            opacity: p.logit_opacity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodeOptions {
    pub residuals: ResidualPolicy,
    /// Omit the SH codebook and stream; decoding yields zero SH.
    pub drop_sh: bool,
    /// Group whose index stream is sorted and run-length encoded.
    pub rle_group: ParamGroup,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        Self {
            residuals: ResidualPolicy::float32(),
            drop_sh: false,
            rle_group: ParamGroup::Rotation,
        }
    }
}

/// Codebook shape `(k, d)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BookShape {
    pub k: usize,
    pub dim: usize,
}

/// Everything the fixed-size header records.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContainerHeader {
    pub count: usize,
    /// In [`ParamGroup::ALL`] order; the SH entry has `k = 0` when dropped.
    pub shapes: [BookShape; 4],
    pub options: EncodeOptions,
}

impl ContainerHeader {
    /// Header for `count` Gaussians with codebook sizes `ks` (dc, sh, scale, rotation).
    pub fn new(count: usize, ks: [usize; 4], options: EncodeOptions) -> Self {
        let mut shapes = [BookShape { k: 0, dim: 0 }; 4];
        for g in ParamGroup::ALL {
            let k = if g == ParamGroup::Sh && options.drop_sh {
                0
            } else {
                ks[g.index()]
            };
            shapes[g.index()] = BookShape { k, dim: g.dim() };
        }
        Self {
            count,
            shapes,
            options,
        }
    }

    fn present(&self, g: ParamGroup) -> bool {
        !(g == ParamGroup::Sh && self.options.drop_sh)
    }

    /// Groups stored as packed index streams, in container order.
    pub fn packed_groups(&self) -> impl Iterator<Item = ParamGroup> + '_ {
        ParamGroup::ALL
            .into_iter()
            .filter(move |&g| self.present(g) && g != self.options.rle_group)
    }

    fn to_bytes(self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_BYTES);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let mut flags = (self.options.rle_group.index() as u16) << 8;
        if self.options.drop_sh {
            flags |= FLAG_DROP_SH;
        }
        out.extend_from_slice(&flags.to_le_bytes());
        out.extend_from_slice(&(self.count as u32).to_le_bytes());
        for s in self.shapes {
            out.extend_from_slice(&(s.k as u32).to_le_bytes());
            out.extend_from_slice(&(s.dim as u16).to_le_bytes());
        }
        out.push(residual_code(self.options.residuals.position));
        out.push(residual_code(self.options.residuals.opacity));
        debug_assert_eq!(out.len(), HEADER_BYTES);
        out
    }

    fn parse(bytes: &[u8]) -> Result<Self, CodecError> {
        if bytes.len() < 4 {
            return Err(CodecError::Truncated {
                section: "magic",
                needed: 4,
                available: bytes.len(),
            });
        }
        let magic: [u8; 4] = bytes[..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(CodecError::BadMagic(magic));
        }
        let mut r = Reader::new(&bytes[4..]);
        let version = r.u16("header")?;
        if version != VERSION {
            return Err(CodecError::UnsupportedVersion(version));
        }
        if bytes.len() < HEADER_BYTES {
            return Err(CodecError::Truncated {
                section: "header",
                needed: HEADER_BYTES,
                available: bytes.len(),
            });
        }
        let flags = r.u16("header")?;
        let count = r.u32("header")? as usize;
        let mut shapes = [BookShape { k: 0, dim: 0 }; 4];
        for s in &mut shapes {
            s.k = r.u32("header")? as usize;
            s.dim = r.u16("header")? as usize;
        }
        let position = residual_width(r.u8("header")?)?;
        let opacity = residual_width(r.u8("header")?)?;

        if flags & !(FLAG_DROP_SH | 0x0300) != 0 {
            return Err(CodecError::InvalidHeader(format!(
                "unknown flags {flags:#06x}"
            )));
        }
        let drop_sh = flags & FLAG_DROP_SH != 0;
        let rle_group = ParamGroup::from_index(usize::from(flags >> 8))
            .ok_or_else(|| CodecError::InvalidHeader("bad run-length group".into()))?;
        if drop_sh && rle_group == ParamGroup::Sh {
            return Err(CodecError::RleOnDroppedGroup);
        }
        let header = Self {
            count,
            shapes,
            options: EncodeOptions {
                residuals: ResidualPolicy { position, opacity },
                drop_sh,
                rle_group,
            },
        };
        for g in ParamGroup::ALL {
            let s = shapes[g.index()];
            if s.dim != g.dim() {
                return Err(CodecError::DimensionMismatch {
                    group: g,
                    expected: g.dim(),
                    found: s.dim,
                });
            }
            if header.present(g) && s.k == 0 {
                return Err(CodecError::InvalidHeader(format!("{g} codebook is empty")));
            }
            if !header.present(g) && s.k != 0 {
                return Err(CodecError::InvalidHeader(
                    "dropped SH codebook has entries".into(),
                ));
            }
        }
        Ok(header)
    }
}

fn residual_code(bits: Option<BitWidth>) -> u8 {
    bits.map_or(32, |b| b.bits() as u8)
}

fn residual_width(code: u8) -> Result<Option<BitWidth>, CodecError> {
    match code {
        32 => Ok(None),
        b => BitWidth::from_bits(u32::from(b))
            .map(Some)
            .ok_or_else(|| CodecError::InvalidHeader(format!("bad residual width {b}"))),
    }
}

/// Bits per packed index for a codebook of size `k`: `ceil(log2(max(k, 2)))`.
pub fn index_bits(k: usize) -> u32 {
    usize::BITS - (k.max(2) - 1).leading_zeros()
}

/// Packs `indices` at [`index_bits`]`(k)` bits each, MSB first.
pub fn pack_indices(indices: &[u32], k: usize) -> Result<Vec<u8>, (usize, u32)> {
    let width = index_bits(k);
    let mut out = Vec::with_capacity((indices.len() * width as usize).div_ceil(8));
    let mut acc: u64 = 0;
    let mut filled = 0u32;
    for (i, &idx) in indices.iter().enumerate() {
        if idx as usize >= k {
            return Err((i, idx));
        }
        acc = (acc << width) | u64::from(idx);
        filled += width;
        while filled >= 8 {
            filled -= 8;
            out.push((acc >> filled) as u8);
        }
        acc &= (1u64 << filled) - 1;
    }
    if filled > 0 {
        out.push((acc << (8 - filled)) as u8);
    }
    Ok(out)
}

/// Inverse of [`pack_indices`]. Values are not range-checked here.
pub fn unpack_indices(bytes: &[u8], n: usize, k: usize) -> Vec<u64> {
    let width = index_bits(k);
    let mask = (1u64 << width) - 1;
    let mut out = Vec::with_capacity(n);
    let mut acc: u64 = 0;
    let mut filled = 0u32;
    let mut bytes = bytes.iter();
    while out.len() < n {
        while filled < width {
            acc = (acc << 8) | u64::from(*bytes.next().expect("stream long enough"));
            filled += 8;
        }
        filled -= width;
        out.push((acc >> filled) & mask);
        acc &= (1u64 << filled) - 1;
    }
    out
}

/// Run lengths of each code in `0..k`.
pub fn rle_counts(assignments: &[u32], k: usize) -> Vec<u32> {
    let mut counts = vec![0u32; k];
    for &a in assignments {
        counts[a as usize] += 1;
    }
    counts
}

/// The sorted index stream described by `counts`.
pub fn expand_counts(counts: &[u32]) -> Vec<u32> {
    counts
        .iter()
        .enumerate()
        .flat_map(|(code, &c)| std::iter::repeat_n(code as u32, c as usize))
        .collect()
}

/// Stable permutation that orders rows by ascending code.
pub fn sort_order(assignments: &[u32], k: usize) -> Vec<usize> {
    let mut start = vec![0usize; k + 1];
    for &a in assignments {
        start[a as usize + 1] += 1;
    }
    for j in 0..k {
        start[j + 1] += start[j];
    }
    let mut order = vec![0usize; assignments.len()];
    for (i, &a) in assignments.iter().enumerate() {
        order[start[a as usize]] = i;
        start[a as usize] += 1;
    }
    order
}

fn residual_column_bytes(bits: Option<BitWidth>, n: usize) -> usize {
    match bits {
        None => 4 * n,
        Some(b) => 4 + b.payload_bytes(n),
    }
}

fn write_residual_column(
    out: &mut Vec<u8>,
    column: &[f32],
    bits: Option<BitWidth>,
) -> Result<(), CodecError> {
    match bits {
        None => {
            for v in column {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Some(bw) => {
            let q = absmax_quantize(column, bw)?;
            out.extend_from_slice(&q.scale.to_le_bytes());
            match bw {
                BitWidth::B16 => {
                    for v in &q.values {
                        out.extend_from_slice(&v.to_le_bytes());
                    }
                }
                BitWidth::B8 => out.extend(q.values.iter().map(|&v| v as i8 as u8)),
                BitWidth::B4 => {
                    for pair in q.values.chunks(2) {
                        let hi = (pair[0] as u8) & 0x0F;
                        let lo = pair.get(1).map_or(0, |&v| (v as u8) & 0x0F);
                        out.push((hi << 4) | lo);
                    }
                }
            }
        }
    }
    Ok(())
}

fn read_residual_column(
    r: &mut Reader<'_>,
    n: usize,
    bits: Option<BitWidth>,
) -> Result<Vec<f32>, CodecError> {
    let bytes = r.take("residuals", residual_column_bytes(bits, n))?;
    Ok(match bits {
        None => bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect(),
        Some(bw) => {
            let scale = f32::from_le_bytes(bytes[..4].try_into().unwrap());
            let payload = &bytes[4..];
            let values: Vec<i16> = match bw {
                BitWidth::B16 => payload
                    .chunks_exact(2)
                    .map(|b| i16::from_le_bytes([b[0], b[1]]))
                    .collect(),
                BitWidth::B8 => payload.iter().map(|&b| i16::from(b as i8)).collect(),
                BitWidth::B4 => {
                    let nibble = |x: u8| i16::from(((x << 4) as i8) >> 4);
                    payload
                        .iter()
                        .flat_map(|&b| [nibble(b >> 4), nibble(b & 0x0F)])
                        .take(n)
                        .collect()
                }
            };
            let channel = BitQuantChannel {
                bits: bw,
                scale,
                values,
            };
            if !scale.is_finite() || scale < 0.0 {
                return Err(CodecError::InvalidHeader(format!(
                    "bad residual scale {scale}"
                )));
            }
            absmax_dequantize(&channel)
        }
    })
}

/// Writes the container for `cloud` quantized by `books`.
///
/// Only position and opacity are read from `cloud`; group values come from the
/// codebooks. The output stores Gaussians in ascending order of the
/// run-length group's code.
pub fn encode(
    cloud: &GaussianCloud,
    books: &CloudCodebooks,
    options: &EncodeOptions,
) -> Result<Vec<u8>, CodecError> {
    let n = cloud.count;
    if options.drop_sh && options.rle_group == ParamGroup::Sh {
        return Err(CodecError::RleOnDroppedGroup);
    }
    if u32::try_from(n).is_err() {
        return Err(CodecError::InvalidHeader(format!(
            "{n} Gaussians exceed the u32 count field"
        )));
    }
    let mut ks = [0usize; 4];
    for g in ParamGroup::ALL {
        if g == ParamGroup::Sh && options.drop_sh {
            continue;
        }
        let book = books.get(g).ok_or(CodecError::MissingCodebook(g))?;
        if book.dim() != g.dim() {
            return Err(CodecError::DimensionMismatch {
                group: g,
                expected: g.dim(),
                found: book.dim(),
            });
        }
        if book.assignments.len() != n {
            return Err(CodecError::LengthMismatch {
                group: g,
                expected: n,
                found: book.assignments.len(),
            });
        }
        if u32::try_from(book.k()).is_err() {
            return Err(CodecError::KTooLarge {
                group: g,
                k: book.k(),
            });
        }
        if book.k() == 0 {
            return Err(CodecError::InvalidHeader(format!("{g} codebook is empty")));
        }
        if let Some(pos) = book
            .assignments
            .iter()
            .position(|&a| a as usize >= book.k())
        {
            return Err(CodecError::IndexOutOfRange {
                group: g,
                position: pos,
                index: u64::from(book.assignments[pos]),
                k: book.k(),
            });
        }
        ks[g.index()] = book.k();
    }
    let header = ContainerHeader::new(n, ks, *options);
    let expected_len = analytic_size(&header, IndexAccounting::Packed).total;
    let mut out = header.to_bytes();
    out.reserve_exact(expected_len - out.len());

    for g in ParamGroup::ALL {
        if let (true, Some(book)) = (header.present(g), books.get(g)) {
            for v in book.centroids.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }

    let rle_book = books.get(options.rle_group).expect("checked above");
    let order = sort_order(&rle_book.assignments, rle_book.k());
    for c in rle_counts(&rle_book.assignments, rle_book.k()) {
        out.extend_from_slice(&c.to_le_bytes());
    }

    let mut sorted = vec![0u32; n];
    for g in header.packed_groups() {
        let book = books.get(g).expect("checked above");
        for (dst, &i) in sorted.iter_mut().zip(&order) {
            *dst = book.assignments[i];
        }
        out.extend(pack_indices(&sorted, book.k()).expect("indices checked above"));
    }

    let mut column = vec![0f32; n];
    for c in 0..3 {
        for (dst, &i) in column.iter_mut().zip(&order) {
            *dst = cloud.position[i * 3 + c];
        }
        write_residual_column(&mut out, &column, options.residuals.position)?;
    }
    for (dst, &i) in column.iter_mut().zip(&order) {
        *dst = cloud.logit_opacity[i];
    }
    write_residual_column(&mut out, &column, options.residuals.opacity)?;

    debug_assert_eq!(out.len(), expected_len);
    Ok(out)
}

/// A decoded container, in stored (sorted) order.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub header: ContainerHeader,
    pub cloud: GaussianCloud,
    pub codebooks: CloudCodebooks,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, section: &'static str, n: usize) -> Result<&'a [u8], CodecError> {
        let available = self.bytes.len() - self.pos;
        if n > available {
            return Err(CodecError::Truncated {
                section,
                needed: n,
                available,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, section: &'static str) -> Result<u8, CodecError> {
        Ok(self.take(section, 1)?[0])
    }

    fn u16(&mut self, section: &'static str) -> Result<u16, CodecError> {
        Ok(u16::from_le_bytes(
            self.take(section, 2)?.try_into().unwrap(),
        ))
    }

    fn u32(&mut self, section: &'static str) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(
            self.take(section, 4)?.try_into().unwrap(),
        ))
    }
}

/// Parses a container back into a cloud plus codebooks.
pub fn decode(bytes: &[u8]) -> Result<Decoded, CodecError> {
    let header = ContainerHeader::parse(bytes)?;
    let n = header.count;
    let mut r = Reader::new(bytes);
    r.take("header", HEADER_BYTES)?;

    let mut centroids: [Option<Matrix<f32>>; 4] = Default::default();
    for g in ParamGroup::ALL {
        if !header.present(g) {
            continue;
        }
        let s = header.shapes[g.index()];
        let len =
            s.k.checked_mul(s.dim * 4)
                .ok_or_else(|| CodecError::InvalidHeader("codebook too large".into()))?;
        let raw = r.take("codebooks", len)?;
        let data: Vec<f32> = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(CodecError::InvalidHeader(format!(
                "{g} codebook has non-finite entries"
            )));
        }
        centroids[g.index()] = Some(Matrix::from_vec(s.k, s.dim, data));
    }

    let rle = header.options.rle_group;
    let k_rle = header.shapes[rle.index()].k;
    let raw = r.take("run-length counts", k_rle * 4)?;
    let counts: Vec<u32> = raw
        .chunks_exact(4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    let total: u64 = counts.iter().map(|&c| u64::from(c)).sum();
    if total != n as u64 {
        return Err(CodecError::CountMismatch {
            expected: n,
            found: total,
        });
    }

    let mut assignments: [Vec<u32>; 4] = Default::default();
    assignments[rle.index()] = expand_counts(&counts);
    for g in header.packed_groups() {
        let k = header.shapes[g.index()].k;
        let len = (n * index_bits(k) as usize).div_ceil(8);
        let raw = r.take("index streams", len)?;
        let idx = unpack_indices(raw, n, k);
        if let Some(position) = idx.iter().position(|&i| i as usize >= k) {
            return Err(CodecError::IndexOutOfRange {
                group: g,
                position,
                index: idx[position],
                k,
            });
        }
        assignments[g.index()] = idx.into_iter().map(|i| i as u32).collect();
    }

    let mut cloud = GaussianCloud::zeros(n);
    for c in 0..3 {
        let col = read_residual_column(&mut r, n, header.options.residuals.position)?;
        for (i, v) in col.into_iter().enumerate() {
            cloud.position[i * 3 + c] = v;
        }
    }
    cloud.logit_opacity = read_residual_column(&mut r, n, header.options.residuals.opacity)?;
    if r.pos != bytes.len() {
        return Err(CodecError::TrailingBytes(bytes.len() - r.pos));
    }

    let mut take_book = |g: ParamGroup| {
        centroids[g.index()].take().map(|c| Codebook {
            centroids: c,
            assignments: std::mem::take(&mut assignments[g.index()]),
        })
    };
    let codebooks = CloudCodebooks {
        dc: take_book(ParamGroup::ColorDc).expect("always present"),
        sh: take_book(ParamGroup::Sh),
        scale: take_book(ParamGroup::Scale).expect("always present"),
        rotation: take_book(ParamGroup::Rotation).expect("always present"),
    };
    for g in ParamGroup::ALL {
        let block = match codebooks.get(g) {
            Some(book) => book.reconstruct().into_vec(),
            None => vec![0.0; n * g.dim()],
        };
        *cloud.field_mut(g.field()) = block;
    }
    if let Err(errs) = cloud.validate() {
        return Err(CodecError::InvalidHeader(errs[0].to_string()));
    }
    Ok(Decoded {
        header,
        cloud,
        codebooks,
    })
}

/// How index streams are counted in a size report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexAccounting {
    /// The bytes actually written: `ceil(log2 k)` bits per index.
    Packed,
    /// Every non-run-length index counted as a 32-bit word.
    Unpacked32,
}

/// Byte counts per container section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SizeReport {
    pub accounting: IndexAccounting,
    pub count: usize,
    pub header: usize,
    pub codebooks: usize,
    pub rle_counts: usize,
    pub packed_indices: usize,
    pub residuals: usize,
    pub total: usize,
    /// `rle_counts + packed_indices`.
    pub index_bytes: usize,
    /// Residual bytes over all payload bytes (header excluded).
    pub non_quantized_fraction: f64,
    pub quantized_fraction: f64,
    /// Within quantized storage (indices + codebooks).
    pub index_share: f64,
    pub codebook_share: f64,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Section sizes implied by `header` without materializing any data.
pub fn analytic_size(header: &ContainerHeader, accounting: IndexAccounting) -> SizeReport {
    let n = header.count;
    let codebooks = ParamGroup::ALL
        .iter()
        .filter(|&&g| header.present(g))
        .map(|g| {
            let s = header.shapes[g.index()];
            s.k * s.dim * 4
        })
        .sum();
    let rle_counts = header.shapes[header.options.rle_group.index()].k * 4;
    let packed_indices = header
        .packed_groups()
        .map(|g| match accounting {
            IndexAccounting::Packed => {
                (n * index_bits(header.shapes[g.index()].k) as usize).div_ceil(8)
            }
            IndexAccounting::Unpacked32 => 4 * n,
        })
        .sum();
    let r = header.options.residuals;
    let residuals = 3 * residual_column_bytes(r.position, n) + residual_column_bytes(r.opacity, n);
    let total = HEADER_BYTES + codebooks + rle_counts + packed_indices + residuals;
    let index_bytes = rle_counts + packed_indices;
    let quantized = index_bytes + codebooks;
    SizeReport {
        accounting,
        count: n,
        header: HEADER_BYTES,
        codebooks,
        rle_counts,
        packed_indices,
        residuals,
        total,
        index_bytes,
        non_quantized_fraction: ratio(residuals, residuals + quantized),
        quantized_fraction: ratio(quantized, residuals + quantized),
        index_share: ratio(index_bytes, quantized),
        codebook_share: ratio(codebooks, quantized),
    }
}

/// Size report of an encoded container; the packed total equals `bytes.len()`.
pub fn container_size_report(
    bytes: &[u8],
    accounting: IndexAccounting,
) -> Result<SizeReport, CodecError> {
    let header = ContainerHeader::parse(bytes)?;
    let packed = analytic_size(&header, IndexAccounting::Packed);
    if packed.total != bytes.len() {
        let section = "container";
        return Err(if bytes.len() < packed.total {
            CodecError::Truncated {
                section,
                needed: packed.total,
                available: bytes.len(),
            }
        } else {
            CodecError::TrailingBytes(bytes.len() - packed.total)
        });
    }
    Ok(analytic_size(&header, accounting))
}

/// Header of an encoded container.
pub fn read_header(bytes: &[u8]) -> Result<ContainerHeader, CodecError> {
    ContainerHeader::parse(bytes)
}
