//! The "PFIX" binary index format, version 1.
//!
//! Everything is little-endian; all reals are IEEE-754 binary64 and all
//! counts unsigned 64-bit. The exact fallback data (keys and measures, or
//! raw points) is embedded so a loaded index refines relative-error queries
//! without the original CSV.
//!
//! ```text
//! header (48 bytes)
//!   0..4    magic "PFIX"
//!   4..8    format version (u32) = 1
//!   8       aggregate kind (u8): 0 sum, 1 count, 2 min, 3 max
//!   9       dimensionality (u8): 1 or 2
//!   10..12  reserved (zero)
//!   12..16  degree (u32)
//!   16..24  delta (f64)
//!   24..32  record count n (u64)
//!   32..40  body length in bytes (u64)
//!   40..44  CRC-32 of the body (u32)
//!   44..48  reserved (zero)
//! body, 1-D
//!   keys (n x f64), measures (n x f64), segment count (u64),
//!   per segment: first_idx u64, last_idx u64, lo_key f64, hi_key f64,
//!                coeff count u64, coeffs, key scale f64, key offset f64,
//!                certified error f64
//! body, 2-D
//!   points (n x (u, v, w) f64), then the quad tree in pre-order:
//!   tag u8 (0 internal, 1 leaf), region (4 x f64);
//!   internal: the four children follow recursively;
//!   leaf: coeff count u64, coeffs, u scale/offset f64, v scale/offset f64,
//!         certified error f64
//! ```

use polyfit_core::poly::{KeyMap, PolyCoeffs, SurfaceCoeffs};
use polyfit_core::{
    AggregateKind, Point2D, PolyIndex1D, QuadIndex2D, QuadNode, Region, Segment,
};
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"PFIX";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 48;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic: not a PFIX index file")]
    BadMagic,
    #[error("unsupported format version {0}")]
    VersionUnsupported(u32),
    #[error("body checksum mismatch: file is corrupt")]
    ChecksumMismatch,
    #[error("file truncated")]
    Truncated,
    #[error("malformed index payload: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexHeader {
    pub agg: AggregateKind,
    pub dim: u8,
    pub deg: u32,
    pub delta: f64,
    pub n: u64,
    pub body_len: u64,
    pub checksum: u32,
}

#[derive(Debug, Clone)]
pub enum LoadedIndex {
    One(PolyIndex1D),
    Two(QuadIndex2D),
}

fn agg_to_byte(agg: AggregateKind) -> u8 {
    match agg {
        AggregateKind::Sum => 0,
        AggregateKind::Count => 1,
        AggregateKind::Min => 2,
        AggregateKind::Max => 3,
    }
}

fn agg_from_byte(b: u8) -> Result<AggregateKind, FormatError> {
    match b {
        0 => Ok(AggregateKind::Sum),
        1 => Ok(AggregateKind::Count),
        2 => Ok(AggregateKind::Min),
        3 => Ok(AggregateKind::Max),
        other => Err(FormatError::Malformed(format!(
            "unknown aggregate byte {other}"
        ))),
    }
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Writer {
        Writer { buf: Vec::new() }
    }
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        if self.pos + n > self.buf.len() {
            return Err(FormatError::Truncated);
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }
    fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, FormatError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn usize_checked(&mut self, limit: usize, what: &str) -> Result<usize, FormatError> {
        let v = self.u64()?;
        if v > limit as u64 {
            return Err(FormatError::Malformed(format!("{what} count {v} too large")));
        }
        Ok(v as usize)
    }
}

fn write_body_1d(idx: &PolyIndex1D) -> Vec<u8> {
    let mut w = Writer::new();
    for &k in idx.keys() {
        w.f64(k);
    }
    for &m in idx.measures() {
        w.f64(m);
    }
    w.u64(idx.segments().len() as u64);
    for s in idx.segments() {
        w.u64(s.first_idx as u64);
        w.u64(s.last_idx as u64);
        w.f64(s.lo_key);
        w.f64(s.hi_key);
        w.u64(s.poly.coeffs.len() as u64);
        for &c in &s.poly.coeffs {
            w.f64(c);
        }
        w.f64(s.poly.key_map.scale);
        w.f64(s.poly.key_map.offset);
        w.f64(s.certified_error);
    }
    w.buf
}

fn write_node(w: &mut Writer, node: &QuadNode) {
    let region = node.region();
    match node {
        QuadNode::Internal { children, .. } => {
            w.u8(0);
            write_region(w, &region);
            for c in children.iter() {
                write_node(w, c);
            }
        }
        QuadNode::Leaf {
            surface,
            certified_error,
            ..
        } => {
            w.u8(1);
            write_region(w, &region);
            w.u64(surface.coeffs.len() as u64);
            for &c in &surface.coeffs {
                w.f64(c);
            }
            w.f64(surface.u_map.scale);
            w.f64(surface.u_map.offset);
            w.f64(surface.v_map.scale);
            w.f64(surface.v_map.offset);
            w.f64(*certified_error);
        }
    }
}

fn write_region(w: &mut Writer, r: &Region) {
    w.f64(r.u_lo);
    w.f64(r.u_hi);
    w.f64(r.v_lo);
    w.f64(r.v_hi);
}

fn write_body_2d(idx: &QuadIndex2D) -> Vec<u8> {
    let mut w = Writer::new();
    for p in idx.points() {
        w.f64(p.u);
        w.f64(p.v);
        w.f64(p.w);
    }
    write_node(&mut w, idx.root());
    w.buf
}

fn assemble(agg: AggregateKind, dim: u8, deg: u32, delta: f64, n: u64, body: Vec<u8>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + body.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(agg_to_byte(agg));
    out.push(dim);
    out.extend_from_slice(&[0u8; 2]);
    out.extend_from_slice(&deg.to_le_bytes());
    out.extend_from_slice(&delta.to_le_bytes());
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&(body.len() as u64).to_le_bytes());
    out.extend_from_slice(&crc32fast::hash(&body).to_le_bytes());
    out.extend_from_slice(&[0u8; 4]);
    out.extend_from_slice(&body);
    out
}

pub fn serialize_1d(idx: &PolyIndex1D) -> Vec<u8> {
    assemble(
        idx.agg(),
        1,
        idx.deg() as u32,
        idx.delta(),
        idx.len() as u64,
        write_body_1d(idx),
    )
}

pub fn serialize_2d(idx: &QuadIndex2D) -> Vec<u8> {
    assemble(
        AggregateKind::Count,
        2,
        idx.deg() as u32,
        idx.delta(),
        idx.len() as u64,
        write_body_2d(idx),
    )
}

/// Parse and validate the header, including the body checksum.
pub fn read_header(bytes: &[u8]) -> Result<IndexHeader, FormatError> {
    if bytes.len() < 4 || bytes[0..4] != MAGIC {
        return Err(FormatError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::Truncated);
    }
    let mut r = Reader { buf: bytes, pos: 4 };
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(FormatError::VersionUnsupported(version));
    }
    let agg = agg_from_byte(r.u8()?)?;
    let dim = r.u8()?;
    r.take(2)?;
    let deg = r.u32()?;
    let delta = r.f64()?;
    let n = r.u64()?;
    let body_len = r.u64()?;
    let checksum = r.u32()?;
    r.take(4)?;
    if bytes.len() != HEADER_LEN + body_len as usize {
        return Err(FormatError::Truncated);
    }
    if crc32fast::hash(&bytes[HEADER_LEN..]) != checksum {
        return Err(FormatError::ChecksumMismatch);
    }
    Ok(IndexHeader {
        agg,
        dim,
        deg,
        delta,
        n,
        body_len,
        checksum,
    })
}

fn read_node(r: &mut Reader, depth: usize) -> Result<QuadNode, FormatError> {
    if depth > 64 {
        return Err(FormatError::Malformed("quad tree too deep".into()));
    }
    let tag = r.u8()?;
    let region = Region {
        u_lo: r.f64()?,
        u_hi: r.f64()?,
        v_lo: r.f64()?,
        v_hi: r.f64()?,
    };
    match tag {
        0 => {
            let mut children = Vec::with_capacity(4);
            for _ in 0..4 {
                children.push(read_node(r, depth + 1)?);
            }
            let children: Box<[QuadNode; 4]> = match children.try_into() {
                Ok(array) => Box::new(array),
                Err(_) => unreachable!("exactly four children"),
            };
            Ok(QuadNode::Internal { region, children })
        }
        1 => {
            let ncoef = r.usize_checked(1 << 16, "surface coefficient")?;
            let deg = (ncoef as f64).sqrt() as usize;
            if deg * deg != ncoef || deg == 0 {
                return Err(FormatError::Malformed(format!(
                    "surface coefficient count {ncoef} is not a square"
                )));
            }
            let mut coeffs = Vec::with_capacity(ncoef);
            for _ in 0..ncoef {
                coeffs.push(r.f64()?);
            }
            let u_map = KeyMap {
                scale: r.f64()?,
                offset: r.f64()?,
            };
            let v_map = KeyMap {
                scale: r.f64()?,
                offset: r.f64()?,
            };
            let certified_error = r.f64()?;
            Ok(QuadNode::Leaf {
                region,
                surface: SurfaceCoeffs {
                    deg: deg - 1,
                    coeffs,
                    u_map,
                    v_map,
                },
                certified_error,
            })
        }
        other => Err(FormatError::Malformed(format!("unknown node tag {other}"))),
    }
}

/// Decode an index file; fallback structures are rebuilt from the embedded
/// data so query answers match the pre-serialization index bit for bit.
pub fn deserialize(bytes: &[u8]) -> Result<LoadedIndex, FormatError> {
    let header = read_header(bytes)?;
    let mut r = Reader {
        buf: bytes,
        pos: HEADER_LEN,
    };
    let n = header.n as usize;
    if n == 0 {
        return Err(FormatError::Malformed("empty index".into()));
    }
    match header.dim {
        1 => {
            let mut keys = Vec::with_capacity(n);
            for _ in 0..n {
                keys.push(r.f64()?);
            }
            let mut measures = Vec::with_capacity(n);
            for _ in 0..n {
                measures.push(r.f64()?);
            }
            let seg_count = r.usize_checked(n, "segment")?;
            let mut segments = Vec::with_capacity(seg_count);
            for _ in 0..seg_count {
                let first_idx = r.usize_checked(n - 1, "first index")?;
                let last_idx = r.usize_checked(n - 1, "last index")?;
                let lo_key = r.f64()?;
                let hi_key = r.f64()?;
                let ncoef = r.usize_checked(64, "coefficient")?;
                let mut coeffs = Vec::with_capacity(ncoef);
                for _ in 0..ncoef {
                    coeffs.push(r.f64()?);
                }
                let key_map = KeyMap {
                    scale: r.f64()?,
                    offset: r.f64()?,
                };
                let certified_error = r.f64()?;
                if first_idx > last_idx {
                    return Err(FormatError::Malformed("segment indices inverted".into()));
                }
                segments.push(Segment {
                    lo_key,
                    hi_key,
                    first_idx,
                    last_idx,
                    poly: PolyCoeffs { coeffs, key_map },
                    certified_error,
                });
            }
            let idx = PolyIndex1D::from_parts(
                header.agg,
                header.deg as usize,
                header.delta,
                keys,
                measures,
                segments,
            )
            .map_err(|e| FormatError::Malformed(e.to_string()))?;
            Ok(LoadedIndex::One(idx))
        }
        2 => {
            let mut points = Vec::with_capacity(n);
            for _ in 0..n {
                points.push(Point2D {
                    u: r.f64()?,
                    v: r.f64()?,
                    w: r.f64()?,
                });
            }
            let root = read_node(&mut r, 0)?;
            let idx = QuadIndex2D::from_parts(header.deg as usize, header.delta, points, root)
                .map_err(|e| FormatError::Malformed(e.to_string()))?;
            Ok(LoadedIndex::Two(idx))
        }
        other => Err(FormatError::Malformed(format!(
            "unsupported dimensionality {other}"
        ))),
    }
}
