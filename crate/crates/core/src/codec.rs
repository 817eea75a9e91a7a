//! Binary payload holding everything the decoder needs: mask positions,
//! unknown-vertex positions and 8-bit mask values. No connectivity is
//! stored; the mesh is rebuilt from the positions in canonical order.
//!
//! Layout (little-endian):
//!
//! ```text
//! "FEMI" | version u16 | channels u16 | width u32 | height u32 | m u32 | p u32
//! m x u32 mask indices | p x u32 unknown indices | m * channels value bytes
//! ```
//!
//! Indices are row-major pixel indices in ascending order.

use crate::error::{Error, Result};
use crate::femsolve::{FemSystem, InpaintResult};
use crate::image::quantize;
use crate::mesh::TriMesh;
use crate::spatial::{canonical_mesh, MaskSet};

pub const MAGIC: [u8; 4] = *b"FEMI";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Payload {
    width: u32,
    height: u32,
    channels: u16,
    mask: Vec<u32>,
    unknowns: Vec<u32>,
    values: Vec<u8>,
}

impl Payload {
    /// Canonicalises and validates. `values` holds `channels` entries per
    /// mask position, in the order of `mask`.
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        mask: &[usize],
        unknowns: &[usize],
        values: &[u8],
    ) -> Result<Self> {
        let width = u32::try_from(width).map_err(|_| Error::InvalidPayload("width exceeds u32".into()))?;
        let height = u32::try_from(height).map_err(|_| Error::InvalidPayload("height exceeds u32".into()))?;
        let channels = u16::try_from(channels).map_err(|_| Error::InvalidPayload("too many channels".into()))?;
        if values.len() != mask.len() * channels as usize {
            return Err(Error::InvalidPayload(format!(
                "{} values for {} mask pixels with {channels} channels",
                values.len(),
                mask.len()
            )));
        }
        let to_u32 =
            |&i: &usize| u32::try_from(i).map_err(|_| Error::PositionOutOfRange { position: u32::MAX, width, height });
        let mut order: Vec<usize> = (0..mask.len()).collect();
        order.sort_unstable_by_key(|&k| mask[k]);
        let c = channels as usize;
        let payload = Self {
            width,
            height,
            channels,
            mask: order.iter().map(|&k| to_u32(&mask[k])).collect::<Result<_>>()?,
            unknowns: {
                let mut u = unknowns.iter().map(to_u32).collect::<Result<Vec<_>>>()?;
                u.sort_unstable();
                u
            },
            values: order.iter().flat_map(|&k| values[k * c..(k + 1) * c].iter().copied()).collect(),
        };
        payload.validate()?;
        Ok(payload)
    }

    /// Payload for a mask with real-valued data, quantised to 8 bits.
    pub fn from_mask(mask: &MaskSet, unknowns: &[usize], width: usize, height: usize) -> Result<Self> {
        let values: Vec<u8> = mask.values.iter().map(|&v| quantize(v)).collect();
        Self::new(width, height, mask.channels, &mask.positions, unknowns, &values)
    }

    fn validate(&self) -> Result<()> {
        let (width, height) = (self.width, self.height);
        if width == 0 || height == 0 || self.channels == 0 {
            return Err(Error::InvalidPayload(format!("empty dimensions {width}x{height}x{}", self.channels)));
        }
        let pixels = width as u64 * height as u64;
        for list in [&self.mask, &self.unknowns] {
            for w in list.windows(2) {
                if w[0] == w[1] {
                    return Err(Error::DuplicatePosition(w[0]));
                }
                if w[0] > w[1] {
                    return Err(Error::InvalidPayload("positions are not in ascending order".into()));
                }
            }
            if let Some(&last) = list.last() {
                if last as u64 >= pixels {
                    return Err(Error::PositionOutOfRange { position: last, width, height });
                }
            }
        }
        // both lists are sorted: merge to find shared positions
        let (mut i, mut j) = (0, 0);
        while i < self.mask.len() && j < self.unknowns.len() {
            match self.mask[i].cmp(&self.unknowns[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return Err(Error::DuplicatePosition(self.mask[i])),
            }
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width as usize
    }

    pub fn height(&self) -> usize {
        self.height as usize
    }

    pub fn channels(&self) -> usize {
        self.channels as usize
    }

    pub fn mask_positions(&self) -> Vec<usize> {
        self.mask.iter().map(|&i| i as usize).collect()
    }

    pub fn unknown_positions(&self) -> Vec<usize> {
        self.unknowns.iter().map(|&i| i as usize).collect()
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn mask_set(&self) -> MaskSet {
        MaskSet {
            positions: self.mask_positions(),
            values: self.values.iter().map(|&v| v as f64).collect(),
            channels: self.channels(),
        }
    }

    /// Same positions with new values (re-quantised), e.g. after tonal
    /// optimisation. `values` must be in canonical mask order.
    pub fn with_values(&self, values: &[f64]) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::InvalidPayload(format!("{} values, expected {}", values.len(), self.values.len())));
        }
        Ok(Self { values: values.iter().map(|&v| quantize(v)).collect(), ..self.clone() })
    }

    /// Byte length of the encoded payload.
    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + 4 * (self.mask.len() + self.unknowns.len()) + self.values.len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.channels.to_le_bytes());
        for v in [self.width, self.height, self.mask.len() as u32, self.unknowns.len() as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for &i in self.mask.iter().chain(&self.unknowns) {
            out.extend_from_slice(&i.to_le_bytes());
        }
        out.extend_from_slice(&self.values);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(Error::TruncatedPayload { expected: HEADER_LEN, found: bytes.len() });
        }
        let magic: [u8; 4] = bytes[..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(Error::BadMagic(magic));
        }
        if bytes.len() < HEADER_LEN {
            return Err(Error::TruncatedPayload { expected: HEADER_LEN, found: bytes.len() });
        }
        let u16_at = |k: usize| u16::from_le_bytes(bytes[k..k + 2].try_into().unwrap());
        let u32_at = |k: usize| u32::from_le_bytes(bytes[k..k + 4].try_into().unwrap());
        let version = u16_at(4);
        if version != VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let channels = u16_at(6);
        let (width, height, m, p) = (u32_at(8), u32_at(12), u32_at(16) as usize, u32_at(20) as usize);
        let expected = HEADER_LEN as u64 + 4 * (m as u64 + p as u64) + m as u64 * channels as u64;
        if (bytes.len() as u64) < expected {
            return Err(Error::TruncatedPayload { expected: expected as usize, found: bytes.len() });
        }
        if bytes.len() as u64 > expected {
            return Err(Error::TrailingBytes(bytes.len() - expected as usize));
        }
        let index = |k: usize| u32_at(HEADER_LEN + 4 * k);
        let values_at = HEADER_LEN + 4 * (m + p);
        let payload = Self {
            width,
            height,
            channels,
            mask: (0..m).map(index).collect(),
            unknowns: (m..m + p).map(index).collect(),
            values: bytes[values_at..].to_vec(),
        };
        payload.validate()?;
        Ok(payload)
    }

    /// The mesh both encoder and decoder reconstruct from.
    pub fn mesh(&self) -> Result<TriMesh> {
        canonical_mesh(self.width(), &self.mask_positions(), &self.unknown_positions())
    }

    /// Decoder-side reconstruction.
    pub fn reconstruct(&self, tol: f64) -> Result<InpaintResult> {
        let system = FemSystem::new(self.mesh()?, self.width(), self.height())?;
        system.inpaint(&self.mask_set().values, self.channels(), tol, None)
    }
}

pub fn encode(mask: &MaskSet, unknowns: &[usize], width: usize, height: usize) -> Result<Vec<u8>> {
    Ok(Payload::from_mask(mask, unknowns, width, height)?.encode())
}

pub fn decode(bytes: &[u8]) -> Result<Payload> {
    Payload::decode(bytes)
}
