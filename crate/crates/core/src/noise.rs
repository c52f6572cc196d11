//! Reproducible Wiener-sheet increments on the space-time lattice.
//!
//! Every Gaussian is a pure function of `(master_seed, path_index, step, cell)`:
//! the master seed is the Philox4x32-10 key and the triple `(cell pair, step,
//! path)` is the 128-bit counter. One block yields two 64-bit words, each
//! turned into a standard normal by the ziggurat method. The rare ziggurat
//! rejections draw from a fallback counter range owned by that `(path, step,
//! cell)`, so paths and steps can be generated in any order on any worker.
//!
//! The increment attached to cell `x` over a step of length `dt` is the sheet
//! mass of the rectangle `[t, t+dt] × cell` divided by `h`, hence `N(0, dt/h)`.

use rand_core::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{domain, Result};
use crate::lattice::{Field, GridSpec};
use crate::scalar::Real;

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

/// Scalar (one-cell) draws are laid out in lanes of this width, so draw `k`
/// of a scalar stream lives at `(step = k / LANE, cell = k % LANE)`.
pub const SCALAR_LANE: usize = 64;

/// Counter word 2 is tagged with this bit for auxiliary [`PhiloxRng`]
/// streams, keeping them disjoint from slab counters (steps < 2⁶³).
const AUX_TAG: u32 = 0x8000_0000;

/// The Philox4x32 bijection with 10 rounds.
#[inline(always)]
pub fn philox4x32_10(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut c = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(PHILOX_W0);
            k[1] = k[1].wrapping_add(PHILOX_W1);
        }
        let p0 = u64::from(PHILOX_M0) * u64::from(c[0]);
        let p1 = u64::from(PHILOX_M1) * u64::from(c[2]);
        c = [
            ((p1 >> 32) as u32) ^ c[1] ^ k[0],
            p1 as u32,
            ((p0 >> 32) as u32) ^ c[3] ^ k[1],
            p0 as u32,
        ];
    }
    c
}

/// Counter word 2 is tagged with this bit for ziggurat fallback draws.
const FALLBACK_TAG: u32 = 0x4000_0000;

/// Largest step index the slab counter can address.
pub const MAX_STEP: u64 = (1 << 62) - 1;

/// The bit source of one normal: the block's 64 bits first, then (on a
/// ziggurat rejection) a Philox sequence private to `(path, step, cell)`.
struct CellBits<'a> {
    first: Option<u64>,
    stream: &'a NoiseStream,
    step: u64,
    cell: u32,
    fallback: Option<PhiloxRng>,
}

impl CellBits<'_> {
    fn fallback(&mut self) -> &mut PhiloxRng {
        let (stream, step, cell) = (self.stream, self.step, self.cell);
        self.fallback.get_or_insert_with(|| PhiloxRng {
            key: stream.key,
            words: [step as u32, FALLBACK_TAG | (step >> 32) as u32],
            path: stream.path,
            // 4096 blocks per cell, far more than a rejection loop consumes.
            block: cell << 12,
            buffer: [0; 4],
            pos: 4,
        })
    }
}

impl RngCore for CellBits<'_> {
    fn next_u32(&mut self) -> u32 {
        self.fallback().next_u32()
    }

    #[inline(always)]
    fn next_u64(&mut self) -> u64 {
        match self.first.take() {
            Some(bits) => bits,
            None => self.fallback().next_u64(),
        }
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.fallback().fill_bytes(dst)
    }
}

#[inline(always)]
fn normal_from_bits(bits: u64, stream: &NoiseStream, step: u64, cell: usize) -> f64 {
    let mut src = CellBits {
        first: Some(bits),
        stream,
        step,
        cell: cell as u32,
        fallback: None,
    };
    StandardNormal.sample(&mut src)
}

/// Noise source for one Monte Carlo path.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NoiseStream {
    key: [u32; 2],
    path: u32,
    silent: bool,
}

/// Derives the stream of path `path_index` from the experiment's master seed.
///
/// # Panics
/// If `path_index` does not fit in 32 bits.
pub fn derive_stream(master_seed: u64, path_index: u64) -> NoiseStream {
    NoiseStream {
        key: [master_seed as u32, (master_seed >> 32) as u32],
        path: u32::try_from(path_index).expect("path index must fit in 32 bits"),
        silent: false,
    }
}

impl NoiseStream {
    /// A stream whose every increment is exactly zero (variance-0 hook).
    pub fn silent() -> Self {
        Self {
            key: [0, 0],
            path: 0,
            silent: true,
        }
    }

    pub fn is_silent(&self) -> bool {
        self.silent
    }

    pub fn path_index(&self) -> u64 {
        u64::from(self.path)
    }

    /// Standard normals for `(step, cell)`, `cell = 0..out.len()`.
    pub fn fill_standard_normals<T: Real>(&self, step: u64, out: &mut [T]) {
        if self.silent {
            out.fill(T::zero());
            return;
        }
        assert!(step <= MAX_STEP, "step index {step} exceeds the counter range");
        let (lo, hi) = (step as u32, (step >> 32) as u32);
        let word = |a: u32, b: u32| (u64::from(a) << 32) | u64::from(b);
        let mut pairs = out.chunks_exact_mut(2);
        let mut j = 0u32;
        for pair in &mut pairs {
            let c = philox4x32_10([j, lo, hi, self.path], self.key);
            let cell = 2 * j as usize;
            pair[0] = T::lit(normal_from_bits(word(c[0], c[1]), self, step, cell));
            pair[1] = T::lit(normal_from_bits(word(c[2], c[3]), self, step, cell + 1));
            j += 1;
        }
        if let [last] = pairs.into_remainder() {
            let c = philox4x32_10([j, lo, hi, self.path], self.key);
            *last = T::lit(normal_from_bits(word(c[0], c[1]), self, step, 2 * j as usize));
        }
    }

    /// Sequential view of the scalar lane, for one-dimensional SDEs.
    pub fn scalar_normals(&self) -> ScalarNormals {
        ScalarNormals {
            stream: *self,
            block: 0,
            buffer: [0.0; SCALAR_LANE],
            pos: SCALAR_LANE,
        }
    }

    /// An auxiliary sequential generator on a counter range disjoint from
    /// the slabs, for samplers that consume a variable number of uniforms.
    pub fn rng(&self, channel: u32) -> PhiloxRng {
        PhiloxRng {
            key: self.key,
            words: [0, AUX_TAG | (channel & !AUX_TAG)],
            path: self.path,
            block: 0,
            buffer: [0; 4],
            pos: 4,
        }
    }
}

/// One step's increments `ξ_{k,x} ~ N(0, dt/h)`.
pub type Slab<T> = Field<T>;

pub fn sample_slab<T: Real>(
    stream: &NoiseStream,
    step: u64,
    spec: GridSpec,
    dt: T,
) -> Result<Slab<T>> {
    let mut slab = Field::zeros(spec);
    fill_slab(stream, step, spec, dt, &mut slab)?;
    Ok(slab)
}

pub fn fill_slab<T: Real>(
    stream: &NoiseStream,
    step: u64,
    spec: GridSpec,
    dt: T,
    out: &mut [T],
) -> Result<()> {
    spec.check(out)?;
    if !(dt > T::zero()) {
        return Err(domain(format!("time step must be positive, got {dt}")));
    }
    stream.fill_standard_normals(step, out);
    let scale = (dt / spec.h::<T>()).sqrt();
    for v in out.iter_mut() {
        *v *= scale;
    }
    Ok(())
}

/// Anything that can hand the stepper the increments of a given step.
pub trait SlabSource<T: Real> {
    /// Writes the `N(0, dt/h)` increments of `step` into `out`.
    fn fill(&mut self, step: u64, spec: GridSpec, dt: T, out: &mut [T]) -> Result<()>;

    /// True when every increment is identically zero.
    fn is_silent(&self) -> bool {
        false
    }
}

impl<T: Real> SlabSource<T> for NoiseStream {
    fn fill(&mut self, step: u64, spec: GridSpec, dt: T, out: &mut [T]) -> Result<()> {
        fill_slab(self, step, spec, dt, out)
    }

    fn is_silent(&self) -> bool {
        self.silent
    }
}

/// Replays a fixed list of slabs; steps past the end get zero increments.
#[derive(Clone, Debug)]
pub struct RecordedSlabs<T> {
    pub slabs: Vec<Slab<T>>,
}

impl<T: Real> SlabSource<T> for RecordedSlabs<T> {
    fn fill(&mut self, step: u64, spec: GridSpec, _dt: T, out: &mut [T]) -> Result<()> {
        spec.check(out)?;
        match self.slabs.get(step as usize) {
            Some(s) => {
                spec.check(s)?;
                out.copy_from_slice(s);
            }
            None => out.fill(T::zero()),
        }
        Ok(())
    }
}

/// Iterator over the scalar lane of a stream: draw `k` is the normal at
/// `(step = k / 64, cell = k % 64)`.
#[derive(Clone, Debug)]
pub struct ScalarNormals {
    stream: NoiseStream,
    block: u64,
    buffer: [f64; SCALAR_LANE],
    pos: usize,
}

impl ScalarNormals {
    #[inline(always)]
    pub fn next_normal(&mut self) -> f64 {
        if self.pos == SCALAR_LANE {
            self.stream.fill_standard_normals(self.block, &mut self.buffer);
            self.block += 1;
            self.pos = 0;
        }
        let z = self.buffer[self.pos];
        self.pos += 1;
        z
    }
}

impl Iterator for ScalarNormals {
    type Item = f64;
    fn next(&mut self) -> Option<f64> {
        Some(self.next_normal())
    }
}

/// Sequential counter-mode Philox generator (`rand_core::RngCore`).
#[derive(Clone, Debug)]
pub struct PhiloxRng {
    key: [u32; 2],
    /// Counter words 1 and 2; word 0 is the block index, word 3 the path.
    words: [u32; 2],
    path: u32,
    block: u32,
    buffer: [u32; 4],
    pos: usize,
}

impl RngCore for PhiloxRng {
    fn next_u32(&mut self) -> u32 {
        if self.pos == 4 {
            self.buffer = philox4x32_10([self.block, self.words[0], self.words[1], self.path], self.key);
            self.block = self.block.wrapping_add(1);
            self.pos = 0;
        }
        let v = self.buffer[self.pos];
        self.pos += 1;
        v
    }

    fn next_u64(&mut self) -> u64 {
        let hi = u64::from(self.next_u32());
        let lo = u64::from(self.next_u32());
        (hi << 32) | lo
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(4) {
            let bytes = self.next_u32().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}
