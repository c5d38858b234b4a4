//! Seedable samplers for the homogeneous Poisson process on a box and the
//! binomial process on the unit cube.
//!
//! Every sampler draws from an [`RngSubstream`], which is a pure function of
//! `(master_seed, label, replica)`. Replicas can therefore be run in any order
//! on any number of threads and still produce the same points.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Axis-aligned cube `origin + [0, side]^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSpec {
    dim: usize,
    side: f64,
    origin: Vec<f64>,
}

impl BoxSpec {
    /// The box `[0, side]^dim`.
    pub fn new(dim: usize, side: f64) -> Result<Self> {
        Self::with_origin(vec![0.0; dim], side)
    }

    pub fn with_origin(origin: Vec<f64>, side: f64) -> Result<Self> {
        let dim = origin.len();
        if dim < 2 {
            return Err(Error::param("dim", format!("need dim >= 2, got {dim}")));
        }
        if !(side > 0.0) || !side.is_finite() {
            return Err(Error::param("side", format!("need side > 0, got {side}")));
        }
        if origin.iter().any(|x| !x.is_finite()) {
            return Err(Error::param("origin", "coordinates must be finite"));
        }
        Ok(BoxSpec { dim, side, origin })
    }

    pub fn unit(dim: usize) -> Result<Self> {
        Self::new(dim, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.dim as i32)
    }

    /// Closed-box membership.
    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim
            && p
                .iter()
                .zip(&self.origin)
                .all(|(&x, &o)| x >= o && x <= o + self.side)
    }
}

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// splitmix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325_u64, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Substream label shared by every sampler of one experiment cell.
pub fn stream_label(experiment: &str, dim: usize, param: f64, side: f64) -> String {
    format!("{experiment}/d={dim}/param={param}/side={side}")
}

/// Independent random stream owned by a single replica.
///
/// Backed by ChaCha8 keyed by the master seed, with the ChaCha stream number
/// set to a mixed `(label, replica)` id.
#[derive(Debug, Clone)]
pub struct RngSubstream {
    master_seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

/// Derive the substream for `(master_seed, label, replica)`.
pub fn derive_substream(master_seed: u64, label: &[u8], replica: u64) -> RngSubstream {
    let stream_id = mix64(
        fnv1a(label) ^ mix64(replica.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)),
    );
    RngSubstream::new(master_seed, stream_id)
}

impl RngSubstream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_id);
        RngSubstream {
            master_seed,
            stream_id,
            rng,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Poisson-distributed count with the given mean.
    ///
    /// Sequential inversion below mean 30, Hörmann's PTRS transformed
    /// rejection above. Both are exact.
    pub fn poisson(&mut self, mean: f64) -> u64 {
        if mean <= 0.0 {
            return 0;
        }
        if mean < 30.0 {
            self.poisson_inversion(mean)
        } else {
            self.poisson_ptrs(mean)
        }
    }

    fn poisson_inversion(&mut self, mean: f64) -> u64 {
        let u = self.uniform();
        let mut k = 0u64;
        let mut mass = (-mean).exp();
        let mut cdf = mass;
        while u >= cdf {
            k += 1;
            mass *= mean / k as f64;
            let next = cdf + mass;
            // roundoff in the far tail: cdf stops growing before reaching u
            if next == cdf {
                break;
            }
            cdf = next;
        }
        k
    }

    fn poisson_ptrs(&mut self, mean: f64) -> u64 {
        let log_mean = mean.ln();
        let smu = mean.sqrt();
        let b = 0.931 + 2.53 * smu;
        let a = -0.059 + 0.02483 * b;
        let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        let v_r = 0.9277 - 3.6224 / (b - 2.0);
        loop {
            let u = self.uniform() - 0.5;
            let v = self.uniform();
            let us = 0.5 - u.abs();
            let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
            if us >= 0.07 && v <= v_r {
                return k as u64;
            }
            if k < 0.0 || (us < 0.013 && v > us) {
                continue;
            }
            let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
            let rhs = -mean + k * log_mean - ln_gamma(k + 1.0);
            if lhs <= rhs {
                return k as u64;
            }
        }
    }
}

impl RngCore for RngSubstream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Finite point set in a box, stored as a flat row-major coordinate array.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    bbox: BoxSpec,
    coords: Vec<f64>,
}

impl PointCloud {
    pub fn empty(bbox: BoxSpec) -> Self {
        PointCloud {
            bbox,
            coords: Vec::new(),
        }
    }

    /// Build from explicit points, checking that each lies in the box.
    pub fn from_points<P: AsRef<[f64]>>(bbox: BoxSpec, points: &[P]) -> Result<Self> {
        let mut coords = Vec::with_capacity(points.len() * bbox.dim());
        for (index, p) in points.iter().enumerate() {
            let p = p.as_ref();
            if !bbox.contains(p) {
                return Err(Error::PointOutsideBox { index });
            }
            coords.extend_from_slice(p);
        }
        Ok(PointCloud { bbox, coords })
    }

    pub fn bbox(&self) -> &BoxSpec {
        &self.bbox
    }

    pub fn dim(&self) -> usize {
        self.bbox.dim()
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.bbox.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.coords[i * d..(i + 1) * d]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim())
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Append one point, which must lie in the box.
    pub fn push(&mut self, p: &[f64]) -> Result<()> {
        if !self.bbox.contains(p) {
            return Err(Error::PointOutsideBox { index: self.len() });
        }
        self.coords.extend_from_slice(p);
        Ok(())
    }
}

fn fill_uniform(rng: &mut RngSubstream, bbox: &BoxSpec, count: usize) -> PointCloud {
    let d = bbox.dim();
    let mut coords = Vec::with_capacity(count * d);
    for _ in 0..count {
        for j in 0..d {
            coords.push(bbox.origin()[j] + bbox.side() * rng.uniform());
        }
    }
    PointCloud {
        bbox: bbox.clone(),
        coords,
    }
}

/// Homogeneous Poisson process of the given intensity restricted to `bbox`.
pub fn sample_poisson_box(
    rng: &mut RngSubstream,
    intensity: f64,
    bbox: &BoxSpec,
) -> Result<PointCloud> {
    if !(intensity > 0.0) || !intensity.is_finite() {
        return Err(Error::param(
            "intensity",
            format!("need intensity > 0, got {intensity}"),
        ));
    }
    let count = rng.poisson(intensity * bbox.volume());
    Ok(fill_uniform(rng, bbox, count as usize))
}

/// `n` i.i.d. uniform points in `[0, 1]^dim`.
pub fn sample_binomial_cube(rng: &mut RngSubstream, n: usize, dim: usize) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::param("n", "need at least one point"));
    }
    let bbox = BoxSpec::unit(dim)?;
    Ok(fill_uniform(rng, &bbox, n))
}
