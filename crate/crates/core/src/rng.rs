//! Counter-addressed Gaussian streams.
//!
//! Every normal variate is a pure function of `(master_seed, stream_id,
//! step_index)`: the key of a Philox4x32-10 block cipher is the master seed,
//! and the 128-bit counter is `(step_index, stream_id)`. One block yields two
//! 52-bit uniforms, each mapped through an inverse normal CDF, so one step
//! always consumes exactly one block. Nothing depends on how paths are
//! scheduled across threads.

const PHILOX_M0: u32 = 0xD251_1F53;
const PHILOX_M1: u32 = 0xCD9E_8D57;
const PHILOX_W0: u32 = 0x9E37_79B9;
const PHILOX_W1: u32 = 0xBB67_AE85;

#[inline(always)]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let prod = u64::from(a) * u64::from(b);
    ((prod >> 32) as u32, prod as u32)
}

/// Philox4x32 with 10 rounds.
#[inline]
pub fn philox4x32_10(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut ctr = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(PHILOX_W0);
            k[1] = k[1].wrapping_add(PHILOX_W1);
        }
        let (hi0, lo0) = mulhilo(PHILOX_M0, ctr[0]);
        let (hi1, lo1) = mulhilo(PHILOX_M1, ctr[2]);
        ctr = [hi1 ^ ctr[1] ^ k[0], lo1, hi0 ^ ctr[3] ^ k[1], lo0];
    }
    ctr
}

/// SplitMix64 finalizer, used to derive independent master seeds.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a tag (e.g. the step count of
/// one level of a convergence study).
pub fn derive_seed(master_seed: u64, tag: u64) -> u64 {
    mix64(master_seed ^ mix64(tag))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }

    fn key(&self) -> [u32; 2] {
        [self.master_seed as u32, (self.master_seed >> 32) as u32]
    }
}

/// Maps the top 52 bits to the open interval (0, 1); the half-ulp offset
/// keeps both endpoints out and is exactly representable.
#[inline(always)]
fn open_unit(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Raw uniform pair at a counter address.
#[inline]
pub fn uniform_pair(seed: SeedSpec, step_index: u64) -> (f64, f64) {
    let out = philox4x32_10(
        [
            step_index as u32,
            (step_index >> 32) as u32,
            seed.stream_id as u32,
            (seed.stream_id >> 32) as u32,
        ],
        seed.key(),
    );
    let a = u64::from(out[0]) | (u64::from(out[1]) << 32);
    let b = u64::from(out[2]) | (u64::from(out[3]) << 32);
    (open_unit(a), open_unit(b))
}

/// Two independent standard normals addressed by `(seed, step_index)`.
#[inline]
pub fn gaussian_pair(seed: SeedSpec, step_index: u64) -> (f64, f64) {
    let (u1, u2) = uniform_pair(seed, step_index);
    (inverse_normal_cdf(u1), inverse_normal_cdf(u2))
}

/// Sequential view of one stream; `next_pair` at position `k` returns exactly
/// `gaussian_pair(seed, k)`.
#[derive(Debug, Clone)]
pub struct GaussianStream {
    seed: SeedSpec,
    position: u64,
}

impl GaussianStream {
    pub fn new(seed: SeedSpec) -> Self {
        Self { seed, position: 0 }
    }

    pub fn at(seed: SeedSpec, position: u64) -> Self {
        Self { seed, position }
    }

    pub fn position(&self) -> u64 {
        self.position
    }

    #[inline]
    pub fn next_pair(&mut self) -> (f64, f64) {
        let pair = gaussian_pair(self.seed, self.position);
        self.position += 1;
        pair
    }
}

// Acklam's rational approximation, relative error below 1.15e-9.
const ACKLAM_A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const ACKLAM_B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const ACKLAM_C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const ACKLAM_D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];
const P_LOW: f64 = 0.02425;

/// Inverse of the standard normal CDF on (0, 1).
#[inline]
pub fn inverse_normal_cdf(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    let (a, b, c, d) = (&ACKLAM_A, &ACKLAM_B, &ACKLAM_C, &ACKLAM_D);
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
            / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
            / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
            / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    }
}
