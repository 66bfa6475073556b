//! Halton sequences and the inverse standard-normal transform.

/// Prime bases assigned to draw dimensions in order.
pub const PRIME_BASES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// The k-th element (1-based) of the Halton sequence in `base`: the radical
/// inverse of `k`.
pub fn halton_element(k: u64, base: u64) -> f64 {
    debug_assert!(base > 1);
    let mut f = 1.0;
    let mut result = 0.0;
    let mut i = k;
    while i > 0 {
        f /= base as f64;
        result += f * (i % base) as f64;
        i /= base;
    }
    result
}

/// Iterator over a Halton sequence in one base, starting at element 1.
#[derive(Debug, Clone)]
pub struct HaltonSequence {
    base: u64,
    next_index: u64,
}

impl HaltonSequence {
    pub fn new(base: u64) -> HaltonSequence {
        assert!(base > 1, "Halton base must exceed 1");
        HaltonSequence { base, next_index: 1 }
    }

    /// Skip the first `n` elements (burn-in).
    pub fn discard(mut self, n: u64) -> HaltonSequence {
        self.next_index += n;
        self
    }
}

impl Iterator for HaltonSequence {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let value = halton_element(self.next_index, self.base);
        self.next_index += 1;
        Some(value)
    }
}

/// Inverse standard-normal CDF (quantile function).
///
/// Wichura's AS 241 rational approximations (PPND16), accurate to full
/// double precision over (0, 1).
pub fn inverse_normal_cdf(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile argument must lie strictly inside (0, 1)");
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        const A: [f64; 8] = [
            3.387_132_872_796_366_5e0,
            1.331_416_678_917_843_8e2,
            1.971_590_950_306_551_3e3,
            1.373_169_376_550_946_1e4,
            4.592_195_393_154_987e4,
            6.726_577_092_700_87e4,
            3.343_057_558_358_813e4,
            2.509_080_928_730_122_7e3,
        ];
        const B: [f64; 8] = [
            1.0,
            4.231_333_070_160_091e1,
            6.871_870_074_920_579e2,
            5.394_196_021_424_751e3,
            2.121_379_430_158_659_6e4,
            3.930_789_580_009_271e4,
            2.872_908_573_572_194_3e4,
            5.226_495_278_852_545_5e3,
        ];
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-r.ln()).sqrt();
    let value = if r <= 5.0 {
        r -= 1.6;
        const C: [f64; 8] = [
            1.423_437_110_749_683_5e0,
            4.630_337_846_156_546e0,
            5.769_497_221_460_691e0,
            3.647_848_324_763_204_5e0,
            1.270_458_252_452_368_4e0,
            2.417_807_251_774_506e-1,
            2.272_384_498_926_918_4e-2,
            7.745_450_142_783_414e-4,
        ];
        const D: [f64; 8] = [
            1.0,
            2.053_191_626_637_759e0,
            1.676_384_830_183_803_8e0,
            6.897_673_349_851e-1,
            1.481_039_764_274_800_8e-1,
            1.519_866_656_361_645_7e-2,
            5.475_938_084_995_345e-4,
            1.050_750_071_644_416_9e-9,
        ];
        poly(&C, r) / poly(&D, r)
    } else {
        r -= 5.0;
        const E: [f64; 8] = [
            6.657_904_643_501_103e0,
            5.463_784_911_164_114e0,
            1.784_826_539_917_291_3e0,
            2.965_605_718_285_048_7e-1,
            2.653_218_952_657_612_4e-2,
            1.242_660_947_388_078_4e-3,
            2.711_555_568_743_487_6e-5,
            2.010_334_399_292_288_1e-7,
        ];
        const F: [f64; 8] = [
            1.0,
            5.998_322_065_558_88e-1,
            1.369_298_809_227_358e-1,
            1.487_536_129_085_061_5e-2,
            7.868_691_311_456_133e-4,
            1.846_318_317_510_054_8e-5,
            1.421_511_758_316_446e-7,
            2.044_263_103_389_939_7e-15,
        ];
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -value
    } else {
        value
    }
}

#[inline]
fn poly(coeffs: &[f64; 8], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}
