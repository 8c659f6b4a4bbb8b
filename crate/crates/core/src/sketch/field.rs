//! Arithmetic modulo the Mersenne prime `2^61 - 1`.

pub const P: u64 = (1 << 61) - 1;

#[inline]
pub fn reduce(x: u128) -> u64 {
    let lo = (x as u64) & P;
    let hi = (x >> 61) as u64;
    let s = lo + (hi & P) + (hi >> 61);
    let s = (s & P) + (s >> 61);
    if s >= P {
        s - P
    } else {
        s
    }
}

#[inline]
pub fn add(a: u64, b: u64) -> u64 {
    let s = a + b;
    if s >= P {
        s - P
    } else {
        s
    }
}

#[inline]
pub fn sub(a: u64, b: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        a + P - b
    }
}

#[inline]
pub fn neg(a: u64) -> u64 {
    if a == 0 {
        0
    } else {
        P - a
    }
}

#[inline]
pub fn mul(a: u64, b: u64) -> u64 {
    reduce(a as u128 * b as u128)
}

pub fn pow(mut base: u64, mut e: u64) -> u64 {
    let mut acc = 1;
    base %= P;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul(acc, base);
        }
        base = mul(base, base);
        e >>= 1;
    }
    acc
}

/// Signed integer to its residue.
#[inline]
pub fn from_i64(x: i64) -> u64 {
    if x >= 0 {
        x as u64 % P
    } else {
        neg(x.unsigned_abs() % P)
    }
}

/// Byte-windowed power table: `z^e` in one multiplication per exponent byte.
#[derive(Debug, Clone)]
pub struct PowTable {
    windows: Vec<[u64; 256]>,
}

impl PowTable {
    /// Table for exponents below `2^bits`.
    pub fn new(z: u64, bits: u32) -> Self {
        let nwin = bits.div_ceil(8).max(1) as usize;
        let mut windows = Vec::with_capacity(nwin);
        let mut base = z % P;
        for _ in 0..nwin {
            let mut w = [0u64; 256];
            w[0] = 1;
            for k in 1..256 {
                w[k] = mul(w[k - 1], base);
            }
            base = mul(w[255], base);
            windows.push(w);
        }
        Self { windows }
    }

    #[inline]
    pub fn pow(&self, e: u64) -> u64 {
        let mut acc = self.windows[0][(e & 0xff) as usize];
        let mut rest = e >> 8;
        let mut i = 1;
        while rest != 0 {
            acc = mul(acc, self.windows[i][(rest & 0xff) as usize]);
            rest >>= 8;
            i += 1;
        }
        acc
    }
}
