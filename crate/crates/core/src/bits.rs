//! MSB-first packing of fixed-width codeword indices.

/// Packs `width`-bit values MSB-first, zero-padding the last byte.
#[derive(Debug, Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    acc: u64,
    filled: u32,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn write(&mut self, value: u32, width: u32) {
        debug_assert!(width <= 32 && (width == 32 || value >> width == 0));
        self.acc = (self.acc << width) | value as u64;
        self.filled += width;
        while self.filled >= 8 {
            self.filled -= 8;
            self.bytes.push((self.acc >> self.filled) as u8);
        }
        self.acc &= (1u64 << self.filled) - 1;
    }

    pub fn finish(mut self) -> Vec<u8> {
        if self.filled > 0 {
            self.bytes.push((self.acc << (8 - self.filled)) as u8);
        }
        self.bytes
    }
}

pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    acc: u64,
    filled: u32,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self {
            bytes,
            pos: 0,
            acc: 0,
            filled: 0,
        }
    }

    /// `None` once the input is exhausted.
    pub fn read(&mut self, width: u32) -> Option<u32> {
        while self.filled < width {
            let b = *self.bytes.get(self.pos)?;
            self.pos += 1;
            self.acc = (self.acc << 8) | b as u64;
            self.filled += 8;
        }
        self.filled -= width;
        let v = (self.acc >> self.filled) as u32 & mask(width);
        self.acc &= (1u64 << self.filled) - 1;
        Some(v)
    }
}

fn mask(width: u32) -> u32 {
    if width == 32 {
        u32::MAX
    } else {
        (1 << width) - 1
    }
}

/// Bytes needed for `count` values of `width` bits.
pub fn packed_len(count: usize, width: u32) -> usize {
    (count * width as usize).div_ceil(8)
}

pub fn pack(values: &[u32], width: u32) -> Vec<u8> {
    let mut w = BitWriter::new();
    for &v in values {
        w.write(v, width);
    }
    w.finish()
}

pub fn unpack(bytes: &[u8], width: u32, count: usize) -> Option<Vec<u32>> {
    let mut r = BitReader::new(bytes);
    (0..count).map(|_| r.read(width)).collect()
}
