//! FNV-1a, used to intern message literals and fingerprint process terms.

const OFFSET32: u32 = 0x811c_9dc5;
const PRIME32: u32 = 0x0100_0193;
const OFFSET64: u64 = 0xcbf2_9ce4_8422_2325;
const PRIME64: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a32(bytes: &[u8]) -> u32 {
    bytes
        .iter()
        .fold(OFFSET32, |h, b| (h ^ u32::from(*b)).wrapping_mul(PRIME32))
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(OFFSET64, |h, b| (h ^ u64::from(*b)).wrapping_mul(PRIME64))
}
