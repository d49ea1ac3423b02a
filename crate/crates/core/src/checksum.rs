use crc::{Crc, CRC_64_XZ};

/// CRC-64/XZ (ECMA-182 polynomial, reflected).
pub const CRC64: Crc<u64> = Crc::<u64>::new(&CRC_64_XZ);

pub fn crc64(bytes: &[u8]) -> u64 {
    CRC64.checksum(bytes)
}

#[cfg(test)]
mod tests {
    #[test]
    fn check_value() {
        // standard check input for CRC-64/XZ
        assert_eq!(super::crc64(b"123456789"), 0x995d_c9bb_df19_39fa);
    }
}
