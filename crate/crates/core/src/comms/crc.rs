/// CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no xorout.
pub fn crc16(data: &[u8]) -> u16 {
    let mut crc: u16 = 0xFFFF;
    for &byte in data {
        crc ^= (byte as u16) << 8;
        for _ in 0..8 {
            crc = if crc & 0x8000 != 0 {
                (crc << 1) ^ 0x1021
            } else {
                crc << 1
            };
        }
    }
    crc
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Table-driven reference, built independently of the bitwise loop above.
    fn table_crc(data: &[u8]) -> u16 {
        let mut table = [0u16; 256];
        for (i, slot) in table.iter_mut().enumerate() {
            let mut v = (i as u16) << 8;
            for _ in 0..8 {
                v = if v & 0x8000 != 0 { (v << 1) ^ 0x1021 } else { v << 1 };
            }
            *slot = v;
        }
        data.iter()
            .fold(0xFFFFu16, |crc, &b| (crc << 8) ^ table[((crc >> 8) as u8 ^ b) as usize])
    }

    #[test]
    fn check_values() {
        assert_eq!(crc16(b""), 0xFFFF);
        assert_eq!(crc16(b"123456789"), 0x29B1);
        assert_eq!(table_crc(b"123456789"), 0x29B1);
        let catalog = crc::Crc::<u16>::new(&crc::CRC_16_IBM_3740);
        assert_eq!(catalog.checksum(b"123456789"), 0x29B1);
    }

    #[test]
    fn agrees_with_references_on_varied_inputs() {
        let catalog = crc::Crc::<u16>::new(&crc::CRC_16_IBM_3740);
        let mut buf = Vec::new();
        for n in 0..300u32 {
            buf.push((n.wrapping_mul(2654435761) >> 13) as u8);
            assert_eq!(crc16(&buf), table_crc(&buf));
            assert_eq!(crc16(&buf), catalog.checksum(&buf));
        }
    }

    #[test]
    fn every_single_bit_flip_changes_crc() {
        let msg: Vec<u8> = (0..32u8).map(|i| i.wrapping_mul(37).wrapping_add(11)).collect();
        let base = crc16(&msg);
        for bit in 0..256 {
            let mut m = msg.clone();
            m[bit / 8] ^= 1 << (bit % 8);
            assert_ne!(crc16(&m), base, "bit {bit}");
        }
    }
}
