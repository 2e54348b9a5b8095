//! Wire format: `STX seq len_lo len_hi payload.. crc_lo crc_hi ETX`, with the
//! CRC taken over seq, length and payload.

use crc::{Crc, CRC_16_IBM_3740};

use super::{DncError, FrameError};

pub const STX: u8 = 0x02;
pub const ETX: u8 = 0x03;
pub const ACK: u8 = 0x06;
pub const NAK: u8 = 0x15;
pub const MAX_PAYLOAD: usize = 1024;
/// Bytes around the payload: delimiters, seq, length and CRC.
pub const OVERHEAD: usize = 7;

/// Payload type carried in the first payload byte.
pub const TYPE_NC: u8 = 0x01;
pub const TYPE_PART: u8 = 0x02;
pub const TYPE_END: u8 = 0x03;

/// CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no final xor.
const CCITT_FALSE: Crc<u16> = Crc::<u16>::new(&CRC_16_IBM_3740);

pub fn crc16(bytes: &[u8]) -> u16 {
    CCITT_FALSE.checksum(bytes)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub seq: u8,
    pub payload: Vec<u8>,
}

pub fn encode_frame(seq: u8, payload: &[u8]) -> Result<Vec<u8>, DncError> {
    if payload.len() > MAX_PAYLOAD {
        return Err(DncError::PayloadTooLarge(payload.len()));
    }
    let len = (payload.len() as u16).to_le_bytes();
    let mut out = Vec::with_capacity(payload.len() + OVERHEAD);
    out.push(STX);
    out.push(seq);
    out.extend_from_slice(&len);
    out.extend_from_slice(payload);
    let crc = crc16(&out[1..]);
    out.extend_from_slice(&crc.to_le_bytes());
    out.push(ETX);
    Ok(out)
}

pub fn decode_frame(bytes: &[u8]) -> Result<Frame, FrameError> {
    if bytes.first() != Some(&STX) {
        return Err(FrameError::BadDelimiter);
    }
    if bytes.len() < OVERHEAD {
        return Err(FrameError::BadLength);
    }
    let len = u16::from_le_bytes([bytes[2], bytes[3]]) as usize;
    if len > MAX_PAYLOAD || bytes.len() != len + OVERHEAD {
        return Err(FrameError::BadLength);
    }
    if bytes[bytes.len() - 1] != ETX {
        return Err(FrameError::BadDelimiter);
    }
    let body = &bytes[1..4 + len];
    let crc = u16::from_le_bytes([bytes[4 + len], bytes[5 + len]]);
    if crc16(body) != crc {
        return Err(FrameError::BadCrc);
    }
    Ok(Frame {
        seq: bytes[1],
        payload: bytes[4..4 + len].to_vec(),
    })
}

/// Acknowledgement unit: the reply code followed by the sequence number it
/// refers to.
pub fn encode_reply(code: u8, seq: u8) -> Vec<u8> {
    vec![code, seq]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_corruption() {
        let f = encode_frame(0, b"N10 M30").unwrap();
        assert_eq!(f.len(), 7 + OVERHEAD);
        assert_eq!(
            decode_frame(&f).unwrap(),
            Frame {
                seq: 0,
                payload: b"N10 M30".to_vec()
            }
        );
        let mut bad = f.clone();
        bad[6] ^= 0x01;
        assert_eq!(decode_frame(&bad), Err(FrameError::BadCrc));
        assert_eq!(decode_frame(&f[..f.len() - 2]), Err(FrameError::BadLength));
        let mut bad = f;
        bad[0] = 0x7f;
        assert_eq!(decode_frame(&bad), Err(FrameError::BadDelimiter));
    }

    #[test]
    fn oversized_payload_is_refused() {
        assert_eq!(
            encode_frame(1, &[0u8; MAX_PAYLOAD + 1]),
            Err(DncError::PayloadTooLarge(MAX_PAYLOAD + 1))
        );
        assert!(encode_frame(1, &[0u8; MAX_PAYLOAD]).is_ok());
    }
}
