use std::net::{TcpListener, TcpStream};
use std::thread;

use neurocnc::dnc::{
    crc16, decode_frame, encode_frame, memory_pair, receive_payload, receive_program, send_payload,
    send_program, DncConfig, Fault, FaultyChannel, FrameError, TcpChannel,
};
use proptest::prelude::*;

/// Bit-at-a-time CRC-16 with poly 0x1021, init 0xFFFF, no reflection.
fn crc16_bitwise(data: &[u8]) -> u16 {
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

fn fast() -> DncConfig {
    DncConfig {
        ack_timeout_ms: 20,
        retries: 3,
        session_timeout_ms: 2000,
    }
}

#[test]
fn crc_check_values() {
    assert_eq!(crc16_bitwise(b"123456789"), 0x29B1);
    assert_eq!(crc16(b"123456789"), 0x29B1);
    assert_eq!(crc16_bitwise(b""), 0xFFFF);
    assert_eq!(crc16(b""), 0xFFFF);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn crc_matches_bitwise(data in proptest::collection::vec(any::<u8>(), 0..300)) {
        prop_assert_eq!(crc16(&data), crc16_bitwise(&data));
    }

    #[test]
    fn single_bit_flip_changes_crc(data in proptest::collection::vec(any::<u8>(), 1..300), at in any::<usize>(), bit in 0u8..8) {
        let mut flipped = data.clone();
        let i = at % data.len();
        flipped[i] ^= 1 << bit;
        prop_assert_ne!(crc16(&data), crc16(&flipped));
    }

    #[test]
    fn frame_round_trip(seq in any::<u8>(), payload in proptest::collection::vec(any::<u8>(), 0..=1024)) {
        let f = decode_frame(&encode_frame(seq, &payload).unwrap()).unwrap();
        prop_assert_eq!(f.seq, seq);
        prop_assert_eq!(f.payload, payload);
    }

    #[test]
    fn corrupted_payload_is_caught(payload in proptest::collection::vec(any::<u8>(), 1..200), at in any::<usize>(), bit in 0u8..8) {
        let mut bytes = encode_frame(7, &payload).unwrap();
        let i = 4 + at % payload.len();
        bytes[i] ^= 1 << bit;
        prop_assert_eq!(decode_frame(&bytes), Err(FrameError::BadCrc));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn loopback_identity(data in proptest::collection::vec(any::<u8>(), 0..=65536)) {
        let (mut a, mut b) = memory_pair();
        let cfg = fast();
        let rcfg = cfg.clone();
        let rx = thread::spawn(move || receive_payload(&mut b, &rcfg).unwrap());
        let rep = send_payload(&mut a, 0x02, &data, &cfg).unwrap();
        let (_, got, _) = rx.join().unwrap();
        prop_assert_eq!(rep.data_frames as usize, data.len().div_ceil(1023));
        prop_assert_eq!(got, data);
    }
}

/// Per frame: up to two losses or corruptions, then a delivery that may be
/// duplicated.
fn fault_script() -> impl Strategy<Value = Vec<Fault>> {
    let bad = prop_oneof![Just(Fault::Drop), (0usize..2000).prop_map(Fault::Corrupt)];
    let good = prop_oneof![Just(Fault::Deliver), Just(Fault::Duplicate)];
    proptest::collection::vec((proptest::collection::vec(bad, 0..=2), good), 1..12).prop_map(
        |frames| {
            frames
                .into_iter()
                .flat_map(|(mut bad, good)| {
                    bad.push(good);
                    bad
                })
                .collect()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transfers_survive_bounded_faults(
        data in proptest::collection::vec(any::<u8>(), 0..6000),
        script in fault_script(),
    ) {
        let (a, mut b) = memory_pair();
        let mut a = FaultyChannel::new(a, script);
        let cfg = fast();
        let rcfg = cfg.clone();
        let rx = thread::spawn(move || receive_payload(&mut b, &rcfg));
        let sent = send_payload(&mut a, 0x01, &data, &cfg);
        let received = rx.join().unwrap();
        prop_assert!(sent.is_ok(), "{:?}", sent);
        let (_, got, _) = received.unwrap();
        prop_assert_eq!(got, data);
    }
}

#[test]
fn duplicated_frames_are_dropped() {
    let (a, mut b) = memory_pair();
    let mut a = FaultyChannel::new(a, [Fault::Duplicate; 8]);
    let text = "N10 G00 X0 Y0 Z5\n".repeat(200);
    let expect = text.clone();
    let rx = thread::spawn(move || receive_program(&mut b, &fast()).unwrap());
    send_program(&mut a, &text, &fast()).unwrap();
    let (got, rep) = rx.join().unwrap();
    assert_eq!(got, expect);
    // 3600 bytes make 4 data frames; the end frame's copy arrives after return
    assert_eq!(rep.duplicates, 4);
}

#[test]
fn sequence_numbers_wrap() {
    // 300 data frames run the 8-bit counter past 255
    let data = vec![0x5au8; 1023 * 300];
    let (mut a, mut b) = memory_pair();
    let expect = data.clone();
    let rx = thread::spawn(move || receive_payload(&mut b, &fast()).unwrap());
    let rep = send_payload(&mut a, 0x01, &data, &fast()).unwrap();
    assert_eq!(rep.data_frames, 300);
    assert_eq!(rx.join().unwrap().1, expect);
}

#[test]
fn tcp_binding_round_trip() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let text = "(DEMO)\nN10 G00 X1.000 Y2.000 Z3.000\nN20 M30\n".repeat(100);
    let expect = text.clone();
    let rx = thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut ch = TcpChannel::new(stream).unwrap();
        receive_program(&mut ch, &DncConfig::default()).unwrap()
    });
    let mut ch = TcpChannel::new(TcpStream::connect(addr).unwrap()).unwrap();
    let rep = send_program(&mut ch, &text, &DncConfig::default()).unwrap();
    let (got, _) = rx.join().unwrap();
    assert_eq!(got, expect);
    assert_eq!(rep.retries, 0);
}
