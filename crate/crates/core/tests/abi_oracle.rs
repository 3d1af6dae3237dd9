use alloy_dyn_abi::{DynSolType, DynSolValue};
use alloy_primitives::{keccak256 as alloy_keccak, Address as AAddress, B256, I256, U256 as AU256};
use exgen::abi::{decode, encode, keccak256, selector, AbiType, AbiValue};
use exgen::domain::Address;
use proptest::prelude::*;
use ruint::aliases::U256;

fn au(v: U256) -> AU256 {
    AU256::from_be_bytes(v.to_be_bytes::<32>())
}

fn mask(v: U256, bits: u16) -> U256 {
    if bits == 256 {
        v
    } else {
        v & ((U256::from(1u8) << bits as usize) - U256::from(1u8))
    }
}

/// Sign-extends the low `bits` of `v` to a 256-bit two's-complement word.
fn sign_extend(v: U256, bits: u16) -> U256 {
    let low = mask(v, bits);
    if bits < 256 && low.bit(bits as usize - 1) {
        low | !((U256::from(1u8) << bits as usize) - U256::from(1u8))
    } else {
        low
    }
}

fn elementary() -> impl Strategy<Value = (AbiValue, DynSolValue)> {
    let bits = (1u16..=32).prop_map(|b| b * 8);
    prop_oneof![
        any::<[u8; 20]>().prop_map(|a| (
            AbiValue::Address(Address(a)),
            DynSolValue::Address(AAddress::from(a))
        )),
        any::<bool>().prop_map(|b| (AbiValue::Bool(b), DynSolValue::Bool(b))),
        (any::<[u8; 32]>(), bits.clone()).prop_map(|(w, n)| {
            let v = mask(U256::from_be_bytes(w), n);
            (AbiValue::Uint(v, n), DynSolValue::Uint(au(v), n as usize))
        }),
        (any::<[u8; 32]>(), bits).prop_map(|(w, n)| {
            let v = sign_extend(U256::from_be_bytes(w), n);
            (AbiValue::Int(v, n), DynSolValue::Int(I256::from_raw(au(v)), n as usize))
        }),
        (any::<[u8; 32]>(), 1usize..=32).prop_map(|(w, n)| {
            let mut padded = [0u8; 32];
            padded[..n].copy_from_slice(&w[..n]);
            (
                AbiValue::FixedBytes(w[..n].to_vec()),
                DynSolValue::FixedBytes(B256::from(padded), n),
            )
        }),
        proptest::collection::vec(any::<u8>(), 0..80)
            .prop_map(|b| (AbiValue::Bytes(b.clone()), DynSolValue::Bytes(b))),
        "[a-zA-Z0-9 ]{0,70}".prop_map(|s| (AbiValue::String(s.clone()), DynSolValue::String(s))),
    ]
}

fn value() -> impl Strategy<Value = (AbiValue, DynSolValue)> {
    prop_oneof![
        3 => elementary(),
        1 => (any::<u32>(), proptest::collection::vec(any::<[u8; 32]>(), 0..5)).prop_map(|(_, ws)| {
            let vals: Vec<U256> = ws.iter().map(|w| U256::from_be_bytes(*w)).collect();
            (
                AbiValue::Array(
                    AbiType::Uint(256),
                    vals.iter().map(|v| AbiValue::Uint(*v, 256)).collect(),
                ),
                DynSolValue::Array(vals.iter().map(|v| DynSolValue::Uint(au(*v), 256)).collect()),
            )
        }),
        1 => proptest::collection::vec("[a-z]{0,40}", 0..4).prop_map(|ss| (
            AbiValue::Array(AbiType::String, ss.iter().cloned().map(AbiValue::String).collect()),
            DynSolValue::Array(ss.into_iter().map(DynSolValue::String).collect()),
        )),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn encoding_matches_reference_and_round_trips(pairs in proptest::collection::vec(value(), 0..6)) {
        let (ours, theirs): (Vec<AbiValue>, Vec<DynSolValue>) = pairs.into_iter().unzip();
        let bytes = encode(&ours);
        prop_assert_eq!(&bytes, &DynSolValue::Tuple(theirs.clone()).abi_encode_params());

        let types: Vec<AbiType> = ours.iter().map(AbiValue::abi_type).collect();
        let nested = types
            .iter()
            .any(|t| matches!(t, AbiType::Array(e) if e.is_dynamic()));
        if nested {
            prop_assert!(decode(&types, &bytes).is_err());
        } else {
            prop_assert_eq!(decode(&types, &bytes).unwrap(), ours);
        }

        let sol_types: Vec<DynSolType> = types
            .iter()
            .map(|t| DynSolType::parse(&t.to_string()).unwrap())
            .collect();
        let back = DynSolType::Tuple(sol_types).abi_decode_params(&bytes).unwrap();
        prop_assert_eq!(back, DynSolValue::Tuple(theirs));
    }

    #[test]
    fn selectors_and_hashes_match_reference(name in "[a-zA-Z_][a-zA-Z0-9_]{0,20}", args in proptest::collection::vec(prop_oneof![
        Just("address"), Just("uint256"), Just("bool"), Just("bytes"), Just("string"), Just("uint8[]"), Just("bytes32")
    ], 0..4)) {
        let sig = format!("{name}({})", args.join(","));
        prop_assert_eq!(keccak256(sig.as_bytes()), alloy_keccak(sig.as_bytes()).0);
        prop_assert_eq!(&selector(&sig)[..], &alloy_keccak(sig.as_bytes())[..4]);
    }

    #[test]
    fn truncated_payloads_are_rejected(pairs in proptest::collection::vec(value(), 1..4), cut in 32usize..=64) {
        let (ours, _): (Vec<AbiValue>, Vec<DynSolValue>) = pairs.into_iter().unzip();
        let bytes = encode(&ours);
        let types: Vec<AbiType> = ours.iter().map(AbiValue::abi_type).collect();
        // Dropping a whole word always removes a head or payload byte.
        let short = &bytes[..bytes.len().saturating_sub(cut)];
        prop_assert!(decode(&types, short).is_err());
    }
}

#[test]
fn well_known_selectors() {
    assert_eq!(selector("transfer(address,uint256)"), [0xa9, 0x05, 0x9c, 0xbb]);
    assert_eq!(selector("balanceOf(address)"), [0x70, 0xa0, 0x82, 0x31]);
}
