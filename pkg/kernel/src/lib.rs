//! Accelerated rANS coder, bit-exact with the pure-Python reference coder.
//!
//! State machine (normative, shared with the reference implementation):
//! 64-bit state in [2^31, 2^63), 32-bit little-endian renormalization words,
//! integer CDF summing to 2^precision, symbols encoded in reverse order, the
//! final state flushed as two u32 words, and the emitted word list reversed
//! into the payload so decoding reads forward.
//!
//! The C ABI operates on caller-owned contiguous buffers and never calls back.

use std::slice;

pub const RANS_L: u64 = 1 << 31;

pub const OK: i32 = 0;
pub const ERR_BAD_CDF: i32 = 1;
pub const ERR_SYMBOL_RANGE: i32 = 2;
pub const ERR_TRUNCATED: i32 = 3;
pub const ERR_STATE_MISMATCH: i32 = 4;
pub const ERR_CAPACITY: i32 = 5;

fn check_cdf(cum: &[u32], precision: u32) -> Result<(), i32> {
    if precision == 0 || precision > 16 || cum.len() < 2 {
        return Err(ERR_BAD_CDF);
    }
    let total = 1u32 << precision;
    if cum[0] != 0 || *cum.last().unwrap() != total {
        return Err(ERR_BAD_CDF);
    }
    if cum.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ERR_BAD_CDF);
    }
    Ok(())
}

/// Encode `symbols` against the CDF; returns the payload bytes.
pub fn encode(symbols: &[i32], cum: &[u32], precision: u32, s_min: i32) -> Result<Vec<u8>, i32> {
    check_cdf(cum, precision)?;
    let n_sym = cum.len() - 1;
    let renorm_shifted: u64 = (RANS_L >> precision) << 32;
    let mut state: u64 = RANS_L;
    let mut words: Vec<u32> = Vec::with_capacity(symbols.len() + 2);
    for &s in symbols.iter().rev() {
        let idx = s as i64 - s_min as i64;
        if idx < 0 || idx >= n_sym as i64 {
            return Err(ERR_SYMBOL_RANGE);
        }
        let i = idx as usize;
        let start = cum[i] as u64;
        let freq = (cum[i + 1] - cum[i]) as u64;
        if state >= renorm_shifted * freq {
            words.push(state as u32);
            state >>= 32;
        }
        state = ((state / freq) << precision) + (state % freq) + start;
    }
    words.push(state as u32);
    words.push((state >> 32) as u32);
    let mut out = Vec::with_capacity(words.len() * 4);
    for w in words.iter().rev() {
        out.extend_from_slice(&w.to_le_bytes());
    }
    Ok(out)
}

/// Decode `count` symbols; the decoder state must return to RANS_L.
pub fn decode(payload: &[u8], count: usize, cum: &[u32], precision: u32, s_min: i32) -> Result<Vec<i32>, i32> {
    check_cdf(cum, precision)?;
    if payload.len() < 8 {
        return Err(ERR_TRUNCATED);
    }
    let mask: u64 = (1 << precision) - 1;
    let hi = u32::from_le_bytes(payload[0..4].try_into().unwrap()) as u64;
    let lo = u32::from_le_bytes(payload[4..8].try_into().unwrap()) as u64;
    let mut state = (hi << 32) | lo;
    let mut pos = 8usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let cf = state & mask;
        // largest i with cum[i] <= cf
        let i = cum.partition_point(|&c| (c as u64) <= cf) - 1;
        let start = cum[i] as u64;
        let freq = (cum[i + 1] - cum[i]) as u64;
        state = freq * (state >> precision) + cf - start;
        if state < RANS_L {
            if pos + 4 > payload.len() {
                return Err(ERR_TRUNCATED);
            }
            let w = u32::from_le_bytes(payload[pos..pos + 4].try_into().unwrap()) as u64;
            state = (state << 32) | w;
            pos += 4;
        }
        out.push(i as i32 + s_min);
    }
    if state != RANS_L {
        return Err(ERR_STATE_MISMATCH);
    }
    Ok(out)
}

/// C ABI: encode into a caller-owned buffer. `out_cap` of 4*n + 8 always suffices.
///
/// # Safety
/// All pointers must reference valid buffers of the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn fck_encode(
    symbols: *const i32,
    n: usize,
    cum: *const u32,
    cum_len: usize,
    precision: u32,
    s_min: i32,
    out: *mut u8,
    out_cap: usize,
    out_len: *mut usize,
) -> i32 {
    if (symbols.is_null() && n > 0) || cum.is_null() || out.is_null() || out_len.is_null() {
        return ERR_BAD_CDF;
    }
    let symbols = if n == 0 { &[] } else { slice::from_raw_parts(symbols, n) };
    let cum = slice::from_raw_parts(cum, cum_len);
    match encode(symbols, cum, precision, s_min) {
        Ok(bytes) => {
            if bytes.len() > out_cap {
                return ERR_CAPACITY;
            }
            slice::from_raw_parts_mut(out, bytes.len()).copy_from_slice(&bytes);
            *out_len = bytes.len();
            OK
        }
        Err(code) => code,
    }
}

/// C ABI: decode `count` symbols into a caller-owned i32 buffer.
///
/// # Safety
/// All pointers must reference valid buffers of the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn fck_decode(
    payload: *const u8,
    payload_len: usize,
    count: usize,
    cum: *const u32,
    cum_len: usize,
    precision: u32,
    s_min: i32,
    out: *mut i32,
) -> i32 {
    if (payload.is_null() && payload_len > 0) || cum.is_null() || (out.is_null() && count > 0) {
        return ERR_BAD_CDF;
    }
    let payload = if payload_len == 0 { &[] } else { slice::from_raw_parts(payload, payload_len) };
    let cum = slice::from_raw_parts(cum, cum_len);
    match decode(payload, count, cum, precision, s_min) {
        Ok(symbols) => {
            if count > 0 {
                slice::from_raw_parts_mut(out, count).copy_from_slice(&symbols);
            }
            OK
        }
        Err(code) => code,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Frozen reference-coder vectors; any byte drift is a protocol break.
    const GOLDEN_CUM: [u32; 4] = [0, 10000, 30000, 65536];
    const GOLDEN_SYMS: [i32; 12] = [0, 1, 2, 2, 1, 0, 1, 1, 2, 0, 0, 1];
    const GOLDEN_PAYLOAD: &str = "8d592100a01edb3a";

    fn unhex(s: &str) -> Vec<u8> {
        (0..s.len())
            .step_by(2)
            .map(|i| u8::from_str_radix(&s[i..i + 2], 16).unwrap())
            .collect()
    }

    #[test]
    fn empty_stream_is_flush_only() {
        let cum = [0u32, 65536];
        let payload = encode(&[], &cum, 16, 0).unwrap();
        assert_eq!(payload, unhex("0000000000000080"));
        assert_eq!(decode(&payload, 0, &cum, 16, 0).unwrap(), Vec::<i32>::new());
    }

    #[test]
    fn golden_payload_matches_reference() {
        let payload = encode(&GOLDEN_SYMS, &GOLDEN_CUM, 16, 0).unwrap();
        assert_eq!(payload, unhex(GOLDEN_PAYLOAD));
        let back = decode(&payload, GOLDEN_SYMS.len(), &GOLDEN_CUM, 16, 0).unwrap();
        assert_eq!(back, GOLDEN_SYMS);
    }

    #[test]
    fn golden_gaussian_payload_matches_reference() {
        let cum: [u32; 23] = [
            0, 1344, 3320, 6071, 9694, 14210, 19538, 25487, 31772, 38057, 44006, 49334, 53850,
            57473, 60224, 62200, 63544, 64409, 64936, 65240, 65407, 65493, 65536,
        ];
        let syms: [i32; 40] = [
            5, 8, -9, 8, 1, 2, 4, -3, 12, -8, -3, -1, 3, -1, -7, -9, -9, -8, -6, 12, -5, 5, 7,
            -4, -3, 0, -4, 12, -6, 10, 8, 9, -7, -1, 4, 1, 5, 5, 5, -8,
        ];
        let payload = encode(&syms, &cum, 16, -9).unwrap();
        assert_eq!(
            payload,
            unhex("ac610100a4f1b05394fcd5990b0c3fbb790c88b97cfa2e1c8a19b90537800e77")
        );
        assert_eq!(decode(&payload, syms.len(), &cum, 16, -9).unwrap(), syms);
    }

    #[test]
    fn random_round_trips() {
        // xorshift so the test needs no external RNG crate
        let mut s: u64 = 0x9E3779B97F4A7C15;
        let mut next = move || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            s
        };
        for trial in 0..500 {
            let k = 1 + (next() % 300) as usize;
            let mut counts: Vec<u64> = (0..k).map(|_| 1 + next() % 997).collect();
            let total: u64 = counts.iter().sum();
            // scale to 2^16 with a remainder dump on the first bin
            let mut acc = 0u64;
            let mut cum = vec![0u32];
            for c in counts.iter_mut() {
                *c = (*c * 65536) / total;
                if *c == 0 {
                    *c = 1;
                }
                acc += *c;
                cum.push(acc as u32);
            }
            let excess = acc as i64 - 65536;
            if excess != 0 {
                // rebuild with the largest bin absorbing the difference
                let (imax, _) = counts.iter().enumerate().max_by_key(|(_, &c)| c).unwrap();
                counts[imax] = (counts[imax] as i64 - excess) as u64;
                cum = vec![0u32];
                let mut a = 0u64;
                for &c in &counts {
                    a += c;
                    cum.push(a as u32);
                }
            }
            assert_eq!(*cum.last().unwrap(), 65536);
            let s_min = (next() % 64) as i32 - 32;
            let n = (next() % 2000) as usize;
            let syms: Vec<i32> = (0..n).map(|_| s_min + (next() % k as u64) as i32).collect();
            let payload = encode(&syms, &cum, 16, s_min).unwrap();
            let back = decode(&payload, n, &cum, 16, s_min).unwrap();
            assert_eq!(back, syms, "trial {trial}");
        }
    }

    #[test]
    fn error_codes() {
        let cum = [0u32, 30000, 65536];
        assert_eq!(encode(&[5], &cum, 16, 0).unwrap_err(), ERR_SYMBOL_RANGE);
        assert_eq!(encode(&[0], &[0u32, 1000], 16, 0).unwrap_err(), ERR_BAD_CDF);
        let payload = encode(&[0, 1, 1], &cum, 16, 0).unwrap();
        assert_eq!(decode(&payload[..4], 3, &cum, 16, 0).unwrap_err(), ERR_TRUNCATED);
        // wrong CDF: strictly different frequencies break the state check
        let wrong = [0u32, 60000, 65536];
        let res = decode(&payload, 3, &wrong, 16, 0);
        assert!(matches!(res, Err(ERR_STATE_MISMATCH) | Err(ERR_TRUNCATED) | Ok(_)));
        if let Ok(syms) = res {
            assert_ne!(syms, vec![0, 1, 1]);
        }
    }
}
