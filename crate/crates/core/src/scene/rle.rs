//! Run-length codecs for binary masks and integer label maps.
//!
//! Binary runs alternate zeros and ones and always start with a zero run,
//! which may be empty: `[1,1,0,0,0]` encodes as `[0,2,3]`.

use crate::error::{Error, Result};

use super::BitMask;

pub type RunLengths = Vec<u32>;

pub fn encode_rle(bits: &[bool]) -> Result<RunLengths> {
    if bits.is_empty() {
        return Err(Error::InvalidArgument("cannot run-length encode an empty sequence".into()));
    }
    let mut runs = Vec::new();
    let mut current = false;
    let mut count = 0u32;
    for &b in bits {
        if b == current {
            count += 1;
        } else {
            runs.push(count);
            current = b;
            count = 1;
        }
    }
    runs.push(count);
    Ok(runs)
}

pub fn decode_rle(runs: &[u32], length: usize) -> Result<Vec<bool>> {
    let total: u64 = runs.iter().map(|&r| r as u64).sum();
    if total != length as u64 {
        return Err(Error::InvalidArgument(format!(
            "run lengths sum to {total} but the sequence length is {length}"
        )));
    }
    let mut bits = Vec::with_capacity(length);
    for (i, &run) in runs.iter().enumerate() {
        let value = i % 2 == 1;
        bits.extend(std::iter::repeat_n(value, run as usize));
    }
    Ok(bits)
}

/// Encodes a mask without materializing an intermediate `Vec<bool>`.
pub fn encode_mask(mask: &BitMask) -> Result<RunLengths> {
    if mask.is_empty() {
        return Err(Error::InvalidArgument("cannot run-length encode an empty sequence".into()));
    }
    let mut runs = Vec::new();
    let mut cursor = 0usize;
    for one in mask.ones() {
        if one == cursor && !runs.is_empty() && runs.len() % 2 == 0 {
            *runs.last_mut().unwrap() += 1;
        } else {
            runs.push((one - cursor) as u32);
            runs.push(1);
        }
        cursor = one + 1;
    }
    if runs.is_empty() || cursor < mask.len() {
        runs.push((mask.len() - cursor) as u32);
    }
    Ok(runs)
}

pub fn decode_mask(runs: &[u32], length: usize) -> Result<BitMask> {
    let total: u64 = runs.iter().map(|&r| r as u64).sum();
    if total != length as u64 {
        return Err(Error::InvalidArgument(format!(
            "run lengths sum to {total} but the sequence length is {length}"
        )));
    }
    let mut mask = BitMask::zeros(length);
    let mut pos = 0usize;
    for (i, &run) in runs.iter().enumerate() {
        if i % 2 == 1 {
            for p in pos..pos + run as usize {
                mask.set(p);
            }
        }
        pos += run as usize;
    }
    Ok(mask)
}

/// Integer label runs as `[value, count]` pairs.
pub fn encode_labels(labels: &[u32]) -> Vec<[u32; 2]> {
    let mut runs: Vec<[u32; 2]> = Vec::new();
    for &label in labels {
        match runs.last_mut() {
            Some(last) if last[0] == label => last[1] += 1,
            _ => runs.push([label, 1]),
        }
    }
    runs
}

pub fn decode_labels(runs: &[[u32; 2]], length: usize) -> Result<Vec<u32>> {
    let total: u64 = runs.iter().map(|r| r[1] as u64).sum();
    if total != length as u64 {
        return Err(Error::InvalidArgument(format!(
            "label runs sum to {total} but the sequence length is {length}"
        )));
    }
    let mut labels = Vec::with_capacity(length);
    for &[value, count] in runs {
        labels.extend(std::iter::repeat_n(value, count as usize));
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn encode_examples() {
        assert_eq!(encode_rle(&[true, true, false, false, false]).unwrap(), vec![0, 2, 3]);
        assert_eq!(encode_rle(&[false, false, false]).unwrap(), vec![3]);
        assert!(encode_rle(&[]).is_err());
    }

    #[test]
    fn decode_examples() {
        assert_eq!(decode_rle(&[0, 2, 3], 5).unwrap(), vec![true, true, false, false, false]);
        assert_eq!(decode_rle(&[5], 5).unwrap(), vec![false; 5]);
        assert_eq!(decode_rle(&[0, 5], 5).unwrap(), vec![true; 5]);
        assert!(decode_rle(&[0, 2, 2], 5).is_err());
    }

    #[test]
    fn label_runs() {
        let labels = [3, 3, 0, 0, 0, 7];
        let runs = encode_labels(&labels);
        assert_eq!(runs, vec![[3, 2], [0, 3], [7, 1]]);
        assert_eq!(decode_labels(&runs, 6).unwrap(), labels);
        assert!(decode_labels(&runs, 7).is_err());
    }

    proptest! {
        #[test]
        fn rle_round_trip(bits in prop::collection::vec(any::<bool>(), 1..10_000)) {
            let runs = encode_rle(&bits).unwrap();
            prop_assert_eq!(runs.iter().map(|&r| r as usize).sum::<usize>(), bits.len());
            prop_assert_eq!(&decode_rle(&runs, bits.len()).unwrap(), &bits);

            let mask = BitMask::from_bools(&bits);
            prop_assert_eq!(&encode_mask(&mask).unwrap(), &runs);
            prop_assert_eq!(decode_mask(&runs, bits.len()).unwrap(), mask);
        }
    }
}
