use super::{Codebook, FeedbackMode, Selection};
use crate::error::{invalid, Error, Result};

/// Field widths of a feedback payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FeedbackLayout {
    pub mode: FeedbackMode,
    /// `log2(N O)`.
    pub beam_bits: u32,
    pub subbands: usize,
}

impl FeedbackLayout {
    /// Requires `N O` to be a power of two (and at least 2 in mode 2).
    pub fn new(mode: FeedbackMode, codebook_size: usize, subbands: usize) -> Result<Self> {
        if !codebook_size.is_power_of_two() {
            return Err(invalid("O", format!("codebook size {codebook_size} is not a power of two")));
        }
        if subbands == 0 {
            return Err(invalid("K", "at least one subband required"));
        }
        let beam_bits = codebook_size.trailing_zeros();
        if mode == FeedbackMode::Subband && beam_bits == 0 {
            return Err(invalid("O", "mode 2 needs a codebook of size >= 2"));
        }
        Ok(Self {
            mode,
            beam_bits,
            subbands,
        })
    }

    pub fn codebook_size(&self) -> usize {
        1 << self.beam_bits
    }

    pub fn i11_bits(&self) -> u32 {
        match self.mode {
            FeedbackMode::Wideband => self.beam_bits,
            FeedbackMode::Subband => self.beam_bits - 1,
            FeedbackMode::PerSubband => 0,
        }
    }

    pub fn i2_bits(&self) -> u32 {
        match self.mode {
            FeedbackMode::Wideband => 2,
            FeedbackMode::Subband => 4,
            FeedbackMode::PerSubband => self.beam_bits + 2,
        }
    }

    pub fn total_bits(&self) -> usize {
        self.i11_bits() as usize + self.subbands * self.i2_bits() as usize
    }
}

/// Encoded indices `i_{1,1}` and `i_2(k)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Feedback {
    pub layout: FeedbackLayout,
    /// Zero and unused in mode 3.
    pub i11: u64,
    pub i2: Vec<u64>,
}

impl Feedback {
    pub fn mode(&self) -> FeedbackMode {
        self.layout.mode
    }

    /// Payload bits, MSB-first, `i_{1,1}` then `i_2(0..K)`.
    pub fn to_bits(&self) -> Vec<bool> {
        let mut bits = Vec::with_capacity(self.layout.total_bits());
        push_bits(&mut bits, self.i11, self.layout.i11_bits());
        for &v in &self.i2 {
            push_bits(&mut bits, v, self.layout.i2_bits());
        }
        bits
    }

    pub fn from_bits(bits: &[bool], layout: FeedbackLayout) -> Result<Self> {
        if bits.len() != layout.total_bits() {
            return Err(Error::MalformedFeedback(format!(
                "mode {} payload needs {} bits, got {}",
                layout.mode.number(),
                layout.total_bits(),
                bits.len()
            )));
        }
        let w11 = layout.i11_bits() as usize;
        let w2 = layout.i2_bits() as usize;
        let i11 = read_bits(&bits[..w11]);
        let i2 = bits[w11..].chunks(w2).map(read_bits).collect();
        Ok(Self { layout, i11, i2 })
    }

    /// Payload as hex, left-padded to a whole number of nibbles.
    pub fn to_hex(&self) -> String {
        bits_to_hex(&self.to_bits())
    }
}

fn push_bits(out: &mut Vec<bool>, value: u64, width: u32) {
    for i in (0..width).rev() {
        out.push((value >> i) & 1 == 1);
    }
}

fn read_bits(bits: &[bool]) -> u64 {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b as u64)
}

/// MSB-first bits as hex; leading zero bits pad to a nibble boundary.
pub(crate) fn bits_to_hex(bits: &[bool]) -> String {
    let pad = (4 - bits.len() % 4) % 4;
    let padded: Vec<bool> = std::iter::repeat_n(false, pad).chain(bits.iter().copied()).collect();
    padded
        .chunks(4)
        .map(|c| char::from_digit(read_bits(c) as u32, 16).unwrap())
        .collect()
}

/// Hex of `b` with each entry packed in `beam_bits` bits, `b_0` first.
pub fn localization_hex(b: &[u32], beam_bits: u32) -> String {
    let mut bits = Vec::with_capacity(b.len() * beam_bits as usize);
    for &v in b {
        push_bits(&mut bits, v as u64, beam_bits);
    }
    bits_to_hex(&bits)
}

fn check(cond: bool, what: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::OutOfRange(what.to_string()))
    }
}

pub fn encode_feedback(selection: &Selection, codebook: &Codebook) -> Result<Feedback> {
    let layout = FeedbackLayout::new(selection.mode(), codebook.size(), selection.subbands())?;
    let size = codebook.size();
    let (i11, i2) = match selection {
        Selection::Wideband { m, n } => {
            check(*m < size, "beam index")?;
            check(n.iter().all(|&v| v < 4), "co-phasing index")?;
            (*m as u64, n.iter().map(|&v| v as u64).collect())
        }
        Selection::Subband { m, delta, n } => {
            check(*m < size / 2, "beam group index")?;
            check(delta.len() == n.len(), "offset count")?;
            check(delta.iter().all(|&v| v < 4), "beam offset")?;
            check(n.iter().all(|&v| v < 4), "co-phasing index")?;
            let i2 = delta
                .iter()
                .zip(n)
                .map(|(&d, &nk)| ((d as u64) << 2) | nk as u64)
                .collect();
            (*m as u64, i2)
        }
        Selection::PerSubband { m, n } => {
            check(m.len() == n.len(), "beam count")?;
            check(m.iter().all(|&v| v < size), "beam index")?;
            check(n.iter().all(|&v| v < 4), "co-phasing index")?;
            let i2 = m
                .iter()
                .zip(n)
                .map(|(&mk, &nk)| ((mk as u64) << 2) | nk as u64)
                .collect();
            (0, i2)
        }
    };
    Ok(Feedback { layout, i11, i2 })
}

pub fn decode_feedback(bits: &[bool], layout: FeedbackLayout) -> Result<Selection> {
    let fb = Feedback::from_bits(bits, layout)?;
    let n = fb.i2.iter().map(|&v| (v & 3) as u8).collect();
    Ok(match layout.mode {
        FeedbackMode::Wideband => Selection::Wideband { m: fb.i11 as usize, n },
        FeedbackMode::Subband => Selection::Subband {
            m: fb.i11 as usize,
            delta: fb.i2.iter().map(|&v| (v >> 2) as u8).collect(),
            n,
        },
        FeedbackMode::PerSubband => Selection::PerSubband {
            m: fb.i2.iter().map(|&v| (v >> 2) as usize).collect(),
            n,
        },
    })
}

/// `b` with polarization information dropped; mode-2 entries wrap modulo `N O`.
pub fn localization_bits(feedback: &Feedback) -> Vec<u32> {
    let size = feedback.layout.codebook_size() as u64;
    match feedback.mode() {
        FeedbackMode::Wideband => vec![feedback.i11 as u32; feedback.i2.len()],
        FeedbackMode::Subband => feedback
            .i2
            .iter()
            .map(|&v| ((2 * feedback.i11 + (v >> 2)) % size) as u32)
            .collect(),
        FeedbackMode::PerSubband => feedback.i2.iter().map(|&v| (v >> 2) as u32).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn payload_sizes() {
        let l1 = FeedbackLayout::new(FeedbackMode::Wideband, 64, 4).unwrap();
        assert_eq!(l1.total_bits(), 14);
        let l2 = FeedbackLayout::new(FeedbackMode::Subband, 64, 4).unwrap();
        assert_eq!(l2.total_bits(), 21);
        let l3 = FeedbackLayout::new(FeedbackMode::PerSubband, 64, 4).unwrap();
        assert_eq!(l3.total_bits(), 32);
        assert!(FeedbackLayout::new(FeedbackMode::Wideband, 48, 4).is_err());
    }

    #[test]
    fn mode3_packing() {
        let cb = Codebook::new(2, 4).unwrap();
        let fb = encode_feedback(&Selection::PerSubband { m: vec![3], n: vec![2] }, &cb).unwrap();
        assert_eq!(fb.i2, vec![14]);
        assert_eq!(fb.to_bits(), vec![false, true, true, true, false]);
        assert_eq!(fb.to_hex(), "0e");
    }

    #[test]
    fn localization_examples() {
        let cb = Codebook::new(16, 4).unwrap();
        let fb = encode_feedback(&Selection::Wideband { m: 9, n: vec![1, 3, 0] }, &cb).unwrap();
        assert_eq!(localization_bits(&fb), vec![9, 9, 9]);
        let fb = encode_feedback(
            &Selection::Subband { m: 3, delta: vec![1, 0], n: vec![2, 3] },
            &cb,
        )
        .unwrap();
        assert_eq!(localization_bits(&fb), vec![7, 6]);
        let fb = encode_feedback(&Selection::PerSubband { m: vec![4, 60, 0], n: vec![0, 1, 2] }, &cb)
            .unwrap();
        assert_eq!(localization_bits(&fb), vec![4, 60, 0]);
        let fb = encode_feedback(&Selection::Subband { m: 31, delta: vec![2, 3], n: vec![0, 0] }, &cb)
            .unwrap();
        assert_eq!(localization_bits(&fb), vec![0, 1]);
    }

    #[test]
    fn malformed_lengths_rejected() {
        let l = FeedbackLayout::new(FeedbackMode::Wideband, 64, 4).unwrap();
        assert!(decode_feedback(&[true; 13], l).is_err());
        assert!(decode_feedback(&[true; 15], l).is_err());
        assert!(decode_feedback(&[true; 14], l).is_ok());
    }

    #[test]
    fn out_of_range_selection_rejected() {
        let cb = Codebook::new(2, 4).unwrap();
        assert!(encode_feedback(&Selection::Wideband { m: 8, n: vec![0] }, &cb).is_err());
        assert!(encode_feedback(&Selection::Subband { m: 4, delta: vec![0], n: vec![0] }, &cb).is_err());
        assert!(encode_feedback(&Selection::PerSubband { m: vec![1], n: vec![4] }, &cb).is_err());
    }

    #[test]
    fn hex_padding() {
        assert_eq!(bits_to_hex(&[true, false, true, false, true, false, true, false, true]), "155");
        assert_eq!(localization_hex(&[7, 6], 6), "1c6");
    }
}
