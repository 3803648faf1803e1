use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use pnda_core::{Rotation, Verdict};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{LossError, Result};

/// Positive and negative index sets for one anchor over a shared pool.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairSpec {
    pub anchor: usize,
    pub positives: Vec<usize>,
    pub negatives: Vec<usize>,
}

impl PairSpec {
    pub fn new(anchor: usize, positives: Vec<usize>, negatives: Vec<usize>) -> Self {
        Self { anchor, positives, negatives }
    }

    /// Checks the set invariants against a pool of `pool_len` rows.
    pub fn validate(&self, pool_len: usize) -> Result<()> {
        if self.positives.is_empty() {
            return Err(LossError::NoPositives);
        }
        let mut seen = HashSet::with_capacity(self.positives.len() + self.negatives.len() + 1);
        for &k in std::iter::once(&self.anchor).chain(&self.positives).chain(&self.negatives) {
            if k >= pool_len {
                return Err(LossError::InvalidSpec(format!("index {k} outside pool of {pool_len}")));
            }
            if !seen.insert(k) {
                return Err(LossError::InvalidSpec(format!(
                    "index {k} appears more than once across anchor, positives and negatives"
                )));
            }
        }
        Ok(())
    }
}

/// How rotated views of an image enter the contrastive objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AugMode {
    /// No rotated views at all.
    None,
    /// Rotated views are always positives.
    Pda,
    /// Rotated views are always negatives.
    Nda,
    /// Positive for rotation-agnostic images, negative otherwise.
    Pnda,
}

impl AugMode {
    pub const ALL: [AugMode; 4] = [AugMode::None, AugMode::Pda, AugMode::Nda, AugMode::Pnda];

    pub fn as_str(self) -> &'static str {
        match self {
            AugMode::None => "none",
            AugMode::Pda => "pda",
            AugMode::Nda => "nda",
            AugMode::Pnda => "pnda",
        }
    }

    /// Whether the pool carries rotated views.
    pub fn uses_rotations(self) -> bool {
        self != AugMode::None
    }

    /// Whether verdicts must be looked up from a partition.
    pub fn needs_partition(self) -> bool {
        self == AugMode::Pnda
    }

    /// Resolves the verdict an anchor is treated with, or `None` for vanilla.
    ///
    /// `lookup` is only called under PNDA.
    pub fn treatment(self, lookup: impl FnOnce() -> Option<Verdict>) -> Result<Option<Verdict>> {
        match self {
            AugMode::None => Ok(None),
            AugMode::Pda => Ok(Some(Verdict::Rai)),
            AugMode::Nda => Ok(Some(Verdict::NonRai)),
            AugMode::Pnda => lookup().map(Some).ok_or(LossError::MissingVerdict),
        }
    }
}

impl fmt::Display for AugMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AugMode {
    type Err = LossError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(AugMode::None),
            "pda" => Ok(AugMode::Pda),
            "nda" => Ok(AugMode::Nda),
            "pnda" => Ok(AugMode::Pnda),
            other => Err(LossError::UnknownMode(other.to_string())),
        }
    }
}

/// Pool layout for one MoCo v2 step:
/// `[queries (M) | keys (M) | keys@90 | keys@180 | keys@270 | queue]`,
/// the rotated blocks present only when `rotated_keys` is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MocoLayout {
    pub batch: usize,
    pub queue: usize,
    pub rotated_keys: bool,
}

impl MocoLayout {
    pub fn query(&self, i: usize) -> usize {
        i
    }

    pub fn key(&self, i: usize) -> usize {
        self.batch + i
    }

    /// Panics for the identity rotation or a layout without rotated keys.
    pub fn rotated_key(&self, i: usize, r: Rotation) -> usize {
        assert!(self.rotated_keys && r != Rotation::R0);
        self.batch * (1 + r.index()) + i
    }

    fn queue_start(&self) -> usize {
        self.batch * if self.rotated_keys { 5 } else { 2 }
    }

    pub fn queue_index(&self, j: usize) -> usize {
        self.queue_start() + j
    }

    pub fn pool_len(&self) -> usize {
        self.queue_start() + self.queue
    }
}

/// MoCo v2 sets for query `anchor`.
///
/// RAI: `P = {k, k@90, k@180, k@270}`, `N = queue`. Non-RAI: `P = {k}`,
/// `N = queue + {k@90, k@180, k@270}`. `None` gives vanilla MoCo v2.
pub fn build_sets_moco(layout: &MocoLayout, anchor: usize, treatment: Option<Verdict>) -> Result<PairSpec> {
    if anchor >= layout.batch {
        return Err(LossError::AnchorOutOfRange { anchor, len: layout.batch });
    }
    if layout.queue == 0 {
        return Err(LossError::EmptyQueue);
    }
    match (treatment, layout.rotated_keys) {
        (Some(_), false) => return Err(LossError::MissingRotatedViews),
        (None, true) => return Err(LossError::UnexpectedRotatedViews),
        _ => {}
    }
    let queue: Vec<usize> = (0..layout.queue).map(|j| layout.queue_index(j)).collect();
    let key = layout.key(anchor);
    let rotated = || Rotation::NON_IDENTITY.map(|r| layout.rotated_key(anchor, r));
    let spec = match treatment {
        None => PairSpec::new(layout.query(anchor), vec![key], queue),
        Some(Verdict::Rai) => {
            let mut positives = vec![key];
            positives.extend(rotated());
            PairSpec::new(layout.query(anchor), positives, queue)
        }
        Some(Verdict::NonRai) => {
            let mut negatives = queue;
            negatives.extend(rotated());
            PairSpec::new(layout.query(anchor), vec![key], negatives)
        }
    };
    Ok(spec)
}

/// Pool layout for one SimCLR step: `[X | X+]` for vanilla, or
/// `[X | X+ | Rot(X, t1) | Rot(X+, t2)]` with rotated views.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimclrLayout {
    batch: usize,
    rotations: Option<(Rotation, Rotation)>,
}

impl SimclrLayout {
    pub fn new(batch: usize, rotations: Option<(Rotation, Rotation)>) -> Result<Self> {
        if batch < 2 {
            return Err(LossError::BatchTooSmall(batch));
        }
        if let Some((a, b)) = rotations {
            if a == b || a == Rotation::R0 || b == Rotation::R0 {
                return Err(LossError::InvalidAngles(a.degrees(), b.degrees()));
            }
        }
        Ok(Self { batch, rotations })
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn rotations(&self) -> Option<(Rotation, Rotation)> {
        self.rotations
    }

    /// Anchors are the two augmented views: indices `0..2M`.
    pub fn anchor_count(&self) -> usize {
        2 * self.batch
    }

    pub fn pool_len(&self) -> usize {
        self.batch * if self.rotations.is_some() { 4 } else { 2 }
    }

    /// Image index of a pool row.
    pub fn image_of(&self, row: usize) -> usize {
        row % self.batch
    }
}

/// SimCLR sets for anchor view `anchor` in `0..2M`.
///
/// RAI: the three other views of the same image are positives and the
/// remaining `4(M-1)` rows negatives. Non-RAI: only the partner view is
/// positive; the other `4M-2` rows, the anchor's own rotations included, are
/// negatives. `None` gives vanilla SimCLR over `2M` rows.
pub fn build_sets_simclr(layout: &SimclrLayout, anchor: usize, treatment: Option<Verdict>) -> Result<PairSpec> {
    let m = layout.batch;
    if anchor >= layout.anchor_count() {
        return Err(LossError::AnchorOutOfRange { anchor, len: layout.anchor_count() });
    }
    match (treatment, layout.rotations.is_some()) {
        (Some(_), false) => return Err(LossError::MissingRotatedViews),
        (None, true) => return Err(LossError::UnexpectedRotatedViews),
        _ => {}
    }
    let image = anchor % m;
    let partner = if anchor < m { anchor + m } else { anchor - m };
    let positives = match treatment {
        Some(Verdict::Rai) => vec![partner, 2 * m + image, 3 * m + image],
        _ => vec![partner],
    };
    let negatives = (0..layout.pool_len()).filter(|&k| k != anchor && !positives.contains(&k)).collect();
    Ok(PairSpec::new(anchor, positives, negatives))
}

/// Two distinct angles drawn without replacement from {90, 180, 270}.
pub fn draw_rotation_pair<R: Rng + ?Sized>(rng: &mut R) -> (Rotation, Rotation) {
    let mut choices = Rotation::NON_IDENTITY;
    choices.shuffle(rng);
    (choices[0], choices[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rot_layout(m: usize) -> SimclrLayout {
        SimclrLayout::new(m, Some((Rotation::R90, Rotation::R270))).unwrap()
    }

    #[test]
    fn simclr_rai_counts() {
        let layout = rot_layout(4);
        let spec = build_sets_simclr(&layout, 1, Some(Verdict::Rai)).unwrap();
        assert_eq!(spec.positives, vec![5, 9, 13]);
        assert_eq!(spec.negatives.len(), 12);
        spec.validate(16).unwrap();
    }

    #[test]
    fn simclr_non_rai_counts() {
        let layout = rot_layout(4);
        let spec = build_sets_simclr(&layout, 6, Some(Verdict::NonRai)).unwrap();
        assert_eq!(spec.positives, vec![2]);
        assert_eq!(spec.negatives.len(), 14);
        assert!(spec.negatives.contains(&10) && spec.negatives.contains(&14));
    }

    #[test]
    fn simclr_vanilla_has_two_m_rows() {
        let layout = SimclrLayout::new(4, None).unwrap();
        let spec = build_sets_simclr(&layout, 0, None).unwrap();
        assert_eq!(spec.positives, vec![4]);
        assert_eq!(spec.negatives.len(), 6);
        assert!(spec.negatives.iter().all(|&k| k < 8));
    }

    #[test]
    fn simclr_rejects_small_batches_and_bad_angles() {
        assert_eq!(SimclrLayout::new(1, None), Err(LossError::BatchTooSmall(1)));
        assert!(SimclrLayout::new(4, Some((Rotation::R90, Rotation::R90))).is_err());
        assert!(SimclrLayout::new(4, Some((Rotation::R0, Rotation::R90))).is_err());
        let vanilla = SimclrLayout::new(4, None).unwrap();
        assert_eq!(build_sets_simclr(&vanilla, 0, Some(Verdict::Rai)), Err(LossError::MissingRotatedViews));
        assert_eq!(build_sets_simclr(&rot_layout(4), 0, None), Err(LossError::UnexpectedRotatedViews));
    }

    #[test]
    fn moco_set_sizes() {
        let layout = MocoLayout { batch: 8, queue: 4096, rotated_keys: true };
        let rai = build_sets_moco(&layout, 3, Some(Verdict::Rai)).unwrap();
        assert_eq!((rai.positives.len(), rai.negatives.len()), (4, 4096));
        let non = build_sets_moco(&layout, 3, Some(Verdict::NonRai)).unwrap();
        assert_eq!((non.positives.len(), non.negatives.len()), (1, 4099));
        rai.validate(layout.pool_len()).unwrap();
        non.validate(layout.pool_len()).unwrap();
        let vanilla = MocoLayout { rotated_keys: false, ..layout };
        let v = build_sets_moco(&vanilla, 3, None).unwrap();
        assert_eq!((v.positives, v.negatives.len()), (vec![11], 4096));
    }

    #[test]
    fn moco_errors() {
        let layout = MocoLayout { batch: 2, queue: 0, rotated_keys: true };
        assert_eq!(build_sets_moco(&layout, 0, Some(Verdict::Rai)), Err(LossError::EmptyQueue));
        let layout = MocoLayout { batch: 2, queue: 4, rotated_keys: false };
        assert_eq!(build_sets_moco(&layout, 0, Some(Verdict::Rai)), Err(LossError::MissingRotatedViews));
        assert!(matches!(build_sets_moco(&layout, 2, None), Err(LossError::AnchorOutOfRange { .. })));
    }

    #[test]
    fn nda_mode_forces_single_positive() {
        let layout = MocoLayout { batch: 4, queue: 16, rotated_keys: true };
        for i in 0..4 {
            let t = AugMode::Nda.treatment(|| Some(Verdict::Rai)).unwrap();
            assert_eq!(build_sets_moco(&layout, i, t).unwrap().positives.len(), 1);
        }
    }

    #[test]
    fn mode_treatments() {
        let mut calls = 0;
        assert_eq!(AugMode::Pda.treatment(|| { calls += 1; None }).unwrap(), Some(Verdict::Rai));
        assert_eq!(AugMode::Nda.treatment(|| { calls += 1; None }).unwrap(), Some(Verdict::NonRai));
        assert_eq!(AugMode::None.treatment(|| { calls += 1; None }).unwrap(), None);
        assert_eq!(calls, 0);
        assert_eq!(AugMode::Pnda.treatment(|| None), Err(LossError::MissingVerdict));
        assert_eq!(AugMode::Pnda.treatment(|| Some(Verdict::NonRai)).unwrap(), Some(Verdict::NonRai));
        for m in AugMode::ALL {
            assert_eq!(m.as_str().parse::<AugMode>().unwrap(), m);
        }
        assert!("PNDA".parse::<AugMode>().is_err());
    }

    #[test]
    fn rotation_pairs_are_distinct_and_cover_all_choices() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut seen = HashSet::new();
        for _ in 0..200 {
            let (a, b) = draw_rotation_pair(&mut rng);
            assert_ne!(a, b);
            assert!(a != Rotation::R0 && b != Rotation::R0);
            seen.insert((a, b));
        }
        assert_eq!(seen.len(), 6);
    }

    #[test]
    fn validate_catches_overlaps() {
        assert!(PairSpec::new(0, vec![1], vec![1]).validate(3).is_err());
        assert!(PairSpec::new(0, vec![0], vec![1]).validate(3).is_err());
        assert!(PairSpec::new(0, vec![1], vec![5]).validate(3).is_err());
        assert!(PairSpec::new(0, vec![1], vec![2]).validate(3).is_ok());
    }
}
