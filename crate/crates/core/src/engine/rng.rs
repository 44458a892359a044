//! Keyed random streams.
//!
//! Every random quantity in a run is drawn from a stream addressed by
//! `(master seed, run index, purpose, entity, sub-stream)`. The address is
//! the ChaCha key and stream id, so a stream's contents never depend on how
//! many numbers other streams consumed or in which order events executed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    /// Trigger times of one (vessel, category) renewal process.
    DemandTiming = 1,
    /// Inclusion draws of one (vessel, category).
    DemandContents = 2,
    /// Creation-to-approval and approval-to-handling delays of one requisition.
    HandlingDelay = 3,
    /// RFQ response delay of one (requisition, supplier).
    RfqDelay = 4,
    /// Handling-to-order delay of one requisition.
    PoDelay = 5,
    /// Spot price noise of one (requisition, supplier) quote.
    SpotNoise = 6,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngPlan {
    pub master_seed: u64,
}

impl RngPlan {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    pub fn stream(&self, run: u64, purpose: Purpose, entity: u64, sub: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&self.master_seed.to_le_bytes());
        key[8..16].copy_from_slice(&run.to_le_bytes());
        key[16..24].copy_from_slice(&(purpose as u64).to_le_bytes());
        key[24..32].copy_from_slice(&entity.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(sub);
        rng
    }
}

/// Entity id of a (vessel, category) pair.
pub fn pair_entity(vessel: u32, category: u32) -> u64 {
    (u64::from(vessel) << 32) | u64::from(category)
}

/// Entity id of the `seq`-th trigger of a (vessel, category) pair.
///
/// Requisitions are keyed by where they came from rather than by their
/// position in the run, so the same requisition draws the same delays and
/// prices under every policy.
pub fn requisition_entity(vessel: u32, category: u32, seq: u32) -> u64 {
    debug_assert!(vessel < (1 << 20) && category < (1 << 12));
    (u64::from(vessel) << 44) | (u64::from(category) << 32) | u64::from(seq)
}
