use std::hash::{Hash, Hasher};

use crate::compute::{TaskId, TaskReceipt};
use crate::engine::{splitmix64, SimTime};
use crate::metrics::TrafficClass;
use crate::sync::{InterSyncRecord, IntraSyncRecord};

use super::Name;

/// Face identifier local to one node. Face 0 is the local application.
pub type FaceId = u16;
pub const LOCAL_FACE: FaceId = 0;

/// Interest application parameters. For task Interests these carry the
/// completion deadline so that the name stays input-addressed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct AppParams {
    pub deadline: SimTime,
    pub input_hash: u64,
    pub input_size: u32,
    /// Input travels inside the parameters (small inputs only).
    pub inline_input: bool,
}

impl AppParams {
    pub fn digest(&self) -> u64 {
        let mut h = FoldHasher(0x51_7cc1_b727_220a);
        self.hash(&mut h);
        h.finish()
    }
}

/// Small deterministic hasher so digests do not depend on std's SipHash keys.
struct FoldHasher(u64);

impl Hasher for FoldHasher {
    fn finish(&self) -> u64 {
        splitmix64(self.0)
    }
    fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 = splitmix64(self.0 ^ u64::from(*b));
        }
    }
    fn write_u64(&mut self, i: u64) {
        self.0 = splitmix64(self.0 ^ i);
    }
}

/// Simulation-side payloads that ride inside Interest parameters.
#[derive(Clone, Debug, Default)]
pub enum Payload {
    #[default]
    None,
    Intra(Box<IntraSyncRecord>),
    Inter(Box<InterSyncRecord>),
}

#[derive(Clone, Debug)]
pub struct Interest {
    pub name: Name,
    pub forwarding_hint: Option<Name>,
    pub params: AppParams,
    pub nonce: u64,
    pub wire_size: u32,
    pub lifetime: SimTime,
    pub class: TrafficClass,
    /// Task this Interest belongs to (bookkeeping only, not part of any key).
    pub task: Option<TaskId>,
    /// One-way link delay accumulated since the consumer sent it.
    pub elapsed_path: SimTime,
    pub payload: Payload,
}

impl Interest {
    /// PIT selector: application parameters plus the forwarding hint, so a
    /// task re-aimed at another node is pending apart from its earlier pass.
    pub fn selector_digest(&self) -> u64 {
        let mut h = FoldHasher(self.params.digest());
        self.forwarding_hint.hash(&mut h);
        h.finish()
    }

    pub fn pit_key(&self) -> (Name, u64) {
        (self.name.clone(), self.selector_digest())
    }
}

#[derive(Clone, Debug)]
pub struct Data {
    pub name: Name,
    pub payload_size: u32,
    pub wire_size: u32,
    /// Stand-in for a producer signature.
    pub signed: bool,
    pub freshness: SimTime,
    pub class: TrafficClass,
    pub receipt: Option<TaskReceipt>,
}

/// `/<service>/<input-hash>` with the hash as 16 lowercase hex digits.
pub fn task_name(service: &str, input_hash: u64) -> Name {
    Name::from_components([service.to_string(), format!("{input_hash:016x}")])
        .expect("valid task name")
}
