//! Core programs and the benchmark suite: per-primitive microbenchmarks and
//! lock-based data structures over a shared-state model.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::is_client;
use crate::error::ConfigError;
use crate::messages::Primitive;
use crate::topology::{CoreId, SystemConfig};

/// Offset of the synchronization-variable region inside each unit.
pub const SYNC_REGION: u64 = 0x1000;
/// Stride between synchronization variables. Keeping variables 8 B apart
/// spreads them over the indexing counters.
pub const SYNC_STRIDE: u64 = 8;
/// Offset of the data region inside each unit.
pub const DATA_REGION: u64 = 0x1000_0000;
pub const NODE_BYTES: u64 = 64;
const REGION_BYTES: u64 = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierScope {
    WithinUnit,
    AcrossUnits,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BodyOp {
    StackPush { value: u64 },
    QueuePop,
    ArrayLookup { key: u64 },
    HashLookup { key: u64 },
    ListFound { key: u64, found: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Step {
    Compute(u64),
    Mem { addr: u64, write: bool },
    Lock(u64),
    Unlock(u64),
    Barrier { addr: u64, participants: u64, scope: BarrierScope },
    SemWait { addr: u64, initial: u64 },
    SemPost { addr: u64, initial: u64 },
    CondWait { cond: u64, lock: u64 },
    CondSignal { cond: u64 },
    CondBroadcast { cond: u64 },
    /// Monitor wait, executed with `lock` held: consume a token, or sleep on
    /// `cond` and re-check after waking.
    AwaitToken { cond: u64, lock: u64, token: u64 },
    /// Produce a token, with its lock held.
    AddToken { token: u64 },
    Body(BodyOp),
    /// One workload operation finished.
    OpDone,
}

impl Step {
    pub fn is_sync(&self) -> bool {
        !matches!(self, Step::Compute(_) | Step::Mem { .. } | Step::Body(_) | Step::OpDone | Step::AddToken { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DsKind {
    Stack,
    Queue,
    ArrayMap,
    HashTable,
    LinkedList,
}

impl DsKind {
    pub const ALL: [DsKind; 5] = [DsKind::Stack, DsKind::Queue, DsKind::ArrayMap, DsKind::HashTable, DsKind::LinkedList];

    pub fn name(self) -> &'static str {
        match self {
            DsKind::Stack => "stack",
            DsKind::Queue => "queue",
            DsKind::ArrayMap => "array_map",
            DsKind::HashTable => "hash_table",
            DsKind::LinkedList => "linked_list",
        }
    }
}

/// Data-structure sizing. Defaults are desk scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DsParams {
    pub ops_per_core: u64,
    /// Instructions between consecutive operations.
    pub compute: u64,
    pub initial_size: u64,
    pub buckets: u64,
    pub chain_len: u64,
    /// Elements read per array_map critical section.
    pub array_cs_reads: u64,
    pub list_len: u64,
}

impl Default for DsParams {
    fn default() -> Self {
        DsParams {
            ops_per_core: 50,
            compute: 100,
            initial_size: 256,
            buckets: 64,
            chain_len: 2,
            array_cs_reads: 10,
            list_len: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WorkloadSpec {
    Microbench {
        primitive: Primitive,
        interval: u64,
        iterations: u64,
    },
    DataStructure {
        structure: DsKind,
        #[serde(default)]
        params: DsParams,
    },
}

pub const DEFAULT_ITERATIONS: u64 = 50;

impl FromStr for WorkloadSpec {
    type Err = ConfigError;

    /// `microbench:<primitive>:<interval>[:<iterations>]` or
    /// `<structure>[:<ops_per_core>]`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ConfigError::Invalid(format!("bad workload `{s}`"));
        let num = |p: &str| p.parse::<u64>().map_err(|_| bad());
        let parts: Vec<&str> = s.split(':').collect();
        if parts[0] == "microbench" {
            let primitive = match parts.get(1).copied() {
                Some("lock") => Primitive::Lock,
                Some("barrier") => Primitive::Barrier,
                Some("semaphore") | Some("sem") => Primitive::Semaphore,
                Some("condvar") | Some("cond") => Primitive::CondVar,
                _ => return Err(bad()),
            };
            let interval = parts.get(2).map(|p| num(p)).transpose()?.unwrap_or(200);
            let iterations = parts.get(3).map(|p| num(p)).transpose()?.unwrap_or(DEFAULT_ITERATIONS);
            if parts.len() > 4 {
                return Err(bad());
            }
            return Ok(WorkloadSpec::Microbench {
                primitive,
                interval,
                iterations,
            });
        }
        let structure = DsKind::ALL
            .into_iter()
            .find(|k| k.name() == parts[0])
            .ok_or_else(|| ConfigError::Invalid(format!("unknown workload `{}`", parts[0])))?;
        let mut params = DsParams::default();
        if let Some(p) = parts.get(1) {
            params.ops_per_core = num(p)?;
        }
        if parts.len() > 2 {
            return Err(bad());
        }
        Ok(WorkloadSpec::DataStructure { structure, params })
    }
}

impl fmt::Display for WorkloadSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WorkloadSpec::Microbench {
                primitive,
                interval,
                iterations,
            } => {
                let p = match primitive {
                    Primitive::Lock => "lock",
                    Primitive::Barrier => "barrier",
                    Primitive::Semaphore => "semaphore",
                    Primitive::CondVar => "condvar",
                };
                write!(f, "microbench:{p}:{interval}:{iterations}")
            }
            WorkloadSpec::DataStructure { structure, params } => {
                write!(f, "{}:{}", structure.name(), params.ops_per_core)
            }
        }
    }
}

/// Hands out addresses in each unit's sync and data regions.
#[derive(Debug, Clone)]
pub struct Allocator {
    base: Vec<u64>,
    next_sync: Vec<u64>,
}

impl Allocator {
    pub fn new(cfg: &SystemConfig) -> Self {
        Allocator {
            base: (0..cfg.num_units).map(|u| cfg.unit_base(u)).collect(),
            next_sync: vec![0; cfg.num_units],
        }
    }

    pub fn sync_var(&mut self, unit: usize) -> u64 {
        let k = self.next_sync[unit];
        self.next_sync[unit] += 1;
        self.base[unit] + SYNC_REGION + k * SYNC_STRIDE
    }

    /// Address of line `index` of data region `region`, striped over
    /// units.
    pub fn node(&self, region: u64, index: u64) -> u64 {
        let units = self.base.len() as u64;
        self.node_in(region, (index % units) as usize, index / units)
    }

    /// Line `index` of data region `region`, pinned to `unit`.
    pub fn node_in(&self, region: u64, unit: usize, index: u64) -> u64 {
        self.base[unit] + DATA_REGION + region * REGION_BYTES + index * NODE_BYTES
    }
}

/// A memory access produced by a data-structure operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Access {
    pub addr: u64,
    pub write: bool,
}

/// Shared data the workload operates on. Operations are applied when a core
/// executes them, inside its critical section, so the final contents depend
/// only on what was executed, not on the synchronization scheme.
#[derive(Debug, Clone)]
pub struct SharedState {
    alloc: Allocator,
    units: u64,
    top: u64,
    head: u64,
    stack: Vec<u64>,
    queue: VecDeque<u64>,
    popped: Vec<u64>,
    array_size: u64,
    array_cs_reads: u64,
    buckets: u64,
    chain_len: u64,
    hash_keys: u64,
    /// (core global id, key, found) per lookup.
    lookups: Vec<(usize, u64, bool)>,
    tokens: BTreeMap<u64, u64>,
    token_ops: u64,
}

pub fn hash_bucket(key: u64, buckets: u64) -> u64 {
    (key.wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 32) % buckets
}

impl SharedState {
    fn new(cfg: &SystemConfig) -> Self {
        let alloc = Allocator::new(cfg);
        SharedState {
            top: alloc.node_in(0, 0, 0),
            head: alloc.node_in(0, 0, 1),
            alloc,
            units: cfg.num_units as u64,
            stack: Vec::new(),
            queue: VecDeque::new(),
            popped: Vec::new(),
            array_size: 0,
            array_cs_reads: 0,
            buckets: 1,
            chain_len: 0,
            hash_keys: 0,
            lookups: Vec::new(),
            tokens: BTreeMap::new(),
            token_ops: 0,
        }
    }

    fn read(addr: u64) -> Access {
        Access { addr, write: false }
    }

    fn write(addr: u64) -> Access {
        Access { addr, write: true }
    }

    /// Applies `op` for `core` and returns the memory accesses it makes.
    pub fn apply(&mut self, core: usize, op: &BodyOp) -> Vec<Access> {
        match *op {
            BodyOp::StackPush { value } => {
                self.stack.push(value);
                vec![Self::read(self.top), Self::write(self.alloc.node(1, value)), Self::write(self.top)]
            }
            BodyOp::QueuePop => {
                let mut acc = vec![Self::read(self.head)];
                if let Some(v) = self.queue.pop_front() {
                    self.popped.push(v);
                    acc.push(Self::read(self.alloc.node(2, v)));
                    acc.push(Self::write(self.head));
                }
                acc
            }
            BodyOp::ArrayLookup { key } => {
                self.lookups.push((core, key, key < self.array_size));
                (0..self.array_cs_reads)
                    .map(|j| Self::read(self.alloc.node(3, (key + j) % self.array_size.max(1))))
                    .collect()
            }
            BodyOp::HashLookup { key } => {
                let b = hash_bucket(key, self.buckets);
                self.lookups.push((core, key, key < self.hash_keys));
                let unit = (b % self.units) as usize;
                let slot = b / self.units;
                (0..=self.chain_len)
                    .map(|j| Self::read(self.alloc.node_in(4, unit, slot * (self.chain_len + 1) + j)))
                    .collect()
            }
            BodyOp::ListFound { key, found } => {
                self.lookups.push((core, key, found));
                Vec::new()
            }
        }
    }

    pub fn tokens(&self, token: u64) -> u64 {
        self.tokens.get(&token).copied().unwrap_or(0)
    }

    pub fn add_token(&mut self, token: u64) {
        *self.tokens.entry(token).or_default() += 1;
        self.token_ops += 1;
    }

    pub fn take_token(&mut self, token: u64) -> bool {
        match self.tokens.get_mut(&token) {
            Some(n) if *n > 0 => {
                *n -= 1;
                self.token_ops += 1;
                true
            }
            _ => false,
        }
    }

    /// Order-independent digest of the final shared state.
    pub fn digest(&self) -> String {
        let mut stack = self.stack.clone();
        stack.sort_unstable();
        let mut popped = self.popped.clone();
        popped.sort_unstable();
        let mut lookups = self.lookups.clone();
        lookups.sort_unstable();
        let mut h = Sha256::new();
        let mut put = |tag: &str, xs: &mut dyn Iterator<Item = u64>| {
            h.update(tag.as_bytes());
            for x in xs {
                h.update(x.to_le_bytes());
            }
        };
        put("stack", &mut stack.into_iter());
        put("queue", &mut self.queue.iter().copied());
        put("popped", &mut popped.into_iter());
        put(
            "lookups",
            &mut lookups.into_iter().flat_map(|(c, k, f)| [c as u64, k, f as u64]),
        );
        put("tokens", &mut self.tokens.iter().flat_map(|(&a, &n)| [a, n]));
        put("token_ops", &mut std::iter::once(self.token_ops));
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn stack_len(&self) -> usize {
        self.stack.len()
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn popped(&self) -> usize {
        self.popped.len()
    }

    pub fn lookups(&self) -> usize {
        self.lookups.len()
    }
}

/// Expected synchronization operation counts, for termination checks.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Expected {
    pub lock_acquires: u64,
    pub barrier_waits: u64,
    pub sem_waits: u64,
    pub cond_waits_max: u64,
    pub ops: u64,
}

#[derive(Debug, Clone)]
pub struct Workload {
    pub spec: WorkloadSpec,
    /// Indexed by global core id; non-client cores have empty programs.
    pub programs: Vec<Vec<Step>>,
    pub shared: SharedState,
    pub expected: Expected,
}

pub fn core_rng(seed: u64, core: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(core as u64);
    rng
}

fn clients(cfg: &SystemConfig) -> Vec<CoreId> {
    (0..cfg.num_units)
        .flat_map(|u| (0..cfg.cores_per_unit).map(move |l| CoreId::new(u, l)))
        .filter(|c| is_client(*c, cfg))
        .collect()
}

pub fn build(cfg: &SystemConfig, spec: &WorkloadSpec, seed: u64) -> Result<Workload, ConfigError> {
    match spec {
        WorkloadSpec::Microbench {
            primitive,
            interval,
            iterations,
        } => Ok(microbench(cfg, *primitive, *interval, *iterations)),
        WorkloadSpec::DataStructure { structure, params } => build_data_structure(cfg, *structure, params, seed),
    }
}

/// Every client loops `iterations` times over compute(interval) followed by
/// one operation on a single shared variable homed at unit 0. For
/// semaphores and condition variables the first half of the clients wait
/// and the rest post/signal (an odd client goes to the posting side).
pub fn microbench(cfg: &SystemConfig, primitive: Primitive, interval: u64, iterations: u64) -> Workload {
    let mut alloc = Allocator::new(cfg);
    let var = alloc.sync_var(0);
    let lock = alloc.sync_var(0);
    let token = alloc.node_in(5, 0, 0);
    let cs = clients(cfg);
    let n = cs.len() as u64;
    let waiters = cs.len() / 2;
    let mut programs = vec![Vec::new(); cfg.total_cores()];
    let mut expected = Expected::default();
    for (i, c) in cs.iter().enumerate() {
        let p = &mut programs[c.global(cfg)];
        let waiter = i < waiters;
        for _ in 0..iterations {
            p.push(Step::Compute(interval));
            match primitive {
                Primitive::Lock => {
                    p.extend([Step::Lock(var), Step::Unlock(var)]);
                    expected.lock_acquires += 1;
                }
                Primitive::Barrier => {
                    p.push(Step::Barrier {
                        addr: var,
                        participants: n,
                        scope: BarrierScope::AcrossUnits,
                    });
                    expected.barrier_waits += 1;
                }
                Primitive::Semaphore => {
                    if waiter {
                        p.push(Step::SemWait { addr: var, initial: 0 });
                        expected.sem_waits += 1;
                    } else {
                        p.push(Step::SemPost { addr: var, initial: 0 });
                    }
                }
                Primitive::CondVar => {
                    if waiter {
                        p.extend([Step::Lock(lock), Step::AwaitToken { cond: var, lock, token }, Step::Unlock(lock)]);
                        expected.cond_waits_max += 1;
                    } else {
                        p.extend([
                            Step::Lock(lock),
                            Step::AddToken { token },
                            Step::CondSignal { cond: var },
                            Step::Unlock(lock),
                        ]);
                    }
                    expected.lock_acquires += 1;
                }
            }
            p.push(Step::OpDone);
            expected.ops += 1;
        }
    }
    Workload {
        spec: WorkloadSpec::Microbench {
            primitive,
            interval,
            iterations,
        },
        programs,
        shared: SharedState::new(cfg),
        expected,
    }
}

/// Builds the programs of one data-structure benchmark. Every client runs
/// `ops_per_core` operations separated by `compute` instructions.
pub fn build_data_structure(cfg: &SystemConfig, kind: DsKind, params: &DsParams, seed: u64) -> Result<Workload, ConfigError> {
    if params.ops_per_core == 0 && params.initial_size == 0 {
        return Err(ConfigError::Invalid("empty data-structure workload".into()));
    }
    if params.buckets == 0 || params.list_len == 0 || params.initial_size == 0 {
        return Err(ConfigError::Invalid("buckets, list_len and initial_size must be positive".into()));
    }
    let mut alloc = Allocator::new(cfg);
    let mut shared = SharedState::new(cfg);
    let cs = clients(cfg);
    let total_ops = params.ops_per_core * cs.len() as u64;
    let mut programs = vec![Vec::new(); cfg.total_cores()];
    let mut expected = Expected::default();

    let coarse = alloc.sync_var(0);
    let bucket_locks: Vec<u64> = (0..params.buckets)
        .map(|b| alloc.sync_var((b % cfg.num_units as u64) as usize))
        .collect();
    let node_locks: Vec<u64> = (0..params.list_len)
        .map(|i| alloc.sync_var((i % cfg.num_units as u64) as usize))
        .collect();
    let list_nodes: Vec<u64> = (0..params.list_len).map(|i| alloc.node(6, i)).collect();

    match kind {
        DsKind::Stack => shared.stack = (0..params.initial_size).collect(),
        DsKind::Queue => shared.queue = (0..params.initial_size + total_ops).collect(),
        DsKind::ArrayMap => {
            shared.array_size = params.initial_size;
            shared.array_cs_reads = params.array_cs_reads;
        }
        DsKind::HashTable => {
            shared.buckets = params.buckets;
            shared.chain_len = params.chain_len;
            shared.hash_keys = params.initial_size;
        }
        DsKind::LinkedList => {}
    }

    for c in &cs {
        let g = c.global(cfg);
        let mut rng = core_rng(seed, g);
        let p = &mut programs[g];
        for i in 0..params.ops_per_core {
            p.push(Step::Compute(params.compute));
            match kind {
                DsKind::Stack => {
                    let value = params.initial_size + g as u64 * params.ops_per_core + i;
                    p.extend([Step::Lock(coarse), Step::Body(BodyOp::StackPush { value }), Step::Unlock(coarse)]);
                    expected.lock_acquires += 1;
                }
                DsKind::Queue => {
                    p.extend([Step::Lock(coarse), Step::Body(BodyOp::QueuePop), Step::Unlock(coarse)]);
                    expected.lock_acquires += 1;
                }
                DsKind::ArrayMap => {
                    let key = rng.gen_range(0..2 * params.initial_size);
                    p.extend([Step::Lock(coarse), Step::Body(BodyOp::ArrayLookup { key }), Step::Unlock(coarse)]);
                    expected.lock_acquires += 1;
                }
                DsKind::HashTable => {
                    let key = rng.gen_range(0..2 * params.initial_size);
                    let l = bucket_locks[hash_bucket(key, params.buckets) as usize];
                    p.extend([Step::Lock(l), Step::Body(BodyOp::HashLookup { key }), Step::Unlock(l)]);
                    expected.lock_acquires += 1;
                }
                DsKind::LinkedList => {
                    // Sorted list holding the even keys 0, 2, ..; hand-over-hand
                    // traversal up to the key's position.
                    let key = rng.gen_range(0..2 * params.list_len);
                    let target = ((key / 2) as usize).min(params.list_len as usize - 1);
                    p.push(Step::Lock(node_locks[0]));
                    p.push(Step::Mem {
                        addr: list_nodes[0],
                        write: false,
                    });
                    for j in 1..=target {
                        p.push(Step::Lock(node_locks[j]));
                        p.push(Step::Unlock(node_locks[j - 1]));
                        p.push(Step::Mem {
                            addr: list_nodes[j],
                            write: false,
                        });
                    }
                    let found = key % 2 == 0 && key / 2 < params.list_len;
                    p.push(Step::Body(BodyOp::ListFound { key, found }));
                    p.push(Step::Unlock(node_locks[target]));
                    expected.lock_acquires += target as u64 + 1;
                }
            }
            p.push(Step::OpDone);
            expected.ops += 1;
        }
    }
    Ok(Workload {
        spec: WorkloadSpec::DataStructure {
            structure: kind,
            params: params.clone(),
        },
        programs,
        shared,
        expected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::Scheme;

    fn cfg() -> SystemConfig {
        SystemConfig::with_shape(4, 16, Scheme::Syncron)
    }

    #[test]
    fn parse_workloads() {
        let w: WorkloadSpec = "microbench:lock:200".parse().unwrap();
        assert_eq!(
            w,
            WorkloadSpec::Microbench {
                primitive: Primitive::Lock,
                interval: 200,
                iterations: DEFAULT_ITERATIONS
            }
        );
        assert_eq!(w.to_string().parse::<WorkloadSpec>().unwrap(), w);
        let q: WorkloadSpec = "queue".parse().unwrap();
        assert!(matches!(q, WorkloadSpec::DataStructure { structure: DsKind::Queue, .. }));
        let l: WorkloadSpec = "linked_list:7".parse().unwrap();
        assert_eq!(l.to_string(), "linked_list:7");
        assert!("priority_queue".parse::<WorkloadSpec>().is_err());
        assert!("microbench:spin:1".parse::<WorkloadSpec>().is_err());
    }

    #[test]
    fn lock_microbench_counts() {
        let w = microbench(&cfg(), Primitive::Lock, 200, 10);
        assert_eq!(w.expected.lock_acquires, 600);
        assert_eq!(w.programs.iter().filter(|p| !p.is_empty()).count(), 60);
        assert!(w.programs[15].is_empty());
    }

    #[test]
    fn odd_client_count_goes_to_posters() {
        let c = SystemConfig {
            clients_per_unit: 3,
            ..SystemConfig::with_shape(1, 4, Scheme::Syncron)
        };
        let w = microbench(&c, Primitive::Semaphore, 0, 4);
        let posters = w
            .programs
            .iter()
            .filter(|p| p.iter().any(|s| matches!(s, Step::SemPost { .. })))
            .count();
        assert_eq!(posters, 2);
        assert_eq!(w.expected.sem_waits, 4);
    }

    #[test]
    fn programs_are_pure_in_seed() {
        let a = build_data_structure(&cfg(), DsKind::HashTable, &DsParams::default(), 3).unwrap();
        let b = build_data_structure(&cfg(), DsKind::HashTable, &DsParams::default(), 3).unwrap();
        let c = build_data_structure(&cfg(), DsKind::HashTable, &DsParams::default(), 4).unwrap();
        assert_eq!(a.programs, b.programs);
        assert_ne!(a.programs, c.programs);
    }

    #[test]
    fn stack_conservation_when_applied() {
        let cfg = cfg();
        let params = DsParams {
            ops_per_core: 100,
            ..DsParams::default()
        };
        let mut w = build_data_structure(&cfg, DsKind::Stack, &params, 1).unwrap();
        for (g, p) in w.programs.iter().enumerate() {
            for s in p {
                if let Step::Body(op) = s {
                    w.shared.apply(g, op);
                }
            }
        }
        assert_eq!(w.shared.stack_len() as u64, params.initial_size + 6000);
    }

    #[test]
    fn hash_buckets_spread_over_units() {
        // 1000 keys into 64 buckets striped over 4 units: each unit's share
        // should be near a quarter.
        let mut per_unit = [0u32; 4];
        for k in 0..1000 {
            per_unit[(hash_bucket(k, 64) % 4) as usize] += 1;
        }
        assert!(per_unit.iter().all(|&n| (200..=300).contains(&n)), "{per_unit:?}");
    }

    #[test]
    fn linked_list_holds_two_locks() {
        let w = build_data_structure(&cfg(), DsKind::LinkedList, &DsParams::default(), 9).unwrap();
        let p = w.programs.iter().find(|p| !p.is_empty()).unwrap();
        let mut held = 0i32;
        let mut max = 0;
        for s in p {
            match s {
                Step::Lock(_) => held += 1,
                Step::Unlock(_) => held -= 1,
                _ => {}
            }
            max = max.max(held);
        }
        assert_eq!(held, 0);
        assert_eq!(max, 2);
    }

    #[test]
    fn digest_is_order_independent() {
        let cfg = cfg();
        let mut a = SharedState::new(&cfg);
        let mut b = SharedState::new(&cfg);
        a.apply(0, &BodyOp::StackPush { value: 1 });
        a.apply(1, &BodyOp::StackPush { value: 2 });
        b.apply(1, &BodyOp::StackPush { value: 2 });
        b.apply(0, &BodyOp::StackPush { value: 1 });
        assert_eq!(a.digest(), b.digest());
        b.apply(0, &BodyOp::StackPush { value: 3 });
        assert_ne!(a.digest(), b.digest());
    }
}
