//! Subframe-stepped MAC scheduler for one cell.
//!
//! Each UE runs one application profile and owns one uplink and one downlink
//! queue of that profile's QoS class. Uplink and downlink are scheduled on
//! separate grids of `total_rbs` resource blocks each. Every subframe:
//! arrivals are queued, GBR queues get their persistent allocation, and the
//! remaining groups go to non-GBR queues by priority, sized from the buffer.

use std::collections::HashSet;
use std::io::{Read, Write};

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::{self, generate_arrivals, AppProfile};
use crate::radio::{grant_bytes, CellConfig, Crnti, DciGrant, Direction, QosClass, RbgBitmap};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct MacQueue {
    pub qos: QosClass,
    buffered: u64,
}

impl MacQueue {
    pub fn new(qos: QosClass) -> Self {
        Self { qos, buffered: 0 }
    }

    pub fn enqueue(&mut self, bytes: u64) {
        self.buffered += bytes;
    }

    /// Removes up to `grant_bytes` and returns what was actually drained.
    pub fn drain(&mut self, grant_bytes: u64) -> u64 {
        let drained = self.buffered.min(grant_bytes);
        self.buffered -= drained;
        drained
    }
}

/// Idealised buffer status report: the exact queued byte count.
pub fn buffer_status(queue: &MacQueue) -> u64 {
    queue.buffered
}

#[derive(Debug, Clone)]
pub struct SimUe {
    pub identity: Crnti,
    pub profile: AppProfile,
    /// Indexed by [`Direction::index`].
    pub queues: [MacQueue; 2],
}

impl SimUe {
    pub fn new(identity: Crnti, profile: AppProfile) -> Self {
        let queues = [MacQueue::new(profile.qos.clone()), MacQueue::new(profile.qos.clone())];
        Self {
            identity,
            profile,
            queues,
        }
    }

    pub fn queue(&self, direction: Direction) -> &MacQueue {
        &self.queues[direction.index()]
    }

    pub fn queue_mut(&mut self, direction: Direction) -> &mut MacQueue {
        &mut self.queues[direction.index()]
    }
}

/// A profile given either by catalogue name or inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileRef {
    Named(String),
    Inline(Box<AppProfile>),
}

impl ProfileRef {
    pub fn resolve(&self) -> Result<AppProfile> {
        match self {
            ProfileRef::Named(name) => {
                profiles::find(name).ok_or_else(|| Error::Config(format!("unknown profile class {name:?}")))
            }
            ProfileRef::Inline(p) => Ok((**p).clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeSpec {
    /// Assigned from the seed when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crnti: Option<u16>,
    pub profile: ProfileRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(default)]
    pub cell: CellConfig,
    pub ues: Vec<UeSpec>,
    pub duration_subframes: u64,
    #[serde(default)]
    pub seed: u64,
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Checks every parameter and builds the UE set.
    pub fn build_ues(&self) -> Result<Vec<SimUe>> {
        self.cell.validate()?;
        if self.duration_subframes == 0 {
            return Err(Error::Config("duration_subframes must be >= 1".into()));
        }
        if self.ues.is_empty() {
            return Err(Error::Config("ues must contain at least one UE".into()));
        }
        let mut taken: HashSet<u16> = self.ues.iter().filter_map(|u| u.crnti).collect();
        if taken.len() != self.ues.iter().filter(|u| u.crnti.is_some()).count() {
            return Err(Error::Config("ues: duplicate crnti".into()));
        }
        let mut ues = Vec::with_capacity(self.ues.len());
        for (idx, spec) in self.ues.iter().enumerate() {
            let profile = spec.profile.resolve()?;
            profile.validate()?;
            let crnti = match spec.crnti {
                Some(r) if (1..=0xFFEF).contains(&r) => r,
                Some(r) => return Err(Error::Config(format!("ues[{idx}].crnti {r} outside 1..=65519"))),
                None => assign_crnti(self.seed, idx as u64, &mut taken),
            };
            ues.push(SimUe::new(Crnti(crnti), profile));
        }
        check_gbr_feasible(&self.cell, &ues)?;
        Ok(ues)
    }
}

fn assign_crnti(seed: u64, idx: u64, taken: &mut HashSet<u16>) -> u16 {
    let mut attempt = 0u64;
    loop {
        let r = (seed::derive(&[seed, 0xC0FF, idx, attempt]) % 0xFFEF + 1) as u16;
        if taken.insert(r) {
            return r;
        }
        attempt += 1;
    }
}

fn check_gbr_feasible(cell: &CellConfig, ues: &[SimUe]) -> Result<()> {
    for dir in Direction::BOTH {
        let mut demand = 0u32;
        for ue in ues.iter().filter(|u| u.profile.qos.is_gbr()) {
            let rbs = ue.profile.params(dir).persistent_rbs;
            if rbs % cell.rbg_size != 0 {
                return Err(Error::Config(format!(
                    "{} {dir} persistent_rbs {rbs} is not a multiple of rbg_size {}",
                    ue.profile.class_label, cell.rbg_size
                )));
            }
            demand += rbs;
        }
        if demand > cell.total_rbs {
            return Err(Error::Config(format!(
                "GBR persistent {dir} demand of {demand} RBs exceeds cell total_rbs {}",
                cell.total_rbs
            )));
        }
    }
    Ok(())
}

/// Allocates one subframe for both directions and drains the granted queues.
///
/// Returns grants in canonical log order.
pub fn schedule_subframe(cell: &CellConfig, ues: &mut [SimUe], subframe: u64) -> Result<Vec<DciGrant>> {
    let n = ues.len();
    let groups_total = cell.num_rbgs();
    let rbg_bytes = cell.rbg_bytes();
    let mut grants = Vec::new();

    let mut gbr: Vec<usize> = (0..n).filter(|&i| ues[i].profile.qos.is_gbr()).collect();
    gbr.sort_by_key(|&i| (ues[i].profile.qos.priority_level, i));
    // Equal-priority non-GBR queues rotate by subframe.
    let rotation = if n == 0 { 0 } else { (subframe % n as u64) as usize };
    let mut non_gbr: Vec<usize> = (0..n).filter(|&i| !ues[i].profile.qos.is_gbr()).collect();
    non_gbr.sort_by_key(|&i| (ues[i].profile.qos.priority_level, (i + n - rotation) % n));

    for dir in Direction::BOTH {
        let mut next = 0usize;
        for &i in &gbr {
            let groups = (ues[i].profile.params(dir).persistent_rbs / cell.rbg_size) as usize;
            if next + groups > groups_total {
                return Err(Error::Config(format!(
                    "GBR persistent {dir} demand exceeds cell total_rbs {}",
                    cell.total_rbs
                )));
            }
            if groups == 0 {
                continue;
            }
            let mut bitmap = RbgBitmap::new(groups_total);
            bitmap.set_range(next, groups);
            next += groups;
            let grant = DciGrant::new(subframe, ues[i].identity, dir, bitmap, cell)?;
            ues[i].queue_mut(dir).drain(grant.tbs_bytes);
            grants.push(grant);
        }
        for &i in &non_gbr {
            let remaining = groups_total - next;
            if remaining == 0 {
                break;
            }
            let buffered = buffer_status(ues[i].queue(dir));
            if buffered == 0 {
                continue;
            }
            let groups = (buffered.div_ceil(rbg_bytes) as usize).min(remaining);
            let mut bitmap = RbgBitmap::new(groups_total);
            bitmap.set_range(next, groups);
            next += groups;
            let grant = DciGrant::new(subframe, ues[i].identity, dir, bitmap, cell)?;
            ues[i].queue_mut(dir).drain(grant.tbs_bytes);
            grants.push(grant);
        }
    }
    grants.sort_by_key(DciGrant::sort_key);
    Ok(grants)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RarEvent {
    pub subframe: u64,
    pub rnti: u16,
}

/// Everything an eavesdropper on the control channel sees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DciLog {
    /// Observation span; the last subframe is `duration_subframes - 1`.
    pub duration_subframes: u64,
    pub rar_events: Vec<RarEvent>,
    pub grants: Vec<DciGrant>,
}

#[derive(Serialize, Deserialize)]
struct GrantRecord {
    subframe: u64,
    rnti: u16,
    direction: String,
    bitmap_hex: String,
    tbs_bytes: u64,
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

impl DciLog {
    /// Trims hex padding so every bitmap has the cell's group count, and
    /// checks each grant's size against its bitmap.
    pub fn fit_to_cell(mut self, cell: &CellConfig) -> Result<Self> {
        cell.validate()?;
        for g in &mut self.grants {
            g.bitmap = g.bitmap.fit_width(cell.num_rbgs())?;
            let expected = grant_bytes(&g.bitmap, cell)?;
            if expected != g.tbs_bytes {
                return Err(Error::Parse(format!(
                    "subframe {} rnti {}: tbs_bytes {} but bitmap carries {expected}",
                    g.subframe, g.rnti, g.tbs_bytes
                )));
            }
        }
        Ok(self)
    }

    /// Grant records ordered and every RNTI announced before use.
    pub fn validate(&self) -> Result<()> {
        let mut announced: std::collections::HashMap<u16, u64> = Default::default();
        for ev in &self.rar_events {
            announced.entry(ev.rnti).or_insert(ev.subframe);
        }
        let mut prev = None;
        for g in &self.grants {
            match announced.get(&g.rnti.0) {
                Some(&sf) if sf <= g.subframe => {}
                _ => {
                    return Err(Error::UnannouncedRnti {
                        subframe: g.subframe,
                        rnti: g.rnti.0,
                    })
                }
            }
            let key = g.sort_key();
            if prev.is_some_and(|p| p > key) {
                return Err(Error::Parse(format!("grants out of order at subframe {}", g.subframe)));
            }
            prev = Some(key);
        }
        Ok(())
    }

    pub fn write_grants_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv_writer(w);
        for g in &self.grants {
            wtr.serialize(GrantRecord {
                subframe: g.subframe,
                rnti: g.rnti.0,
                direction: g.direction.as_str().to_string(),
                bitmap_hex: g.bitmap.to_hex(),
                tbs_bytes: g.tbs_bytes,
            })?;
        }
        if self.grants.is_empty() {
            wtr.write_record(["subframe", "rnti", "direction", "bitmap_hex", "tbs_bytes"])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_rar_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv_writer(w);
        for ev in &self.rar_events {
            wtr.serialize(ev)?;
        }
        if self.rar_events.is_empty() {
            wtr.write_record(["subframe", "rnti"])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads the two CSV files back. Bitmaps keep their hex width (a multiple
    /// of four groups). Without `duration_subframes` the span ends at the last
    /// recorded event.
    pub fn read_csv<G: Read, R: Read>(grants: G, rar: R, duration_subframes: Option<u64>) -> Result<Self> {
        let mut rar_events = Vec::new();
        for rec in csv::Reader::from_reader(rar).deserialize() {
            rar_events.push(rec?);
        }
        let mut out = Vec::new();
        for rec in csv::Reader::from_reader(grants).deserialize() {
            let r: GrantRecord = rec?;
            out.push(DciGrant {
                subframe: r.subframe,
                rnti: Crnti(r.rnti),
                direction: r.direction.parse()?,
                bitmap: RbgBitmap::from_hex(&r.bitmap_hex)?,
                tbs_bytes: r.tbs_bytes,
            });
        }
        let last = out
            .iter()
            .map(|g| g.subframe)
            .chain(rar_events.iter().map(|e: &RarEvent| e.subframe))
            .max()
            .map_or(0, |m| m + 1);
        Ok(Self {
            duration_subframes: duration_subframes.unwrap_or(last),
            rar_events,
            grants: out,
        })
    }
}

/// The simulator's own record of one UE, used as the sniffer's oracle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UeTruth {
    pub crnti: Crnti,
    pub class_label: String,
    /// Per direction, per subframe. Indexed by [`Direction::index`].
    pub arrivals: [Vec<u64>; 2],
    /// Transport block bytes granted, padding included.
    pub granted: [Vec<u64>; 2],
    pub drained: [Vec<u64>; 2],
    pub final_buffer: [u64; 2],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    pub ues: Vec<UeTruth>,
}

impl GroundTruth {
    pub fn ue(&self, crnti: Crnti) -> Option<&UeTruth> {
        self.ues.iter().find(|u| u.crnti == crnti)
    }

    /// CSV `subframe,rnti,direction,arrival_bytes,granted_bytes,drained_bytes`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv_writer(w);
        wtr.write_record(["subframe", "rnti", "direction", "arrival_bytes", "granted_bytes", "drained_bytes"])?;
        for ue in &self.ues {
            for dir in Direction::BOTH {
                let d = dir.index();
                for sf in 0..ue.arrivals[d].len() {
                    wtr.write_record([
                        sf.to_string(),
                        ue.crnti.to_string(),
                        dir.to_string(),
                        ue.arrivals[d][sf].to_string(),
                        ue.granted[d][sf].to_string(),
                        ue.drained[d][sf].to_string(),
                    ])?;
                }
            }
        }
        wtr.flush()?;
        Ok(())
    }

    /// CSV `rnti,class_label`.
    pub fn write_labels_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv_writer(w);
        wtr.write_record(["rnti", "class_label"])?;
        for ue in &self.ues {
            wtr.write_record([ue.crnti.to_string(), ue.class_label.clone()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Runs the whole configuration. Identical configs give identical outputs.
pub fn run_simulation(config: &SimConfig) -> Result<(DciLog, GroundTruth)> {
    let mut ues = config.build_ues()?;
    let duration = config.duration_subframes;
    let len = duration as usize;
    let mut rngs: Vec<[ChaCha8Rng; 2]> = (0..ues.len() as u64)
        .map(|i| Direction::BOTH.map(|d| seed::rng(seed::derive(&[config.seed, i, d.index() as u64]))))
        .collect();
    let mut truth: Vec<UeTruth> = ues
        .iter()
        .map(|u| UeTruth {
            crnti: u.identity,
            class_label: u.profile.class_label.clone(),
            arrivals: [vec![0; len], vec![0; len]],
            granted: [vec![0; len], vec![0; len]],
            drained: [vec![0; len], vec![0; len]],
            final_buffer: [0, 0],
        })
        .collect();
    let rar_events = ues
        .iter()
        .map(|u| RarEvent {
            subframe: 0,
            rnti: u.identity.0,
        })
        .collect();

    let mut grants = Vec::new();
    let mut before = vec![[0u64; 2]; ues.len()];
    for sf in 0..duration {
        let t = sf as usize;
        for (i, ue) in ues.iter_mut().enumerate() {
            for dir in Direction::BOTH {
                let d = dir.index();
                let bytes = generate_arrivals(&ue.profile, dir, sf, &mut rngs[i][d]);
                ue.queue_mut(dir).enqueue(bytes);
                truth[i].arrivals[d][t] = bytes;
                before[i][d] = buffer_status(ue.queue(dir));
            }
        }
        let step = schedule_subframe(&config.cell, &mut ues, sf)?;
        for g in &step {
            let i = ues.iter().position(|u| u.identity == g.rnti).expect("grant for known UE");
            truth[i].granted[g.direction.index()][t] += g.tbs_bytes;
        }
        for (i, ue) in ues.iter().enumerate() {
            for dir in Direction::BOTH {
                let d = dir.index();
                truth[i].drained[d][t] = before[i][d] - buffer_status(ue.queue(dir));
            }
        }
        grants.extend(step);
    }
    for (i, ue) in ues.iter().enumerate() {
        truth[i].final_buffer = Direction::BOTH.map(|d| buffer_status(ue.queue(d)));
    }

    Ok((
        DciLog {
            duration_subframes: duration,
            rar_events,
            grants,
        },
        GroundTruth { ues: truth },
    ))
}
