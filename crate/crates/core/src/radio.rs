//! Value types for the radio abstraction shared by the simulator and the sniffer.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest bitmap the fixed-size representation supports.
pub const MAX_RBGS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ResourceType {
    #[serde(rename = "GBR")]
    Gbr,
    #[serde(rename = "NonGBR")]
    NonGbr,
}

/// QoS class attributes carried by a MAC queue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QosClass {
    pub qci_id: u8,
    pub resource_type: ResourceType,
    /// Lower value is served first.
    pub priority_level: u8,
    pub packet_delay_budget_ms: u32,
    pub packet_error_rate: f64,
    pub max_data_burst: u32,
}

impl QosClass {
    pub fn new(
        qci_id: u8,
        resource_type: ResourceType,
        priority_level: u8,
        packet_delay_budget_ms: u32,
        packet_error_rate: f64,
        max_data_burst: u32,
    ) -> Result<Self> {
        let q = Self {
            qci_id,
            resource_type,
            priority_level,
            packet_delay_budget_ms,
            packet_error_rate,
            max_data_burst,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=26).contains(&self.qci_id) {
            return Err(Error::Config(format!("qci_id {} outside 1..=26", self.qci_id)));
        }
        if !(0.0..=1.0).contains(&self.packet_error_rate) {
            return Err(Error::Config(format!(
                "packet_error_rate {} outside [0,1]",
                self.packet_error_rate
            )));
        }
        if self.max_data_burst == 0 {
            return Err(Error::Config("max_data_burst must be positive".into()));
        }
        Ok(())
    }

    pub fn is_gbr(&self) -> bool {
        self.resource_type == ResourceType::Gbr
    }

    /// Conversational voice.
    pub fn conversational_voice() -> Self {
        Self::known(1, ResourceType::Gbr, 2, 100, 1e-2, 1_500)
    }

    /// Conversational (live) video.
    pub fn conversational_video() -> Self {
        Self::known(2, ResourceType::Gbr, 4, 150, 1e-3, 3_000)
    }

    /// Buffered video streaming.
    pub fn buffered_streaming() -> Self {
        Self::known(6, ResourceType::NonGbr, 6, 300, 1e-6, 65_535)
    }

    /// Live streaming.
    pub fn live_streaming() -> Self {
        Self::known(7, ResourceType::NonGbr, 7, 100, 1e-3, 65_535)
    }

    /// Web browsing and other TCP traffic.
    pub fn browsing() -> Self {
        Self::known(8, ResourceType::NonGbr, 8, 300, 1e-6, 65_535)
    }

    fn known(qci: u8, rt: ResourceType, prio: u8, pdb: u32, per: f64, mdb: u32) -> Self {
        Self {
            qci_id: qci,
            resource_type: rt,
            priority_level: prio,
            packet_delay_budget_ms: pdb,
            packet_error_rate: per,
            max_data_burst: mdb,
        }
    }
}

/// Cell RNTI. Announced in plaintext by the random access response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Crnti(pub u16);

impl fmt::Display for Crnti {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "UL")]
    Uplink,
    #[serde(rename = "DL")]
    Downlink,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Uplink, Direction::Downlink];

    /// DCI type carrying grants for this direction (0 uplink, 1 downlink).
    pub fn dci_type(self) -> u8 {
        match self {
            Direction::Uplink => 0,
            Direction::Downlink => 1,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Uplink => "UL",
            Direction::Downlink => "DL",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "UL" => Ok(Direction::Uplink),
            "DL" => Ok(Direction::Downlink),
            other => Err(Error::Parse(format!("direction must be UL or DL, got {other:?}"))),
        }
    }
}

/// Static cell parameters. One MCS for every grant, so bytes are linear in RBs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CellConfig {
    pub total_rbs: u32,
    pub rbg_size: u32,
    pub tbs_per_rb: u32,
    pub subframe_ms: u32,
}

impl Default for CellConfig {
    fn default() -> Self {
        Self {
            total_rbs: 100,
            rbg_size: 4,
            tbs_per_rb: 100,
            subframe_ms: 1,
        }
    }
}

impl CellConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("total_rbs", self.total_rbs),
            ("rbg_size", self.rbg_size),
            ("tbs_per_rb", self.tbs_per_rb),
            ("subframe_ms", self.subframe_ms),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("cell.{name} must be positive")));
            }
        }
        if !self.total_rbs.is_multiple_of(self.rbg_size) {
            return Err(Error::Config(format!(
                "cell.total_rbs {} not divisible by rbg_size {}",
                self.total_rbs, self.rbg_size
            )));
        }
        if self.num_rbgs() > MAX_RBGS {
            return Err(Error::Config(format!(
                "cell has {} resource block groups, at most {MAX_RBGS} supported",
                self.num_rbgs()
            )));
        }
        Ok(())
    }

    pub fn num_rbgs(&self) -> usize {
        (self.total_rbs / self.rbg_size) as usize
    }

    pub fn rbg_bytes(&self) -> u64 {
        u64::from(self.rbg_size) * u64::from(self.tbs_per_rb)
    }

    /// An empty bitmap sized for this cell.
    pub fn empty_bitmap(&self) -> RbgBitmap {
        RbgBitmap::new(self.num_rbgs())
    }
}

/// Resource block group allocation bitmap; bit `i` set means group `i` is granted.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct RbgBitmap {
    words: [u64; MAX_RBGS / 64],
    width: u16,
}

impl RbgBitmap {
    /// # Panics
    /// If `width` exceeds [`MAX_RBGS`].
    pub fn new(width: usize) -> Self {
        assert!(width <= MAX_RBGS, "bitmap width {width} exceeds {MAX_RBGS}");
        Self {
            words: [0; MAX_RBGS / 64],
            width: width as u16,
        }
    }

    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        if bits.len() > MAX_RBGS {
            return Err(Error::Config(format!("bitmap width {} exceeds {MAX_RBGS}", bits.len())));
        }
        let mut b = Self::new(bits.len());
        for (i, &set) in bits.iter().enumerate() {
            if set {
                b.set(i);
            }
        }
        Ok(b)
    }

    pub fn width(&self) -> usize {
        self.width as usize
    }

    pub fn get(&self, i: usize) -> bool {
        i < self.width() && self.words[i / 64] >> (i % 64) & 1 == 1
    }

    /// # Panics
    /// If `i` is outside the bitmap.
    pub fn set(&mut self, i: usize) {
        assert!(i < self.width(), "group {i} outside bitmap of width {}", self.width);
        self.words[i / 64] |= 1 << (i % 64);
    }

    /// Sets `len` consecutive groups starting at `start`.
    pub fn set_range(&mut self, start: usize, len: usize) {
        for i in start..start + len {
            self.set(i);
        }
    }

    pub fn count_set(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.width()).map(|i| self.get(i))
    }

    /// Hex form with group 0 in the most significant bit of the first digit;
    /// the last digit is zero-padded on the right.
    pub fn to_hex(&self) -> String {
        let digits = self.width().div_ceil(4);
        let mut out = String::with_capacity(digits);
        for d in 0..digits {
            let mut nibble = 0u32;
            for k in 0..4 {
                nibble = nibble << 1 | u32::from(self.get(d * 4 + k));
            }
            out.push(char::from_digit(nibble, 16).expect("nibble < 16"));
        }
        out
    }

    /// Parses [`Self::to_hex`] output. The width is four bits per digit;
    /// use [`Self::fit_width`] to trim padding once the cell is known.
    pub fn from_hex(hex: &str) -> Result<Self> {
        let width = hex.len() * 4;
        if width > MAX_RBGS {
            return Err(Error::Parse(format!("bitmap {hex:?} exceeds {MAX_RBGS} groups")));
        }
        let mut b = Self::new(width);
        for (d, c) in hex.chars().enumerate() {
            let nibble = c
                .to_digit(16)
                .ok_or_else(|| Error::Parse(format!("invalid hex digit {c:?} in bitmap {hex:?}")))?;
            for k in 0..4 {
                if nibble >> (3 - k) & 1 == 1 {
                    b.set(d * 4 + k);
                }
            }
        }
        Ok(b)
    }

    /// Narrows or widens to `width` groups. Fails if a dropped group is set.
    pub fn fit_width(&self, width: usize) -> Result<Self> {
        if width > MAX_RBGS || (width..self.width()).any(|i| self.get(i)) {
            return Err(Error::BitmapWidth {
                expected: width,
                actual: self.width(),
            });
        }
        let mut b = Self::new(width);
        for i in (0..width.min(self.width())).filter(|&i| self.get(i)) {
            b.set(i);
        }
        Ok(b)
    }
}

impl fmt::Debug for RbgBitmap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RbgBitmap({self})")
    }
}

/// Binary form, group 0 first.
impl fmt::Display for RbgBitmap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for bit in self.iter() {
            f.write_str(if bit { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for RbgBitmap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::Parse(format!("bitmap {s:?} must be binary"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_bits(&bits)
    }
}

/// Number of resource blocks a bitmap allocates in `cell`.
pub fn rb_count(bitmap: &RbgBitmap, cell: &CellConfig) -> Result<u32> {
    if bitmap.width() != cell.num_rbgs() {
        return Err(Error::BitmapWidth {
            expected: cell.num_rbgs(),
            actual: bitmap.width(),
        });
    }
    Ok(bitmap.count_set() * cell.rbg_size)
}

/// Transport block bytes carried by a grant with this bitmap.
pub fn grant_bytes(bitmap: &RbgBitmap, cell: &CellConfig) -> Result<u64> {
    Ok(u64::from(rb_count(bitmap, cell)?) * u64::from(cell.tbs_per_rb))
}

/// One plaintext scheduling grant as seen on the control channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DciGrant {
    pub subframe: u64,
    pub rnti: Crnti,
    pub direction: Direction,
    pub bitmap: RbgBitmap,
    pub tbs_bytes: u64,
}

impl DciGrant {
    pub fn new(subframe: u64, rnti: Crnti, direction: Direction, bitmap: RbgBitmap, cell: &CellConfig) -> Result<Self> {
        Ok(Self {
            subframe,
            rnti,
            direction,
            tbs_bytes: grant_bytes(&bitmap, cell)?,
            bitmap,
        })
    }

    /// Canonical log order: subframe, then RNTI, then UL before DL.
    pub fn sort_key(&self) -> (u64, Crnti, Direction) {
        (self.subframe, self.rnti, self.direction)
    }
}
