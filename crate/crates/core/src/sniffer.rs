//! Passive eavesdropper over a plaintext DCI log.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::pipeline::{ThroughputSeries, Unit};
use crate::radio::{Crnti, Direction};
use crate::sim::DciLog;

/// Default bin: 100 subframes.
pub const DEFAULT_BIN_SUBFRAMES: u64 = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct VictimTrace {
    pub crnti: Crnti,
    pub ul: ThroughputSeries,
    pub dl: ThroughputSeries,
    /// Set when the log span is not a whole number of bins; the last bin is short.
    pub partial_last_bin: bool,
}

impl VictimTrace {
    pub fn series(&self, direction: Direction) -> &ThroughputSeries {
        match direction {
            Direction::Uplink => &self.ul,
            Direction::Downlink => &self.dl,
        }
    }

    /// CSV `bin_index,ul_bytes,dl_bytes`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_trace_csv(&self.ul, &self.dl, w)
    }
}

pub fn write_trace_csv<W: Write>(ul: &ThroughputSeries, dl: &ThroughputSeries, w: W) -> Result<()> {
    if ul.values.len() != dl.values.len() {
        return Err(Error::LengthMismatch(format!(
            "ul has {} bins, dl has {}",
            ul.values.len(),
            dl.values.len()
        )));
    }
    let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    wtr.write_record(["bin_index", "ul_bytes", "dl_bytes"])?;
    for (i, (u, d)) in ul.values.iter().zip(&dl.values).enumerate() {
        wtr.write_record([i.to_string(), u.to_string(), d.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a `bin_index,ul_bytes,dl_bytes` trace. Rows must be in bin order.
pub fn read_trace_csv<R: Read>(r: R, bin_width_ms: f64) -> Result<(ThroughputSeries, ThroughputSeries)> {
    let mut ul = Vec::new();
    let mut dl = Vec::new();
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["bin_index", "ul_bytes", "dl_bytes"] {
        return Err(Error::Parse(format!("unexpected trace header {headers:?}")));
    }
    for (row, rec) in rdr.deserialize::<(usize, f64, f64)>().enumerate() {
        let (idx, u, d) = rec?;
        if idx != row {
            return Err(Error::Parse(format!("trace row {row} has bin_index {idx}")));
        }
        ul.push(u);
        dl.push(d);
    }
    Ok((
        ThroughputSeries::new(bin_width_ms, ul, Unit::RawBytes)?,
        ThroughputSeries::new(bin_width_ms, dl, Unit::RawBytes)?,
    ))
}

/// Every C-RNTI announced in the log, in order of first announcement.
pub fn identify_victims(log: &DciLog) -> Result<Vec<Crnti>> {
    log.validate()?;
    let mut seen = std::collections::HashSet::new();
    Ok(log
        .rar_events
        .iter()
        .filter(|e| seen.insert(e.rnti))
        .map(|e| Crnti(e.rnti))
        .collect())
}

/// Per-direction byte totals of one victim's grants, binned by subframe.
///
/// Bin `k` covers subframes `[k * bin, (k + 1) * bin)`; the series spans the
/// whole log and empty bins hold zero.
pub fn reconstruct_throughput(
    log: &DciLog,
    victim: Crnti,
    bin_subframes: u64,
    subframe_ms: f64,
) -> Result<VictimTrace> {
    if bin_subframes == 0 {
        return Err(Error::Config("bin_subframes must be >= 1".into()));
    }
    let announced = log.rar_events.iter().any(|e| e.rnti == victim.0);
    if !announced && !log.grants.iter().any(|g| g.rnti == victim) {
        return Err(Error::UnknownRnti(victim.0));
    }
    let span = log
        .duration_subframes
        .max(log.grants.last().map_or(0, |g| g.subframe + 1));
    let bins = span.div_ceil(bin_subframes).max(1) as usize;
    // integer accumulation keeps totals exact before conversion
    let mut totals = [vec![0u64; bins], vec![0u64; bins]];
    for g in log.grants.iter().filter(|g| g.rnti == victim) {
        totals[g.direction.index()][(g.subframe / bin_subframes) as usize] += g.tbs_bytes;
    }
    let width = bin_subframes as f64 * subframe_ms;
    let [ul, dl] = totals.map(|v| v.into_iter().map(|b| b as f64).collect::<Vec<f64>>());
    Ok(VictimTrace {
        crnti: victim,
        ul: ThroughputSeries::new(width, ul, Unit::RawBytes)?,
        dl: ThroughputSeries::new(width, dl, Unit::RawBytes)?,
        partial_last_bin: !span.is_multiple_of(bin_subframes),
    })
}
