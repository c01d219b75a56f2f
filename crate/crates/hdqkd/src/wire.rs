//! Two-process basis reconciliation over a framed byte stream.
//!
//! Each message is a 4-byte big-endian length prefix followed by a UTF-8 JSON
//! body, so the public channel is both bit-exact and human-auditable. The
//! exchange is driven by Bob (who owns the detector):
//!
//! ```text
//! Bob  -> HELLO                      (version, dim, duration, resume point)
//! Alice-> HELLO                      (echo; aborts on mismatch)
//! per batch of clock cycles:
//!   Bob  -> CLOCK_BATCH              (clicked clock indices in the batch)
//!   Alice-> BASIS_REVEAL             (her basis labels for those clocks)
//!   Bob  -> BASIS_REVEAL             (his basis labels for those clocks)
//!   Alice-> SIFT_ACK                 (agreed sifted clock set of the batch)
//! Bob  -> SUMMARY                    (his counts)
//! Alice-> SUMMARY                    (her counts; both must agree)
//! ```
//!
//! Only clock indices, basis labels, click flags, and counts ever cross the
//! wire; state indices never do, for clicked or unclicked cycles. Both
//! processes derive the same session log deterministically from the shared
//! seeds (the quantum channel is a simulation, so Bob's process reproduces
//! the channel outcomes instead of receiving photons); the log supplies the
//! symbol values for the agreed clock set, and the SUMMARY exchange
//! cross-checks that both sides computed identical counts.
//!
//! A lost connection is resumable: SIFT_ACK acknowledges a batch, Bob's HELLO
//! carries the first unacknowledged batch index, and Alice replays cached
//! responses for batches she has already processed.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::Basis;
use crate::protocol::{SessionLog, SiftResult, SiftedSymbol};

pub const WIRE_VERSION: u32 = 1;

/// Largest accepted frame body; anything bigger is a framing error.
const MAX_FRAME_LEN: u32 = 64 * 1024 * 1024;

pub const DEFAULT_BATCH_SIZE: u64 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisEntry {
    pub clock: u64,
    pub basis: Basis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum WireMessage {
    #[serde(rename = "HELLO")]
    Hello {
        version: u32,
        dim: usize,
        duration_cycles: u64,
        resume_batch: u64,
    },
    #[serde(rename = "CLOCK_BATCH")]
    ClockBatch {
        batch: u64,
        start: u64,
        count: u64,
        clicked: Vec<u64>,
    },
    #[serde(rename = "BASIS_REVEAL")]
    BasisReveal { batch: u64, entries: Vec<BasisEntry> },
    #[serde(rename = "SIFT_ACK")]
    SiftAck { batch: u64, clocks: Vec<u64> },
    #[serde(rename = "SUMMARY")]
    Summary {
        raw_detections: u64,
        sifted_detections: u64,
        n_correct: u64,
        n_incorrect: u64,
    },
}

impl WireMessage {
    pub fn to_frame(&self) -> Vec<u8> {
        let body = serde_json::to_vec(self).expect("wire message serializes");
        let mut frame = Vec::with_capacity(4 + body.len());
        frame.extend_from_slice(&(body.len() as u32).to_be_bytes());
        frame.extend_from_slice(&body);
        frame
    }
}

pub fn write_frame<W: Write>(w: &mut W, msg: &WireMessage) -> Result<()> {
    w.write_all(&msg.to_frame())?;
    w.flush()?;
    Ok(())
}

pub fn read_frame<R: Read>(r: &mut R) -> Result<WireMessage> {
    let mut len_buf = [0u8; 4];
    r.read_exact(&mut len_buf)
        .map_err(|e| Error::Wire(format!("reading frame length: {e}")))?;
    let len = u32::from_be_bytes(len_buf);
    if len > MAX_FRAME_LEN {
        return Err(Error::Wire(format!("frame length {len} exceeds limit")));
    }
    let mut body = vec![0u8; len as usize];
    r.read_exact(&mut body)
        .map_err(|e| Error::Wire(format!("reading frame body: {e}")))?;
    let text = std::str::from_utf8(&body)
        .map_err(|e| Error::Wire(format!("frame body is not UTF-8: {e}")))?;
    serde_json::from_str(text).map_err(|e| Error::Wire(format!("bad message body: {e}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Alice,
    Bob,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Inbound,
    Outbound,
}

/// One framed message as it crossed the wire, tagged with its direction.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordedFrame {
    pub direction: Direction,
    pub bytes: Vec<u8>,
}

/// Byte-exact recording of one side's traffic; replayable.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WireRecording {
    pub frames: Vec<RecordedFrame>,
}

impl WireRecording {
    fn push(&mut self, direction: Direction, msg: &WireMessage) {
        self.frames.push(RecordedFrame {
            direction,
            bytes: msg.to_frame(),
        });
    }

    /// Flat byte format: `I`/`O` direction tag followed by the frame bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for f in &self.frames {
            out.push(match f.direction {
                Direction::Inbound => b'I',
                Direction::Outbound => b'O',
            });
            out.extend_from_slice(&f.bytes);
        }
        out
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let mut frames = Vec::new();
        let mut pos = 0usize;
        while pos < data.len() {
            let direction = match data[pos] {
                b'I' => Direction::Inbound,
                b'O' => Direction::Outbound,
                other => {
                    return Err(Error::Parse(format!(
                        "bad direction tag {other:#x} at offset {pos}"
                    )))
                }
            };
            pos += 1;
            if pos + 4 > data.len() {
                return Err(Error::Parse("truncated frame length".into()));
            }
            let len = u32::from_be_bytes(data[pos..pos + 4].try_into().unwrap()) as usize;
            if pos + 4 + len > data.len() {
                return Err(Error::Parse("truncated frame body".into()));
            }
            frames.push(RecordedFrame {
                direction,
                bytes: data[pos..pos + 4 + len].to_vec(),
            });
            pos += 4 + len;
        }
        Ok(Self { frames })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Parses every recorded frame back into a message.
    pub fn messages(&self) -> Result<Vec<(Direction, WireMessage)>> {
        self.frames
            .iter()
            .map(|f| {
                let mut cursor = &f.bytes[..];
                Ok((f.direction, read_frame(&mut cursor)?))
            })
            .collect()
    }
}

fn n_batches(duration: u64, batch_size: u64) -> u64 {
    duration.div_ceil(batch_size)
}

/// Per-clock view shared by both state machines, filled from the local log.
struct LogView {
    dim: usize,
    duration: u64,
    alice_basis: Vec<Basis>,
    bob_basis: Vec<Basis>,
    alice_k: Vec<usize>,
    bob_k: Vec<usize>,
    clicks: Vec<bool>,
}

impl LogView {
    fn new(log: &SessionLog) -> Result<Self> {
        log.validate()?;
        Ok(Self {
            dim: log.config.dim,
            duration: log.duration_cycles,
            alice_basis: log.alice_choices.iter().map(|c| c.basis).collect(),
            bob_basis: log.bob_choices.iter().map(|c| c.basis).collect(),
            alice_k: log.alice_choices.iter().map(|c| c.state_index).collect(),
            bob_k: log.bob_choices.iter().map(|c| c.state_index).collect(),
            clicks: log.clicks.iter().map(|&(_, c)| c).collect(),
        })
    }

    fn symbol(&self, clock: u64) -> SiftedSymbol {
        SiftedSymbol {
            clock,
            k_alice: self.alice_k[clock as usize],
            k_bob: self.bob_k[clock as usize],
        }
    }
}

/// Counts accumulated batch by batch.
#[derive(Debug, Clone, Default, PartialEq)]
struct Tally {
    raw: u64,
    symbols: Vec<SiftedSymbol>,
}

impl Tally {
    fn counts(&self) -> (u64, u64, u64, u64) {
        let n_correct = self
            .symbols
            .iter()
            .filter(|s| s.k_alice == s.k_bob)
            .count() as u64;
        let sifted = self.symbols.len() as u64;
        (self.raw, sifted, n_correct, sifted - n_correct)
    }

    fn summary(&self) -> WireMessage {
        let (raw, sifted, n_correct, n_incorrect) = self.counts();
        WireMessage::Summary {
            raw_detections: raw,
            sifted_detections: sifted,
            n_correct,
            n_incorrect,
        }
    }

    fn into_result(self, dim: usize, duration: u64) -> SiftResult {
        let (raw, sifted, n_correct, n_incorrect) = self.counts();
        SiftResult {
            dim,
            duration_cycles: duration,
            raw_detections: raw,
            sifted_detections: sifted,
            n_correct,
            n_incorrect,
            qber: if sifted > 0 {
                Some(n_incorrect as f64 / sifted as f64)
            } else {
                None
            },
            sifted_symbols: self.symbols,
        }
    }
}

fn check_hello(
    view: &LogView,
    version: u32,
    dim: usize,
    duration_cycles: u64,
) -> Result<()> {
    if version != WIRE_VERSION {
        return Err(Error::HelloMismatch(format!(
            "protocol version {version} vs local {WIRE_VERSION}"
        )));
    }
    if dim != view.dim {
        return Err(Error::HelloMismatch(format!(
            "dim {dim} vs local {}",
            view.dim
        )));
    }
    if duration_cycles != view.duration {
        return Err(Error::HelloMismatch(format!(
            "duration {duration_cycles} vs local {}",
            view.duration
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum AliceState {
    AwaitHello,
    AwaitClockBatch,
    AwaitBobReveal { batch: u64 },
    AwaitSummary,
    Done,
}

struct CachedBatch {
    clicked: Vec<u64>,
    reveal: WireMessage,
    ack: WireMessage,
}

/// Alice's reconciliation state machine. Purely reactive: every inbound
/// message yields exactly one response until the exchange completes.
pub struct AliceReconciler {
    view: LogView,
    batch_size: u64,
    total_batches: u64,
    next_batch: u64,
    state: AliceState,
    cache: BTreeMap<u64, CachedBatch>,
    tally: Tally,
    result: Option<SiftResult>,
}

impl AliceReconciler {
    pub fn new(log: &SessionLog, batch_size: u64) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::InvalidParameter("batch size must be >= 1".into()));
        }
        let view = LogView::new(log)?;
        let total_batches = n_batches(view.duration, batch_size);
        Ok(Self {
            view,
            batch_size,
            total_batches,
            next_batch: 0,
            state: AliceState::AwaitHello,
            cache: BTreeMap::new(),
            tally: Tally::default(),
            result: None,
        })
    }

    pub fn is_done(&self) -> bool {
        self.state == AliceState::Done
    }

    pub fn result(&self) -> Option<&SiftResult> {
        self.result.as_ref()
    }

    pub fn on_message(&mut self, msg: &WireMessage) -> Result<Vec<WireMessage>> {
        match (self.state, msg) {
            (
                AliceState::AwaitHello,
                WireMessage::Hello {
                    version,
                    dim,
                    duration_cycles,
                    resume_batch,
                },
            ) => {
                check_hello(&self.view, *version, *dim, *duration_cycles)?;
                if *resume_batch > self.next_batch {
                    return Err(Error::Wire(format!(
                        "peer resumes at batch {resume_batch} but only {} processed here",
                        self.next_batch
                    )));
                }
                self.state = if *resume_batch >= self.total_batches {
                    AliceState::AwaitSummary
                } else {
                    AliceState::AwaitClockBatch
                };
                Ok(vec![WireMessage::Hello {
                    version: WIRE_VERSION,
                    dim: self.view.dim,
                    duration_cycles: self.view.duration,
                    resume_batch: *resume_batch,
                }])
            }
            (
                AliceState::AwaitClockBatch,
                WireMessage::ClockBatch {
                    batch,
                    start,
                    count,
                    clicked,
                },
            ) => {
                let reveal = self.handle_clock_batch(*batch, *start, *count, clicked)?;
                self.state = AliceState::AwaitBobReveal { batch: *batch };
                Ok(vec![reveal])
            }
            (
                AliceState::AwaitBobReveal { batch },
                WireMessage::BasisReveal {
                    batch: got_batch,
                    entries,
                },
            ) => {
                if *got_batch != batch {
                    return Err(Error::Wire(format!(
                        "basis reveal for batch {got_batch}, expected {batch}"
                    )));
                }
                let ack = self.handle_bob_reveal(batch, entries)?;
                self.state = if self.next_batch >= self.total_batches {
                    AliceState::AwaitSummary
                } else {
                    AliceState::AwaitClockBatch
                };
                Ok(vec![ack])
            }
            (
                AliceState::AwaitSummary,
                WireMessage::Summary {
                    raw_detections,
                    sifted_detections,
                    n_correct,
                    n_incorrect,
                },
            ) => {
                let (raw, sifted, nc, ni) = self.tally.counts();
                if (raw, sifted, nc, ni)
                    != (*raw_detections, *sifted_detections, *n_correct, *n_incorrect)
                {
                    return Err(Error::Wire(format!(
                        "summary mismatch: peer ({raw_detections},{sifted_detections},{n_correct},{n_incorrect}) vs local ({raw},{sifted},{nc},{ni})"
                    )));
                }
                let summary = self.tally.summary();
                self.result = Some(
                    std::mem::take(&mut self.tally).into_result(self.view.dim, self.view.duration),
                );
                self.state = AliceState::Done;
                Ok(vec![summary])
            }
            (state, msg) => Err(Error::Wire(format!(
                "unexpected {msg:?} in alice state {state:?}"
            ))),
        }
    }

    fn batch_bounds(&self, batch: u64) -> (u64, u64) {
        let start = batch * self.batch_size;
        let count = self.batch_size.min(self.view.duration - start);
        (start, count)
    }

    fn handle_clock_batch(
        &mut self,
        batch: u64,
        start: u64,
        count: u64,
        clicked: &[u64],
    ) -> Result<WireMessage> {
        if batch > self.next_batch || batch >= self.total_batches {
            return Err(Error::Wire(format!(
                "clock batch {batch} out of order (expected {})",
                self.next_batch
            )));
        }
        let (want_start, want_count) = self.batch_bounds(batch);
        if start != want_start || count != want_count {
            return Err(Error::Wire(format!(
                "batch {batch} bounds ({start},{count}) vs expected ({want_start},{want_count})"
            )));
        }
        let mut last = None;
        for &c in clicked {
            if c < start || c >= start + count {
                return Err(Error::Wire(format!(
                    "clock index {c} outside batch range [{start},{})",
                    start + count
                )));
            }
            if let Some(prev) = last {
                if c <= prev {
                    return Err(Error::Wire("clicked clocks must be strictly increasing".into()));
                }
            }
            last = Some(c);
        }

        // A re-sent batch (reconnect before its SIFT_ACK arrived) must match
        // what was seen before; the cached response is replayed and nothing
        // is accumulated twice.
        if let Some(cached) = self.cache.get(&batch) {
            if cached.clicked != clicked {
                return Err(Error::Wire(format!(
                    "replayed batch {batch} differs from the one seen before"
                )));
            }
            return Ok(cached.reveal.clone());
        }

        let entries: Vec<BasisEntry> = clicked
            .iter()
            .map(|&c| BasisEntry {
                clock: c,
                basis: self.view.alice_basis[c as usize],
            })
            .collect();
        let reveal = WireMessage::BasisReveal { batch, entries };
        self.cache.insert(
            batch,
            CachedBatch {
                clicked: clicked.to_vec(),
                reveal: reveal.clone(),
                ack: WireMessage::SiftAck {
                    batch,
                    clocks: vec![],
                },
            },
        );
        Ok(reveal)
    }

    fn handle_bob_reveal(&mut self, batch: u64, entries: &[BasisEntry]) -> Result<WireMessage> {
        let cached_clicked = self
            .cache
            .get(&batch)
            .map(|c| c.clicked.clone())
            .ok_or_else(|| Error::Wire(format!("basis reveal for unknown batch {batch}")))?;
        let reveal_clocks: Vec<u64> = entries.iter().map(|e| e.clock).collect();
        if reveal_clocks != cached_clicked {
            return Err(Error::Wire(format!(
                "batch {batch} basis reveal clocks do not match the clicked set"
            )));
        }
        if batch < self.next_batch {
            return Ok(self.cache[&batch].ack.clone());
        }
        // Fresh batch completes here; this is the only accumulation point,
        // so replays after a reconnect cannot double-count.
        self.tally.raw += cached_clicked.len() as u64;
        let mut agreed = Vec::new();
        for e in entries {
            if self.view.alice_basis[e.clock as usize] == e.basis {
                agreed.push(e.clock);
                self.tally.symbols.push(self.view.symbol(e.clock));
            }
        }
        let ack = WireMessage::SiftAck {
            batch,
            clocks: agreed,
        };
        self.cache.get_mut(&batch).unwrap().ack = ack.clone();
        self.next_batch += 1;
        Ok(ack)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum BobState {
    Init,
    AwaitHello,
    AwaitAliceReveal { batch: u64 },
    AwaitSiftAck { batch: u64 },
    AwaitSummary,
    Done,
}

/// Bob's reconciliation state machine. Bob drives: he opens with HELLO and a
/// clock batch, and advances one batch per SIFT_ACK. `next_batch` marks the
/// first unacknowledged batch, which is where a reconnect resumes.
pub struct BobReconciler {
    view: LogView,
    batch_size: u64,
    total_batches: u64,
    next_batch: u64,
    state: BobState,
    pending_alice_bases: BTreeMap<u64, Basis>,
    tally: Tally,
    result: Option<SiftResult>,
}

impl BobReconciler {
    pub fn new(log: &SessionLog, batch_size: u64) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::InvalidParameter("batch size must be >= 1".into()));
        }
        let view = LogView::new(log)?;
        let total_batches = n_batches(view.duration, batch_size);
        Ok(Self {
            view,
            batch_size,
            total_batches,
            next_batch: 0,
            state: BobState::Init,
            pending_alice_bases: BTreeMap::new(),
            tally: Tally::default(),
            result: None,
        })
    }

    pub fn is_done(&self) -> bool {
        self.state == BobState::Done
    }

    pub fn result(&self) -> Option<&SiftResult> {
        self.result.as_ref()
    }

    /// First unacknowledged batch; where a new connection resumes.
    pub fn resume_batch(&self) -> u64 {
        self.next_batch
    }

    /// Messages to send when a connection opens (fresh or resumed).
    pub fn start(&mut self) -> Vec<WireMessage> {
        self.state = BobState::AwaitHello;
        self.pending_alice_bases.clear();
        vec![WireMessage::Hello {
            version: WIRE_VERSION,
            dim: self.view.dim,
            duration_cycles: self.view.duration,
            resume_batch: self.next_batch,
        }]
    }

    fn batch_bounds(&self, batch: u64) -> (u64, u64) {
        let start = batch * self.batch_size;
        let count = self.batch_size.min(self.view.duration - start);
        (start, count)
    }

    fn clicked_in_batch(&self, batch: u64) -> Vec<u64> {
        let (start, count) = self.batch_bounds(batch);
        (start..start + count)
            .filter(|&c| self.view.clicks[c as usize])
            .collect()
    }

    fn clock_batch(&self, batch: u64) -> WireMessage {
        let (start, count) = self.batch_bounds(batch);
        WireMessage::ClockBatch {
            batch,
            start,
            count,
            clicked: self.clicked_in_batch(batch),
        }
    }

    pub fn on_message(&mut self, msg: &WireMessage) -> Result<Vec<WireMessage>> {
        match (self.state, msg) {
            (
                BobState::AwaitHello,
                WireMessage::Hello {
                    version,
                    dim,
                    duration_cycles,
                    resume_batch,
                },
            ) => {
                check_hello(&self.view, *version, *dim, *duration_cycles)?;
                if *resume_batch != self.next_batch {
                    return Err(Error::Wire(format!(
                        "peer acknowledged resume batch {resume_batch}, expected {}",
                        self.next_batch
                    )));
                }
                if self.next_batch >= self.total_batches {
                    self.state = BobState::AwaitSummary;
                    Ok(vec![self.tally.summary()])
                } else {
                    let batch = self.next_batch;
                    self.state = BobState::AwaitAliceReveal { batch };
                    Ok(vec![self.clock_batch(batch)])
                }
            }
            (
                BobState::AwaitAliceReveal { batch },
                WireMessage::BasisReveal {
                    batch: got_batch,
                    entries,
                },
            ) => {
                if *got_batch != batch {
                    return Err(Error::Wire(format!(
                        "basis reveal for batch {got_batch}, expected {batch}"
                    )));
                }
                let clicked = self.clicked_in_batch(batch);
                let reveal_clocks: Vec<u64> = entries.iter().map(|e| e.clock).collect();
                if reveal_clocks != clicked {
                    return Err(Error::Wire(format!(
                        "batch {batch} reveal clocks do not match the clicked set"
                    )));
                }
                self.pending_alice_bases = entries.iter().map(|e| (e.clock, e.basis)).collect();
                let my_entries: Vec<BasisEntry> = clicked
                    .iter()
                    .map(|&c| BasisEntry {
                        clock: c,
                        basis: self.view.bob_basis[c as usize],
                    })
                    .collect();
                self.state = BobState::AwaitSiftAck { batch };
                Ok(vec![WireMessage::BasisReveal {
                    batch,
                    entries: my_entries,
                }])
            }
            (
                BobState::AwaitSiftAck { batch },
                WireMessage::SiftAck {
                    batch: got_batch,
                    clocks,
                },
            ) => {
                if *got_batch != batch {
                    return Err(Error::Wire(format!(
                        "sift ack for batch {got_batch}, expected {batch}"
                    )));
                }
                let expected: Vec<u64> = self
                    .clicked_in_batch(batch)
                    .into_iter()
                    .filter(|&c| {
                        self.pending_alice_bases.get(&c).copied()
                            == Some(self.view.bob_basis[c as usize])
                    })
                    .collect();
                if *clocks != expected {
                    return Err(Error::Wire(format!(
                        "batch {batch} sift ack disagrees with local reconciliation"
                    )));
                }
                self.tally.raw += self.clicked_in_batch(batch).len() as u64;
                for &c in clocks {
                    self.tally.symbols.push(self.view.symbol(c));
                }
                self.pending_alice_bases.clear();
                self.next_batch = batch + 1;
                if self.next_batch >= self.total_batches {
                    self.state = BobState::AwaitSummary;
                    Ok(vec![self.tally.summary()])
                } else {
                    let next = self.next_batch;
                    self.state = BobState::AwaitAliceReveal { batch: next };
                    Ok(vec![self.clock_batch(next)])
                }
            }
            (
                BobState::AwaitSummary,
                WireMessage::Summary {
                    raw_detections,
                    sifted_detections,
                    n_correct,
                    n_incorrect,
                },
            ) => {
                let (raw, sifted, nc, ni) = self.tally.counts();
                if (raw, sifted, nc, ni)
                    != (*raw_detections, *sifted_detections, *n_correct, *n_incorrect)
                {
                    return Err(Error::Wire(format!(
                        "summary mismatch: peer ({raw_detections},{sifted_detections},{n_correct},{n_incorrect}) vs local ({raw},{sifted},{nc},{ni})"
                    )));
                }
                self.result = Some(
                    std::mem::take(&mut self.tally).into_result(self.view.dim, self.view.duration),
                );
                self.state = BobState::Done;
                Ok(vec![])
            }
            (state, msg) => Err(Error::Wire(format!(
                "unexpected {msg:?} in bob state {state:?}"
            ))),
        }
    }
}

/// Options for the socket drivers.
#[derive(Debug, Clone)]
pub struct WireOptions {
    pub batch_size: u64,
    /// When set, Bob paces clock batches as if cycles ran at this rate.
    pub realtime_hz: Option<f64>,
    /// Reconnection attempts Bob makes after a dropped connection.
    pub max_reconnects: u32,
    pub io_timeout: Duration,
}

impl Default for WireOptions {
    fn default() -> Self {
        Self {
            batch_size: DEFAULT_BATCH_SIZE,
            realtime_hz: None,
            max_reconnects: 3,
            io_timeout: Duration::from_secs(30),
        }
    }
}

fn drive_connection<M>(
    stream: &mut TcpStream,
    machine: &mut M,
    initial: Vec<WireMessage>,
    recording: &mut WireRecording,
    on_message: fn(&mut M, &WireMessage) -> Result<Vec<WireMessage>>,
    is_done: fn(&M) -> bool,
    pace: Option<f64>,
) -> Result<()> {
    for msg in &initial {
        pace_message(msg, pace);
        recording.push(Direction::Outbound, msg);
        write_frame(stream, msg)?;
    }
    while !is_done(machine) {
        let msg = read_frame(stream)?;
        recording.push(Direction::Inbound, &msg);
        let responses = on_message(machine, &msg)?;
        for resp in &responses {
            pace_message(resp, pace);
            recording.push(Direction::Outbound, resp);
            write_frame(stream, resp)?;
        }
    }
    Ok(())
}

fn pace_message(msg: &WireMessage, pace: Option<f64>) {
    if let (Some(hz), WireMessage::ClockBatch { count, .. }) = (pace, msg) {
        if hz > 0.0 {
            std::thread::sleep(Duration::from_secs_f64(*count as f64 / hz));
        }
    }
}

/// Serves Alice's side on an already-bound listener. Keeps accepting until
/// the reconciliation completes, so a dropped connection resumes from the
/// last acknowledged batch.
pub fn serve_alice(
    listener: &TcpListener,
    log: &SessionLog,
    opts: &WireOptions,
) -> Result<(SiftResult, WireRecording)> {
    let mut machine = AliceReconciler::new(log, opts.batch_size)?;
    let mut recording = WireRecording::default();
    let mut attempts = 0u32;
    while !machine.is_done() {
        let (mut stream, _) = listener.accept()?;
        stream.set_read_timeout(Some(opts.io_timeout))?;
        stream.set_nodelay(true)?;
        // A fresh connection restarts the handshake.
        machine.state = AliceState::AwaitHello;
        let outcome = drive_connection(
            &mut stream,
            &mut machine,
            vec![],
            &mut recording,
            AliceReconciler::on_message,
            AliceReconciler::is_done,
            None,
        );
        match outcome {
            Ok(()) => {}
            Err(Error::Wire(_)) | Err(Error::Io(_))
                if attempts < opts.max_reconnects && !machine.is_done() =>
            {
                attempts += 1;
            }
            Err(e) => return Err(e),
        }
    }
    let result = machine.result().cloned().expect("done machine has a result");
    Ok((result, recording))
}

/// Runs Bob's side against `addr`, reconnecting and resuming after drops.
pub fn connect_bob<A: ToSocketAddrs + Clone>(
    addr: A,
    log: &SessionLog,
    opts: &WireOptions,
) -> Result<(SiftResult, WireRecording)> {
    let mut machine = BobReconciler::new(log, opts.batch_size)?;
    let mut recording = WireRecording::default();
    let mut attempts = 0u32;
    while !machine.is_done() {
        // The peer may still be binding; give it a moment.
        let mut stream = {
            let mut connect_tries = 0u32;
            loop {
                match TcpStream::connect(addr.clone()) {
                    Ok(s) => break s,
                    Err(_) if connect_tries < 20 => {
                        connect_tries += 1;
                        std::thread::sleep(Duration::from_millis(100));
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        };
        stream.set_read_timeout(Some(opts.io_timeout))?;
        stream.set_nodelay(true)?;
        let initial = machine.start();
        let outcome = drive_connection(
            &mut stream,
            &mut machine,
            initial,
            &mut recording,
            BobReconciler::on_message,
            BobReconciler::is_done,
            opts.realtime_hz,
        );
        match outcome {
            Ok(()) => {}
            Err(Error::Wire(_)) | Err(Error::Io(_))
                if attempts < opts.max_reconnects && !machine.is_done() =>
            {
                attempts += 1;
                std::thread::sleep(Duration::from_millis(50));
            }
            Err(e) => return Err(e),
        }
    }
    let result = machine.result().cloned().expect("done machine has a result");
    Ok((result, recording))
}

/// Replays a recorded byte stream against the local log: inbound frames feed
/// the state machine, produced responses are checked byte-for-byte against
/// the recorded outbound frames, and the reconstructed result is returned.
pub fn replay(recording: &WireRecording, log: &SessionLog, role: Role, batch_size: u64) -> Result<SiftResult> {
    enum Machine {
        Alice(AliceReconciler),
        Bob(BobReconciler),
    }
    let mut machine = match role {
        Role::Alice => Machine::Alice(AliceReconciler::new(log, batch_size)?),
        Role::Bob => Machine::Bob(BobReconciler::new(log, batch_size)?),
    };
    let mut expected_out: Vec<Vec<u8>> = Vec::new();
    if let Machine::Bob(bob) = &mut machine {
        for m in bob.start() {
            expected_out.push(m.to_frame());
        }
    }
    for frame in &recording.frames {
        match frame.direction {
            Direction::Outbound => {
                if expected_out.is_empty() {
                    // Bob re-opens after a drop with a fresh HELLO; regenerate it.
                    let mut cursor = &frame.bytes[..];
                    let msg = read_frame(&mut cursor)?;
                    if let (Machine::Bob(bob), WireMessage::Hello { .. }) = (&mut machine, &msg) {
                        for m in bob.start() {
                            expected_out.push(m.to_frame());
                        }
                    } else {
                        return Err(Error::Wire(
                            "recording has an outbound frame the replay did not produce".into(),
                        ));
                    }
                }
                let produced = expected_out.remove(0);
                if produced != frame.bytes {
                    return Err(Error::Wire(
                        "replayed outbound frame differs from the recording".into(),
                    ));
                }
            }
            Direction::Inbound => {
                let mut cursor = &frame.bytes[..];
                let msg = read_frame(&mut cursor)?;
                let responses = match &mut machine {
                    Machine::Alice(a) => {
                        // A reconnect shows up as a HELLO arriving mid-stream.
                        if matches!(msg, WireMessage::Hello { .. }) {
                            a.state = AliceState::AwaitHello;
                        }
                        a.on_message(&msg)?
                    }
                    Machine::Bob(b) => b.on_message(&msg)?,
                };
                for r in responses {
                    expected_out.push(r.to_frame());
                }
            }
        }
    }
    let result = match machine {
        Machine::Alice(a) => a.result().cloned(),
        Machine::Bob(b) => b.result().cloned(),
    };
    result.ok_or_else(|| Error::Wire("recording ends before the exchange completes".into()))
}
