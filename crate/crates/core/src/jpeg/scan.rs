//! Marker walk and entropy-coded scan decoding for baseline JPEG.
//!
//! One decode loop serves both public consumers: the DC-plane parser (which
//! keeps only luminance DC values) and the pixel decoder (which keeps every
//! coefficient). The sink decides what to retain; the loop always consumes
//! the full entropy stream so the bit position stays correct.

use super::huffman::{extend, DecodeTable};
use super::{marker, UNZIGZAG};
use crate::error::{Error, Result};
use crate::num::ceil_div;

/// One frame component as declared in the SOF segment.
#[derive(Clone, Debug)]
pub struct Component {
    pub id: u8,
    pub h: u8,
    pub v: u8,
    pub tq: usize,
    /// Sample dimensions of this component (T.81 A.1.1).
    pub samples_x: u32,
    pub samples_y: u32,
    /// Block dimensions without MCU padding.
    pub blocks_x: u32,
    pub blocks_y: u32,
}

/// Frame-level facts accumulated during the marker walk. Quantization
/// tables and the restart interval may legally arrive before or after the
/// frame header, so they are folded in when decoding finishes.
pub struct FrameInfo {
    pub width: u16,
    pub height: u16,
    pub hmax: u8,
    pub vmax: u8,
    pub comps: Vec<Component>,
    pub qtables: [Option<[u16; 64]>; 4],
    pub restart_interval: u16,
}

/// Receives each decoded in-range block (padding blocks are dropped before
/// the sink sees them). Coefficients arrive quantized, in natural order.
pub trait CoeffSink {
    fn block(&mut self, comp: usize, bx: u32, by: u32, coeffs: &[i32; 64]);
}

/// Entropy-segment bit reader with byte unstuffing. Hitting a marker or the
/// end of the buffer while bits are still needed is a truncation error.
struct BitReader<'a> {
    data: &'a [u8],
    pos: usize,
    cur: u32,
    nbits: u8,
}

impl<'a> BitReader<'a> {
    fn new(data: &'a [u8], pos: usize) -> Self {
        BitReader {
            data,
            pos,
            cur: 0,
            nbits: 0,
        }
    }

    fn next_bit(&mut self) -> Result<u32> {
        if self.nbits == 0 {
            self.refill()?;
        }
        self.nbits -= 1;
        Ok((self.cur >> self.nbits) & 1)
    }

    fn refill(&mut self) -> Result<()> {
        let b = *self.data.get(self.pos).ok_or_else(Self::truncated)?;
        if b == 0xFF {
            match self.data.get(self.pos + 1) {
                Some(0x00) => self.pos += 2,
                Some(_) => {
                    return Err(Error::CorruptStream(
                        "entropy segment truncated by marker".into(),
                    ))
                }
                None => return Err(Self::truncated()),
            }
        } else {
            self.pos += 1;
        }
        self.cur = b as u32;
        self.nbits = 8;
        Ok(())
    }

    fn truncated() -> Error {
        Error::CorruptStream("entropy segment ends before the scan completes".into())
    }

    fn receive(&mut self, n: u8) -> Result<u32> {
        let mut v = 0u32;
        for _ in 0..n {
            v = (v << 1) | self.next_bit()?;
        }
        Ok(v)
    }

    /// Byte-aligns and consumes the expected RSTn marker.
    fn sync_restart(&mut self, expected: u8) -> Result<()> {
        self.nbits = 0;
        match (self.data.get(self.pos), self.data.get(self.pos + 1)) {
            (Some(&0xFF), Some(&m)) if marker::is_rst(m) => {
                if m - marker::RST0 != expected {
                    return Err(Error::CorruptStream(format!(
                        "restart marker out of sequence: got RST{} expected RST{expected}",
                        m - marker::RST0
                    )));
                }
                self.pos += 2;
                Ok(())
            }
            _ => Err(Error::CorruptStream("expected restart marker".into())),
        }
    }

    /// Drops any partial byte and reports where marker scanning resumes.
    fn finish(self) -> usize {
        self.pos
    }
}

fn read_u16(data: &[u8], pos: usize) -> Result<u16> {
    match (data.get(pos), data.get(pos + 1)) {
        (Some(&a), Some(&b)) => Ok(u16::from_be_bytes([a, b])),
        _ => Err(Error::CorruptStream("unexpected end of stream".into())),
    }
}

/// Reads the next `FF xx` marker, tolerating `FF` fill bytes.
fn read_marker(data: &[u8], pos: &mut usize) -> Result<u8> {
    if data.get(*pos) != Some(&0xFF) {
        return Err(Error::CorruptStream(format!(
            "expected marker at byte {}",
            *pos
        )));
    }
    let mut p = *pos + 1;
    while data.get(p) == Some(&0xFF) {
        p += 1;
    }
    match data.get(p) {
        Some(&0x00) | None => Err(Error::CorruptStream("expected marker code".into())),
        Some(&m) => {
            *pos = p + 1;
            Ok(m)
        }
    }
}

/// Reads a segment length and returns the payload range.
fn segment_payload(data: &[u8], pos: &mut usize) -> Result<std::ops::Range<usize>> {
    let len = read_u16(data, *pos)? as usize;
    if len < 2 || *pos + len > data.len() {
        return Err(Error::CorruptStream("segment length overruns stream".into()));
    }
    let range = *pos + 2..*pos + len;
    *pos += len;
    Ok(range)
}

fn parse_sof(payload: &[u8]) -> Result<(u16, u16, Vec<Component>)> {
    if payload.len() < 6 {
        return Err(Error::CorruptStream("frame header too short".into()));
    }
    let precision = payload[0];
    if precision != 8 {
        return Err(Error::UnsupportedFormat(format!(
            "{precision}-bit sample precision"
        )));
    }
    let height = u16::from_be_bytes([payload[1], payload[2]]);
    let width = u16::from_be_bytes([payload[3], payload[4]]);
    if width == 0 || height == 0 {
        return Err(Error::DimensionOverflow {
            width: width as u32,
            height: height as u32,
        });
    }
    let nf = payload[5] as usize;
    if nf > 3 {
        return Err(Error::UnsupportedFormat(format!("{nf} components")));
    }
    if nf == 0 || payload.len() != 6 + 3 * nf {
        return Err(Error::CorruptStream("malformed frame header".into()));
    }
    let mut comps = Vec::with_capacity(nf);
    for c in 0..nf {
        let id = payload[6 + 3 * c];
        let hv = payload[7 + 3 * c];
        let (h, v) = (hv >> 4, hv & 0x0F);
        if !(1..=4).contains(&h) || !(1..=4).contains(&v) {
            return Err(Error::CorruptStream(format!(
                "sampling factors {h}x{v} outside 1..=4"
            )));
        }
        let tq = payload[8 + 3 * c] as usize;
        if tq > 3 {
            return Err(Error::CorruptStream("quantization table id outside 0..=3".into()));
        }
        if comps.iter().any(|prev: &Component| prev.id == id) {
            return Err(Error::CorruptStream("duplicate component id".into()));
        }
        comps.push(Component {
            id,
            h,
            v,
            tq,
            samples_x: 0,
            samples_y: 0,
            blocks_x: 0,
            blocks_y: 0,
        });
    }
    let hmax = comps.iter().map(|c| c.h).max().unwrap() as u32;
    let vmax = comps.iter().map(|c| c.v).max().unwrap() as u32;
    for c in &mut comps {
        c.samples_x = ceil_div(width as u32 * c.h as u32, hmax);
        c.samples_y = ceil_div(height as u32 * c.v as u32, vmax);
        c.blocks_x = ceil_div(c.samples_x, 8);
        c.blocks_y = ceil_div(c.samples_y, 8);
    }
    Ok((width, height, comps))
}

fn parse_dqt(payload: &[u8], qtables: &mut [Option<[u16; 64]>; 4]) -> Result<()> {
    let mut at = 0usize;
    while at < payload.len() {
        let pq_tq = payload[at];
        let (pq, tq) = (pq_tq >> 4, (pq_tq & 0x0F) as usize);
        if pq != 0 {
            return Err(Error::UnsupportedFormat(
                "16-bit quantization table (12-bit precision stream)".into(),
            ));
        }
        if tq > 3 || at + 65 > payload.len() {
            return Err(Error::CorruptStream("malformed DQT segment".into()));
        }
        let mut table = [0u16; 64];
        for (zz, &raw) in payload[at + 1..at + 65].iter().enumerate() {
            if raw == 0 {
                return Err(Error::CorruptStream("zero quantization table entry".into()));
            }
            table[UNZIGZAG[zz]] = raw as u16;
        }
        qtables[tq] = Some(table);
        at += 65;
    }
    Ok(())
}

fn parse_dht(
    payload: &[u8],
    dc_tables: &mut [Option<DecodeTable>; 4],
    ac_tables: &mut [Option<DecodeTable>; 4],
) -> Result<()> {
    let mut at = 0usize;
    while at < payload.len() {
        if at + 17 > payload.len() {
            return Err(Error::CorruptStream("malformed DHT segment".into()));
        }
        let tc_th = payload[at];
        let (tc, th) = (tc_th >> 4, (tc_th & 0x0F) as usize);
        if tc > 1 || th > 3 {
            return Err(Error::CorruptStream("huffman table class or id out of range".into()));
        }
        let mut bits = [0u8; 16];
        bits.copy_from_slice(&payload[at + 1..at + 17]);
        let total: usize = bits.iter().map(|&b| b as usize).sum();
        if at + 17 + total > payload.len() {
            return Err(Error::CorruptStream("DHT values overrun segment".into()));
        }
        let values = payload[at + 17..at + 17 + total].to_vec();
        let table = DecodeTable::build(&bits, values)?;
        if tc == 0 {
            dc_tables[th] = Some(table);
        } else {
            ac_tables[th] = Some(table);
        }
        at += 17 + total;
    }
    Ok(())
}

struct ScanComponent {
    comp: usize,
    dc_table: usize,
    ac_table: usize,
    pred: i32,
}

struct ScanHeader {
    comps: Vec<ScanComponent>,
}

fn parse_sos(payload: &[u8], frame: &[Component]) -> Result<ScanHeader> {
    if payload.is_empty() {
        return Err(Error::CorruptStream("empty scan header".into()));
    }
    let ns = payload[0] as usize;
    if ns == 0 || payload.len() != 1 + 2 * ns + 3 {
        return Err(Error::CorruptStream("malformed scan header".into()));
    }
    if ns != 1 && ns != frame.len() {
        return Err(Error::UnsupportedFormat(
            "partially interleaved scan".into(),
        ));
    }
    let mut comps = Vec::with_capacity(ns);
    for s in 0..ns {
        let id = payload[1 + 2 * s];
        let td_ta = payload[2 + 2 * s];
        let comp = frame
            .iter()
            .position(|c| c.id == id)
            .ok_or_else(|| Error::CorruptStream(format!("scan references unknown component {id}")))?;
        if comps.iter().any(|sc: &ScanComponent| sc.comp == comp) {
            return Err(Error::CorruptStream("component repeated in scan".into()));
        }
        comps.push(ScanComponent {
            comp,
            dc_table: (td_ta >> 4) as usize,
            ac_table: (td_ta & 0x0F) as usize,
            pred: 0,
        });
    }
    // Ss/Se/Ah/Al carry fixed values in the baseline process; their bytes
    // were length-checked above and need no interpretation here.
    Ok(ScanHeader { comps })
}

/// Decodes one 8x8 block's worth of entropy data into `coeffs`.
fn decode_block(
    reader: &mut BitReader,
    dc: &DecodeTable,
    ac: &DecodeTable,
    pred: &mut i32,
    coeffs: &mut [i32; 64],
) -> Result<()> {
    coeffs.fill(0);
    let size = dc.decode(|| reader.next_bit())?;
    if size > 11 {
        return Err(Error::CorruptStream(format!(
            "DC category {size} outside the baseline range"
        )));
    }
    let diff = if size == 0 {
        0
    } else {
        extend(reader.receive(size)?, size)
    };
    *pred += diff;
    coeffs[0] = *pred;

    let mut k = 1usize;
    while k < 64 {
        let rs = ac.decode(|| reader.next_bit())?;
        let (run, size) = ((rs >> 4) as usize, rs & 0x0F);
        if size == 0 {
            if rs == 0x00 {
                break; // EOB
            }
            if rs == 0xF0 {
                k += 16; // ZRL
                continue;
            }
            return Err(Error::CorruptStream(format!(
                "invalid AC run/size symbol {rs:#04x}"
            )));
        }
        if size > 10 {
            return Err(Error::CorruptStream(format!(
                "AC category {size} outside the baseline range"
            )));
        }
        k += run;
        if k > 63 {
            return Err(Error::CorruptStream("AC run overruns the block".into()));
        }
        coeffs[UNZIGZAG[k]] = extend(reader.receive(size)?, size);
        k += 1;
    }
    Ok(())
}

/// Decodes the entropy data of one scan, handing in-range blocks to `sink`.
/// Returns the byte position where marker scanning resumes.
fn decode_scan<S: CoeffSink>(
    bytes: &[u8],
    pos: usize,
    frame: &FrameInfo,
    header: &mut ScanHeader,
    (dc_tables, ac_tables): (&[Option<DecodeTable>; 4], &[Option<DecodeTable>; 4]),
    restart_interval: u16,
    sink: &mut S,
) -> Result<usize> {
    // Required-marker checks, surfaced with the marker names.
    for sc in &header.comps {
        let comp = &frame.comps[sc.comp];
        if frame.qtables[comp.tq].is_none() {
            return Err(Error::CorruptStream(format!(
                "missing required marker: no DQT table {} before SOS",
                comp.tq
            )));
        }
        if dc_tables[sc.dc_table].is_none() || ac_tables[sc.ac_table].is_none() {
            return Err(Error::CorruptStream(
                "missing required marker: DHT before SOS".into(),
            ));
        }
    }

    let mut reader = BitReader::new(bytes, pos);
    let mut coeffs = [0i32; 64];
    let interleaved = header.comps.len() > 1;

    // MCU geometry: interleaved scans step over hmax*vmax-aligned units,
    // single-component scans treat each block as one MCU (T.81 A.2).
    let (mcus_x, mcus_y) = if interleaved {
        (
            ceil_div(frame.width as u32, 8 * frame.hmax as u32),
            ceil_div(frame.height as u32, 8 * frame.vmax as u32),
        )
    } else {
        let c = &frame.comps[header.comps[0].comp];
        (c.blocks_x, c.blocks_y)
    };
    let total_mcus = mcus_x as u64 * mcus_y as u64;
    let mut restart_count = 0u8;

    for mcu in 0..total_mcus {
        if restart_interval > 0 && mcu > 0 && mcu % restart_interval as u64 == 0 {
            reader.sync_restart(restart_count % 8)?;
            restart_count = restart_count.wrapping_add(1);
            for sc in header.comps.iter_mut() {
                sc.pred = 0;
            }
        }
        let mx = (mcu % mcus_x as u64) as u32;
        let my = (mcu / mcus_x as u64) as u32;
        for sc in header.comps.iter_mut() {
            let comp = &frame.comps[sc.comp];
            let dc = dc_tables[sc.dc_table].as_ref().unwrap();
            let ac = ac_tables[sc.ac_table].as_ref().unwrap();
            let (bh, bv) = if interleaved {
                (comp.h as u32, comp.v as u32)
            } else {
                (1, 1)
            };
            for j in 0..bv {
                for i in 0..bh {
                    decode_block(&mut reader, dc, ac, &mut sc.pred, &mut coeffs)?;
                    let (bx, by) = if interleaved {
                        (mx * bh + i, my * bv + j)
                    } else {
                        (mx, my)
                    };
                    if bx < comp.blocks_x && by < comp.blocks_y {
                        sink.block(sc.comp, bx, by, &coeffs);
                    }
                }
            }
        }
    }
    Ok(reader.finish())
}

/// Walks the marker stream and decodes every scan, reporting blocks to the
/// sink built by `make_sink` once the frame header is known.
pub fn decode_bitstream<S: CoeffSink>(
    bytes: &[u8],
    make_sink: impl FnOnce(&FrameInfo) -> S,
) -> Result<(FrameInfo, S)> {
    if bytes.len() < 2 || !(bytes[0] == 0xFF && bytes[1] == marker::SOI) {
        return Err(Error::CorruptStream("missing SOI marker".into()));
    }
    let mut pos = 2usize;
    let mut frame: Option<FrameInfo> = None;
    let mut sink: Option<S> = None;
    let mut make_sink = Some(make_sink);
    let mut qtables: [Option<[u16; 64]>; 4] = [None, None, None, None];
    let mut dc_tables: [Option<DecodeTable>; 4] = [None, None, None, None];
    let mut ac_tables: [Option<DecodeTable>; 4] = [None, None, None, None];
    let mut restart_interval = 0u16;
    let mut comps_decoded: Vec<bool> = Vec::new();

    loop {
        let m = read_marker(bytes, &mut pos)?;
        match m {
            marker::EOI => break,
            marker::SOI => return Err(Error::CorruptStream("nested SOI marker".into())),
            marker::SOF0 | 0xC1 => {
                if frame.is_some() {
                    return Err(Error::CorruptStream("multiple frame headers".into()));
                }
                let payload = segment_payload(bytes, &mut pos)?;
                let (width, height, comps) = parse_sof(&bytes[payload])?;
                comps_decoded = vec![false; comps.len()];
                let info = FrameInfo {
                    width,
                    height,
                    hmax: comps.iter().map(|c| c.h).max().unwrap(),
                    vmax: comps.iter().map(|c| c.v).max().unwrap(),
                    comps,
                    qtables,
                    restart_interval,
                };
                qtables = [None, None, None, None];
                sink = Some(make_sink.take().unwrap()(&info));
                frame = Some(info);
            }
            marker::SOF2 => {
                return Err(Error::UnsupportedFormat("progressive JPEG (SOF2)".into()))
            }
            0xC9 | 0xCA | 0xCB | 0xCD | 0xCE | 0xCF | marker::DAC => {
                return Err(Error::UnsupportedFormat("arithmetic-coded JPEG".into()))
            }
            m if marker::is_sof(m) => {
                return Err(Error::UnsupportedFormat(format!(
                    "unsupported coding process (SOF marker FF{m:02X})"
                )))
            }
            marker::DQT => {
                let payload = segment_payload(bytes, &mut pos)?;
                let target = match frame.as_mut() {
                    Some(f) => &mut f.qtables,
                    None => &mut qtables,
                };
                parse_dqt(&bytes[payload], target)?;
            }
            marker::DHT => {
                let payload = segment_payload(bytes, &mut pos)?;
                parse_dht(&bytes[payload], &mut dc_tables, &mut ac_tables)?;
            }
            marker::DRI => {
                let payload = segment_payload(bytes, &mut pos)?;
                let body = &bytes[payload];
                if body.len() != 2 {
                    return Err(Error::CorruptStream("malformed DRI segment".into()));
                }
                restart_interval = u16::from_be_bytes([body[0], body[1]]);
                if let Some(f) = frame.as_mut() {
                    f.restart_interval = restart_interval;
                }
            }
            marker::SOS => {
                let f = frame.as_mut().ok_or_else(|| {
                    Error::CorruptStream("missing required marker: SOF0 before SOS".into())
                })?;
                let payload = segment_payload(bytes, &mut pos)?;
                let mut header = parse_sos(&bytes[payload], &f.comps)?;
                pos = decode_scan(
                    bytes,
                    pos,
                    f,
                    &mut header,
                    (&dc_tables, &ac_tables),
                    restart_interval,
                    sink.as_mut().unwrap(),
                )?;
                for sc in &header.comps {
                    comps_decoded[sc.comp] = true;
                }
            }
            0xE0..=0xEF | marker::COM | 0xDC => {
                // APPn, comments, and DNL carry no feature information.
                segment_payload(bytes, &mut pos)?;
            }
            other => {
                return Err(Error::CorruptStream(format!(
                    "unexpected marker FF{other:02X}"
                )));
            }
        }
    }

    let frame = frame.ok_or_else(|| Error::CorruptStream("stream has no frame header".into()))?;
    if comps_decoded.iter().any(|&done| !done) {
        return Err(Error::CorruptStream(
            "frame component missing scan data".into(),
        ));
    }
    Ok((frame, sink.unwrap()))
}
