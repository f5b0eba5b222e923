//! The live set of empty boxes.
//!
//! Records live in a dense slot array indexed by [`BoxId`] with a free list;
//! an ordered set of packed `u128` keys answers max-width queries in
//! `O(log n)`. Per-class area, count and `h/w` sums are kept with
//! compensated accumulation so that aggregates stay exact enough for the
//! area identity over 10^7 insert/remove pairs.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::codec::{Dec, Enc};
use crate::error::{Error, Result};
use crate::geometry::Rect;
use crate::numeric::Neumaier;

pub type BoxId = u32;

/// Lineage class of a box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoxClass {
    Stripe,
    Ep1,
    Ep2,
    Norm1,
    Norm2,
}

impl BoxClass {
    pub const ALL: [BoxClass; 5] = [BoxClass::Stripe, BoxClass::Ep1, BoxClass::Ep2, BoxClass::Norm1, BoxClass::Norm2];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub(crate) fn from_index(i: u8) -> Option<BoxClass> {
        BoxClass::ALL.get(i as usize).copied()
    }

    pub fn is_normal(self) -> bool {
        matches!(self, BoxClass::Norm1 | BoxClass::Norm2)
    }

    pub fn is_endpoint(self) -> bool {
        matches!(self, BoxClass::Ep1 | BoxClass::Ep2)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BoxClass::Stripe => "stripe",
            BoxClass::Ep1 => "ep1",
            BoxClass::Ep2 => "ep2",
            BoxClass::Norm1 => "norm1",
            BoxClass::Norm2 => "norm2",
        }
    }
}

/// An empty rectangular box. `w` is the lesser side, `h` the greater.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxRec {
    pub id: BoxId,
    pub w: f64,
    pub h: f64,
    pub class: BoxClass,
    /// Detail index `n` for a normal box `B_n`; row-start index otherwise.
    pub origin_n: u64,
    pub created_at: u64,
    pub pos: Option<Rect>,
}

impl BoxRec {
    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

/// A box to be inserted; the store assigns the id.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxSpec {
    pub w: f64,
    pub h: f64,
    pub class: BoxClass,
    pub origin_n: u64,
    pub created_at: u64,
    pub pos: Option<Rect>,
}

impl BoxSpec {
    /// Build from two unordered sides.
    pub fn from_sides(a: f64, b: f64, class: BoxClass, origin_n: u64, created_at: u64) -> Self {
        let (w, h) = if a <= b { (a, b) } else { (b, a) };
        BoxSpec { w, h, class, origin_n, created_at, pos: None }
    }

    pub fn with_pos(mut self, pos: Rect) -> Self {
        self.pos = Some(pos);
        self
    }
}

const VACANT: u8 = u8::MAX;

#[derive(Debug, Clone, Copy)]
struct Slot {
    w: f64,
    h: f64,
    origin: u32,
    created: u32,
    class: u8,
}

impl Slot {
    const EMPTY: Slot = Slot { w: 0.0, h: 0.0, origin: 0, created: 0, class: VACANT };

    fn live(&self) -> bool {
        self.class != VACANT
    }
}

/// Per-class running sums.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Aggregates {
    area: [Neumaier; 5],
    count: [u64; 5],
    hw: [Neumaier; 5],
    total: Neumaier,
}

impl Aggregates {
    pub fn area(&self, class: BoxClass) -> f64 {
        self.area[class.index()].value()
    }

    pub fn count(&self, class: BoxClass) -> u64 {
        self.count[class.index()]
    }

    /// Sum of `h/w` over live boxes of `class`.
    pub fn hw_sum(&self, class: BoxClass) -> f64 {
        self.hw[class.index()].value()
    }

    /// `S_boxes`, the total live box area.
    pub fn total_area(&self) -> f64 {
        self.total.value()
    }

    pub fn total_count(&self) -> u64 {
        self.count.iter().sum()
    }

    pub fn normal_area(&self) -> f64 {
        self.area(BoxClass::Norm1) + self.area(BoxClass::Norm2)
    }

    pub fn endpoint_area(&self) -> f64 {
        self.area(BoxClass::Ep1) + self.area(BoxClass::Ep2)
    }

    fn apply(&mut self, slot: &Slot, sign: f64) {
        let c = slot.class as usize;
        let a = slot.w * slot.h;
        self.area[c].add(sign * a);
        self.total.add(sign * a);
        self.hw[c].add(sign * (slot.h / slot.w));
        if sign > 0.0 {
            self.count[c] += 1;
        } else {
            self.count[c] -= 1;
        }
    }
}

#[inline]
fn width_key(w: f64, created: u32, id: BoxId) -> u128 {
    // Positive finite floats order like their bit patterns. Inverting the
    // lower fields makes the set maximum the oldest, then lowest-id box.
    ((w.to_bits() as u128) << 64) | (((u32::MAX - created) as u128) << 32) | (u32::MAX - id) as u128
}

#[inline]
fn key_id(key: u128) -> BoxId {
    u32::MAX - (key as u32)
}

/// `w / h^gamma`, evaluated as `w * exp(-gamma ln h)`.
#[inline]
pub fn shape_ratio(w: f64, h: f64, gamma: f64) -> f64 {
    w * (-gamma * h.ln()).exp()
}

/// Tracks `w / h^gamma` over live normal boxes.
#[derive(Debug, Clone)]
struct ShapeIndex {
    gamma: f64,
    keys: BTreeSet<u128>,
}

impl ShapeIndex {
    #[inline]
    fn shape(&self, w: f64, h: f64) -> f64 {
        shape_ratio(w, h, self.gamma)
    }

    #[inline]
    fn key(&self, slot: &Slot, id: BoxId) -> u128 {
        ((self.shape(slot.w, slot.h).to_bits() as u128) << 64) | id as u128
    }
}

#[derive(Debug, Clone)]
pub struct BoxStore {
    slots: Vec<Slot>,
    free: Vec<BoxId>,
    by_width: BTreeSet<u128>,
    agg: Aggregates,
    positions: Option<Vec<Option<Rect>>>,
    shapes: Option<ShapeIndex>,
}

impl Default for BoxStore {
    fn default() -> Self {
        Self::new()
    }
}

impl BoxStore {
    pub fn new() -> Self {
        BoxStore {
            slots: Vec::new(),
            free: Vec::new(),
            by_width: BTreeSet::new(),
            agg: Aggregates::default(),
            positions: None,
            shapes: None,
        }
    }

    /// Keep geometric positions for every box (layout mode).
    pub fn with_positions(mut self) -> Self {
        self.positions = Some(vec![None; self.slots.len()]);
        self
    }

    /// Maintain the maximum of `w / h^gamma` over live normal boxes.
    pub fn with_shape_tracking(mut self, gamma: f64) -> Self {
        let mut idx = ShapeIndex { gamma, keys: BTreeSet::new() };
        for (id, s) in self.slots.iter().enumerate() {
            if s.live() && BoxClass::from_index(s.class).is_some_and(BoxClass::is_normal) {
                idx.keys.insert(idx.key(s, id as BoxId));
            }
        }
        self.shapes = Some(idx);
        self
    }

    pub fn tracks_positions(&self) -> bool {
        self.positions.is_some()
    }

    pub fn len(&self) -> usize {
        self.by_width.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_width.is_empty()
    }

    pub fn aggregates(&self) -> &Aggregates {
        &self.agg
    }

    fn validate(w: f64, h: f64, pos: Option<&Rect>) -> Result<()> {
        if !(w.is_finite() && h.is_finite() && w > 0.0 && w <= h) {
            return Err(Error::InvalidBox(format!("sides must satisfy 0 < w <= h, got w={w}, h={h}")));
        }
        if let Some(p) = pos {
            let (a, b) = p.sides();
            let tol = 1e-12 * h;
            if (a - w).abs() > tol || (b - h).abs() > tol {
                return Err(Error::InvalidBox(format!(
                    "placed rectangle {}x{} does not match sides {w}x{h}",
                    p.dx, p.dy
                )));
            }
        }
        Ok(())
    }

    fn compact_time(v: u64, what: &str) -> Result<u32> {
        u32::try_from(v).map_err(|_| Error::Overflow(format!("{what} {v} exceeds the 32-bit box index range")))
    }

    /// Insert a box, returning its id.
    pub fn insert(&mut self, spec: BoxSpec) -> Result<BoxId> {
        Self::validate(spec.w, spec.h, spec.pos.as_ref())?;
        let slot = Slot {
            w: spec.w,
            h: spec.h,
            origin: Self::compact_time(spec.origin_n, "origin index")?,
            created: Self::compact_time(spec.created_at, "creation time")?,
            class: spec.class.index() as u8,
        };
        let id = match self.free.pop() {
            Some(id) => id,
            None => {
                let id = BoxId::try_from(self.slots.len())
                    .ok()
                    .filter(|&id| id < u32::MAX)
                    .ok_or_else(|| Error::Overflow("box store is full".into()))?;
                self.slots.push(Slot::EMPTY);
                if let Some(p) = self.positions.as_mut() {
                    p.push(None);
                }
                id
            }
        };
        self.place(id, slot, spec.pos);
        Ok(id)
    }

    /// Insert a record under its own id (used when restoring state).
    pub fn insert_with_id(&mut self, rec: BoxRec) -> Result<()> {
        Self::validate(rec.w, rec.h, rec.pos.as_ref())?;
        let id = rec.id;
        if id == u32::MAX {
            return Err(Error::InvalidBox("id u32::MAX is reserved".into()));
        }
        if self.slots.get(id as usize).is_some_and(Slot::live) {
            return Err(Error::DuplicateId(id));
        }
        let slot = Slot {
            w: rec.w,
            h: rec.h,
            origin: Self::compact_time(rec.origin_n, "origin index")?,
            created: Self::compact_time(rec.created_at, "creation time")?,
            class: rec.class.index() as u8,
        };
        while self.slots.len() <= id as usize {
            let fresh = self.slots.len() as BoxId;
            self.slots.push(Slot::EMPTY);
            if let Some(p) = self.positions.as_mut() {
                p.push(None);
            }
            if fresh != id {
                self.free.push(fresh);
            }
        }
        self.free.retain(|&f| f != id);
        self.place(id, slot, rec.pos);
        Ok(())
    }

    fn place(&mut self, id: BoxId, slot: Slot, pos: Option<Rect>) {
        self.slots[id as usize] = slot;
        self.by_width.insert(width_key(slot.w, slot.created, id));
        self.agg.apply(&slot, 1.0);
        if let Some(s) = self.shapes.as_mut() {
            if BoxClass::from_index(slot.class).is_some_and(BoxClass::is_normal) {
                s.keys.insert(s.key(&slot, id));
            }
        }
        if let Some(p) = self.positions.as_mut() {
            p[id as usize] = pos;
        }
    }

    pub fn contains(&self, id: BoxId) -> bool {
        self.slots.get(id as usize).is_some_and(Slot::live)
    }

    pub fn get(&self, id: BoxId) -> Option<BoxRec> {
        let s = self.slots.get(id as usize).filter(|s| s.live())?;
        Some(self.record(id, s))
    }

    fn record(&self, id: BoxId, s: &Slot) -> BoxRec {
        BoxRec {
            id,
            w: s.w,
            h: s.h,
            class: BoxClass::from_index(s.class).expect("live slot has a class"),
            origin_n: s.origin as u64,
            created_at: s.created as u64,
            pos: self.positions.as_ref().and_then(|p| p[id as usize]),
        }
    }

    pub fn remove(&mut self, id: BoxId) -> Result<BoxRec> {
        let slot = match self.slots.get(id as usize) {
            Some(s) if s.live() => *s,
            _ => return Err(Error::BoxNotFound(id)),
        };
        let rec = self.record(id, &slot);
        let removed = self.by_width.remove(&width_key(slot.w, slot.created, id));
        debug_assert!(removed, "width index out of sync for box {id}");
        self.agg.apply(&slot, -1.0);
        if let Some(s) = self.shapes.as_mut() {
            if rec.class.is_normal() {
                s.keys.remove(&s.key(&slot, id));
            }
        }
        if let Some(p) = self.positions.as_mut() {
            p[id as usize] = None;
        }
        self.slots[id as usize] = Slot::EMPTY;
        self.free.push(id);
        Ok(rec)
    }

    /// The widest box; ties go to the earliest-created, then the lowest id.
    pub fn max_width(&self) -> Option<BoxId> {
        self.by_width.last().map(|&k| key_id(k))
    }

    /// Width of the widest box, if any.
    pub fn max_width_value(&self) -> Option<f64> {
        self.by_width.last().map(|&k| f64::from_bits((k >> 64) as u64))
    }

    /// `max w(B)/h(B)^gamma` over live normal boxes; `None` when shape
    /// tracking is off or no normal box is live.
    pub fn max_normal_shape(&self) -> Option<f64> {
        let s = self.shapes.as_ref()?;
        s.keys.last().map(|&k| f64::from_bits((k >> 64) as u64))
    }

    /// Live boxes in id order.
    pub fn iter(&self) -> impl Iterator<Item = BoxRec> + '_ {
        self.slots
            .iter()
            .enumerate()
            .filter(|(_, s)| s.live())
            .map(move |(i, s)| self.record(i as BoxId, s))
    }

    pub(crate) fn encode<W: Write>(&self, enc: &mut Enc<W>) -> Result<()> {
        enc.u64(self.slots.len() as u64)?;
        for s in &self.slots {
            enc.u8(s.class)?;
            if s.live() {
                enc.f64(s.w)?;
                enc.f64(s.h)?;
                enc.u32(s.origin)?;
                enc.u32(s.created)?;
            }
        }
        enc.u64(self.free.len() as u64)?;
        for &f in &self.free {
            enc.u32(f)?;
        }
        for c in 0..5 {
            enc.sum(&self.agg.area[c])?;
            enc.sum(&self.agg.hw[c])?;
            enc.u64(self.agg.count[c])?;
        }
        enc.sum(&self.agg.total)?;
        enc.opt_f64(self.shapes.as_ref().map(|s| s.gamma))?;
        enc.bool(self.positions.is_some())?;
        if let Some(p) = &self.positions {
            for r in p {
                match r {
                    Some(r) => {
                        enc.u8(1)?;
                        for v in [r.x, r.y, r.dx, r.dy] {
                            enc.f64(v)?;
                        }
                    }
                    None => enc.u8(0)?,
                }
            }
        }
        Ok(())
    }

    pub(crate) fn decode<R: Read>(dec: &mut Dec<R>) -> Result<BoxStore> {
        let n = dec.u64()? as usize;
        let mut slots = Vec::with_capacity(n);
        let mut by_width = BTreeSet::new();
        for id in 0..n {
            let class = dec.u8()?;
            if class == VACANT {
                slots.push(Slot::EMPTY);
                continue;
            }
            if BoxClass::from_index(class).is_none() {
                return Err(Error::Checkpoint(format!("invalid box class byte {class}")));
            }
            let s = Slot { w: dec.f64()?, h: dec.f64()?, origin: dec.u32()?, created: dec.u32()?, class };
            by_width.insert(width_key(s.w, s.created, id as BoxId));
            slots.push(s);
        }
        let nf = dec.u64()? as usize;
        let mut free = Vec::with_capacity(nf);
        for _ in 0..nf {
            free.push(dec.u32()?);
        }
        let mut agg = Aggregates::default();
        for c in 0..5 {
            agg.area[c] = dec.sum()?;
            agg.hw[c] = dec.sum()?;
            agg.count[c] = dec.u64()?;
        }
        agg.total = dec.sum()?;
        let shape_gamma = dec.opt_f64()?;
        let positions = if dec.bool()? {
            let mut p = Vec::with_capacity(n);
            for _ in 0..n {
                p.push(match dec.u8()? {
                    0 => None,
                    _ => Some(Rect::new(dec.f64()?, dec.f64()?, dec.f64()?, dec.f64()?)),
                });
            }
            Some(p)
        } else {
            None
        };
        let mut store = BoxStore { slots, free, by_width, agg, positions, shapes: None };
        if let Some(g) = shape_gamma {
            store = store.with_shape_tracking(g);
        }
        Ok(store)
    }
}
