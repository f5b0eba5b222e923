//! Independent checks on layouts and on conserved quantities of a run.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use serde::Serialize;

use crate::box_store::BoxId;
use crate::detail::{detail_dims, DetailKind, Gamma};
use crate::engine::{CriticalEvent, StatSnapshot};
use crate::geometry::{Layout, Rect};
use crate::numeric::Neumaier;

/// Relative slack used to shrink rectangles before the overlap test.
pub const OVERLAP_SHRINK: f64 = 1e-12;
pub const DIMS_REL_TOL: f64 = 1e-12;
pub const AREA_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", content = "id", rename_all = "lowercase")]
pub enum Item {
    Detail(u64),
    Box(BoxId),
    Lrp,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct VerifyReport {
    pub rect_count: usize,
    pub overlaps: Vec<(Item, Item)>,
    pub out_of_bounds: Vec<Item>,
    /// `(sum of rectangle areas - sheet area) / sheet area`.
    pub area_residual: f64,
    pub wtcrit_violations: Vec<u64>,
    pub half_perimeter_violations: Vec<u64>,
    pub dims_mismatches: Vec<u64>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.overlaps.is_empty()
            && self.out_of_bounds.is_empty()
            && self.wtcrit_violations.is_empty()
            && self.half_perimeter_violations.is_empty()
            && self.dims_mismatches.is_empty()
            && self.area_residual.abs() <= AREA_TOL
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Debug, Clone, Copy)]
struct Shrunk {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

fn shrink(r: &Rect, eps: f64) -> Shrunk {
    Shrunk { x0: r.x + eps, x1: r.x_max() - eps, y0: r.y + eps, y1: r.y_max() - eps }
}

#[inline]
fn interiors_meet(a: &Shrunk, b: &Shrunk) -> bool {
    a.x0 < b.x1 && b.x0 < a.x1 && a.y0 < b.y1 && b.y0 < a.y1
}

fn normalize(mut pairs: Vec<(usize, usize)>) -> Vec<(usize, usize)> {
    for p in pairs.iter_mut() {
        if p.0 > p.1 {
            *p = (p.1, p.0);
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Index pairs `(i, j)`, `i < j`, whose interiors intersect after shrinking
/// each rectangle by `eps` on every edge. Quadratic reference implementation.
pub fn overlaps_brute(rects: &[Rect], eps: f64) -> Vec<(usize, usize)> {
    let s: Vec<Shrunk> = rects.iter().map(|r| shrink(r, eps)).collect();
    let mut out = Vec::new();
    for i in 0..s.len() {
        for j in i + 1..s.len() {
            if interiors_meet(&s[i], &s[j]) {
                out.push((i, j));
            }
        }
    }
    out
}

/// Same result as [`overlaps_brute`] via a sweep over `x`.
pub fn overlaps_sweep(rects: &[Rect], eps: f64) -> Vec<(usize, usize)> {
    let s: Vec<Shrunk> = rects.iter().map(|r| shrink(r, eps)).collect();
    let mut order: Vec<usize> = (0..s.len()).filter(|&i| s[i].x0 < s[i].x1 && s[i].y0 < s[i].y1).collect();
    order.sort_by(|&a, &b| s[a].x0.total_cmp(&s[b].x0).then(a.cmp(&b)));

    // Active rectangles keyed by (y0, index); heights kept as a multiset.
    let mut active: BTreeMap<(Key, usize), ()> = BTreeMap::new();
    let mut heights: BTreeMap<Key, usize> = BTreeMap::new();
    let mut expiry: BinaryHeap<std::cmp::Reverse<(Key, usize)>> = BinaryHeap::new();
    let mut out = Vec::new();

    for &i in &order {
        let r = s[i];
        while let Some(std::cmp::Reverse((Key(x1), j))) = expiry.peek().copied() {
            if x1 > r.x0 {
                break;
            }
            expiry.pop();
            active.remove(&(Key(s[j].y0), j));
            let h = Key(s[j].y1 - s[j].y0);
            if let Some(c) = heights.get_mut(&h) {
                *c -= 1;
                if *c == 0 {
                    heights.remove(&h);
                }
            }
        }
        if let Some((&Key(maxh), _)) = heights.last_key_value() {
            let lo = (Key(r.y0 - maxh), 0usize);
            let hi = (Key(r.y1), 0usize);
            if lo < hi {
                for (&(_, j), _) in active.range(lo..hi) {
                    if interiors_meet(&r, &s[j]) {
                        out.push((i, j));
                    }
                }
            }
        }
        active.insert((Key(r.y0), i), ());
        *heights.entry(Key(r.y1 - r.y0)).or_insert(0) += 1;
        expiry.push(std::cmp::Reverse((Key(r.x1), i)));
    }
    normalize(out)
}

fn layout_items(layout: &Layout) -> (Vec<Item>, Vec<Rect>) {
    let mut items = Vec::with_capacity(layout.details.len() + layout.boxes.len() + 1);
    let mut rects = Vec::with_capacity(items.capacity());
    for d in &layout.details {
        items.push(Item::Detail(d.n));
        rects.push(d.rect);
    }
    for b in &layout.boxes {
        items.push(Item::Box(b.id));
        rects.push(b.rect);
    }
    items.push(Item::Lrp);
    rects.push(layout.lrp);
    (items, rects)
}

fn dims_match(kind: DetailKind, n: u64, r: &Rect) -> bool {
    let Ok((w, h)) = detail_dims(kind, n as i64) else {
        return false;
    };
    let (a, b) = r.sides();
    (a - w).abs() <= DIMS_REL_TOL * w && (b - h).abs() <= DIMS_REL_TOL * h
}

/// Details, live boxes and the LRP must tile the sheet: disjoint interiors,
/// containment, exact detail dimensions and matching total area.
pub fn verify_layout(layout: &Layout) -> VerifyReport {
    let (items, rects) = layout_items(layout);
    let side = layout.side;
    let eps = OVERLAP_SHRINK * side;
    let sheet = Rect::new(0.0, 0.0, side, side);

    let overlaps = overlaps_sweep(&rects, eps).into_iter().map(|(i, j)| (items[i], items[j])).collect();
    let out_of_bounds = items
        .iter()
        .zip(&rects)
        .filter(|(_, r)| !sheet.contains(r, eps))
        .map(|(i, _)| *i)
        .collect();
    let dims_mismatches = layout
        .details
        .iter()
        .filter(|d| !dims_match(layout.kind, d.n, &d.rect))
        .map(|d| d.n)
        .collect();
    let mut area = Neumaier::new();
    for r in &rects {
        area.add(r.area());
    }
    let sheet_area = side * side;
    VerifyReport {
        rect_count: rects.len(),
        overlaps,
        out_of_bounds,
        area_residual: (area.value() - sheet_area) / sheet_area,
        dims_mismatches,
        ..VerifyReport::default()
    }
}

/// `(S_LRP + S_norm + S_ep - S_com)/S_com` rebuilt from the snapshot's ratios.
pub fn verify_area_identity(snap: &StatSnapshot) -> f64 {
    let mut s = Neumaier::new();
    for r in [snap.ratio_lrp, snap.ratio_norm, snap.ratio_ep1, snap.ratio_ep2] {
        s.add(r);
    }
    s.sub(1.0);
    s.value()
}

/// Critical times at which `max w(B) >= 1/t + 1/t^gamma`.
pub fn verify_wtcrit(events: &[CriticalEvent], gamma: Gamma) -> Vec<u64> {
    events
        .iter()
        .filter(|e| e.max_w >= 1.0 / e.t as f64 + gamma.gap(e.t))
        .map(|e| e.t)
        .collect()
}

/// Critical times at which the summed height of stripe-row endpoints reaches
/// the half-perimeter of the sheet.
pub fn verify_half_perimeter(events: &[CriticalEvent], half_perimeter: f64) -> Vec<u64> {
    events.iter().filter(|e| e.stripe_ep_height_sum >= half_perimeter).map(|e| e.t).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{Engine, EngineConfig};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square_layout(details: u64) -> Layout {
        let cfg = EngineConfig::new(DetailKind::Square, 34, Gamma::new(10, 7).unwrap(), details).layout(true);
        let mut e = Engine::new(cfg).unwrap();
        e.drive(None, &mut ()).unwrap();
        e.layout().unwrap()
    }

    #[test]
    fn golden_layouts_pass() {
        for n in [35, 83] {
            let r = verify_layout(&square_layout(n));
            assert!(r.passed(), "{}", r.to_json());
            assert_eq!(r.rect_count, n as usize + square_layout(n).boxes.len() + 1);
        }
    }

    #[test]
    fn shifted_detail_is_detected() {
        let mut l = square_layout(35);
        l.details[10].rect.x += 1e-6;
        let r = verify_layout(&l);
        assert!(!r.passed());
        assert!(!r.overlaps.is_empty() || !r.out_of_bounds.is_empty());
        assert!(r.overlaps.iter().all(|(a, b)| *a == Item::Detail(44) || *b == Item::Detail(44)));
    }

    #[test]
    fn resized_detail_is_a_dims_mismatch() {
        let mut l = square_layout(35);
        l.details[0].rect.dx *= 0.999;
        let r = verify_layout(&l);
        assert_eq!(r.dims_mismatches, vec![34]);
    }

    #[test]
    fn shared_edges_are_legal() {
        let rects = [Rect::new(0.0, 0.0, 1.0, 1.0), Rect::new(1.0, 0.0, 1.0, 1.0), Rect::new(0.0, 1.0, 2.0, 1.0)];
        assert!(overlaps_sweep(&rects, 1e-12).is_empty());
        assert!(overlaps_brute(&rects, 1e-12).is_empty());
    }

    #[test]
    fn wtcrit_mutation() {
        let g = Gamma::new(4, 3).unwrap();
        let ev = CriticalEvent {
            t: 1000,
            s_lrp: 0.0,
            s_norm1: 0.0,
            s_norm2: 0.0,
            s_ep1: 0.0,
            s_ep2: 0.0,
            s_com: 1.0,
            ratio: 0.0,
            max_w: 0.5e-3,
            stripe_ep_height_sum: 0.0,
        };
        assert!(verify_wtcrit(&[ev], g).is_empty());
        assert_eq!(verify_wtcrit(&[CriticalEvent { max_w: 2e-3, ..ev }], g), vec![1000]);
        assert_eq!(verify_half_perimeter(&[CriticalEvent { stripe_ep_height_sum: 3.0, ..ev }], 2.0), vec![1000]);
    }

    fn random_rects(rng: &mut ChaCha8Rng, n: usize) -> Vec<Rect> {
        (0..n)
            .map(|_| {
                // A coarse grid makes shared edges and exact ties common.
                let x = rng.gen_range(0..64) as f64 / 8.0;
                let y = rng.gen_range(0..64) as f64 / 8.0;
                let dx = rng.gen_range(1..8) as f64 / 16.0;
                let dy = rng.gen_range(1..8) as f64 / 16.0;
                Rect::new(x, y, dx, dy)
            })
            .collect()
    }

    #[test]
    fn sweep_equals_brute_force_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in 0..20 {
            let rects = random_rects(&mut rng, 50 + 100 * k);
            assert_eq!(overlaps_sweep(&rects, 1e-12), overlaps_brute(&rects, 1e-12));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn sweep_equals_brute_force(raw in proptest::collection::vec((0u8..32, 0u8..32, 1u8..12, 1u8..12), 0..120)) {
            let rects: Vec<Rect> = raw
                .iter()
                .map(|&(x, y, w, h)| Rect::new(x as f64 / 4.0, y as f64 / 4.0, w as f64 / 8.0, h as f64 / 8.0))
                .collect();
            prop_assert_eq!(overlaps_sweep(&rects, 1e-12), overlaps_brute(&rects, 1e-12));
        }
    }
}
