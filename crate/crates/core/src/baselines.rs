//! Comparison packers.
//!
//! [`paulhus_run`] is the greedy packer that puts each detail into the
//! admissible box of least width (then least height, then oldest) and splits
//! the rest of the box with the same two cuts as the main engine. Its LRP is
//! the largest live box.
//! [`stack_run`] is the main engine with every gap term removed.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::detail::{dims_unchecked, DetailKind, Gamma, SheetSpec};
use crate::engine::{Engine, EngineConfig, RunOutput, RunStatus};
use crate::error::{Error, Result};
use crate::geometry::{Layout, PlacedDetail, Rect};
use crate::numeric::Neumaier;

#[derive(Debug, Clone, Copy, PartialEq)]
struct PBox {
    rect: Rect,
    w: f64,
    h: f64,
    created: u64,
    live: bool,
}

type PKey = (u64, u64, u64, u32);

fn pkey(b: &PBox, id: u32) -> PKey {
    (b.w.to_bits(), b.h.to_bits(), b.created, id)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineSummary {
    pub status: RunStatus,
    /// Index of the first detail not placed.
    pub last_t: u64,
    pub s_lrp: f64,
    pub s_com: f64,
    pub ratio_lrp: f64,
    pub box_count: u64,
    /// `(S_boxes - S_com)/S_com`, boxes including the LRP.
    pub area_residual: f64,
    /// `(t, S_LRP/S_com)` at every power of ten reached, plus the end.
    pub ratio_samples: Vec<(u64, f64)>,
}

#[derive(Debug, Clone)]
pub struct BaselineOutput {
    pub summary: BaselineSummary,
    pub layout: Option<Layout>,
}

struct Paulhus {
    kind: DetailKind,
    side: f64,
    boxes: Vec<PBox>,
    free: Vec<u32>,
    index: BTreeSet<PKey>,
    box_area: Neumaier,
    by_area: BTreeSet<(u64, u32)>,
}

impl Paulhus {
    fn insert(&mut self, rect: Rect, created: u64) -> Option<u32> {
        if !(rect.dx > 0.0 && rect.dy > 0.0) {
            return None;
        }
        let (w, h) = rect.sides();
        let b = PBox { rect, w, h, created, live: true };
        let id = match self.free.pop() {
            Some(id) => {
                self.boxes[id as usize] = b;
                id
            }
            None => {
                self.boxes.push(b);
                (self.boxes.len() - 1) as u32
            }
        };
        self.index.insert(pkey(&b, id));
        self.by_area.insert((rect.area().to_bits(), id));
        self.box_area.add(rect.area());
        Some(id)
    }

    fn remove(&mut self, id: u32) -> PBox {
        let b = self.boxes[id as usize];
        self.index.remove(&pkey(&b, id));
        self.by_area.remove(&(b.rect.area().to_bits(), id));
        self.boxes[id as usize].live = false;
        self.free.push(id);
        self.box_area.sub(b.rect.area());
        b
    }

    /// Least-width box with `w >= wd` and `h >= hd`.
    fn choose(&self, wd: f64, hd: f64) -> Option<u32> {
        self.index
            .range((wd.to_bits(), 0, 0, 0)..)
            .find(|k| f64::from_bits(k.1) >= hd)
            .map(|k| k.3)
    }

    /// The largest live box; ties go to the newest slot.
    fn lrp(&self) -> Option<u32> {
        self.by_area.last().map(|k| k.1)
    }

    fn lrp_area(&self) -> f64 {
        self.lrp().map_or(0.0, |id| self.boxes[id as usize].rect.area())
    }
}

/// Greedy min-admissible-width packing of `count` details starting at `n_start`
/// into a square sheet of matching area.
pub fn paulhus_run(kind: DetailKind, n_start: u64, count: u64, keep_layout: bool) -> Result<BaselineOutput> {
    if n_start == 0 || count == 0 {
        return Err(Error::Config("paulhus_run needs n_start >= 1 and count >= 1".into()));
    }
    if n_start.checked_add(count).is_none_or(|e| e > u32::MAX as u64) {
        return Err(Error::Config("paulhus_run index range exceeds 32 bits".into()));
    }
    let sheet = SheetSpec::new(kind, n_start)?;
    let mut p = Paulhus {
        kind,
        side: sheet.side,
        boxes: Vec::new(),
        free: Vec::new(),
        index: BTreeSet::new(),
        box_area: Neumaier::new(),
        by_area: BTreeSet::new(),
    };
    p.insert(Rect::new(0.0, 0.0, sheet.side, sheet.side), n_start);
    let mut s_com = Neumaier::new();
    s_com.add(sheet.area);
    let mut details = keep_layout.then(Vec::new);
    let mut samples = Vec::new();
    let mut next_sample = 10u64;
    while next_sample <= n_start {
        next_sample = next_sample.saturating_mul(10);
    }
    let end = n_start + count;
    let mut status = RunStatus::Completed;
    let mut t = n_start;
    while t < end {
        let (wd, hd) = dims_unchecked(p.kind, t);
        let Some(id) = p.choose(wd, hd) else {
            status = RunStatus::FailedStep4;
            break;
        };
        let b = p.remove(id);
        let r = b.rect;
        let along_x = r.dx > r.dy;
        let (detail, ep, norm) = if along_x {
            (
                Rect::new(r.x, r.y, hd, wd),
                Rect::new(r.x + hd, r.y, r.dx - hd, r.dy),
                Rect::new(r.x, r.y + wd, hd, r.dy - wd),
            )
        } else {
            (
                Rect::new(r.x, r.y, wd, hd),
                Rect::new(r.x, r.y + hd, r.dx, r.dy - hd),
                Rect::new(r.x + wd, r.y, r.dx - wd, hd),
            )
        };
        p.insert(ep, t);
        p.insert(norm, t);
        s_com.sub(wd * hd);
        if let Some(d) = details.as_mut() {
            d.push(PlacedDetail { n: t, rect: detail });
        }
        t += 1;
        if t == next_sample {
            samples.push((t, p.lrp_area() / s_com.value()));
            next_sample = next_sample.saturating_mul(10);
        }
    }
    let ratio = p.lrp_area() / s_com.value();
    if samples.last().is_none_or(|s| s.0 != t) {
        samples.push((t, ratio));
    }
    let lrp = p.lrp();
    let layout = details.map(|details| Layout {
        kind,
        n0: n_start,
        side: p.side,
        details,
        boxes: p
            .boxes
            .iter()
            .enumerate()
            .filter(|(i, b)| b.live && lrp != Some(*i as u32))
            .map(|(i, b)| crate::geometry::LayoutBox {
                id: i as u32,
                // Greedy boxes have no lineage.
                class: crate::box_store::BoxClass::Ep2,
                origin_n: b.created,
                created_at: b.created,
                rect: b.rect,
            })
            .collect(),
        lrp: lrp.map_or(Rect::new(p.side, p.side, 0.0, 0.0), |id| p.boxes[id as usize].rect),
    });
    Ok(BaselineOutput {
        summary: BaselineSummary {
            status,
            last_t: t,
            s_lrp: p.lrp_area(),
            s_com: s_com.value(),
            ratio_lrp: ratio,
            box_count: p.index.len() as u64,
            area_residual: (p.box_area.value() - s_com.value()) / s_com.value(),
            ratio_samples: samples,
        },
        layout,
    })
}

/// The main engine with snug stacking: no gap when opening rows or cutting stripes.
pub fn stack_run(kind: DetailKind, n0: u64, count: u64, gamma: Gamma, layout: bool) -> Result<(RunOutput, Option<Layout>)> {
    let cfg = EngineConfig { snug: true, allow_gamma_out_of_range: true, ..EngineConfig::new(kind, n0, gamma, count) }
        .layout(layout);
    let mut engine = Engine::new(cfg)?;
    let out = engine.collect(None)?;
    let l = if layout { Some(engine.layout()?) } else { None };
    Ok((out, l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::verify_layout;

    /// Linear-scan reference: least width, then least height, then oldest, then lowest slot.
    fn brute_paulhus(count: u64) -> Vec<Rect> {
        let mut boxes: Vec<Option<(Rect, u64)>> = vec![Some((Rect::new(0.0, 0.0, 1.0, 1.0), 1))];
        let mut free: Vec<usize> = Vec::new();
        let mut out = Vec::new();
        for t in 1..=count {
            let (wd, hd) = dims_unchecked(DetailKind::Rect, t);
            let mut best: Option<(usize, (u64, u64, u64, usize))> = None;
            for (i, b) in boxes.iter().enumerate() {
                let Some((r, c)) = b else { continue };
                let (w, h) = r.sides();
                if w >= wd && h >= hd {
                    let key = (w.to_bits(), h.to_bits(), *c, i);
                    if best.is_none_or(|(_, k)| key < k) {
                        best = Some((i, key));
                    }
                }
            }
            let (i, _) = best.expect("admissible box");
            let (r, _) = boxes[i].take().unwrap();
            free.push(i);
            let (d, e, n) = if r.dx > r.dy {
                (
                    Rect::new(r.x, r.y, hd, wd),
                    Rect::new(r.x + hd, r.y, r.dx - hd, r.dy),
                    Rect::new(r.x, r.y + wd, hd, r.dy - wd),
                )
            } else {
                (
                    Rect::new(r.x, r.y, wd, hd),
                    Rect::new(r.x, r.y + hd, r.dx, r.dy - hd),
                    Rect::new(r.x + wd, r.y, r.dx - wd, hd),
                )
            };
            for piece in [e, n] {
                if piece.dx > 0.0 && piece.dy > 0.0 {
                    match free.pop() {
                        Some(j) => boxes[j] = Some((piece, t)),
                        None => boxes.push(Some((piece, t))),
                    }
                }
            }
            out.push(d);
        }
        out
    }

    #[test]
    fn one_detail() {
        let out = paulhus_run(DetailKind::Rect, 1, 1, true).unwrap();
        let l = out.layout.unwrap();
        assert_eq!(l.details[0].rect, Rect::new(0.0, 0.0, 0.5, 1.0));
        assert_eq!(out.summary.box_count, 1);
        assert_eq!(out.summary.s_lrp, 0.5);
        assert_eq!(out.summary.ratio_lrp, 1.0);
    }

    #[test]
    fn choice_matches_linear_scan() {
        let out = paulhus_run(DetailKind::Rect, 1, 3000, true).unwrap();
        let got: Vec<Rect> = out.layout.unwrap().details.iter().map(|d| d.rect).collect();
        assert_eq!(got, brute_paulhus(3000));
    }

    #[test]
    fn fifteen_details_leave_one_large_box() {
        let out = paulhus_run(DetailKind::Rect, 1, 15, true).unwrap();
        let l = out.layout.unwrap();
        assert!(verify_layout(&l).passed());
        let lrp = l.lrp.area();
        assert!(l.boxes.iter().all(|b| b.rect.area() < lrp));
        let second = l.boxes.iter().map(|b| b.rect.area()).fold(0.0, f64::max);
        assert!(lrp > 1.5 * second);
    }

    #[test]
    fn ten_thousand_details_verify() {
        let out = paulhus_run(DetailKind::Rect, 1, 10_000, true).unwrap();
        assert_eq!(out.summary.status, RunStatus::Completed);
        assert!(out.summary.area_residual.abs() < 1e-9);
        let r = verify_layout(&out.layout.unwrap());
        assert!(r.passed(), "{}", r.to_json());
    }

    #[test]
    fn rejects_empty_requests() {
        assert!(paulhus_run(DetailKind::Rect, 0, 10, false).is_err());
        assert!(paulhus_run(DetailKind::Rect, 1, 0, false).is_err());
    }

    #[test]
    fn stack_runs() {
        let g = Gamma::new(4, 3).unwrap();
        let (out, l) = stack_run(DetailKind::Rect, 100, 195, g, true).unwrap();
        assert_eq!(out.summary.status, RunStatus::Completed);
        assert!(verify_layout(&l.unwrap()).passed());
        let (out, _) = stack_run(DetailKind::Rect, 100, 10_000, g, false).unwrap();
        assert_eq!(out.summary.status, RunStatus::Completed);
    }

    #[test]
    fn snug_stripes_have_no_slack() {
        let g = Gamma::new(4, 3).unwrap();
        let (_, l) = stack_run(DetailKind::Rect, 100, 195, g, true).unwrap();
        let l = l.unwrap();
        // The first stripe is exactly as wide as its first detail.
        let d = l.details[0].rect;
        let (w, _) = dims_unchecked(DetailKind::Rect, 100);
        assert_eq!(d.sides().0, w);
        assert_eq!(d.y, 0.0);
        assert!(l.details.iter().take(5).all(|x| x.rect.y == 0.0));
    }
}
