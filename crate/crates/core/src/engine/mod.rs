//! The Slack-Pack state machine.
//!
//! Details are packed strictly in index order. A *row* is opened either in
//! the widest existing box (when it is wide enough for the current detail
//! plus a gap of `1/t^gamma`) or in a fresh stripe cut from the LRP; each
//! subsequent detail of the row goes into the endpoint left above its
//! predecessor for as long as that endpoint is long enough for the detail
//! plus the row gap `1/N^gamma`.
//!
//! Inside a row the cross-width is fixed by the box the row was opened in and
//! details are stacked along the other side; endpoints and normal boxes are
//! stored normalized to `w <= h` for later max-width selection.

mod checkpoint;

pub use checkpoint::CHECKPOINT_VERSION;

use serde::{Deserialize, Serialize};

use crate::box_store::{shape_ratio, BoxClass, BoxId, BoxSpec, BoxStore};
use crate::detail::{dims_unchecked, square_tail, DetailKind, Gamma, SheetSpec};
use crate::error::{Error, Result};
use crate::geometry::{Axis, Layout, LayoutBox, PlacedDetail, Rect};
use crate::numeric::Neumaier;

pub const DEFAULT_STATS_STRIDE: u64 = 10_000;
pub const DEFAULT_CHECKPOINT_EVERY: u64 = 10_000_000;
/// Relative slack in the creation-time normal-box bound.
pub const CREATION_BOUND_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub kind: DetailKind,
    pub n0: u64,
    pub gamma: Gamma,
    pub max_details: u64,
    pub layout_mode: bool,
    /// Details between checkpoint callbacks; 0 disables them.
    pub checkpoint_every: u64,
    /// Details between periodic snapshots; 0 keeps only critical-time snapshots.
    pub stats_stride: u64,
    pub allow_gamma_out_of_range: bool,
    /// Drop every gap term (snug stacking).
    pub snug: bool,
    /// Maintain the max `w/h^gamma` over live normal boxes.
    pub track_shapes: bool,
}

impl EngineConfig {
    pub fn new(kind: DetailKind, n0: u64, gamma: Gamma, max_details: u64) -> Self {
        EngineConfig {
            kind,
            n0,
            gamma,
            max_details,
            layout_mode: false,
            checkpoint_every: DEFAULT_CHECKPOINT_EVERY,
            stats_stride: DEFAULT_STATS_STRIDE,
            allow_gamma_out_of_range: false,
            snug: false,
            track_shapes: true,
        }
    }

    pub fn layout(mut self, on: bool) -> Self {
        self.layout_mode = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n0 == 0 {
            return Err(Error::Config("n0 must be >= 1".into()));
        }
        if self.max_details == 0 {
            return Err(Error::Config("max_details must be >= 1".into()));
        }
        if !self.allow_gamma_out_of_range && !self.gamma.in_admissible_range() {
            return Err(Error::Config(format!(
                "gamma {} is outside (sqrt(3/2), 3/2); pass the override flag to run it anyway",
                self.gamma
            )));
        }
        if self.n0.checked_add(self.max_details).is_none_or(|end| end > u32::MAX as u64) {
            return Err(Error::Config("n0 + max_details exceeds the 32-bit index range".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    Completed,
    FailedStep4,
    BudgetExhausted,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Completed => "Completed",
            RunStatus::FailedStep4 => "FailedStep4",
            RunStatus::BudgetExhausted => "BudgetExhausted",
        }
    }
}

/// State at a moment when a stripe has to be cut, before the cut.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalEvent {
    pub t: u64,
    pub s_lrp: f64,
    pub s_norm1: f64,
    pub s_norm2: f64,
    pub s_ep1: f64,
    pub s_ep2: f64,
    pub s_com: f64,
    pub ratio: f64,
    /// Widest live box; 0 when there are no boxes.
    pub max_w: f64,
    /// Sum of `h(B)` over every endpoint left at the end of a stripe row so far.
    pub stripe_ep_height_sum: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SnapshotKind {
    Stride,
    Critical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatSnapshot {
    pub t: u64,
    pub kind: SnapshotKind,
    pub ratio_lrp: f64,
    pub ratio_norm: f64,
    pub ratio_ep1: f64,
    pub ratio_ep2: f64,
    /// Max of `w(B)/h(B)^gamma` over live normal boxes.
    pub max_shape_norm: Option<f64>,
    /// Mean of `h/w` over live second-kind endpoints.
    pub ep2_mean_hw: Option<f64>,
    pub ep2_count: u64,
    /// `w/h^gamma` of the last normal box of the first stripe, once known.
    pub one_plus_sigma: Option<f64>,
    pub s_com: f64,
    /// `(S_LRP + S_boxes - S_com) / S_com` from the raw aggregates.
    pub area_residual: f64,
}

impl StatSnapshot {
    pub fn sigma_hat(&self) -> Option<f64> {
        self.one_plus_sigma.map(|x| x - 1.0)
    }
}

/// Outcome of one [`Engine::step`].
#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    /// Detail `D_n` went into box `into`.
    DetailPlaced { n: u64, into: BoxId, endpoint: Option<BoxId>, normal: Option<BoxId> },
    /// An existing box opens a new row.
    ActiveChosen { t: u64, id: BoxId, class: BoxClass, origin_n: u64, created_at: u64 },
    /// A stripe was cut from the LRP to open a new row.
    StripeCut { id: BoxId, event: CriticalEvent, snapshot: StatSnapshot },
    /// The LRP is too narrow for the next stripe.
    Failed { t: u64, lrp_w: f64, required: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinalAreas {
    pub s_lrp: f64,
    pub s_norm1: f64,
    pub s_norm2: f64,
    pub s_ep1: f64,
    pub s_ep2: f64,
    pub s_com: f64,
    pub ratio_lrp: f64,
    pub box_count: u64,
    pub lrp_w: f64,
    pub lrp_h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub status: RunStatus,
    /// Index of the first detail not placed.
    pub last_t: u64,
    pub t0: Option<u64>,
    pub k0: Option<u64>,
    pub one_plus_sigma: Option<f64>,
    pub sigma_hat: Option<f64>,
    pub critical_count: u64,
    pub stripes: u64,
    pub rows: u64,
    pub final_areas: FinalAreas,
    /// Normal boxes that broke `h^gamma <= w` at creation.
    pub creation_bound_violations: u64,
    /// Rows opened in a box shorter than the detail (skipped, stripe cut instead).
    pub height_diagnostics: u64,
    pub containment_violations: u64,
    pub max_abs_area_residual: f64,
    /// Largest relative gap between the running `S_com` and its closed form.
    pub s_com_max_rel_dev: f64,
}

/// All outputs of a collected run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub events: Vec<CriticalEvent>,
    pub snapshots: Vec<StatSnapshot>,
}

/// Callbacks for streaming runs.
pub trait RunObserver {
    fn on_critical(&mut self, _ev: &CriticalEvent) -> Result<()> {
        Ok(())
    }

    fn on_snapshot(&mut self, _snap: &StatSnapshot) -> Result<()> {
        Ok(())
    }

    /// Called every `checkpoint_every` placed details.
    fn on_checkpoint(&mut self, _engine: &Engine) -> Result<()> {
        Ok(())
    }
}

impl RunObserver for () {}

#[derive(Default)]
struct Collector {
    events: Vec<CriticalEvent>,
    snapshots: Vec<StatSnapshot>,
}

impl RunObserver for Collector {
    fn on_critical(&mut self, ev: &CriticalEvent) -> Result<()> {
        self.events.push(*ev);
        Ok(())
    }

    fn on_snapshot(&mut self, snap: &StatSnapshot) -> Result<()> {
        self.snapshots.push(*snap);
        Ok(())
    }
}

/// Lineage of the endpoint and normal box produced in a row opened in a box
/// of class `source`.
pub fn classify_lineage(source: BoxClass) -> (BoxClass, BoxClass) {
    match source {
        BoxClass::Stripe => (BoxClass::Ep1, BoxClass::Norm1),
        BoxClass::Ep1 => (BoxClass::Ep1, BoxClass::Norm2),
        BoxClass::Ep2 | BoxClass::Norm1 | BoxClass::Norm2 => (BoxClass::Ep2, BoxClass::Norm2),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    /// Step 2: can the current endpoint take the next detail?
    Check,
    /// Step 3 (and 4): open a new row.
    Choose,
    /// Step 5.
    Place,
    Failed,
}

/// Placement frame of the active box: bottom-left corner and stacking axis.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Frame {
    x: f64,
    y: f64,
    axis: Axis,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Active {
    id: BoxId,
    /// Side across the row; fixed for the whole row.
    cross: f64,
    /// Remaining side along the row.
    length: f64,
    frame: Option<Frame>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Row {
    source: BoxClass,
    ep: BoxClass,
    norm: BoxClass,
}

#[derive(Debug, Clone)]
pub struct Engine {
    cfg: EngineConfig,
    sheet: SheetSpec,
    t: u64,
    row_start: u64,
    row_gap: f64,
    phase: Phase,
    lrp: Rect,
    active: Option<Active>,
    row: Row,
    store: BoxStore,
    s_com: Neumaier,
    t0: Option<u64>,
    k0: Option<u64>,
    one_plus_sigma: Option<f64>,
    last_norm: Option<(f64, f64)>,
    stripes: u64,
    rows: u64,
    critical_count: u64,
    creation_bound_violations: u64,
    height_diagnostics: u64,
    containment_violations: u64,
    stripe_ep_height_sum: Neumaier,
    max_abs_residual: f64,
    s_com_max_rel_dev: f64,
    placements: Option<Vec<PlacedDetail>>,
}

impl Engine {
    /// Step 1: whole sheet as LRP, no boxes, `t = N = n0`.
    pub fn new(cfg: EngineConfig) -> Result<Engine> {
        cfg.validate()?;
        let sheet = SheetSpec::new(cfg.kind, cfg.n0)?;
        let mut store = BoxStore::new();
        if cfg.layout_mode {
            store = store.with_positions();
        }
        if cfg.track_shapes {
            store = store.with_shape_tracking(cfg.gamma.value());
        }
        let mut s_com = Neumaier::new();
        s_com.add(sheet.area);
        Ok(Engine {
            cfg,
            sheet,
            t: cfg.n0,
            row_start: cfg.n0,
            row_gap: 0.0,
            phase: Phase::Choose,
            lrp: Rect::new(0.0, 0.0, sheet.side, sheet.side),
            active: None,
            row: Row { source: BoxClass::Stripe, ep: BoxClass::Ep1, norm: BoxClass::Norm1 },
            store,
            s_com,
            t0: None,
            k0: None,
            one_plus_sigma: None,
            last_norm: None,
            stripes: 0,
            rows: 0,
            critical_count: 0,
            creation_bound_violations: 0,
            height_diagnostics: 0,
            containment_violations: 0,
            stripe_ep_height_sum: Neumaier::new(),
            max_abs_residual: 0.0,
            s_com_max_rel_dev: 0.0,
            placements: cfg.layout_mode.then(Vec::new),
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn sheet(&self) -> &SheetSpec {
        &self.sheet
    }

    /// Current time: index of the next detail to pack.
    pub fn t(&self) -> u64 {
        self.t
    }

    /// Index of the first detail of the current row.
    pub fn row_start(&self) -> u64 {
        self.row_start
    }

    pub fn store(&self) -> &BoxStore {
        &self.store
    }

    pub fn lrp(&self) -> Rect {
        self.lrp
    }

    pub fn lrp_sides(&self) -> (f64, f64) {
        self.lrp.sides()
    }

    pub fn s_lrp(&self) -> f64 {
        self.lrp.area()
    }

    pub fn s_com(&self) -> f64 {
        self.s_com.value()
    }

    pub fn t0(&self) -> Option<u64> {
        self.t0
    }

    pub fn k0(&self) -> Option<u64> {
        self.k0
    }

    pub fn one_plus_sigma(&self) -> Option<f64> {
        self.one_plus_sigma
    }

    pub fn active_box(&self) -> Option<BoxId> {
        self.active.map(|a| a.id)
    }

    pub fn is_failed(&self) -> bool {
        self.phase == Phase::Failed
    }

    pub fn placed(&self) -> u64 {
        self.t - self.cfg.n0
    }

    fn is_done(&self) -> bool {
        self.placed() >= self.cfg.max_details
    }

    #[inline]
    fn gap(&self, k: u64) -> f64 {
        if self.cfg.snug {
            0.0
        } else {
            self.cfg.gamma.gap(k)
        }
    }

    /// Perform one transition of the state machine.
    pub fn step(&mut self) -> Result<Event> {
        match self.phase {
            Phase::Failed => Err(Error::Config("engine has already failed".into())),
            Phase::Place => self.place(),
            Phase::Choose => self.choose(),
            Phase::Check => {
                let (_, hd) = dims_unchecked(self.cfg.kind, self.t);
                match self.active {
                    Some(a) if a.length >= hd + self.row_gap => self.place(),
                    _ => {
                        self.end_row();
                        self.choose()
                    }
                }
            }
        }
    }

    fn end_row(&mut self) {
        if self.k0.is_none() {
            self.k0 = Some(self.t - self.cfg.n0);
            if let Some((w, h)) = self.last_norm {
                self.one_plus_sigma = Some(shape_ratio(w, h, self.cfg.gamma.value()));
            }
        }
        if self.row.source == BoxClass::Stripe {
            if let Some(rec) = self.active.and_then(|a| self.store.get(a.id)) {
                self.stripe_ep_height_sum.add(rec.h);
            }
        }
    }

    /// Steps 3 and 4.
    fn choose(&mut self) -> Result<Event> {
        let t = self.t;
        let (wd, hd) = dims_unchecked(self.cfg.kind, t);
        let gap = self.gap(t);
        self.row_start = t;
        self.row_gap = gap;

        if let Some(id) = self.store.max_width() {
            let rec = self.store.get(id).expect("indexed box is live");
            if rec.w >= wd + gap {
                if rec.h >= hd {
                    let frame = rec.pos.map(|p| Frame {
                        x: p.x,
                        y: p.y,
                        axis: if p.dx > p.dy { Axis::X } else { Axis::Y },
                    });
                    self.active = Some(Active { id, cross: rec.w, length: rec.h, frame });
                    let (ep, norm) = classify_lineage(rec.class);
                    self.row = Row { source: rec.class, ep, norm };
                    self.rows += 1;
                    if self.t0.is_none() && rec.class.is_normal() {
                        self.t0 = Some(t);
                    }
                    self.phase = Phase::Place;
                    return Ok(Event::ActiveChosen {
                        t,
                        id,
                        class: rec.class,
                        origin_n: rec.origin_n,
                        created_at: rec.created_at,
                    });
                }
                self.height_diagnostics += 1;
            }
        }

        // Step 4.
        let event = self.critical_event();
        let snapshot = self.snapshot(SnapshotKind::Critical);
        self.critical_count += 1;
        let (lrp_w, _) = self.lrp.sides();
        let required = hd + gap;
        if lrp_w < required {
            self.phase = Phase::Failed;
            self.active = None;
            return Ok(Event::Failed { t, lrp_w, required });
        }
        let sw = wd + gap;
        let l = self.lrp;
        let (stripe, rest, axis) = if l.dx <= l.dy {
            (Rect::new(l.x, l.y, l.dx, sw), Rect::new(l.x, l.y + sw, l.dx, l.dy - sw), Axis::X)
        } else {
            (Rect::new(l.x, l.y, sw, l.dy), Rect::new(l.x + sw, l.y, l.dx - sw, l.dy), Axis::Y)
        };
        if !(rest.dx > 0.0 && rest.dy > 0.0) {
            return Err(Error::Domain(format!("stripe at t={t} would exhaust the LRP")));
        }
        self.lrp = rest;
        let mut spec = BoxSpec::from_sides(sw, lrp_w, BoxClass::Stripe, t, t);
        if self.cfg.layout_mode {
            spec = spec.with_pos(stripe);
        }
        let id = self.store.insert(spec)?;
        self.active = Some(Active {
            id,
            cross: sw,
            length: lrp_w,
            frame: Some(Frame { x: stripe.x, y: stripe.y, axis }),
        });
        self.row = Row { source: BoxClass::Stripe, ep: BoxClass::Ep1, norm: BoxClass::Norm1 };
        self.rows += 1;
        self.stripes += 1;
        self.phase = Phase::Place;
        Ok(Event::StripeCut { id, event, snapshot })
    }

    /// Step 5.
    fn place(&mut self) -> Result<Event> {
        let t = self.t;
        let (wd, hd) = dims_unchecked(self.cfg.kind, t);
        let a = self.active.take().expect("place requires an active box");
        let parent = self.store.remove(a.id)?;
        let ep_len = a.length - hd;
        let norm_w = a.cross - wd;
        if ep_len < 0.0 || norm_w < 0.0 {
            return Err(Error::Domain(format!(
                "detail {t} ({wd}x{hd}) does not fit active box {}x{}",
                a.cross, a.length
            )));
        }

        let (detail_rect, ep_rect, norm_rect) = match a.frame {
            Some(Frame { x, y, axis: Axis::X }) => (
                Rect::new(x, y, hd, wd),
                Rect::new(x + hd, y, ep_len, a.cross),
                Rect::new(x, y + wd, hd, norm_w),
            ),
            Some(Frame { x, y, axis: Axis::Y }) => (
                Rect::new(x, y, wd, hd),
                Rect::new(x, y + hd, a.cross, ep_len),
                Rect::new(x + wd, y, norm_w, hd),
            ),
            None => (Rect::new(0.0, 0.0, 0.0, 0.0), Rect::new(0.0, 0.0, 0.0, 0.0), Rect::new(0.0, 0.0, 0.0, 0.0)),
        };
        let layout = self.cfg.layout_mode && a.frame.is_some();
        if layout {
            if let Some(p) = parent.pos {
                let tol = 1e-12 * self.sheet.side;
                for r in [&detail_rect, &ep_rect, &norm_rect] {
                    if !p.contains(r, tol) {
                        self.containment_violations += 1;
                    }
                }
            }
        }

        let endpoint = if ep_len > 0.0 {
            let mut spec = BoxSpec::from_sides(a.cross, ep_len, self.row.ep, self.row_start, t);
            if layout {
                spec = spec.with_pos(ep_rect);
            }
            Some(self.store.insert(spec)?)
        } else {
            None
        };
        let normal = if norm_w > 0.0 {
            let spec = BoxSpec::from_sides(hd, norm_w, self.row.norm, t, t);
            if !self.cfg.snug {
                // h(B)^gamma <= w(B) for every normal box; equality is attained at
                // the first detail of a row, hence the rounding slack.
                if self.cfg.gamma.pow(spec.h) > spec.w * (1.0 + CREATION_BOUND_REL_TOL) {
                    self.creation_bound_violations += 1;
                }
            }
            self.last_norm = Some((spec.w, spec.h));
            let spec = if layout { spec.with_pos(norm_rect) } else { spec };
            Some(self.store.insert(spec)?)
        } else {
            None
        };

        self.s_com.sub(wd * hd);
        if let Some(p) = self.placements.as_mut() {
            if layout {
                p.push(PlacedDetail { n: t, rect: detail_rect });
            }
        }
        self.active = endpoint.map(|id| Active {
            id,
            cross: a.cross,
            length: ep_len,
            frame: a.frame.map(|f| match f.axis {
                Axis::X => Frame { x: f.x + hd, ..f },
                Axis::Y => Frame { y: f.y + hd, ..f },
            }),
        });
        self.t += 1;
        self.phase = Phase::Check;
        Ok(Event::DetailPlaced { n: t, into: a.id, endpoint, normal })
    }

    pub fn critical_event(&self) -> CriticalEvent {
        let agg = self.store.aggregates();
        let s_lrp = self.s_lrp();
        let s_com = self.s_com();
        CriticalEvent {
            t: self.t,
            s_lrp,
            s_norm1: agg.area(BoxClass::Norm1),
            s_norm2: agg.area(BoxClass::Norm2),
            s_ep1: agg.area(BoxClass::Ep1),
            s_ep2: agg.area(BoxClass::Ep2),
            s_com,
            ratio: s_lrp / s_com,
            max_w: self.store.max_width_value().unwrap_or(0.0),
            stripe_ep_height_sum: self.stripe_ep_height_sum.value(),
        }
    }

    pub fn snapshot(&mut self, kind: SnapshotKind) -> StatSnapshot {
        let agg = self.store.aggregates();
        let s_com = self.s_com();
        let s_lrp = self.s_lrp();
        let ep2_count = agg.count(BoxClass::Ep2);
        let residual = (s_lrp + agg.total_area() - s_com) / s_com;
        self.max_abs_residual = self.max_abs_residual.max(residual.abs());
        let closed = match self.cfg.kind {
            DetailKind::Rect => 1.0 / self.t as f64,
            DetailKind::Square => square_tail(self.t),
        };
        self.s_com_max_rel_dev = self.s_com_max_rel_dev.max(((s_com - closed) / closed).abs());
        StatSnapshot {
            t: self.t,
            kind,
            ratio_lrp: s_lrp / s_com,
            ratio_norm: agg.normal_area() / s_com,
            ratio_ep1: agg.area(BoxClass::Ep1) / s_com,
            ratio_ep2: agg.area(BoxClass::Ep2) / s_com,
            max_shape_norm: self.store.max_normal_shape(),
            ep2_mean_hw: (ep2_count > 0).then(|| agg.hw_sum(BoxClass::Ep2) / ep2_count as f64),
            ep2_count,
            one_plus_sigma: self.one_plus_sigma,
            s_com,
            area_residual: residual,
        }
    }

    pub fn summary(&self) -> RunSummary {
        let status = if self.phase == Phase::Failed {
            RunStatus::FailedStep4
        } else if self.is_done() {
            RunStatus::Completed
        } else {
            RunStatus::BudgetExhausted
        };
        let agg = self.store.aggregates();
        let (lrp_w, lrp_h) = self.lrp.sides();
        RunSummary {
            status,
            last_t: self.t,
            t0: self.t0,
            k0: self.k0,
            one_plus_sigma: self.one_plus_sigma,
            sigma_hat: self.one_plus_sigma.map(|x| x - 1.0),
            critical_count: self.critical_count,
            stripes: self.stripes,
            rows: self.rows,
            final_areas: FinalAreas {
                s_lrp: self.s_lrp(),
                s_norm1: agg.area(BoxClass::Norm1),
                s_norm2: agg.area(BoxClass::Norm2),
                s_ep1: agg.area(BoxClass::Ep1),
                s_ep2: agg.area(BoxClass::Ep2),
                s_com: self.s_com(),
                ratio_lrp: self.s_lrp() / self.s_com(),
                box_count: agg.total_count(),
                lrp_w,
                lrp_h,
            },
            creation_bound_violations: self.creation_bound_violations,
            height_diagnostics: self.height_diagnostics,
            containment_violations: self.containment_violations,
            max_abs_area_residual: self.max_abs_residual,
            s_com_max_rel_dev: self.s_com_max_rel_dev,
        }
    }

    /// Run until the detail budget is spent, the engine fails, or
    /// `stop_at` (a time `t`) is reached, streaming results to `obs`.
    pub fn drive<O: RunObserver + ?Sized>(&mut self, stop_at: Option<u64>, obs: &mut O) -> Result<RunSummary> {
        while self.phase != Phase::Failed && !self.is_done() {
            if stop_at.is_some_and(|s| self.t >= s) && self.phase == Phase::Check {
                break;
            }
            match self.step()? {
                Event::DetailPlaced { .. } => {
                    let placed = self.placed();
                    if self.cfg.stats_stride > 0 && placed.is_multiple_of(self.cfg.stats_stride) {
                        let s = self.snapshot(SnapshotKind::Stride);
                        obs.on_snapshot(&s)?;
                    }
                    if self.cfg.checkpoint_every > 0 && placed.is_multiple_of(self.cfg.checkpoint_every) {
                        obs.on_checkpoint(self)?;
                    }
                }
                Event::StripeCut { event, snapshot, .. } => {
                    self.max_abs_residual = self.max_abs_residual.max(snapshot.area_residual.abs());
                    obs.on_critical(&event)?;
                    obs.on_snapshot(&snapshot)?;
                }
                Event::Failed { .. } => {
                    let event = self.critical_event();
                    obs.on_critical(&event)?;
                }
                Event::ActiveChosen { .. } => {}
            }
        }
        Ok(self.summary())
    }

    /// [`Engine::drive`] collecting every event and snapshot in memory.
    pub fn collect(&mut self, stop_at: Option<u64>) -> Result<RunOutput> {
        let mut c = Collector::default();
        let summary = self.drive(stop_at, &mut c)?;
        Ok(RunOutput { summary, events: c.events, snapshots: c.snapshots })
    }

    /// Placed details, live boxes and the LRP with coordinates.
    pub fn layout(&self) -> Result<Layout> {
        let details = self.placements.as_ref().ok_or(Error::NoPositions)?;
        let mut boxes = Vec::with_capacity(self.store.len());
        for rec in self.store.iter() {
            let rect = rec.pos.ok_or(Error::NoPositions)?;
            boxes.push(LayoutBox { id: rec.id, class: rec.class, origin_n: rec.origin_n, created_at: rec.created_at, rect });
        }
        Ok(Layout {
            kind: self.cfg.kind,
            n0: self.cfg.n0,
            side: self.sheet.side,
            details: details.clone(),
            boxes,
            lrp: self.lrp,
        })
    }
}

/// Run a configuration to completion and collect every event and snapshot.
pub fn run(cfg: EngineConfig) -> Result<RunOutput> {
    Engine::new(cfg)?.collect(None)
}
