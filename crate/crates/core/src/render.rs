//! Deterministic SVG output for layouts.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::box_store::BoxClass;
use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::geometry::{Layout, Rect};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Palette {
    pub stripe_outline: String,
    pub detail_fill: String,
    pub ep1_fill: String,
    pub ep2_fill: String,
    pub norm1_fill: String,
    pub norm2_fill: String,
    pub lrp_fill: String,
}

impl Default for Palette {
    fn default() -> Self {
        Palette {
            stripe_outline: "#000000".into(),
            detail_fill: "#6f8fbf".into(),
            ep1_fill: "#1e7b34".into(),
            ep2_fill: "#9ed99a".into(),
            norm1_fill: "#c8a200".into(),
            norm2_fill: "#fff07a".into(),
            lrp_fill: "#ffffff".into(),
        }
    }
}

impl Palette {
    fn fill(&self, class: BoxClass) -> &str {
        match class {
            BoxClass::Stripe => "none",
            BoxClass::Ep1 => &self.ep1_fill,
            BoxClass::Ep2 => &self.ep2_fill,
            BoxClass::Norm1 => &self.norm1_fill,
            BoxClass::Norm2 => &self.norm2_fill,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderOptions {
    /// Output width and height in pixels.
    pub size_px: u32,
    /// Label details with their index when there are at most `label_limit` of them.
    pub labels: bool,
    pub label_limit: usize,
    pub font_family: String,
    /// Label font size as a fraction of the detail's smaller side.
    pub font_scale: f64,
    /// Stroke width as a fraction of the sheet side.
    pub stroke_scale: f64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            size_px: 800,
            labels: true,
            label_limit: 200,
            font_family: "sans-serif".into(),
            font_scale: 0.45,
            stroke_scale: 0.0008,
        }
    }
}

/// `v` rounded to 12 significant digits, printed without trailing zeros.
pub fn fmt12(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return "0".into();
    }
    let r: f64 = format!("{v:.11e}").parse().expect("formatted float parses");
    let s = format!("{r}");
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

fn rect_el(out: &mut String, side: f64, r: &Rect, fill: &str, stroke: &str, sw: &str, class: &str) {
    let y = side - (r.y + r.dy);
    let _ = writeln!(
        out,
        r#"<rect class="{class}" x="{}" y="{}" width="{}" height="{}" fill="{fill}" stroke="{stroke}" stroke-width="{sw}"/>"#,
        fmt12(r.x),
        fmt12(y),
        fmt12(r.dx),
        fmt12(r.dy),
    );
}

/// One `<rect>` per detail, per live box and for the LRP; y points up.
pub fn render_svg(layout: &Layout, palette: &Palette, opts: &RenderOptions) -> String {
    let side = layout.side;
    let sw = fmt12(opts.stroke_scale * side);
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{px}" height="{px}" viewBox="0 0 {s} {s}">"#,
        px = opts.size_px,
        s = fmt12(side),
    );
    let _ = writeln!(
        out,
        "<!-- kind={} n0={} details={} boxes={} -->",
        layout.kind,
        layout.n0,
        layout.details.len(),
        layout.boxes.len()
    );
    rect_el(&mut out, side, &layout.lrp, &palette.lrp_fill, &palette.stripe_outline, &sw, "lrp");
    for b in &layout.boxes {
        rect_el(&mut out, side, &b.rect, palette.fill(b.class), &palette.stripe_outline, &sw, b.class.as_str());
    }
    for d in &layout.details {
        rect_el(&mut out, side, &d.rect, &palette.detail_fill, &palette.stripe_outline, &sw, "detail");
    }
    if opts.labels && layout.details.len() <= opts.label_limit {
        for d in &layout.details {
            let r = d.rect;
            let cx = r.x + r.dx / 2.0;
            let cy = side - (r.y + r.dy / 2.0);
            let fs = opts.font_scale * r.dx.min(r.dy);
            let _ = writeln!(
                out,
                r#"<text x="{}" y="{}" font-family="{}" font-size="{}" text-anchor="middle" dominant-baseline="central">{}</text>"#,
                fmt12(cx),
                fmt12(cy),
                opts.font_family,
                fmt12(fs),
                d.n
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Render an engine's current layout; fails unless it runs in layout mode.
pub fn render_engine(engine: &Engine, palette: &Palette, opts: &RenderOptions) -> Result<String> {
    match engine.layout() {
        Ok(l) => Ok(render_svg(&l, palette, opts)),
        Err(Error::NoPositions) => Err(Error::Config(
            "this run tracks no positions; rerun with layout mode enabled to render it".into(),
        )),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detail::{DetailKind, Gamma};
    use crate::engine::EngineConfig;

    fn engine(details: u64, layout: bool) -> Engine {
        let cfg = EngineConfig::new(DetailKind::Square, 34, Gamma::new(10, 7).unwrap(), details).layout(layout);
        let mut e = Engine::new(cfg).unwrap();
        e.drive(None, &mut ()).unwrap();
        e
    }

    fn count(s: &str, pat: &str) -> usize {
        s.matches(pat).count()
    }

    #[test]
    fn significant_digits() {
        assert_eq!(fmt12(0.1 + 0.2), "0.3");
        assert_eq!(fmt12(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt12(0.0), "0");
        assert_eq!(fmt12(-1e-20), "-0.00000000000000000001");
    }

    #[test]
    fn golden_scene_counts() {
        let e = engine(35, true);
        let svg = render_engine(&e, &Palette::default(), &RenderOptions::default()).unwrap();
        let l = e.layout().unwrap();
        assert_eq!(count(&svg, "<rect "), 35 + l.boxes.len() + 1);
        assert_eq!(count(&svg, r#"class="detail""#), 35);
        assert_eq!(count(&svg, "<text "), 35);
        let p = Palette::default();
        assert!(svg.contains(&p.ep1_fill) && svg.contains(&p.norm1_fill));
        assert!(svg.contains(r#"viewBox="0 0 "#));
    }

    #[test]
    fn second_kind_shades_appear() {
        let e = engine(83, true);
        let svg = render_engine(&e, &Palette::default(), &RenderOptions::default()).unwrap();
        let p = Palette::default();
        assert!(svg.contains(&p.norm2_fill));
    }

    #[test]
    fn byte_stable() {
        let e = engine(83, true);
        let a = render_engine(&e, &Palette::default(), &RenderOptions::default()).unwrap();
        let b = render_engine(&engine(83, true), &Palette::default(), &RenderOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_layout_has_only_lrp() {
        let l = Layout {
            kind: DetailKind::Rect,
            n0: 1,
            side: 1.0,
            details: vec![],
            boxes: vec![],
            lrp: Rect::new(0.0, 0.0, 1.0, 1.0),
        };
        let svg = render_svg(&l, &Palette::default(), &RenderOptions::default());
        assert_eq!(count(&svg, "<rect "), 1);
    }

    #[test]
    fn labels_suppressed_for_large_layouts() {
        let e = engine(83, true);
        let opts = RenderOptions { label_limit: 50, ..RenderOptions::default() };
        let svg = render_engine(&e, &Palette::default(), &opts).unwrap();
        assert_eq!(count(&svg, "<text "), 0);
    }

    #[test]
    fn stats_mode_cannot_render() {
        let e = engine(35, false);
        let err = render_engine(&e, &Palette::default(), &RenderOptions::default()).unwrap_err();
        assert!(err.to_string().contains("layout mode"));
    }

    #[test]
    fn y_axis_points_up() {
        let l = Layout {
            kind: DetailKind::Rect,
            n0: 1,
            side: 1.0,
            details: vec![],
            boxes: vec![],
            lrp: Rect::new(0.0, 0.0, 1.0, 0.25),
        };
        let svg = render_svg(&l, &Palette::default(), &RenderOptions::default());
        assert!(svg.contains(r#"x="0" y="0.75" width="1" height="0.25""#));
    }
}
