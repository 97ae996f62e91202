//! Clock-glyph SVG rendering of a cell summary.
//!
//! Twelve 30° wedges run clockwise from 12 o'clock (January) around a hub
//! holding the vineyard count. Each wedge is split radially so the outer,
//! endangered band covers the endangered share of the wedge's annulus area.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::aggregate::CellSummary;

pub const MIN_RADIUS_PX: f64 = 16.0;
pub const HUB_FRACTION: f64 = 0.25;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GlyphError {
    #[error("certainty {0} outside [0.5, 1]")]
    Certainty(f64),
    #[error("radius {0} px below the {MIN_RADIUS_PX} px minimum")]
    Radius(f64),
    #[error("endangered fraction {0} outside [0, 1]")]
    Fraction(f64),
    #[error("invalid cell summary: {0}")]
    Summary(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Endangered,
    Safe,
}

/// RGB with unrounded channels in [0, 255].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rgb(pub f64, pub f64, pub f64);

impl Rgb {
    pub fn distance(&self, other: &Rgb) -> f64 {
        ((self.0 - other.0).powi(2) + (self.1 - other.1).powi(2) + (self.2 - other.2).powi(2)).sqrt()
    }

    pub fn rounded(&self) -> (u8, u8, u8) {
        let c = |v: f64| v.round().clamp(0.0, 255.0) as u8;
        (c(self.0), c(self.1), c(self.2))
    }

    pub fn hex(&self) -> String {
        let (r, g, b) = self.rounded();
        format!("#{r:02x}{g:02x}{b:02x}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorScheme {
    pub endangered: Rgb,
    pub safe: Rgb,
    pub neutral: Rgb,
}

impl Default for ColorScheme {
    fn default() -> Self {
        Self { endangered: Rgb(180.0, 4.0, 38.0), safe: Rgb(59.0, 76.0, 192.0), neutral: Rgb(242.0, 242.0, 242.0) }
    }
}

impl ColorScheme {
    /// Neutral at certainty 0.5, full hue at 1.0, linear in between.
    pub fn color_for(&self, outcome: Outcome, certainty: f64) -> Result<Rgb, GlyphError> {
        if !(0.5..=1.0).contains(&certainty) {
            return Err(GlyphError::Certainty(certainty));
        }
        let t = (certainty - 0.5) / 0.5;
        let hue = match outcome {
            Outcome::Endangered => self.endangered,
            Outcome::Safe => self.safe,
        };
        let w = self.neutral;
        Ok(Rgb(w.0 + t * (hue.0 - w.0), w.1 + t * (hue.1 - w.1), w.2 + t * (hue.2 - w.2)))
    }
}

/// Default-scheme shortcut.
pub fn color_for(outcome: Outcome, certainty: f64) -> Result<Rgb, GlyphError> {
    ColorScheme::default().color_for(outcome, certainty)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlyphGeometry {
    pub radius_px: f64,
    pub hub_radius_px: f64,
}

impl GlyphGeometry {
    pub fn new(radius_px: f64) -> Result<Self, GlyphError> {
        if !(radius_px.is_finite() && radius_px >= MIN_RADIUS_PX) {
            return Err(GlyphError::Radius(radius_px));
        }
        Ok(Self::unchecked(radius_px))
    }

    /// No minimum-size check; for geometry on normalized radii.
    pub fn unchecked(radius_px: f64) -> Self {
        Self { radius_px, hub_radius_px: HUB_FRACTION * radius_px }
    }

    /// Radius separating the outer (endangered) band from the inner one.
    pub fn boundary_radius(&self, endangered_fraction: f64) -> Result<f64, GlyphError> {
        if !(0.0..=1.0).contains(&endangered_fraction) {
            return Err(GlyphError::Fraction(endangered_fraction));
        }
        let (r, h) = (self.radius_px, self.hub_radius_px);
        Ok((h * h + (1.0 - endangered_fraction) * (r * r - h * h)).sqrt())
    }

    /// Share of the annulus area lying outside radius `rb`.
    pub fn outer_band_fraction(&self, rb: f64) -> f64 {
        let (r, h) = (self.radius_px, self.hub_radius_px);
        (r * r - rb * rb) / (r * r - h * h)
    }

    /// Start and end angle of month `m` in degrees from the positive x axis,
    /// increasing clockwise on screen.
    pub fn segment_degrees(month: u32) -> (f64, f64) {
        let start = -90.0 + 30.0 * (month as f64 - 1.0);
        (start, start + 30.0)
    }
}

/// Check the structural invariants a glyph relies on.
pub fn validate_summary(s: &CellSummary) -> Result<(), GlyphError> {
    let bad = |m: String| Err(GlyphError::Summary(m));
    if s.vineyard_count == 0 {
        return bad("vineyard count is zero".into());
    }
    if s.member_area_ids.len() != s.vineyard_count as usize {
        return bad(format!("{} member ids for vineyard count {}", s.member_area_ids.len(), s.vineyard_count));
    }
    if s.months.len() != 12 {
        return bad(format!("{} months instead of 12", s.months.len()));
    }
    for (i, m) in s.months.iter().enumerate() {
        let month = i + 1;
        if m.endangered + m.safe != s.vineyard_count {
            return bad(format!("month {month}: counts {} + {} differ from vineyard count", m.endangered, m.safe));
        }
        for (count, mean, what) in [(m.endangered, m.mean_certainty_endangered, "endangered"), (m.safe, m.mean_certainty_safe, "safe")] {
            match mean {
                None if count > 0 => return bad(format!("month {month}: missing {what} mean")),
                Some(_) if count == 0 => return bad(format!("month {month}: {what} mean without members")),
                Some(v) if !(0.5..=1.0).contains(&v) => return bad(format!("month {month}: {what} mean {v} outside [0.5, 1]")),
                _ => {}
            }
        }
        if !(m.stddev_certainty.is_finite() && m.stddev_certainty >= 0.0) {
            return bad(format!("month {month}: bad stddev {}", m.stddev_certainty));
        }
    }
    Ok(())
}

fn num(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

fn polar(r: f64, deg: f64) -> (f64, f64) {
    let a = deg.to_radians();
    (r * a.cos(), r * a.sin())
}

fn wedge_path(r_in: f64, r_out: f64, start: f64, end: f64) -> String {
    let (x0, y0) = polar(r_out, start);
    let (x1, y1) = polar(r_out, end);
    let (x2, y2) = polar(r_in, end);
    let (x3, y3) = polar(r_in, start);
    format!(
        "M {} {} A {} {} 0 0 1 {} {} L {} {} A {} {} 0 0 0 {} {} Z",
        num(x0),
        num(y0),
        num(r_out),
        num(r_out),
        num(x1),
        num(y1),
        num(x2),
        num(y2),
        num(r_in),
        num(r_in),
        num(x3),
        num(y3)
    )
}

pub fn render_glyph(summary: &CellSummary, radius_px: f64) -> Result<String, GlyphError> {
    render_glyph_with(summary, radius_px, &ColorScheme::default())
}

pub fn render_glyph_with(summary: &CellSummary, radius_px: f64, colors: &ColorScheme) -> Result<String, GlyphError> {
    let geo = GlyphGeometry::new(radius_px)?;
    validate_summary(summary)?;
    let (r, hub) = (geo.radius_px, geo.hub_radius_px);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{w}" viewBox="{o} {o} {w} {w}" data-cell-i="{i}" data-cell-j="{j}" data-cell-size-m="{s}">"#,
        w = num(2.0 * r),
        o = num(-r),
        i = summary.cell.i,
        j = summary.cell.j,
        s = num(summary.cell_size_m),
    );
    out.push_str("<g class=\"months\">\n");
    for (idx, m) in summary.months.iter().enumerate() {
        let month = idx as u32 + 1;
        let (start, end) = GlyphGeometry::segment_degrees(month);
        let f = m.endangered as f64 / summary.vineyard_count as f64;
        let rb = geo.boundary_radius(f)?;
        if let Some(c) = m.mean_certainty_endangered.filter(|_| m.endangered > 0) {
            let fill = colors.color_for(Outcome::Endangered, c)?;
            let _ = writeln!(
                out,
                r#"<path class="month-{month} endangered" d="{}" fill="{}"/>"#,
                wedge_path(rb, r, start, end),
                fill.hex()
            );
        }
        if let Some(c) = m.mean_certainty_safe.filter(|_| m.safe > 0) {
            let fill = colors.color_for(Outcome::Safe, c)?;
            let _ = writeln!(out, r#"<path class="month-{month} safe" d="{}" fill="{}"/>"#, wedge_path(hub, rb, start, end), fill.hex());
        }
    }
    out.push_str("</g>\n");
    let _ = writeln!(out, r##"<circle class="rim" cx="0" cy="0" r="{}" fill="none" stroke="#606060" stroke-width="0.5"/>"##, num(r));
    let _ = writeln!(out, r##"<circle class="hub" cx="0" cy="0" r="{}" fill="#ffffff" stroke="#606060" stroke-width="0.5"/>"##, num(hub));
    let _ = writeln!(
        out,
        r##"<text x="0" y="0" text-anchor="middle" dominant-baseline="central" font-family="sans-serif" font-size="{}" fill="#202020">{}</text>"##,
        num(hub * 0.9),
        summary.vineyard_count
    );
    out.push_str("</svg>\n");
    Ok(out)
}
