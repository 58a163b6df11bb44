//! SVG map of a decomposition: one `<path>` per region, filled by region
//! type, with the exponents in a `<title>` tooltip and `data-*` attributes.

use std::fmt::Write;

use crate::decomposition::{ClassifiedRegion, DecompositionReport, RegionType};

pub fn region_color(t: RegionType) -> &'static str {
    match t {
        RegionType::T00 => "#4e79a7",
        RegionType::T01 => "#f28e2b",
        RegionType::T10 => "#59a14f",
        RegionType::T11 => "#b07aa1",
    }
}

/// Renders the report at `width` pixels; the height follows the aspect of
/// the regions' bounding box. Output is a pure function of the report.
pub fn region_map(report: &DecompositionReport, width: u32) -> String {
    let (mut x0, mut y0, mut x1, mut y1) = (
        f64::INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::NEG_INFINITY,
    );
    for r in &report.regions {
        let (lo, hi) = r.region.polygon.bbox();
        x0 = x0.min(lo.re);
        y0 = y0.min(lo.im);
        x1 = x1.max(hi.re);
        y1 = y1.max(hi.im);
    }
    if !x0.is_finite() {
        let r = report.working_radius;
        (x0, y0, x1, y1) = (-r, -r, r, r);
    }
    let (w, h) = ((x1 - x0).max(1e-12), (y1 - y0).max(1e-12));
    let height = ((width as f64) * h / w).round().max(1.0) as u32;
    // y is flipped so the imaginary axis points up
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="{:.6} {:.6} {:.6} {:.6}">"#,
        x0, -y1, w, h
    );
    let stroke = w / width as f64 * 0.5;
    for r in &report.regions {
        path(&mut out, r, stroke);
    }
    out.push_str("</svg>\n");
    out
}

fn path(out: &mut String, r: &ClassifiedRegion, stroke: f64) {
    let s = &r.sigma;
    let mut d = String::new();
    for (i, v) in r.region.polygon.vertices().iter().enumerate() {
        let _ = write!(
            d,
            "{}{:.6},{:.6} ",
            if i == 0 { 'M' } else { 'L' },
            v.re,
            -v.im
        );
    }
    d.push('Z');
    let ty = format!("{:?}", s.region_type);
    let sigma = format!("[{},{},{}]", s.sigma[0], s.sigma[1], s.sigma[2]);
    let _ = writeln!(
        out,
        r##"<path id="region-{id}" d="{d}" fill="{fill}" fill-opacity="{op}" stroke="#222" stroke-width="{stroke:.6}" data-type="{ty}" data-sigma="{sigma}" data-admissible="{adm}"><title>{id} {ty} sigma={sigma} b=({:.4},{:.4})</title></path>"##,
        r.region.center_b.re,
        r.region.center_b.im,
        id = r.id,
        fill = region_color(s.region_type),
        op = if r.admissible { "0.75" } else { "0.25" },
        adm = r.admissible,
    );
}
