//! Static SVG rendering of a single projected frame.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::pipeline::{PipelineError, ProjectedFrame};
use crate::sage::CANVAS_FILL;

/// Label → CSS color.
pub type ColorMap = BTreeMap<String, String>;

pub const DEFAULT_COLOR: &str = "#333333";

const PALETTE: [&str; 10] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666", "#1f78b4",
    "#b2df8a",
];

/// Assigns palette colors to the distinct labels in sorted order, cycling
/// through the palette when there are more labels than colors.
pub fn assign_colors(labels: Option<&[String]>) -> ColorMap {
    let distinct: BTreeSet<&String> = labels.into_iter().flatten().collect();
    distinct
        .into_iter()
        .enumerate()
        .map(|(i, l)| (l.clone(), PALETTE[i % PALETTE.len()].to_string()))
        .collect()
}

pub const CANVAS_PIXELS: f64 = 600.0;

/// Pixel position of canvas coordinates in `[-1, 1]²` (y up).
pub fn to_pixels([x, y]: [f64; 2]) -> [f64; 2] {
    let half = CANVAS_PIXELS / 2.0;
    [half * (1.0 + x), half * (1.0 - y)]
}

/// SVG document for `frame`. Points are colored by `labels[i]` through
/// `colors`; anything unmapped gets [`DEFAULT_COLOR`].
pub fn frame_svg(frame: &ProjectedFrame, labels: Option<&[String]>, colors: &ColorMap) -> String {
    let size = CANVAS_PIXELS;
    let half = size / 2.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(s, r#"<rect width="{size}" height="{size}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r##"<circle class="guide" cx="{half}" cy="{half}" r="{:.3}" fill="none" stroke="#999999" stroke-width="1"/>"##,
        CANVAS_FILL * half
    );
    for (i, &pt) in frame.coords.iter().enumerate() {
        let color = labels
            .and_then(|l| l.get(i))
            .and_then(|l| colors.get(l))
            .map(String::as_str)
            .unwrap_or(DEFAULT_COLOR);
        let [px, py] = to_pixels(pt);
        let _ = writeln!(s, r#"<circle cx="{px:.3}" cy="{py:.3}" r="1.5" fill="{color}"/>"#);
    }
    s.push_str("</svg>\n");
    s
}

pub fn render_static(
    frame: &ProjectedFrame,
    labels: Option<&[String]>,
    colors: &ColorMap,
    out: &Path,
) -> Result<(), PipelineError> {
    std::fs::write(out, frame_svg(frame, labels, colors))
        .map_err(|source| PipelineError::Io { path: out.to_path_buf(), source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sage::SageParams;
    use crate::tour::Frame;

    fn frame(coords: Vec<[f64; 2]>) -> ProjectedFrame {
        ProjectedFrame {
            frame_index: 0,
            basis: Frame::axes(3, 0, 1),
            coords,
            params: SageParams::new(3, 1.0).unwrap(),
        }
    }

    #[test]
    fn colors_are_total_and_sorted() {
        let labels: Vec<String> = ["b", "a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let map = assign_colors(Some(&labels));
        assert_eq!(map.keys().collect::<Vec<_>>(), vec!["a", "b", "c"]);
        assert_eq!(map["a"], PALETTE[0]);
        assert!(assign_colors(None).is_empty());
    }

    #[test]
    fn unlabelled_points_use_default_color() {
        let svg = frame_svg(&frame(vec![[0.1, 0.2], [-0.3, 0.0]]), None, &ColorMap::new());
        assert_eq!(svg.matches(DEFAULT_COLOR).count(), 2);
    }

    #[test]
    fn point_on_guide_circle() {
        let [px, py] = to_pixels([0.9, 0.0]);
        let half = CANVAS_PIXELS / 2.0;
        assert!(((px - half).hypot(py - half) - 0.9 * half).abs() < 1e-9);
        let svg = frame_svg(&frame(vec![[0.9, 0.0]]), None, &ColorMap::new());
        assert!(svg.contains(r#"r="270.000""#));
        assert!(svg.contains(r#"cx="570.000" cy="300.000""#));
    }

    #[test]
    fn rendering_is_deterministic() {
        let labels = vec!["x".to_string(), "y".to_string()];
        let colors = assign_colors(Some(&labels));
        let f = frame(vec![[0.12345678, -0.5], [0.3, 0.3]]);
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.svg"), dir.path().join("b.svg"));
        render_static(&f, Some(&labels), &colors, &a).unwrap();
        render_static(&f, Some(&labels), &colors, &b).unwrap();
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    }
}
