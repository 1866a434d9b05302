//! Static SVG heatmaps of `log10 |V|` on a one-dimensional phase space.

use std::fmt::Write as _;
use std::path::Path;

use gabmod::grid::PhaseSpaceSignal;

/// Magnitudes below this are drawn at the floor colour.
pub const FLOOR: f64 = 1e-16;
/// Fixed colour scale: `log10 |V|` from `LOG_MIN` (floor) to `LOG_MAX`.
pub const LOG_MIN: f64 = -16.0;
pub const LOG_MAX: f64 = 0.0;

const CELL: usize = 4;

// Dark blue through teal and green to yellow.
const STOPS: [[f64; 3]; 5] = [
    [68.0, 1.0, 84.0],
    [59.0, 82.0, 139.0],
    [33.0, 145.0, 140.0],
    [94.0, 201.0, 98.0],
    [253.0, 231.0, 37.0],
];

#[derive(Debug, thiserror::Error)]
pub enum HeatmapError {
    #[error("heatmaps need a one-dimensional signal (two-dimensional phase space), got d = {0}")]
    Dimension(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn colour(log_mag: f64) -> [u8; 3] {
    let t = ((log_mag - LOG_MIN) / (LOG_MAX - LOG_MIN)).clamp(0.0, 1.0);
    let pos = t * (STOPS.len() - 1) as f64;
    let i = (pos.floor() as usize).min(STOPS.len() - 2);
    let frac = pos - i as f64;
    let mut rgb = [0u8; 3];
    for (c, out) in rgb.iter_mut().enumerate() {
        *out = (STOPS[i][c] + frac * (STOPS[i + 1][c] - STOPS[i][c])).round() as u8;
    }
    rgb
}

/// Renders `log10 max(|V|, FLOOR)` with time along the horizontal axis and
/// frequency upward, both in symmetric order centred on zero.
pub fn heatmap_svg(v: &PhaseSpaceSignal) -> Result<String, HeatmapError> {
    let d = v.grid.dim();
    if d != 1 {
        return Err(HeatmapError::Dimension(d));
    }
    let n = v.grid.n[0];
    let half = n / 2;
    let side = n * CELL;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{side}" height="{side}" viewBox="0 0 {side} {side}" shape-rendering="crispEdges">"#
    );
    let _ = writeln!(svg, "<title>log10 |V| on Z_{n} x Z_{n}, scale [{LOG_MIN}, {LOG_MAX}]</title>");
    for row in 0..n {
        // top row is the highest frequency
        let xi = (n - 1 - row + half) % n;
        for col in 0..n {
            let x = (col + half) % n;
            let mag = v.at(&[x], &[xi]).norm().max(FLOOR);
            let [r, g, b] = colour(mag.log10());
            let _ = writeln!(
                svg,
                r##"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="#{r:02x}{g:02x}{b:02x}"/>"##,
                col * CELL,
                row * CELL
            );
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Writes [`heatmap_svg`] to `path` atomically.
pub fn emit_heatmap(v: &PhaseSpaceSignal, path: &Path) -> Result<(), HeatmapError> {
    let svg = heatmap_svg(v)?;
    crate::output::write_atomic(path, svg.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use gabmod::gabor::stft;
    use gabmod::grid::{standard_signal, GridSpec, SignalKind, SignalNd};

    fn fills(svg: &str) -> Vec<&str> {
        svg.lines().filter_map(|l| l.split("fill=\"").nth(1)).collect()
    }

    #[test]
    fn zero_signal_is_uniform_floor() {
        let g = GridSpec::new(&[16]).unwrap();
        let phi = standard_signal(&g, &SignalKind::Gaussian { width: None }).unwrap();
        let v = stft(&SignalNd::zeros(&g), &phi).unwrap();
        let svg = heatmap_svg(&v).unwrap();
        let f = fills(&svg);
        assert_eq!(f.len(), 256);
        let [r, g, b] = colour(LOG_MIN);
        let floor = format!("#{r:02x}{g:02x}{b:02x}\"/>");
        assert!(f.iter().all(|c| *c == floor));
    }

    #[test]
    fn gaussian_peaks_at_the_centre() {
        let g = GridSpec::new(&[16]).unwrap();
        let phi = standard_signal(&g, &SignalKind::Gaussian { width: None }).unwrap();
        let v = stft(&phi, &phi).unwrap();
        let svg = heatmap_svg(&v).unwrap();
        let f = fills(&svg);
        // (x, xi) = (0, 0) sits at column 8, row 7
        let centre = f[7 * 16 + 8];
        let corner = f[0];
        assert_ne!(centre, corner);
        // symmetric under x -> -x
        assert_eq!(f[7 * 16 + 7], f[7 * 16 + 9]);
    }

    #[test]
    fn same_input_same_bytes() {
        let g = GridSpec::new(&[32]).unwrap();
        let f = standard_signal(&g, &SignalKind::Random { seed: 11 }).unwrap();
        let phi = standard_signal(&g, &SignalKind::Gaussian { width: None }).unwrap();
        let a = heatmap_svg(&stft(&f, &phi).unwrap()).unwrap();
        let b = heatmap_svg(&stft(&f, &phi).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn two_dimensional_input_is_refused() {
        let g = GridSpec::new(&[4, 4]).unwrap();
        let phi = standard_signal(&g, &SignalKind::Gaussian { width: None }).unwrap();
        let v = stft(&phi, &phi).unwrap();
        assert!(matches!(heatmap_svg(&v), Err(HeatmapError::Dimension(2))));
    }

    #[test]
    fn colour_scale_is_clamped() {
        assert_eq!(colour(-40.0), colour(LOG_MIN));
        assert_eq!(colour(3.0), colour(LOG_MAX));
        assert_eq!(colour(LOG_MAX), [253, 231, 37]);
    }
}
