//! Domain-colouring images and CSV tables of grid evaluations.

use std::f64::consts::TAU;
use std::io::{self, Write};

use num_complex::Complex64;

use crate::engine::{Cell, GridResult};

/// Hue `arg(v)/2π`, full saturation, lightness `1 - 1/(1+|v|)`.
pub fn domain_color(v: Complex64) -> [u8; 3] {
    let hue = (v.arg() / TAU).rem_euclid(1.0);
    let lightness = 1.0 - 1.0 / (1.0 + v.norm());
    hsl_to_rgb(hue, 1.0, lightness)
}

fn hsl_to_rgb(h: f64, s: f64, l: f64) -> [u8; 3] {
    let q = if l < 0.5 { l * (1.0 + s) } else { l + s - l * s };
    let p = 2.0 * l - q;
    let channel = |t: f64| {
        let t = t.rem_euclid(1.0);
        let c = if t < 1.0 / 6.0 {
            p + (q - p) * 6.0 * t
        } else if t < 0.5 {
            q
        } else if t < 2.0 / 3.0 {
            p + (q - p) * (2.0 / 3.0 - t) * 6.0
        } else {
            p
        };
        (c.clamp(0.0, 1.0) * 255.0).round() as u8
    };
    [channel(h + 1.0 / 3.0), channel(h), channel(h - 1.0 / 3.0)]
}

/// Binary PPM (P6, maxval 255); masked and failed cells are black.
pub fn write_ppm<W: Write>(grid: &GridResult, mut out: W) -> io::Result<()> {
    write!(out, "P6\n{} {}\n255\n", grid.spec.cols, grid.spec.rows)?;
    let mut pixels = Vec::with_capacity(3 * grid.cells.len());
    for cell in &grid.cells {
        let rgb = match cell {
            Cell::Value(t) if t.value.is_finite() => domain_color(t.value),
            _ => [0, 0, 0],
        };
        pixels.extend_from_slice(&rgb);
    }
    out.write_all(&pixels)
}

/// One row per node: `re_x, im_x, re_value, im_value, depth, status`.
/// Value and depth are empty for masked and failed cells.
pub fn write_csv<W: Write>(grid: &GridResult, out: W) -> csv::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["re_x", "im_x", "re_value", "im_value", "depth", "status"])?;
    for row in 0..grid.spec.rows {
        for col in 0..grid.spec.cols {
            let x = grid.spec.node(row, col);
            let cell = grid.cell(row, col);
            let (re, im, depth) = match cell {
                Cell::Value(t) => (
                    format!("{:e}", t.value.re),
                    format!("{:e}", t.value.im),
                    t.depth.to_string(),
                ),
                _ => (String::new(), String::new(), String::new()),
            };
            writer.write_record([
                format!("{:e}", x.re),
                format!("{:e}", x.im),
                re,
                im,
                depth,
                cell.status().to_string(),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{GridSpec, Truncation};

    fn grid(cells: Vec<Cell>, cols: usize, rows: usize) -> GridResult {
        GridResult {
            spec: GridSpec {
                center: Complex64::new(0.0, 0.0),
                half_width: 1.0,
                half_height: 1.0,
                cols,
                rows,
                exclusion_radius: 0.0,
            },
            cells,
        }
    }

    fn value(v: Complex64) -> Cell {
        Cell::Value(Truncation {
            value: v,
            depth: 3,
            last_increment: 0.0,
            tail: 0.0,
        })
    }

    #[test]
    fn colour_anchors() {
        assert_eq!(domain_color(Complex64::new(0.0, 0.0)), [0, 0, 0]);
        // |v| = 1 gives lightness 1/2: a pure hue.
        assert_eq!(domain_color(Complex64::new(1.0, 0.0)), [255, 0, 0]);
        assert_eq!(domain_color(Complex64::from_polar(1.0, TAU / 3.0)), [0, 255, 0]);
        assert_eq!(domain_color(Complex64::from_polar(1.0, -TAU / 3.0)), [0, 0, 255]);
        let bright = domain_color(Complex64::new(1e9, 0.0));
        assert!(bright.iter().all(|&c| c >= 254));
    }

    #[test]
    fn ppm_layout() {
        let g = grid(
            vec![
                value(Complex64::new(1.0, 0.0)),
                Cell::Masked,
                Cell::Failed("pole".into()),
                value(Complex64::new(0.0, 0.0)),
            ],
            2,
            2,
        );
        let mut bytes = Vec::new();
        write_ppm(&g, &mut bytes).unwrap();
        let header = b"P6\n2 2\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(&bytes[header.len()..], &[255, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn csv_layout() {
        let g = grid(vec![value(Complex64::new(0.5, -0.25)), Cell::Masked], 2, 1);
        let mut bytes = Vec::new();
        write_csv(&g, &mut bytes).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "re_x,im_x,re_value,im_value,depth,status");
        assert_eq!(lines[1], "-1e0,0e0,5e-1,-2.5e-1,3,ok");
        assert_eq!(lines[2], "1e0,0e0,,,,masked");
    }
}
