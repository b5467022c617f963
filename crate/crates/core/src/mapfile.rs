//! Versioned text formats for valley maps and historical household counts.
//!
//! Map file:
//!
//! ```text
//! #format:v1
//! #meta:rows=<u32>
//! #meta:cols=<u32>
//! #meta:start_year=<i32>
//! #household:<farm_cell>,<age>,<corn_stock>     (zero or more)
//! id,row,col,zone,quality,is_water_body,dry_0,...,dry_549,water_0,...,water_549
//! <one row per cell, ids 0..n in order>
//! ```
//!
//! History file:
//!
//! ```text
//! #format:v1
//! year,count
//! <550 rows of consecutive years>
//! ```

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::world::{Cell, HistoricalSeries, InitialHousehold, Landscape, WorldTemplate, HORIZON};
use crate::{MapError, MapErrorKind};

pub const FORMAT_LINE: &str = "#format:v1";

pub fn map_header() -> String {
    let mut h = String::from("id,row,col,zone,quality,is_water_body");
    for y in 0..HORIZON {
        write!(h, ",dry_{y}").unwrap();
    }
    for y in 0..HORIZON {
        write!(h, ",water_{y}").unwrap();
    }
    h
}

struct Lines<'a> {
    file: &'a str,
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(file: &'a str, text: &'a str) -> Self {
        Self {
            file,
            inner: text.lines().enumerate(),
        }
    }

    /// Next non-blank line with its 1-based number.
    fn next(&mut self) -> Option<(usize, &'a str)> {
        self.inner
            .by_ref()
            .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
            .find(|(_, l)| !l.trim().is_empty())
    }

    fn err(&self, line: usize, kind: MapErrorKind) -> MapError {
        MapError {
            file: self.file.to_string(),
            line,
            kind,
        }
    }
}

fn field<T: std::str::FromStr>(raw: &str, name: &str) -> Result<T, MapErrorKind> {
    raw.trim().parse().map_err(|_| MapErrorKind::BadField {
        field: name.to_string(),
        value: raw.chars().take(40).collect(),
    })
}

fn flag(raw: &str, name: &str) -> Result<bool, MapErrorKind> {
    match raw.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(MapErrorKind::BadField {
            field: name.to_string(),
            value: raw.chars().take(40).collect(),
        }),
    }
}

fn expect_format<'a>(lines: &mut Lines<'a>) -> Result<(), MapError> {
    match lines.next() {
        Some((_, l)) if l.trim() == FORMAT_LINE => Ok(()),
        Some((n, l)) => Err(lines.err(n, MapErrorKind::Version(l.chars().take(40).collect()))),
        None => Err(lines.err(0, MapErrorKind::Version(String::new()))),
    }
}

/// Parse map text; `file` names the source in error messages.
pub fn parse_map(file: &str, text: &str) -> Result<WorldTemplate, MapError> {
    let mut lines = Lines::new(file, text);
    expect_format(&mut lines)?;

    let (mut rows, mut cols, mut start_year) = (None, None, None);
    let mut households: Vec<(usize, InitialHousehold)> = Vec::new();
    let header_line = loop {
        let Some((n, l)) = lines.next() else {
            return Err(lines.err(0, MapErrorKind::MissingHeader));
        };
        if let Some(meta) = l.strip_prefix("#meta:") {
            let (k, v) = meta
                .split_once('=')
                .ok_or_else(|| lines.err(n, MapErrorKind::BadMeta(meta.to_string())))?;
            match k.trim() {
                "rows" => rows = Some(field::<u32>(v, "rows").map_err(|e| lines.err(n, e))?),
                "cols" => cols = Some(field::<u32>(v, "cols").map_err(|e| lines.err(n, e))?),
                "start_year" => {
                    start_year = Some(field::<i32>(v, "start_year").map_err(|e| lines.err(n, e))?)
                }
                _ => return Err(lines.err(n, MapErrorKind::BadMeta(k.to_string()))),
            }
        } else if let Some(h) = l.strip_prefix("#household:") {
            let parts: Vec<&str> = h.split(',').collect();
            if parts.len() != 3 {
                return Err(lines.err(n, MapErrorKind::ColumnCount { expected: 3, found: parts.len() }));
            }
            let hh = (|| {
                Ok::<_, MapErrorKind>(InitialHousehold {
                    farm_cell: field(parts[0], "farm_cell")?,
                    age: field(parts[1], "age")?,
                    corn_stock: field(parts[2], "corn_stock")?,
                })
            })()
            .map_err(|e| lines.err(n, e))?;
            if !(hh.corn_stock.is_finite() && hh.corn_stock >= 0.0) {
                return Err(lines.err(n, MapErrorKind::OutOfRange("corn_stock".into())));
            }
            households.push((n, hh));
        } else if l.starts_with('#') {
            continue;
        } else {
            break (n, l);
        }
    };
    let rows = rows.ok_or_else(|| lines.err(header_line.0, MapErrorKind::BadMeta("missing rows".into())))?;
    let cols = cols.ok_or_else(|| lines.err(header_line.0, MapErrorKind::BadMeta("missing cols".into())))?;
    let start_year = start_year
        .ok_or_else(|| lines.err(header_line.0, MapErrorKind::BadMeta("missing start_year".into())))?;
    if header_line.1.trim() != map_header() {
        return Err(lines.err(header_line.0, MapErrorKind::MissingHeader));
    }

    let width = 6 + 2 * HORIZON;
    let grid = u64::from(rows) * u64::from(cols);
    let mut cells: Vec<Cell> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    while let Some((n, l)) = lines.next() {
        if l.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = l.split(',').collect();
        if parts.len() != width {
            return Err(lines.err(n, MapErrorKind::ColumnCount { expected: width, found: parts.len() }));
        }
        let parse_cell = || -> Result<Cell, MapErrorKind> {
            let id: usize = field(parts[0], "id")?;
            let row: u32 = field(parts[1], "row")?;
            let col: u32 = field(parts[2], "col")?;
            let zone: u16 = field(parts[3], "zone")?;
            let quality: f64 = field(parts[4], "quality")?;
            let is_water_body = flag(parts[5], "is_water_body")?;
            if id != cells.len() {
                return Err(MapErrorKind::CellOrder { expected: cells.len(), found: id });
            }
            if row >= rows || col >= cols {
                return Err(MapErrorKind::Coordinate { id, row, col });
            }
            if !(0.0..=1.0).contains(&quality) {
                return Err(MapErrorKind::OutOfRange(format!("quality {quality} of cell {id}")));
            }
            let mut dryness_by_year = Vec::with_capacity(HORIZON);
            for (y, raw) in parts[6..6 + HORIZON].iter().enumerate() {
                let d: f64 = field(raw, &format!("dry_{y}"))?;
                if !d.is_finite() {
                    return Err(MapErrorKind::OutOfRange(format!("dry_{y} of cell {id}")));
                }
                dryness_by_year.push(d);
            }
            let water_by_year = parts[6 + HORIZON..]
                .iter()
                .enumerate()
                .map(|(y, raw)| flag(raw, &format!("water_{y}")))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Cell {
                id,
                row,
                col,
                zone,
                quality,
                is_water_body,
                dryness_by_year,
                water_by_year,
            })
        };
        let cell = parse_cell().map_err(|e| lines.err(n, e))?;
        if !seen.insert((cell.row, cell.col)) {
            return Err(lines.err(n, MapErrorKind::Coordinate { id: cell.id, row: cell.row, col: cell.col }));
        }
        if cells.len() as u64 >= grid {
            return Err(lines.err(n, MapErrorKind::Coordinate { id: cell.id, row: cell.row, col: cell.col }));
        }
        cells.push(cell);
    }
    if cells.is_empty() {
        return Err(lines.err(0, MapErrorKind::Empty));
    }

    let mut farms = std::collections::HashSet::new();
    for (n, h) in &households {
        let ok = h.farm_cell < cells.len() && !cells[h.farm_cell].is_water_body && farms.insert(h.farm_cell);
        if !ok {
            return Err(lines.err(*n, MapErrorKind::OutOfRange(format!("household farm cell {}", h.farm_cell))));
        }
    }

    Ok(WorldTemplate {
        landscape: Arc::new(Landscape::new(rows, cols, start_year, cells)),
        initial_households: households.into_iter().map(|(_, h)| h).collect(),
    })
}

pub fn parse_history(file: &str, text: &str) -> Result<HistoricalSeries, MapError> {
    let mut lines = Lines::new(file, text);
    expect_format(&mut lines)?;
    match lines.next() {
        Some((_, l)) if l.replace(' ', "") == "year,count" => {}
        Some((n, _)) => return Err(lines.err(n, MapErrorKind::MissingHeader)),
        None => return Err(lines.err(0, MapErrorKind::MissingHeader)),
    }
    let mut start_year = None;
    let mut counts = Vec::with_capacity(HORIZON);
    let mut last_line = 0;
    while let Some((n, l)) = lines.next() {
        if l.starts_with('#') {
            continue;
        }
        last_line = n;
        let parts: Vec<&str> = l.split(',').collect();
        if parts.len() != 2 {
            return Err(lines.err(n, MapErrorKind::ColumnCount { expected: 2, found: parts.len() }));
        }
        let year: i32 = field(parts[0], "year").map_err(|e| lines.err(n, e))?;
        let count: u32 = field(parts[1], "count").map_err(|e| lines.err(n, e))?;
        let start = *start_year.get_or_insert(year);
        if i64::from(year) != i64::from(start) + counts.len() as i64 {
            return Err(lines.err(n, MapErrorKind::OutOfRange(format!("non-consecutive year {year}"))));
        }
        counts.push(count);
    }
    if counts.len() != HORIZON {
        return Err(lines.err(
            last_line,
            MapErrorKind::Length {
                expected: HORIZON,
                found: counts.len(),
            },
        ));
    }
    Ok(HistoricalSeries {
        start_year: start_year.unwrap_or(0),
        counts,
    })
}

fn read(path: &Path) -> Result<String, MapError> {
    std::fs::read_to_string(path).map_err(|e| MapError {
        file: path.display().to_string(),
        line: 0,
        kind: MapErrorKind::Io(e.to_string()),
    })
}

/// Load a map and its target household series.
pub fn load_map(map_file: &Path, history_file: &Path) -> Result<(WorldTemplate, HistoricalSeries), MapError> {
    let template = parse_map(&map_file.display().to_string(), &read(map_file)?)?;
    let history = parse_history(&history_file.display().to_string(), &read(history_file)?)?;
    Ok((template, history))
}

pub fn format_map(template: &WorldTemplate) -> String {
    let land = &template.landscape;
    let mut out = String::new();
    writeln!(out, "{FORMAT_LINE}").unwrap();
    writeln!(out, "#meta:rows={}", land.rows).unwrap();
    writeln!(out, "#meta:cols={}", land.cols).unwrap();
    writeln!(out, "#meta:start_year={}", land.start_year).unwrap();
    for h in &template.initial_households {
        writeln!(out, "#household:{},{},{}", h.farm_cell, h.age, h.corn_stock).unwrap();
    }
    writeln!(out, "{}", map_header()).unwrap();
    for c in &land.cells {
        write!(
            out,
            "{},{},{},{},{},{}",
            c.id,
            c.row,
            c.col,
            c.zone,
            c.quality,
            u8::from(c.is_water_body)
        )
        .unwrap();
        for d in &c.dryness_by_year {
            write!(out, ",{d}").unwrap();
        }
        for &w in &c.water_by_year {
            write!(out, ",{}", u8::from(w)).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn format_history(series: &HistoricalSeries) -> String {
    let mut out = format!("{FORMAT_LINE}\nyear,count\n");
    for (i, c) in series.counts.iter().enumerate() {
        writeln!(out, "{},{c}", i64::from(series.start_year) + i as i64).unwrap();
    }
    out
}
