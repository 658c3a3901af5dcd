//! Products built on a fitted save model: xSAA, pitch rasters, keeper
//! rankings and per-save reports.

mod svg;

pub use svg::{heatmap_svg, technique_map_svg};

use crate::geometry::{shot_context, GeometryError, PitchPoint, ShotContext};
use crate::technique::TechniqueName;
use crate::xs::{SaveModel, XsError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Support radius in yards and the minimum count for a confident cell.
pub const SUPPORT_RADIUS: f64 = 5.0;
pub const MIN_SUPPORT: usize = 3;
pub const DEFAULT_MIN_FACED: usize = 15;
/// xS differences at or below this are treated as ties.
pub const XS_TIE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error(transparent)]
    Model(#[from] XsError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

/// xS and xSAA for each technique, in [`TechniqueName::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XsaaQuartet {
    pub xs: [f64; 4],
    pub xsaa: [f64; 4],
}

impl XsaaQuartet {
    pub fn from_xs(xs: [f64; 4]) -> Self {
        let mean = xs.iter().sum::<f64>() / 4.0;
        XsaaQuartet {
            xs,
            xsaa: xs.map(|v| v - mean),
        }
    }

    pub fn xs_of(&self, t: TechniqueName) -> f64 {
        self.xs[t.index()]
    }

    pub fn xsaa_of(&self, t: TechniqueName) -> f64 {
        self.xsaa[t.index()]
    }

    /// Highest-xS technique; ties keep the earlier technique.
    pub fn best(&self) -> TechniqueName {
        let mut best = 0;
        for i in 1..4 {
            if self.xs[i] > self.xs[best] {
                best = i;
            }
        }
        TechniqueName::ALL[best]
    }
}

pub fn xsaa<M: SaveModel + ?Sized>(model: &M, ctx: &ShotContext) -> Result<XsaaQuartet, XsError> {
    let mut xs = [0.0; 4];
    for (v, t) in xs.iter_mut().zip(TechniqueName::ALL) {
        *v = model.save_probability(ctx, t)?.value();
    }
    Ok(XsaaQuartet::from_xs(xs))
}

/// Rectangular raster over the pitch; cells are evaluated at their centres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub cell: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            x_min: 96.0,
            x_max: 120.0,
            y_min: 0.0,
            y_max: 80.0,
            cell: 1.0,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), AnalyticsError> {
        let ok = self.cell > 0.0
            && self.x_max > self.x_min
            && self.y_max > self.y_min
            && self.x_min >= 0.0
            && self.x_max <= 120.0
            && self.y_min >= 0.0
            && self.y_max <= 80.0;
        if ok {
            Ok(())
        } else {
            Err(AnalyticsError::InvalidGrid(format!("{self:?}")))
        }
    }

    pub fn nx(&self) -> usize {
        ((self.x_max - self.x_min) / self.cell).round() as usize
    }

    pub fn ny(&self) -> usize {
        ((self.y_max - self.y_min) / self.cell).round() as usize
    }

    pub fn center(&self, ix: usize, iy: usize) -> PitchPoint {
        PitchPoint::new(
            self.x_min + (ix as f64 + 0.5) * self.cell,
            self.y_min + (iy as f64 + 0.5) * self.cell,
        )
    }

    /// Cell index containing `p`, if any.
    pub fn locate(&self, p: PitchPoint) -> Option<(usize, usize)> {
        let fx = (p.x - self.x_min) / self.cell;
        let fy = (p.y - self.y_min) / self.cell;
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let (ix, iy) = (fx.floor() as usize, fy.floor() as usize);
        (ix < self.nx() && iy < self.ny()).then_some((ix, iy))
    }

    /// Cells in row-major order: y outer, x inner.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let nx = self.nx();
        (0..self.ny()).flat_map(move |iy| (0..nx).map(move |ix| (ix, iy)))
    }
}

pub fn support_count(points: &[PitchPoint], at: PitchPoint) -> usize {
    points
        .iter()
        .filter(|p| p.distance(at) <= SUPPORT_RADIUS)
        .count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechniqueCell {
    pub x: f64,
    pub y: f64,
    pub technique: TechniqueName,
    pub max_xs: f64,
    pub support: usize,
    pub low_confidence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechniqueMap {
    pub grid: GridSpec,
    pub under_pressure: bool,
    pub cells: Vec<TechniqueCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatCell {
    pub x: f64,
    pub y: f64,
    pub value: f64,
    pub support: usize,
    pub low_confidence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatMap {
    pub grid: GridSpec,
    pub technique: TechniqueName,
    pub under_pressure: bool,
    pub cells: Vec<HeatCell>,
}

fn cell_quartets<M: SaveModel + ?Sized>(
    model: &M,
    pressure: bool,
    grid: &GridSpec,
) -> Result<Vec<(PitchPoint, XsaaQuartet, usize)>, AnalyticsError> {
    grid.validate()?;
    let support = model.support_locations();
    grid.cells()
        .map(|(ix, iy)| {
            let c = grid.center(ix, iy);
            let q = xsaa(model, &shot_context(c, pressure)?)?;
            Ok((c, q, support_count(support, c)))
        })
        .collect()
}

pub fn optimal_map<M: SaveModel + ?Sized>(
    model: &M,
    pressure: bool,
    grid: &GridSpec,
) -> Result<TechniqueMap, AnalyticsError> {
    let cells = cell_quartets(model, pressure, grid)?
        .into_iter()
        .map(|(c, q, support)| {
            let t = q.best();
            TechniqueCell {
                x: c.x,
                y: c.y,
                technique: t,
                max_xs: q.xs_of(t),
                support,
                low_confidence: support < MIN_SUPPORT,
            }
        })
        .collect();
    Ok(TechniqueMap {
        grid: *grid,
        under_pressure: pressure,
        cells,
    })
}

pub fn xsaa_map<M: SaveModel + ?Sized>(
    model: &M,
    technique: TechniqueName,
    pressure: bool,
    grid: &GridSpec,
) -> Result<HeatMap, AnalyticsError> {
    let cells = cell_quartets(model, pressure, grid)?
        .into_iter()
        .map(|(c, q, support)| HeatCell {
            x: c.x,
            y: c.y,
            value: q.xsaa_of(technique),
            support,
            low_confidence: support < MIN_SUPPORT,
        })
        .collect();
    Ok(HeatMap {
        grid: *grid,
        technique,
        under_pressure: pressure,
        cells,
    })
}

/// The eight xSAA maps, pressure-off family first.
pub fn all_xsaa_maps<M: SaveModel + ?Sized>(
    model: &M,
    grid: &GridSpec,
) -> Result<Vec<HeatMap>, AnalyticsError> {
    let mut out = Vec::with_capacity(8);
    for pressure in [false, true] {
        let quartets = cell_quartets(model, pressure, grid)?;
        for t in TechniqueName::ALL {
            out.push(HeatMap {
                grid: *grid,
                technique: t,
                under_pressure: pressure,
                cells: quartets
                    .iter()
                    .map(|(c, q, support)| HeatCell {
                        x: c.x,
                        y: c.y,
                        value: q.xsaa_of(t),
                        support: *support,
                        low_confidence: *support < MIN_SUPPORT,
                    })
                    .collect(),
            });
        }
    }
    Ok(out)
}

/// A faced 1v1 with the technique the keeper used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeeperShot {
    pub shot_id: String,
    pub goalkeeper: String,
    pub location: PitchPoint,
    pub under_pressure: bool,
    pub technique: TechniqueName,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeeperRow {
    pub goalkeeper: String,
    pub optimal_technique_pct: f64,
    pub one_v_ones_faced: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeeperRanking {
    pub min_faced: usize,
    pub rows: Vec<KeeperRow>,
}

/// Optimal technique for a shot, read at its map cell centre when the
/// location falls inside `grid` and at the exact location otherwise.
pub fn map_optimal_technique<M: SaveModel + ?Sized>(
    model: &M,
    location: PitchPoint,
    pressure: bool,
    grid: &GridSpec,
) -> Result<TechniqueName, AnalyticsError> {
    let at = match grid.locate(location) {
        Some((ix, iy)) => grid.center(ix, iy),
        None => location,
    };
    Ok(xsaa(model, &shot_context(at, pressure)?)?.best())
}

pub fn rank_keepers<M: SaveModel + ?Sized>(
    model: &M,
    shots: &[KeeperShot],
    min_faced: usize,
    grid: &GridSpec,
) -> Result<KeeperRanking, AnalyticsError> {
    let mut tally: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for s in shots {
        let best = map_optimal_technique(model, s.location, s.under_pressure, grid)?;
        let e = tally.entry(&s.goalkeeper).or_insert((0, 0));
        e.0 += 1;
        e.1 += usize::from(best == s.technique);
    }
    let mut rows: Vec<KeeperRow> = tally
        .into_iter()
        .filter(|(_, (faced, _))| *faced >= min_faced)
        .map(|(name, (faced, hits))| KeeperRow {
            goalkeeper: name.to_string(),
            optimal_technique_pct: 100.0 * hits as f64 / faced as f64,
            one_v_ones_faced: faced,
        })
        .collect();
    rows.sort_by(|a, b| {
        b.optimal_technique_pct
            .total_cmp(&a.optimal_technique_pct)
            .then(b.one_v_ones_faced.cmp(&a.one_v_ones_faced))
            .then_with(|| a.goalkeeper.cmp(&b.goalkeeper))
    });
    Ok(KeeperRanking { min_faced, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Optimal,
    Suboptimal,
    Indifferent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaveReport {
    pub shot_id: String,
    pub context: ShotContext,
    pub quartet: XsaaQuartet,
    pub chosen: TechniqueName,
    pub optimal: TechniqueName,
    /// xS of the optimal technique minus xS of the chosen one.
    pub gap: f64,
    pub verdict: Verdict,
}

impl SaveReport {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "shot {}  distance {:.2} yd  angle {:.3} rad  pressure {}\n",
            self.shot_id,
            self.context.distance,
            self.context.angle,
            u8::from(self.context.under_pressure)
        );
        s.push_str(&format!("{:<16}{:>8}{:>9}\n", "technique", "xS", "xSAA"));
        for t in TechniqueName::ALL {
            let mark = match (t == self.chosen, t == self.optimal) {
                (true, true) => "  chosen, optimal",
                (true, false) => "  chosen",
                (false, true) => "  optimal",
                _ => "",
            };
            s.push_str(&format!(
                "{:<16}{:>8.3}{:>+9.3}{mark}\n",
                t.as_str(),
                self.quartet.xs_of(t),
                self.quartet.xsaa_of(t)
            ));
        }
        let verdict = match self.verdict {
            Verdict::Optimal => "optimal",
            Verdict::Suboptimal => "suboptimal",
            Verdict::Indifferent => "indifferent",
        };
        s.push_str(&format!("verdict {verdict}  gap {:.3}\n", self.gap));
        s
    }
}

pub fn save_report<M: SaveModel + ?Sized>(
    model: &M,
    shot_id: &str,
    location: PitchPoint,
    under_pressure: bool,
    chosen: TechniqueName,
) -> Result<SaveReport, AnalyticsError> {
    let context = shot_context(location, under_pressure)?;
    let quartet = xsaa(model, &context)?;
    let optimal = quartet.best();
    let spread = quartet.xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - quartet.xs.iter().copied().fold(f64::INFINITY, f64::min);
    let gap = quartet.xs_of(optimal) - quartet.xs_of(chosen);
    let (verdict, gap) = if spread <= XS_TIE {
        (Verdict::Indifferent, 0.0)
    } else if gap <= XS_TIE {
        (Verdict::Optimal, 0.0)
    } else {
        (Verdict::Suboptimal, gap)
    };
    Ok(SaveReport {
        shot_id: shot_id.to_string(),
        context,
        quartet,
        chosen,
        optimal: if verdict == Verdict::Optimal { chosen } else { optimal },
        gap,
        verdict,
    })
}
