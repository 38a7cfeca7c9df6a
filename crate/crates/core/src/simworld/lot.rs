use std::f64::consts::PI;

use rand::seq::SliceRandom;

use crate::cloud::{sample_segment, SemanticClass, SemanticPointCloud};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::Vec2d;

use super::{rng_for, Lane, Stream, TrueSlot, WorldModel, CLOUD_SPACING};

pub const LANE_WIDTH: f64 = 7.0;
/// Free space left and right of each row.
pub const SIDE_MARGIN: f64 = 10.0;
const END_MARGIN: f64 = 3.0;
/// Spacing between an inclined slot and its nearest neighbour along the lane.
pub const INCLINED_SPACING: f64 = 4.0;
const INCLINED_ANGLE: f64 = PI / 3.0;
const DASH_LENGTH: f64 = 3.0;
const ARROW_PERIOD: f64 = 24.0;

/// Derived geometry of a generated lot. Rows run along +x; slot bodies extend +y
/// from the entry line, and each row is served by the lane just below it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LotLayout {
    pub rows: usize,
    pub slots_per_row: usize,
    pub slot_width: f64,
    pub slot_depth: f64,
}

impl LotLayout {
    pub fn row_pitch(&self) -> f64 {
        LANE_WIDTH + self.slot_depth
    }

    pub fn entry_line_y(&self, row: usize) -> f64 {
        END_MARGIN + LANE_WIDTH + row as f64 * self.row_pitch()
    }

    pub fn lane_center_y(&self, row: usize) -> f64 {
        self.entry_line_y(row) - LANE_WIDTH / 2.0
    }

    pub fn width(&self) -> f64 {
        2.0 * SIDE_MARGIN + self.slots_per_row as f64 * self.slot_width
    }

    pub fn height(&self) -> f64 {
        2.0 * END_MARGIN + self.rows as f64 * self.row_pitch()
    }
}

/// Builds rows of perpendicular slots plus a fraction of isolated inclined slots
/// placed along the lane beyond the row ends.
pub fn generate_lot(
    rows: usize,
    slots_per_row: usize,
    slot_width: f64,
    slot_depth: f64,
    inclined_fraction: f64,
    seed: u64,
) -> Result<WorldModel> {
    if rows == 0 || slots_per_row == 0 {
        return Err(Error::Config("rows and slots_per_row must be at least 1".into()));
    }
    if !(slot_width > 0.0 && slot_depth > 0.0 && slot_width.is_finite() && slot_depth.is_finite()) {
        return Err(Error::Config("slot width and depth must be positive".into()));
    }
    if !(0.0..=1.0).contains(&inclined_fraction) {
        return Err(Error::Config("inclined_fraction must lie in [0, 1]".into()));
    }
    let layout = LotLayout {
        rows,
        slots_per_row,
        slot_width,
        slot_depth,
    };
    let total = rows * slots_per_row;
    let n_inclined = (inclined_fraction * total as f64).round() as usize;

    // distribute inclined slots over rows, starting from a seeded row order
    let mut order: Vec<usize> = (0..rows).collect();
    order.shuffle(&mut rng_for(seed, Stream::Lot));
    let mut per_row = vec![0usize; rows];
    for k in 0..n_inclined {
        per_row[order[k % rows]] += 1;
    }
    if per_row.iter().any(|&k| k >= slots_per_row) {
        return Err(Error::Config(format!(
            "{n_inclined} inclined slots do not fit in {rows} rows of {slots_per_row}"
        )));
    }

    let lot_width = layout.width();
    let lot_height = layout.height();
    let mut slots = Vec::with_capacity(total);
    let mut lanes = Vec::with_capacity(rows);
    for row in 0..rows {
        let y = layout.entry_line_y(row);
        let regular = slots_per_row - per_row[row];
        let first_x = SIDE_MARGIN + 0.5 * slot_width;
        for i in 0..regular {
            slots.push(TrueSlot {
                id: slots.len() as u64,
                entry_mid: Vec2::new(first_x + i as f64 * slot_width, y),
                entry_dir: Vec2::new(1.0, 0.0),
                inclined: false,
            });
        }
        let last_x = first_x + (regular - 1) as f64 * slot_width;
        let left_capacity = ((first_x - 1.0) / INCLINED_SPACING).floor() as usize;
        let (mut left, mut right) = (0usize, 0usize);
        for j in 0..per_row[row] {
            let x = if j % 2 == 1 && left < left_capacity {
                left += 1;
                first_x - INCLINED_SPACING * left as f64
            } else {
                right += 1;
                last_x + INCLINED_SPACING * right as f64
            };
            if !(1.0..=lot_width - 1.0).contains(&x) {
                return Err(Error::Config(format!("inclined slots overflow row {row}")));
            }
            slots.push(TrueSlot {
                id: slots.len() as u64,
                entry_mid: Vec2::new(x, y),
                entry_dir: Vec2::from_angle(INCLINED_ANGLE),
                inclined: true,
            });
        }
        let cy = layout.lane_center_y(row);
        lanes.push(super::Lane {
            start: Vec2::new(2.0, cy),
            end: Vec2::new(lot_width - 2.0, cy),
        });
    }

    let semantic_cloud = paint(&slots, &lanes, slot_width, slot_depth);
    Ok(WorldModel {
        lot_width,
        lot_height,
        slots,
        semantic_cloud,
        true_slot_width: slot_width,
        true_slot_depth: slot_depth,
        lanes,
    })
}

/// The painted outline of a slot: two side lines and the back line.
pub(crate) fn slot_outline(mid: Vec2d, dir: Vec2d, width: f64, depth: f64) -> [(Vec2d, Vec2d); 3] {
    let half = dir.scale(width / 2.0);
    let deep = dir.perp().scale(depth);
    let (a, b) = (mid - half, mid + half);
    [(a, a + deep), (b, b + deep), (a + deep, b + deep)]
}

fn paint(slots: &[TrueSlot], lanes: &[Lane], width: f64, depth: f64) -> SemanticPointCloud {
    let mut cloud = SemanticPointCloud::default();
    for s in slots {
        for (a, b) in slot_outline(s.entry_mid, s.entry_dir, width, depth) {
            for p in sample_segment(a, b, CLOUD_SPACING) {
                cloud.push(p, SemanticClass::SlotLine);
            }
        }
    }
    for lane in lanes {
        let dir = (lane.end - lane.start).normalized().unwrap_or(Vec2::new(1.0, 0.0));
        let len = lane.start.distance(lane.end);
        let mut s = 0.0;
        while s + DASH_LENGTH <= len {
            let a = lane.start + dir.scale(s);
            for p in sample_segment(a, a + dir.scale(DASH_LENGTH), CLOUD_SPACING) {
                cloud.push(p, SemanticClass::LaneMarking);
            }
            s += 2.0 * DASH_LENGTH;
        }
        // direction arrows in the right-hand half of the lane
        let side = dir.perp().scale(-LANE_WIDTH / 4.0);
        let mut s = ARROW_PERIOD / 2.0;
        while s + 2.0 <= len {
            let tail = lane.start + dir.scale(s) + side;
            let tip = tail + dir.scale(2.0);
            let back = dir.scale(-0.6);
            let wing = dir.perp().scale(0.5);
            for (a, b) in [(tail, tip), (tip, tip + back + wing), (tip, tip + back - wing)] {
                for p in sample_segment(a, b, CLOUD_SPACING) {
                    cloud.push(p, SemanticClass::Arrow);
                }
            }
            s += ARROW_PERIOD;
        }
    }
    // slots sharing a side line paint it once
    cloud.voxel_downsample(1e-3)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_row_spacing() {
        let w = generate_lot(1, 3, 2.5, 5.3, 0.0, 1).unwrap();
        assert_eq!(w.slots.len(), 3);
        for pair in w.slots.windows(2) {
            assert!((pair[0].entry_mid.distance(pair[1].entry_mid) - 2.5).abs() < 1e-12);
        }
        assert!(w.slots.iter().all(|s| w.contains(s.entry_mid)));
    }

    #[test]
    fn two_rows_separated_by_lane() {
        let w = generate_lot(2, 4, 2.5, 5.3, 0.0, 1).unwrap();
        assert_eq!(w.slots.len(), 8);
        let dy = w.slots[4].entry_mid.y - w.slots[0].entry_mid.y;
        assert!((dy - (LANE_WIDTH + 5.3)).abs() < 1e-12);
        assert_eq!(w.lanes.len(), 2);
    }

    #[test]
    fn inclined_slots_are_isolated() {
        let w = generate_lot(4, 25, 2.5, 5.3, 0.1, 17).unwrap();
        assert_eq!(w.slots.len(), 100);
        let inclined: Vec<_> = w.slots.iter().filter(|s| s.inclined).collect();
        assert_eq!(inclined.len(), 10);
        for s in &inclined {
            assert!((s.entry_dir.norm() - 1.0).abs() < 1e-9);
            let nearest = w
                .slots
                .iter()
                .filter(|o| o.id != s.id)
                .map(|o| o.entry_mid.distance(s.entry_mid))
                .fold(f64::INFINITY, f64::min);
            assert!(nearest > 2.5, "inclined slot {} has neighbour at {nearest}", s.id);
            assert!(w.contains(s.entry_mid));
        }
    }

    #[test]
    fn default_lot_is_100_by_80() {
        let w = generate_lot(6, 32, 2.5, 5.3, 0.05, 3).unwrap();
        assert!((w.lot_width - 100.0).abs() < 1e-9);
        assert!((w.lot_height - 80.0).abs() < 0.5);
        for c in SemanticClass::ALL {
            assert!(w.semantic_cloud.of_class(c).count() > 0);
        }
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(generate_lot(0, 3, 2.5, 5.3, 0.0, 1).is_err());
        assert!(generate_lot(1, 0, 2.5, 5.3, 0.0, 1).is_err());
        assert!(generate_lot(1, 3, 0.0, 5.3, 0.0, 1).is_err());
        assert!(generate_lot(1, 3, -2.5, 5.3, 0.0, 1).is_err());
        assert!(generate_lot(1, 2, 2.5, 5.3, 1.0, 1).is_err());
    }

    #[test]
    fn deterministic() {
        let a = generate_lot(3, 10, 2.5, 5.3, 0.2, 9).unwrap();
        let b = generate_lot(3, 10, 2.5, 5.3, 0.2, 9).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
