//! Cellular-automaton kinematic waves on single lanes.
//!
//! Each lane is a row of jam-spacing-sized cells holding at most one
//! vehicle. One update of elementary CA rule 184 advances every vehicle
//! whose downstream cell is empty, which solves the kinematic wave model
//! with an isosceles triangular fundamental diagram: free-flow speed and
//! wave speed are both one cell per step, saturation flow is 1/2 and jam
//! density is 1.

use crate::error::{Error, Result};

/// Unit-free scaling constants of the triangular fundamental diagram.
pub struct ScalingConstants;

impl ScalingConstants {
    /// Free-flow speed `u` in cells per step.
    pub const FREE_FLOW_SPEED: f64 = 1.0;
    /// Backward wave speed `w` in cells per step.
    pub const WAVE_SPEED: f64 = 1.0;
    /// Saturation flow `u·w/(u+w)` in vehicles per step per lane.
    pub const SATURATION_FLOW: f64 = 0.5;
    /// Jam density in vehicles per cell.
    pub const JAM_DENSITY: f64 = 1.0;
}

/// Boundary handling for a single-lane update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// The lane closes into a ring.
    Periodic,
    /// The lane is a road segment between intersections. `inflow` is the
    /// occupancy of the virtual upstream cell (a vehicle granted entry this
    /// step); a closed outflow behaves like a permanently occupied virtual
    /// downstream cell, an open one like an empty cell the stop-line
    /// vehicle exits into.
    Gated { inflow: bool, outflow_open: bool },
}

/// Occupancy of one directed lane; cell 0 is the upstream end.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lane {
    cells: Vec<u8>,
}

impl Lane {
    /// Empty lane of `len` cells. `len` must be at least 1.
    pub fn empty(len: usize) -> Self {
        assert!(len >= 1, "lane must have at least one cell");
        Lane {
            cells: vec![0; len],
        }
    }

    /// Lane from explicit 0/1 occupancies.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::invalid("lane", "must have at least one cell"));
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::invalid("lane", "cells must be 0 or 1"));
        }
        Ok(Lane {
            cells: bits.to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        false // a lane always has at least one cell
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn get(&self, i: usize) -> u8 {
        self.cells[i]
    }

    pub fn set(&mut self, i: usize, occupied: bool) {
        self.cells[i] = occupied as u8;
    }

    /// Occupancy of the most downstream cell (the stop line).
    pub fn stop_line(&self) -> bool {
        *self.cells.last().unwrap() == 1
    }

    /// Occupancy of the most upstream cell (the entry).
    pub fn entry(&self) -> bool {
        self.cells[0] == 1
    }

    pub fn vehicle_count(&self) -> usize {
        self.cells.iter().map(|&c| c as usize).sum()
    }

    /// Vehicles strictly inside the lane that advance on the next update,
    /// i.e. occupied cells (other than the stop line) with an empty
    /// downstream neighbor.
    pub fn interior_movers(&self) -> usize {
        self.cells
            .windows(2)
            .filter(|w| w[0] == 1 && w[1] == 0)
            .count()
    }
}

/// The rule 184 local update for neighborhood `(left, center, right)`.
///
/// All eight cases, new center listed last:
/// 111→1, 110→0, 101→1, 100→1, 011→1, 010→0, 001→0, 000→0.
#[inline(always)]
pub fn rule184_cell(left: u8, center: u8, right: u8) -> u8 {
    (left & (1 - center)) | (center & right)
}

/// One synchronous rule 184 update of a lane.
///
/// Every cell is computed from the previous state; vehicle count is
/// conserved up to the boundary exchange of the gated variant.
pub fn rule184_step(lane: &Lane, boundary: Boundary) -> Lane {
    let mut next = lane.clone();
    rule184_step_into(lane, boundary, &mut next);
    next
}

/// In-place variant writing into a preallocated lane of the same length.
pub fn rule184_step_into(lane: &Lane, boundary: Boundary, out: &mut Lane) {
    let cells = &lane.cells;
    let n = cells.len();
    assert_eq!(out.cells.len(), n, "output lane length mismatch");
    let (first_left, last_right) = match boundary {
        Boundary::Periodic => (cells[n - 1], cells[0]),
        Boundary::Gated {
            inflow,
            outflow_open,
        } => (inflow as u8, !outflow_open as u8),
    };
    if n == 1 {
        out.cells[0] = rule184_cell(first_left, cells[0], last_right);
        return;
    }
    out.cells[0] = rule184_cell(first_left, cells[0], cells[1]);
    for i in 1..n - 1 {
        out.cells[i] = rule184_cell(cells[i - 1], cells[i], cells[i + 1]);
    }
    out.cells[n - 1] = rule184_cell(cells[n - 2], cells[n - 1], last_right);
}

/// Vehicles that advance during one periodic update of a ring, including
/// the wrap-around move.
pub fn ring_movers(lane: &Lane) -> usize {
    let n = lane.len();
    let wrap = (lane.cells[n - 1] == 1 && lane.cells[0] == 0) as usize;
    lane.interior_movers() + wrap
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lane(bits: &[u8]) -> Lane {
        Lane::from_bits(bits).unwrap()
    }

    #[test]
    fn truth_table_matches_rule_184() {
        // rule number 184 = 10111000 in binary over neighborhoods 111..000
        let expected = [
            ((1, 1, 1), 1),
            ((1, 1, 0), 0),
            ((1, 0, 1), 1),
            ((1, 0, 0), 1),
            ((0, 1, 1), 1),
            ((0, 1, 0), 0),
            ((0, 0, 1), 0),
            ((0, 0, 0), 0),
        ];
        for ((l, c, r), out) in expected {
            assert_eq!(rule184_cell(l, c, r), out, "neighborhood {l}{c}{r}");
        }
    }

    #[test]
    fn jam_is_a_fixed_point() {
        let l = lane(&[1, 1, 1]);
        assert_eq!(rule184_step(&l, Boundary::Periodic), l);
    }

    #[test]
    fn alternating_pattern_advances() {
        let l = lane(&[1, 0, 1, 0]);
        assert_eq!(rule184_step(&l, Boundary::Periodic), lane(&[0, 1, 0, 1]));
    }

    #[test]
    fn closed_gate_holds_the_stop_line_vehicle() {
        let l = lane(&[0, 0, 1]);
        let next = rule184_step(
            &l,
            Boundary::Gated {
                inflow: false,
                outflow_open: false,
            },
        );
        assert_eq!(next, lane(&[0, 0, 1]));
    }

    #[test]
    fn open_gate_releases_the_stop_line_vehicle() {
        let l = lane(&[0, 1, 1]);
        let next = rule184_step(
            &l,
            Boundary::Gated {
                inflow: false,
                outflow_open: true,
            },
        );
        // stop-line vehicle exits; its follower saw an occupied cell and stays
        assert_eq!(next, lane(&[0, 1, 0]));
    }

    #[test]
    fn inflow_enters_an_empty_first_cell() {
        let l = lane(&[0, 1, 0]);
        let next = rule184_step(
            &l,
            Boundary::Gated {
                inflow: true,
                outflow_open: false,
            },
        );
        assert_eq!(next, lane(&[1, 0, 1]));
    }

    #[test]
    fn saturation_flow_identity() {
        let u = ScalingConstants::FREE_FLOW_SPEED;
        let w = ScalingConstants::WAVE_SPEED;
        assert_eq!(ScalingConstants::SATURATION_FLOW, u * w / (u + w));
    }

    #[test]
    fn ring_settles_to_min_of_density_branches() {
        // isolated ring: steady flow is min(k, 1-k) after at most C steps
        for &m in &[10usize, 30, 50, 80, 90] {
            let c = 100usize;
            let mut l = Lane::empty(c);
            // clumped start, the worst transient
            for i in 0..m {
                l.set(i, true);
            }
            for _ in 0..c {
                l = rule184_step(&l, Boundary::Periodic);
            }
            let expected = m.min(c - m);
            for _ in 0..20 {
                assert_eq!(ring_movers(&l), expected, "m={m}");
                l = rule184_step(&l, Boundary::Periodic);
            }
        }
    }

    proptest! {
        #[test]
        fn periodic_update_conserves_vehicles(bits in prop::collection::vec(0u8..=1, 1..80)) {
            let l = lane(&bits);
            let mut cur = l.clone();
            for _ in 0..5 {
                cur = rule184_step(&cur, Boundary::Periodic);
                prop_assert_eq!(cur.vehicle_count(), l.vehicle_count());
            }
        }

        #[test]
        fn flipping_one_cell_is_local(
            bits in prop::collection::vec(0u8..=1, 3..60),
            idx in 0usize..60,
        ) {
            let idx = idx % bits.len();
            let a = lane(&bits);
            let mut flipped = bits.clone();
            flipped[idx] ^= 1;
            let b = lane(&flipped);
            let na = rule184_step(&a, Boundary::Periodic);
            let nb = rule184_step(&b, Boundary::Periodic);
            let n = bits.len();
            for i in 0..n {
                let neighbor = i == idx
                    || (i + 1) % n == idx
                    || (idx + 1) % n == i;
                if !neighbor {
                    prop_assert_eq!(na.get(i), nb.get(i), "non-neighbor cell {} changed", i);
                }
            }
        }

        #[test]
        fn update_is_deterministic(bits in prop::collection::vec(0u8..=1, 1..40)) {
            let l = lane(&bits);
            prop_assert_eq!(
                rule184_step(&l, Boundary::Periodic),
                rule184_step(&l, Boundary::Periodic)
            );
        }
    }
}
