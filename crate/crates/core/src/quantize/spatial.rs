use alloc::format;
use alloc::vec::Vec;

use crate::model::ForwardSpec;
use crate::timegrid::TimeGrid;
use crate::{Error, Result};

/// Regular grid `center + k * spacing` over integer multi-indices with
/// `|k_j| <= half_count` on each axis. Flat indices run with the last axis
/// fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialGrid {
    pub center: Vec<f64>,
    pub spacing: f64,
    pub half_count: usize,
}

impl SpatialGrid {
    pub fn single(center: Vec<f64>) -> Self {
        SpatialGrid {
            center,
            spacing: 0.0,
            half_count: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn per_axis(&self) -> usize {
        2 * self.half_count + 1
    }

    pub fn len(&self) -> usize {
        self.per_axis().pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of axis index `j` (in `0..per_axis()`) on axis `axis`.
    #[inline]
    pub fn coordinate(&self, axis: usize, j: usize) -> f64 {
        self.center[axis] + (j as f64 - self.half_count as f64) * self.spacing
    }

    pub fn node(&self, index: usize, out: &mut [f64]) {
        let p = self.per_axis();
        let mut rest = index;
        for axis in (0..self.dim()).rev() {
            out[axis] = self.coordinate(axis, rest % p);
            rest /= p;
        }
    }

    pub fn node_vec(&self, index: usize) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.dim()];
        self.node(index, &mut out);
        out
    }

    /// Index of the center node.
    pub fn center_index(&self) -> usize {
        let p = self.per_axis();
        (0..self.dim()).fold(0, |acc, _| acc * p + self.half_count)
    }

    /// Nearest node on one axis; a point halfway between two nodes goes to
    /// the lower one, points outside clamp to the extreme node.
    #[inline]
    pub fn axis_index(&self, axis: usize, x: f64) -> usize {
        if self.half_count == 0 {
            return 0;
        }
        let u = (x - self.center[axis]) / self.spacing + self.half_count as f64;
        let k = libm::ceil(u - 0.5);
        if k <= 0.0 {
            0
        } else if k >= (2 * self.half_count) as f64 {
            2 * self.half_count
        } else {
            k as usize
        }
    }

    /// Component-wise nearest-node projection.
    pub fn project(&self, x: &[f64]) -> usize {
        let p = self.per_axis();
        x.iter()
            .enumerate()
            .fold(0, |acc, (axis, &v)| acc * p + self.axis_index(axis, v))
    }
}

/// How many nodes the grid at time index `i` has on each side of the center.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NodeSchedule {
    /// `m_i = per_step * i`
    Linear { per_step: usize },
    /// `m_i = m` for `i >= 1`
    Constant { m: usize },
}

impl NodeSchedule {
    pub fn half_count(&self, i: usize) -> usize {
        match *self {
            NodeSchedule::Linear { per_step } => per_step * i,
            NodeSchedule::Constant { m } => m,
        }
    }
}

/// Grid extent `x_max(t) = drift_bound * t + width_factor * q * diffusion_bound * sqrt(t)`
/// on each side of `x0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridPolicy {
    pub drift_bound: f64,
    pub width_factor: f64,
    pub diffusion_bound: f64,
    pub q: f64,
    pub schedule: NodeSchedule,
}

impl GridPolicy {
    /// Extent `0.5 t + 1.5 * 3 * sqrt(t)` with `m_i = i`.
    pub fn standard() -> Self {
        GridPolicy {
            drift_bound: 0.5,
            width_factor: 1.5,
            diffusion_bound: 1.0,
            q: 3.0,
            schedule: NodeSchedule::Linear { per_step: 1 },
        }
    }

    pub fn extent(&self, t: f64) -> f64 {
        self.drift_bound.abs() * t + self.width_factor * self.q * self.diffusion_bound * libm::sqrt(t)
    }
}

pub fn build_spatial_grids(forward: &ForwardSpec, grid: &TimeGrid, policy: &GridPolicy) -> Result<Vec<SpatialGrid>> {
    if !(policy.extent(1.0) > 0.0 && policy.extent(1.0).is_finite()) {
        return Err(Error::config("spatial grid policy must give a positive finite extent"));
    }
    grid.times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            if i == 0 {
                return Ok(SpatialGrid::single(forward.x0.clone()));
            }
            let m = policy.schedule.half_count(i);
            if m == 0 {
                return Err(Error::DegenerateGrid { index: i, time: t });
            }
            let x_max = policy.extent(t);
            if !(x_max > 0.0) {
                return Err(Error::config(format!("spatial extent at t = {t} is {x_max}")));
            }
            Ok(SpatialGrid {
                center: forward.x0.clone(),
                spacing: x_max / m as f64,
                half_count: m,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn standard_extent() {
        assert_eq!(GridPolicy::standard().extent(1.0), 5.0);
    }

    #[test]
    fn projection_rules() {
        let g = SpatialGrid {
            center: vec![0.0],
            spacing: 1.0,
            half_count: 2,
        };
        assert_eq!(g.len(), 5);
        assert_eq!(g.project(&[1.0]), 3);
        assert_eq!(g.project(&[0.5]), 2);
        assert_eq!(g.project(&[-0.5]), 1);
        assert_eq!(g.project(&[0.51]), 3);
        assert_eq!(g.project(&[100.0]), 4);
        assert_eq!(g.project(&[-100.0]), 0);
        assert_eq!(g.center_index(), 2);
    }

    #[test]
    fn multi_axis_layout() {
        let g = SpatialGrid {
            center: vec![1.0, -1.0],
            spacing: 0.5,
            half_count: 1,
        };
        assert_eq!(g.len(), 9);
        assert_eq!(g.center_index(), 4);
        assert_eq!(g.node_vec(4), vec![1.0, -1.0]);
        assert_eq!(g.node_vec(5), vec![1.0, -0.5]);
        assert_eq!(g.node_vec(1), vec![0.5, -1.0]);
        assert_eq!(g.project(&[0.6, -0.4]), 2);
    }

    #[test]
    fn nodes_per_axis_follow_schedule() {
        let s = NodeSchedule::Linear { per_step: 1 };
        assert_eq!(2 * s.half_count(4) + 1, 9);
    }

    #[test]
    fn first_grid_is_single_node() {
        use crate::timegrid::{build_grid, GridKind, GridParams};
        let problem = crate::model::presets::damped_cubic_problem(1.0, 4.0).unwrap();
        let tg = build_grid(&GridKind::Uniform, &GridParams::from_problem(&problem), 4).unwrap();
        let grids = build_spatial_grids(&problem.forward, &tg, &GridPolicy::standard()).unwrap();
        assert_eq!(grids[0].len(), 1);
        assert_eq!(grids[4].len(), 9);
        assert_eq!(grids[4].coordinate(0, 8), 5.0);
        let bad = GridPolicy {
            schedule: NodeSchedule::Constant { m: 0 },
            ..GridPolicy::standard()
        };
        assert!(matches!(
            build_spatial_grids(&problem.forward, &tg, &bad),
            Err(Error::DegenerateGrid { index: 1, .. })
        ));
    }
}
