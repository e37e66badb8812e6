//! Regular, near-singular and singular integration over boundary triangles
//! and shell cells.

mod layer;
mod rules;
mod volume;

pub use layer::{integrate_layer, panel_nodes, LayerNode, LayerRules, LayerScheme, PanelPlan};
pub use rules::{duffy_triangle, gauss_legendre, gauss_triangle, QuadratureRule};
pub use volume::{integrate_volume, VolumeIntegrator, VolumeNode, VolumeScheme};

use serde::{Deserialize, Serialize};

/// Orders and thresholds of every rule, overridable from the run config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureSettings {
    /// Surface panels with `distance / diameter` at least this use the far rule.
    pub far_ratio: f64,
    pub far_order: usize,
    /// Rule on the leaves of the near-field subdivision.
    pub near_order: usize,
    pub duffy_order: usize,
    /// Deepest near-field subdivision of a surface panel.
    pub max_depth: usize,
    /// Cells with `distance to center / diameter` at least this use their
    /// stored nodes.
    pub volume_far_ratio: f64,
    /// Below this ratio the cell is integrated by the cone (pyramid) rule.
    pub volume_near_ratio: f64,
    pub volume_radial_order: usize,
    pub volume_face_depth: usize,
    pub volume_face_eta: f64,
    /// Radial and angular refinement of the intermediate-range product rule.
    pub mid_radial_split: usize,
    pub mid_angular_levels: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            far_ratio: 3.0,
            far_order: 3,
            near_order: 4,
            duffy_order: 8,
            max_depth: 8,
            volume_far_ratio: 2.5,
            volume_near_ratio: 1.0,
            volume_radial_order: 4,
            volume_face_depth: 6,
            volume_face_eta: 2.0,
            mid_radial_split: 2,
            mid_angular_levels: 1,
        }
    }
}
