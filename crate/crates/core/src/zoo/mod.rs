//! Base graphs of the three example families, finite windows of their
//! infinite limit models, and the cylinder view `G × Z`.

mod boxes;
mod cylinder;
mod limit;
mod sierpinski;
mod tree;

pub use boxes::{box_fold_map, box_ratio_closed_form, make_box, make_box_limit_window, BoxLimit};
pub use cylinder::{CylVertex, CylinderView};
pub use limit::{LimitModel, LocalWindow};
pub use sierpinski::{
    make_sierpinski, sierpinski_midpoint_map, sierpinski_project, sierpinski_ratio_closed_form,
    sierpinski_s, sierpinski_size, projection_kernel_defect, SierpinskiFull, SierpinskiGraph,
    SierpinskiHalf,
};
pub use tree::{
    make_tree, tree_boundary_embed, tree_ratio_closed_form, tree_regular_embed, tree_size,
    BoundaryTree, BoundaryTreeWindow, RegularTree, TreeGraph,
};

/// Weight carried by every edge of the example families.
pub const HALF: f64 = 0.5;
