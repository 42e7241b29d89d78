//! Slider routing and local-plot assembly.

mod contour;
mod plot;
mod routing;

pub use contour::{
    cell_segments, contour_field, marching_squares, weighted_density, BoundingBox, CellSegment, Grid, IsoLines,
    GRID_SIZE, RELATIVE_LEVELS,
};
pub use plot::{
    build_local_plot, build_local_plot_as, local_points, Contour, LocalPlot, PlotQuality, TestPoint, TrainPoint,
    PLOT_PADDING,
};
pub use routing::{display_label, route, select_classes, Thresholds, UseCase, OTHER_LABEL};
