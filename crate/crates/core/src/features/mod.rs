//! Frame-level feature schema, segment-level statistics and windowing.

mod frame;
mod segment;

pub use frame::{
    impute, select_features, FeatureMode, FrameFeatures, FrameSeries, AFFECT_FRAME_COLUMNS,
    FRAME_FEATURE_NAMES,
};
pub use segment::{
    acceleration, blink_rate, mean_std, segment_feature_names, segment_features, segment_matrix,
    segment_names_for, velocity, window, window_count, window_geometry, SegmentFeatures,
    DEFAULT_BLINK_THRESHOLD, SEGMENT_LEN,
};
