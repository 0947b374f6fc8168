from .losses import (
    LossWeights,
    temporal_weights,
    tw_mpjpe_loss,
    tw_mpjpe,
    mpjpe,
    zero_velocity_baseline,
    constant_velocity_baseline,
    horizon_frame,
    available_horizons,
    REPORT_HORIZONS_MS,
)
