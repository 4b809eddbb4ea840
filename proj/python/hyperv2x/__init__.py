"""Hyper-V2X: Bayesian-hypernetwork uncertainty for cooperative BEV segmentation."""

from hyperv2x._core import (  # noqa: F401
    BEVScene,
    ScenarioConfig,
    __version__,
    aleatoric,
    brier,
    context_embed,
    ece,
    epistemic,
    generate_scene,
    iou,
    mean_prediction,
    nll,
    noise_condition,
    predict_scene,
    rasterize_gt,
    render_observation,
)
