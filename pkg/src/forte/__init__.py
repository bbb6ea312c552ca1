"""FORTE: tactile slip detection, grip-force estimation, and grasp control.

Library layout:
    config      pipeline/controller parameters and key=value config files
    signal      normalization, median filtering, channel ring buffers
    slip        periodogram features, gated variances, the slip indicator
    force       24-dim feature SVR grip-force estimation
    sim         stick-slip grasp simulator and scripted scenarios
    controller  slip-reactive grasp state machine and baseline policies
    session     closed-loop sessions wiring simulator + pipeline + controller
    replay      offline/realtime trace replay and scoring
    metrics     confusion statistics and event latency accounting
    sweep       detection-parameter grid sweeps
    bench       throughput/latency benchmarks
"""

from .config import ControllerConfig, PipelineConfig
from .force import ForceModel, cross_validate, train_svr
from .replay import replay_trace
from .signal import SignalPipeline
from .slip import SlipDetector, batch_slip_timeline
from .trace import Trace, read_trace, write_trace

__version__ = "1.0.0"

__all__ = [
    "ControllerConfig", "PipelineConfig", "ForceModel", "cross_validate",
    "train_svr", "replay_trace", "SignalPipeline", "SlipDetector",
    "batch_slip_timeline", "Trace", "read_trace", "write_trace", "__version__",
]
