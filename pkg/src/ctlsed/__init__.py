"""CTL and CTC losses for sound event detection with sequential labels."""

from .ctc import ctc_forward, ctc_loss_and_grad
from .ctl import CtlConfig, LossResult, ctl_forward, ctl_loss_and_grad, emission_terms, rectified_delta
from .kernels import backend_name

__version__ = "0.1.0"
