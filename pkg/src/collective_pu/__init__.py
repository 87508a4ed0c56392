"""Positive-unlabeled learning with a collective batch loss, plus uPU/nnPU baselines."""

from .data import LabeledDataset, PUSplit, gen_two_gaussians, load_dataset, make_pu_split, perturb_mu_p
from .losses import (
    BatchView,
    LossResult,
    cpu_collective_loss,
    naive_negative_loss,
    nnpu_risk,
    pn_log_loss,
    upu_risk,
    zero_one_loss,
)
from .model import EPS_CLAMP, PredictorParams, backward, forward, init_params
from .train import RunConfig, RunReport, make_batches, nadam_step, train_model

__version__ = "0.1.0"
