"""The black-box surrogate: design vector in, coefficient out.

Composition of the pipeline stages: decode the design, loft the wing,
compute its level-set tensor on the model's grid, run the network in
inference mode.
"""

from __future__ import annotations

import numpy as np

from ..geometry import decode_design, loft_wing
from ..levelset import GridSpec, distance_field
from .model import CnnModel, forward


def design_field(u, input_dims, input_bounds) -> np.ndarray:
    """Level-set tensor of a design on the given grid."""
    sections, incidence = decode_design(u)
    wing = loft_wing(sections, incidence)
    spec = GridSpec(dims=tuple(input_dims), bounds=tuple(input_bounds))
    return distance_field(wing, spec).phi


def predict(model: CnnModel, u) -> float:
    """Surrogate coefficient estimate for one design vector."""
    phi = design_field(u, model.input_dims, model.input_bounds)
    pred, _ = forward(model, phi[None], training=False)
    return float(pred[0])


def predict_batch(model: CnnModel, fields: np.ndarray, chunk: int = 256) -> np.ndarray:
    """Inference over precomputed level-set tensors, shape (N, m, n, p)."""
    out = []
    for i in range(0, len(fields), chunk):
        pred, _ = forward(model, fields[i: i + chunk], training=False)
        out.append(pred)
    return np.concatenate(out).astype(float)
