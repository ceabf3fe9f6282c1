from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class EnvStep:
    """What every environment returns from ``reset`` and ``step``.

    ``global_state`` is the concatenation of the per-agent observations.
    """

    observations: np.ndarray
    global_state: np.ndarray
    reward: float
    done: bool
    info: dict = field(default_factory=dict)
