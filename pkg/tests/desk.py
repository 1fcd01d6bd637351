"""Desk-scale training recipes shared by the unit and acceptance suites.

The recipes keep the model family and the sigmoid schedule but shrink epochs
and widths so a full run takes seconds on one core.  The unconditional run
uses T=200 (the conditional recipe's schedule); see the notes in the README.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from chfdiff import dataset as ds, diffusion, synthetic

N_RECORDS = 2000
SPLIT_SEED = 3


@dataclass(frozen=True)
class DeskRun:
    ckpt: diffusion.Checkpoint
    losses: np.ndarray
    records: tuple
    split: ds.DataSplit

    @property
    def train(self):
        return ds.subset(self.records, self.split.train)

    @property
    def test(self):
        return ds.subset(self.records, self.split.test)


def dm_config(**kw):
    base = dict(epochs=200, batch_size=64, lr=1e-3, T=200, hidden=(128,) * 4, seed=6)
    base.update(kw)
    return diffusion.TrainConfig.published("dm", **base)


def cdm_config(feature_mode, **kw):
    base = dict(feature_mode=feature_mode, epochs=100 if feature_mode == "x" else 200,
                batch_size=64, lr=1e-3, hidden=(64,) * 6, seed=5)
    base.update(kw)
    return diffusion.TrainConfig.published("cdm", **base)


@lru_cache(maxsize=None)
def dm_run() -> DeskRun:
    records = tuple(synthetic.mixture_records(N_RECORDS, 1))
    everything = ds.DataSplit(tuple(range(N_RECORDS)), (), (), -1)
    ckpt, losses = diffusion.train(records, dm_config())
    return DeskRun(ckpt, losses, records, everything)


@lru_cache(maxsize=None)
def cdm_run(feature_mode: str) -> DeskRun:
    records = tuple(synthetic.chf_records(N_RECORDS, 1, feature_mode))
    split = ds.split(records, seed=SPLIT_SEED)
    ckpt, losses = diffusion.train(ds.subset(records, split.train), cdm_config(feature_mode))
    return DeskRun(ckpt, losses, records, split)
