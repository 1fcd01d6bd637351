"""Checkpoint files: a ``key=value`` text header then raw parameters.

After the ``end_header`` line come all live parameter arrays followed by all
EMA shadow arrays, in declaration order (``W0, b0, W1, b1, ...``), as
little-endian float64.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import noisenet
from .dataset import StandardScaler
from .diffusion import Checkpoint, TrainConfig
from .errors import CheckpointError, ConfigError

MAGIC = "chfdiff-checkpoint"
FORMAT_VERSION = 1
END = "end_header"


def _floats(values) -> str:
    return ",".join(repr(float(v)) for v in values)


def header_dict(ckpt: Checkpoint) -> dict[str, str]:
    cfg = ckpt.config
    m = ckpt.model
    return {
        "format_version": str(FORMAT_VERSION),
        "mode": cfg.mode,
        "feature_mode": cfg.feature_mode,
        "data_columns": ",".join(cfg.data_columns),
        "cond_columns": ",".join(cfg.cond_columns),
        "data_dim": str(m.data_dim),
        "cond_dim": str(m.cond_dim),
        "embed_width": str(m.embedding.width),
        "embed_base": repr(float(m.embedding.base)),
        "hidden": ",".join(str(h) for h in m.hidden),
        "activation": m.activation,
        "schedule": cfg.schedule,
        "T": str(ckpt.schedule.T),
        "beta_min": repr(float(cfg.beta_min)),
        "beta_max": repr(float(cfg.beta_max)),
        "slope": repr(float(cfg.slope)),
        "scaler_columns": ",".join(ckpt.scaler.columns),
        "scaler_mean": _floats(ckpt.scaler.mean),
        "scaler_std": _floats(ckpt.scaler.std),
        "ema_mu": repr(float(ckpt.ema.mu)),
        "epochs": str(cfg.epochs),
        "batch_size": str(cfg.batch_size),
        "lr": repr(float(cfg.lr)),
        "seed": str(cfg.seed),
        "manifest": ckpt.manifest or "-",
        "n_values": str(2 * m.n_params()),
    }


def save(ckpt: Checkpoint, path) -> None:
    if ckpt.ema.params is None:
        raise CheckpointError("cannot save a checkpoint with an uninitialized EMA shadow")
    lines = [MAGIC] + [f"{k}={v}" for k, v in header_dict(ckpt).items()] + [END]
    blob = b"".join(np.ascontiguousarray(p, dtype="<f8").tobytes()
                    for p in (*ckpt.model.params(), *ckpt.ema.params))
    with open(path, "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode("utf-8"))
        fh.write(blob)


def read_header(path) -> tuple[dict[str, str], bytes]:
    raw = Path(path).read_bytes()
    marker = f"\n{END}\n".encode()
    cut = raw.find(marker)
    if not raw.startswith(MAGIC.encode()) or cut < 0:
        raise CheckpointError(f"{path}: not a checkpoint file")
    text = raw[:cut].decode("utf-8").splitlines()[1:]
    header = {}
    for line in text:
        key, sep, value = line.partition("=")
        if not sep:
            raise CheckpointError(f"{path}: malformed header line {line!r}")
        header[key] = value
    return header, raw[cut + len(marker):]


def load(path, expected: dict | None = None) -> Checkpoint:
    """Read and validate a checkpoint.

    ``expected`` maps header keys to required values (compared as strings
    after normalisation), e.g. ``{"T": 200, "mode": "cdm"}``.
    """
    header, blob = read_header(path)
    try:
        if int(header["format_version"]) != FORMAT_VERSION:
            raise CheckpointError(f"{path}: unsupported format version {header['format_version']}")
        if header["activation"] != noisenet.ACTIVATION:
            raise CheckpointError(f"{path}: unsupported activation {header['activation']!r}")
        for key, want in (expected or {}).items():
            have = header.get(key)
            same = have == str(want)
            if not same and isinstance(want, (int, float)) and not isinstance(want, bool):
                try:
                    same = float(have) == float(want)
                except (TypeError, ValueError):
                    same = False
            if not same:
                raise CheckpointError(f"{path}: header {key}={have!r} but config expects {want!r}")

        hidden = tuple(int(h) for h in header["hidden"].split(","))
        cfg = TrainConfig(
            mode=header["mode"], feature_mode=header["feature_mode"],
            epochs=int(header["epochs"]), batch_size=int(header["batch_size"]),
            lr=float(header["lr"]), T=int(header["T"]), beta_min=float(header["beta_min"]),
            beta_max=float(header["beta_max"]), slope=float(header["slope"]),
            schedule=header["schedule"], ema_mu=float(header["ema_mu"]),
            seed=int(header["seed"]), hidden=hidden, embed_width=int(header["embed_width"]),
            embed_base=float(header["embed_base"]))
        if ",".join(cfg.data_columns) != header["data_columns"] or \
                ",".join(cfg.cond_columns) != header["cond_columns"]:
            raise CheckpointError(f"{path}: column header inconsistent with mode/feature_mode")
        model = noisenet.init(0, int(header["data_dim"]), int(header["cond_dim"]), hidden,
                              cfg.embed_width, cfg.embed_base)
        columns = tuple(header["scaler_columns"].split(","))
        scaler = StandardScaler(columns,
                                np.array([float(v) for v in header["scaler_mean"].split(",")]),
                                np.array([float(v) for v in header["scaler_std"].split(",")]))
        n_values = int(header["n_values"])
    except KeyError as exc:
        raise CheckpointError(f"{path}: header lacks {exc.args[0]!r}") from None
    except ConfigError as exc:
        raise CheckpointError(f"{path}: {exc}") from None

    if n_values != 2 * model.n_params() or len(blob) != 8 * n_values:
        raise CheckpointError(f"{path}: parameter block has {len(blob) // 8} values, "
                              f"architecture needs {2 * model.n_params()}")
    values = np.frombuffer(blob, dtype="<f8").astype(np.float64)
    arrays, pos = [], 0
    for p in (*model.params(), *model.params()):
        arrays.append(values[pos:pos + p.size].reshape(p.shape).copy())
        pos += p.size
    half = len(arrays) // 2
    model = model.with_params(arrays[:half])
    ema = noisenet.EmaShadow(cfg.ema_mu, tuple(arrays[half:]))
    manifest = "" if header["manifest"] == "-" else header["manifest"]
    return Checkpoint(cfg, cfg.make_schedule(), model, ema, scaler, manifest)
