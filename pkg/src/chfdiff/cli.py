"""Command-line entry point: ``chfdiff <command> [--config FILE] [--seed N] [--out DIR]``.

Commands: prepare, train, generate, uq, evaluate, physics-check, steam.
Every data file written starts with a ``# manifest <hash>`` line; the hash
covers the resolved config and the checksums of all inputs.  The companion
``manifest.txt`` echoes the resolved config and is the only file carrying a
timestamp.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, checkpoint, config, dataset as ds, diffusion, metrics, physics, steam
from .errors import ChfDiffError, ConfigError, InputError, SchemaError

log = logging.getLogger("chfdiff")


def _num(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    return "" if math.isnan(v) else repr(v)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


class Run:
    """Output directory, manifest hash and file writers for one command."""

    def __init__(self, cfg: config.RunConfig, out, inputs: dict[str, str]):
        self.cfg = cfg
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.inputs = {}
        for key, path in inputs.items():
            if not path:
                continue
            if not Path(path).is_file():
                raise InputError(f"{key}: input file not found: {path}")
            self.inputs[key] = _sha256(path)
        self.digest = cfg.digest([f"input.{k}={v}" for k, v in sorted(self.inputs.items())],
                                 exclude=set(inputs))
        self.written: list[str] = []

    @property
    def header(self) -> list[str]:
        return [f"manifest {self.digest}"]

    def path(self, name) -> Path:
        self.written.append(name)
        return self.out / name

    def table(self, name, columns, rows):
        with open(self.path(name), "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# manifest {self.digest}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([c if isinstance(c, str) else _num(c) for c in row])

    def text(self, name, lines):
        with open(self.path(name), "w", encoding="utf-8") as fh:
            fh.write(f"# manifest {self.digest}\n")
            for line in lines:
                fh.write(f"{line}\n")

    def manifest(self):
        stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
        lines = [f"command={self.cfg.command}", f"manifest={self.digest}",
                 f"version={__version__}", f"created={stamp}", *self.cfg.lines()]
        lines += [f"input.{k}.sha256={v}" for k, v in sorted(self.inputs.items())]
        lines += [f"output={name}" for name in self.written]
        (self.out / "manifest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# shared loading


def _records(cfg: config.RunConfig) -> ds.LoadResult:
    if not cfg["data"]:
        raise ConfigError("missing required key 'data'")
    return ds.load_csv(cfg["data"], cfg.schema)


def _split(cfg: config.RunConfig, n: int) -> ds.DataSplit:
    if cfg["split"]:
        sp = ds.DataSplit.from_csv(cfg["split"])
        if sum(sp.sizes()) != n:
            raise SchemaError(f"split manifest covers {sum(sp.sizes())} rows, dataset has {n}")
        return sp
    # same partition `prepare` writes for seed=split_seed
    return ds.split(range(n), cfg.fractions(), cfg["split_seed"])


def _subset_indices(cfg, n) -> list[int]:
    label = cfg["subset"]
    if label == "all":
        return list(range(n))
    return list(_split(cfg, n).indices(label))


def _load_checkpoint(cfg):
    if not cfg["checkpoint"]:
        raise ConfigError("missing required key 'checkpoint'")
    if not Path(cfg["checkpoint"]).is_file():
        raise InputError(f"checkpoint not found: {cfg['checkpoint']}")
    expected = {} if cfg["T"] == config.FROM_MODEL else {"T": cfg["T"]}
    return checkpoint.load(cfg["checkpoint"], expected)


def _headers(cfg, columns):
    return [cfg.schema.header_for(c) for c in columns]


def _to_file_units(cfg, matrix, columns):
    return np.asarray(matrix) / np.array([cfg.schema.multiplier(c) for c in columns])


def read_samples(path, cfg: config.RunConfig, columns) -> tuple[np.ndarray | None, np.ndarray]:
    """Read a samples CSV; returns ``(row_index or None, matrix in canonical units)``."""
    if not Path(path).is_file():
        raise InputError(f"samples file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: empty samples file")
        rows = list(reader)
    wanted = _headers(cfg, columns)
    missing = [w for w in wanted if w not in header]
    if missing:
        raise SchemaError(f"{path}: missing column(s) {missing}")
    idx = [header.index(w) for w in wanted]
    data = np.array([[float(r[i]) for i in idx] for r in rows]).reshape(len(rows), len(idx))
    data = data * np.array([cfg.schema.multiplier(c) for c in columns])
    row_index = None
    if "row_index" in header:
        k = header.index("row_index")
        row_index = np.array([int(r[k]) for r in rows], dtype=np.int64)
    return row_index, data


# ---------------------------------------------------------------------------
# commands


def cmd_prepare(cfg, out):
    run = Run(cfg, out, {"data": cfg["data"]})
    res = _records(cfg)
    sp = ds.split(res.records, cfg.fractions(), cfg["seed"])
    sp.to_csv(run.path("split.csv"), run.header)
    columns = (*ds.condition_columns(cfg["feature_mode"]), "chf")
    scaler = ds.fit_scaler(ds.subset(res.records, sp.train), columns)
    run.table("scaler.csv", ["column", "mean", "std"],
              [(c, m, s) for c, m, s in zip(scaler.columns, scaler.mean, scaler.std)])
    n_train, n_val, n_test = sp.sizes()
    lines = [f"rows={res.n_rows}", f"accepted={len(res.records)}",
             f"rejected={len(res.rejections)}", f"train={n_train}", f"val={n_val}",
             f"test={n_test}", "rounding=val/test round(f*n) (min 1), train takes the remainder"]
    lines += [f"rejection line={r.line}: {r.reason}" for r in res.rejections]
    run.text("prepare_summary.txt", lines)
    run.manifest()
    return run


def cmd_train(cfg, out):
    run = Run(cfg, out, {"data": cfg["data"], "split": cfg["split"]})
    res = _records(cfg)
    sp = _split(cfg, len(res.records))
    tc = cfg.train_config()
    ckpt, losses = diffusion.train(
        ds.subset(res.records, sp.train), tc,
        progress=lambda e, l: log.info("epoch %d/%d loss %.6f", e, tc.epochs, l))
    ckpt.manifest = run.digest
    checkpoint.save(ckpt, run.path("checkpoint.ckpt"))
    run.table("loss.csv", ["epoch", "mean_loss"], [(i + 1, l) for i, l in enumerate(losses)])
    from .schedule import to_csv as schedule_csv
    schedule_csv(ckpt.schedule, run.path("schedule.csv"), run.header)
    run.manifest()
    return run


def _cdm_conditions(cfg, ckpt):
    res = _records(cfg)
    rows = _subset_indices(cfg, len(res.records))
    recs = ds.subset(res.records, rows)
    cond = ds.records_to_matrix(recs, ckpt.cond_columns)
    return res, rows, recs, cond


def cmd_generate(cfg, out):
    run = Run(cfg, out, {"checkpoint": cfg["checkpoint"], "data": cfg["data"],
                         "split": cfg["split"]})
    ckpt = _load_checkpoint(cfg)
    seed, stride = cfg["seed"], cfg["trajectory_stride"]
    if ckpt.mode == "dm":
        n = cfg["n"]
        samples = diffusion.sample_dm(ckpt, n, seed, use_ema=cfg["use_ema"])
        values = _to_file_units(cfg, samples, ckpt.data_columns)
        run.table("samples.csv", _headers(cfg, ckpt.data_columns) + ["seed"],
                  [(*row, seed + i) for i, row in enumerate(values)])
        traj_args = dict(n=n)
    else:
        _, rows, _, cond = _cdm_conditions(cfg, ckpt)
        chf = diffusion.sample_cdm(ckpt, cond, seed, use_ema=cfg["use_ema"])
        cols = (*ckpt.cond_columns, "chf")
        values = _to_file_units(cfg, np.column_stack([cond, chf]).reshape(len(rows), len(cols)),
                                cols)
        run.table("samples.csv", ["row_index", *_headers(cfg, cols), "seed"],
                  [(r, *v, seed + i) for i, (r, v) in enumerate(zip(rows, values))])
        traj_args = dict(conditions=cond)
    if stride > 0:
        traj = diffusion.trajectory(ckpt, stride=stride, seed=seed, use_ema=cfg["use_ema"],
                                    **traj_args)
        cols = ckpt.data_columns
        table = []
        for t, values in traj.snapshots:
            values = _to_file_units(cfg, np.asarray(values).reshape(len(values), -1), cols)
            table += [(t, i, *v) for i, v in enumerate(values)]
        run.table("trajectory.csv", ["t", "row", *_headers(cfg, cols)], table)
    run.manifest()
    return run


def cmd_uq(cfg, out):
    run = Run(cfg, out, {"checkpoint": cfg["checkpoint"], "data": cfg["data"],
                         "split": cfg["split"]})
    ckpt = _load_checkpoint(cfg)
    if ckpt.mode != "cdm":
        raise ConfigError("uq requires a conditional (cdm) checkpoint")
    _, rows, recs, cond = _cdm_conditions(cfg, ckpt)
    n = cfg["n_draws"]
    ens = diffusion.uq_ensemble(ckpt, cond, n, cfg["seed"], use_ema=cfg["use_ema"],
                                workers=cfg["workers"], retain_draws=True)
    truth = np.array([r.chf for r in recs])
    cols = ckpt.cond_columns
    file_cond = _to_file_units(cfg, cond, cols).reshape(len(rows), len(cols))
    chf_m = cfg.schema.multiplier("chf")
    run.table("ensemble.csv",
              ["row_index", *_headers(cfg, cols), "chf_true", "mu_samples", "sigma_samples",
               "relative_std_pct", "n"],
              [(r, *c, t / chf_m, e.mu_samples / chf_m, e.sigma_samples / chf_m,
                e.relative_std, e.n) for r, c, t, e in zip(rows, file_cond, truth, ens)])
    if cfg["retain_draws"]:
        run.table("draws.csv", ["row_index", "draw", "seed", cfg.schema.header_for("chf")],
                  [(r, k, cfg["seed"] + i * n + k, d / chf_m)
                   for i, (r, e) in enumerate(zip(rows, ens)) for k, d in enumerate(e.draws)])
    report = metrics.MetricsReport(uq=metrics.uq_summary([e.relative_std for e in ens]))
    if len(ens):
        mu = np.array([e.mu_samples for e in ens])
        report.errors = metrics.error_stats(truth, mu)
        report.r_squared = metrics.r_squared(truth, mu)
    run.text("uq_report.txt", [f"{k}={_num(v)}" for k, v in report.items()])
    run.manifest()
    return run


def _curve_rows(x, y):
    return list(zip(x, y))


def cmd_evaluate(cfg, out):
    run = Run(cfg, out, {"data": cfg["data"], "samples": cfg["samples"], "split": cfg["split"]})
    if not cfg["samples"]:
        raise ConfigError("missing required key 'samples'")
    res = _records(cfg)
    kind = cfg["kind"]
    if kind == "dm":
        with open(cfg["samples"], encoding="utf-8") as fh:
            header = next(csv.reader(l for l in fh if not l.startswith("#")))
        by_header = {cfg.schema.header_for(c): c for c in ds.COLUMNS}
        columns = [by_header[h] for h in header if h in by_header]
        _, synth = read_samples(cfg["samples"], cfg, columns)
        real = ds.records_to_matrix(ds.subset(res.records, _subset_indices(cfg, len(res.records))),
                                    columns)
        report = metrics.MetricsReport(
            pcc_real=metrics.pcc_matrix(real), pcc_synth=metrics.pcc_matrix(synth),
            srcc_real=metrics.srcc_matrix(real), srcc_synth=metrics.srcc_matrix(synth),
            ks_distance=metrics.joint_ecdf_ks(real, synth))
        names = _headers(cfg, columns)
        for label in ("pcc_real", "pcc_synth", "srcc_real", "srcc_synth"):
            m = getattr(report, label)
            run.table(f"{label}.csv", ["column", *names], [(n, *row) for n, row in zip(names, m)])
        for j, c in enumerate(columns):
            for tag, data in (("real", real), ("synth", synth)):
                run.table(f"ecdf_{c}_{tag}.csv", ["value", "ecdf"],
                          _curve_rows(*metrics.marginal_ecdf(data[:, j])))
                if data.shape[0] >= 2 and np.ptp(data[:, j]) > 0:
                    run.table(f"kde_{c}_{tag}.csv", ["value", "density"],
                              _curve_rows(*metrics.kde_1d(data[:, j])))
    elif kind == "cdm":
        row_index, gen = read_samples(cfg["samples"], cfg, ["chf"])
        if row_index is None:
            raise SchemaError("cdm samples need a row_index column")
        truth = np.array([res.records[i].chf for i in row_index])
        gen = gen[:, 0]
        report = metrics.MetricsReport(errors=metrics.error_stats(truth, gen, cfg["thresholds"]),
                                       r_squared=metrics.r_squared(truth, gen))
        rel, _ = metrics.relative_errors(truth, gen)
        m = cfg.schema.multiplier("chf")
        run.table("errors.csv", ["row_index", "chf_true", "chf_generated", "rel_error_pct"],
                  zip(row_index, truth / m, gen / m, rel))
    else:
        raise ConfigError(f"unknown evaluation kind {kind!r}; expected dm or cdm")
    run.text("report.txt", [f"{k}={_num(v)}" for k, v in report.items()])
    run.manifest()
    return run


def cmd_physics_check(cfg, out):
    run = Run(cfg, out, {"data": cfg["data"], "samples": cfg["samples"]})
    if not cfg["samples"]:
        raise ConfigError("missing required key 'samples'")
    res = _records(cfg)
    row_index, gen = read_samples(cfg["samples"], cfg, ["chf"])
    if row_index is None:
        raise SchemaError("physics-check samples need a row_index column")
    recs = ds.subset(res.records, row_index)
    cols = ("P", "G", "D", "L", "h_sub", "x_out", "chf")
    m = ds.records_to_matrix(recs, cols)
    triples, keep, excluded = physics.quality_triples(*m.T, gen[:, 0])
    report = physics.consistency_report(triples) if triples else {}
    names = list(report)
    lines = [f"records={len(recs)}", f"excluded_outside_steam_domain={excluded}",
             "statistic," + ",".join(names)]
    for key in physics.SUMMARY_KEYS:
        lines.append(",".join([key] + [_num(report[n][key]) for n in names]))
    run.text("physics_report.txt", lines)
    run.table("triples.csv", ["row_index", "x_measured", "x_calculated", "x_generated"],
              [(int(row_index[k]), t.x_measured, t.x_calculated, t.x_generated)
               for k, t in zip(keep, triples)])
    run.manifest()
    return run


STEAM_PROPS = {
    "tsat": (steam.tsat, "K"),
    "psat": (steam.psat, "MPa"),
    "hf": (steam.h_sat_liquid, "kJ/kg"),
    "hg": (steam.h_sat_vapor, "kJ/kg"),
    "hfg": (steam.h_fg, "kJ/kg"),
}


def cmd_steam(args) -> None:
    done = False
    for name, (fn, unit) in STEAM_PROPS.items():
        value = getattr(args, name)
        if value is not None:
            print(f"{fn(value):.9g} {unit}")
            done = True
    if args.batch:
        path = Path(args.batch)
        if not path.is_file():
            raise InputError(f"pressure file not found: {path}")
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(l for l in fh if not l.startswith("#"))
            header = next(reader)
            if "P" not in header:
                raise SchemaError(f"{path}: expected a 'P' column (MPa)")
            k = header.index("P")
            pressures = [float(r[k]) for r in reader]
        rows = []
        for p in pressures:
            sat = steam.saturation_point(p)
            rows.append((p, sat.T_sat, sat.h_f, sat.h_g, sat.h_fg))
        target = open(args.out_file, "w", newline="", encoding="utf-8") if args.out_file else sys.stdout
        try:
            writer = csv.writer(target, lineterminator="\n")
            writer.writerow(["P_MPa", "T_sat_K", "h_f_kJkg", "h_g_kJkg", "h_fg_kJkg"])
            for row in rows:
                writer.writerow([_num(v) for v in row])
        finally:
            if target is not sys.stdout:
                target.close()
        done = True
    if not done:
        raise ConfigError("steam needs at least one of --tsat/--psat/--hf/--hg/--hfg/--batch")


COMMANDS = {"prepare": cmd_prepare, "train": cmd_train, "generate": cmd_generate, "uq": cmd_uq,
            "evaluate": cmd_evaluate, "physics-check": cmd_physics_check}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="chfdiff", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    sp = sub.add_parser("steam", help="IF97 saturation properties")
    sp.add_argument("--tsat", type=float, metavar="P_MPA")
    sp.add_argument("--psat", type=float, metavar="T_K")
    sp.add_argument("--hf", type=float, metavar="P_MPA")
    sp.add_argument("--hg", type=float, metavar="P_MPA")
    sp.add_argument("--hfg", type=float, metavar="P_MPA")
    sp.add_argument("--batch", metavar="CSV", help="CSV with a 'P' column in MPa")
    sp.add_argument("--out", dest="out_file", metavar="CSV", help="write batch results here")
    return parser


def run_command(command: str, config_path=None, overrides=None, out="out", seed=None):
    overrides = dict(overrides or {})
    if seed is not None:
        overrides["seed"] = str(seed)
    cfg = config.load(command, config_path, overrides)
    return COMMANDS[command](cfg, out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "steam":
            cmd_steam(args)
            return 0
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(message)s")
        overrides = {}
        for item in args.set:
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            overrides[key.strip()] = value.strip()
        run_command(args.command, args.config, overrides, args.out, args.seed)
    except ChfDiffError as exc:
        msg = str(exc).replace("\n", " ")
        print(f"error {exc.code}: {msg}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
