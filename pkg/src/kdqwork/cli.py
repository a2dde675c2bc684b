"""Command-line interface: parameter sweeps, tabulations and oracle checks.

Subcommands
-----------
sweep         evaluate observables over an (h0, h1) grid (CSV/JSON/PNG)
gfunc         tabulate the characteristic function G(u) on a u-grid
moments       work cumulant densities at one parameter point
witness       non-classicality report at one parameter point
coherence     coherence entropy and eigenbasis overlap at one point
oracle-check  dense Fock-space cross-validation of G(u)

Each command takes ``--config <json>`` (sweep also accepts
``--recipe <name>`` for a packaged figure recipe), writes files under
``--out`` and exits 0 on success.  Failures print a JSON error object to
stderr and exit nonzero.  ``--threads`` (or the KDQ_THREADS environment
variable) bounds the sweep worker pool.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import __version__
from .dynamics import RampIntegratorConfig, propagators_for_grid
from .errors import ConfigError, KdqworkError
from .kdq import KDQ, char_function, work_moments
from .model import (
    LinearRamp,
    ModelSpec,
    MomentumGrid,
    SuddenQuench,
    grid_from_dict,
    mean_overlap_qbar,
    protocol_from_dict,
    spec_from_dict,
)
from .observables import (
    coherence_entropy_density,
    dephased_mean_work_density,
    extraction_enhancement,
    mean_work_density,
)
from .oracle import build_dense, dense_char_function
from .witness import scan_nonclassicality

OBSERVABLE_NAMES = (
    "mean_w", "mean_w_dephased", "enhancement", "qbar01",
    "coherence_entropy", "mu4", "witness",
)


@dataclass(frozen=True)
class SweepConfig:
    h0_range: tuple  # (min, max, count)
    h1_range: tuple
    h2: float
    beta: float
    protocol: object
    grid_cfg: dict
    outputs: tuple
    parallelism: int = 1
    output_path: str = "."
    emit_png: bool = False
    hopping: tuple = (1.0,)
    pairing: tuple = (1.0,)
    ode: dict = field(default_factory=dict)

    def __post_init__(self):
        for rng in (self.h0_range, self.h1_range):
            lo, hi, count = rng
            if count < 2:
                raise ConfigError("range counts must be >= 2")
            if not (np.isfinite(lo) and np.isfinite(hi)):
                raise ConfigError("range endpoints must be finite")
        if not self.outputs:
            raise ConfigError("outputs set must be nonempty")
        unknown = set(self.outputs) - set(OBSERVABLE_NAMES)
        if unknown:
            raise ConfigError(f"unknown observables: {sorted(unknown)}")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")

    @classmethod
    def from_dict(cls, cfg: dict):
        try:
            return cls(
                h0_range=tuple(cfg["h0_range"]),
                h1_range=tuple(cfg["h1_range"]),
                h2=float(cfg["h2"]),
                beta=float(cfg["beta"]),
                protocol=protocol_from_dict(cfg.get("protocol", {"type": "quench"})),
                grid_cfg=dict(cfg.get("grid", {"kind": "gauss", "n": 2048})),
                outputs=tuple(cfg.get("outputs", ["mean_w"])),
                parallelism=int(cfg.get("parallelism", 1)),
                output_path=str(cfg.get("output_path", ".")),
                emit_png=bool(cfg.get("emit_png", False)),
                hopping=tuple(cfg.get("hopping", [1.0])),
                pairing=tuple(cfg.get("pairing", [1.0])),
                ode=dict(cfg.get("ode", {})),
            )
        except KeyError as exc:
            raise ConfigError(f"missing sweep key: {exc}") from exc

    def to_dict(self):
        proto = ({"type": "quench"} if isinstance(self.protocol, SuddenQuench)
                 else {"type": "ramp", "delta": self.protocol.delta})
        return {
            "h0_range": list(self.h0_range), "h1_range": list(self.h1_range),
            "h2": self.h2, "beta": self.beta, "protocol": proto,
            "grid": self.grid_cfg, "outputs": list(self.outputs),
            "parallelism": self.parallelism, "output_path": self.output_path,
            "emit_png": self.emit_png, "hopping": list(self.hopping),
            "pairing": list(self.pairing), "ode": self.ode,
        }


@dataclass(frozen=True, eq=False)
class SweepResult:
    h0: np.ndarray           # (rows,)
    h1: np.ndarray
    columns: dict            # name -> (rows,) float array
    errors: list             # row-aligned strings, "" when clean
    metadata: dict

    @property
    def shape(self):
        return (self.metadata["h0_count"], self.metadata["h1_count"])


def _ode_config(cfg_dict: dict) -> RampIntegratorConfig:
    kw = {}
    if "rel_tol" in cfg_dict:
        kw["rel_tol"] = float(cfg_dict["rel_tol"])
    if "abs_tol" in cfg_dict:
        kw["abs_tol"] = float(cfg_dict["abs_tol"])
    return RampIntegratorConfig(**kw)


def _cell_observables(spec, grid, props, outputs):
    out = {}
    need_moments = "mu4" in outputs or "witness" in outputs
    if need_moments:
        report = scan_nonclassicality(spec, grid, props)
    for name in outputs:
        if name == "mean_w":
            out[name] = mean_work_density(spec, grid, props)
        elif name == "mean_w_dephased":
            out[name] = dephased_mean_work_density(spec, grid, props)
        elif name == "enhancement":
            out[name] = extraction_enhancement(spec, grid, props)
        elif name == "qbar01":
            out[name] = mean_overlap_qbar(spec, grid, spec.h0, spec.h1)
        elif name == "coherence_entropy":
            out[name] = coherence_entropy_density(spec, grid)
        elif name == "mu4":
            out[name] = report.mu4_real
        elif name == "witness":
            out[name] = report.max_imag_witness
    return out


def run_sweep(cfg: SweepConfig) -> SweepResult:
    """Evaluate the requested observables over the (h0, h1) grid.

    Rows are ordered h0-major; per-cell failures are recorded in the
    error column (values NaN) without aborting the sweep.  Propagators
    depend only on (h1, h2, protocol), so they are computed once per
    distinct h1 and shared across the h0 axis.
    """
    t_start = time.monotonic()
    grid = grid_from_dict(cfg.grid_cfg)
    h0s = np.linspace(*cfg.h0_range[:2], int(cfg.h0_range[2]))
    h1s = np.linspace(*cfg.h1_range[:2], int(cfg.h1_range[2]))
    ode = _ode_config(cfg.ode)

    def spec_at(h0, h1):
        return ModelSpec(hopping=cfg.hopping, pairing=cfg.pairing, beta=cfg.beta,
                         h0=float(h0), h1=float(h1), h2=cfg.h2, protocol=cfg.protocol)

    props_cache = {}
    for h1 in h1s:
        props_cache[float(h1)] = propagators_for_grid(spec_at(0.0, h1), grid, ode)

    cells = [(i, j) for i in range(h0s.size) for j in range(h1s.size)]

    def evaluate(cell):
        i, j = cell
        spec = spec_at(h0s[i], h1s[j])
        try:
            vals = _cell_observables(spec, grid, props_cache[float(h1s[j])], cfg.outputs)
            return vals, ""
        except KdqworkError as exc:
            return {name: float("nan") for name in cfg.outputs}, f"{type(exc).__name__}: {exc}"

    if cfg.parallelism > 1:
        with ThreadPoolExecutor(max_workers=cfg.parallelism) as pool:
            results = list(pool.map(evaluate, cells))
    else:
        results = [evaluate(c) for c in cells]

    columns = {name: np.array([vals[name] for vals, _ in results]) for name in cfg.outputs}
    errors = [err for _, err in results]
    meta = {
        "config": cfg.to_dict(),
        "version": __version__,
        "wall_time_s": time.monotonic() - t_start,
        "h0_count": h0s.size,
        "h1_count": h1s.size,
    }
    return SweepResult(
        h0=np.repeat(h0s, h1s.size),
        h1=np.tile(h1s, h0s.size),
        columns=columns,
        errors=errors,
        metadata=meta,
    )


# ---------------------------------------------------------------------------
# Emission


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def emit(result: SweepResult, fmt: str, out_dir: str) -> list:
    """Write the sweep in the requested format; returns the created paths."""
    os.makedirs(out_dir, exist_ok=True)
    names = list(result.columns)
    written = []
    if fmt == "csv":
        path = os.path.join(out_dir, "sweep.csv")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(["h0", "h1", *names, "error"]) + "\n")
            for k in range(result.h0.size):
                row = [_fmt(result.h0[k]), _fmt(result.h1[k])]
                row += [_fmt(result.columns[n][k]) for n in names]
                row.append(result.errors[k])
                fh.write(",".join(row) + "\n")
        written.append(path)
    elif fmt == "json":
        path = os.path.join(out_dir, "sweep.json")
        rows = [
            {"h0": result.h0[k], "h1": result.h1[k],
             **{n: result.columns[n][k] for n in names},
             "error": result.errors[k]}
            for k in range(result.h0.size)
        ]
        with open(path, "w", encoding="utf-8") as fh:
            json.dump({"metadata": result.metadata, "rows": rows}, fh, indent=1, default=float)
            fh.write("\n")
        written.append(path)
    elif fmt == "png":
        written.extend(_emit_png(result, out_dir))
    else:
        raise ConfigError(f"unknown output format: {fmt!r}")
    return written


# Observables whose sign carries meaning get a diverging map with
# symmetric limits; nonnegative ones a sequential map.
_SIGNED = {"mean_w", "mean_w_dephased", "enhancement", "qbar01", "mu4"}


def _emit_png(result: SweepResult, out_dir: str) -> list:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    n0, n1 = result.shape
    cfg = result.metadata["config"]
    extent = [cfg["h1_range"][0], cfg["h1_range"][1],
              cfg["h0_range"][0], cfg["h0_range"][1]]
    written = []
    for name, col in result.columns.items():
        img = col.reshape(n0, n1)
        fig, ax = plt.subplots(figsize=(5.0, 4.2))
        if name in _SIGNED:
            lim = float(np.nanmax(np.abs(img))) or 1.0
            im = ax.imshow(img, origin="lower", extent=extent, aspect="auto",
                           cmap="RdBu_r", vmin=-lim, vmax=lim)
        else:
            im = ax.imshow(img, origin="lower", extent=extent, aspect="auto",
                           cmap="viridis")
        ax.set_xlabel("$h_1$")
        ax.set_ylabel("$h_0$")
        ax.set_title(name)
        fig.colorbar(im, ax=ax)
        path = os.path.join(out_dir, f"{name}.png")
        fig.savefig(path, dpi=150, bbox_inches="tight")
        plt.close(fig)
        written.append(path)
    return written


def read_sweep_csv(path):
    """Read back an emitted CSV; returns (header, float columns, error strings)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
        numeric = {name: [] for name in header[:-1]}
        errors = []
        for line in fh:
            parts = line.rstrip("\n").split(",")
            for name, val in zip(header[:-1], parts[:-1]):
                numeric[name].append(float(val))
            errors.append(parts[-1])
    return header, {k: np.array(v) for k, v in numeric.items()}, errors


# ---------------------------------------------------------------------------
# Subcommands


def _load_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def load_recipe(name: str) -> dict:
    ref = resources.files("kdqwork.recipes").joinpath(f"{name}.json")
    if not ref.is_file():
        available = sorted(p.name[:-5] for p in resources.files("kdqwork.recipes").iterdir()
                           if p.name.endswith(".json"))
        raise ConfigError(f"unknown recipe {name!r}; available: {available}")
    return json.loads(ref.read_text(encoding="utf-8"))


def _point_setup(args):
    raw = _load_json(args.config)
    spec = spec_from_dict(raw)
    grid = grid_from_dict(raw.get("grid", {}))
    props = propagators_for_grid(spec, grid, _ode_config(raw.get("ode", {})))
    return raw, spec, grid, props


def _emit_table(rows, header, out_dir, fmt, stem):
    os.makedirs(out_dir, exist_ok=True)
    if fmt == "json":
        path = os.path.join(out_dir, f"{stem}.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump([dict(zip(header, r)) for r in rows], fh, indent=1, default=float)
            fh.write("\n")
    else:
        path = os.path.join(out_dir, f"{stem}.csv")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for r in rows:
                fh.write(",".join(_fmt(v) for v in r) + "\n")
    return path


def _cmd_sweep(args) -> int:
    if not args.recipe and not args.config:
        raise ConfigError("sweep needs --config or --recipe")
    raw = load_recipe(args.recipe) if args.recipe else _load_json(args.config)
    cfg = SweepConfig.from_dict(raw)
    if args.threads is not None:
        cfg = SweepConfig.from_dict({**raw, "parallelism": args.threads})
    result = run_sweep(cfg)
    out_dir = args.out or cfg.output_path
    written = emit(result, args.format, out_dir)
    if cfg.emit_png and args.format != "png":
        written += emit(result, "png", out_dir)
    print(json.dumps({"written": written,
                      "wall_time_s": result.metadata["wall_time_s"]}))
    return 0


def _cmd_gfunc(args) -> int:
    raw, spec, grid, props = _point_setup(args)
    us = np.linspace(0.0, args.umax, args.points + 1)[1:] if args.points else []
    rows = []
    for u in us:
        G = char_function(spec, grid, props, float(u), args.scheme)
        rows.append((float(u), G.real, G.imag))
    path = _emit_table(rows, ["u", "re_g", "im_g"], args.out, args.format, "gfunc")
    print(json.dumps({"written": [path]}))
    return 0


def _cmd_moments(args) -> int:
    raw, spec, grid, props = _point_setup(args)
    m = work_moments(spec, grid, props, args.scheme)
    payload = {
        "scheme": args.scheme,
        "mean": m.mean,
        "variance": [m.variance.real, m.variance.imag],
        "third_cumulant": [m.third_cumulant.real, m.third_cumulant.imag],
        "fourth_cumulant": [m.fourth_cumulant.real, m.fourth_cumulant.imag],
        "fourth_central": [m.fourth_central.real, m.fourth_central.imag],
    }
    print(json.dumps(payload))
    return 0


def _cmd_witness(args) -> int:
    raw, spec, grid, props = _point_setup(args)
    rep = scan_nonclassicality(spec, grid, props)
    print(json.dumps({
        "max_imag_witness": rep.max_imag_witness,
        "mu4_real": rep.mu4_real,
        "mu4_imag_abs": rep.mu4_imag_abs,
        "nonclassical_imag": rep.nonclassical_imag,
        "nonclassical_negativity": rep.nonclassical_negativity,
    }))
    return 0


def _cmd_coherence(args) -> int:
    raw = _load_json(args.config)
    spec = spec_from_dict(raw)
    grid = grid_from_dict(raw.get("grid", {}))
    print(json.dumps({
        "coherence_entropy": coherence_entropy_density(spec, grid),
        "qbar01": mean_overlap_qbar(spec, grid, spec.h0, spec.h1),
    }))
    return 0


def _cmd_oracle_check(args) -> int:
    raw = _load_json(args.config) if args.config else {}
    rng = np.random.default_rng(args.seed)
    protocol = (LinearRamp(args.delta) if args.protocol == "ramp" else SuddenQuench())
    grid = MomentumGrid.chain(args.L)
    worst = 0.0
    for _ in range(args.tuples):
        h0, h1, h2 = rng.uniform(-2.0, 2.0, 3)
        spec = ModelSpec(hopping=tuple(raw.get("hopping", [1.0])),
                         pairing=tuple(raw.get("pairing", [1.0])),
                         beta=float(raw.get("beta", 15.0)),
                         h0=h0, h1=h1, h2=h2, protocol=protocol)
        sys_ = build_dense(spec, args.L)
        props = propagators_for_grid(spec, grid)
        for u in np.linspace(0.2, 2.0, args.u_points):
            gd = dense_char_function(sys_, float(u), "kdq")
            gm = char_function(spec, grid, props, float(u), KDQ)
            worst = max(worst, abs(gd - gm))
    ok = worst <= args.tol
    print(json.dumps({"L": args.L, "protocol": args.protocol, "tuples": args.tuples,
                      "max_abs_difference": worst, "tolerance": args.tol, "pass": ok}))
    return 0 if ok else 1


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="kdqwork",
        description="Work statistics of quadratic fermionic chains "
                    "(KDQ and TPM schemes).")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="JSON configuration file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--format", default="csv", choices=["csv", "json", "png"])

    p = sub.add_parser("sweep", help="observable maps over an (h0, h1) grid")
    p.add_argument("--config", help="JSON sweep configuration")
    p.add_argument("--recipe", help="packaged figure recipe name (e.g. fig1a)")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--format", default="csv", choices=["csv", "json", "png"])
    p.add_argument("--threads", type=int, default=_env_threads(), help="worker threads")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("gfunc", help="tabulate G(u) on a u-grid")
    common(p)
    p.add_argument("--umax", type=float, default=2.0)
    p.add_argument("--points", type=int, default=64)
    p.add_argument("--scheme", default="kdq", choices=["kdq", "tpm"])
    p.set_defaults(func=_cmd_gfunc)

    p = sub.add_parser("moments", help="work cumulant densities at one point")
    common(p)
    p.add_argument("--scheme", default="kdq", choices=["kdq", "tpm"])
    p.set_defaults(func=_cmd_moments)

    p = sub.add_parser("witness", help="non-classicality report at one point")
    common(p)
    p.set_defaults(func=_cmd_witness)

    p = sub.add_parser("coherence", help="coherence entropy at one point")
    common(p)
    p.set_defaults(func=_cmd_coherence)

    p = sub.add_parser("oracle-check", help="dense Fock-space cross-validation")
    p.add_argument("--config", help="optional JSON with couplings/beta")
    p.add_argument("--L", type=int, default=8)
    p.add_argument("--tuples", type=int, default=5)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--u-points", type=int, default=10)
    p.add_argument("--protocol", default="quench", choices=["quench", "ramp"])
    p.add_argument("--delta", type=float, default=4.0)
    p.set_defaults(func=_cmd_oracle_check)
    return parser


def _env_threads():
    try:
        return int(os.environ.get("KDQ_THREADS", "")) or None
    except ValueError:
        return None


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except KdqworkError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 2
    except OSError as exc:
        print(json.dumps({"error": "IOError", "message": str(exc)}), file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
