"""Command-line entry point: ``sepvol <subcommand> [options]``.

Every report is written to standard output and carries the full run
configuration under ``"config"``; ``--config report.json`` replays it.
Exit codes: 0 success, 1 a ``verify`` check failed, 2 invalid input,
3 numerical non-convergence, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field as dc_field
from typing import Any, Optional

import numpy as np

from . import matrix as mx
from . import sampling as sm
from . import separability as sp
from . import special as sf
from .errors import NoConvergence, SepvolError, SingularBlock, TableTooCoarse

SUBCOMMANDS = ("ppt", "sample", "estimate", "quad", "chi", "volumes", "milz-strunz", "verify")
QUAD_TARGETS = (
    "psep-real-hs", "hs-identity", "psep-real-hs-2d", "psep-sqrtx-real",
    "sqrtx-numerator", "sqrtx-denominator", "surface-volume", "psep-complex-hs",
)
QUANTITIES = ("separable-fraction", "psep-given-d", "chi", "ball-acceptance")
SAMPLE_KINDS = ("state", "interval", "ball")


@dataclass
class RunConfig:
    subcommand: str
    field: str = "real"
    measure: str = "hs"
    n: int = 100_000
    seed: int = 0
    tol: float = 1e-10
    output: str = "json"
    input_path: Optional[str] = None
    threads: int = 1
    assume_eta2_equals_chi2: bool = False
    target: str = "psep-real-hs"
    quantity: str = "separable-fraction"
    kind: str = "state"
    eps: float = 0.5
    radii: list = dc_field(default_factory=lambda: [0.0, 0.3, 0.6, 0.9])

    def validate(self) -> None:
        if self.subcommand not in SUBCOMMANDS:
            raise ValueError(f"unknown subcommand {self.subcommand!r}")
        mx.Field.parse(self.field)
        sm.Measure.parse(self.measure)
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")
        if self.output not in ("json", "csv"):
            raise ValueError("output must be json or csv")
        if self.field == "complex" and self.measure == "sqrtx" and not self.assume_eta2_equals_chi2:
            raise ValueError("complex sqrtx needs --assume-eta2-equals-chi2")


# ----------------------------------------------------------------------------
# Serialization


def _num(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isinf(x):
            return "Infinity" if x > 0 else "-Infinity"
        if math.isnan(x):
            return "NaN"
        return float(f"{x:.15g}")
    if isinstance(x, dict):
        return {k: _num(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_num(v) for v in x]
    if isinstance(x, np.ndarray):
        return _num(x.tolist())
    if isinstance(x, sp._Infinite):
        return x.to_json()
    return x


def _csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    flat = [{k: v for k, v in r.items() if not isinstance(v, (dict, list))} for r in rows]
    writer = csv.DictWriter(buf, fieldnames=list(flat[0].keys()), lineterminator="\n")
    writer.writeheader()
    for r in flat:
        writer.writerow({k: (f"{v:.15g}" if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def render(cfg: RunConfig, result) -> str:
    if cfg.output == "csv":
        if isinstance(result, str):
            return result
        rows = result if isinstance(result, list) else [result]
        return _csv([_num(r) for r in rows])
    return json.dumps({"config": asdict(cfg), "result": _num(result)}, indent=2) + "\n"


# ----------------------------------------------------------------------------
# Subcommands


def _stream(cfg: RunConfig) -> sm.SeededStream:
    return sm.SeededStream(cfg.seed, 0)


def _load_state(cfg: RunConfig) -> mx.BlockState4:
    if not cfg.input_path:
        raise ValueError("ppt needs --input")
    with open(cfg.input_path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise OSError(f"{cfg.input_path}: not valid JSON ({exc})") from exc
    return mx.BlockState4.from_dict(obj)


def cmd_ppt(cfg: RunConfig):
    state = _load_state(cfg)
    state.check()
    ev = mx.eig4_sym(mx.partial_transpose(state.matrix()))
    try:
        ppt, method = mx.is_ppt(state), "schur"
    except SingularBlock:
        # rank-deficient state: positive semidefinite partial transpose decides
        ppt, method = bool(ev[0] >= -1e-12), "eigenvalues"
    return {"ppt": ppt, "method": method, "min_eig_partial_transpose": float(ev[0]), "field": state.field.value}


def cmd_sample(cfg: RunConfig):
    field = mx.Field.parse(cfg.field)
    gen = _stream(cfg).generator()
    if cfg.kind == "state":
        rho, _ = sm.hs_states(field, gen, cfg.n)
        return [mx.BlockState4.from_matrix(r, field).to_dict() for r in rho]
    if cfg.kind == "interval":
        _, x, y, _ = sm.interval_matrices(field, gen, cfg.n, sm.Measure.parse(cfg.measure))
        return [{"x": float(a), "y": float(b), "epsilon": mx.epsilon_from_eigs(a, b)} for a, b in zip(x, y)]
    if cfg.kind == "ball":
        xs, _ = sm.unit_ball_batch(field, gen, cfg.n)
        return [{"x": mx._encode(x, field)} for x in xs]
    raise ValueError(f"unknown sample kind {cfg.kind!r}")


def _estimate_row(cfg: RunConfig, quantity: str, est: sm.MCEstimate) -> dict:
    return {
        "quantity": quantity,
        "field": cfg.field,
        "measure": cfg.measure,
        "n": est.n,
        "seed": cfg.seed,
        "mean": est.mean,
        "std_error": est.std_error,
        "acceptance_rate": est.acceptance_rate,
    }


def cmd_estimate(cfg: RunConfig):
    stream = _stream(cfg)
    q = cfg.quantity
    if q == "separable-fraction":
        est = sm.separable_fraction_mc(cfg.field, cfg.n, stream, threads=cfg.threads)
    elif q == "psep-given-d":
        est = sm.psep_mc_given_D(
            cfg.field, cfg.measure, cfg.n, stream, cfg.threads, cfg.assume_eta2_equals_chi2
        )
    elif q == "chi":
        est = sm.chi_mc(cfg.field, cfg.eps, cfg.n, stream, cfg.threads)
    elif q == "ball-acceptance":
        est = sm.unit_ball_acceptance(cfg.field, cfg.n, stream, cfg.threads)
    else:
        raise ValueError(f"unknown quantity {q!r}")
    return _estimate_row(cfg, q, est)


def cmd_quad(cfg: RunConfig):
    t = cfg.target
    tol = cfg.tol
    if t == "psep-real-hs":
        r = sp.psep_real_hs(tol)
    elif t == "hs-identity":
        r = sp.hs_identity(tol)
    elif t == "psep-real-hs-2d":
        r = sp.psep_real_hs_2d(max(tol, 1e-9))
    elif t == "psep-sqrtx-real":
        r = sp.psep_sqrtx_real(tol)
    elif t == "sqrtx-numerator":
        r = sp.sqrtx_numerator(max(tol, 1e-9))
    elif t == "sqrtx-denominator":
        r = sp.sqrtx_denominator(tol)
    elif t == "surface-volume":
        r = sp.surface_volume(tol)
    elif t == "psep-complex-hs":
        _, r = sp.build_chi2_table(cfg.n, _stream(cfg), cfg.threads, tol=tol)
    else:
        raise ValueError(f"unknown quad target {t!r}")
    return [r.to_dict()]


def cmd_chi(cfg: RunConfig):
    grid = np.round(np.arange(1001) * 1e-3, 3)
    field = mx.Field.parse(cfg.field)
    if field is mx.Field.REAL:
        values = sf.chi1_fast(grid)
    else:
        values = sm.chi_table_mc(field, grid, cfg.n, _stream(cfg), cfg.threads).values
    if cfg.output == "csv":
        lines = ["epsilon,chi_tilde"] + [f"{e:.3f},{v:.12g}" for e, v in zip(grid, values)]
        return "\n".join(lines) + "\n"
    return [{"epsilon": float(e), "chi_tilde": float(f"{v:.12g}")} for e, v in zip(grid, values)]


def cmd_volumes(cfg: RunConfig):
    out = [r.to_dict() for r in sp.reference_volumes()]
    out.append({"name": "vol-sqrtx-D4", "computed": sp.INFINITE, "reference": sp.INFINITE, "rel_error": 0.0})
    return out


def cmd_milz_strunz(cfg: RunConfig):
    rows = []
    for r, est in sm.milz_strunz_scan(cfg.field, cfg.radii, cfg.n, _stream(cfg), cfg.threads):
        row = _estimate_row(cfg, "milz-strunz", est)
        row["radius"] = r
        rows.append(row)
    return rows


def verify_checks(tol: float = 1e-10) -> list[dict]:
    """Deterministic identity suite; each item has a name, value, target and pass flag."""
    items = []

    def add(name, value, target, limit):
        items.append({"name": name, "value": value, "target": target,
                      "abs_error": abs(value - target), "limit": limit,
                      "passed": bool(abs(value - target) <= limit)})

    for delta in (0.1, 0.5, 1.0, 2.0, 5.0):
        add(f"defect-chi delta={delta}", sf.defect(delta) + sf.CHI1_AT_ONE * sf.chi1_tilde(math.exp(-delta)),
            sf.CHI1_AT_ONE, 1e-9)
    add("hs-identity", sp.hs_identity(tol).value, 0.25, 1e-8)
    add("psep-real-hs", sp.psep_real_hs(tol).value, 29 / 64, 1e-8)
    add("psep-sqrtx-real", sp.psep_sqrtx_real(tol).value, 0.26223, 5e-5)
    for r in sp.reference_volumes():
        items.append({"name": r.name, "value": r.computed, "target": r.reference,
                      "rel_error": r.rel_error, "limit": 1e-9, "passed": bool(r.rel_error < 1e-9)})
    vol = sp.surface_volume().value
    add("surface-volume", vol, 4 * math.pi**2 / 3, 1e-6)
    for eps in (0.1, 0.3, 0.5, 0.7, 0.9):
        add(f"eta-chi eps={eps}", sp.eta_tilde_real(eps, vol), sf.chi1_tilde(eps), 1e-6)
    return items


def cmd_verify(cfg: RunConfig):
    return verify_checks(cfg.tol)


DISPATCH = {
    "ppt": cmd_ppt,
    "sample": cmd_sample,
    "estimate": cmd_estimate,
    "quad": cmd_quad,
    "chi": cmd_chi,
    "volumes": cmd_volumes,
    "milz-strunz": cmd_milz_strunz,
    "verify": cmd_verify,
}


def run(cfg: RunConfig) -> tuple[int, str]:
    """Execute a configuration and return ``(exit_code, report_text)``."""
    cfg.validate()
    result = DISPATCH[cfg.subcommand](cfg)
    text = render(cfg, result)
    if cfg.subcommand == "verify" and not all(item["passed"] for item in result):
        return 1, text
    return 0, text


# ----------------------------------------------------------------------------
# Argument parsing


def _radii(text: str) -> list:
    return [float(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--field", choices=("real", "complex"))
    common.add_argument("--measure", choices=("hs", "sqrtx"))
    common.add_argument("--n", type=int)
    common.add_argument("--seed", type=int, help="default: $SEPVOL_SEED, else 0")
    common.add_argument("--tol", type=float)
    common.add_argument("--output", choices=("json", "csv"))
    common.add_argument("--input", dest="input_path")
    common.add_argument("--threads", type=int)
    common.add_argument("--assume-eta2-equals-chi2", action="store_true", default=None)
    common.add_argument("--config", dest="config_path", help="replay the config echoed in a report")

    parser = argparse.ArgumentParser(prog="sepvol", description="Separability probabilities of two-qubit states.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    sub.add_parser("ppt", parents=[common], help="PPT test of a state file")
    p = sub.add_parser("sample", parents=[common], help="draw samples")
    p.add_argument("--kind", choices=SAMPLE_KINDS)
    p = sub.add_parser("estimate", parents=[common], help="Monte Carlo estimates")
    p.add_argument("--quantity", choices=QUANTITIES)
    p.add_argument("--eps", type=float)
    p = sub.add_parser("quad", parents=[common], help="deterministic quadrature targets")
    p.add_argument("--target", choices=QUAD_TARGETS)
    p = sub.add_parser("chi", parents=[common], help="chi table on a 1e-3 grid")
    sub.add_parser("volumes", parents=[common], help="volume constants")
    p = sub.add_parser("milz-strunz", parents=[common], help="separable fraction against Bloch radius")
    p.add_argument("--radii", type=_radii)
    sub.add_parser("verify", parents=[common], help="identity suite")
    return parser


def config_from_args(ns: argparse.Namespace, environ=os.environ) -> RunConfig:
    base: dict[str, Any] = {}
    if ns.config_path:
        with open(ns.config_path, encoding="utf-8") as fh:
            obj = json.load(fh)
        base = dict(obj.get("config", obj))
        base.pop("subcommand", None)
    elif "SEPVOL_SEED" in environ:
        base["seed"] = int(environ["SEPVOL_SEED"])
    known = set(RunConfig.__dataclass_fields__)
    for key, value in vars(ns).items():
        if key in known and key != "subcommand" and value is not None:
            base[key] = value
    return RunConfig(subcommand=ns.subcommand, **{k: v for k, v in base.items() if k in known})


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = config_from_args(ns)
        code, text = run(cfg)
    except NoConvergence as exc:
        print(f"sepvol: no convergence: {exc}", file=sys.stderr)
        return 3
    except TableTooCoarse as exc:
        print(f"sepvol: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"sepvol: {exc}", file=sys.stderr)
        return 4
    except (ValueError, KeyError, TypeError, SepvolError) as exc:
        print(f"sepvol: invalid input: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
