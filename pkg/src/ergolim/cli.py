"""Config-driven command line front end.

    ergolim analyze config.json [--tol T] [--max-iters N] [--format json|csv] [--out PATH]
    ergolim gallery list
    ergolim demo intro

Exit codes: 0 when every verdict passes, 2 on a mathematical failure
(singular Gram matrix, divergence, oscillation), 1 on input errors.
"""
from __future__ import annotations

import argparse
import io
import json
import logging
import math
import os
import platform
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .errors import ContourFailed, ContourTooTight, EmptyEigenspace, ErgolimError, InvalidInput, NotCyclic
from .gallery import KINDS, GallerySpec, make
from .gram import ascent_diagnostic, build_gram, build_projection, fixed_point_spaces, projection_diagnostics, separation_check
from .iteration import cesaro_deviation, cyclic_iterate, difference_decay, iterate_deviation
from .linop import DenseOperator, apply, markov_violations, operator_norm, subtract, to_dense
from .spectral import contour_projection, cyclic_power, essential_radius_note, spectrum


SCHEMA_VERSION = 1
ANALYSES = ("diagnose", "gram", "project", "iterate", "cesaro", "cyclic", "oracle")
PASSING = {"pass", "converged"}
CSV_HEADER = "m,deviation,fitted_rate"


@dataclass
class ExperimentConfig:
    operator: dict
    analysis: list = field(default_factory=list)
    tolerance: float = 1e-12
    max_iterations: int = 10_000
    output_path: str | None = None
    output_format: str = "json"
    seed: int | None = None
    lam: complex | float = 1.0

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise InvalidInput("config must be a JSON object")
        known = {"schema_version", "operator", "analysis", "tolerance", "max_iterations",
                 "output_path", "output_format", "seed", "lambda"}
        unknown = set(d) - known
        if unknown:
            raise InvalidInput(f"unknown config keys {sorted(unknown)}")
        if d.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
            raise InvalidInput(f"unsupported schema_version {d['schema_version']}")
        if "operator" not in d or not isinstance(d["operator"], dict):
            raise InvalidInput("config needs an 'operator' object")
        lam = d.get("lambda", 1.0)
        if isinstance(lam, list) and len(lam) == 2:
            lam = complex(lam[0], lam[1])
        elif not isinstance(lam, (int, float)) or isinstance(lam, bool):
            raise InvalidInput("lambda must be a number or a [re, im] pair")
        cfg = cls(
            operator=dict(d["operator"]),
            analysis=list(d.get("analysis", [])),
            tolerance=d.get("tolerance", 1e-12),
            max_iterations=d.get("max_iterations", 10_000),
            output_path=d.get("output_path"),
            output_format=d.get("output_format", "json"),
            seed=d.get("seed"),
            lam=lam,
        )
        cfg.validate()
        return cfg

    def validate(self):
        bad = [a for a in self.analysis if a not in ANALYSES]
        if bad:
            raise InvalidInput(f"unknown analyses {bad}; choose from {list(ANALYSES)}")
        if not isinstance(self.tolerance, (int, float)) or not self.tolerance > 0:
            raise InvalidInput("tolerance must be positive")
        if not isinstance(self.max_iterations, int) or self.max_iterations < 1:
            raise InvalidInput("max_iterations must be an integer >= 1")
        if self.output_format not in ("json", "csv"):
            raise InvalidInput("output_format must be 'json' or 'csv'")
        if self.seed is not None and not isinstance(self.seed, int):
            raise InvalidInput("seed must be an integer")
        if "matrix" in self.operator:
            m = self.operator["matrix"]
            if not isinstance(m, list) or not m or any(not isinstance(r, list) or len(r) != len(m) for r in m):
                raise InvalidInput("inline matrix must be a square list of lists")
        elif "kind" not in self.operator:
            raise InvalidInput("operator needs either 'matrix' or a gallery 'kind'")

    def to_dict(self) -> dict:
        lam = self.lam
        return {
            "schema_version": SCHEMA_VERSION,
            "operator": self.operator,
            "analysis": list(self.analysis),
            "tolerance": self.tolerance,
            "max_iterations": self.max_iterations,
            "output_path": self.output_path,
            "output_format": self.output_format,
            "seed": self.seed,
            "lambda": [lam.real, lam.imag] if isinstance(lam, complex) else lam,
        }


# --------------------------------------------------------------------------
# serialization


def to_jsonable(obj):
    """Plain-python view of results: arrays become lists, complex numbers ``{"re", "im"}``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"im": to_jsonable(float(obj.imag)), "re": to_jsonable(float(obj.real))}
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def _fmt_float(x: float) -> str:
    s = format(x, ".17g")
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def dumps(obj, indent=2, _level=0) -> str:
    """JSON with sorted keys and floats written with 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {dumps(obj[k], indent, _level + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, float):
        return _fmt_float(obj)
    return json.dumps(obj)


def csv_table(artifact: dict) -> str:
    out = io.StringIO()
    out.write(CSV_HEADER + "\n")
    it = artifact.get("results", {}).get("iterate")
    if it and "entries" in it:
        rate = it.get("fitted_rate")
        rate_s = "" if rate is None else _fmt_float(float(rate))
        for m, dev in it["entries"]:
            out.write(f"{int(m)},{_fmt_float(float(dev))},{rate_s}\n")
    return out.getvalue()


def emit(artifact: dict, fmt="json", path=None) -> list:
    """Write ``artifact`` as JSON or as the CSV deviations table.

    With ``path=None`` the text goes to stdout. Returns the written paths.
    """
    text = dumps(to_jsonable(artifact)) + "\n" if fmt == "json" else csv_table(artifact)
    if path is None:
        sys.stdout.write(text)
        return []
    p = Path(path)
    if p.parent and not p.parent.exists():
        p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text)
    return [p]


# --------------------------------------------------------------------------
# analyses


def _seed(cfg):
    if cfg.seed is not None:
        return cfg.seed
    env = os.environ.get("ERGOLIM_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise InvalidInput(f"ERGOLIM_SEED={env!r} is not an integer") from None
    return 0


def _build_operator(cfg):
    """Returns ``(op, known_system, description)``."""
    spec = dict(cfg.operator)
    if "matrix" in spec:
        extra = set(spec) - {"matrix", "markov"}
        if extra:
            raise InvalidInput(f"unknown inline operator keys {sorted(extra)}")
        try:
            a = np.array(spec["matrix"], dtype=float)
        except (TypeError, ValueError) as exc:
            raise InvalidInput(f"inline matrix is not numeric: {exc}") from None
        op = DenseOperator(a)
        markov = spec.get("markov")
        if markov is None:
            markov = not markov_violations(op)
        if markov:
            op = DenseOperator(a, markov=True)
        return op, None, None
    if spec.get("kind") == "stochastic_random" and spec.get("seed") is None:
        spec["seed"] = _seed(cfg)
    item = make(GallerySpec.from_dict(spec))
    known = item.known_eigensystem if abs(cfg.lam - 1.0) == 0 else None
    return item.op, known, item.limit_description


def _projection_summary(P):
    if isinstance(P, DenseOperator):
        return {"P": P.matrix}
    return {"nodes": P.nodes, "node_matrix": P.node_matrix}


def _report_dict(r):
    return {
        "entries": [[m, d] for m, d in r.entries],
        "fitted_rate": r.fitted_rate,
        "fitted_C": r.fitted_C,
        "gamma_spectral": r.gamma_spectral,
        "stop_reason": r.stop_reason,
        "verdict": r.verdict,
    }


def run(cfg: ExperimentConfig):
    """Execute the requested analyses. Returns ``(artifact, exit_code)``.

    Input problems raise :class:`InvalidInput`; mathematical failures are
    recorded as non-passing verdicts.
    """
    op, known, description = _build_operator(cfg)
    lam = cfg.lam
    requested = [a for a in ANALYSES if a in cfg.analysis]
    results = {}
    state = {}

    def need_system():
        if "system" not in state:
            try:
                state["system"] = known if known is not None else fixed_point_spaces(op, lam)
            except EmptyEigenspace as exc:
                state["system"] = None
                state["error"] = str(exc)
        return state["system"]

    def need_gram():
        if "gram" not in state:
            sys_ = need_system()
            state["gram"] = None if sys_ is None else build_gram(sys_)
        return state["gram"]

    def need_projection():
        if "projection" not in state:
            g = need_gram()
            state["projection"] = None if g is None or g.mode == "singular" else build_projection(need_system(), g)
        return state["projection"]

    def skipped():
        if state.get("error"):
            return {"verdict": "empty_eigenspace", "error": state["error"]}
        return {"verdict": "skipped", "reason": "Gram matrix is singular"}

    for name in requested:
        if name == "diagnose":
            dense = to_dense(op)
            rep = spectrum(op)
            asc = ascent_diagnostic(dense, lam)
            ess = essential_radius_note(op)
            diffs = difference_decay(op, min(100, cfg.max_iterations)) if operator_norm(op) <= 1 + 1e-12 else []
            results[name] = {
                "eigenvalues": rep.eigenvalues,
                "spectral_radius": rep.spectral_radius,
                "peripheral": list(rep.peripheral_distinct),
                "peripheral_are_roots_of_unity": rep.peripheral_are_roots_of_unity,
                "cyclic_order_l": rep.cyclic_order_l,
                "dim_ker_1": asc.dim_ker_1,
                "dim_ker_2": asc.dim_ker_2,
                "ascent_le_one": asc.ascent_le_one,
                "rank": ess.rank,
                "essential_radius": ess.essential_radius,
                "operator_norm": operator_norm(op),
                "difference_decay": [[n, d] for n, d in diffs],
                "verdict": "pass" if asc.ascent_le_one else "fail",
            }
        elif name == "gram":
            g = need_gram()
            if g is None:
                results[name] = skipped()
                continue
            sys_ = need_system()
            entry = {
                "lambda": sys_.lam_value,
                "n": sys_.n,
                "m": sys_.m,
                "G": g.G,
                "A": g.A,
                "mode": g.mode,
                "column_rank": g.column_rank,
                "condition_estimate": g.condition_estimate,
                "verdict": "pass" if g.mode != "singular" else "singular",
            }
            if sys_.m == sys_.n:
                sep, witness = separation_check(sys_)
                entry["separates"] = sep
                entry["witness"] = witness
            results[name] = entry
        elif name == "project":
            p = need_projection()
            if p is None:
                results[name] = skipped()
                continue
            diag = projection_diagnostics(p)
            ok = (
                diag["idempotence_error"] <= 1e-10
                and diag["basis_fix_error"] <= 1e-10
                and diag["rank"] == len(p.basis)
                and diag["norm"] <= diag["coefficient_bound"] + 1e-10
            )
            results[name] = {
                **_projection_summary(p.realized),
                **diag,
                "limit_description": description,
                "verdict": "pass" if ok else "fail",
            }
        elif name == "iterate":
            p = need_projection()
            if p is None:
                results[name] = skipped()
                continue
            results[name] = _report_dict(iterate_deviation(op, p, cfg.max_iterations, cfg.tolerance))
        elif name == "cesaro":
            p = need_projection()
            if p is None:
                results[name] = skipped()
                continue
            r = cesaro_deviation(op, p, cfg.max_iterations, cfg.tolerance)
            results[name] = {"entries": [[n, d] for n, d in r.entries], "envelope_ratio": r.envelope_ratio, "verdict": r.verdict}
        elif name == "cyclic":
            if not isinstance(op, DenseOperator):
                raise InvalidInput("the cyclic analysis needs a dense operator")
            try:
                cp = cyclic_power(op)
            except NotCyclic as exc:
                results[name] = {"verdict": "not_cyclic", "error": str(exc)}
                continue
            res = cyclic_iterate(op, cfg.tolerance, cfg.max_iterations)
            results[name] = {
                "l": cp.l,
                "k_minimal": cp.k_minimal,
                "k_paper": cp.k_paper,
                "k_used": res.k_used,
                "plain_oscillates": res.plain_oscillates,
                "report": _report_dict(res.report),
                "verdict": res.report.verdict,
            }
        elif name == "oracle":
            if not isinstance(op, DenseOperator):
                raise InvalidInput("the oracle analysis needs a dense operator")
            p = need_projection()
            if p is None:
                results[name] = skipped()
                continue
            ev = np.linalg.eigvals(op.matrix)
            others = np.abs(ev - lam)
            others = others[others > 1e-6]
            radius = 0.5 * min(float(others.min()) if others.size else 1.0, 1.0)
            try:
                cp_ = contour_projection(op, lam, radius, 64)
            except (ContourTooTight, ContourFailed) as exc:
                results[name] = {"verdict": "fail", "error": str(exc)}
                continue
            diff = operator_norm(subtract(cp_.P, p.realized))
            results[name] = {
                "radius": radius,
                "n_quad": 64,
                "P_contour": cp_.P.matrix,
                "difference": diff,
                "verdict": "pass" if diff <= 1e-8 else "fail",
            }

    created = os.environ.get("SOURCE_DATE_EPOCH")
    if created is not None:
        created = datetime.fromtimestamp(int(created), tz=timezone.utc).isoformat()
    verdicts = {k: v["verdict"] for k, v in results.items()}
    passed = all(v in PASSING for v in verdicts.values())
    artifact = {
        "schema_version": SCHEMA_VERSION,
        "config": cfg.to_dict(),
        "seed": _seed(cfg),
        "versions": {
            "ergolim": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "created": created,
        "results": results,
        "verdicts": verdicts,
        "passed": passed,
    }
    return artifact, 0 if passed else 2


# --------------------------------------------------------------------------
# demo


def demo_intro(n_tests=20, seed=0):
    """The worked C[0, 1] example: Gram matrix, its inverse and the limit projection.

    The realized projection is checked against ``f(0) + (f(1) - f(0)) x`` on
    random polynomials.
    """
    item = make(GallerySpec("intro_hat"))
    sys_ = item.known_eigensystem
    g = build_gram(sys_)
    p = build_projection(sys_, g)
    x = item.op.grid
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_tests):
        coeffs = rng.normal(size=rng.integers(1, 8))
        f = np.polynomial.polynomial.polyval(x, coeffs)
        expected = f[0] + (f[-1] - f[0]) * x
        worst = max(worst, float(np.max(np.abs(apply(p.realized, f) - expected))))
    return {"G": g.G, "A": g.A, "mode": g.mode, "limit": item.limit_description, "max_error": worst, "projection": p}


def _print_matrix(name, a, out):
    rows = ["[" + ", ".join(f"{v:g}" for v in row) + "]" for row in np.asarray(a)]
    out.write(f"{name} = [" + ", ".join(rows) + "]\n")


# --------------------------------------------------------------------------
# entry point


def _load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InvalidInput(f"cannot read config {path}: {exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"config {path} is not valid JSON: {exc}") from None


def build_parser():
    parser = argparse.ArgumentParser(prog="ergolim", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    an = sub.add_parser("analyze", help="run the analyses listed in a JSON config")
    an.add_argument("config")
    an.add_argument("--tol", type=float)
    an.add_argument("--max-iters", type=int)
    an.add_argument("--format", choices=["json", "csv"])
    an.add_argument("--out")
    gal = sub.add_parser("gallery", help="gallery operators")
    gal.add_argument("action", choices=["list"])
    demo = sub.add_parser("demo", help="worked examples")
    demo.add_argument("name", choices=["intro"])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "gallery":
            for kind, desc in KINDS.items():
                print(f"{kind:22s} {desc}")
            return 0
        if args.command == "demo":
            d = demo_intro()
            _print_matrix("G", d["G"], sys.stdout)
            _print_matrix("A", d["A"], sys.stdout)
            print(f"limit: {d['limit']}")
            print(f"max deviation from the closed form on 20 random polynomials: {d['max_error']:.3e}")
            return 0
        raw = _load_config(args.config)
        if isinstance(raw, dict):
            if args.tol is not None:
                raw["tolerance"] = args.tol
            if args.max_iters is not None:
                raw["max_iterations"] = args.max_iters
            if args.format is not None:
                raw["output_format"] = args.format
            if args.out is not None:
                raw["output_path"] = args.out
        cfg = ExperimentConfig.from_dict(raw)
        artifact, code = run(cfg)
        try:
            emit(artifact, cfg.output_format, cfg.output_path)
        except OSError as exc:
            print(f"ergolim: cannot write output: {exc}", file=sys.stderr)
            return 1
        if code:
            failing = {k: v for k, v in artifact["verdicts"].items() if v not in PASSING}
            print(f"ergolim: failing verdicts {failing}", file=sys.stderr)
        return code
    except InvalidInput as exc:
        print(f"ergolim: {exc}", file=sys.stderr)
        return 1
    except ErgolimError as exc:
        print(f"ergolim: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
