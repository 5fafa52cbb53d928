"""Command-line harness: experiment configuration, dispatch, and replay.

Every run resolves its configuration (JSON config file merged with flags,
flags winning), executes one experiment, and emits a result object with
canonical formatting: JSON with sorted keys, or CSV with a header row, LF
line endings, and a ``.run.json`` sidecar carrying the full result.  The
config echo plus the toolkit version is sufficient to reproduce the table
bit-for-bit, which is what ``replay`` asserts.

Exit statuses: 0 success (including refuted/inconclusive verdicts — a
refuted bound is a successful experiment), 2 parse or precondition error,
3 budget exceeded, 4 precision exhausted, 5 replay drift.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

from . import __version__
from .certified import PRECISION_CAP, PRECISION_DEFAULT, parse_vector
from .counting import (
    SCAN_BUDGET_DEFAULT,
    CountQuery,
    count_Q,
    partial_series,
)
from .errors import (
    BudgetExceeded,
    DriftDetected,
    LiteralParseError,
    PrecisionExhausted,
    PreconditionViolated,
)
from .exponents import (
    check_transference,
    estimate_omega_D,
    estimate_omega_S,
    estimate_tau_D,
    vwa_witnesses,
)
from .exponents import block_rows as exponent_block_rows
from .lattice import (
    SEARCH_BOUND_DEFAULT,
    build_lattice,
    count_lattice_points,
    dual_short_vector,
    verify_nalpha_bound,
)
from .measure_lab import (
    SEED_DEFAULT,
    MeasureExperiment,
    approximable_fraction,
    fraction_profile,
    phi_contrast,
    subspace_fraction,
)
from .psi import parse_psi
from .ubiquity import (
    BALL_BUDGET_DEFAULT,
    KAPPA_FLOOR_DEFAULT,
    MC_SAMPLES_DEFAULT,
    check_conditions,
    mink_cover,
    report_rows,
    select_k,
)

Row = List[str]
RunOutput = Tuple[List[str], List[Row], Dict[str, str]]


def _frac(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise LiteralParseError(f"not a rational literal: {text!r} ({exc})")


def _fmt(value: Any) -> str:
    """Full-precision canonical text: rationals as p/q, floats via repr."""
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _verdict(passed: Optional[bool]) -> str:
    if passed is None:
        return "inconclusive"
    return "pass" if passed else "fail"


def _parse_range(text: str) -> range:
    lo, sep, hi = text.partition(":")
    if not sep:
        raise LiteralParseError(f"range literal must be LO:HI, got {text!r}")
    return range(int(lo), int(hi) + 1)


# ---------------------------------------------------------------------------
# Subcommand runners.  Each consumes the resolved config dict and returns
# (columns, table rows, verdicts); all cells are canonical strings.
# ---------------------------------------------------------------------------


def _run_count(cfg: Dict[str, Any]) -> RunOutput:
    x = parse_vector(cfg["x"])
    query = CountQuery(x, _frac(cfg["delta"]), cfg["M"], cfg["N"])
    rep = count_Q(query, cfg["precision"], scan_budget=cfg["scan_budget"])
    row = [
        cfg["x"], cfg["delta"], str(cfg["M"]), str(cfg["N"]),
        str(rep.count), _fmt(rep.lemma_lower_bound),
        _verdict(rep.bound_satisfied),
    ]
    return (
        ["x", "delta", "M", "N", "count", "bound", "pass"],
        [row],
        {"bound": _verdict(rep.bound_satisfied)},
    )


def _run_series(cfg: Dict[str, Any]) -> RunOutput:
    x = parse_vector(cfg["x"])
    psi = parse_psi(cfg["psi"])
    sums = partial_series(x, psi, cfg["k"], cfg["Qmax"], cfg["precision"],
                          cfg["scan_budget"])
    table = [[str(q), _fmt(v)] for q, v in sums]
    growing = len(sums) >= 2 and float(sums[-1][1]) > float(sums[0][1])
    return (["Q", "partial_sum"], table, {"growing": _fmt(growing)})


def _run_exponent(cfg: Dict[str, Any]) -> RunOutput:
    x = parse_vector(cfg["x"])
    kind = cfg["kind"]
    if kind == "tau_D":
        est = estimate_tau_D(x, cfg["H"], cfg["precision"])
    elif kind == "omega_D":
        est = estimate_omega_D(x, cfg["H"], cfg["precision"])
    elif kind == "omega_S":
        est = estimate_omega_S(x, cfg["H"], cfg["precision"])
    else:
        raise LiteralParseError(
            f"kind must be tau_D, omega_D, or omega_S, got {kind!r}"
        )
    verdicts = {
        "estimate": _fmt(est.value),
        "effective_height": str(est.height),
        "exact_resonance": _fmt(est.is_exact_resonance),
        "notes": "; ".join(est.notes),
    }
    return (
        ["block", "height_range", "block_exponent", "witness"],
        exponent_block_rows(est),
        verdicts,
    )


def _run_transference(cfg: Dict[str, Any]) -> RunOutput:
    x = parse_vector(cfg["x"])
    w_d = estimate_omega_D(x, cfg["H"], cfg["precision"])
    w_s = estimate_omega_S(x, cfg["Qmax"], cfg["precision"])
    res = check_transference(w_d.value, w_s.value, x.dim, cfg["slack"])
    row = [
        _fmt(w_d.value), _fmt(w_s.value),
        _fmt(res.detail["lower"]), _fmt(res.detail["upper"]),
        _verdict(res.passed),
    ]
    return (
        ["omega_D", "omega_S", "lower", "upper", "pass"],
        [row],
        {"transference": _verdict(res.passed)},
    )


def _run_vwa(cfg: Dict[str, Any]) -> RunOutput:
    x = parse_vector(cfg["x"])
    qs = vwa_witnesses(x, _frac(cfg["eps"]), cfg["Qmax"], cfg["precision"])
    return (
        ["q"],
        [[str(q)] for q in qs],
        {"witness_count": str(len(qs)), "vwa_evidence": _fmt(bool(qs))},
    )


def _run_lattice(cfg: Dict[str, Any]) -> RunOutput:
    x = parse_vector(cfg["x"])
    spec = build_lattice(x, cfg["N"], _frac(cfg["delta"]))
    t = spec.t_enclosure(cfg["precision"])
    R = spec.R_enclosure(cfg["precision"])
    det = spec.det_enclosure(cfg["precision"])
    count = count_lattice_points(spec, cfg["precision"])
    dual = dual_short_vector(spec, _frac(cfg["search_bound"]), cfg["precision"])
    rows = [
        ["t", _fmt(t.lower), _fmt(t.upper)],
        ["R", _fmt(R.lower), _fmt(R.upper)],
        ["det", _fmt(det.lower), _fmt(det.upper)],
        ["count", str(count), str(count)],
    ]
    verdicts = {"det_contains_one": _fmt(det.lower <= 1 <= det.upper)}
    if dual is None:
        verdicts["dual_witness"] = "none-found"
    else:
        rows.append([
            "dual",
            " ".join(str(v) for v in dual.q_part) + f" | {dual.p_part}",
            f"[{_fmt(dual.image_lower)},{_fmt(dual.image_upper)}]",
        ])
        verdicts["dual_witness"] = "found"
    return (["quantity", "lower", "upper"], rows, verdicts)


def _run_nalpha(cfg: Dict[str, Any]) -> RunOutput:
    x = parse_vector(cfg["x"])
    res = verify_nalpha_bound(
        x, _frac(cfg["tau"]), cfg["N"], _frac(cfg["delta"]),
        cfg["N_min"], cfg["precision"],
    )
    row = [
        str(cfg["N"]), cfg["delta"], str(res.detail["count"]),
        _fmt(res.detail["bound"]), _fmt(res.margin), _verdict(res.passed),
    ]
    return (
        ["N", "delta", "count", "bound", "margin", "pass"],
        [row],
        {"bound": _verdict(res.passed)},
    )


def _run_cover(cfg: Dict[str, Any]) -> RunOutput:
    x = parse_vector(cfg["x"])
    psi = parse_psi(cfg["psi"])
    union = mink_cover(x, psi, cfg["N"], cfg["precision"],
                       ball_budget=cfg["ball_budget"])
    measure = union.measure
    covered = measure >= 1 - Fraction(1, 10 ** 9)
    return (
        ["N", "measure", "components", "covered"],
        [[str(cfg["N"]), _fmt(measure), str(len(union.intervals)),
          _fmt(covered)]],
        {"covered": _fmt(covered)},
    )


def _ubiquity_verdicts(rep) -> Dict[str, str]:
    out = {key: str(val) for key, val in rep.verdicts.items()}
    out["kappa_witness"] = _fmt(rep.kappa_witness) if rep.kappa_witness is not None else ""
    out["j0"] = str(rep.j0) if rep.j0 is not None else ""
    return out


def _run_ubiquity(cfg: Dict[str, Any]) -> RunOutput:
    x = parse_vector(cfg["x"])
    psi = parse_psi(cfg["psi"])
    c = _frac(cfg["c"]) if cfg["c"] else Fraction(2 * cfg["k"])
    rep = check_conditions(
        x, psi, cfg["d"], cfg["k"], c, _parse_range(cfg["j_range"]),
        _frac(cfg["kappa_floor"]), cfg["precision"], PRECISION_CAP,
        cfg["ball_budget"], cfg["mc_samples"], cfg["seed"],
        cfg["scan_budget"],
    )
    return (
        ["k", "c", "j", "block_count", "union_measure", "R_ratio", "D_partial"],
        report_rows(rep),
        _ubiquity_verdicts(rep),
    )


def _run_select_k(cfg: Dict[str, Any]) -> RunOutput:
    x = parse_vector(cfg["x"])
    psi = parse_psi(cfg["psi"])
    k_search = [k for k in _parse_range(cfg["k_search"]) if k >= 2]
    k, rep, diags = select_k(
        x, psi, cfg["d"], k_search, _parse_range(cfg["j_range"]),
        _frac(cfg["kappa_floor"]), cfg["precision"], PRECISION_CAP,
        cfg["ball_budget"], cfg["mc_samples"], cfg["seed"],
        cfg["scan_budget"],
    )
    table = [
        [str(e["k"]),
         str(e["j0"]) if e["j0"] is not None else "",
         e["route"] or "rejected",
         ",".join(str(j) for j in e["skipped"])]
        for e in diags
    ]
    verdicts = {"selected_k": str(k) if k is not None else "none-found"}
    if rep is not None:
        verdicts.update(_ubiquity_verdicts(rep))
        verdicts["c"] = _fmt(rep.c)
    return (["k", "j0", "route", "skipped_j"], table, verdicts)


def _measure_experiment(cfg: Dict[str, Any]) -> MeasureExperiment:
    return MeasureExperiment(
        x=parse_vector(cfg["x"]),
        psi=parse_psi(cfg["psi"]),
        d=cfg["d"],
        k=cfg["k"],
        Q_max=cfg["Qmax"],
        sampling=cfg["sampling"],
        n_points=cfg["n"],
        seed=cfg["seed"] if cfg["sampling"] == "monte-carlo" else None,
        Q0=cfg["Q0"],
    )


def _run_measure(cfg: Dict[str, Any]) -> RunOutput:
    exp = _measure_experiment(cfg)
    if cfg["checkpoints"]:
        cps = [int(c) for c in cfg["checkpoints"].split(",")]
        prof = fraction_profile(exp, cps, cfg["precision"],
                                scan_budget=cfg["scan_budget"])
        table = [[str(q), _fmt(f)] for q, f in prof]
        final = prof[-1][1]
    else:
        rep = approximable_fraction(exp, cfg["precision"],
                                    scan_budget=cfg["scan_budget"])
        table = [[str(cfg["Qmax"]), _fmt(rep.fraction)]]
        final = rep.fraction
    return (["Q_max", "fraction"], table, {"fraction": _fmt(final)})


def _run_phi_contrast(cfg: Dict[str, Any]) -> RunOutput:
    x = parse_vector(cfg["x"])
    rep = phi_contrast(
        x, cfg["d"], cfg["Q0"], cfg["Qmax"], cfg["sampling"], cfg["n"],
        cfg["seed"] if cfg["sampling"] == "monte-carlo" else None,
        cfg["precision"], scan_budget=cfg["scan_budget"],
    )
    within = rep.empirical_fraction <= rep.union_bound + 3 * rep.sigma
    row = [
        _fmt(rep.empirical_fraction), _fmt(rep.union_bound),
        _fmt(rep.sigma), str(rep.qualifying_count), _fmt(within),
    ]
    return (
        ["empirical", "union_bound", "sigma", "qualifying_q", "within_bound"],
        [row],
        {"within_bound": _fmt(within)},
    )


def _run_subspace(cfg: Dict[str, Any]) -> RunOutput:
    exp = _measure_experiment(cfg)
    rep, series = subspace_fraction(exp, cfg["precision"],
                                    scan_budget=cfg["scan_budget"])
    table = [["fraction", _fmt(rep.fraction)]]
    table += [[f"series@{q}", _fmt(v)] for q, v in series]
    return (
        ["quantity", "value"],
        table,
        {"fraction": _fmt(rep.fraction)},
    )


_RUNNERS = {
    "count": _run_count,
    "series": _run_series,
    "exponent": _run_exponent,
    "transference": _run_transference,
    "vwa": _run_vwa,
    "lattice": _run_lattice,
    "nalpha": _run_nalpha,
    "cover": _run_cover,
    "ubiquity": _run_ubiquity,
    "select-k": _run_select_k,
    "measure": _run_measure,
    "phi-contrast": _run_phi_contrast,
    "subspace": _run_subspace,
}

# Flag schema per subcommand: name -> (type, default); default None with
# no fallback means required.
_COMMON = {
    "precision": (int, PRECISION_DEFAULT),
    "scan_budget": (int, SCAN_BUDGET_DEFAULT),
    "out": (str, ""),
    "format": (str, "json"),
}
_MC = {
    "sampling": (str, "grid"),
    "n": (int, 10_000),
    "seed": (int, SEED_DEFAULT),
}
_SCHEMAS: Dict[str, Dict[str, Tuple[type, Any]]] = {
    "count": {"x": (str, None), "delta": (str, None), "N": (int, None),
              "M": (int, 0)},
    "series": {"x": (str, None), "psi": (str, None), "k": (int, 1),
               "Qmax": (int, None)},
    "exponent": {"x": (str, None), "kind": (str, "tau_D"), "H": (int, None)},
    "transference": {"x": (str, None), "H": (int, None), "Qmax": (int, None),
                     "slack": (float, 0.05)},
    "vwa": {"x": (str, None), "eps": (str, None), "Qmax": (int, None)},
    "lattice": {"x": (str, None), "N": (int, None), "delta": (str, None),
                "search_bound": (str, str(SEARCH_BOUND_DEFAULT))},
    "nalpha": {"x": (str, None), "tau": (str, None), "N": (int, None),
               "delta": (str, None), "N_min": (int, 1000)},
    "cover": {"x": (str, None), "psi": (str, None), "N": (int, None),
              "ball_budget": (int, BALL_BUDGET_DEFAULT)},
    "ubiquity": {"x": (str, None), "psi": (str, None), "d": (int, None),
                 "k": (int, None), "c": (str, ""), "j_range": (str, None),
                 "kappa_floor": (str, str(KAPPA_FLOOR_DEFAULT)),
                 "ball_budget": (int, BALL_BUDGET_DEFAULT),
                 "mc_samples": (int, MC_SAMPLES_DEFAULT),
                 "seed": (int, SEED_DEFAULT)},
    "select-k": {"x": (str, None), "psi": (str, None), "d": (int, None),
                 "k_search": (str, "2:64"), "j_range": (str, None),
                 "kappa_floor": (str, str(KAPPA_FLOOR_DEFAULT)),
                 "ball_budget": (int, BALL_BUDGET_DEFAULT),
                 "mc_samples": (int, MC_SAMPLES_DEFAULT),
                 "seed": (int, SEED_DEFAULT)},
    "measure": {"x": (str, None), "psi": (str, None), "d": (int, None),
                "k": (int, 1), "Qmax": (int, None), "Q0": (int, 0),
                "checkpoints": (str, ""), **_MC},
    "phi-contrast": {"x": (str, None), "d": (int, None), "Q0": (int, None),
                     "Qmax": (int, None), **_MC},
    "subspace": {"x": (str, None), "psi": (str, None), "d": (int, None),
                 "k": (int, 2), "Qmax": (int, None), "Q0": (int, 0), **_MC},
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diophlab",
        description="Certified Diophantine approximation experiments",
    )
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="subcommand", required=True)
    for name, schema in _SCHEMAS.items():
        sp = subs.add_parser(name)
        sp.add_argument("--config", type=str, default="")
        for field, (ftype, _default) in {**schema, **_COMMON}.items():
            flag = "--" + field.replace("_", "-")
            sp.add_argument(flag, dest=field, type=ftype, default=None)
    rp = subs.add_parser("replay")
    rp.add_argument("path", type=str)
    return parser


def _resolve_config(name: str, args: argparse.Namespace) -> Dict[str, Any]:
    """Merge config file with flags (flags win) and fill in defaults."""
    schema = {**_SCHEMAS[name], **_COMMON}
    file_cfg: Dict[str, Any] = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            file_cfg = json.load(fh)
        unknown = set(file_cfg) - set(schema) - {"subcommand"}
        if unknown:
            raise LiteralParseError(
                f"unknown config keys for {name}: {sorted(unknown)}"
            )
    resolved: Dict[str, Any] = {"subcommand": name}
    for field, (ftype, default) in schema.items():
        value = getattr(args, field, None)
        if value is None:
            value = file_cfg.get(field, default)
        if value is None:
            raise LiteralParseError(f"missing required option --{field} for {name}")
        resolved[field] = ftype(value)
    return resolved


def _result_payload(cfg: Dict[str, Any], out: RunOutput, wall: float) -> Dict[str, Any]:
    columns, table, verdicts = out
    return {
        "columns": columns,
        "config": cfg,
        "table": table,
        "verdicts": verdicts,
        "version": __version__,
        "wall_time_s": round(wall, 3),
    }


def _canonical_json(payload: Dict[str, Any]) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _emit(payload: Dict[str, Any]) -> None:
    cfg = payload["config"]
    out_path = cfg.get("out", "")
    if not out_path:
        sys.stdout.write(_canonical_json(payload))
        return
    if cfg.get("format", "json") == "csv":
        lines = [",".join(payload["columns"])]
        lines += [",".join(row) for row in payload["table"]]
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write("\n".join(lines) + "\n")
        with open(out_path + ".run.json", "w", encoding="utf-8") as fh:
            fh.write(_canonical_json(payload))
    else:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(_canonical_json(payload))


def run(cfg: Dict[str, Any]) -> Dict[str, Any]:
    """Execute one resolved config; returns the result payload."""
    name = cfg["subcommand"]
    if name not in _RUNNERS:
        raise LiteralParseError(f"unknown subcommand {name!r}")
    start = time.monotonic()
    out = _RUNNERS[name](cfg)
    return _result_payload(cfg, out, time.monotonic() - start)


def replay(path: str) -> Dict[str, Any]:
    """Re-execute a recorded run and assert the result is unchanged.

    Compares everything except wall time, field by field; any difference
    (including version or config-default drift) raises DriftDetected.
    """
    with open(path, "r", encoding="utf-8") as fh:
        recorded = json.load(fh)
    if "config" not in recorded:
        raise LiteralParseError(f"{path} does not contain a config echo")
    fresh = run(recorded["config"])
    drift: List[str] = []
    for key in ("version", "config", "columns", "verdicts", "table"):
        if recorded.get(key) != fresh.get(key):
            drift.append(
                f"{key}: recorded={recorded.get(key)!r} fresh={fresh.get(key)!r}"
            )
    if drift:
        raise DriftDetected("replay drift:\n" + "\n".join(drift))
    return fresh


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.subcommand == "replay":
            payload = replay(args.path)
            sys.stdout.write(_canonical_json({
                "replay": "identical",
                "source": args.path,
                "verdicts": payload["verdicts"],
            }))
            return 0
        cfg = _resolve_config(args.subcommand, args)
        payload = run(cfg)
        _emit(payload)
        return 0
    except (LiteralParseError, PreconditionViolated, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except PrecisionExhausted as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except DriftDetected as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
