"""Command-line interface: batch workflows over the package's file formats.

Subcommands
-----------
process   ratings.csv -> mos.csv + screening_report.json
fit       mos.csv -> params.json + fit_report.json
predict   params.json + grid spec -> predictions.csv
curves    params.json -> per-component curve CSVs
validate  predictions.csv + mos.csv -> metrics.json
anova     mos.csv -> anova.json (+ aligned table on stdout)
adapt     params.json + rates.csv + budget -> selection.json

Exit codes: 0 success, 1 data error, 2 numerical failure. Errors are
emitted as JSON payloads on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .adaptation import CandidateGrid, select_star
from .errors import (
    DataError,
    InfeasibleBudgetError,
    MissingAnchorError,
    NumericalError,
    QStarError,
    UnbalancedDesignError,
)
from .fitting import fit_sequence
from .io import (
    ParamsFile,
    file_sha256,
    fmt,
    read_config,
    read_mos_csv,
    read_params_json,
    read_predictions_csv,
    read_rates_csv,
    read_ratings_csv,
    write_json,
    write_mos_csv,
    write_params_json,
    write_predictions_csv,
)
from .model import (
    SequenceParams,
    ShapeConstants,
    StarPoint,
    inverse_exponential,
    l_of_qp,
    qp_from_qs,
    qstar_components,
)
from .pipeline import PipelineConfig, StarLabel, process_ratings
from .stats import anova3, pcc, rmse


def _constants_from_config(cfg: dict) -> ShapeConstants:
    kwargs = {}
    for key, value in cfg.items():
        if key.startswith("constants."):
            kwargs[key.removeprefix("constants.")] = value
    return ShapeConstants(**kwargs)


def _load_config(path: str | None) -> dict:
    return read_config(path) if path else {}


# ---------------------------------------------------------------------------
# process
# ---------------------------------------------------------------------------


def _cmd_process(args) -> int:
    cfg = _load_config(args.config)
    pipeline_cfg = PipelineConfig.from_mapping(
        {k: v for k, v in cfg.items() if k.startswith("pipeline.")}
    )
    records = read_ratings_csv(args.ratings)
    table, report = process_ratings(records, pipeline_cfg)
    write_mos_csv(args.out_mos, table)
    write_json(args.out_report, report)
    print(f"wrote {args.out_mos} ({len(table.cells)} cells) and {args.out_report}")
    return 0


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------


def _cmd_fit(args) -> int:
    cfg = _load_config(args.config)
    consts = _constants_from_config(cfg)
    table = read_mos_csv(args.mos)
    sequences = table.sequences()

    fitted: dict[str, dict] = {}
    params_out: dict[str, dict] = {}
    errors: dict[str, str] = {}
    refs: tuple[float, float, float] | None = None
    for seq in sequences:
        cells = table.cells_for(seq)
        seq_refs = (
            max(k[0] for k in cells),
            max(k[1] for k in cells),
            min(k[2] for k in cells),
        )
        try:
            if refs is not None and seq_refs != refs:
                raise DataError(
                    f"sequence {seq!r} has references {seq_refs}, expected {refs}; "
                    "fit sequences with differing grids separately"
                )
            params, report = fit_sequence(table, seq, consts, refine_joint=args.refine_joint)
        except QStarError as e:
            errors[seq] = str(e)
            continue
        refs = seq_refs
        labels = table.labels_for(seq)
        cis = [c.ci_halfwidth for c in labels.values() if c.ci_halfwidth is not None]
        max_mos = max(c.mos for c in labels.values())
        avg_ci = (sum(cis) / len(cis) / max_mos) if cis else None
        params_out[seq] = asdict(params)
        fitted[seq] = {
            **asdict(params),
            "pcc": report.pcc,
            "rmse": report.rmse,
            "avg_ci": avg_ci,
            "n_cells": len(cells),
            "iterations": report.iterations,
            "converged": report.converged,
        }
    if not fitted:
        details = "; ".join(f"{seq}: {msg}" for seq, msg in errors.items())
        raise DataError(f"no sequence could be fitted: {details}")

    provenance = {}
    if not args.no_provenance:
        provenance = {
            "created": datetime.now(timezone.utc).isoformat(),
            "input": str(args.mos),
            "input_sha256": file_sha256(args.mos),
            "tool": f"qstar {__version__}",
        }
    params_file = ParamsFile(
        references={"s_max": refs[0], "t_max": refs[1], "q_min": refs[2]},
        constants=consts,
        sequences={
            seq: SequenceParams(
                alpha_q=vals["alpha_q"],
                alpha_s_hat=vals["alpha_s_hat"],
                alpha_t=vals["alpha_t"],
            )
            for seq, vals in params_out.items()
        },
        provenance=provenance,
    )
    write_params_json(args.out_params, params_file)

    report_obj = {
        "sequences": fitted,
        "average": {
            "pcc": sum(v["pcc"] for v in fitted.values()) / len(fitted),
            "rmse": sum(v["rmse"] for v in fitted.values()) / len(fitted),
        },
        "errors": errors,
    }
    write_json(args.out_report, report_obj)
    print(
        f"fitted {len(fitted)}/{len(sequences)} sequences; "
        f"wrote {args.out_params} and {args.out_report}"
    )
    if errors:
        print(f"failed sequences: {sorted(errors)}", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# predict / curves
# ---------------------------------------------------------------------------


def _parse_resolutions(raw: str) -> list[tuple[int, int]]:
    out = []
    for part in raw.split(","):
        part = part.strip().lower()
        try:
            w, h = part.split("x")
            out.append((int(w), int(h)))
        except ValueError:
            raise DataError(f"cannot parse resolution {part!r} (expected WIDTHxHEIGHT)") from None
    return out


def _parse_floats(raw: str, name: str) -> list[float]:
    try:
        return [float(v) for v in raw.split(",")]
    except ValueError:
        raise DataError(f"cannot parse {name} list {raw!r}") from None


def _cmd_predict(args) -> int:
    pf = read_params_json(args.params)
    s_max = pf.references["s_max"]
    t_max = pf.references["t_max"]
    q_min = pf.references["q_min"]
    sequences = sorted(args.sequence) if args.sequence else sorted(pf.sequences)
    unknown = [s for s in sequences if s not in pf.sequences]
    if unknown:
        raise DataError(f"sequences not in {args.params}: {unknown}")
    resolutions = _parse_resolutions(args.resolutions)
    fps_list = _parse_floats(args.fps, "fps")
    qp_list = _parse_floats(args.qps, "qp")

    rows = []
    for seq in sequences:
        params = pf.sequences[seq]
        for (w, h) in sorted(resolutions, key=lambda wh: (wh[0] * wh[1], wh)):
            for fps in sorted(fps_list):
                for qp in sorted(qp_list):
                    label = StarLabel(w, h, fps, qp)
                    problems = []
                    if label.s > s_max:
                        problems.append(f"s={fmt(label.s)} exceeds s_max={fmt(s_max)}")
                    if label.t > t_max:
                        problems.append(f"t={fmt(label.t)} exceeds t_max={fmt(t_max)}")
                    if label.q < q_min:
                        problems.append(f"q={fmt(label.q)} below q_min={fmt(q_min)}")
                    if problems:
                        rows.append(
                            {
                                "sequence_id": seq,
                                "label": label,
                                "warning": "outside validity range: " + "; ".join(problems),
                            }
                        )
                        continue
                    point = StarPoint(label.s, label.t, label.q, s_max, t_max, q_min)
                    fq, fs, ft = qstar_components(point, params, pf.constants)
                    rows.append(
                        {
                            "sequence_id": seq,
                            "label": label,
                            "mnqq": fq,
                            "mnqs": fs,
                            "mnqt": ft,
                            "qstar": fq * fs * ft,
                        }
                    )
    write_predictions_csv(args.out, rows)
    flagged = sum(1 for r in rows if r.get("warning"))
    print(f"wrote {args.out} ({len(rows)} rows, {flagged} flagged)")
    return 0


def _cmd_curves(args) -> int:
    pf = read_params_json(args.params)
    if args.samples < 50:
        raise DataError(f"curve sampling needs >= 50 x-values, got {args.samples}")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    xs = [i / args.samples for i in range(1, args.samples + 1)]
    qp_list = _parse_floats(args.qps, "qp")
    consts = pf.constants

    with (out_dir / "curves_nqt.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sequence_id", "x", "mnqt"])
        for seq in sorted(pf.sequences):
            alpha_t = pf.sequences[seq].alpha_t
            for x in xs:
                writer.writerow([seq, fmt(x), fmt(inverse_exponential(x, alpha_t, consts.beta_t))])
    with (out_dir / "curves_nqq.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sequence_id", "x", "mnqq"])
        for seq in sorted(pf.sequences):
            alpha_q = pf.sequences[seq].alpha_q
            for x in xs:
                writer.writerow([seq, fmt(x), fmt(inverse_exponential(x, alpha_q, consts.beta_q))])
    with (out_dir / "curves_nqs.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sequence_id", "qp", "x", "mnqs"])
        for seq in sorted(pf.sequences):
            ahat = pf.sequences[seq].alpha_s_hat
            for qp in sorted(qp_list):
                alpha_s = ahat * l_of_qp(qp, consts)
                for x in xs:
                    writer.writerow(
                        [seq, fmt(qp), fmt(x), fmt(inverse_exponential(x, alpha_s, consts.beta_s))]
                    )
    print(f"wrote curves_nqs.csv, curves_nqq.csv, curves_nqt.csv in {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# validate / anova / adapt
# ---------------------------------------------------------------------------


def _cmd_validate(args) -> int:
    predictions = read_predictions_csv(args.predictions)
    table = read_mos_csv(args.mos)

    measured: dict[tuple[str, StarLabel], float] = {}
    for seq in table.sequences():
        labels = table.labels_for(seq)
        s_max = max(l.s for l in labels)
        t_max = max(l.t for l in labels)
        q_min = min(l.q for l in labels)
        anchor = next(
            (l for l in labels if l.s == s_max and l.t == t_max and l.q == q_min), None
        )
        if anchor is None:
            raise MissingAnchorError(seq, s_max, t_max, q_min)
        anchor_mos = labels[anchor].mos
        for label, cell in labels.items():
            measured[(seq, label)] = cell.mos / anchor_mos

    missing = sorted(set(measured) - set(predictions))
    extra = sorted(set(predictions) - set(measured))
    if missing or extra:
        raise DataError(
            "prediction/measurement key mismatch; "
            f"missing from predictions: {[(s, tuple(l)) for s, l in missing[:5]]}, "
            f"not in measurements: {[(s, tuple(l)) for s, l in extra[:5]]}"
        )
    keys = sorted(measured)
    xs = [predictions[k] for k in keys]
    ys = [measured[k] for k in keys]
    metrics = {"pcc": pcc(xs, ys), "rmse": rmse(xs, ys), "n": len(keys)}
    write_json(args.out, metrics)
    print(f"pcc={metrics['pcc']:.6g} rmse={metrics['rmse']:.6g} n={metrics['n']}")
    return 0


def _cmd_anova(args) -> int:
    table = read_mos_csv(args.mos)
    cells: dict[tuple, list[float]] = {}
    for (seq, label), cell in table.cells.items():
        if args.sequence and seq != args.sequence:
            continue
        if not cell.scores:
            raise DataError(
                f"cell {seq!r} {tuple(label)} carries no per-viewer scores; "
                "ANOVA needs a MOS table produced by 'qstar process'"
            )
        cells.setdefault((label.qp, label.s, label.t), []).extend(cell.scores)
    if not cells:
        raise DataError("no cells selected for ANOVA")
    result = anova3(cells, factor_names=("QS", "SR", "TR"))
    obj = {
        "factors": ["QS", "SR", "TR"],
        "rows": [
            {
                "effect": r.effect,
                "ss": r.ss,
                "df": r.df,
                "ms": r.ms,
                "f": r.f,
                "p": r.p,
            }
            for r in result.rows
        ],
    }
    write_json(args.out, obj)
    print(result.format())
    return 0


def _cmd_adapt(args) -> int:
    pf = read_params_json(args.params)
    if args.sequence not in pf.sequences:
        raise DataError(f"sequence {args.sequence!r} not in {args.params}")
    rates = read_rates_csv(args.rates)

    by_s: dict[float, tuple[int, int]] = {}
    for label in rates:
        wh = (label.width, label.height)
        if label.s in by_s and by_s[label.s] != wh:
            raise DataError(
                f"ambiguous spatial level {fmt(label.s)}: "
                f"{by_s[label.s]} vs {wh} pixels"
            )
        by_s[label.s] = wh
    lookup = {(label.s, label.t, label.q): rate for label, rate in rates.items()}
    grid = CandidateGrid(
        s_levels=tuple(sorted({l.s for l in rates})),
        t_levels=tuple(sorted({l.t for l in rates})),
        q_levels=tuple(sorted({l.q for l in rates})),
        s_max=pf.references["s_max"],
        t_max=pf.references["t_max"],
        q_min=pf.references["q_min"],
    )

    def rate_of(s: float, t: float, q: float) -> float:
        try:
            return lookup[(s, t, q)]
        except KeyError:
            raise DataError(
                f"rate table has no entry for (s={fmt(s)}, t={fmt(t)}, "
                f"q={fmt(q)}); rate tables are not interpolated"
            ) from None

    selection = select_star(
        grid, pf.sequences[args.sequence], pf.constants, rate_of, args.budget
    )
    w, h = by_s[selection.point.s]
    obj = {
        "sequence_id": args.sequence,
        "budget": args.budget,
        "width": w,
        "height": h,
        "fps": selection.point.t,
        "qp": qp_from_qs(selection.point.q),
        "s": selection.point.s,
        "t": selection.point.t,
        "q": selection.point.q,
        "quality": selection.quality,
        "rate": selection.rate,
    }
    write_json(args.out, obj)
    print(
        f"selected {w}x{h} @ {fmt(selection.point.t)}Hz QP{fmt(qp_from_qs(selection.point.q))}: "
        f"quality={selection.quality:.4f} rate={fmt(selection.rate)}"
    )
    return 0


# ---------------------------------------------------------------------------
# parser / entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qstar",
        description="Perceptual quality model toolkit: rating pipeline, fitting, "
        "validation and rate-constrained adaptation.",
    )
    parser.add_argument("--version", action="version", version=f"qstar {__version__}")
    parser.add_argument(
        "--seed",
        type=int,
        default=None,
        help="seed for synthetic-data harnesses layered on this CLI; "
        "the commands themselves are deterministic",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("process", help="ratings CSV -> MOS CSV + screening report")
    p.add_argument("ratings")
    p.add_argument("--config", default=None)
    p.add_argument("--out-mos", default="mos.csv")
    p.add_argument("--out-report", default="screening_report.json")
    p.set_defaults(func=_cmd_process)

    p = sub.add_parser("fit", help="MOS CSV -> parameters JSON + fit report")
    p.add_argument("mos")
    p.add_argument("--config", default=None)
    p.add_argument("--out-params", default="params.json")
    p.add_argument("--out-report", default="fit_report.json")
    p.add_argument("--refine-joint", action="store_true")
    p.add_argument(
        "--no-provenance",
        action="store_true",
        help="omit timestamp/hash provenance for byte-reproducible output",
    )
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("predict", help="evaluate the model over a grid")
    p.add_argument("params")
    p.add_argument("--sequence", action="append", default=None)
    p.add_argument("--resolutions", required=True, help="e.g. 176x144,352x288,704x576")
    p.add_argument("--fps", required=True, help="e.g. 7.5,15,30")
    p.add_argument("--qps", required=True, help="e.g. 28,36,44")
    p.add_argument("--out", default="predictions.csv")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("curves", help="sample the component curves for plotting")
    p.add_argument("params")
    p.add_argument("--out-dir", default="curves")
    p.add_argument("--samples", type=int, default=64)
    p.add_argument("--qps", default="28,36,44", help="QPs for the spatial curves")
    p.set_defaults(func=_cmd_curves)

    p = sub.add_parser("validate", help="compare predictions with measured MOS")
    p.add_argument("predictions")
    p.add_argument("mos")
    p.add_argument("--out", default="metrics.json")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("anova", help="three-way ANOVA of MOS replicates")
    p.add_argument("mos")
    p.add_argument("--sequence", default=None)
    p.add_argument("--out", default="anova.json")
    p.set_defaults(func=_cmd_anova)

    p = sub.add_parser("adapt", help="pick the best operating point under a rate budget")
    p.add_argument("params")
    p.add_argument("rates")
    p.add_argument("--budget", type=float, required=True)
    p.add_argument("--sequence", required=True)
    p.add_argument("--out", default="selection.json")
    p.set_defaults(func=_cmd_adapt)
    return parser


def _error_payload(exc: QStarError) -> dict:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, MissingAnchorError):
        payload["sequence_id"] = exc.sequence_id
        payload["cell"] = list(exc.cell)
    if isinstance(exc, InfeasibleBudgetError):
        payload["budget"] = exc.budget
        payload["min_rate"] = exc.min_rate
    if isinstance(exc, UnbalancedDesignError):
        payload["cells"] = [list(c) if isinstance(c, tuple) else c for c in exc.cells]
    return payload


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericalError as e:
        print(json.dumps(_error_payload(e)), file=sys.stderr)
        return 2
    except QStarError as e:
        print(json.dumps(_error_payload(e)), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
