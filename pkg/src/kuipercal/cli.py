"""Command-line interface.

    kuipercal metrics --input data.csv [--output report.json] [--seed 0 --seed 1 ...]
    kuipercal synth --q 9 --output synth.csv --oracle oracle.json
    kuipercal augment --train train.csv --eval eval.csv --rounds 3 --output out.csv

Exit status is 0 on success, 1 for invalid data or parameters, 2 for I/O errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from typing import Sequence

import numpy as np

from . import metrics, subpops, synthetic
from .augment import AugmentConfig, PredictorContractError, augment, reference_logistic_fitter
from .csvio import InputSchema, covariate_matrix, fmt, load_population, read_table, write_population, write_rows
from .dataset import (
    BERNOULLI,
    MODES,
    Population,
    ValidationError,
    WeightingScheme,
    apply_weighting,
    build_population,
)

logger = logging.getLogger("kuipercal")

DEFAULT_ELL = 1000
DEFAULT_MIN_SIZE = 10


def classification_error(pop: Population) -> float:
    """Weighted fraction of responses misclassified by thresholding scores at 0.5."""
    wrong = (pop.scores > 0.5) != (pop.responses == 1)
    return float(np.sum(pop.weights * wrong) / np.sum(pop.weights))


def _synthetic_views(pop: Population) -> list[metrics.SubpopulationView]:
    n = len(pop)
    q = int((np.sqrt(4 * n + 1) - 1) / 2)
    while q * (q + 1) < n:
        q += 1
    if q * (q + 1) != n or q % 2 == 0:
        raise ValidationError(f"{n} rows is not q(q+1) for an odd q; not a synthetic population")
    spec = synthetic.SyntheticSpec(q)
    scores, responses = synthetic.synth_arrays(spec)
    if not (np.array_equal(pop.scores, scores) and np.array_equal(pop.responses, responses)):
        raise ValidationError("--synthetic-subpops needs the population written by `synth`")
    return synthetic.synth_subpops(spec, pop)


def _run(pop: Population, views: list[metrics.SubpopulationView], paths: dict[int, str]) -> dict:
    report = metrics.multicalibration(pop, views)
    records = [dict(asdict(m), path=paths.get(m.label, "")) for m in report.per_subpop]
    summary = {
        "kuiper": report.kuiper,
        "multical": report.multical,
        "multi_ablate": report.multi_ablate,
        "expectation": report.expectation_at_argmax,
        "argmax_multical": report.argmax_multical,
        "argmax_ablate": report.argmax_ablate,
        "argmax_multical_path": paths.get(report.argmax_multical, ""),
        "argmax_ablate_path": paths.get(report.argmax_ablate, ""),
    }
    if pop.mode == BERNOULLI:
        summary["error"] = classification_error(pop)
    return {"subpopulations": records, "summary": summary}


def cmd_metrics(
    input_path: str,
    schema: InputSchema | None = None,
    ell: int = DEFAULT_ELL,
    min_size: int = DEFAULT_MIN_SIZE,
    weighting: WeightingScheme | None = None,
    mode: str = BERNOULLI,
    seeds: Sequence[int] = (0,),
    output_path: str | None = None,
    curve_output: str | None = None,
    synthetic_subpops: bool = False,
    max_attempts: int | None = None,
) -> dict:
    """Compute the report document for a CSV file.

    ``ell = 0`` disables subpopulation generation so only the full population
    is scored. ``weighting=None`` keeps the ingested weights.
    """
    schema = schema or InputSchema()
    seeds = sorted(set(seeds)) or [0]
    if ell < 0:
        raise ValidationError(f"ell must be nonnegative, got {ell}")
    table = read_table(input_path)
    pop, codes = load_population(table, schema, mode)
    if weighting is not None:
        pop = apply_weighting(pop, weighting)

    notes = []
    runs = []
    if synthetic_subpops:
        views = [metrics.SubpopulationView.full(pop)] + _synthetic_views(pop)
        paths = {v.label: f"synthetic middle blocks k={v.label}" for v in views[1:]}
        fixed = _run(pop, views, paths)
        runs = [dict(seed=s, **fixed) for s in seeds]
        generator = "synthetic"
    elif ell == 0:
        fixed = _run(pop, [metrics.SubpopulationView.full(pop)], {})
        runs = [dict(seed=s, **fixed) for s in seeds]
        generator = "disabled"
    else:
        generator = "random"
        for seed in seeds:
            cfg = subpops.GeneratorConfig(ell, min_size, seed, max_attempts)
            try:
                generated = subpops.generate(pop, cfg)
            except (ValidationError, subpops.GenerationExhausted) as exc:
                notes.append(f"seed {seed}: full population only ({exc})")
                generated = []
            paths = {g.label: subpops.describe_path(g.path, pop.covariate_names) for g in generated}
            run = _run(pop, subpops.views(pop, generated), paths)
            if 0 < len(generated) < ell:
                notes.append(f"seed {seed}: generated {len(generated)} of {ell} subpopulations")
            runs.append(dict(seed=seed, **run))

    doc = {
        "mode": pop.mode,
        "n0": len(pop),
        "ell": ell,
        "min_size": min_size,
        "seeds": seeds,
        "weighting": "as-given" if weighting is None else str(weighting),
        "generator": generator,
        "notes": notes,
        "nominal_codes": codes,
        "runs": runs,
    }
    if len(runs) >= 2:
        doc["aggregate"] = {
            key: asdict(metrics.aggregate_over_seeds([r["summary"][key] for r in runs]))
            for key in ("kuiper", "multical", "multi_ablate", "expectation")
        }
    if curve_output:
        c = metrics.cumulative_differences(metrics.SubpopulationView.full(pop))
        w = np.concatenate([[0.0], np.cumsum(pop.weights)])
        write_rows(curve_output, ["weight_fraction", "cumulative_difference"],
                   zip((w / w[-1]).tolist(), c.tolist()))
    if output_path:
        with open(output_path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    return doc


def cmd_synth(q: int, output_path: str, oracle_path: str | None = None) -> dict:
    """Write the synthetic population CSV and, optionally, its oracle document."""
    spec = synthetic.SyntheticSpec(q)
    pop = synthetic.synth_population(spec)
    orc = synthetic.oracle(spec)
    write_population(output_path, pop)
    doc = {"q": spec.q, "n0": spec.n0, "ell": spec.ell, **asdict(orc)}
    doc["dk"] = list(orc.dk)
    doc["sigma_k"] = list(orc.sigma_k)
    if oracle_path:
        with open(oracle_path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    return doc


def _kuiper_of(scores, responses, weights, mode) -> float:
    pop = build_population(scores, responses, weights, mode=mode)
    return metrics.kuiper(metrics.SubpopulationView.full(pop))


def cmd_augment(
    train_path: str,
    eval_path: str,
    schema: InputSchema | None = None,
    rounds: int = 3,
    output_path: str | None = None,
    mode: str = BERNOULLI,
    out=None,
) -> dict:
    """Augment with the reference logistic fitter and write eval rows plus ``final_score``."""
    schema = schema or InputSchema()
    out = out or sys.stdout
    cfg = AugmentConfig(reference_logistic_fitter(), rounds)
    train = read_table(train_path)
    ev = read_table(eval_path)
    schema.check(train)
    schema.check(ev, need_response=False)
    xt, names_t, _, _ = covariate_matrix(train, schema)
    xe, names_e, _, _ = covariate_matrix(ev, schema)
    if names_t != names_e:
        raise ValidationError(f"covariate columns differ: train {names_t}, eval {names_e}")
    final = augment(
        xt,
        train.column(schema.response_column),
        train.column(schema.score_column),
        cfg,
        xe,
        ev.column(schema.score_column),
    )
    if output_path:
        write_rows(
            output_path,
            [*ev.header, "final_score"],
            ([*row, float(s)] for row, s in zip(ev.rows, final)),
        )
    result: dict = {"rounds": rounds, "n_eval": len(ev.rows)}
    if ev.has(schema.response_column):
        r = ev.column(schema.response_column)
        w = ev.column(schema.weight_column) if schema.weight_column else None
        result["kuiper_before"] = _kuiper_of(ev.column(schema.score_column), r, w, mode)
        result["kuiper_after"] = _kuiper_of(final, r, w, mode)
        print(f"Kuiper before: {fmt(result['kuiper_before'])}", file=out)
        print(f"Kuiper after:  {fmt(result['kuiper_after'])}", file=out)
    else:
        print(
            f"notice: {eval_path} has no {schema.response_column!r} column; "
            "Kuiper summary omitted",
            file=out,
        )
    return result


def render(doc: dict) -> str:
    """Plain-text table rendering of a metrics report document."""
    lines = [
        f"mode={doc['mode']} n0={doc['n0']} ell={doc['ell']} m={doc['min_size']} "
        f"weighting={doc['weighting']} generator={doc['generator']}"
    ]
    for note in doc["notes"]:
        lines.append(f"note: {note}")
    keys = ["error", "kuiper", "multical", "multi_ablate", "expectation"]
    for run in doc["runs"]:
        s = run["summary"]
        cells = "  ".join(f"{k}={s[k]:.6g}" for k in keys if k in s)
        lines.append(f"seed {run['seed']}: {cells}  argmax={s['argmax_multical']}")
        if s["argmax_multical_path"]:
            lines.append(f"    multi-cal. argmax path: {s['argmax_multical_path']}")
    for key, agg in doc.get("aggregate", {}).items():
        lines.append(f"{key}: {agg['mean']:.6g} ± {agg['twice_sem']:.2g} (n={agg['count']})")
    return "\n".join(lines)


def _schema(args) -> InputSchema:
    nominal = set()
    for item in args.nominal or []:
        nominal.update(n.strip() for n in item.split(",") if n.strip())
    return InputSchema(args.score_col, args.response_col, args.weight_col, frozenset(nominal))


def _add_schema_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--score-col", default="score")
    p.add_argument("--response-col", default="response")
    p.add_argument("--weight-col", default=None)
    p.add_argument("--nominal", action="append", metavar="COL[,COL...]",
                   help="nominal covariate column(s); repeatable")
    p.add_argument("--mode", choices=MODES, default=BERNOULLI)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kuipercal", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("metrics", help="calibration and multi-calibration report for a CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--output", help="report file (JSON); printed to stdout when omitted")
    _add_schema_flags(p)
    p.add_argument("--ell", type=int, default=DEFAULT_ELL,
                   help="number of subpopulations to generate; 0 disables generation")
    p.add_argument("--min-size", type=int, default=DEFAULT_MIN_SIZE)
    p.add_argument("--seed", type=int, action="append", help="repeatable; default 0")
    p.add_argument("--max-attempts", type=int, default=None)
    p.add_argument("--weighting", default=None,
                   help="uniform|proportional|proportional-clamped=RHO|"
                        "proportional-shifted=RHO|low-prevalence (default: keep input weights)")
    p.add_argument("--curve-out", help="write the full population's cumulative differences")
    p.add_argument("--synthetic-subpops", action="store_true",
                   help="score the canonical subpopulations of a `synth` population")

    p = sub.add_parser("synth", help="write the synthetic population and its exact metrics")
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--oracle", help="oracle document (JSON)")

    p = sub.add_parser("augment", help="augmentation with the reference logistic fitter")
    p.add_argument("--train", required=True)
    p.add_argument("--eval", required=True)
    p.add_argument("--rounds", type=int, default=3)
    p.add_argument("--output", required=True)
    _add_schema_flags(p)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        if args.command == "metrics":
            doc = cmd_metrics(
                args.input,
                _schema(args),
                ell=args.ell,
                min_size=args.min_size,
                weighting=WeightingScheme.parse(args.weighting) if args.weighting else None,
                mode=args.mode,
                seeds=args.seed or [0],
                output_path=args.output,
                curve_output=args.curve_out,
                synthetic_subpops=args.synthetic_subpops,
                max_attempts=args.max_attempts,
            )
            if args.output:
                print(render(doc))
            else:
                json.dump(doc, sys.stdout, indent=2)
                print()
        elif args.command == "synth":
            doc = cmd_synth(args.q, args.output, args.oracle)
            print(f"wrote {doc['n0']} rows to {args.output}; D_0 = {fmt(doc['d0'])}")
        else:
            cmd_augment(args.train, args.eval, _schema(args), args.rounds, args.output, args.mode)
    except (ValidationError, metrics.DegenerateSigmaError, PredictorContractError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
