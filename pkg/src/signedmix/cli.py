"""Command-line entry point: ``signedmix <command> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench
from .components import Family, make_rng
from .errors import GenerationFailed, ModelFormatError, ParameterDomain, PartitionOverflow, SignedMixError
from .invcdf import DEFAULT_PRECISION, build_table, sample_invcdf_batch
from .model import format_model, load_model, save_model, validate_model, vanilla_sample_batch
from .modelgen import K_RANGES, P_RANGES, GenSpec, generate
from .pair import a_star
from .pairing import optimal_pairing, sample_mixture_batch

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_GENERATION = 3
EXIT_OVERFLOW = 4


def _k_range(text: str) -> tuple[int, int]:
    lo, _, hi = text.replace(",", "-").partition("-")
    rng = (int(lo), int(hi))
    if rng not in K_RANGES:
        raise argparse.ArgumentTypeError(f"k-range must be one of {', '.join(f'{a}-{b}' for a, b in K_RANGES)}")
    return rng


def _p_range(text: str) -> tuple[float, float]:
    lo, _, hi = text.partition(",")
    rng = (float(lo), float(hi))
    if rng not in P_RANGES:
        raise argparse.ArgumentTypeError(f"p-range must be one of {', '.join(f'{a:g},{b:g}' for a, b in P_RANGES)}")
    return rng


def _load_valid(path: str):
    model = load_model(path)
    report = validate_model(model)
    if not report.ok:
        print(f"{path}: invalid model: {'; '.join(report.failures)}", file=sys.stderr)
        return None
    return model


def cmd_validate(args) -> int:
    try:
        model = load_model(args.model)
    except ModelFormatError as exc:
        print(f"{args.model}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    report = validate_model(model)
    print(report)
    return EXIT_OK if report.ok else EXIT_VALIDATION


def cmd_sample(args) -> int:
    model = _load_valid(args.model)
    if model is None:
        return EXIT_VALIDATION
    rng = make_rng(args.seed)
    if args.method == "vanilla":
        draws, props = vanilla_sample_batch(model, args.n, rng)
    elif args.method == "stratified":
        pairing = optimal_pairing(model, args.delta, args.eps)
        draws, props = sample_mixture_batch(model, pairing, args.n, rng)
        if args.dump_pairing:
            Path(args.dump_pairing).write_text(pairing.dump())
        if args.dump_partitions:
            out = []
            for k, st in enumerate(pairing.strategies):
                if st == "stratified":
                    e = pairing.entries[k]
                    out.append(f"# pair {e.i + 1} {e.j + 1}\n" + pairing.partition(k).dump())
            Path(args.dump_partitions).write_text("".join(out))
    else:
        table = build_table(model, precision=args.precision)
        draws = sample_invcdf_batch(model, table, args.n, rng)
        props = np.ones(args.n, dtype=np.int64)
    text = "".join(f"{x:.17g}\n" for x in draws)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    print(f"accepted {draws.size} proposed {int(props.sum())} rate {draws.size / props.sum():.6g}", file=sys.stderr)
    return EXIT_OK


def cmd_compare(args) -> int:
    model = _load_valid(args.model)
    if model is None:
        return EXIT_VALIDATION
    config = bench.RunConfig(
        model=model,
        label=args.label or model.family.value,
        methods=tuple(args.methods.split(",")),
        deltas=bench.parse_floats(args.deltas),
        eps=bench.parse_floats(args.eps),
        ns=tuple(int(v) for v in args.ns.split(",")),
        seed=args.seed,
        precision=args.precision,
        parallel=args.parallel,
    )
    if args.parallel:
        print("note: cells ran concurrently; wall times are not comparable", file=sys.stderr)
    result = bench.run_compare(config)
    text = result.to_tsv(timing=not args.no_timing)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    for c in result.errors:
        print(f"cell {c.method} delta={c.delta} eps={c.eps} n={c.n}: {c.error}", file=sys.stderr)
    if any(c.error and c.error.startswith("PartitionOverflow") for c in result.cells):
        return EXIT_OVERFLOW
    return EXIT_OK


def cmd_generate(args) -> int:
    out_dir = Path(args.out_dir) if args.out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    for k in range(args.count):
        spec = GenSpec(Family(args.family), args.k_range, args.p_range, args.method, args.seed + k)
        model = generate(spec)
        header = [spec.manifest(model.P)]
        if out_dir:
            save_model(model, out_dir / f"model_{k:04d}.txt", header)
        else:
            sys.stdout.write(format_model(model, header))
    return EXIT_OK


def cmd_alternating(args) -> int:
    family = Family(args.family)
    model = bench.build_alternating_model(family, args.K)
    K = model.P
    header = [f"alternating family={args.family} K={K} vanilla_acceptance={model.vanilla_acceptance:.6g}"]
    # a* from the closed form next to the printed shortcut, which disagrees
    for k in range(1, K + 1):
        f, g = bench.alternating_pair(family, k)
        header.append(f"k={k} a_star={a_star(f, g):.10g} printed={bench.printed_a_star(family, k):.10g}")
    if args.out:
        save_model(model, args.out, header)
    else:
        sys.stdout.write(format_model(model, header))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="signedmix", description="Exact sampling from signed mixtures.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", help="check normalisation and positivity of a model file")
    s.add_argument("model")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("sample", help="draw from a model")
    s.add_argument("model")
    s.add_argument("--method", choices=bench.METHODS, default="stratified")
    s.add_argument("--delta", type=float, default=0.6)
    s.add_argument("--eps", type=float, default=0.2)
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--precision", type=float, default=DEFAULT_PRECISION)
    s.add_argument("--out")
    s.add_argument("--dump-pairing", metavar="PATH")
    s.add_argument("--dump-partitions", metavar="PATH")
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("compare", help="benchmark the samplers on a model")
    s.add_argument("model")
    s.add_argument("--methods", default=",".join(bench.METHODS))
    s.add_argument("--deltas", default=",".join(map(str, bench.DEFAULT_DELTAS)))
    s.add_argument("--eps", default=",".join(map(str, bench.DEFAULT_EPS)))
    s.add_argument("--ns", default=",".join(map(str, bench.DEFAULT_NS)))
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--precision", type=float, default=DEFAULT_PRECISION)
    s.add_argument("--label")
    s.add_argument("--out")
    s.add_argument("--parallel", action="store_true")
    s.add_argument("--no-timing", action="store_true", help="omit wall-time columns")
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("generate", help="write random benchmark models")
    s.add_argument("--family", choices=[f.value for f in Family], required=True)
    s.add_argument("--k-range", type=_k_range, default=(5, 10))
    s.add_argument("--p-range", type=_p_range, default=(0.01, 0.05))
    s.add_argument("--method", type=int, choices=(1, 2), default=1)
    s.add_argument("--count", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out-dir")
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("alternating", help="write an alternating benchmark fixture")
    s.add_argument("--family", choices=[f.value for f in Family], required=True)
    s.add_argument("--K", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_alternating)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ModelFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except GenerationFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GENERATION
    except PartitionOverflow as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OVERFLOW
    except (ParameterDomain, SignedMixError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
