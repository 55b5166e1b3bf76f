"""Command-line surface: segment, analyze-filter, enumerate, verify, bench."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .automaton import AmConfig, DetectMode, run
from .domain import Boundary, DomainSpec, LabelField
from .io import (
    ENV_OUTPUT_DIR,
    RunConfig,
    make_blob_image,
    parse_config,
    random_init,
    read_image,
    read_taps_file,
    write_labels,
    write_trajectory_csv,
)
from .operators import CircularConv, NoncircularStar, VotingOperator
from .skew import SoftThresholdSpec, background_skew, zero_skew
from .spectral import (
    Filter,
    GaussianSpec,
    GuaranteeTier,
    analyze_filter,
    periodized_gaussian,
    sampled_gaussian,
)
from .verify import enumerate_all, theorem_suite

TIER_EXIT_CODES = {
    GuaranteeTier.ALWAYS_CONVERGES: 0,
    GuaranteeTier.ONE_OR_TWO_CYCLE: 1,
    GuaranteeTier.NO_GUARANTEE: 2,
}


def _parse_dims(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.lower().split("x"))
    except ValueError:
        raise SystemExit(f"error: bad domain '{text}', expected e.g. 8 or 4x4")


def _circular_filter(name: str, domain: DomainSpec, scale: float) -> Filter:
    if name == "dirac":
        return Filter.dirac(domain)
    if name in ("box", "box3", "box3x3", "moore"):
        if name == "box3" and domain.ndim != 1:
            raise SystemExit("error: box3 is the 1-D box; use box3x3 for 2-D")
        if name in ("box3x3", "moore") and domain.ndim != 2:
            raise SystemExit(f"error: {name} needs a 2-D domain")
        return Filter.box(domain, radius=1)
    if name in ("plus", "vonneumann"):
        return Filter.plus(domain)
    if name == "gaussian":
        return periodized_gaussian(domain, GaussianSpec(scale))
    if name.startswith("taps:"):
        kernel = read_taps_file(name[len("taps:"):])
        return Filter.from_taps(domain, kernel)
    raise SystemExit(f"error: unknown filter '{name}'")


def _centered_kernel(name: str, ndim: int, scale: float) -> np.ndarray:
    if name == "dirac":
        kernel = np.zeros((1,) * ndim)
        kernel[(0,) * ndim] = 1.0
        return kernel
    if name in ("box", "box3", "box3x3", "moore"):
        return np.ones((3,) * ndim)
    if name in ("plus", "vonneumann"):
        kernel = np.zeros((3,) * ndim)
        center = (1,) * ndim
        kernel[center] = 1.0
        for axis in range(ndim):
            for step in (-1, 1):
                pos = list(center)
                pos[axis] += step
                kernel[tuple(pos)] = 1.0
        return kernel
    if name == "gaussian":
        return sampled_gaussian(GaussianSpec(scale), ndim=ndim)
    if name.startswith("taps:"):
        return read_taps_file(name[len("taps:"):])
    raise SystemExit(f"error: unknown filter '{name}'")


def build_operator(name: str, domain: DomainSpec, scale: float) -> VotingOperator:
    """Realize a named filter as a voting operator on the given domain."""
    if domain.is_circular:
        filt = _circular_filter(name, domain, scale)
        if name == "gaussian":
            # averaging preset: unit tap mass so votes stay in [0, 1]
            filt = filt.normalized()
        return CircularConv(filt)
    kernel = _centered_kernel(name, domain.ndim, scale)
    if name == "gaussian":
        line = sampled_gaussian(GaussianSpec(scale), ndim=1)
        return NoncircularStar(kernel, domain, axis_factors=[line] * domain.ndim)
    return NoncircularStar(kernel, domain)


def _load_image(config: RunConfig):
    if config.image is not None:
        return read_image(config.image, config.boundary)
    return make_blob_image(dims=config.fixture_size, num_blobs=config.fixture_blobs,
                           seed=config.fixture_seed, boundary=config.boundary)


def _assemble(config: RunConfig):
    image = _load_image(config)
    domain = image.domain
    operator = build_operator(config.filter_kind, domain, config.scale)
    if config.skew_kind == "zero":
        skews = zero_skew(domain, config.labels)
    else:
        window_scale = config.skew_scale if config.skew_scale is not None else config.scale
        spec = SoftThresholdSpec(
            window=GaussianSpec(window_scale),
            threshold=config.theta,
            sharpness=config.sharpness,
            amplitude=config.amplitude,
        )
        skews = background_skew(image, spec, config.labels)
    return image, operator, skews


def _segment_once(config: RunConfig, seed: int, out_dir: Path, tag: str = "") -> int:
    _, operator, skews = _assemble(config)
    am = AmConfig(operator, skews, max_iterations=config.max_iterations,
                  detect_mode=DetectMode.LAST_TWO)
    state0 = random_init(operator.domain, config.labels, seed)
    checkpoints = set(config.checkpoints)

    def save_state(iteration: int, state: LabelField) -> None:
        if iteration in checkpoints:
            write_labels(state, out_dir / f"labels{tag}_iter{iteration:04d}.pgm")

    report = run(state0, am, on_state=save_state)
    write_labels(report.final_state, out_dir / f"labels{tag}_final.pgm")
    write_trajectory_csv(report.records, out_dir / f"trajectory{tag}.csv")
    status = "converged" if report.converged else (
        f"cycle length {report.cycle_length}" if report.cycle_length else
        "no repetition within budget")
    print(f"run{tag or ' '}: {status} after {report.iterations_run} iterations, "
          f"transient {report.transient}, "
          f"final boundary crossings {report.trace[-1]}")
    return 0 if report.converged else 1


def _cmd_segment(args) -> int:
    config = _override_config(parse_config(args.config), args)
    out_dir = Path(args.out) if args.out else config.output_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    return _segment_once(config, config.seed, out_dir)


def _cmd_bench(args) -> int:
    config = _override_config(parse_config(args.config), args)
    out_dir = Path(args.out) if args.out else config.output_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    worst = 0
    for r in range(args.runs):
        code = _segment_once(config, config.seed + r, out_dir, tag=f"_run{r}")
        worst = max(worst, code)
    return worst


def _override_config(config: RunConfig, args) -> RunConfig:
    from dataclasses import replace

    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "max_iters", None) is not None:
        overrides["max_iterations"] = args.max_iters
    if getattr(args, "scale", None) is not None:
        overrides["scale"] = args.scale
    if getattr(args, "labels", None) is not None:
        overrides["labels"] = args.labels
    if getattr(args, "boundary", None) is not None:
        overrides["boundary"] = Boundary(args.boundary)
    return replace(config, **overrides) if overrides else config


def _cmd_analyze_filter(args) -> int:
    domain = DomainSpec(_parse_dims(args.domain), Boundary.CIRCULAR)
    filt = _circular_filter(args.filter, domain, args.scale)
    report = analyze_filter(filt)
    print(f"domain={'x'.join(str(d) for d in domain.dims)}")
    print(f"is_even={report.is_even}")
    print(f"min_spectrum={report.min_spectrum:.12g}")
    print(f"max_imag={report.max_imag:.3g}")
    print(f"is_nonnegative={report.is_nonnegative}")
    print(f"is_diag_dominant={report.is_diag_dominant}")
    print(f"tier={report.tier.value}")
    return TIER_EXIT_CODES[report.tier]


def _cmd_enumerate(args) -> int:
    boundary = Boundary(args.boundary)
    domain = DomainSpec(_parse_dims(args.domain), boundary)
    operator = build_operator(args.filter, domain, args.scale)
    config = AmConfig(operator, zero_skew(domain, args.labels))
    report = enumerate_all(config, budget=args.budget)
    print(f"states_enumerated={report.states_enumerated}")
    print(f"max_transient={report.max_transient}")
    for k in sorted(report.cycle_length_histogram):
        print(f"cycle_length[{k}]={report.cycle_length_histogram[k]}")
    for k in sorted(report.witnesses):
        state = ",".join(str(v) for v in report.witnesses[k].flat)
        print(f"witness[{k}]={state}")
    return 0


def _cmd_verify(args) -> int:
    report = theorem_suite(seed=args.seed, quick=args.quick)
    for line in report.to_lines():
        print(line)
    if args.out is not None and report.long_cycle_witnesses:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        lines = []
        for w in report.long_cycle_witnesses:
            lines.append(" ".join(f"{k}={v}" for k, v in w.items()))
        (out / "long_cycle_witnesses.txt").write_text("\n".join(lines) + "\n")
    return 0 if report.passed else 1


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="activemasks",
        description="Skewed majority-vote dynamics: segmentation, filter "
                    "certification, and exhaustive cycle verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    seg = sub.add_parser("segment", help="segment an image per a config file")
    seg.add_argument("config")
    seg.add_argument("--out", help=f"output dir (default: config or ${ENV_OUTPUT_DIR})")
    seg.add_argument("--seed", type=int)
    seg.add_argument("--max-iters", type=int)
    seg.add_argument("--scale", type=float)
    seg.add_argument("--labels", type=int)
    seg.add_argument("--boundary", choices=[b.value for b in Boundary])
    seg.set_defaults(func=_cmd_segment)

    ana = sub.add_parser("analyze-filter", help="print a filter's spectrum report")
    ana.add_argument("filter", help="dirac | box3 | box3x3 | plus | gaussian | taps:<file>")
    ana.add_argument("--domain", required=True, help="e.g. 8 or 4x4")
    ana.add_argument("--scale", type=float, default=1.0)
    ana.set_defaults(func=_cmd_analyze_filter)

    enu = sub.add_parser("enumerate", help="run every initial state of a tiny domain")
    enu.add_argument("filter")
    enu.add_argument("--domain", required=True)
    enu.add_argument("--labels", type=int, required=True)
    enu.add_argument("--scale", type=float, default=1.0)
    enu.add_argument("--boundary", choices=[b.value for b in Boundary],
                     default=Boundary.CIRCULAR.value)
    enu.add_argument("--budget", type=int, default=2**20)
    enu.set_defaults(func=_cmd_enumerate)

    ver = sub.add_parser("verify", help="run the theorem verification battery")
    ver.add_argument("--seed", type=int, default=1105)
    ver.add_argument("--quick", action="store_true", help="reduced corpus sizes")
    ver.add_argument("--out", help="where to save long-cycle witnesses, if any")
    ver.set_defaults(func=_cmd_verify)

    ben = sub.add_parser("bench", help="independently seeded segmentation runs")
    ben.add_argument("config")
    ben.add_argument("--runs", type=int, default=5)
    ben.add_argument("--out")
    ben.add_argument("--seed", type=int)
    ben.add_argument("--max-iters", type=int)
    ben.add_argument("--scale", type=float)
    ben.add_argument("--labels", type=int)
    ben.add_argument("--boundary", choices=[b.value for b in Boundary])
    ben.set_defaults(func=_cmd_bench)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
