"""
Command-line front end: ``plrtest test``, ``plrtest simulate`` and ``plrtest spectrum``.
"""

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

import plrtest
from . import plr, simulate
from .errors import DegenerateCalibrationError, DomainError, PLRError
from .estimator import make_dataset
from .kernels import KernelConfig, build_grams
from .plr import PlrResult
from .quadrature import DEFAULT_RESOLUTION, joint_grid
from .utils import CompressedStore, _debug_print


@dataclass(frozen=True)
class TestReport:
    """PlrResult plus the provenance of the run that produced it."""

    __test__ = False

    result: PlrResult
    input_path: str
    mapping: str
    m: int
    resolution: int
    seed: int
    split: bool
    version: str

    def to_dict(self) -> Dict[str, Any]:
        out = {k: v for k, v in asdict(self).items() if k != "result"}
        out.update(self.result.to_dict())
        return out

    @classmethod
    def from_dict(cls, record: Dict[str, Any]) -> "TestReport":
        record = dict(record)
        own = {name: record.pop(name) for name in ("input_path", "mapping", "m", "resolution", "seed", "split", "version")}
        return cls(result=PlrResult.from_dict(record), **own)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TestReport":
        return cls.from_dict(json.loads(text))

    def to_text(self) -> str:
        """One ``key: value`` line per field, values JSON-encoded."""
        return "\n".join(f"{key}: {json.dumps(value)}" for key, value in self.to_dict().items())

    @classmethod
    def from_text(cls, text: str) -> "TestReport":
        record = {}
        for line in text.splitlines():
            if line.strip():
                key, _, value = line.partition(": ")
                record[key] = json.loads(value)
        return cls.from_dict(record)


def read_input(path: str) -> Tuple[np.ndarray, np.ndarray]:
    """Read an ``x,z`` CSV; raises DomainError on malformed content."""
    frame = pd.read_csv(path)
    missing = {"x", "z"} - set(frame.columns)
    if missing:
        raise DomainError(f"{path}: missing column(s) {sorted(missing)}; expected header x,z")
    x = pd.to_numeric(frame["x"], errors="coerce").to_numpy(dtype=float)
    z = pd.to_numeric(frame["z"], errors="coerce").to_numpy(dtype=float)
    if x.size == 0:
        raise DomainError(f"{path}: no observations")
    if not np.all(np.isfinite(x)):
        raise DomainError(f"{path}: x must be finite numbers")
    if not np.all(np.isin(z, (0.0, 1.0))):
        raise DomainError(f"{path}: z must be 0 or 1")
    return x, z.astype(np.intp)


def _lambda_arg(value: str):
    if value == "auto":
        return value
    try:
        lam = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'auto' or a positive number, got {value!r}")
    if not lam > 0:
        raise argparse.ArgumentTypeError(f"lambda must be positive, got {value!r}")
    return lam


def _csv_list(kind):
    def parse(value: str):
        try:
            return [kind(v) for v in value.split(",") if v.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a comma separated list, got {value!r}")
    return parse


def cmd_test(args) -> int:
    raw_x, z = read_input(args.path)
    if len(set(z.tolist())) < 2:
        raise DomainError("single group: both labels 0 and 1 must be present")
    cfg = KernelConfig(m=args.m)
    grid = joint_grid(args.resolution)
    split = args.lam == "auto" and not args.no_split
    if split:
        result = plr.split_test(
            raw_x, z, args.alpha, args.seed, args.calibration, args.map, cfg, grid, args.rho_mode, args.permutations
        )
    else:
        data = make_dataset(raw_x, z, args.map)
        result = plr.test(
            data, args.alpha, args.lam, args.calibration, cfg, args.seed, args.permutations, grid, args.rho_mode
        )
    report = TestReport(
        result=result,
        input_path=args.path,
        mapping=args.map,
        m=args.m,
        resolution=args.resolution,
        seed=args.seed,
        split=split,
        version=plrtest.__version__,
    )
    print(report.to_json() if args.json else report.to_text())
    if args.exit_code_signal and result.reject:
        return 2
    return 0


def cmd_simulate(args) -> int:
    parent = os.path.dirname(os.path.abspath(args.out))
    if not os.path.isdir(parent) or not os.access(parent, os.W_OK):
        raise OSError(f"cannot write {args.out}: directory {parent} is not writable")
    sizes = args.sizes or (simulate.STUDY_SIZES if args.full else simulate.DESK_SIZES)
    trials = args.trials or (simulate.FULL_TRIALS if args.full else simulate.DEFAULT_TRIALS)
    store = CompressedStore(args.cache) if args.cache else None
    table = simulate.run_experiment(
        settings=args.settings,
        deltas=args.deltas,
        sizes=sizes,
        methods=args.methods,
        trials=trials,
        master_seed=args.seed,
        alpha=args.alpha,
        B=args.permutations,
        store=store,
        timing=args.timing,
        cfg=KernelConfig(m=args.m),
        resolution=args.resolution,
    )
    table.to_csv(args.out)
    if args.svg:
        table.plot_svg(args.svg)
    for row in table.invalid_cells():
        print(f"warning: setting {row.setting} delta {row.delta:g} n {row.n} {row.method}: "
              f"{row.failures} failed trials", file=sys.stderr)
    print(table.to_frame().to_string(index=False))
    return 0


def cmd_spectrum(args) -> int:
    raw_x, z = read_input(args.path)
    data = make_dataset(raw_x, z, args.map)
    cfg = KernelConfig(m=args.m)
    grams = build_grams(data, cfg)
    spectrum = grams.interaction_spectrum
    shown = spectrum if args.top is None else spectrum[: args.top]

    print(f"n: {data.n} (n0={data.n0}, n1={data.n1})")
    print("eigenvalues:")
    for i, value in enumerate(shown, start=1):
        print(f"  {i:4d}  {value:.6e}")
    if args.out:
        pd.DataFrame({"index": np.arange(1, spectrum.size + 1), "eigenvalue": spectrum}).to_csv(
            args.out, index=False, lineterminator="\n"
        )

    try:
        print("lambda grid:")
        for lam in np.logspace(-6, 2, 9):
            params = plr.null_params(spectrum, lam, data.n, args.rho_mode, cfg.eig_floor)
            print(f"  lambda={lam:.1e}  theta={params.theta_hat:.6g}  sigma={params.sigma_hat:.6g}")
        lam_hat = plr.adaptive_lambda(spectrum, data.n, args.rho_mode, cfg.eig_floor)
    except DegenerateCalibrationError as exc:
        print(f"degenerate calibration: {exc}")
        return 0
    print(f"adaptive lambda: {lam_hat:.10g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plrtest", description="Penalized likelihood ratio two-sample test")
    parser.add_argument("--version", action="version", version=f"%(prog)s {plrtest.__version__}")
    parser.add_argument("--debug", action="store_true", help="print solver and calibration diagnostics")
    sub = parser.add_subparsers(dest="command", required=True)

    def kernel_flags(p):
        p.add_argument("--m", type=int, default=2, choices=(1, 2), help="Sobolev order")
        p.add_argument("--resolution", type=int, default=DEFAULT_RESOLUTION, help="quadrature nodes per label")

    t = sub.add_parser("test", help="run the PLR test on an x,z CSV file")
    t.add_argument("path")
    t.add_argument("--map", choices=("rank", "minmax"), default="rank")
    t.add_argument("--lambda", dest="lam", type=_lambda_arg, default="auto")
    t.add_argument("--no-split", action="store_true", help="tune lambda on the full sample")
    t.add_argument("--calibration", choices=plr.CALIBRATIONS, default="asymptotic")
    t.add_argument("--permutations", type=int, default=199)
    t.add_argument("--alpha", type=float, default=simulate.ALPHA)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--rho-mode", choices=plr.RHO_MODES, default="inverse")
    t.add_argument("--json", action="store_true")
    t.add_argument("--exit-code-signal", action="store_true", help="exit with status 2 on rejection")
    kernel_flags(t)
    t.set_defaults(func=cmd_test)

    s = sub.add_parser("simulate", help="run a seeded size/power grid")
    s.add_argument("--settings", type=_csv_list(int), default=[1])
    s.add_argument("--deltas", type=_csv_list(float), default=None)
    s.add_argument("--sizes", type=_csv_list(int), default=None)
    s.add_argument("--methods", type=_csv_list(str), default=list(simulate.DEFAULT_METHODS))
    s.add_argument("--trials", type=int, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--alpha", type=float, default=simulate.ALPHA)
    s.add_argument("--permutations", type=int, default=199)
    s.add_argument("--out", required=True, help="PowerTable CSV path")
    s.add_argument("--svg", help="also write rate-vs-n curves")
    s.add_argument("--cache", help="zstd checkpoint file for finished cells")
    s.add_argument("--timing", action="store_true", help="record mean runtimes (CSV no longer reproducible)")
    s.add_argument("--full", action="store_true", help="all sizes 125..1000 and 1000 trials")
    kernel_flags(s)
    s.set_defaults(func=cmd_simulate)

    p = sub.add_parser("spectrum", help="interaction gram eigenvalues and the adaptive lambda")
    p.add_argument("path")
    p.add_argument("--map", choices=("rank", "minmax"), default="rank")
    p.add_argument("--top", type=int, default=None, help="print only the leading eigenvalues")
    p.add_argument("--out", help="write all eigenvalues as CSV")
    p.add_argument("--rho-mode", choices=plr.RHO_MODES, default="inverse")
    kernel_flags(p)
    p.set_defaults(func=cmd_spectrum)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.debug:
        plrtest.debug = True
    try:
        return args.func(args)
    except (PLRError, OSError, ValueError) as exc:
        _debug_print(f"{args.command} failed with {type(exc).__name__}")
        print(f"error: {exc}", file=sys.stderr)
        return 1
