"""Command-line entry point: run, convergence, profile, list."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import experiment as ex
from . import metrics
from . import problems as pb
from .feasibility import SCHEDULE_LABELS
from .optimizer import MODES


def _emit(text: str, out):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
        print(out)


def cmd_run(args) -> int:
    try:
        cfg = ex.load_config(args.config, seed_offset=args.seed_offset)
    except (OSError, ex.ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = ex.output_dir(cfg, args.out)
    manifest = ex.run_experiment(cfg, out, force=args.force, workers=args.workers)
    failed = [c for c in manifest["cells"] if c["status"] != "complete"]
    for c in failed:
        print(f"FAILED {c['problem']} {c['solver']} seed {c['seed']}: {c['status']} {c.get('error') or ''}",
              file=sys.stderr)
    print(f"{len(manifest['cells']) - len(failed)}/{len(manifest['cells'])} cells complete in {out}")
    return 1 if failed else 0


def cmd_convergence(args) -> int:
    histories = ex.load_histories(args.histories)
    try:
        stats = ex.convergence_table(histories, args.problem, args.eps_c)
    except (ValueError, pb.UnknownProblem) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _emit(metrics.convergence_csv(stats), args.out)
    return 0


def _tag(eps_c: float) -> str:
    return f"{eps_c:g}"


def cmd_profile(args) -> int:
    histories = ex.load_histories(args.histories)
    eps_cs = args.eps_c or [1e-2, 1e-4]
    # a single f_opt convention shared by every tolerance keeps profiles comparable
    ref = args.f_opt_eps_c if args.f_opt_eps_c is not None else max(eps_cs)
    out = Path(args.out or args.histories)
    out.mkdir(parents=True, exist_ok=True)
    for eps_c in eps_cs:
        try:
            res, excluded = ex.profile(histories, args.eps, eps_c, f_opt_eps_c=ref)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        for name, text in ((f"profile_epsc{_tag(eps_c)}.csv", metrics.profile_csv(res)),
                           (f"t_table_epsc{_tag(eps_c)}.csv", metrics.t_table_csv(res))):
            (out / name).write_text(text)
            print(out / name)
        if excluded:
            print(f"excluded (no feasible point at eps_c={_tag(ref)}): {', '.join(excluded)}")
    return 0


def cmd_list(args) -> int:
    print(pb.registry_csv(), end="")
    print()
    print("modes: " + ", ".join(MODES))
    print("schedules: " + ", ".join(SCHEDULE_LABELS))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="segoutb", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="execute a problem x solver x seed matrix")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help=f"output directory (overrides ${ex.OUT_ENV} and the config)")
    p.add_argument("--force", action="store_true", help="recompute cells whose history exists")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--seed-offset", type=int, default=0)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("convergence", help="best-valid mean/std per evaluation for one problem")
    p.add_argument("--histories", required=True)
    p.add_argument("--problem", required=True)
    p.add_argument("--eps-c", type=float, default=1e-2)
    p.add_argument("--out")
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("profile", help="data profiles and t tables")
    p.add_argument("--histories", required=True)
    p.add_argument("--eps", type=float, default=metrics.PROFILE_EPS)
    p.add_argument("--eps-c", type=float, action="append")
    p.add_argument("--f-opt-eps-c", type=float, default=None,
                   help="tolerance used to build f_opt (default: loosest --eps-c)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("list", help="problem registry and schedule labels")
    p.set_defaults(func=cmd_list)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
