"""Run every config in experiments/ through the matching CLI verb.

Outputs land in results/ (CSV per config, JSON for match runs).  Exit status 2 from a verb
(a reported finding, e.g. an unstable point) is not treated as an error.
"""

import argparse
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]


def verb_for(name: str) -> str:
    if "convergence" in name:
        return "convergence"
    if "smoothness" in name:
        return "smoothness"
    if "unobservable" in name:
        return "unobservable"
    if name.startswith("stability_"):
        return "stability"
    if name.startswith("match_") or name == "table_d1q3_choices":
        return "match"
    raise ValueError(f"no verb for {name}")


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=ROOT / "results")
    ap.add_argument("only", nargs="*", help="config stems to run (default: all)")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    status = 0
    for cfg in sorted((ROOT / "experiments").glob("*.yaml")):
        if args.only and cfg.stem not in args.only:
            continue
        verb = verb_for(cfg.stem)
        suffix = ".json" if verb == "match" else ".csv"
        cmd = [sys.executable, "-m", "lbmfd", verb, "-c", str(cfg), "-o", str(args.out / (cfg.stem + suffix))]
        print(f"== {cfg.stem} ({verb})", flush=True)
        rc = subprocess.run(cmd).returncode
        if rc not in (0, 2):
            print(f"   failed with exit code {rc}", file=sys.stderr)
            status = 1
    return status


if __name__ == "__main__":
    sys.exit(main())
