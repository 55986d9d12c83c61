#!/usr/bin/env python3
"""Recompute the reference targets in docs/reference_targets.json.

Without data arguments the morale pattern is recomputed from the recorded
table. With --ratings-dir, each <metric>.csv (one column per rater) is scored
with `topicflow icc`. With --explanatory-power, the pattern is recomputed from
a run's reports/explanatory_power.csv. The exit status is 0 when every
recomputed value equals its reference at the recorded precision.
"""

import argparse
import csv
import json
import subprocess
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
MORALE = "Employees Morale"


def best(values):
    present = [v for v in values if v is not None]
    return max(present) if present else None


def leading_slices(table, proposed):
    """Slices where the best proposed value is at least every baseline's best."""
    leads = []
    for slice_name, models in table.items():
        top = best(models[proposed])
        rivals = [best(v) for m, v in models.items() if m != proposed]
        if top is not None and all(r is None or top >= r for r in rivals):
            leads.append(slice_name)
    return leads


def table_from_report(path):
    table = {}
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            cells = []
            for g in ("Tmin", "Tmid", "Tmax"):
                raw = row.get(f"{MORALE}:{g}", "").replace("*", "").strip()
                cells.append(float(raw) if raw else None)
            table.setdefault(f"{row['type']}_{row['char']}", {})[row["model"]] = cells
    return table


def icc_of(cli, path):
    out = subprocess.run([cli, "icc", str(path)], check=True, capture_output=True, text=True).stdout
    return json.loads(out)[0]


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--targets", default=REPO / "docs" / "reference_targets.json", type=Path)
    ap.add_argument("--cli", default=REPO / "build" / "topicflow", type=Path, help="topicflow binary")
    ap.add_argument("--ratings-dir", type=Path, help="directory holding <metric>.csv judge/human ratings")
    ap.add_argument("--explanatory-power", type=Path, help="explanatory_power.csv from a run's reports/")
    ap.add_argument("--proposed-model", default="split_integrated", help="model name of the proposed method in that file")
    args = ap.parse_args()

    targets = json.loads(args.targets.read_text())
    ok = True

    agreement = targets["judge_human_agreement"]["metrics"]
    print("judge-human agreement, ICC(2,2)")
    for metric, ref in agreement.items():
        line = f"  {metric:30s} reference {ref['icc']:.3f} [{ref['ci'][0]:.2f}, {ref['ci'][1]:.2f}]"
        if args.ratings_dir:
            got = icc_of(args.cli, args.ratings_dir / f"{metric}.csv")
            match = round(got["icc"], 3) == ref["icc"] and [round(got["ci_low"], 2), round(got["ci_high"], 2)] == ref["ci"]
            ok &= match
            line += f"  recomputed {got['icc']:.3f} [{got['ci_low']:.2f}, {got['ci_high']:.2f}] {'ok' if match else 'DIFFERS'}"
        print(line)

    power = targets["morale_explanatory_power"]
    expected = power["expected"]
    if args.explanatory_power:
        table, proposed, source = table_from_report(args.explanatory_power), args.proposed_model, str(args.explanatory_power)
    else:
        table, proposed, source = power["table"], power["proposed"], "recorded table"
    leads = leading_slices(table, proposed)
    match = len(leads) == expected["slices_where_proposed_leads"] and len(table) == expected["slices"]
    ok &= match
    print(f"morale explanatory power ({source})")
    print(f"  proposed leads in {len(leads)}/{len(table)} slices: {', '.join(leads)}")
    print(f"  reference {expected['slices_where_proposed_leads']}/{expected['slices']} {'ok' if match else 'DIFFERS'}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
