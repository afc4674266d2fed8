#!/usr/bin/env python3
"""Rebuild the ODDS `lympho` table as CSV from the UCI lymphography records.

The UCI table is read from the nominal-valued copy shipped inside the
`keel-ds` sdist (keel_ds/data/imbalanced/raw/lymphography-normal-fibrosis.dat),
whose last column is `positive` for the "normal find" and "fibrosis" classes.
Those two classes (2 + 4 rows) are the ODDS outliers. Nominal values are mapped
back to the integer codes of the UCI attribute description.

usage: convert_lympho.py KEEL_DAT OUT_CSV
"""
import csv
import sys

NO_YES = {"no": 1, "yes": 2}
NODE = {"no": 1, "lacunar": 2, "lac_margin": 3, "lac_central": 4}
CODES = [
    ("lymphatics", {"normal": 1, "arched": 2, "deformed": 3, "displaced": 4}),
    ("block_of_affere", NO_YES),
    ("bl_of_lymph_c", NO_YES),
    ("bl_of_lymph_s", NO_YES),
    ("by_pass", NO_YES),
    ("extravasates", NO_YES),
    ("regeneration_of", NO_YES),
    ("early_uptake_in", NO_YES),
    ("lym_nodes_dimin", None),
    ("lym_nodes_enlar", None),
    ("changes_in_lym", {"bean": 1, "oval": 2, "round": 3}),
    ("defect_in_node", NODE),
    ("changes_in_node", NODE),
    ("changes_in_stru", {"no": 1, "grainy": 2, "drop_like": 3, "coarse": 4,
                         "diluted": 5, "reticular": 6, "stripped": 7, "faint": 8}),
    ("special_forms", {"no": 1, "chalices": 2, "vesicles": 3}),
    ("dislocation_of", NO_YES),
    ("exclusion_of_no", NO_YES),
    ("no_of_nodes_in", None),
]


def main(src, dst):
    rows = []
    with open(src) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("@"):
                continue
            fields = [f.strip() for f in line.split(",")]
            assert len(fields) == len(CODES) + 1, line
            feats = []
            for (name, table), value in zip(CODES, fields):
                feats.append(int(value) if table is None else table[value])
            label = {"negative": 0, "positive": 1}[fields[-1]]
            rows.append(feats + [label])
    with open(dst, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([name for name, _ in CODES] + ["label"])
        w.writerows(rows)
    print(f"{dst}: {len(rows)} rows, {sum(r[-1] for r in rows)} outliers")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
