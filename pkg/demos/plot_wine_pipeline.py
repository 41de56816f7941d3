"""
From CSV to accuracy and energy tables
======================================

Both learning rules on the Wine data, with and without the simulated fabric.
"""

import pathlib

from hebgha.bench import parse_config, render_markdown, run_experiment
from hebgha.data import load_csv

here = pathlib.Path(__file__).resolve().parent
wine = here.parent / "data" / "wine.csv"

###############################################################################
# 178 rows, 13 features, three cultivars.
ds = load_csv(wine, label_column="class", has_header=True)
print(len(ds), "samples,", ds.dim, "features,", ds.classes, "classes")

###############################################################################
# A small grid: two rules, two splits, both execution modes. GHA runs 20
# epochs here to keep the demo quick.
config = parse_config(
    {
        "datasets": [{"name": "wine", "path": str(wine), "label_column": "class", "has_header": True}],
        "algorithms": ["HA", "GHA"],
        "splits": [0.7, 0.3],
        "seeds": [0],
        "gha": {"m": 3, "epochs": 20},
        "fabric_modes": ["reference", "simulated-fabric"],
        "topology": "3x3x18",
    }
)
report = run_experiment(config)
print(f"{len(report.rows)} rows, {len(report.failures)} failures")

###############################################################################
# Human-readable tables, percentages to two decimals.
print(render_markdown(report.rows))
