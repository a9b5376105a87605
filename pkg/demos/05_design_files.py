"""
Design files
============

Designs that are not one of the named builders are described in JSON and
passed to the CLI with ``--design path.json``.
"""

# %%
import json
import tempfile
from pathlib import Path

from splitplot import CorrelationStructure, load_design, stepped_wedge
from splitplot.cli import main
from splitplot.design import design_to_dict

doc = design_to_dict(stepped_wedge(4, clusters=2), cell_sizes=6, pi_z=0.5,
                     corr=CorrelationStructure(1.0, 0.05, 0.04))
print(json.dumps(doc, indent=1))

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "rollout.json"
    path.write_text(json.dumps(doc))
    print(load_design(path).design.matrix.astype(int))

    # %%
    # Flags override file entries; the file supplies everything else.
    main(["power", "--design", str(path), "--effect", "interaction", "--delta", "0.3"])
