"""
Command-line workflow
=====================

Writes the family graph to disk, trains a small model with the
``reltucker`` command, then evaluates it and counts its parameters.
The same calls work from a shell, e.g. ``reltucker train --config run.cfg``.
"""

import tempfile
from pathlib import Path

from reltucker import synthetic
from reltucker.cli import main

work = Path(tempfile.mkdtemp())
synthetic.family_kg().save(work / "family")

(work / "run.cfg").write_text(f"""\
model = drt
d_e = 8
d_r = 2
init_scale = 0.5
batch_size = 120
max_epochs = 60
data = {work / 'family'}
out = {work / 'run'}
""")

main(["train", "--config", str(work / "run.cfg")])
print((work / "run" / "train.log").read_text().splitlines()[-1])
main(["evaluate", "--checkpoint", str(work / "run" / "checkpoint.rtk"), "--data", str(work / "family")])
main(["count-params", "--checkpoint", str(work / "run" / "checkpoint.rtk")])
main(["inspect-core", "--checkpoint", str(work / "run" / "checkpoint.rtk"), "--relation", "parent",
      "--vocab", str(work / "run")])
