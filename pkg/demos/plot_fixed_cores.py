"""
Bilinear models as fixed core tensors
=====================================

Every bilinear scorer e_i^T M_k e_j can be written with a core tensor whose
frontal slices are hard-coded. Here we print the slices for RESCAL and
ComplEx and check that scores agree with the direct formula.
"""

import numpy as np

from reltucker import bilinear
from reltucker.bilinear import BilinearModelKind
from reltucker.rtucker import RTModel, fixed_core, score_rt

# RESCAL with d_e = 2 has one slice per entry of the mixing matrix
core = fixed_core(BilinearModelKind("rescal", 2))
for l, g in enumerate(core.slices):
    print(f"RESCAL slice {l}:\n{g.astype(int)}")

# ComplEx pairs real and imaginary halves; the last two slices are antisymmetric
kind = BilinearModelKind("complex", 4)
core = fixed_core(kind)
for l, g in enumerate(core.slices):
    print(f"ComplEx slice {l}:\n{g.astype(int)}")

###############################################################################
# Scores through the core match the direct bilinear form.

rng = np.random.default_rng(0)
model = RTModel(E=rng.normal(size=(5, 4)), R=rng.normal(size=(2, 4)), core=core)
M = bilinear.mixing_matrix(kind, model.R[1])
print("via core :", score_rt(model, 0, 1, 3))
print("direct   :", bilinear.score_direct(model.E[0], M, model.E[3]))
