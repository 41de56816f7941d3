"""
Recovering principal directions online
======================================

GHA on Gaussian data with a known spectrum, checked against Jacobi.
"""

import time

import numpy as np

from hebgha import (
    GhaConfig,
    autocorrelation,
    component_variances,
    gha_init,
    gha_train,
    jacobi_eigendecompose,
    orthonormality_defect,
    reconstruction_error,
    row_alignment,
)
from hebgha.data import synth_gaussian

###############################################################################
# Eight dimensions, eigenvalues halving each step.
spectrum = [8, 4, 2, 1, 0.5, 0.25, 0.125, 0.0625]
data = synth_gaussian(10000, spectrum, seed=2024)

###############################################################################
# The batch answer: eigenvectors of the sample autocorrelation.
oracle = jacobi_eigendecompose(autocorrelation(data.x))
print("oracle eigenvalues", np.round(oracle.eigenvalues, 3))

###############################################################################
# Three rows, default schedule. Training sees one sample at a time.
cfg = GhaConfig(seed=7)
start = time.perf_counter()
c, trace = gha_train(gha_init(3, 8, cfg), data.x, cfg)
print(f"trained {trace.step_count} steps in {time.perf_counter() - start:.1f}s")

###############################################################################
# Rows line up with the oracle, in order, and are close to unit length.
print("|cos| to oracle      ", np.round(row_alignment(c, oracle), 6))
print("variance per row     ", np.round(component_variances(c, data.x), 4))
print("||CC^T - I||         ", round(orthonormality_defect(c), 5))
print("reconstruction error ", round(reconstruction_error(c, data.x), 3), "%")
print("oracle top-3 error   ", round(reconstruction_error(oracle.top(3), data.x), 3), "%")

###############################################################################
# Per-epoch movement shrinks as the learning rate decays.
for e, total, _ in trace.epochs[::10]:
    print(f"epoch {e:3d} summed step norm {total:.4f}")
