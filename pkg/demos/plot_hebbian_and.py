"""
Imprinting a logic gate with the plain Hebbian rule
===================================================

Bipolar AND, learned by adding input times target into the weights.
"""

import numpy as np

from hebgha import hebbian_init, hebbian_train

###############################################################################
# Four bipolar patterns and their targets.
pairs = [([1, 1], 1), ([1, -1], -1), ([-1, 1], -1), ([-1, -1], -1)]

model, trace = hebbian_train(hebbian_init(2), pairs, epochs=1)
print("weights", model.weights, "bias", model.bias)

###############################################################################
# The sign of the net input now reproduces the gate.
for x, t in pairs:
    net = float(np.dot(model.weights, x) + model.bias)
    print(x, "->", int(np.sign(net)), "(target", t, ")")

###############################################################################
# More passes scale the weights but leave the decision surface alone.
model3, _ = hebbian_train(hebbian_init(2), pairs, epochs=3)
print("after 3 epochs:", model3.weights, model3.bias)
