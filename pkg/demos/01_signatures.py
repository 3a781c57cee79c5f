"""Signatures of small piecewise-linear paths.

Run: python3 demos/01_signatures.py
"""
import numpy as np

from sigtrade.signature import Path, augment, chen_concat, prefix_signatures, segment_signature, signature

# A single straight segment: level k is the k-fold tensor power of the increment over k!
seg = segment_signature([1.0, 2.0], order=3)
print("segment (1, 2), level 2:\n", seg.tensor(2))

# Two segments glued with the Chen product give the signature of the joined path
path = Path([0, 1, 2], [[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]])
glued = chen_concat(segment_signature([1.0, 1.0], 2), segment_signature([1.0, -1.0], 2))
print("\nup-then-down path, level 2:\n", signature(path, 2).tensor(2))
print("glued from segments matches:", glued.allclose(signature(path, 2)))

# The antisymmetric part of level 2 is the signed area swept by the path
lvl2 = signature(path, 2).tensor(2)
print("signed area (S^01 - S^10) / 2 =", 0.5 * (lvl2[0, 1] - lvl2[1, 0]))

# Time augmentation turns a scalar series into a 2-d path; prefixes are what a stopping rule sees
rng = np.random.default_rng(0)
series = Path.uniform(np.cumsum(rng.normal(scale=0.3, size=11)))
prefixes = prefix_signatures(augment(series), 3)
print(f"\n{len(prefixes)} prefix signatures of length {prefixes[0].flat.size} each")
print("last prefix, level 1 (time, value increment):", prefixes[-1].level(1))
