"""Choosing the entry mirror's reflectivity.

Replacing the switched entry mirror with a static half mirror costs loss:
the photon must transmit on entry, reflect M-2 times while circulating,
and transmit again on exit, with probability (1-R)^2 R^(M-2).  The merit
is maximized at R = (M-2)/M, which is 50% for the M=4 configuration.
"""
import numpy as np

from cfqsim import half_mirror_merit, optimize_half_mirror

for m in (3, 4, 6, 10, 16):
    rs = np.linspace(0.0, 1.0, 401)
    merits = [half_mirror_merit(float(r), m) for r in rs]
    numeric = optimize_half_mirror(m)
    closed = (m - 2) / m
    print(f"M={m:>2}: argmax (golden section) = {numeric:.6f}, "
          f"(M-2)/M = {closed:.6f}, peak merit = {max(merits):.6f}")

print("\nsweep near the M=4 optimum:")
for r in (0.3, 0.4, 0.5, 0.6, 0.7):
    print(f"  R={r:.1f}  merit={half_mirror_merit(r, 4):.6f}")
