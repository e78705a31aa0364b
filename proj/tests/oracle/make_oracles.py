"""Independent reference values for the unit tests.

Run from the repository root:
    python3 tests/oracle/make_oracles.py > tests/oracle_values.h
Uses numpy / scipy / scikit-learn and a pure-python mt19937_64.
"""
import math

import numpy as np
from sklearn.metrics import roc_auc_score

MASK64 = (1 << 64) - 1


class MT19937_64:
    def __init__(self, seed):
        self.mt = [0] * 312
        self.mt[0] = seed & MASK64
        for i in range(1, 312):
            prev = self.mt[i - 1]
            self.mt[i] = (6364136223846793005 * (prev ^ (prev >> 62)) + i) & MASK64
        self.idx = 312

    def _twist(self):
        upper, lower = 0xFFFFFFFF80000000, 0x7FFFFFFF
        for i in range(312):
            x = (self.mt[i] & upper) | (self.mt[(i + 1) % 312] & lower)
            xa = x >> 1
            if x & 1:
                xa ^= 0xB5026F5AA96619E9
            self.mt[i] = self.mt[(i + 156) % 312] ^ xa
        self.idx = 0

    def __call__(self):
        if self.idx >= 312:
            self._twist()
        y = self.mt[self.idx]
        self.idx += 1
        y ^= (y >> 29) & 0x5555555555555555
        y ^= (y << 17) & 0x71D67FFFEDA60000
        y ^= (y << 37) & 0xFFF7EEE000000000
        y ^= y >> 43
        return y & MASK64


def uniform_index(rng, n):
    mx = MASK64
    limit = mx - mx % n
    while True:
        x = rng()
        if x < limit:
            return x % n


def softplus(x):
    return np.log1p(np.exp(-np.abs(x))) + np.maximum(x, 0)


def out(name, values):
    vals = np.atleast_1d(np.asarray(values, dtype=float)).ravel()
    body = ", ".join(repr(float(v)) for v in vals)
    print(f"inline constexpr double {name}[] = {{ {body} }};")


def out_int(name, values):
    body = ", ".join(str(int(v)) for v in values)
    print(f"inline constexpr int {name}[] = {{ {body} }};")


print("// Generated by tests/oracle/make_oracles.py; do not edit.")
print("#pragma once")
print("namespace oracle {")

# First outputs of mt19937_64 seeded with 5489 (the standard default).
r = MT19937_64(5489)
print(f"inline constexpr unsigned long long kMt64First = {r()}ULL;")

# Two-layer MLP with shifted softplus; gradient of sum(y^2).
x = np.array([[0.2, -0.4, 1.1], [-0.7, 0.3, 0.5]])
w0 = np.array([[0.1, -0.2, 0.3, 0.05], [0.4, 0.1, -0.3, 0.2], [-0.5, 0.25, 0.15, -0.1]])
b0 = np.array([[0.01, -0.02, 0.03, 0.0]])
w1 = np.array([[0.3, -0.1], [0.2, 0.4], [-0.6, 0.1], [0.05, -0.25]])
b1 = np.array([[0.1, -0.05]])
pre = x @ w0 + b0
hid = softplus(pre) - math.log(2.0)
y = hid @ w1 + b1
dy = 2 * y
dw1 = hid.T @ dy
dhid = dy @ w1.T
dpre = dhid / (1 + np.exp(-pre))
dw0 = x.T @ dpre
out("kMlpX", x)
out("kMlpW0", w0)
out("kMlpB0", b0)
out("kMlpW1", w1)
out("kMlpB1", b1)
out("kMlpY", y)
out("kMlpGradW0", dw0)
out("kMlpGradW1", dw1)

# Adam, two steps.
p = np.array([0.5, -1.2])
m = np.zeros(2)
v = np.zeros(2)
lr, b1a, b2a, eps = 0.01, 0.9, 0.999, 1e-8
for step, g in enumerate([np.array([0.1, -0.3]), np.array([0.05, 0.2])], 1):
    m = b1a * m + (1 - b1a) * g
    v = b2a * v + (1 - b2a) * g * g
    mh = m / (1 - b1a ** step)
    vh = v / (1 - b2a ** step)
    p = p - lr * mh / (np.sqrt(vh) + eps)
out("kAdamTwoSteps", p)

# Perturbation kernels.
ts = [0.0, 0.1, 0.5, 1.0]
out("kKernelTimes", ts)
out("kVeStd", [0.01 * (10 / 0.01) ** t for t in ts])
vp_a = [math.exp(-0.25 * t * t * (10 - 0.1) - 0.5 * t * 0.1) for t in ts]
out("kVpMean", vp_a)
out("kVpStd", [math.sqrt(1 - a * a) for a in vp_a])
out("kVeDiffusionSqMid", [2 * (0.01 * 1000 ** 0.5) ** 2 * math.log(1000)])
out("kVpDriftMid", [-0.5 * (0.1 + 0.5 * 9.9)])

# Radial basis expansion.
d = 1.7
out("kRbf", [math.exp(-10 * (d - k * 5 / 15) ** 2) for k in range(16)])

# Local frame.
ri = np.array([1.0, 2.0, 3.0])
rj = np.array([-1.0, 0.5, 2.0])
e1 = (ri - rj) / np.linalg.norm(ri - rj)
e2 = np.cross(ri, rj) / np.linalg.norm(np.cross(ri, rj))
e3 = np.cross(e1, e2)
out("kFrame", np.stack([e1, e2, e3]))

# Kabsch RMSD with scipy as an independent alignment.
from scipy.spatial.transform import Rotation

rng = np.random.default_rng(3)
P = rng.normal(size=(6, 3))
Q = rng.normal(size=(6, 3))
Pc = P - P.mean(0)
Qc = Q - Q.mean(0)
rot, _ = Rotation.align_vectors(Qc, Pc)
aligned = rot.apply(Pc)
out("kKabschP", P)
out("kKabschQ", Q)
out("kKabschRmsd", [math.sqrt(((aligned - Qc) ** 2).sum(1).mean())])

# EBM-NCE from logits.
pos = np.array([0.3, -1.2, 2.0])
neg = np.array([0.5, 0.1, -0.7])
out("kNcePos", pos)
out("kNceNeg", neg)
out("kNceLoss", [softplus(-pos).mean() + softplus(neg).mean()])

# EBM-NCE on representations with the shift drawn from mt19937_64(11).
z2 = np.array([[0.1, 0.4], [-0.3, 0.2], [0.5, -0.6], [0.0, 0.9]])
z3 = np.array([[0.2, -0.1], [0.7, 0.3], [-0.4, 0.8], [0.6, 0.5]])
shift = 1 + uniform_index(MT19937_64(11), 3)
pos = (z2 * z3).sum(1)
neg = (z2 * np.roll(z3, -shift, axis=0)).sum(1)
out("kNceZ2", z2)
out("kNceZ3", z3)
out("kNceReprLoss", [softplus(-pos).mean() + softplus(neg).mean()])

# Mask selection: n = 10, ratio 0.35, seed 7.
n, ratio = 10, 0.35
k = int(math.floor(ratio * n + 0.5))
perm = list(range(n))
r = MT19937_64(7)
for i in range(k):
    j = i + uniform_index(r, n - i)
    perm[i], perm[j] = perm[j], perm[i]
out_int("kMaskSeed7", sorted(perm[:k]))

# ROC AUC with ties.
scores = [0.1, 0.4, 0.35, 0.8, 0.4, 0.2, 0.9, 0.4, 0.05, 0.6]
labels = [0, 1, 0, 1, 0, 0, 1, 1, 0, 1]
out("kAucScores", scores)
out_int("kAucLabels", labels)
out("kAuc", [roc_auc_score(labels, scores)])

print("}  // namespace oracle")
