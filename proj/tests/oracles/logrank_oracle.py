"""Exact-arithmetic oracle for the 10-sample Kaplan-Meier / log-rank fixture.

Prints the values frozen into the C++ tests. Uses fractions for every table quantity and
only converts to float for the chi-square tail, HR and confidence interval.
"""
from fractions import Fraction as F
import math

g1 = [(2, 1), (3, 1), (4, 0), (5, 1), (8, 1)]
g2 = [(3, 1), (6, 0), (7, 1), (9, 1), (10, 0)]


def km(samples):
    times = sorted({t for t, _ in samples})
    s = F(1)
    out = []
    for t in times:
        at_risk = sum(1 for u, _ in samples if u >= t)
        d = sum(1 for u, e in samples if u == t and e)
        if d:
            s *= 1 - F(d, at_risk)
        out.append((t, s))
    return out


def logrank(a, b):
    times = sorted({t for t, e in a + b if e})
    o1 = o2 = e1 = e2 = v = F(0)
    for t in times:
        n1 = sum(1 for u, _ in a if u >= t)
        n2 = sum(1 for u, _ in b if u >= t)
        d1 = sum(1 for u, e in a if u == t and e)
        d2 = sum(1 for u, e in b if u == t and e)
        n, d = n1 + n2, d1 + d2
        o1 += d1
        o2 += d2
        e1 += F(d * n1, n)
        e2 += F(d * n2, n)
        if n > 1:
            v += F(d * n1 * n2 * (n - d), n * n * (n - 1))
    chi2 = (o1 - e1) ** 2 / v
    return o1, o2, e1, e2, v, chi2


print("KM g1:", [(t, str(s), float(s)) for t, s in km(g1)])
print("KM g2:", [(t, str(s), float(s)) for t, s in km(g2)])
o1, o2, e1, e2, v, chi2 = logrank(g1, g2)
print("O1 O2 E1 E2 V:", o1, o2, e1, e2, v)
print("chi2 = %s = %.17g" % (chi2, float(chi2)))
p = math.erfc(math.sqrt(float(chi2) / 2))
print("p = %.17g" % p)
hr = (o1 / e1) / (o2 / e2)
half = 1.96 * math.sqrt(float(1 / e1 + 1 / e2))
print("HR = %s = %.17g" % (hr, float(hr)))
print("CI = %.17g %.17g" % (math.exp(math.log(float(hr)) - half), math.exp(math.log(float(hr)) + half)))
