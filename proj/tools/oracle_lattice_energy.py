#!/usr/bin/env python3
"""Independent enumeration/quadrature oracle for lattice counts, lune data,
Fermi-sea energies, per-mode correlation values, and tail sums.

Run:  python3 tools/oracle_lattice_energy.py
Prints reference values that are frozen as literals in the C++ unit tests.
Everything here is computed by brute force (direct enumeration, mpmath
quadrature), independently of the C++ implementation.
"""
import math
import numpy as np
from fractions import Fraction
import mpmath as mp

mp.mp.dps = 30

TWO_PI3 = (2 * math.pi) ** 3


def fermi_ball(kf):
    R = int(math.floor(kf)) + 1
    pts = []
    kf2 = Fraction(kf).limit_denominator(10**12) ** 2
    for x in range(-R, R + 1):
        for y in range(-R, R + 1):
            for z in range(-R, R + 1):
                if Fraction(x * x + y * y + z * z) <= kf2:
                    pts.append((x, y, z))
    pts.sort()
    return pts


def lune(kf, k):
    bf = set(fermi_ball(kf))
    out = []
    for h in sorted(bf):
        p = (h[0] + k[0], h[1] + k[1], h[2] + k[2])
        if p not in bf:
            out.append(p)
    out.sort()
    return out


def lam(k, p):
    n2p = sum(c * c for c in p)
    pmk = tuple(p[i] - k[i] for i in range(3))
    n2m = sum(c * c for c in pmk)
    return Fraction(n2p - n2m, 2)


def vhat_coulomb(g, j):
    n2 = sum(c * c for c in j)
    return 0.0 if n2 == 0 else g / n2


def vhat_yukawa(g, mu, j):
    n2 = sum(c * c for c in j)
    return 0.0 if n2 == 0 else g / (n2 + mu * mu)


print("== fermi ball counts ==")
for kf in (0.9, 1.0, 1.1, 2.0, 3.0, 4.0, 5.0, 8.0):
    print(f"N({kf}) = {len(fermi_ball(kf))}")

print("\n== lune(1,(1,0,0)) ==")
L = lune(1.0, (1, 0, 0))
print(L)
print("size:", len(L))
for p in L:
    print(p, "lambda =", lam((1, 0, 0), p))

print("\n== lune sizes kf=1 for |k|<=4 sample ==")
for k in [(1, 0, 0), (1, 1, 0), (1, 1, 1), (2, 0, 0), (2, 1, 0), (3, 0, 0), (4, 0, 0), (2, 2, 2)]:
    print(k, len(lune(1.0, k)))

print("\n== power sums, kf=1, k=(1,0,0) ==")
lams = [lam((1, 0, 0), p) for p in L]
print("beta=0 :", sum(1 for _ in lams))
print("beta=-1:", float(sum(1 / l for l in lams)), "=", sum(Fraction(1, 1) / l for l in lams))
print("single-point lune kf=0.9 k=(1,0,0):", [(p, lam((1, 0, 0), p)) for p in lune(0.9, (1, 0, 0))])

print("\n== potential spot values ==")
print("coulomb g=1 k=(2,0,0):", vhat_coulomb(1, (2, 0, 0)))
print("yukawa g=1 mu=1 k=(1,0,0):", vhat_yukawa(1, 1, (1, 0, 0)))

print("\n== E_FS kf=1, table Vhat=+-(1,0,0)->(2pi)^3 ==")
kf = 1.0
bf = fermi_ball(kf)
ekin = sum(sum(c * c for c in p) for p in bf)
print("kinetic:", ekin)
# interaction = kf^-1 * 1/(2 (2pi)^3) * sum_{0<|k|<=2kf} Vhat_k (|L_k| - N)
N = len(bf)
tot = 0.0
for k in [(1, 0, 0), (-1, 0, 0)]:
    tot += TWO_PI3 * (len(lune(kf, k)) - N)
eint = (1 / kf) * tot / (2 * TWO_PI3)
print("interaction:", eint, "  E_FS:", ekin + eint)

print("\n== bos integrand / e_corr_bos_k, kf=0.9, table Vhat=(2pi)^3 on +-(1,0,0) ==")
kf = 0.9
c = (1.0 / kf)  # Vhat * kf^-1 / (2pi)^3 with Vhat=(2pi)^3
lam0 = 0.5
x0 = c * lam0 / (lam0 * lam0)
print("x(0) =", x0, " F(x0) =", math.log1p(x0) - x0)
closed = math.sqrt(lam0 * lam0 + c * lam0) - lam0 - c / 2
print("closed form sqrt(lam^2+c lam)-lam-c/2 =", repr(closed))
F = lambda x: mp.log(1 + x) - x
I = mp.quad(lambda t: F(c * lam0 / (lam0**2 + t**2)) / mp.pi, [0, 0.5, 2, 10, mp.inf])
print("quadrature  (1/pi) int F =", mp.nstr(I, 20))

print("\n== e_corr_ex kf=0.9 table ==")
kf = 0.9
pref = kf ** -2 / (4 * TWO_PI3**2)
tot = 0.0
for k in [(1, 0, 0), (-1, 0, 0)]:
    Lk = lune(kf, k)
    for p in Lk:
        for q in Lk:
            j = tuple(p[i] + q[i] - k[i] for i in range(3))
            vj = TWO_PI3 if j in [(1, 0, 0), (-1, 0, 0)] else 0.0
            vk = TWO_PI3
            tot += vk * vj / float(lam(k, p) + lam(k, q))
print("e_corr_ex =", repr(pref * tot))

print("\n== scalar one-body closed forms (lam=1, w=1, g=2) ==")
print("sqrt(3) =", repr(math.sqrt(3.0)))
print("K = -1/4 log 3 =", repr(-0.25 * math.log(3.0)))
print("trace corr = sqrt(3)-2 =", repr(math.sqrt(3.0) - 2.0))

print("\n== quadratic expansion check, lune(1,(1,0,0)) ==")
lamsf = [float(l) for l in lams]
S = sum(1.0 / (a + b) for a in lamsf for b in lamsf)
print("sum_{p,q} 1/(lam_p+lam_q) =", repr(S))
integ = mp.quad(lambda t: (sum(l / (l * l + t * t) for l in lamsf)) ** 2, [0, 0.5, 2, 20, mp.inf])
print("(2/pi) int (sum lam/(lam^2+t^2))^2 dt =", mp.nstr(2 / mp.pi * integ, 20))

print("\n== error term, Table +-(1,0,0)->(2pi)^3, kf=2 ==")
# sum_k Vhat_k^2 min(|k|, kf) over the two modes = 2*(2pi)^6*1 -> sqrt = sqrt(2)*(2pi)^3
val = 2 * TWO_PI3**2 * min(1.0, 2.0)
print("sum =", repr(val), " sqrt =", repr(math.sqrt(val)), " sqrt/(2pi)^3 =", repr(math.sqrt(val) / TWO_PI3))

print("\n== e_corr_bos kf=1 coulomb g=1: per-k values |k|<=2 ==")
kf = 1.0


def e_corr_bos_k(kf, k, vhat, dps_pts=None):
    Lk = lune(kf, k)
    lams = [float(lam(k, p)) for p in Lk]
    g = vhat(k) / kf / TWO_PI3
    if g == 0.0 or not lams:
        return mp.mpf(0)
    f = lambda t: mp.log(1 + g * sum(l / (l * l + t * t) for l in lams)) - g * sum(
        l / (l * l + t * t) for l in lams
    )
    lmin = min(lams)
    lmax = max(lams)
    return mp.quad(lambda t: f(t) / mp.pi, [0, lmin / 2, lmax, 10 * lmax, 100 * lmax, mp.inf])


coul = lambda k: vhat_coulomb(1.0, k)
for k in [(1, 0, 0), (1, 1, 0), (1, 1, 1), (2, 0, 0), (-1, 0, 0), (2, 1, 0), (3, 0, 0)]:
    print(k, mp.nstr(e_corr_bos_k(1.0, k, coul), 17))

print("\n== trace-correction oracle, 5-dim lune kf=1 k=(1,0,0) coulomb g=1 ==")
kf = 1.0
k = (1, 0, 0)
Lk = lune(kf, k)
lams = np.array([float(lam(k, p)) for p in Lk])
w2 = vhat_coulomb(1.0, k) / kf / (2 * TWO_PI3)  # <e_p, P e_q> value
v = np.full(len(Lk), math.sqrt(w2))
h = np.diag(lams)
P = np.outer(v, v)
# K = -1/2 log( h^{-1/2} (h^{1/2}(h+2P)h^{1/2})^{1/2} h^{-1/2} )
hs = np.diag(np.sqrt(lams))
hsi = np.diag(1 / np.sqrt(lams))
M = hs @ (h + 2 * P) @ hs
ew, ev = np.linalg.eigh(M)
Msqrt = ev @ np.diag(np.sqrt(ew)) @ ev.T
inner = hsi @ Msqrt @ hsi
inner = 0.5 * (inner + inner.T)
ew2, ev2 = np.linalg.eigh(inner)
K = -0.5 * ev2 @ np.diag(np.log(ew2)) @ ev2.T
print("K[0,:] =", np.array2string(K[0], precision=16))
print("||K||_HS =", repr(float(np.linalg.norm(K))))
ewK, evK = np.linalg.eigh(K)
emK = evK @ np.diag(np.exp(-ewK)) @ evK.T
corr = np.trace(emK @ h @ emK) - np.trace(h) - np.dot(v, v)
print("trace corr route1 =", repr(float(corr)))
print("e_corr_bos_k quadrature =", mp.nstr(e_corr_bos_k(1.0, k, coul), 17))
# diag condition residual
D = emK @ (h + 2 * P) @ emK.T  # e^{-K}? careful: identity is e^K (h+2P) e^K = e^{-K} h e^{-K}
eK = evK @ np.diag(np.exp(ewK)) @ evK.T
resid = eK @ (h + 2 * P) @ eK - emK @ h @ emK
print("diag-cond residual max =", repr(float(np.abs(resid).max())))

print("\n== error_term coulomb g=1 kf=2 brute (shells to 400) ==")
kf, g = 2.0, 1.0
R = 400
ax = np.arange(-R, R + 1)
Y, Z = np.meshgrid(ax, ax, indexing="ij")
S = 0.0
for x in ax:
    n2 = (x * x + Y * Y + Z * Z).astype(np.float64)
    n2[n2 == 0] = np.inf
    absk = np.sqrt(n2)
    term = np.where(absk <= R, (g / n2) ** 2 * np.minimum(absk, kf), 0.0)
    S += float(term[np.isfinite(term)].sum())
# analytic tail bracket beyond R for f(u)=g^2 kf u^-4
A, B = R - math.sqrt(3), R + math.sqrt(3)
hi = 4 * math.pi * g * g * kf * (1 / A + math.sqrt(3) / (2 * A * A) + 1 / (4 * A**3))
lo = 4 * math.pi * g * g * kf * (1 / B - math.sqrt(3) / (2 * B * B) + 1 / (4 * B**3))
print("sum_v2(min) inside R=400:", repr(float(S)), " tail in [", lo, ",", hi, "]")
print("error_term interval: [", repr(math.sqrt(S + lo)), ",", repr(math.sqrt(S + hi)), "]")

print("\n== mode sets ==")
def build_modes(kf, klist):
    bf = fermi_ball(kf)
    s = set(bf)
    for k in klist:
        for kk in (k, tuple(-c for c in k)):
            for p in lune(kf, kk):
                s.add(p)
    return sorted(s)

m3 = build_modes(0.9, [(1, 0, 0)])
print("kf=0.9 k=(1,0,0):", len(m3), m3)
m5 = build_modes(0.9, [(1, 0, 0), (0, 1, 0)])
print("kf=0.9 two k:", len(m5), m5)
m17 = build_modes(1.0, [(1, 0, 0)])
print("kf=1 k=(1,0,0):", len(m17))
print("C(17,7) =", math.comb(17, 7))
