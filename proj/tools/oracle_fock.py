#!/usr/bin/env python3
"""Dense Jordan-Wigner oracle for the sector-operator identities.

Builds every operator (b, B, D, K-kernel, quasi-bosonic quadratic/cubic
forms, Bogolubov kernel) as an explicit 2^M x 2^M matrix on tiny mode sets
and verifies each identity the C++ test-suite encodes.  Residuals printed
here should all be at rounding level (<= 1e-12); the values act as an
independent cross-check for the compiled implementation.
"""
import math
import itertools
import numpy as np

np.set_printoptions(precision=16)

TWO_PI3 = (2 * math.pi) ** 3


# ----------------------------------------------------------------------
# Jordan-Wigner machinery
# ----------------------------------------------------------------------
def jw_ops(M):
    I2 = np.eye(2)
    sz = np.diag([1.0, -1.0])
    a = np.array([[0.0, 1.0], [0.0, 0.0]])  # |occ> -> |empty>
    cs = []
    for i in range(M):
        ops = [sz] * i + [a] + [I2] * (M - 1 - i)
        out = np.array([[1.0]])
        for o in ops:
            out = np.kron(out, o)
        cs.append(out)
    return cs


def basis_vec(M, occupied):
    idx = 0
    for i in occupied:
        idx += 1 << (M - 1 - i)
    v = np.zeros(2**M)
    v[idx] = 1.0
    return v


def comm(A, B):
    return A @ B - B @ A


def acomm(A, B):
    return A @ B + B @ A


def expm_antisym(K):
    """exp of a real antisymmetric matrix via Hermitian eig of iK."""
    H = 1j * K
    w, U = np.linalg.eigh(H)
    return np.real(U @ np.diag(np.exp(-1j * w)) @ U.conj().T)


# ----------------------------------------------------------------------
# Abstract CAR checks (no lattice structure needed)
# ----------------------------------------------------------------------
def check_lemma_2_2():
    """Corrected 13-term anticommutator identity for c_p* c_q c_r words,
    p,p' particles; q,q',r,r' holes.  (Second -delta term uses
    delta_{q,r'} c_{p'}* c_{q'} c_r* c_p.)"""
    M = 6
    cs = jw_ops(M)
    cd = [c.T for c in cs]
    holes = [0, 1, 2]
    parts = [3, 4, 5]
    d = lambda a, b: 1.0 if a == b else 0.0
    Iden = np.eye(2**M)
    worst = 0.0
    for p, pp in itertools.product(parts, repeat=2):
        for q, qp, r, rp in itertools.product(holes, repeat=4):
            X = cd[p] @ cs[q] @ cs[r]
            Y = cd[pp] @ cs[qp] @ cs[rp]
            lhs = acomm(X.T, Y)
            rhs = (
                d(p, pp) * cs[qp] @ cs[rp] @ cd[r] @ cd[q]
                + d(q, qp) * cd[pp] @ cs[rp] @ cd[r] @ cs[p]
                + d(r, rp) * cd[pp] @ cs[qp] @ cd[q] @ cs[p]
                - d(r, qp) * cd[pp] @ cs[rp] @ cd[q] @ cs[p]
                - d(q, rp) * cd[pp] @ cs[qp] @ cd[r] @ cs[p]
                - d(q, qp) * d(r, rp) * cd[pp] @ cs[p]
                - d(p, pp) * d(r, rp) * cs[qp] @ cd[q]
                - d(p, pp) * d(q, qp) * cs[rp] @ cd[r]
                + d(q, rp) * d(r, qp) * cd[pp] @ cs[p]
                + d(p, pp) * d(r, qp) * cs[rp] @ cd[q]
                + d(p, pp) * d(q, rp) * cs[qp] @ cd[r]
                + d(p, pp) * d(q, qp) * d(r, rp) * Iden
                - d(p, pp) * d(q, rp) * d(r, qp) * Iden
            )
            worst = max(worst, np.abs(lhs - rhs).max())
    print("lemma 2.2 corrected identity, max residual:", worst)


def check_triple_excitation_bound(rng):
    """|| sum A_pqr c_p* c_q c_r Psi ||^2 <= 5 sum|A|^2 <Psi,(N_E+1)Psi>."""
    M = 6
    cs = jw_ops(M)
    cd = [c.T for c in cs]
    holes = [0, 1, 2]
    parts = [3, 4, 5]
    NE = sum(cd[p] @ cs[p] for p in parts)
    worst = -np.inf
    for _ in range(200):
        A = rng.standard_normal((3, 3, 3))
        T = sum(
            A[i, j, k] * cd[parts[i]] @ cs[holes[j]] @ cs[holes[k]]
            for i in range(3)
            for j in range(3)
            for k in range(3)
        )
        psi = rng.standard_normal(2**M)
        psi /= np.linalg.norm(psi)
        lhs = np.dot(T @ psi, T @ psi)
        rhs = 5.0 * (A**2).sum() * (psi @ (NE + np.eye(2**M)) @ psi)
        worst = max(worst, lhs - rhs)
    print("triple-excitation bound, max (lhs-rhs) [<=0 expected]:", worst)


# ----------------------------------------------------------------------
# Physical mode sets
# ----------------------------------------------------------------------
class Setup:
    def __init__(self, kf, klist, vhat):
        self.kf = kf
        bf = []
        R = int(math.floor(kf)) + 1
        for x in range(-R, R + 1):
            for y in range(-R, R + 1):
                for z in range(-R, R + 1):
                    if x * x + y * y + z * z <= kf * kf + 1e-12:
                        bf.append((x, y, z))
        self.bf = sorted(bf)
        self.klist = list(klist)
        modes = set(self.bf)
        for k in self.klist:
            for p in self.lune(k):
                modes.add(p)
        self.modes = sorted(modes)
        self.idx = {m: i for i, m in enumerate(self.modes)}
        self.M = len(self.modes)
        self.cs = jw_ops(self.M)
        self.cd = [c.T for c in self.cs]
        self.vhat = vhat
        self.psi = basis_vec(self.M, [self.idx[h] for h in self.bf])
        self.parts = [m for m in self.modes if m not in set(self.bf)]

    def lune(self, k):
        bfset = set(self.bf)
        out = []
        for h in self.bf:
            p = (h[0] + k[0], h[1] + k[1], h[2] + k[2])
            if p not in bfset:
                out.append(p)
        return sorted(out)

    def lam(self, k, p):
        pmk = (p[0] - k[0], p[1] - k[1], p[2] - k[2])
        return 0.5 * (sum(c * c for c in p) - sum(c * c for c in pmk))

    def c(self, m):
        return self.cs[self.idx[m]]

    def cdg(self, m):
        return self.cd[self.idx[m]]

    def b(self, k, p):
        pmk = (p[0] - k[0], p[1] - k[1], p[2] - k[2])
        return self.cdg(pmk) @ self.c(p)

    def b_phi(self, k, phi):
        L = self.lune(k)
        return sum(phi[i] * self.b(k, p) for i, p in enumerate(L))

    def kernel(self, k):
        """Diagonalizing kernel K_k as a dense lune matrix."""
        L = self.lune(k)
        lams = np.array([self.lam(k, p) for p in L])
        w2 = self.vhat(k) / self.kf / (2 * TWO_PI3)
        v = np.full(len(L), math.sqrt(w2))
        h = np.diag(lams)
        P = np.outer(v, v)
        hs = np.diag(np.sqrt(lams))
        hsi = np.diag(1 / np.sqrt(lams))
        Msq = hs @ (h + 2 * P) @ hs
        ew, ev = np.linalg.eigh(Msq)
        inner = hsi @ (ev @ np.diag(np.sqrt(ew)) @ ev.T) @ hsi
        inner = 0.5 * (inner + inner.T)
        ew2, ev2 = np.linalg.eigh(inner)
        return -0.5 * ev2 @ np.diag(np.log(ew2)) @ ev2.T, h, P, v

    def calK(self):
        tot = np.zeros((2**self.M, 2**self.M))
        for l in self.klist:
            K, _, _, _ = self.kernel(l)
            L = self.lune(l)
            ml = tuple(-c for c in l)
            for i, p in enumerate(L):
                for j, q in enumerate(L):
                    mq = tuple(-c for c in q)
                    t1 = self.b(l, p) @ self.b(ml, mq)
                    tot += 0.5 * K[i, j] * (t1 - t1.T)
        return tot

    def eps_kl(self, k, l, phi, psi):
        Lk, Ll = self.lune(k), self.lune(l)
        out = np.zeros((2**self.M, 2**self.M))
        for i, p in enumerate(Lk):
            for j, q in enumerate(Ll):
                if phi[i] == 0.0 and psi[j] == 0.0:
                    continue
                coef = phi[i] * psi[j]
                pmk = (p[0] - k[0], p[1] - k[1], p[2] - k[2])
                qml = (q[0] - l[0], q[1] - l[1], q[2] - l[2])
                if p == q:
                    out -= coef * self.c(qml) @ self.cdg(pmk)
                if pmk == qml:
                    out -= coef * self.cdg(q) @ self.c(p)
        return out

    def NE(self):
        return sum(self.cdg(p) @ self.c(p) for p in self.parts)

    def hkin(self):
        out = np.zeros((2**self.M, 2**self.M))
        for p in self.parts:
            out += sum(c * c for c in p) * self.cdg(p) @ self.c(p)
        for h in self.bf:
            out -= sum(c * c for c in h) * self.c(h) @ self.cdg(h)
        return out


def unit(n, i):
    v = np.zeros(n)
    v[i] = 1.0
    return v


def check_setup(st, label):
    print(f"\n--- {label}: modes={st.M}, dim={2**st.M} ---")
    dim = 2**st.M
    I = np.eye(dim)
    K_of = {}
    for l in st.klist:
        K_of[l] = st.kernel(l)

    # kernel mirror symmetry
    for l in st.klist:
        ml = tuple(-c for c in l)
        Kl = K_of[l][0]
        Kml = K_of[ml][0]
        Ll, Lml = st.lune(l), st.lune(ml)
        res = max(
            abs(Kl[i, j] - Kml[Lml.index(tuple(-c for c in p))][Lml.index(tuple(-c for c in q))])
            for i, p in enumerate(Ll)
            for j, q in enumerate(Ll)
        )
        print("kernel mirror symmetry residual:", res)
        break

    cK = st.calK()
    print("calK antisymmetry:", np.abs(cK + cK.T).max())
    eK = expm_antisym(cK)
    emK = expm_antisym(-cK)
    print("e^K e^-K - 1:", np.abs(eK @ emK - I).max())

    # Lemma 1.1 on all (k,l) pairs with basis vectors
    worst = 0.0
    for k in st.klist:
        for l in st.klist:
            Lk, Ll = st.lune(k), st.lune(l)
            for i in range(len(Lk)):
                for j in range(len(Ll)):
                    phi, psi = unit(len(Lk), i), unit(len(Ll), j)
                    bk = st.b_phi(k, phi)
                    bl = st.b_phi(l, psi)
                    r1 = np.abs(comm(bk, bl)).max()
                    d = 1.0 if (k == l and i == j) else 0.0
                    r2 = np.abs(comm(bk, bl.T) - d * I - st.eps_kl(k, l, phi, psi)).max()
                    worst = max(worst, r1, r2)
    print("lemma 1.1 residual:", worst)

    # [H'_kin, b*_{k,p}] = 2 lambda b*_{k,p}
    hk = st.hkin()
    worst = 0.0
    for k in st.klist:
        for p in st.lune(k):
            bs = st.b(k, p).T
            worst = max(worst, np.abs(comm(hk, bs) - 2 * st.lam(k, p) * bs).max())
    print("[H'kin,b*] residual:", worst)
    print("H'kin psi_FS:", np.abs(hk @ st.psi).max())

    # quadratic operators
    def Q1(k, A):
        L = st.lune(k)
        return sum(
            A[i, j] * st.b(k, p).T @ st.b(k, q)
            for i, p in enumerate(L)
            for j, q in enumerate(L)
        )

    def Q2(k, B):
        L = st.lune(k)
        mk = tuple(-c for c in k)
        out = np.zeros((dim, dim))
        for i, p in enumerate(L):
            for j, q in enumerate(L):
                mq = tuple(-c for c in q)
                t = st.b(k, p) @ st.b(mk, mq)
                out += B[i, j] * (t + t.T)
        return out

    # H_eff and its quadratic pieces
    Heff = hk.copy()
    for k in st.klist:
        L = st.lune(k)
        mk = tuple(-c for c in k)
        Bk = sum(st.b(k, p) for p in L)
        Bmk = sum(st.b(mk, p) for p in st.lune(mk))
        pref = st.vhat(k) / st.kf / (2 * TWO_PI3)
        Heff += pref * (2 * Bk.T @ Bk + Bk @ Bmk + Bmk.T @ Bk.T)

    # interaction = sum_k 2Q1(P) + Q2(P)
    alt = hk.copy()
    for k in st.klist:
        _, h, P, v = K_of[k]
        alt += 2 * Q1(k, P) + Q2(k, P)
    print("bosonizable interaction Q-form residual:", np.abs(Heff - alt).max())

    # [B_k,B_k*] identity
    worst = 0.0
    for k in st.klist:
        L = st.lune(k)
        Bk = sum(st.b(k, p) for p in L)
        rhs = len(L) * I
        for p in L:
            pmk = (p[0] - k[0], p[1] - k[1], p[2] - k[2])
            rhs -= st.cdg(p) @ st.c(p) + st.c(pmk) @ st.cdg(pmk)
        worst = max(worst, np.abs(comm(Bk, Bk.T) - rhs).max())
    print("[B,B*] identity residual:", worst)

    # appendix commutator identities
    def Ik_of(k, phi):
        # I_k phi in ell^2(L_{-k}) coordinates
        Lk = st.lune(k)
        Lmk = st.lune(tuple(-c for c in k))
        out = np.zeros(len(Lmk))
        for i, p in enumerate(Lk):
            out[Lmk.index(tuple(-c for c in p))] = phi[i]
        return out

    def calE_k(k, phi):
        out = np.zeros((dim, dim))
        for l in st.klist:
            Ll = st.lune(l)
            ml = tuple(-c for c in l)
            Kml = K_of[ml][0]
            Lml = st.lune(ml)
            for j, q in enumerate(Ll):
                mq = tuple(-c for c in q)
                kvec = Kml[Lml.index(mq)]  # K_{-l} e_{-q} coords in L_{-l}
                eps = st.eps_kl(k, l, phi, unit(len(Ll), j))
                bst = st.b_phi(ml, kvec).T
                out += 0.5 * acomm(eps, bst)
        return out

    worst = 0.0
    for k in st.klist:
        Lk = st.lune(k)
        Kk = K_of[k][0]
        for i in range(len(Lk)):
            phi = unit(len(Lk), i)
            lhs = comm(cK, st.b_phi(k, phi))
            mk = tuple(-c for c in k)
            rhs = st.b_phi(mk, Ik_of(k, Kk @ phi)).T + calE_k(k, phi)
            worst = max(worst, np.abs(lhs - rhs).max())
            lhs2 = comm(cK, st.b_phi(k, phi).T)
            rhs2 = st.b_phi(mk, Ik_of(k, Kk @ phi)) + calE_k(k, phi).T
            worst = max(worst, np.abs(lhs2 - rhs2).max())
    print("[calK, b_k(phi)] identity residual:", worst)

    def eps_k(k, A):
        L = st.lune(k)
        out = np.zeros((dim, dim))
        for i, p in enumerate(L):
            pmk = (p[0] - k[0], p[1] - k[1], p[2] - k[2])
            out -= A[i, i] * (st.cdg(p) @ st.c(p) + st.c(pmk) @ st.cdg(pmk))
        return out

    def calE1(k, A):
        L = st.lune(k)
        out = np.zeros((dim, dim))
        for l in st.klist:
            Ll = st.lune(l)
            ml = tuple(-c for c in l)
            Kml = K_of[ml][0]
            Lml = st.lune(ml)
            for i, p in enumerate(L):
                for j, q in enumerate(Ll):
                    mq = tuple(-c for c in q)
                    kvec = Kml[Lml.index(mq)]
                    eps = st.eps_kl(k, l, unit(len(L), i), unit(len(Ll), j))
                    out += st.b_phi(k, A[:, i]).T @ acomm(eps, st.b_phi(ml, kvec).T)
        return out

    def calE2(k, B):
        L = st.lune(k)
        mk = tuple(-c for c in k)
        Lmk = st.lune(mk)
        out = np.zeros((dim, dim))
        for l in st.klist:
            Ll = st.lune(l)
            ml = tuple(-c for c in l)
            Kl = K_of[l][0]
            Lml = st.lune(ml)
            for i, p in enumerate(L):
                mp = tuple(-c for c in p)
                for j, q in enumerate(Ll):
                    mq = tuple(-c for c in q)
                    phi_mp = unit(len(Lmk), Lmk.index(mp))
                    psi_mq = unit(len(Lml), Lml.index(mq))
                    eps = st.eps_kl(mk, ml, phi_mp, psi_mq)
                    inner = acomm(eps, st.b_phi(l, Kl[j]).T)
                    out += 0.5 * acomm(st.b_phi(k, B[:, i]), inner)
        return out

    # eq:ekk-intro
    worst = 0.0
    rng = np.random.default_rng(5)
    for k in st.klist:
        L = st.lune(k)
        A = rng.standard_normal((len(L), len(L)))
        A = 0.5 * (A + A.T)
        lhs = sum(st.b(k, p) @ st.b_phi(k, A[:, i]).T for i, p in enumerate(L))
        rhs = Q1(k, A) + np.trace(A) * I + eps_k(k, A)
        worst = max(worst, np.abs(lhs - rhs).max())
    print("ekk-intro residual:", worst)

    # calKQ1 / calKQ2 / calKHkin commutators (mirror-symmetric random A)
    worst1 = worst2 = 0.0
    for k in st.klist:
        mk = tuple(-c for c in k)
        L, Lm = st.lune(k), st.lune(mk)
        A = rng.standard_normal((len(L), len(L)))
        A = 0.5 * (A + A.T)
        # A_{-k} from mirror condition I_k A_k = A_{-k} I_k
        Am = np.zeros_like(A)
        for i, p in enumerate(L):
            for j, q in enumerate(L):
                Am[Lm.index(tuple(-c for c in p)), Lm.index(tuple(-c for c in q))] = A[i, j]
        Kk = K_of[k][0]
        lhs = comm(cK, 2 * Q1(k, A) + 2 * Q1(mk, Am))
        rhs = Q2(k, acomm(Kk, A)) + calE1(k, A) + calE1(k, A).T
        Kmk = K_of[mk][0]
        rhs += Q2(mk, acomm(Kmk, Am)) + calE1(mk, Am) + calE1(mk, Am).T
        worst1 = max(worst1, np.abs(lhs - rhs).max())

        lhs = comm(cK, Q2(k, A) + Q2(mk, Am))
        rhs = (
            2 * Q1(k, acomm(Kk, A))
            + np.trace(acomm(Kk, A)) * I
            + eps_k(k, acomm(Kk, A))
            + calE2(k, A)
            + calE2(k, A).T
        )
        rhs += (
            2 * Q1(mk, acomm(Kmk, Am))
            + np.trace(acomm(Kmk, Am)) * I
            + eps_k(mk, acomm(Kmk, Am))
            + calE2(mk, Am)
            + calE2(mk, Am).T
        )
        worst2 = max(worst2, np.abs(lhs - rhs).max())
    print("calK-Q1 commutator residual:", worst1)
    print("calK-Q2 commutator residual:", worst2)

    lhs = comm(cK, hk)
    rhs = np.zeros((dim, dim))
    for k in st.klist:
        Kk, h, P, v = K_of[k]
        rhs += Q2(k, acomm(Kk, h))
    print("calK-Hkin commutator residual:", np.abs(lhs - rhs).max())

    # ---------------- Theorem 1.2 ----------------
    nodes, wts = np.polynomial.legendre.leggauss(32)
    tins = 0.5 * (nodes + 1.0)
    wts = 0.5 * wts
    Ebos = 0.0
    RHS = hk.copy()
    for k in st.klist:
        Kk, h, P, v = K_of[k]
        ew, evv = np.linalg.eigh(Kk)
        emKk = evv @ np.diag(np.exp(-ew)) @ evv.T
        Ebos += np.trace(emKk @ h @ emKk - h) - np.dot(v, v)
        RHS += 2 * Q1(k, emKk @ h @ emKk - h)
    RHS += Ebos * I
    for t, w in zip(tins, wts):
        integ = np.zeros((dim, dim))
        for k in st.klist:
            Kk, h, P, v = K_of[k]
            ew, evv = np.linalg.eigh(Kk)
            etK = evv @ np.diag(np.exp(t * ew)) @ evv.T
            emtK = evv @ np.diag(np.exp(-t * ew)) @ evv.T
            At = 0.5 * (etK @ (h + 2 * P) @ etK + emtK @ h @ emtK) - h
            Bt = 0.5 * (etK @ (h + 2 * P) @ etK - emtK @ h @ emtK)
            integ += eps_k(k, acomm(Kk, Bt))
            E1 = calE1(k, At)
            E2 = calE2(k, Bt)
            integ += E1 + E1.T + E2 + E2.T
        eL = expm_antisym((1 - t) * cK)
        eR = expm_antisym(-(1 - t) * cK)
        RHS += w * eL @ integ @ eR
    LHS = eK @ Heff @ emK
    print("THEOREM diag identity residual:", np.abs(LHS - RHS).max())
    print("E_bos constant (trunc):", repr(Ebos))

    # exchange closed form
    worst = 0.0
    for k in st.klist:
        L = st.lune(k)
        B = rng.standard_normal((len(L), len(L)))
        B = 0.5 * (B + B.T)
        lhs = st.psi @ calE2(k, B) @ st.psi
        rhs = 0.0
        for i, p in enumerate(L):
            for j, q in enumerate(L):
                lvec = (p[0] + q[0] - k[0], p[1] + q[1] - k[1], p[2] + q[2] - k[2])
                if lvec in K_of:
                    Kl = K_of[lvec][0]
                    Ll = st.lune(lvec)
                    rhs -= B[i, j] * Kl[Ll.index(q), Ll.index(p)]
        worst = max(worst, abs(lhs - rhs))
    print("exchange closed form residual:", worst)

    # D operators, cubic term, Q_SR
    def Dk(k):
        D = np.zeros((dim, dim))
        bfset = set(st.bf)
        pset = set(st.parts)
        for q in st.bf:
            qmk = (q[0] - k[0], q[1] - k[1], q[2] - k[2])
            if qmk in bfset:
                D += st.cdg(qmk) @ st.c(q)
        for p in st.parts:
            ppk = (p[0] + k[0], p[1] + k[1], p[2] + k[2])
            if ppk in pset:
                D += st.cdg(p) @ st.c(ppk)
        return D

    NE = st.NE()
    # cubic vanishing on N_E eigenvectors
    C3 = np.zeros((dim, dim))
    for k in st.klist:
        mk = tuple(-c for c in k)
        Bk = sum(st.b(k, p) for p in st.lune(k))
        Bmk = sum(st.b(mk, p) for p in st.lune(mk))
        D = Dk(k)
        pref = st.vhat(k) / st.kf / (2 * TWO_PI3)
        C3 += pref * ((Bk.T + Bmk) @ D + D.T @ (Bk + Bmk.T))
    worstc = abs(st.psi @ C3 @ st.psi)
    # also on the transformed state and random N_E eigenvectors
    npart = np.rint(np.diag(NE)).astype(int)
    nham = np.rint(np.diag(sum(st.cdg(m) @ st.c(m) for m in st.modes))).astype(int)
    Nfill = len(st.bf)
    for Mval in range(0, 3):
        sel = np.where((npart == Mval) & (nham == Nfill))[0]
        if len(sel) == 0:
            continue
        v = np.zeros(dim)
        v[sel] = rng.standard_normal(len(sel))
        v /= np.linalg.norm(v)
        tv = emK @ v
        worstc = max(worstc, abs(tv @ C3 @ tv))
    print("cubic vanishing residual:", worstc)

    # PSD bound: 2 sqrt5 sqrt(sum ||K||_HS^2)(N_E+1) -/+ [calK,N_E] >= 0
    hs2 = sum(np.linalg.norm(K_of[k][0]) ** 2 for k in st.klist)
    Cb = 2 * math.sqrt(5) * math.sqrt(hs2)
    Mplus = Cb * (NE + I) - comm(cK, NE)
    Mminus = Cb * (NE + I) + comm(cK, NE)
    print(
        "PSD commutator bound min eigs:",
        np.linalg.eigvalsh(0.5 * (Mplus + Mplus.T)).min(),
        np.linalg.eigvalsh(0.5 * (Mminus + Mminus.T)).min(),
    )

    # sum_k N_k = N_E^2 over full difference set (truncated N_k)
    diffs = set()
    for p in st.parts:
        for h in st.bf:
            diffs.add((p[0] - h[0], p[1] - h[1], p[2] - h[2]))
    tot = np.zeros((dim, dim))
    bfset = set(st.bf)
    for k in diffs:
        for p in st.parts:
            pmk = (p[0] - k[0], p[1] - k[1], p[2] - k[2])
            if pmk in bfset:
                bkp = st.b(k, p)
                tot += bkp.T @ bkp
    # identity holds on the fixed-particle-number sector only
    nham = np.rint(np.diag(sum(st.cdg(m) @ st.c(m) for m in st.modes))).astype(int)
    sec = np.where(nham == len(st.bf))[0]
    diffm = (tot - NE @ NE)[np.ix_(sec, sec)]
    print("sum N_k - N_E^2 residual (sector):", np.abs(diffm).max())

    # Q decomposition per-k (direct bracket vs G+LR+SR brackets)
    bfset = set(st.bf)
    pset = set(st.parts)
    for k in st.klist:
        L = st.lune(k)
        D = Dk(k)
        direct = D.T @ D
        for p in L:
            pmk = (p[0] - k[0], p[1] - k[1], p[2] - k[2])
            direct -= st.cdg(p) @ st.c(p) + st.c(pmk) @ st.cdg(pmk)
        G = np.zeros((dim, dim))
        for q in st.bf:
            qpk = (q[0] + k[0], q[1] + k[1], q[2] + k[2])
            if qpk in bfset:
                G += 2 * st.c(q) @ st.cdg(q)
        for p in st.parts:
            pmk = (p[0] - k[0], p[1] - k[1], p[2] - k[2])
            if pmk in bfset:
                G -= 2 * st.cdg(p) @ st.c(p)
        QLR = np.zeros((dim, dim))
        for p in st.bf:
            pmk = (p[0] - k[0], p[1] - k[1], p[2] - k[2])
            if pmk not in bfset:
                continue
            for q in st.bf:
                qmk = (q[0] - k[0], q[1] - k[1], q[2] - k[2])
                if qmk in bfset:
                    QLR += st.c(pmk) @ st.c(q) @ st.cdg(qmk) @ st.cdg(p)
        D1 = np.zeros((dim, dim))
        for q in st.bf:
            qmk = (q[0] - k[0], q[1] - k[1], q[2] - k[2])
            if qmk in bfset:
                D1 += st.cdg(qmk) @ st.c(q)
        D2 = np.zeros((dim, dim))
        for p in st.parts:
            ppk = (p[0] + k[0], p[1] + k[1], p[2] + k[2])
            if ppk in pset:
                D2 += st.cdg(p) @ st.c(ppk)
        QLR += D1.T @ D2 + D2.T @ D1
        QSR = np.zeros((dim, dim))
        for p in st.parts:
            ppk = (p[0] + k[0], p[1] + k[1], p[2] + k[2])
            if ppk not in pset:
                continue
            for q in st.parts:
                qpk = (q[0] + k[0], q[1] + k[1], q[2] + k[2])
                if qpk in pset:
                    QSR += st.cdg(ppk) @ st.cdg(q) @ st.c(qpk) @ st.c(p)
        resid = np.abs(direct - (G + QLR + QSR)).max()
        # closure: (QC1) L_k within modes, (QC2) p-k in BF_or_modes for all particle p
        qc1 = all(p in pset for p in L)
        qc2 = all(
            ((p[0] - k[0], p[1] - k[1], p[2] - k[2]) in bfset)
            or ((p[0] - k[0], p[1] - k[1], p[2] - k[2]) in pset)
            for p in st.parts
        )
        print(f"Q-decomposition k={k}: residual={resid:.3e} closed={(qc1 and qc2)}")
        # quartic normal-order identities (always exact)
        no2 = D2.T @ D2
        for q in st.parts:
            qpk = (q[0] + k[0], q[1] + k[1], q[2] + k[2])
            if qpk in pset:
                no2 -= st.cdg(qpk) @ st.c(qpk)
        print("  quartic_normal_order D2 residual:", np.abs(no2 - QSR).max())

        # Q_SR psi_FS = 0 and D_k psi_FS, B_k psi_FS
        Bk = sum(st.b(k, p) for p in L)
        print(
            "  QSR/D/B on psi_FS:",
            np.abs(QSR @ st.psi).max(),
            np.abs(D @ st.psi).max(),
            np.abs(Bk @ st.psi).max(),
        )
        print("  [N_E,B_k]+B_k residual:", np.abs(comm(NE, Bk) + Bk).max())

    # eps_kk(phi,phi) <= 0
    worst = -np.inf
    for k in st.klist:
        L = st.lune(k)
        for _ in range(5):
            phi = rng.standard_normal(len(L))
            E = st.eps_kl(k, k, phi, phi)
            worst = max(worst, np.linalg.eigvalsh(0.5 * (E + E.T)).max())
    print("eps_kk max eigenvalue (<=0 expected):", worst)

    # kernel HS-bound + calK-tilde bound (Prop 2.4 form) on random sector states
    tK = np.zeros((dim, dim))
    for l in st.klist:
        Kl = K_of[l][0]
        L = st.lune(l)
        ml = tuple(-c for c in l)
        for i, p in enumerate(L):
            for j, q in enumerate(L):
                mq = tuple(-c for c in q)
                tK += 0.5 * Kl[i, j] * st.b(l, p) @ st.b(ml, mq)
    print("calK = tildeK - tildeK*:", np.abs(cK - (tK - tK.T)).max())
    worst = -np.inf
    nham = np.rint(np.diag(sum(st.cdg(m) @ st.c(m) for m in st.modes))).astype(int)
    sel = np.where(nham == len(st.bf))[0]
    for _ in range(100):
        P1 = np.zeros(dim)
        P1[sel] = rng.standard_normal(len(sel))
        P1 /= np.linalg.norm(P1)
        P2 = np.zeros(dim)
        P2[sel] = rng.standard_normal(len(sel))
        P2 /= np.linalg.norm(P2)
        lhs = abs(P1 @ tK @ P2)
        rhs = (
            math.sqrt(5)
            / 2
            * math.sqrt(hs2)
            * math.sqrt((P1 @ (NE + I) @ P1) * (P2 @ NE @ P2))
        )
        worst = max(worst, lhs - rhs)
    print("calK-tilde bound max (lhs-rhs) [<=0 expected]:", worst)
    return Ebos


if __name__ == "__main__":
    rng = np.random.default_rng(12345)
    check_lemma_2_2()
    check_triple_excitation_bound(rng)

    table = lambda k: TWO_PI3 if k in [(1, 0, 0), (-1, 0, 0)] else 0.0
    st3 = Setup(0.9, [(1, 0, 0), (-1, 0, 0)], table)
    e3 = check_setup(st3, "3-mode, kf=0.9, table potential")
    print("expected E_bos 2*(-0.15802808769980492) =", repr(2 * -0.15802808769980492))

    table5 = lambda k: TWO_PI3 if sum(c * c for c in k) == 1 else 0.0
    st5 = Setup(0.9, [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0)], table5)
    check_setup(st5, "5-mode, kf=0.9, table potential (4 k's)")

    coul = lambda k: (
        0.0 if k == (0, 0, 0) else 1.0 / sum(c * c for c in k)
    )
    st3c = Setup(0.9, [(1, 0, 0), (-1, 0, 0)], coul)
    check_setup(st3c, "3-mode, kf=0.9, coulomb g=1")
