# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Monte Carlo kernels.

Parameter layout is shared with :mod:`gwldp._fallback`; see
``gwldp.laws.SummandLaw.kernel_vector`` and
``gwldp.gw.offspring.OffspringLaw.kernel_table``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, exp, pow, floor
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t STREAM_MUL = 0xD1B54A32D192ED03ULL
cdef uint64_t STREAM_ADD = 0x8CB92BA72F3D8DD7ULL
cdef double TWO_M53 = 1.1102230246251565e-16
cdef double E_CONST = 2.718281828459045
cdef double KAHAN_THRESHOLD = 1e6


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t key_of(uint64_t seed, uint64_t stream) noexcept nogil:
    cdef uint64_t base = mix64(seed + GOLDEN)
    return mix64(base ^ (stream * STREAM_MUL + STREAM_ADD))


cdef struct Rng:
    uint64_t key
    uint64_t ctr


cdef inline double next_u(Rng* r) noexcept nogil:
    r.ctr += 1
    cdef uint64_t z = mix64(r.key + r.ctr * GOLDEN)
    return (<double>(z >> 11) + 0.5) * TWO_M53


cdef struct Table:
    int kind            # 0 alias over finite support, 1 shifted geometric
    double log_a
    int64_t size
    double* prob
    int64_t* alias
    int64_t* values


cdef struct Law:
    int kind            # 0 two-piece, 1 lattice +-1, 2 centred offspring
    double x0, cm, w, cp, shift
    double beta_r, delta_r, lr0
    int lk_r
    double idx_l, delta_l, ll0
    int lk_l


cdef inline double sv_eval(int kind, double delta, double x) noexcept nogil:
    if kind == 0:
        return 1.0
    elif kind == 1:
        return pow(log(E_CONST + x), delta)
    return pow(log(E_CONST + log(E_CONST + x)), delta)


cdef inline double tail_eval(double mass, double idx, int lk, double delta,
                             double l0, double x0, double z) noexcept nogil:
    return mass * pow(z / x0, -idx) * sv_eval(lk, delta, z) / l0


cdef double tail_inverse(double mass, double idx, int lk, double delta,
                         double l0, double x0, double u) noexcept nogil:
    """Solve tail(z) = u for z >= x0 (tail decreasing from ``mass``)."""
    cdef double lo, hi, mid, guess
    cdef int it
    if u >= mass:
        return x0
    if lk == 0:
        return x0 * pow(mass / u, 1.0 / idx)
    guess = log(x0) + log(mass / u) / idx
    lo = log(x0)
    hi = guess
    if tail_eval(mass, idx, lk, delta, l0, x0, exp(hi)) >= u:
        lo = hi
        hi = hi + 1.0
        while tail_eval(mass, idx, lk, delta, l0, x0, exp(hi)) >= u:
            lo = hi
            hi = hi + 2.0 * (hi - lo + 1.0)
    for it in range(200):
        if hi - lo <= 1e-12:
            break
        mid = 0.5 * (lo + hi)
        if tail_eval(mass, idx, lk, delta, l0, x0, exp(mid)) >= u:
            lo = mid
        else:
            hi = mid
    return exp(0.5 * (lo + hi))


cdef inline int64_t table_draw(Table* t, double u) noexcept nogil:
    cdef double x
    cdef int64_t i
    if t.kind == 1:
        return 1 + <int64_t>floor(log(u) / t.log_a)
    x = u * t.size
    i = <int64_t>x
    if i >= t.size:
        i = t.size - 1
    if x - i < t.prob[i]:
        return t.values[i]
    return t.values[t.alias[i]]


cdef inline double law_draw(Law* law, Table* st, double u) noexcept nogil:
    cdef double y
    if law.kind == 1:
        return -1.0 if u < 0.5 else 1.0
    if law.kind == 2:
        return <double>table_draw(st, u) - law.shift
    if u < law.cm:
        y = -tail_inverse(law.cm, law.idx_l, law.lk_l, law.delta_l, law.ll0, law.x0, u)
    elif u < law.cm + law.w:
        y = -law.x0 + 2.0 * law.x0 * (u - law.cm) / law.w
    else:
        y = tail_inverse(law.cp, law.beta_r, law.lk_r, law.delta_r, law.lr0, law.x0, 1.0 - u)
    return y + law.shift


cdef Law make_law(double[::1] v):
    cdef Law law
    law.kind = <int>v[0]
    law.x0 = v[1]
    law.cm = v[2]
    law.w = v[3]
    law.cp = v[4]
    law.shift = v[5]
    law.beta_r = v[6]
    law.lk_r = <int>v[7]
    law.delta_r = v[8]
    law.lr0 = v[9]
    law.idx_l = v[10]
    law.lk_l = <int>v[11]
    law.delta_l = v[12]
    law.ll0 = v[13]
    return law


cdef Table make_table(tuple spec):
    # the arrays stay alive through ``spec``, owned by the caller
    cdef double[::1] prob = spec[2]
    cdef int64_t[::1] alias = spec[3]
    cdef int64_t[::1] values = spec[4]
    cdef Table t
    t.kind = <int>spec[0]
    t.log_a = <double>spec[1]
    t.size = prob.shape[0]
    t.prob = &prob[0]
    t.alias = &alias[0]
    t.values = &values[0]
    return t


def uniforms(uint64_t key, uint64_t start, Py_ssize_t count):
    """Unit draws ``start .. start+count-1`` of stream ``key``."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(count, dtype=np.float64)
    cdef double[::1] o = out
    cdef Rng r
    cdef Py_ssize_t i
    r.key = key
    r.ctr = start
    with nogil:
        for i in range(count):
            o[i] = next_u(&r)
    return out


def sample_law(double[::1] law_vec, tuple sum_table, uint64_t key,
               uint64_t start, Py_ssize_t count):
    """``count`` summand draws from stream ``key`` starting at ``start``."""
    cdef Law law = make_law(law_vec)
    cdef Table st = make_table(sum_table)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(count, dtype=np.float64)
    cdef double[::1] o = out
    cdef Rng r
    cdef Py_ssize_t i
    r.key = key
    r.ctr = start
    with nogil:
        for i in range(count):
            o[i] = law_draw(&law, &st, next_u(&r))
    return out


def walk_checkpoints(double[::1] law_vec, tuple sum_table, uint64_t seed,
                     uint64_t stream0, Py_ssize_t reps, int64_t[::1] checkpoints):
    """Partial sums S_k at the given increasing checkpoints, one row per replicate."""
    cdef Law law = make_law(law_vec)
    cdef Table st = make_table(sum_table)
    cdef Py_ssize_t nc = checkpoints.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((reps, nc), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t r, c
    cdef int64_t i, kmax = checkpoints[nc - 1]
    cdef double s, comp, x, t
    cdef bint kahan = kmax > KAHAN_THRESHOLD
    cdef Rng g
    with nogil:
        for r in range(reps):
            g.key = key_of(seed, stream0 + r)
            g.ctr = 0
            s = 0.0
            comp = 0.0
            c = 0
            for i in range(1, kmax + 1):
                x = law_draw(&law, &st, next_u(&g))
                if kahan:
                    t = s + x
                    if (s if s >= 0 else -s) >= (x if x >= 0 else -x):
                        comp += (s - t) + x
                    else:
                        comp += (x - t) + s
                    s = t
                else:
                    s += x
                if i == checkpoints[c]:
                    o[r, c] = s + comp
                    c += 1
    return out


cdef inline int64_t grow(Table* t, Rng* g, int64_t z, int64_t* draws,
                         int64_t budget) noexcept nogil:
    cdef int64_t i, total = 0
    if draws[0] + z > budget:
        return -1
    draws[0] += z
    for i in range(z):
        total += table_draw(t, next_u(g))
    return total


def simulate_generations(tuple off_table, uint64_t seed, uint64_t stream0,
                         Py_ssize_t reps, int n, int64_t budget):
    """Z_n for ``reps`` replicates; -1 marks a replicate that hit the budget."""
    cdef Table t = make_table(off_table)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(reps, dtype=np.int64)
    cdef int64_t[::1] o = out
    cdef Py_ssize_t r
    cdef int gen
    cdef int64_t z, draws
    cdef Rng g
    with nogil:
        for r in range(reps):
            g.key = key_of(seed, stream0 + r)
            g.ctr = 0
            z = 1
            draws = 0
            for gen in range(n):
                z = grow(&t, &g, z, &draws, budget)
                if z < 0:
                    break
            o[r] = z
    return out


def ldp_replicates(tuple off_table, double[::1] law_vec, tuple sum_table,
                   uint64_t seed, uint64_t stream0, Py_ssize_t reps, int n,
                   int64_t budget, int mode, double mean):
    """Per replicate: Z_n and S.

    mode 0: S = S_{Z_n}, a sum of Z_n summand draws.
    mode 1: S = Z_{n+1} - mean * Z_n (one extra generation of the process).
    Z = -1 flags a discarded replicate.
    """
    cdef Table t = make_table(off_table)
    cdef Table st = make_table(sum_table)
    cdef Law law = make_law(law_vec)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] zout = np.empty(reps, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sout = np.empty(reps, dtype=np.float64)
    cdef int64_t[::1] zo = zout
    cdef double[::1] so = sout
    cdef Py_ssize_t r
    cdef int gen
    cdef int64_t z, z1, draws, i
    cdef double s, comp, x, tt
    cdef Rng g
    with nogil:
        for r in range(reps):
            g.key = key_of(seed, stream0 + r)
            g.ctr = 0
            z = 1
            draws = 0
            for gen in range(n):
                z = grow(&t, &g, z, &draws, budget)
                if z < 0:
                    break
            if z < 0:
                zo[r] = -1
                so[r] = 0.0
                continue
            if mode == 1:
                z1 = grow(&t, &g, z, &draws, budget)
                if z1 < 0:
                    zo[r] = -1
                    so[r] = 0.0
                    continue
                zo[r] = z
                so[r] = <double>z1 - mean * <double>z
                continue
            s = 0.0
            comp = 0.0
            if z > KAHAN_THRESHOLD:
                for i in range(z):
                    x = law_draw(&law, &st, next_u(&g))
                    tt = s + x
                    if (s if s >= 0 else -s) >= (x if x >= 0 else -x):
                        comp += (s - tt) + x
                    else:
                        comp += (x - tt) + s
                    s = tt
                s += comp
            else:
                for i in range(z):
                    s += law_draw(&law, &st, next_u(&g))
            zo[r] = z
            so[r] = s
    return zout, sout
