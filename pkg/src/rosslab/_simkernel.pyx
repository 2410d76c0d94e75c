# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled event loop of the modulated-arrival queue simulator.

Same arithmetic, in the same order, as ``_simkernel_py.run``.
"""

NAME = "compiled"

cdef enum:
    STATE = 0
    K = 1
    IE = 2
    IU = 3
    IA = 4
    IS = 5
    WARM = 6
    BLEN = 7
    NB = 8
    CUR = 9

cdef enum:
    DONE = 0
    NEED_ENV_EXP = 1
    NEED_ENV_U = 2
    NEED_ARR = 3
    NEED_SVC = 4


def run(double[::1] fstate, long long[::1] istate, const double[::1] lam,
        const double[::1] hold_rate, const double[:, ::1] jump_cum,
        const double[::1] env_exp, const double[::1] env_u,
        const double[::1] arr_exp, const double[::1] svc,
        double[::1] area, double[::1] span, double[::1] wsum, double[::1] wcnt):
    cdef double t = fstate[0], v = fstate[1], h = fstate[2], a = fstate[3]
    cdef double ls, dt, u
    cdef Py_ssize_t state = istate[STATE], ie = istate[IE], iu = istate[IU]
    cdef Py_ssize_t ia = istate[IA], isv = istate[IS], j
    cdef long long k = istate[K], warm = istate[WARM], blen = istate[BLEN]
    cdef long long nb = istate[NB], cur = istate[CUR]
    cdef long long k_end = warm + nb * blen
    cdef Py_ssize_t n_ee = env_exp.shape[0], n_eu = env_u.shape[0]
    cdef Py_ssize_t n_ae = arr_exp.shape[0], n_sv = svc.shape[0]
    cdef Py_ssize_t m = lam.shape[0]
    cdef int status = DONE

    with nogil:
        while True:
            ls = lam[state]
            if ls > 0.0 and a < ls * h:
                if k != k_end:
                    if isv == n_sv:
                        status = NEED_SVC
                        break
                    if ia == n_ae:
                        status = NEED_ARR
                        break
                dt = a / ls
                h = h - dt
                if cur >= 0:
                    span[cur] += dt
                    if v > dt:
                        area[cur] += v * dt - 0.5 * dt * dt
                    else:
                        area[cur] += 0.5 * v * v
                if v > dt:
                    v = v - dt
                else:
                    v = 0.0
                t = t + dt
                if k == k_end:
                    status = DONE
                    break
                if k >= warm:
                    cur = (k - warm) // blen
                    wsum[cur] += v
                    wcnt[cur] += 1.0
                v = v + svc[isv]
                isv += 1
                a = arr_exp[ia]
                ia += 1
                k += 1
            else:
                if ie == n_ee:
                    status = NEED_ENV_EXP
                    break
                if iu == n_eu:
                    status = NEED_ENV_U
                    break
                dt = h
                a = a - ls * h
                if cur >= 0:
                    span[cur] += dt
                    if v > dt:
                        area[cur] += v * dt - 0.5 * dt * dt
                    else:
                        area[cur] += 0.5 * v * v
                if v > dt:
                    v = v - dt
                else:
                    v = 0.0
                t = t + dt
                u = env_u[iu]
                iu += 1
                j = 0
                while j < m - 1 and not u < jump_cum[state, j]:
                    j += 1
                state = j
                h = env_exp[ie] / hold_rate[state]
                ie += 1

    fstate[0] = t
    fstate[1] = v
    fstate[2] = h
    fstate[3] = a
    istate[STATE] = state
    istate[K] = k
    istate[IE] = ie
    istate[IU] = iu
    istate[IA] = ia
    istate[IS] = isv
    istate[CUR] = cur
    return status
