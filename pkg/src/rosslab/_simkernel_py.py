"""Pure-Python event loop of the modulated-arrival queue simulator.

Mirror of ``_simkernel.pyx`` operation for operation, so both produce
bit-identical results. See :mod:`rosslab.sim` for the calling protocol.
"""

NAME = "python"

# istate slots
STATE, K, IE, IU, IA, IS, WARM, BLEN, NB, CUR = range(10)
# fstate slots
T, V, HREM, AREM = range(4)

DONE, NEED_ENV_EXP, NEED_ENV_U, NEED_ARR, NEED_SVC = range(5)


def run(fstate, istate, lam, hold_rate, jump_cum, env_exp, env_u, arr_exp, svc,
        area, span, wsum, wcnt):
    lam_l = lam.tolist()
    hold_l = hold_rate.tolist()
    cum_l = jump_cum.tolist()
    ee = env_exp.tolist()
    eu = env_u.tolist()
    ae = arr_exp.tolist()
    sv = svc.tolist()
    ar = area.tolist()
    sp = span.tolist()
    ws = wsum.tolist()
    wc = wcnt.tolist()
    n_ee, n_eu, n_ae, n_sv = len(ee), len(eu), len(ae), len(sv)
    m = len(lam_l)

    t, v, h, a = fstate[T], fstate[V], fstate[HREM], fstate[AREM]
    state, k, ie, iu, ia, isv = (int(istate[s]) for s in (STATE, K, IE, IU, IA, IS))
    warm, blen, nb, cur = (int(istate[s]) for s in (WARM, BLEN, NB, CUR))
    k_end = warm + nb * blen
    status = DONE

    while True:
        ls = lam_l[state]
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
                sp[cur] += dt
                if v > dt:
                    ar[cur] += v * dt - 0.5 * dt * dt
                else:
                    ar[cur] += 0.5 * v * v
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
                ws[cur] += v
                wc[cur] += 1.0
            v = v + sv[isv]
            isv += 1
            a = ae[ia]
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
                sp[cur] += dt
                if v > dt:
                    ar[cur] += v * dt - 0.5 * dt * dt
                else:
                    ar[cur] += 0.5 * v * v
            if v > dt:
                v = v - dt
            else:
                v = 0.0
            t = t + dt
            u = eu[iu]
            iu += 1
            row = cum_l[state]
            j = 0
            while j < m - 1 and not u < row[j]:
                j += 1
            state = j
            h = ee[ie] / hold_l[state]
            ie += 1

    fstate[T], fstate[V], fstate[HREM], fstate[AREM] = t, v, h, a
    for s, val in ((STATE, state), (K, k), (IE, ie), (IU, iu), (IA, ia), (IS, isv), (CUR, cur)):
        istate[s] = val
    area[:] = ar
    span[:] = sp
    wsum[:] = ws
    wcnt[:] = wc
    return status
