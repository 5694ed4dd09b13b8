"""Independent reference evaluations used by the tests (arbitrary precision, brute force)."""
import mpmath as mp

mp.mp.dps = 50


def h_mp(x):
    x = mp.mpf(x)
    if x == 0:
        return mp.mpf(0)
    if x > mp.mpf("0.5"):
        return mp.mpf(1)
    return -x * mp.log(x, 2) - (1 - x) * mp.log(1 - x, 2)


def zeta_mp(V, mu):
    V, mu = mp.mpf(V), mp.mpf(mu)
    return (2 * V - 1) * mp.exp(-mu) - 2 * mp.sqrt((1 - mp.exp(-2 * mu)) * V * (1 - V))


def key_length_mp(n, Q, V, mu, eps_qkd=1e-10, eps_cor=None, f_ir=1.2):
    """Unclamped finite-key length."""
    n, Q = mp.mpf(n), mp.mpf(Q)
    eps_qkd = mp.mpf(eps_qkd)
    beta = eps_qkd / 4
    eps_cor = beta if eps_cor is None else mp.mpf(eps_cor)
    z = zeta_mp(V, mu)
    arg = (1 - z) / 2
    h_phase = mp.mpf(1) if arg > mp.mpf("0.5") else h_mp(arg)
    return (n * (1 - Q - (1 - Q) * h_phase) - 7 * mp.sqrt(n * mp.log(1 / beta, 2))
            - mp.mpf(f_ir) * h_mp(Q) * n - mp.log(1 / (2 * eps_cor * beta ** 2), 2))
