"""Jordan-Wigner fermion operators on the occupation basis of p modes.

Basis ordering: |n_1 n_2 ... n_p> with n_1 fastest-varying, i.e. the state
index is sum_mu n_mu 2^(mu-1). The string convention is
c_mu = (prod_{nu<mu} sigma^z_nu) sigma^-_mu.
"""

from dataclasses import dataclass
from functools import reduce

import numpy as np

__all__ = ["FockOperatorSet", "build_fock_ops"]

_SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]])
_SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]])
_ID2 = np.eye(2)


@dataclass(frozen=True)
class FockOperatorSet:
    """Annihilation, creation, and bilinear matrices for p fermionic modes.

    ``c``/``cdag`` have shape (p, 2^p, 2^p); ``bilinears[mu, nu]`` is
    cdag_mu c_nu.
    """

    p: int
    c: np.ndarray
    cdag: np.ndarray
    bilinears: np.ndarray

    @property
    def dim(self):
        return 2 ** self.p


def _kron_chain(factors):
    # np.kron(A, B) puts B on the fast index, so list factors slow-to-fast
    return reduce(np.kron, factors)


def _jw_annihilation(mu, p):
    """c_mu on p modes; mode 1 occupies the fastest-varying (least significant) slot."""
    factors = []
    for site in range(p, 0, -1):  # slow (mode p) to fast (mode 1)
        if site > mu:
            factors.append(_ID2)
        elif site == mu:
            factors.append(_SIGMA_MINUS)
        else:
            factors.append(_SIGMA_Z)
    return _kron_chain(factors)


def build_fock_ops(p):
    """Jordan-Wigner operator set for p modes (1 <= p <= 4)."""
    if not 1 <= p <= 4:
        raise ValueError(f"p = {p} outside the supported range [1, 4]")
    c = np.stack([_jw_annihilation(mu, p) for mu in range(1, p + 1)])
    cdag = np.conj(np.swapaxes(c, -1, -2))
    bil = np.einsum("mab,nbc->mnac", cdag, c)
    return FockOperatorSet(p=p, c=c, cdag=cdag, bilinears=bil)
