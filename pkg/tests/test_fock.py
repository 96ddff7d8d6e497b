import itertools

import numpy as np
import pytest

from topopump import build_fock_ops


def test_p_range_guard():
    with pytest.raises(ValueError):
        build_fock_ops(0)
    with pytest.raises(ValueError):
        build_fock_ops(5)


def test_number_operators_p2():
    ops = build_fock_ops(2)
    n1 = ops.bilinears[0, 0]
    n2 = ops.bilinears[1, 1]
    assert np.allclose(n1, np.diag([0.0, 1.0, 0.0, 1.0]))
    assert np.allclose(n2, np.diag([0.0, 0.0, 1.0, 1.0]))


def test_hop_sign_p2():
    # basis order (|00>, |10>, |01>, |11>): cdag_1 c_2 maps |01> -> +|10>
    ops = build_fock_ops(2)
    hop = ops.bilinears[0, 1]
    src = np.zeros(4)
    src[2] = 1.0  # |01>
    out = hop @ src
    expect = np.zeros(4)
    expect[1] = 1.0  # +|10>
    assert np.allclose(out, expect)
    for idx in (0, 1, 3):
        src = np.zeros(4)
        src[idx] = 1.0
        assert np.allclose(hop @ src, 0.0)


@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_anticommutators(p):
    ops = build_fock_ops(p)
    eye = np.eye(ops.dim)
    for mu, nu in itertools.product(range(p), repeat=2):
        acc = ops.c[mu] @ ops.cdag[nu] + ops.cdag[nu] @ ops.c[mu]
        assert np.abs(acc - (eye if mu == nu else 0.0)).max() <= 1e-14
        acc2 = ops.c[mu] @ ops.c[nu] + ops.c[nu] @ ops.c[mu]
        assert np.abs(acc2).max() <= 1e-14


def test_bilinear_adjoint_identity():
    ops = build_fock_ops(3)
    for mu, nu in itertools.product(range(3), repeat=2):
        assert np.abs(ops.bilinears[mu, nu].conj().T - ops.bilinears[nu, mu]).max() <= 1e-14
