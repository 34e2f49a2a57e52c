"""Factorization builders: interpolation identity, hand oracles,
singular-set behaviour, boundedness, controllability."""

import math

import numpy as np
import pytest

from sdreso.errors import (ConfigError, DimensionError, SingularStateError)
from sdreso.sdc import (ContinuousScalarSdc, ContinuousSdc, DiscontinuousSdc,
                        Estimate, SystemDims, assemble, build_f_continuous,
                        build_f_continuous_scalar, build_f_discontinuous,
                        build_f_hat, build_w_continuous,
                        controllability_check)

VARIANT_CASES = [
    (ContinuousSdc(), SystemDims(k=2, n=2)),
    (ContinuousSdc(sharpness=3.0), SystemDims(k=3, n=2)),
    (ContinuousScalarSdc(), SystemDims(k=2, n=1)),
    (DiscontinuousSdc(), SystemDims(k=2, n=1)),
    (DiscontinuousSdc(), SystemDims(k=3, n=2)),
]


def random_estimate(rng, dims, low=0.1, high=3.0):
    kn = dims.state_dim
    xh = rng.uniform(low, high, size=kn) * rng.choice([-1.0, 1.0], size=kn)
    ext = rng.uniform(-5.0, 5.0, size=dims.n)
    return Estimate(xhat=xh, xhat_ext=ext)


def test_interpolation_identity_all_variants():
    rng = np.random.default_rng(31)
    for variant, dims in VARIANT_CASES:
        for _ in range(300):
            est = random_estimate(rng, dims)
            f, _ = build_f_hat(est, dims, variant)
            err = np.linalg.norm(f @ est.xhat - est.xhat_ext)
            assert err <= 1e-10 * (1.0 + np.linalg.norm(est.xhat_ext))


def test_continuous_weight_rows_sum_to_one():
    rng = np.random.default_rng(32)
    dims = SystemDims(k=2, n=3)
    for _ in range(100):
        est = random_estimate(rng, dims)
        w = build_w_continuous(est, dims, ContinuousSdc())
        assert np.allclose(w.sum(axis=1), 1.0, atol=1e-12)


def test_continuous_hand_oracle():
    # k=1, n=2, sharpness 1: row i concentrates on its own entry, so
    # p_0 = exp(-|x2|/|x1|), p_1 = exp(-|x1|/|x2|); F = W * ext_i / x_j
    dims = SystemDims(k=1, n=2)
    est = Estimate(xhat=[2.0, 4.0], xhat_ext=[6.0, 8.0])
    f = build_f_continuous(est, dims, ContinuousSdc())
    e2, eh = math.exp(-2.0), math.exp(-0.5)
    expect = np.array([
        [e2 * 6.0 / 2.0, (1.0 - e2) * 6.0 / 4.0],
        [(1.0 - eh) * 8.0 / 2.0, eh * 8.0 / 4.0],
    ])
    assert np.allclose(f, expect, atol=1e-14)
    assert np.allclose(f, [[0.4060058497098381, 1.2969970751450809],
                           [1.5738773611494664, 1.2130613194252668]],
                       atol=1e-12)


def test_continuous_rejects_single_channel_and_zeros():
    with pytest.raises(DimensionError):
        build_f_continuous(Estimate(xhat=[1.0, 1.0], xhat_ext=[1.0]),
                           SystemDims(k=2, n=1), ContinuousSdc())
    with pytest.raises(SingularStateError):
        build_f_continuous(Estimate(xhat=[0.0, 1.0], xhat_ext=[1.0, 1.0]),
                           SystemDims(k=1, n=2), ContinuousSdc())


def test_scalar_hand_oracle():
    est = Estimate(xhat=[1.0, 2.0], xhat_ext=[3.0])
    f = build_f_continuous_scalar(est)
    assert np.allclose(f, [[0.4060058497098381, 1.2969970751450809]],
                       atol=1e-12)
    assert f @ est.xhat == pytest.approx(3.0, abs=1e-12)


def test_scalar_singularities():
    with pytest.raises(SingularStateError):
        build_f_continuous_scalar(Estimate(xhat=[0.0, 1.0], xhat_ext=[1.0]))
    with pytest.raises(SingularStateError):
        build_f_continuous_scalar(Estimate(xhat=[1.0, 0.0], xhat_ext=[1.0]))
    # opposite signs blow the exponential up once the ratio is large
    with pytest.raises(SingularStateError):
        build_f_continuous_scalar(
            Estimate(xhat=[1e-3, -1.0], xhat_ext=[1.0]))


def test_discontinuous_hand_oracle():
    # anchor column 0 (|0.5| < |2|): F[0] = ext; the other column carries
    # (1 - x_anchor) * ext / x_j
    est = Estimate(xhat=[0.5, 2.0], xhat_ext=[4.0])
    f, info = build_f_discontinuous(est, SystemDims(k=2, n=1),
                                    DiscontinuousSdc())
    assert np.allclose(f, [[4.0, 1.0]], atol=1e-14)
    assert not info.tie


def test_discontinuous_tie_breaks_to_lowest_index():
    est = Estimate(xhat=[1.0, -1.0], xhat_ext=[2.0])
    f, info = build_f_discontinuous(est, SystemDims(k=2, n=1),
                                    DiscontinuousSdc())
    assert info.tie
    # anchor is index 0, so its column holds the extension itself
    assert f[0, 0] == pytest.approx(2.0)
    assert np.allclose(f @ est.xhat, est.xhat_ext, atol=1e-12)


def test_discontinuous_zero_anchor_keeps_identity():
    rng = np.random.default_rng(33)
    dims = SystemDims(k=3, n=2)
    for _ in range(200):
        est = random_estimate(rng, dims)
        xh = est.xhat.copy()
        xh[int(rng.integers(0, dims.state_dim))] = 0.0
        est0 = Estimate(xhat=xh, xhat_ext=est.xhat_ext)
        f, _ = build_f_discontinuous(est0, dims, DiscontinuousSdc())
        err = np.linalg.norm(f @ est0.xhat - est0.xhat_ext)
        assert err <= 1e-10 * (1.0 + np.linalg.norm(est0.xhat_ext))
        assert np.all(np.isfinite(f))


def test_discontinuous_two_zeros_with_extension_raises():
    est = Estimate(xhat=[0.0, 0.0, 1.0], xhat_ext=[2.0])
    with pytest.raises(SingularStateError):
        build_f_discontinuous(est, SystemDims(k=3, n=1), DiscontinuousSdc())


def test_discontinuous_custom_weights_reciprocal_rule():
    dims = SystemDims(k=3, n=1)
    est = Estimate(xhat=[2.0, 0.1, -3.0], xhat_ext=[1.5])

    ok = DiscontinuousSdc(weights=lambda i, j, j_star: 3.0 if j == 0 else 1.5)
    f, _ = build_f_discontinuous(est, dims, ok)  # 1/3 + 1/1.5 = 1
    assert np.allclose(f @ est.xhat, est.xhat_ext, atol=1e-12)

    # kn=3 leaves two non-anchor columns, so uniform w=2 still satisfies
    # the rule; three non-anchor columns (kn=4) violate it
    uniform2 = DiscontinuousSdc(weights=lambda i, j, j_star: 2.0)
    f2, _ = build_f_discontinuous(est, dims, uniform2)
    assert np.allclose(f2 @ est.xhat, est.xhat_ext, atol=1e-12)
    dims4 = SystemDims(k=4, n=1)
    est4 = Estimate(xhat=[2.0, 0.1, -3.0, 1.0], xhat_ext=[1.5])
    with pytest.raises(ConfigError):
        build_f_discontinuous(est4, dims4, uniform2)
    with pytest.raises(ConfigError):
        build_f_discontinuous(est, dims,
                              DiscontinuousSdc(weights=lambda i, j, js: 0.0))


def test_discontinuous_needs_two_entries():
    with pytest.raises(DimensionError):
        build_f_discontinuous(Estimate(xhat=[1.0], xhat_ext=[1.0]),
                              SystemDims(k=1, n=1), DiscontinuousSdc())


def test_boundedness_toward_origin():
    # shrink one coordinate along 10^-1 .. 10^-8; norms must stay within
    # a constant factor of the first point (no blow-up trend)
    rng = np.random.default_rng(34)
    cases = [
        (ContinuousSdc(), SystemDims(k=2, n=2)),
        (DiscontinuousSdc(), SystemDims(k=2, n=2)),
    ]
    for variant, dims in cases:
        base = random_estimate(rng, dims)
        norms = []
        for expo in range(1, 9):
            xh = base.xhat.copy()
            xh[0] = 10.0 ** -expo
            f, _ = build_f_hat(Estimate(xhat=xh, xhat_ext=base.xhat_ext),
                               dims, variant)
            norms.append(np.max(np.abs(f)))
        assert max(norms) <= 10.0 * norms[0] + 1e-9


def test_assemble_companion_layout():
    dims = SystemDims(k=2, n=2)
    f = np.arange(1.0, 9.0).reshape(2, 4)
    g = np.array([[2.0, 0.0], [0.0, 3.0]])
    fact = assemble(f, g, dims)
    assert np.array_equal(fact.a_hat[:2, 2:], np.eye(2))
    assert np.array_equal(fact.a_hat[2:], f)
    assert np.array_equal(fact.b_hat[2:], g)
    assert np.array_equal(fact.b_hat[:2], np.zeros((2, 2)))
    with pytest.raises(DimensionError):
        assemble(np.ones((2, 3)), g, dims)


def test_controllability_full_rank_and_singular():
    rng = np.random.default_rng(35)
    dims = SystemDims(k=2, n=2)
    for _ in range(30):
        est = random_estimate(rng, dims)
        f, _ = build_f_hat(est, dims, DiscontinuousSdc())
        g = rng.normal(size=(2, 2)) + 3 * np.eye(2)
        assert controllability_check(assemble(f, g, dims))
        g_sing = np.outer(g[:, 0], [1.0, 1.0])  # rank one
        assert not controllability_check(assemble(f, g_sing, dims))
