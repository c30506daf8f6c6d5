import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cranzf.precoding import (
    DegenerateChannelError,
    PrecoderSet,
    build_paq_plan,
    effective_channels,
    front_end_batch,
    front_end_matrix,
    lift_batch,
    lift_beamformer,
    paq_allocate,
    paq_precoders,
    paq_precoders_batch,
    power_backoff,
    power_backoff_batch,
    reallocate_unserved,
    serving_stats,
    symmetric_policy,
    zf_precoders,
    zf_precoders_batch,
)

from conftest import crandn


def _projector_oracle(hq, others):
    """Normalized projection of hq onto the orthogonal complement of ``others``."""
    if others.shape[1] == 0:
        return hq / np.linalg.norm(hq)
    Pi = np.eye(len(hq)) - others @ np.linalg.solve(others.conj().T @ others, others.conj().T)
    g = Pi @ hq
    return g / np.linalg.norm(g)


def _same_up_to_phase(a, b, tol=1e-10):
    return abs(abs(np.vdot(a, b)) - 1.0) < tol and np.isclose(np.linalg.norm(a), 1.0)


def _max_residual(h, p):
    """max_{j != q} |h_j^H p_q| / ||h_j|| for stacked (Q, D) arrays."""
    G = np.abs(h.conj() @ p.T) / np.linalg.norm(h, axis=1, keepdims=True)
    np.fill_diagonal(G, 0.0)
    return G.max() if len(h) > 1 else 0.0


# ----------------------------------------------------------------------- standard ZF
def test_zf_single_user(rng):
    h = crandn(rng, 1, 2, 3)
    p = zf_precoders(h).stacked(0)
    assert np.allclose(p, h.reshape(-1) / np.linalg.norm(h), atol=1e-14)


def test_zf_orthogonal_users():
    h = np.zeros((2, 1, 3), dtype=complex)
    h[0, 0, 0] = 1.0
    h[1, 0, 1] = 1.0
    ps = zf_precoders(h)
    assert _same_up_to_phase(ps.stacked(0), np.eye(3)[0])
    assert _same_up_to_phase(ps.stacked(1), np.eye(3)[1])


def test_zf_matches_projection_oracle(rng):
    h = crandn(rng, 3, 2, 2)  # Q=3, M=2, Nt=2
    ps = zf_precoders(h)
    H = h.reshape(3, -1)
    assert _max_residual(H, ps.stacked_matrix().T) < 1e-10
    for q in range(3):
        ref = _projector_oracle(H[q], np.delete(H, q, axis=0).T)
        assert _same_up_to_phase(ps.stacked(q), ref)
        # maximal gain among unit vectors in the null space
        assert abs(np.vdot(H[q], ps.stacked(q))) == pytest.approx(abs(np.vdot(H[q], ref)), rel=1e-12)


@given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 8), st.integers(0, 2**31 - 1))
def test_zf_properties_and_batch_agree(M, N, Q, seed):
    if M * N < Q:
        return
    r = np.random.default_rng(seed)
    h = crandn(r, Q, M, N)
    ps = zf_precoders(h)
    H = h.reshape(Q, -1)
    P = ps.blocks.reshape(Q, -1)
    assert np.allclose(np.linalg.norm(P, axis=1), 1.0, atol=1e-12)
    assert _max_residual(H, P) < 1e-10
    pb, ok = zf_precoders_batch(h[None])
    assert ok.all()
    for q in range(Q):
        assert _same_up_to_phase(pb[0, q].reshape(-1), P[q])


def test_zf_basis_invariance(rng):
    from cranzf.numerics import orthonormal_null_basis

    h = crandn(rng, 4, 2, 3)
    H = h.reshape(4, -1)
    p_ref = zf_precoders(h).stacked(0)
    N = orthonormal_null_basis(list(H[1:]), 6)
    U, _ = np.linalg.qr(crandn(rng, N.shape[1], N.shape[1]))
    N2 = N @ U
    g = N2.conj().T @ H[0]
    p2 = N2 @ g / np.linalg.norm(g)
    assert _same_up_to_phase(p_ref, p2)


def test_zf_degenerate(rng):
    with pytest.raises(DegenerateChannelError):
        zf_precoders(crandn(rng, 5, 2, 2))
    h = crandn(rng, 3, 1, 3)
    h[2] = 0.3 * h[0] - 2j * h[1]
    with pytest.raises(DegenerateChannelError):
        zf_precoders(h)
    _, ok = zf_precoders_batch(h[None])
    assert not ok[0]


# ----------------------------------------------------------------------- allocation
def test_allocate_examples():
    col = np.array([0.4, 0.1, 0.3, 0.2])
    alpha = np.tile(col, (3, 1))
    assert paq_allocate(alpha, 2) == ((1, 3),) * 3
    assert paq_allocate(alpha, 0) == ((),) * 3
    assert paq_allocate(np.ones((2, 4)), 2) == ((0, 1), (0, 1))
    with pytest.raises(ValueError):
        paq_allocate(alpha, 4)
    with pytest.raises(ValueError):
        paq_allocate(alpha, 3, Nt=3)


def test_symmetric_policy_small_case():
    d = symmetric_policy(2, 4, 2)
    assert d == ((2, 3), (0, 1))
    st_ = serving_stats(d, 4)
    assert np.all(st_.M_q == 1) and np.all(st_.Q_tilde == 2)
    with pytest.raises(ValueError):
        symmetric_policy(4, 8, 3)
    with pytest.raises(ValueError):
        symmetric_policy(3, 8, 0)


def test_serving_stats_full_and_disjoint():
    s0 = serving_stats(((),) * 3, 5)
    assert s0.full and np.all(s0.M_q == 3) and np.all(s0.M_qj == 3) and np.all(s0.Q_tilde == 5)
    # each S-RRH serves exactly one MS, nobody shares
    d = tuple(tuple(j for j in range(3) if j != m) for m in range(3))
    s1 = serving_stats(d, 3)
    assert np.all(s1.Q_tilde == 1) and np.all(s1.M_q == 1)
    assert s1.coupled(0).size == 0


def _enumerated_stats(discard, Q):
    serve = [set(range(Q)) - set(d) for d in discard]
    Mq = [sum(q in s for s in serve) for q in range(Q)]
    Mqj = [[sum(q in s and j in s for s in serve) for j in range(Q)] for q in range(Q)]
    Qt = [Q - sum(1 for j in range(Q) if j != q and Mqj[q][j] == 0) for q in range(Q)]
    return np.array(Mq), np.array(Mqj), np.array(Qt)


@given(st.integers(1, 5), st.integers(2, 8), st.data())
def test_serving_stats_match_enumeration(M, Q, data):
    qbar = data.draw(st.integers(0, Q - 1))
    discard = tuple(tuple(sorted(data.draw(st.permutations(range(Q)))[:qbar])) for _ in range(M))
    s = serving_stats(discard, Q)
    Mq, Mqj, Qt = _enumerated_stats(discard, Q)
    assert np.array_equal(s.M_q, Mq) and np.array_equal(s.M_qj, Mqj)
    assert np.array_equal(s.Q_tilde, Qt)
    for q in range(Q):
        for m in range(M):
            assert s.v[q, m] == (q not in discard[m])


@given(st.integers(2, 5), st.integers(2, 10), st.integers(0, 2**31 - 1), st.data())
def test_reallocation_serves_everyone(M, Q, seed, data):
    qbar = data.draw(st.integers(1, Q - 1))
    alpha = np.random.default_rng(seed).exponential(size=(M, Q))
    base = paq_allocate(alpha, qbar)
    try:
        d = reallocate_unserved(alpha, base)
    except ValueError:
        # only when total service slots cannot cover every MS
        assert M * (Q - qbar) < Q
        return
    s = serving_stats(d, Q)
    assert np.all(s.M_q >= 1)
    assert all(len(x) == qbar for x in d)
    if np.all(serving_stats(base, Q).M_q >= 1):
        assert d == base


# ----------------------------------------------------------------------- front end
def test_front_end_examples(rng):
    assert np.array_equal(front_end_matrix([], 4), np.eye(4))
    A = front_end_matrix([np.eye(4)[0].astype(complex)], 4)
    assert np.allclose(A, np.eye(4)[:, 1:])
    chans = [crandn(rng, 8) for _ in range(2)]
    A = front_end_matrix(chans, 8)
    assert A.shape == (8, 6)
    assert np.allclose(A.conj().T @ A, np.eye(6), atol=1e-12)
    for h in chans:
        assert np.linalg.norm(h.conj() @ A) < 1e-10
    with pytest.raises(DegenerateChannelError):
        front_end_matrix([chans[0], 2 * chans[0]], 8)


def test_front_end_batch_matches_reference(rng):
    h = crandn(rng, 5, 8, 4, 6)
    disc = symmetric_policy(4, 8, 4)
    Ab = front_end_batch(h, disc)
    for t in range(5):
        plan = build_paq_plan(h[t], disc)
        assert np.allclose(Ab[t], plan.A, atol=1e-12)


# ----------------------------------------------------------------------- PaQ precoders
def _plan(rng, M=4, Q=8, Nt=8, qbar=4):
    h = crandn(rng, Q, M, Nt)
    disc = symmetric_policy(M, Q, qbar) if (qbar * M) % Q == 0 else paq_allocate(
        rng.exponential(size=(M, Q)), qbar)
    return h, build_paq_plan(h, disc)


def test_effective_channels(rng):
    h, plan = _plan(rng)
    ht = effective_channels(h, plan)
    assert ht.shape == (8, 4, 4)
    for m, d in enumerate(plan.discard):
        for q in range(8):
            if q in d:
                assert np.all(ht[q, m] == 0)
            assert np.linalg.norm(ht[q, m]) <= np.linalg.norm(h[q, m]) * (1 + 1e-12)
    h0, plan0 = _plan(rng, qbar=0)
    assert np.allclose(effective_channels(h0, plan0), h0)


def test_paq_qbar0_equals_standard(rng):
    h, plan = _plan(rng, qbar=0)
    a = paq_precoders(effective_channels(h, plan), plan)
    b = zf_precoders(h)
    for q in range(8):
        assert _same_up_to_phase(a.stacked(q), b.stacked(q))
    lifted = lift_beamformer(a, plan)
    assert np.allclose(lifted.blocks, a.blocks)


def test_paq_disjoint_closed_form(rng):
    # 3 S-RRHs, 3 MSs, each S-RRH keeps one MS: no coupled interferers
    h = crandn(rng, 3, 3, 4)
    disc = tuple(tuple(j for j in range(3) if j != m) for m in range(3))
    plan = build_paq_plan(h, disc)
    ht = effective_channels(h, plan)
    ps = paq_precoders(ht, plan)
    for q in range(3):
        expect = np.zeros((3, 2), dtype=complex)
        expect[q] = ht[q, q] / np.linalg.norm(ht[q, q])
        assert _same_up_to_phase(ps.blocks[q].reshape(-1), expect.reshape(-1))


def _masked_residual(ht, ps, stats):
    worst = 0.0
    for q in range(ht.shape[0]):
        mask = np.repeat(stats.v[q], ht.shape[2])
        for j in range(ht.shape[0]):
            if j == q:
                continue
            hj = ht[j].reshape(-1) * mask
            if np.linalg.norm(hj) == 0:
                continue
            worst = max(worst, abs(np.vdot(hj, ps.stacked(q))) / np.linalg.norm(hj))
    return worst


def test_paq_masked_zf_random_symmetric(rng):
    h, plan = _plan(rng, qbar=4)
    ht = effective_channels(h, plan)
    ps = paq_precoders(ht, plan)
    assert _masked_residual(ht, ps, plan.stats) < 1e-10
    for q in range(8):
        mask = np.repeat(plan.stats.v[q], ht.shape[2])
        assert np.array_equal(ps.stacked(q) * mask, ps.stacked(q))
        assert np.linalg.norm(ps.stacked(q)) == pytest.approx(1.0, abs=1e-12)


@given(st.sampled_from([(4, 8, 8, 2), (4, 8, 8, 4), (4, 8, 8, 6), (2, 4, 4, 2), (4, 8, 6, 2)]),
       st.integers(0, 2**31 - 1))
def test_paq_batch_matches_reference(cfg, seed):
    M, Q, Nt, qbar = cfg
    r = np.random.default_rng(seed)
    h = crandn(r, 3, Q, M, Nt)
    disc = symmetric_policy(M, Q, qbar)
    stats = serving_stats(disc, Q)
    A = front_end_batch(h, disc)
    ht = np.einsum("nmij,nqmi->nqmj", A.conj(), h)
    ht[:, ~stats.v] = 0.0
    pb, ok = paq_precoders_batch(ht, stats)
    assert ok.all()
    for t in range(3):
        plan = build_paq_plan(h[t], disc)
        ps = paq_precoders(effective_channels(h[t], plan), plan)
        for q in range(Q):
            assert _same_up_to_phase(pb[t, q].reshape(-1), ps.stacked(q))
    lifted = lift_batch(A, pb)
    assert np.allclose(np.linalg.norm(lifted.reshape(3, Q, -1), axis=2), 1.0, atol=1e-12)


def test_lift_preserves_signal_model(rng):
    h, plan = _plan(rng, qbar=4)
    ht = effective_channels(h, plan)
    pt = paq_precoders(ht, plan)
    p = lift_beamformer(pt, plan)
    for q in range(8):
        assert np.linalg.norm(p.stacked(q)) == pytest.approx(1.0, abs=1e-12)
        for j in range(8):
            full = np.vdot(h[q].reshape(-1), p.stacked(j))
            eff = np.vdot(ht[q].reshape(-1), pt.stacked(j))
            assert abs(full - eff) < 1e-10


# ----------------------------------------------------------------------- backoff
def test_backoff_examples():
    half = np.full((2, 2, 1), np.sqrt(0.5), dtype=complex)
    assert power_backoff(PrecoderSet(half), 2) == pytest.approx(2.0)
    p = np.zeros((2, 2, 1), dtype=complex)
    p[0, 0] = p[1, 0] = 1.0  # S-RRH 0 carries everything
    assert power_backoff(PrecoderSet(p), 2) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        power_backoff(PrecoderSet(np.zeros((2, 2, 1))), 2)


@given(st.integers(1, 5), st.integers(1, 6), st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_backoff_properties(M, Q, N, seed):
    r = np.random.default_rng(seed)
    p = crandn(r, Q, M, N)
    p /= np.linalg.norm(p.reshape(Q, -1), axis=1)[:, None, None]
    g = power_backoff(PrecoderSet(p), Q)
    load = np.sum(np.abs(p) ** 2, axis=(0, 2))
    assert g >= 1.0 - 1e-12
    assert np.max(g * load) == pytest.approx(Q, rel=1e-12)
    assert power_backoff_batch(p[None], Q)[0] == pytest.approx(g, rel=1e-14)
