import math

import numpy as np
import pytest

from vflqn import model
from vflqn.config import TrainingConfig
from vflqn.errors import DivergenceError, ProtocolError
from vflqn.parties import Coordinator, GuestParty, HostParty
from vflqn.protocol import run_protocol
from vflqn.transport import A, B, C, Kind, Network, ProtocolMessage

from conftest import synthetic_partition

LOG2 = math.log(2)


def _parties(he, XA, XB, y, wA=None, wB=None, cfg=None):
    cfg = cfg or TrainingConfig(batch_size=len(y))
    pub = he.public_only()
    return HostParty(XA, pub, cfg, wA), GuestParty(XB, y, pub, cfg, wB), Network()


def _set_batch(S, *parties):
    for p in parties:
        p.S = np.asarray(S)


@pytest.fixture(params=["mock", "paillier"])
def he(request, paillier, mock):
    return paillier if request.param == "paillier" else mock


def test_u_zero_weights(he):
    host, _, net = _parties(he, np.ones((3, 2)), np.ones((3, 1)), np.ones(3))
    _set_batch([0, 1, 2], host)
    host.send_u(net, 1)
    vals = he.decrypt_vector(net.recv(A, B, Kind.UA).payload)
    np.testing.assert_array_equal(vals, np.zeros(6))


def test_u_single_instance(he):
    host, _, net = _parties(he, np.array([[1.0, 2.0]]), np.ones((1, 1)), np.ones(1), wA=[0.5, 0.5])
    _set_batch([0], host)
    host.send_u(net, 1)
    u, u2 = he.decrypt_vector(net.recv(A, B, Kind.UA).payload)
    assert u == pytest.approx(1.5, abs=1e-12) and u2 == pytest.approx(2.25, abs=1e-12)


def _random_setup(he, seed=0, m=15, n_a=3, n_b=4):
    rng = np.random.default_rng(seed)
    XA, XB = rng.normal(size=(m, n_a)), rng.normal(size=(m, n_b))
    y = rng.choice([-1.0, 1.0], m)
    wA, wB = rng.normal(size=n_a) * 0.5, rng.normal(size=n_b) * 0.5
    host, guest, net = _parties(he, XA, XB, y, wA, wB)
    S = rng.choice(m, 10, replace=False)
    _set_batch(S, host, guest)
    return host, guest, net, S, np.hstack([XA, XB]), y, np.concatenate([wA, wB])


def test_u_random_matches_plaintext(he):
    host, guest, net, S, X, y, w = _random_setup(he)
    host.send_u(net, 1)
    vals = he.decrypt_vector(net.recv(A, B, Kind.UA).payload)
    u = host.X[S] @ host.w
    assert np.max(np.abs(vals - np.concatenate([u, u * u]))) < 1e-9


def test_loss_at_zero_and_d(he):
    host, guest, net = _parties(he, np.ones((1, 2)), np.ones((1, 1)), np.array([1.0]))
    _set_batch([0], host, guest)
    host.send_u(net, 1)
    guest.send_loss_and_d(net, 1)
    assert abs(he.decrypt(net.recv(B, C, Kind.Loss).payload[0]) - LOG2) < 1e-8
    (d,) = he.decrypt_vector(net.recv(B, A, Kind.D).payload)
    assert d == pytest.approx(-0.5, abs=1e-12)


def test_loss_and_gradient_match_model(he):
    host, guest, net, S, X, y, w = _random_setup(he, seed=1)
    host.send_u(net, 1)
    guest.send_loss_and_d(net, 1)
    host.send_gradient(net, 1)
    guest.send_gradient(net, 1)
    loss = he.decrypt(net.recv(B, C, Kind.Loss).payload[0])
    g = np.concatenate([he.decrypt_vector(net.recv(A, C, Kind.PartialGradA).payload),
                        he.decrypt_vector(net.recv(B, C, Kind.PartialGradB).payload)])
    assert abs(loss - model.taylor_loss(w, X[S], y[S])) < 1e-8
    assert np.max(np.abs(g - model.taylor_gradient(w, X[S], y[S]))) < 1e-8


def test_partial_gradient_examples(he):
    host, _, net = _parties(he, np.array([[1.0, 0.0], [2.0, -1.0]]), np.ones((2, 1)), np.ones(2))
    _set_batch([0, 1], host)
    net.send(ProtocolMessage(Kind.D, 1, B, A, tuple(he.encrypt_vector([0.0, 0.0]))))
    host.send_gradient(net, 1)
    np.testing.assert_array_equal(he.decrypt_vector(net.recv(A, C, Kind.PartialGradA).payload), [0.0, 0.0])

    _set_batch([0], host)
    net.send(ProtocolMessage(Kind.D, 2, B, A, tuple(he.encrypt_vector([-0.5]))))
    host.send_gradient(net, 2)
    g = he.decrypt_vector(net.recv(A, C, Kind.PartialGradA).payload)
    np.testing.assert_allclose(g, [-0.5, 0.0], atol=1e-12)


def _run_v(he, host, guest, net, S_H, sA, sB):
    host.S_H = guest.S_H = np.asarray(S_H)
    host.s, guest.s = np.asarray(sA, float), np.asarray(sB, float)
    host.send_delta_u(net, 1)
    guest.send_h(net, 1)
    host.send_v(net, 1)
    guest.send_v(net, 1)
    return np.concatenate([he.decrypt_vector(net.recv(A, C, Kind.V_A).payload),
                           he.decrypt_vector(net.recv(B, C, Kind.V_B).payload)])


def test_v_zero_displacement(he):
    host, guest, net, S, X, y, w = _random_setup(he, seed=2)
    v = _run_v(he, host, guest, net, S, np.zeros(3), np.zeros(4))
    np.testing.assert_allclose(v, 0, atol=1e-15)


def test_v_single_instance(he):
    host, guest, net, S, X, y, w = _random_setup(he, seed=3)
    s = np.linspace(-1, 1, 7)
    v = _run_v(he, host, guest, net, [4], s[:3], s[3:])
    np.testing.assert_allclose(v, 0.25 * X[4] * (X[4] @ s), atol=1e-9)


def test_v_matches_hessian_vector(he):
    host, guest, net, S, X, y, w = _random_setup(he, seed=4)
    s = np.random.default_rng(9).normal(size=7)
    v = _run_v(he, host, guest, net, S, s[:3], s[3:])
    assert np.max(np.abs(v - model.hessian_vector(X[S], s))) < 1e-8


def test_v_requires_closed_window(mock):
    host, guest, net, *_ = _random_setup(mock)
    with pytest.raises(ProtocolError):
        host.send_delta_u(net, 1)


def _coordinator(he, n_a=2, n_b=1, **kw):
    cfg = TrainingConfig(batch_size=4, **kw)
    return Coordinator(he, n_a, n_b, cfg), Network()


def _feed_gradient(he, net, k, g, n_a=2, loss=0.5):
    net.send(ProtocolMessage(Kind.Loss, k, B, C, (he.encrypt(loss),)))
    net.send(ProtocolMessage(Kind.PartialGradA, k, A, C, tuple(he.encrypt_vector(g[:n_a]))))
    net.send(ProtocolMessage(Kind.PartialGradB, k, B, C, tuple(he.encrypt_vector(g[n_a:]))))


def test_coordinator_step_is_sgd_before_rebuild(he):
    coord, net = _coordinator(he, eta=0.1)
    g = np.array([1.0, -2.0, 0.5])
    coord.begin_round(1)
    _feed_gradient(he, net, 1, g)
    coord.step(net, 1)
    step = np.array(net.recv(C, A, Kind.StepA).payload + net.recv(C, B, Kind.StepB).payload)
    np.testing.assert_allclose(step, 0.1 * g, atol=1e-12)

    coord.begin_round(2)
    _feed_gradient(he, net, 2, np.zeros(3))
    coord.step(net, 2)
    assert net.recv(C, A, Kind.StepA).payload == (0.0, 0.0)


def test_coordinator_window_displacement_identical_steps(mock):
    L, eta = 4, 0.5
    coord, net = _coordinator(mock, eta=eta, window=L)
    g = np.array([0.2, -0.4, 1.0])
    c = eta * g
    w = np.array([1.0, 2.0, 3.0])
    ws = []
    for k in range(1, 2 * L + 1):
        coord.begin_round(k)
        ws.append(w.copy())
        _feed_gradient(mock, net, k, g)
        coord.step(net, k)
        if k == 2 * L:
            net.send(ProtocolMessage(Kind.V_A, k, A, C, tuple(mock.encrypt_vector(g[:2]))))
            net.send(ProtocolMessage(Kind.V_B, k, B, C, tuple(mock.encrypt_vector(g[2:]))))
        if k % L == 0:
            s = coord.close_window(net, k)
        w = w - c
        net.recv(C, A), net.recv(C, B)
    direct = np.mean(ws[L:], axis=0) - np.mean(ws[:L], axis=0)
    np.testing.assert_allclose(s, -L * c, atol=1e-12)
    np.testing.assert_allclose(s, direct, atol=1e-12)


def test_coordinator_zero_steps_rejects_pair(mock):
    L = 2
    coord, net = _coordinator(mock, window=L)
    for k in range(1, 2 * L + 1):
        coord.begin_round(k)
        _feed_gradient(mock, net, k, np.zeros(3))
        coord.step(net, k)
        if k == 2 * L:
            for kind, src, m in ((Kind.V_A, A, 2), (Kind.V_B, B, 1)):
                net.send(ProtocolMessage(kind, k, src, C, tuple(mock.encrypt_vector(np.zeros(m)))))
        if k % L == 0:
            s = coord.close_window(net, k)
    np.testing.assert_array_equal(s, 0)
    assert not coord.last_admitted and coord.store.rebuilds == 0
    np.testing.assert_array_equal(coord.H, np.eye(3))


def test_close_window_off_schedule(mock):
    coord, net = _coordinator(mock, window=4)
    coord.begin_round(3)
    with pytest.raises(ProtocolError):
        coord.close_window(net, 3)


def test_coordinator_rejects_divergence(mock):
    coord, net = _coordinator(mock)
    coord.begin_round(1)
    _feed_gradient(mock, net, 1, np.ones(3), loss=float("nan"))
    with pytest.raises(DivergenceError):
        coord.step(net, 1)


def test_knowledge_confinement(paillier):
    part = synthetic_partition(n=4, T=40)
    cfg = TrainingConfig(batch_size=8)
    pub = paillier.public_only()
    host = HostParty(part.XA, pub, cfg)
    guest = GuestParty(part.XB, part.y, pub, cfg)
    coord = Coordinator(paillier, 2, 2, cfg)
    host_fields = set(HostParty.__slots__) | set(type(host).__mro__[1].__slots__)
    assert not {"y", "labels", "wB", "w_b", "private_key"} & host_fields
    assert not hasattr(host, "y") and not host.he.has_private_key and not guest.he.has_private_key
    assert "X" not in Coordinator.__slots__ and not hasattr(coord, "w")
    with pytest.raises(ProtocolError):
        HostParty(part.XA, paillier, cfg)
    with pytest.raises(ProtocolError):
        Coordinator(pub, 2, 2, cfg)


def test_batch_agreement():
    part = synthetic_partition(n=4, T=300)
    cfg = TrainingConfig(batch_size=32, hessian_batch_size=20, window=3, seed=11)
    from vflqn.he import MockBackend
    pub = MockBackend().public_only()
    host = HostParty(part.XA[part.train_idx], pub, cfg)
    guest = GuestParty(part.XB[part.train_idx], part.y[part.train_idx], pub, cfg)
    k = 0
    for epoch in range(3):
        for pos in range(8):
            k += 1
            host.begin_round(k, epoch, pos)
            guest.begin_round(k, epoch, pos)
            assert np.array_equal(host.S, guest.S)
            assert (host.S_H is None) == (guest.S_H is None) == (k % 3 != 0)
            if host.S_H is not None:
                assert np.array_equal(host.S_H, guest.S_H) and len(host.S_H) == 20
                host.close_window(), guest.close_window()


def test_party_and_coordinator_displacements_agree():
    part = synthetic_partition(n=8, T=400, seed=5)
    r = run_protocol(part, TrainingConfig(batch_size=64, window=3, max_rounds=40, seed=5), "mock")
    assert r.rebuilds > 0
    assert r.max_s_discrepancy < 1e-12
