import math

import numpy as np
import pytest

from vflqn import model
from vflqn.config import TrainingConfig
from vflqn.errors import DivergenceError
from vflqn.he import MockBackend
from vflqn.oracle import oracle_train
from vflqn.protocol import run_protocol
from vflqn.transport import CommLedger, read_transcript

from conftest import synthetic_partition


@pytest.fixture(scope="module")
def part10():
    return synthetic_partition(n=10, T=500, seed=1)


@pytest.mark.parametrize("cfg", [
    TrainingConfig(method="sgd", batch_size=100, max_rounds=50, seed=3),
    TrainingConfig(method="qn", batch_size=100, window=4, max_rounds=50, seed=3),
    TrainingConfig(method="qn", batch_size=64, hessian_batch_size=30, window=3, memory=2, max_rounds=50, seed=4),
])
def test_mock_matches_oracle(part10, cfg):
    fed = run_protocol(part10, cfg, "mock", record_trajectory=True)
    ref = oracle_train(part10, cfg, record_trajectory=True)
    assert fed.rounds == ref.rounds == 50
    diff = np.max(np.abs(np.array(fed.trajectory) - np.array(ref.trajectory)))
    assert diff < 1e-12
    np.testing.assert_allclose(fed.round_losses, ref.round_losses, atol=1e-12)
    if cfg.method == "qn":
        assert fed.rebuilds == ref.store.rebuilds > 0


def test_oracle_zero_rounds(part10):
    w0 = np.linspace(-1, 1, 10)
    res = oracle_train(part10, TrainingConfig(max_rounds=0), w0=w0)
    np.testing.assert_array_equal(res.w, w0)


def test_never_rebuild_equals_sgd(part10):
    sgd = run_protocol(part10, TrainingConfig(method="sgd", batch_size=100, max_epochs=15, seed=2), "mock")
    qn = run_protocol(part10, TrainingConfig(method="qn", batch_size=100, window=None, max_epochs=15, seed=2), "mock")
    assert qn.rebuilds == 0
    np.testing.assert_array_equal(qn.weights, sgd.weights)
    assert qn.epoch_losses == sgd.epoch_losses


def test_qn_equals_sgd_until_first_rebuild(part10):
    L = 3
    sgd = run_protocol(part10, TrainingConfig(method="sgd", batch_size=50, max_rounds=2 * L), "mock",
                       record_trajectory=True)
    qn = run_protocol(part10, TrainingConfig(method="qn", batch_size=50, window=L, max_rounds=2 * L), "mock",
                      record_trajectory=True)
    assert qn.rebuilds == 1
    np.testing.assert_array_equal(np.array(qn.trajectory), np.array(sgd.trajectory))


@pytest.mark.parametrize("seed", [0, 1])
def test_both_methods_reach_taylor_optimum(seed):
    part = synthetic_partition(n=4, T=200, seed=seed, signal=4.0)
    X, y = part.full_matrix()[part.train_idx], part.y[part.train_idx]
    w_opt = np.linalg.solve(0.25 * X.T @ X, 0.5 * X.T @ y)
    f_opt = model.taylor_loss(w_opt, X, y)
    for method in ("sgd", "qn"):
        r = run_protocol(part, TrainingConfig(method=method, batch_size=40, window=4, seed=seed, max_epochs=200),
                         "mock")
        assert r.converged
        assert r.train_taylor_loss - f_opt < 1e-3


def test_loss_at_zero_weights_is_log2(part10, paillier):
    r = run_protocol(part10, TrainingConfig(batch_size=100, max_rounds=1), paillier)
    assert abs(r.round_losses[0] - math.log(2)) < 1e-8


def test_divergence_aborts(part10):
    with pytest.raises(DivergenceError):
        run_protocol(part10, TrainingConfig(method="sgd", batch_size=100, eta=500.0, max_epochs=50), "mock")


def test_report_shape(part10):
    r = run_protocol(part10, TrainingConfig(batch_size=100, max_epochs=3, tol=0.0), "mock")
    assert r.epochs == len(r.epoch_losses) == 3
    assert r.stop_reason == "max_epochs"
    doc = r.to_json()
    assert doc["schema_version"] == 1 and doc["memory_M"] == 10
    assert 0.5 < doc["test_auc"] <= 1.0


def test_transcript_reproduces_ledger(part10, tmp_path):
    path = tmp_path / "run.transcript"
    r = run_protocol(part10, TrainingConfig(batch_size=100, window=2, max_rounds=9), "mock", transcript_path=path)
    replay = CommLedger.from_transcript(read_transcript(path))
    assert replay.rounds() == r.ledger.rounds()
    for k in r.ledger.rounds():
        assert replay.round_cost(k) == r.ledger.round_cost(k)
    assert replay.meta["n"] == 10 and replay.round_info[4]["hessian"] == 100


def test_paillier_transcript_decrypts_with_coordinator_key(part10, tmp_path, paillier):
    path = tmp_path / "p.transcript"
    run_protocol(part10, TrainingConfig(batch_size=100, max_rounds=1), paillier, transcript_path=path)
    from vflqn.transport import ProtocolMessage
    recs = [ProtocolMessage.from_record(r, paillier) for r in read_transcript(path)]
    loss = [m for m in recs if m.kind.value == "Loss"][0]
    assert abs(paillier.decrypt(loss.payload[0]) - math.log(2)) < 1e-8


def test_backend_object_reused_for_public_half(part10):
    he = MockBackend()
    r = run_protocol(part10, TrainingConfig(batch_size=100, max_rounds=2), he)
    assert r.backend == "mock"
