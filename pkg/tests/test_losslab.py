import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from interprompt.losslab import (
    MEMORIZE_POSTS,
    SECTION_START,
    GradientCheckError,
    LossConfig,
    TokenDistributionSequence,
    ToyModel,
    ToyRecord,
    combined_loss,
    gradient_check,
    label_accuracy,
    loss_entity,
    loss_generation,
    objective,
    objective_and_grad,
    random_toy_problem,
    record_span_losses,
    reference_objective,
    toy_problem,
    train_toy,
)
from interprompt.prompts import PromptTemplate
from interprompt.synthetic import synthetic_posts

T = PromptTemplate()


@pytest.mark.parametrize("fn", [loss_entity, loss_generation])
def test_loss_examples(fn):
    onehot = TokenDistributionSequence(3, np.eye(3))
    assert fn(onehot, [0, 1, 2]) == 0.0
    uniform = TokenDistributionSequence(4, np.full((3, 4), 0.25))
    assert fn(uniform, [0, 1, 2]) == pytest.approx(3 * math.log(4))
    assert fn(uniform, [0, 1, 2]) == pytest.approx(4.1589, abs=1e-4)
    assert fn(onehot, [0, 2, 2]) == math.inf


def test_distribution_validation():
    with pytest.raises(ValueError):
        TokenDistributionSequence(2, [[0.5, 0.6]])
    with pytest.raises(ValueError):
        TokenDistributionSequence(2, [[1.5, -0.5]])
    with pytest.raises(ValueError):
        loss_entity(TokenDistributionSequence(2, [[0.5, 0.5]]), [0, 1])
    with pytest.raises(ValueError):
        loss_entity(TokenDistributionSequence(2, [[0.5, 0.5]]), [2])


def test_combined_examples():
    assert combined_loss(1, 2, 3) == 6
    assert combined_loss(1, 2, 3, LossConfig(0.5, 0.25, 0.25)) == 1.75
    assert combined_loss(0, 0, 0) == 0
    assert combined_loss(math.inf, 1, 1) == math.inf
    assert combined_loss(math.inf, 1, 1, LossConfig(0, 1, 1)) == 2


def test_loss_config_invariants():
    with pytest.raises(ValueError):
        LossConfig(0, 0, 0)
    with pytest.raises(ValueError):
        LossConfig(-1, 1, 1)


nonneg = st.floats(0, 100, allow_nan=False)


@given(nonneg, nonneg, nonneg, st.tuples(nonneg, nonneg, nonneg).filter(lambda w: any(w)), st.floats(0.01, 10))
def test_combined_linear_in_each_weight(l1, l2, l3, w, c):
    parts = [combined_loss(l1, l2, l3, LossConfig(*(w[i] if i == k else 0 for i in range(3))))
             for k in range(3) if w[k]]
    assert combined_loss(l1, l2, l3, LossConfig(*w)) == pytest.approx(sum(parts), rel=1e-12, abs=1e-12)
    scaled = LossConfig(*(c * x for x in w))
    assert combined_loss(l1, l2, l3, scaled) == pytest.approx(c * combined_loss(l1, l2, l3, LossConfig(*w)), rel=1e-9)


@given(st.integers(0, 10_000))
def test_components_non_negative(seed):
    model, records = random_toy_problem(seed)
    for record in records:
        assert all(v >= 0 for v in record_span_losses(model, record))


def test_objective_matches_reference_route():
    for seed in range(5):
        model, records = random_toy_problem(seed)
        for cfg in (LossConfig(), LossConfig(0.3, 0, 2.0)):
            assert objective(model, records, cfg) == pytest.approx(reference_objective(model, records, cfg), rel=1e-12)


def test_unit_weights_equal_plain_completion_likelihood():
    # spans partition the completion, so weighted sections = NLL of the whole completion
    model, records = toy_problem(MEMORIZE_POSTS, T, seed=3)
    total = 0.0
    for record in records:
        prev, last_span = 0, None
        for tok, span in zip(record.completion, record.spans):
            if span != last_span:
                prev, last_span = 0, span
            total -= math.log(model.distribution(record.prompt, prev, span)[tok])
            prev = tok
    assert objective(model, records) == pytest.approx(total / len(records), rel=1e-12)


def test_gradient_check_default_fixture():
    model, records = toy_problem(MEMORIZE_POSTS, T)
    assert gradient_check(model, records) < 1e-4


def test_gradient_check_random_models():
    for seed in range(20):
        model, records = random_toy_problem(seed)
        for cfg in (LossConfig(), LossConfig(2.0, 0.0, 0.5)):
            assert gradient_check(model, records, cfg) < 1e-4


def test_gradient_zero_where_weight_zero():
    model, records = random_toy_problem(11)
    _, dW, dU = objective_and_grad(model, records, LossConfig(1, 0, 0))
    assert not dW[1:].any() and not dU[1:].any()
    assert dW[0].any()


def test_two_token_softmax_gradient_by_hand():
    model = ToyModel([SECTION_START, "a"], np.array([[[0.3, -0.2], [0, 0]]] * 3), np.zeros((3, 2, 2)))
    record = ToyRecord(prompt=(1,), completion=(1,), spans=(0,))
    loss, dW, dU = objective_and_grad(model, [record])
    logits = np.array([0.3, -0.2])
    p = np.exp(logits) / np.exp(logits).sum()
    assert loss == pytest.approx(-math.log(p[1]))
    assert dW[0, 0] == pytest.approx(p - np.array([0.0, 1.0]))
    assert dU[0, 1] == pytest.approx(p - np.array([0.0, 1.0]))
    assert not dW[0, 1].any() and not dU[0, 0].any()


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_gradient_check_limits_and_non_finite():
    model, records = random_toy_problem(0)
    with pytest.raises(ValueError):
        gradient_check(model, records * 6)
    model.W[:] = 1e308
    model.U[:] = -1e308
    with pytest.raises(GradientCheckError):
        gradient_check(model, records)


def test_zero_epochs_leave_model_unchanged():
    model, records = toy_problem(MEMORIZE_POSTS, T)
    before = model.copy()
    result = train_toy(model, records, 0)
    assert result.trajectory == []
    assert np.array_equal(model.W, before.W) and np.array_equal(model.U, before.U)


def test_entity_only_training_is_definitional():
    a, records = toy_problem(MEMORIZE_POSTS, T, seed=5)
    b = a.copy()
    traj = train_toy(a, records, 30, LossConfig(1, 0, 0)).trajectory
    # manual descent on the label-section loss alone
    manual = []
    for _ in range(30):
        loss, dW, dU = objective_and_grad(b, records, LossConfig(1, 0, 0))
        manual.append(loss)
        b.W -= b.learning_rate * dW
        b.U -= b.learning_rate * dU
    assert traj == manual
    assert np.array_equal(a.W[1:], toy_problem(MEMORIZE_POSTS, T, seed=5)[0].W[1:])
    l1 = np.mean([record_span_losses(a, r)[0] for r in records])
    assert traj[-1] >= l1


def test_training_on_fixture_is_monotone_and_accurate():
    posts = synthetic_posts()[:50]
    model, records = toy_problem(posts, T)
    result = train_toy(model, records, 200)
    assert len(result.trajectory) == 200 and not result.diverged
    assert all(b <= a + 1e-9 for a, b in zip(result.trajectory, result.trajectory[1:]))
    assert label_accuracy(model, posts, T) >= 0.9


def test_memorization_limit():
    model, records = toy_problem(MEMORIZE_POSTS, T)
    train_toy(model, records, 2000)
    assert objective(model, records) < 0.05


def test_divergence_stops_early():
    model, records = toy_problem(MEMORIZE_POSTS, T, learning_rate=1e9)
    result = train_toy(model, records, 50)
    assert result.diverged and len(result.trajectory) < 50
    assert "diverged" in result.message


def test_train_requires_records():
    model, _ = toy_problem(MEMORIZE_POSTS, T)
    with pytest.raises(ValueError):
        train_toy(model, [], 3)
