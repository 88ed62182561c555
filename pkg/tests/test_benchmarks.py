import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from qdkit.benchmarks import (ArmTask, IlluminationTask, arm_forward_kinematics, arm_objective, exhaustive_oracle,
                              illumination_objective, lattice_points, noisy_wrapper)
from qdkit.containers import GridContainer, GridSpec
from qdkit.domain import Bounds, EvalCounter, ObjectiveSpec, evaluate_batch

PI = np.pi


@pytest.mark.parametrize("angles, want", [((0, 0), (1.0, 0.0)), ((PI / 2, 0), (0.0, 1.0)),
                                          ((PI / 2, -PI / 2), (0.5, 0.5))])
def test_forward_kinematics(angles, want):
    assert np.allclose(arm_forward_kinematics(angles, (0.5, 0.5)), want, atol=1e-15)


def test_forward_kinematics_mismatch():
    with pytest.raises(ValueError):
        arm_forward_kinematics((0, 0, 0), (0.5, 0.5))


def test_arm_objective_examples():
    assert arm_objective([0.3] * 5)[0] == 0.0
    assert arm_objective([0.0, PI])[0] == pytest.approx(-PI / 2, abs=1e-15)
    f, b = arm_objective([0.0] * 8)
    assert np.allclose(b, (1.0, 0.5))


@settings(max_examples=100)
@given(arrays(float, 6, elements=st.floats(-PI, PI)))
def test_arm_invariants(a):
    L = np.array([0.3, 0.1, 0.2, 0.15, 0.05, 0.2])
    assert np.linalg.norm(arm_forward_kinematics(a, L)) <= L.sum() + 1e-12
    f, b = ArmTask(joints=6).evaluate(a)
    assert -PI <= f <= 0
    assert np.all((b >= 0) & (b <= 1))


def test_arm_lengths_validated():
    with pytest.raises(ValueError):
        ArmTask(joints=2, lengths=(0.5, -0.5)).link_lengths()


def test_illumination_examples():
    f, b = illumination_objective(np.full(6, 0.5))
    assert f == 0.0 and np.array_equal(b, [0.5, 0.5])


@settings(max_examples=100)
@given(arrays(float, 6, elements=st.floats(0, 1)))
def test_illumination_invariants(t):
    task = IlluminationTask(6)
    f, b = illumination_objective(t)
    assert task.fitness_floor <= f <= 0
    assert np.array_equal(b, t[:2])


def test_noisy_wrapper_zero_is_identity():
    obj = ArmTask().objective()
    assert noisy_wrapper(obj, 0.0, 0.0, seed=1) is obj


def test_noisy_wrapper_fitness_std():
    obj = noisy_wrapper(IlluminationTask().objective(), 0.1, 0.0, seed=2)
    X = np.full((100000, 6), 0.5)
    f = np.array([i.fitness for i in evaluate_batch(obj, X)])
    assert abs(f.std() / 0.1 - 1) < 0.05


def test_noisy_wrapper_large_descriptor_noise_clamps():
    obj = noisy_wrapper(IlluminationTask().objective(), 0.0, 5.0, seed=3)
    counter = EvalCounter()
    inds = evaluate_batch(obj, np.full((200, 6), 0.5), counter)
    assert counter.clamp_events > 150
    assert all(obj.descriptor_bounds.contains(i.descriptor) for i in inds)


def one_d(values):
    # genotype index -> fitness, a single descriptor cell
    return ObjectiveSpec(n=1, genotype_bounds=Bounds.uniform(1, 0, 1), d=1, descriptor_bounds=Bounds.uniform(1, 0, 1),
                         evaluator=lambda t: (values(t[0]), np.array([0.5])))


def test_oracle_two_points_one_cell():
    g = exhaustive_oracle(one_d(lambda x: x), 2, GridContainer(GridSpec((1,), Bounds.uniform(1, 0, 1))))
    assert g.elites()[0].fitness == 1.0


def test_oracle_single_point():
    g = exhaustive_oracle(one_d(lambda x: 3.0), 1, GridContainer(GridSpec((4,), Bounds.uniform(1, 0, 1))))
    (e,) = g.elites()
    assert e.genotype[0] == 0.5 and e.fitness == 3.0


def test_oracle_budget():
    with pytest.raises(ValueError):
        lattice_points(Bounds.uniform(8, 0, 1), 10)


@settings(max_examples=10, deadline=None)
@given(st.randoms())
def test_oracle_order_invariant(rnd):
    obj = IlluminationTask(3).objective()
    pts = lattice_points(obj.genotype_bounds, 9)
    perm = list(range(len(pts)))
    rnd.shuffle(perm)
    spec = GridSpec((4, 4), obj.descriptor_bounds)
    a = exhaustive_oracle(obj, 9, GridContainer(spec))
    b = exhaustive_oracle(obj, 9, GridContainer(spec), points=pts[perm])
    fa = {c: e.fitness for c, e in a.items()}
    fb = {c: e.fitness for c, e in b.items()}
    assert fa == fb
