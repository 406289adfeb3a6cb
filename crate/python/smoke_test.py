"""Smoke test for the Python bindings.

Build and install first, e.g. `pip install maturin && maturin develop -m crates/python/Cargo.toml`,
then run `python python/smoke_test.py`.
"""

import math
import random

import ddimpl_py as dd


def noise(seed, n, channels=1):
    rng = random.Random(seed)
    return [[rng.uniform(-1, 1) for _ in range(channels)] for _ in range(n)]


def main():
    part = dd.Partition(2, [1], [0])
    integrator = dd.StateSpaceModel([[1.0]], [[1.0]], [[1.0]], [[0.0]], part)
    static = dd.StateSpaceModel([], [], [[]], [[1.0]], part)
    decay = dd.StateSpaceModel([[0.5]], [], [[1.0]], [[]])
    assert integrator.invariants() == (1, 1, 1, 1)

    u = noise(7, 60)
    ref = decay.simulate([[] for _ in range(60)], x0=[1.0])
    assert len(ref) == 60 and ref.channels == 1
    assert abs(ref.to_list()[3][0] - 0.125) < 1e-15

    plant = integrator.simulate(u, x0=[0.2])
    v = dd.check_data(plant, ref, part, 2, 1, (1, 0), (1, 1))
    assert v["implementable"] is False and v["residuals"]["hidden_in_ref"] > 0.1, v

    plant = static.simulate(u)
    v = dd.check_data(plant, ref, part, 2, 1, (1, 0), (0, 1))
    assert v["implementable"] is True, v
    assert dd.check_model(static, decay, 2)["implementable"] is True

    syn = dd.synthesize(plant, ref, part, 2)
    assert syn["matches"] and syn["k"] == 1 and syn["L"] == 2
    (c0,), (c1,) = syn["basis"]
    assert abs(c1 - 0.5 * c0) < 1e-8

    # Two planes in R^3 meet in a line.
    line = dd.intersect([[1, 0], [0, 1], [0, 0]], [[1, 0], [0, 0], [0, 1]])
    assert len(line) == 3 and len(line[0]) == 1 and abs(abs(line[0][0]) - 1) < 1e-12
    angles = dd.principal_angles([[1], [0]], [[1], [1]])
    assert abs(angles[0] - math.pi / 4) < 1e-12

    h = plant.hankel(3)
    assert len(h) == 6 and len(h[0]) == 58
    assert plant.is_gpe(2, 1, 0)[0]
    back = dd.Trajectory.from_csv(plant.to_csv())
    assert back.to_list() == plant.to_list()
    assert dd.StateSpaceModel.from_json(integrator.to_json()).invariants() == integrator.invariants()

    try:
        dd.Partition(2, [0], [0])
    except ValueError:
        pass
    else:
        raise AssertionError("overlapping partition accepted")
    print("python smoke test: ok")


if __name__ == "__main__":
    main()
