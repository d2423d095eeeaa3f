"""Quick end-to-end check of the noisecrn_py extension module.

Build and install first:

    pip install maturin
    maturin develop --release -m crates/python/Cargo.toml
"""

import math

import noisecrn_py as nc


def main():
    params = nc.PartitionParams("1/30", 4.0, 60.0, 1.0)
    assert params.p_exact == "1/30"
    assert params.violations() == []
    print(params)
    print("classify (100, 100):", params.classify((100, 100)))
    print("classify (400, 2):", params.classify((400, 2)))

    assert nc.falling_factorial(5, 2) == 20
    ff = nc.falling_factorial
    expected = [ff(5, 3) * ff(4, 2), ff(5, 2) * ff(4, 3), ff(5, 4), ff(4, 4), 1]
    assert nc.propensities("X", (5, 4)) == [float(v) for v in expected]
    targets = nc.jump_targets("Y", (0, 7))
    assert all(t[0] >= 0 and t[1] >= 0 for t, _ in targets)

    # The generator applied to f = x1 gives the mean drift of the first coordinate.
    g = nc.apply_generator("X", lambda x1, x2: float(x1), (5, 4))
    rates = nc.propensities("X", (5, 4))
    assert math.isclose(g, 2 * rates[0] - rates[1] - 4 * rates[2] + rates[4])

    traj = nc.ssa_run("X", (5, 5), [{"kind": "time", "t": 50.0}], seed=7)
    times = traj.times
    assert all(a < b for a, b in zip(times, times[1:]))
    print(traj, "stop:", traj.stop)

    t_star, _ = nc.blow_up_time(5.0)
    assert abs(t_star - 0.0012443565368880775) < 1e-9
    sol = nc.integrate_ode((5.0, 5.0), 1.0)
    print("ode verdict:", sol["result"]["verdict"])

    assert abs(nc.c_tau() - 2.0176674850464726) < 1e-9
    assert nc.hitting_tail_bound(1.0, 5.0) <= 1.0

    report = nc.verify_drift(50, 300, params=params)
    assert report["certified_min_radius"] is not None
    print("drift certified from r =", report["certified_min_radius"])

    cond = nc.check_cond_const(0.1, 1.0, params)
    print("cond-const:", cond)
    print("ok")


if __name__ == "__main__":
    main()
