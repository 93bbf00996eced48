"""Smoke test for the galcm_py extension.

Build and install it first:

    pip install --no-build-isolation -e crates/python
    python python/smoke.py
"""

import math
import tempfile

import galcm_py


def main():
    model = galcm_py.Model()
    print(model)

    e_l1 = model.saddle_energy()
    print(f"E_J(L1) = {e_l1:.3f}")
    assert abs(e_l1 - 130055.178) < 1e-3

    names = [p[0] for p in model.lagrange_points()]
    assert names[:2] == ["L1", "L2"], names

    lam, w1, w2 = model.eigenvalues("L1")
    print(f"lambda = {lam:.6f}, omega1 = {w1:.6f}, omega2 = {w2:.6f}")
    assert lam > 0 and w1 > 0 and w2 > 0

    try:
        galcm_py.Model(q_phi=0.5)
    except ValueError as e:
        print(f"rejected: {e}")
    else:
        raise AssertionError("invalid axis ratios were accepted")

    red = model.reduce(order=8)
    print(red, "mixing monomials:", red.mixing_monomials())
    assert red.mixing_monomials() == 0

    nf = [0.0, 0.0, 0.3, -0.2, 0.1, 0.2]
    back = red.to_normal_form(red.to_physical(nf))
    assert max(abs(a - b) for a, b in zip(nf, back)) < 1e-8

    tb = red.break_times(nf, [1e-6, 1e-9], t_max=6.5)
    print("break times:", tb)
    assert tb[0] >= tb[1] > 0

    with tempfile.TemporaryDirectory() as d:
        red.save(d)
        again = galcm_py.Reduction.load(d)
        assert again.energy(nf) == red.energy(nf)

    hnf = model.reduce(order=8, elimination="hyperbolic-normal-form")
    orbit = hnf.planar_lyapunov(e_l1 + 50.0)
    print(f"planar Lyapunov period {orbit.period:.6f}, closure {orbit.closure:.2e}")
    energies = [row[7] for row in orbit.samples]
    assert max(energies) - min(energies) < 1e-6 * abs(orbit.energy)
    assert math.isfinite(orbit.period) and orbit.refined

    print("ok")


if __name__ == "__main__":
    main()
