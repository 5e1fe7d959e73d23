"""Quick check that the extension module loads and the main entry points run."""

import math

import nce_lbm_py as nl


def main():
    lat = nl.Lattice("D1Q3", 40, 10.0, 0.001, 0.9091)
    assert lat.q == 3 and lat.sites == 40
    assert abs(lat.c - 250.0) < 1e-12

    model = nl.Model("density-momentum-1d", lat)
    xs = [p[0] for p in lat.positions()]
    rho = [math.exp(-((x - 5.0) ** 2)) + 0.1 for x in xs]
    mom = [[r * 0.03 * math.sin(2 * math.pi * x / 10.0) for r, x in zip(rho, xs)]]

    feq = model.equilibrium(rho, mom)
    moments = feq.moments()
    assert max(abs(a - b) for a, b in zip(moments["rho"], rho)) < 1e-14

    fc = model.advance(feq, 50)
    rho_c, mom_c = model.restrict(fc)
    out = model.solve_coefficients(rho_c, mom_c, 2, 2)
    assert out["converged"], out
    assert out["terms"] == ["dx1_rho", "dx2_rho", "dx1_rhou", "dx2_rhou"]
    base = nl.norm2(model.equilibrium(rho_c, mom_c), fc)
    lifted = nl.norm2(out["lifted"], fc)
    assert lifted < base, (lifted, base)

    field, report = model.constrained_runs(rho_c, mom_c, 1)
    assert report["converged"] and report["unknowns"] == 120

    rows = nl.run_table(config="preset = exp1\nn = 40\nreference_steps = 50\ncells = 1:1\n")
    assert rows[0]["basis"] == "feq" and rows[1]["converged"]

    predicted, fitted, rel = nl.diffusion_check()
    assert rel < 0.02

    try:
        nl.Lattice("D1Q3", 4, 1.0, 1.0, 1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("n < 8 accepted")

    print(f"ok: baseline {base:.4e}, lifted {lifted:.4e}, diffusion D {fitted:.5f} vs {predicted:.5f}")


if __name__ == "__main__":
    main()
