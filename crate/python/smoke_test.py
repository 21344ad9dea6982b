"""Smoke test for the foldframe_py extension module."""

import math

import foldframe_py as ff

af = ff.Airframe()
a12, a34 = af.link_angles_deg
print(f"link angles: a12={a12:.4f} a34={a34:.4f}")

t1, t2, t3, t4 = af.solve_arm(90.0)
assert abs(t1 - 10.0) < 0.1 and t2 == t4

closed, integral = af.activation_work(0.0)
print(f"activation work: {closed:.4f} mJ (integral {integral:.4f} mJ)")
assert abs(closed - 0.23) / 0.23 < 0.1
assert abs(integral - closed) / closed < 0.01

phi = af.phi(90.0)
assert abs(phi - 2.608) < 0.01
x = af.trigger_x(0.0, phi)
assert abs(af.theta2_from_x(x, 0.0) - 90.0) < 0.05

v = ff.min_activation_speed(51.2, 2.0)
assert math.isclose(v, 0.2795, rel_tol=0.01)
out = af.collide(1.5, work_mj=2.0)
assert out["activates"] and abs(out["energy_margin_mJ"] - 55.6) < 0.01

big = af.scaled(2.0)
assert math.isclose(big.force_ratio(105.0, 0.0), af.force_ratio(105.0, 0.0), rel_tol=1e-9)

trace = af.synthetic_trace_csv(0.0, noise_fraction=0.05, seed=3)
row = af.compare([trace], window="from-peak")[0]
print(f"synthetic trace: F_max={row['f_max_N']:.4f} N, model {row['f_model_N']:.4f} N")
assert not row["flagged"]

try:
    af.force_ratio(105.0, -42.0)
except ff.FoldframeError as e:
    print(f"expected error: {e}")
else:
    raise AssertionError("double contact not reported")

print("ok")
